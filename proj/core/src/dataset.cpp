#include "shapmarket/dataset.hpp"

#include <algorithm>
#include <bit>
#include <charconv>
#include <cmath>
#include <cstring>
#include <fstream>
#include <random>
#include <sstream>
#include <stdexcept>

#include "shapmarket/hashing.hpp"

namespace shapmarket {

bool record_equal(const DataRecord& a, const DataRecord& b) {
    if (a.label != b.label || a.features.size() != b.features.size()) return false;
    if (a.features.empty()) return true;
    return std::memcmp(a.features.data(), b.features.data(),
                       a.features.size() * sizeof(double)) == 0;
}

bool record_less(const DataRecord& a, const DataRecord& b) {
    const std::size_t n = std::min(a.features.size(), b.features.size());
    for (std::size_t k = 0; k < n; ++k) {
        const double x = a.features[k];
        const double y = b.features[k];
        if (x < y) return true;
        if (y < x) return false;
        // Value-equal but possibly distinct bit patterns (+0.0 vs -0.0):
        // order by bits so the order stays strict and total on finite data.
        const auto xb = std::bit_cast<std::uint64_t>(x);
        const auto yb = std::bit_cast<std::uint64_t>(y);
        if (xb != yb) return xb < yb;
    }
    if (a.features.size() != b.features.size())
        return a.features.size() < b.features.size();
    return a.label < b.label;
}

namespace {

void validate_records(const std::vector<DataRecord>& records, std::size_t dim) {
    for (std::size_t i = 0; i < records.size(); ++i) {
        const DataRecord& r = records[i];
        if (r.features.size() != dim) {
            throw std::invalid_argument(
                "dataset record " + std::to_string(i) + " has dimension " +
                std::to_string(r.features.size()) + ", expected " + std::to_string(dim));
        }
        if (r.label < 0) {
            throw std::invalid_argument("dataset record " + std::to_string(i) +
                                        " has negative label " + std::to_string(r.label));
        }
        for (std::size_t k = 0; k < r.features.size(); ++k) {
            if (!std::isfinite(r.features[k])) {
                throw std::invalid_argument("dataset record " + std::to_string(i) +
                                            " has non-finite feature at index " +
                                            std::to_string(k));
            }
        }
    }
}

}  // namespace

LabeledDataset::LabeledDataset(std::size_t dim, std::string provenance)
    : dim_(dim), provenance_(std::move(provenance)) {}

LabeledDataset::LabeledDataset(std::vector<DataRecord> records, std::string provenance)
    : records_(std::move(records)), provenance_(std::move(provenance)) {
    dim_ = records_.empty() ? 0 : records_.front().features.size();
    validate_records(records_, dim_);
}

int LabeledDataset::max_label() const {
    int m = -1;
    for (const DataRecord& r : records_) m = std::max(m, r.label);
    return m;
}

LabeledDataset LabeledDataset::filter_labels(std::span<const int> labels) const {
    std::vector<DataRecord> kept;
    for (const DataRecord& r : records_) {
        if (std::find(labels.begin(), labels.end(), r.label) != labels.end())
            kept.push_back(r);
    }
    LabeledDataset out(std::move(kept), provenance_);
    if (out.records_.empty()) out.dim_ = dim_;
    return out;
}

std::uint64_t LabeledDataset::fingerprint() const {
    std::vector<const DataRecord*> order;
    order.reserve(records_.size());
    for (const DataRecord& r : records_) order.push_back(&r);
    std::sort(order.begin(), order.end(),
              [](const DataRecord* a, const DataRecord* b) { return record_less(*a, *b); });

    Fnv1a h;
    h.feed(dim_);
    h.feed(records_.size());
    for (const DataRecord* r : order) {
        h.feed(r->label);
        h.feed_bytes(r->features.data(), r->features.size() * sizeof(double));
    }
    return h.digest();
}

LabeledDataset concat(const LabeledDataset& a, const LabeledDataset& b) {
    if (!a.empty() && !b.empty() && a.dim() != b.dim()) {
        throw std::invalid_argument("concat: dimension mismatch (" + std::to_string(a.dim()) +
                                    " vs " + std::to_string(b.dim()) + ")");
    }
    std::vector<DataRecord> merged;
    merged.reserve(a.size() + b.size());
    merged.insert(merged.end(), a.records().begin(), a.records().end());
    merged.insert(merged.end(), b.records().begin(), b.records().end());
    LabeledDataset out(std::move(merged));
    if (out.empty()) {
        // Preserve a known dimension through empty unions.
        return LabeledDataset(a.dim() != 0 ? a.dim() : b.dim());
    }
    return out;
}

LabeledDataset distinct(const LabeledDataset& d) {
    std::vector<DataRecord> recs = d.records();
    std::sort(recs.begin(), recs.end(), record_less);
    recs.erase(std::unique(recs.begin(), recs.end(), record_equal), recs.end());
    LabeledDataset out(std::move(recs), d.provenance());
    return out;
}

bool same_multiset(const LabeledDataset& a, const LabeledDataset& b) {
    if (a.size() != b.size()) return false;
    if (!a.empty() && !b.empty() && a.dim() != b.dim()) return false;
    std::vector<DataRecord> ra = a.records();
    std::vector<DataRecord> rb = b.records();
    std::sort(ra.begin(), ra.end(), record_less);
    std::sort(rb.begin(), rb.end(), record_less);
    for (std::size_t i = 0; i < ra.size(); ++i) {
        if (!record_equal(ra[i], rb[i])) return false;
    }
    return true;
}

namespace {

double unit_uniform(std::mt19937_64& rng) {
    // 53 random bits into [0, 1); fully specified, unlike
    // std::uniform_real_distribution.
    return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

// Box-Muller with an explicit spare so the gaussian stream is a pure
// function of the mt19937_64 word stream.
class GaussianStream {
public:
    explicit GaussianStream(std::uint64_t seed) : rng_(seed) {}

    double next() {
        if (has_spare_) {
            has_spare_ = false;
            return spare_;
        }
        const double u1 = static_cast<double>((rng_() >> 11) + 1) * 0x1.0p-53;  // (0, 1]
        const double u2 = unit_uniform(rng_);
        const double radius = std::sqrt(-2.0 * std::log(u1));
        const double angle = 6.283185307179586477 * u2;
        spare_ = radius * std::sin(angle);
        has_spare_ = true;
        return radius * std::cos(angle);
    }

private:
    std::mt19937_64 rng_;
    double spare_ = 0.0;
    bool has_spare_ = false;
};

}  // namespace

LabeledDataset synth_clusters(std::span<const ClusterSpec> specs, std::uint64_t seed) {
    std::size_t dim = 0;
    for (std::size_t s = 0; s < specs.size(); ++s) {
        const ClusterSpec& c = specs[s];
        if (c.center.empty())
            throw std::invalid_argument("cluster " + std::to_string(s) + " has empty center");
        if (dim == 0) dim = c.center.size();
        if (c.center.size() != dim)
            throw std::invalid_argument("cluster " + std::to_string(s) +
                                        " center dimension mismatch");
        if (!(c.stddev >= 0.0) || !std::isfinite(c.stddev))
            throw std::invalid_argument("cluster " + std::to_string(s) + " has invalid stddev");
        if (c.count < 0)
            throw std::invalid_argument("cluster " + std::to_string(s) + " has negative count");
        if (c.label < 0)
            throw std::invalid_argument("cluster " + std::to_string(s) + " has negative label");
    }

    GaussianStream gauss(seed);
    std::vector<DataRecord> records;
    for (const ClusterSpec& c : specs) {
        for (int n = 0; n < c.count; ++n) {
            DataRecord r;
            r.label = c.label;
            r.features.resize(dim);
            for (std::size_t k = 0; k < dim; ++k)
                r.features[k] = c.center[k] + c.stddev * gauss.next();
            records.push_back(std::move(r));
        }
    }
    return LabeledDataset(std::move(records), "synth");
}

namespace {

std::vector<unsigned char> read_file_bytes(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open " + path.string());
    std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(in)),
                                     std::istreambuf_iterator<char>());
    return bytes;
}

std::uint32_t be32(const std::vector<unsigned char>& b, std::size_t off,
                   const std::filesystem::path& path) {
    if (off + 4 > b.size()) {
        throw std::runtime_error(path.string() + ": truncated at byte " + std::to_string(off) +
                                 " (need 4 more bytes)");
    }
    return (std::uint32_t(b[off]) << 24) | (std::uint32_t(b[off + 1]) << 16) |
           (std::uint32_t(b[off + 2]) << 8) | std::uint32_t(b[off + 3]);
}

}  // namespace

LabeledDataset load_idx(const std::filesystem::path& images, const std::filesystem::path& labels) {
    const auto ib = read_file_bytes(images);
    const auto lb = read_file_bytes(labels);

    const std::uint32_t imagic = be32(ib, 0, images);
    if (imagic != 0x00000803u) {
        throw std::runtime_error(images.string() + ": bad magic 0x" + [&] {
            char buf[16];
            std::snprintf(buf, sizeof(buf), "%08x", imagic);
            return std::string(buf);
        }() + " (expected 00000803 image file)");
    }
    const std::uint32_t count = be32(ib, 4, images);
    const std::uint32_t rows = be32(ib, 8, images);
    const std::uint32_t cols = be32(ib, 12, images);
    const std::size_t pixels = std::size_t(rows) * cols;
    if (pixels == 0) throw std::runtime_error(images.string() + ": zero image dimensions");
    if (ib.size() != 16 + pixels * count) {
        throw std::runtime_error(images.string() + ": expected " +
                                 std::to_string(16 + pixels * count) + " bytes, found " +
                                 std::to_string(ib.size()));
    }

    const std::uint32_t lmagic = be32(lb, 0, labels);
    if (lmagic != 0x00000801u)
        throw std::runtime_error(labels.string() + ": bad magic (expected 00000801 label file)");
    const std::uint32_t lcount = be32(lb, 4, labels);
    if (lcount != count) {
        throw std::runtime_error("label count " + std::to_string(lcount) + " in " +
                                 labels.string() + " does not match image count " +
                                 std::to_string(count));
    }
    if (lb.size() != 8 + std::size_t(lcount))
        throw std::runtime_error(labels.string() + ": expected " +
                                 std::to_string(8 + std::size_t(lcount)) + " bytes, found " +
                                 std::to_string(lb.size()));

    std::vector<DataRecord> records(count);
    for (std::uint32_t n = 0; n < count; ++n) {
        DataRecord& r = records[n];
        r.label = lb[8 + n];
        r.features.resize(pixels);
        const std::size_t base = 16 + std::size_t(n) * pixels;
        for (std::size_t p = 0; p < pixels; ++p)
            r.features[p] = double(ib[base + p]) / 255.0;
    }
    return LabeledDataset(std::move(records), images.filename().string());
}

namespace {

std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> fields;
    std::string cur;
    for (char ch : line) {
        if (ch == ',') {
            fields.push_back(cur);
            cur.clear();
        } else if (ch != '\r') {
            cur.push_back(ch);
        }
    }
    fields.push_back(cur);
    return fields;
}

}  // namespace

LabeledDataset load_csv(const std::filesystem::path& path, const std::string& label_column) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open " + path.string());

    std::string line;
    if (!std::getline(in, line))
        throw std::runtime_error(path.string() + ": empty file (expected a header row)");
    const std::vector<std::string> header = split_csv_line(line);

    std::size_t label_idx = header.size();
    for (std::size_t i = 0; i < header.size(); ++i) {
        if (header[i] == label_column) {
            label_idx = i;
            break;
        }
    }
    if (label_idx == header.size()) {
        std::string cols;
        for (std::size_t i = 0; i < header.size(); ++i)
            cols += (i ? ", " : "") + header[i];
        throw std::runtime_error(path.string() + ": label column '" + label_column +
                                 "' not found (columns: " + cols + ")");
    }

    std::vector<DataRecord> records;
    std::size_t row = 1;
    while (std::getline(in, line)) {
        ++row;
        if (line.empty() || line == "\r") continue;
        const std::vector<std::string> fields = split_csv_line(line);
        if (fields.size() != header.size()) {
            throw std::runtime_error(path.string() + ": row " + std::to_string(row) + " has " +
                                     std::to_string(fields.size()) + " fields, expected " +
                                     std::to_string(header.size()));
        }
        DataRecord r;
        r.features.reserve(header.size() - 1);
        for (std::size_t i = 0; i < fields.size(); ++i) {
            const std::string& f = fields[i];
            if (i == label_idx) {
                int v = 0;
                auto [p, ec] = std::from_chars(f.data(), f.data() + f.size(), v);
                if (ec != std::errc() || p != f.data() + f.size()) {
                    throw std::runtime_error(path.string() + ": row " + std::to_string(row) +
                                             ", column '" + header[i] + "': cannot parse '" + f +
                                             "' as integer label");
                }
                r.label = v;
            } else {
                double v = 0.0;
                auto [p, ec] = std::from_chars(f.data(), f.data() + f.size(), v);
                if (ec != std::errc() || p != f.data() + f.size()) {
                    throw std::runtime_error(path.string() + ": row " + std::to_string(row) +
                                             ", column '" + header[i] + "': cannot parse '" + f +
                                             "' as double");
                }
                r.features.push_back(v);
            }
        }
        records.push_back(std::move(r));
    }

    if (records.empty()) return LabeledDataset(header.size() - 1, path.filename().string());
    return LabeledDataset(std::move(records), path.filename().string());
}

LabeledDataset items_dataset(std::span<const int> items) {
    std::vector<DataRecord> records;
    records.reserve(items.size());
    for (int item : items) {
        if (item < 0) throw std::invalid_argument("item ids must be non-negative");
        records.push_back(DataRecord{{double(item)}, item});
    }
    return LabeledDataset(std::move(records), "items");
}

}  // namespace shapmarket
