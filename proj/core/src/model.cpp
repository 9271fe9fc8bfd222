#include "shapmarket/model.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <random>
#include <stdexcept>
#include <vector>

#include "shapmarket/hashing.hpp"

namespace shapmarket {

namespace detail {

// Private constructor surface for TrainedModel.
struct ModelBuilder {
    TrainedModel model;
    TrainedModel&& finish(const ModelSpec& spec, const LabeledDataset& fitted_data) {
        Fnv1a h;
        h.feed(static_cast<std::uint32_t>(spec.kind));
        h.feed(spec.learning_rate);
        h.feed(spec.epochs);
        h.feed(spec.l2);
        h.feed(spec.seed);
        h.feed(spec.num_classes);
        h.feed(fitted_data.fingerprint());
        model.fingerprint_ = h.digest();
        return std::move(model);
    }
    void set_logreg(int num_classes, std::size_t dim, std::vector<double> w,
                    std::vector<double> b) {
        model.kind_ = ModelKind::LogisticRegression;
        model.num_classes_ = num_classes;
        model.dim_ = dim;
        model.weights_ = std::move(w);
        model.bias_ = std::move(b);
    }
    void set_onenn(int num_classes, LabeledDataset data) {
        model.kind_ = ModelKind::OneNearestNeighbor;
        model.num_classes_ = num_classes;
        model.dim_ = data.dim();
        model.train_data_ = std::move(data);
    }
    void set_fingerprint(std::uint64_t f) { model.fingerprint_ = f; }
};

}  // namespace detail

void validate_spec(const ModelSpec& spec) {
    if (spec.num_classes < 2)
        throw std::invalid_argument("model spec: num_classes must be >= 2");
    if (spec.kind == ModelKind::LogisticRegression) {
        if (!(spec.learning_rate > 0.0) || !std::isfinite(spec.learning_rate))
            throw std::invalid_argument("model spec: learning_rate must be positive");
        if (spec.epochs < 0) throw std::invalid_argument("model spec: epochs must be >= 0");
        if (!(spec.l2 >= 0.0) || !std::isfinite(spec.l2))
            throw std::invalid_argument("model spec: l2 must be >= 0");
    }
}

namespace {

void validate_labels(const LabeledDataset& data, int num_classes, const char* what) {
    if (data.max_label() >= num_classes) {
        throw std::invalid_argument(std::string(what) + " contains label " +
                                    std::to_string(data.max_label()) +
                                    " >= num_classes=" + std::to_string(num_classes));
    }
}

// Stable softmax into `probs`; returns log p_y for the loss.
double softmax_log_prob(const std::vector<double>& w, const std::vector<double>& b,
                        int num_classes, std::span<const double> x, int label,
                        std::vector<double>& probs) {
    const std::size_t dim = x.size();
    double zmax = -HUGE_VAL;
    for (int c = 0; c < num_classes; ++c) {
        double z = b[c];
        const double* wc = &w[std::size_t(c) * dim];
        for (std::size_t k = 0; k < dim; ++k) z += wc[k] * x[k];
        probs[c] = z;
        zmax = std::max(zmax, z);
    }
    double denom = 0.0;
    for (int c = 0; c < num_classes; ++c) {
        probs[c] = std::exp(probs[c] - zmax);
        denom += probs[c];
    }
    double logp = std::log(probs[label] / denom);
    for (int c = 0; c < num_classes; ++c) probs[c] /= denom;
    return logp;
}

}  // namespace

namespace detail {

TrainedModel logreg_gradient_descent(const ModelSpec& spec,
                                     const LabeledDataset& primary,
                                     std::span<const LabeledDataset> adversarial,
                                     double lambda) {
    validate_spec(spec);
    if (primary.empty())
        throw std::invalid_argument("logistic training requires non-empty data");
    validate_labels(primary, spec.num_classes, "training data");
    for (const LabeledDataset& t : adversarial) {
        if (!t.empty() && t.dim() != primary.dim())
            throw std::invalid_argument("adversarial task dimension mismatch");
        validate_labels(t, spec.num_classes, "adversarial task data");
    }

    const std::size_t dim = primary.dim();
    const int C = spec.num_classes;
    const std::size_t wsize = std::size_t(C) * dim;

    std::vector<double> w(wsize), b(C, 0.0);
    std::mt19937_64 rng(spec.seed);
    for (std::size_t k = 0; k < wsize; ++k) {
        const double u = static_cast<double>(rng() >> 11) * 0x1.0p-53;
        w[k] = (2.0 * u - 1.0) * 0.01;
    }

    const bool degrade = lambda != 0.0 && !adversarial.empty();
    std::vector<double> gw(wsize), gb(C), probs(C);

    for (int epoch = 0; epoch < spec.epochs; ++epoch) {
        std::fill(gw.begin(), gw.end(), 0.0);
        std::fill(gb.begin(), gb.end(), 0.0);

        double loss = 0.0;
        const double inv_n = 1.0 / double(primary.size());
        for (const DataRecord& r : primary.records()) {
            loss -= softmax_log_prob(w, b, C, r.features, r.label, probs);
            for (int c = 0; c < C; ++c) {
                const double g = (probs[c] - (c == r.label ? 1.0 : 0.0)) * inv_n;
                double* gwc = &gw[std::size_t(c) * dim];
                for (std::size_t k = 0; k < dim; ++k) gwc[k] += g * r.features[k];
                gb[c] += g;
            }
        }
        loss *= inv_n;
        if (!std::isfinite(loss)) {
            throw std::runtime_error("logistic training diverged at epoch " +
                                     std::to_string(epoch) + " (non-finite loss)");
        }

        if (degrade) {
            for (const LabeledDataset& task : adversarial) {
                if (task.empty()) continue;
                const double scale = -lambda / double(task.size());
                for (const DataRecord& r : task.records()) {
                    softmax_log_prob(w, b, C, r.features, r.label, probs);
                    for (int c = 0; c < C; ++c) {
                        const double g = (probs[c] - (c == r.label ? 1.0 : 0.0)) * scale;
                        double* gwc = &gw[std::size_t(c) * dim];
                        for (std::size_t k = 0; k < dim; ++k) gwc[k] += g * r.features[k];
                        gb[c] += g;
                    }
                }
            }
        }

        for (std::size_t k = 0; k < wsize; ++k)
            w[k] -= spec.learning_rate * (gw[k] + spec.l2 * w[k]);
        for (int c = 0; c < C; ++c) b[c] -= spec.learning_rate * gb[c];
    }

    detail::ModelBuilder builder;
    builder.set_logreg(C, dim, std::move(w), std::move(b));
    return builder.finish(spec, primary);
}

}  // namespace detail

TrainedModel train(const ModelSpec& spec, const LabeledDataset& data, bool dedup) {
    validate_spec(spec);
    if (data.empty()) throw std::invalid_argument("train: empty dataset");
    const LabeledDataset fitted = dedup ? distinct(data) : data;

    if (spec.kind == ModelKind::LogisticRegression) {
        return detail::logreg_gradient_descent(spec, fitted, {}, 0.0);
    }
    validate_labels(fitted, spec.num_classes, "training data");
    detail::ModelBuilder builder;
    builder.set_onenn(spec.num_classes, fitted);
    return builder.finish(spec, fitted);
}

int TrainedModel::predict(std::span<const double> features) const {
    if (features.size() != dim_)
        throw std::invalid_argument("predict: feature dimension " +
                                    std::to_string(features.size()) + ", model expects " +
                                    std::to_string(dim_));
    if (kind_ == ModelKind::LogisticRegression) {
        int best = 0;
        double best_z = -HUGE_VAL;
        for (int c = 0; c < num_classes_; ++c) {
            double z = bias_[c];
            const double* wc = &weights_[std::size_t(c) * dim_];
            for (std::size_t k = 0; k < dim_; ++k) z += wc[k] * features[k];
            if (z > best_z) {
                best_z = z;
                best = c;
            }
        }
        return best;
    }

    // 1-NN with a deterministic tie-break: smaller squared distance wins,
    // ties go to the record that sorts first canonically.
    const DataRecord* best = nullptr;
    double best_d2 = HUGE_VAL;
    for (const DataRecord& r : train_data_.records()) {
        double d2 = 0.0;
        for (std::size_t k = 0; k < dim_; ++k) {
            const double diff = r.features[k] - features[k];
            d2 += diff * diff;
        }
        if (best == nullptr || d2 < best_d2 || (d2 == best_d2 && record_less(r, *best))) {
            best = &r;
            best_d2 = d2;
        }
    }
    if (best == nullptr) throw std::logic_error("1-NN model has no memorized data");
    return best->label;
}

double TrainedModel::mean_cross_entropy(const LabeledDataset& data) const {
    if (kind_ != ModelKind::LogisticRegression)
        throw std::invalid_argument("cross-entropy is defined for logistic models only");
    if (data.empty()) throw std::invalid_argument("cross-entropy of empty dataset");
    std::vector<double> probs(num_classes_);
    double loss = 0.0;
    for (const DataRecord& r : data.records())
        loss -= softmax_log_prob(weights_, bias_, num_classes_, r.features, r.label, probs);
    return loss / double(data.size());
}

double accuracy(const TrainedModel& model, const LabeledDataset& data) {
    if (data.empty()) throw std::invalid_argument("accuracy of empty dataset");
    std::size_t hits = 0;
    for (const DataRecord& r : data.records())
        if (model.predict(r.features) == r.label) ++hits;
    return double(hits) / double(data.size());
}

// ---- serialization ---------------------------------------------------------

namespace {

constexpr char kMagic[4] = {'S', 'M', 'K', 'M'};
constexpr std::uint32_t kVersion = 1;

void put_u32(std::string& out, std::uint32_t v) {
    for (int i = 0; i < 4; ++i) out.push_back(char((v >> (8 * i)) & 0xff));
}
void put_u64(std::string& out, std::uint64_t v) {
    for (int i = 0; i < 8; ++i) out.push_back(char((v >> (8 * i)) & 0xff));
}
void put_f64(std::string& out, double d) {
    std::uint64_t bits;
    std::memcpy(&bits, &d, 8);
    put_u64(out, bits);
}

struct Reader {
    const std::vector<unsigned char>& b;
    std::size_t off = 0;
    const std::filesystem::path& path;

    void need(std::size_t n, const char* field) {
        if (off + n > b.size()) {
            throw std::runtime_error(path.string() + ": truncated while reading " + field +
                                     " at byte " + std::to_string(off));
        }
    }
    std::uint32_t u32(const char* field) {
        need(4, field);
        std::uint32_t v = 0;
        for (int i = 0; i < 4; ++i) v |= std::uint32_t(b[off + i]) << (8 * i);
        off += 4;
        return v;
    }
    std::uint64_t u64(const char* field) {
        need(8, field);
        std::uint64_t v = 0;
        for (int i = 0; i < 8; ++i) v |= std::uint64_t(b[off + i]) << (8 * i);
        off += 8;
        return v;
    }
    double f64(const char* field) {
        const std::uint64_t bits = u64(field);
        double d;
        std::memcpy(&d, &bits, 8);
        return d;
    }
};

}  // namespace

void save_model(const TrainedModel& model, const std::filesystem::path& path) {
    std::string blob;
    blob.append(kMagic, 4);
    put_u32(blob, kVersion);
    put_u32(blob, static_cast<std::uint32_t>(model.kind()));
    put_u32(blob, std::uint32_t(model.num_classes()));
    put_u64(blob, model.dim());
    put_u64(blob, model.fingerprint());

    if (model.kind() == ModelKind::LogisticRegression) {
        put_u64(blob, model.weights().size());
        for (double d : model.weights()) put_f64(blob, d);
        put_u64(blob, model.bias().size());
        for (double d : model.bias()) put_f64(blob, d);
    } else {
        put_u64(blob, model.memorized().size());
        for (const DataRecord& r : model.memorized().records()) {
            put_u32(blob, std::uint32_t(r.label));
            for (double d : r.features) put_f64(blob, d);
        }
    }

    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot open " + path.string() + " for writing");
    out.write(blob.data(), std::streamsize(blob.size()));
    if (!out) throw std::runtime_error("write failed for " + path.string());
}

TrainedModel load_model(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open " + path.string());
    std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(in)),
                                     std::istreambuf_iterator<char>());

    Reader r{bytes, 0, path};
    r.need(4, "magic");
    if (std::memcmp(bytes.data(), kMagic, 4) != 0)
        throw std::runtime_error(path.string() + ": bad magic (not a model file)");
    r.off = 4;
    const std::uint32_t version = r.u32("version");
    if (version != kVersion)
        throw std::runtime_error(path.string() + ": unsupported version " +
                                 std::to_string(version));
    const std::uint32_t kind_raw = r.u32("kind");
    if (kind_raw > 1) throw std::runtime_error(path.string() + ": unknown model kind");
    const auto kind = static_cast<ModelKind>(kind_raw);
    const std::uint32_t num_classes = r.u32("num_classes");
    const std::uint64_t dim = r.u64("dim");
    const std::uint64_t fingerprint = r.u64("fingerprint");

    detail::ModelBuilder builder;
    if (kind == ModelKind::LogisticRegression) {
        const std::uint64_t nw = r.u64("weight count");
        if (nw != dim * num_classes)
            throw std::runtime_error(path.string() + ": weight count does not match shape");
        std::vector<double> w(nw);
        for (auto& d : w) d = r.f64("weights");
        const std::uint64_t nb = r.u64("bias count");
        if (nb != num_classes)
            throw std::runtime_error(path.string() + ": bias count does not match shape");
        std::vector<double> b(nb);
        for (auto& d : b) d = r.f64("bias");
        builder.set_logreg(int(num_classes), dim, std::move(w), std::move(b));
    } else {
        const std::uint64_t n = r.u64("record count");
        std::vector<DataRecord> recs(n);
        for (auto& rec : recs) {
            rec.label = int(r.u32("record label"));
            rec.features.resize(dim);
            for (auto& d : rec.features) d = r.f64("record features");
        }
        builder.set_onenn(int(num_classes), LabeledDataset(std::move(recs)));
    }
    if (r.off != bytes.size())
        throw std::runtime_error(path.string() + ": trailing bytes after model payload");
    builder.set_fingerprint(fingerprint);
    return std::move(builder.model);
}

}  // namespace shapmarket
