#include <doctest.h>

#include <array>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "shapmarket/dataset.hpp"

using namespace shapmarket;
namespace fs = std::filesystem;

namespace {

fs::path scratch_dir() {
    const fs::path dir = fs::temp_directory_path() / "shapmarket_dataset_tests";
    fs::create_directories(dir);
    return dir;
}

void write_bytes(const fs::path& path, const std::vector<unsigned char>& bytes) {
    std::ofstream out(path, std::ios::binary);
    out.write(reinterpret_cast<const char*>(bytes.data()), std::streamsize(bytes.size()));
}

void be32(std::vector<unsigned char>& out, std::uint32_t v) {
    out.push_back((v >> 24) & 0xff);
    out.push_back((v >> 16) & 0xff);
    out.push_back((v >> 8) & 0xff);
    out.push_back(v & 0xff);
}

}  // namespace

TEST_CASE("record equality is bitwise and record_less is a strict weak order") {
    DataRecord a{{1.0, 2.0}, 3};
    DataRecord b{{1.0, 2.0}, 3};
    DataRecord c{{1.0, 2.5}, 3};
    DataRecord d{{1.0, 2.0}, 4};
    CHECK(record_equal(a, b));
    CHECK_FALSE(record_equal(a, c));
    CHECK_FALSE(record_equal(a, d));
    CHECK_FALSE(record_less(a, b));
    CHECK_FALSE(record_less(b, a));
    CHECK(record_less(a, c));
    CHECK(record_less(a, d));

    // -0.0 and +0.0 compare equal as doubles but have distinct bit patterns;
    // they must order consistently, not equal, so dedup stays exact.
    DataRecord pz{{0.0}, 0};
    DataRecord nz{{-0.0}, 0};
    CHECK_FALSE(record_equal(pz, nz));
    CHECK(record_less(pz, nz) != record_less(nz, pz));
}

TEST_CASE("distinct removes exact duplicates and sorts canonically") {
    LabeledDataset d({{{2.0}, 1}, {{1.0}, 0}, {{2.0}, 1}, {{1.0}, 0}, {{3.0}, 2}});
    const LabeledDataset u = distinct(d);
    REQUIRE(u.size() == 3);
    CHECK(u.record(0).features[0] == 1.0);
    CHECK(u.record(1).features[0] == 2.0);
    CHECK(u.record(2).features[0] == 3.0);
    CHECK(distinct(u).size() == 3);
}

TEST_CASE("concat preserves order and validates dimensions") {
    LabeledDataset a({{{1.0, 0.0}, 0}});
    LabeledDataset b({{{2.0, 0.0}, 1}});
    const LabeledDataset ab = concat(a, b);
    REQUIRE(ab.size() == 2);
    CHECK(ab.record(0).label == 0);
    CHECK(ab.record(1).label == 1);
    CHECK(concat(LabeledDataset(), a).size() == 1);

    LabeledDataset wrong({{{1.0}, 0}});
    CHECK_THROWS_AS((void)concat(a, wrong), std::invalid_argument);
}

TEST_CASE("same_multiset ignores order but counts multiplicity") {
    LabeledDataset a({{{1.0}, 0}, {{2.0}, 1}, {{2.0}, 1}});
    LabeledDataset b({{{2.0}, 1}, {{2.0}, 1}, {{1.0}, 0}});
    LabeledDataset c({{{2.0}, 1}, {{1.0}, 0}});
    CHECK(same_multiset(a, b));
    CHECK_FALSE(same_multiset(a, c));
}

TEST_CASE("fingerprint is order-independent and content-sensitive") {
    LabeledDataset a({{{1.0}, 0}, {{2.0}, 1}});
    LabeledDataset b({{{2.0}, 1}, {{1.0}, 0}});
    LabeledDataset c({{{2.0}, 1}, {{1.5}, 0}});
    CHECK(a.fingerprint() == b.fingerprint());
    CHECK(a.fingerprint() != c.fingerprint());
}

TEST_CASE("filter_labels keeps only the requested labels") {
    LabeledDataset d({{{1.0}, 0}, {{2.0}, 1}, {{3.0}, 2}, {{4.0}, 1}});
    const LabeledDataset f = d.filter_labels(std::array{1, 2});
    REQUIRE(f.size() == 3);
    for (const DataRecord& r : f.records()) CHECK(r.label != 0);
}

TEST_CASE("synth_clusters is deterministic in the seed") {
    const std::vector<ClusterSpec> spec{{{0.0, 0.0}, 1.0, 0, 5}, {{5.0, 5.0}, 0.5, 1, 7}};
    const LabeledDataset a = synth_clusters(spec, 42);
    const LabeledDataset b = synth_clusters(spec, 42);
    const LabeledDataset c = synth_clusters(spec, 43);
    REQUIRE(a.size() == 12);
    CHECK(a.dim() == 2);
    CHECK(a.fingerprint() == b.fingerprint());
    CHECK(a.fingerprint() != c.fingerprint());
    for (std::size_t i = 0; i < a.size(); ++i)
        CHECK(record_equal(a.record(i), b.record(i)));  // byte-identical, same order
}

TEST_CASE("synth_clusters with zero stddev reproduces the centers") {
    const std::vector<ClusterSpec> spec{{{3.0, -1.0}, 0.0, 7, 3}};
    const LabeledDataset d = synth_clusters(spec, 1);
    for (const DataRecord& r : d.records()) {
        CHECK(r.features[0] == 3.0);
        CHECK(r.features[1] == -1.0);
        CHECK(r.label == 7);
    }
}

TEST_CASE("items_dataset maps item ids to one-dimensional records") {
    const LabeledDataset d = items_dataset(std::array{3, 1, 4});
    REQUIRE(d.size() == 3);
    CHECK(d.dim() == 1);
    CHECK(d.record(0).features[0] == 3.0);
    CHECK(d.record(0).label == 3);
    CHECK(d.record(2).label == 4);
}

TEST_CASE("load_idx round-trips a tiny image/label pair") {
    std::vector<unsigned char> images;
    be32(images, 0x00000803);
    be32(images, 2);  // two images
    be32(images, 2);  // rows
    be32(images, 2);  // cols
    for (unsigned char px : {0, 51, 102, 153, 204, 255, 0, 255}) images.push_back(px);
    std::vector<unsigned char> labels;
    be32(labels, 0x00000801);
    be32(labels, 2);
    labels.push_back(3);
    labels.push_back(9);

    const fs::path img_path = scratch_dir() / "tiny-images.idx";
    const fs::path lab_path = scratch_dir() / "tiny-labels.idx";
    write_bytes(img_path, images);
    write_bytes(lab_path, labels);

    const LabeledDataset d = load_idx(img_path, lab_path);
    REQUIRE(d.size() == 2);
    CHECK(d.dim() == 4);
    CHECK(d.record(0).label == 3);
    CHECK(d.record(1).label == 9);
    CHECK(d.record(0).features[0] == 0.0);
    CHECK(d.record(0).features[1] == doctest::Approx(51.0 / 255.0));
    CHECK(d.record(1).features[3] == 1.0);
}

TEST_CASE("load_idx rejects bad magics and truncated payloads") {
    std::vector<unsigned char> bad_magic;
    be32(bad_magic, 0x00000777);
    be32(bad_magic, 0);
    be32(bad_magic, 1);
    be32(bad_magic, 1);
    const fs::path bad_path = scratch_dir() / "bad-magic.idx";
    write_bytes(bad_path, bad_magic);

    std::vector<unsigned char> labels;
    be32(labels, 0x00000801);
    be32(labels, 0);
    const fs::path lab_path = scratch_dir() / "empty-labels.idx";
    write_bytes(lab_path, labels);

    CHECK_THROWS_AS((void)load_idx(bad_path, lab_path), std::runtime_error);

    std::vector<unsigned char> truncated;
    be32(truncated, 0x00000803);
    be32(truncated, 1);
    be32(truncated, 2);
    be32(truncated, 2);
    truncated.push_back(1);  // 1 of 4 pixels
    const fs::path trunc_path = scratch_dir() / "truncated-images.idx";
    write_bytes(trunc_path, truncated);
    std::vector<unsigned char> one_label;
    be32(one_label, 0x00000801);
    be32(one_label, 1);
    one_label.push_back(0);
    const fs::path one_lab_path = scratch_dir() / "one-label.idx";
    write_bytes(one_lab_path, one_label);
    CHECK_THROWS_WITH_AS((void)load_idx(trunc_path, one_lab_path),
                         doctest::Contains("expected 20 bytes"), std::runtime_error);
}

TEST_CASE("load_csv parses headers, features, and labels") {
    const fs::path path = scratch_dir() / "ok.csv";
    std::ofstream(path) << "x,label,y\n1.5,2,-3\n0.25,0,4\n";
    const LabeledDataset d = load_csv(path, "label");
    REQUIRE(d.size() == 2);
    CHECK(d.dim() == 2);
    CHECK(d.record(0).features[0] == 1.5);
    CHECK(d.record(0).features[1] == -3.0);
    CHECK(d.record(0).label == 2);
    CHECK(d.record(1).label == 0);
}

TEST_CASE("load_csv errors name the offending location") {
    const fs::path missing_col = scratch_dir() / "missing-col.csv";
    std::ofstream(missing_col) << "x,y\n1,2\n";
    CHECK_THROWS_WITH_AS((void)load_csv(missing_col, "label"),
                         doctest::Contains("label"), std::runtime_error);

    const fs::path bad_cell = scratch_dir() / "bad-cell.csv";
    std::ofstream(bad_cell) << "x,label\noops,1\n";
    CHECK_THROWS_WITH_AS((void)load_csv(bad_cell, "label"), doctest::Contains("row"),
                         std::runtime_error);

    const fs::path ragged = scratch_dir() / "ragged.csv";
    std::ofstream(ragged) << "x,label\n1,2,3\n";
    CHECK_THROWS_AS((void)load_csv(ragged, "label"), std::runtime_error);
}

TEST_CASE("validation rejects non-finite features and mixed dims") {
    CHECK_THROWS_AS(LabeledDataset({{{1.0}, 0}, {{2.0, 3.0}, 1}}), std::invalid_argument);
    const double inf = std::numeric_limits<double>::infinity();
    CHECK_THROWS_AS(LabeledDataset({{{inf}, 0}}), std::invalid_argument);
}
