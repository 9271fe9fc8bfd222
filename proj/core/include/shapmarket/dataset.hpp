#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

namespace shapmarket {

// One labeled example. Features are raw doubles; equality is bitwise on the
// feature pattern plus exact label equality, so deduplication is exact and
// deterministic (no epsilon comparisons).
struct DataRecord {
    std::vector<double> features;
    int label = 0;
};

bool record_equal(const DataRecord& a, const DataRecord& b);

// Strict weak order used for canonical sorting: lexicographic on feature
// values with a bit-pattern tiebreak (so -0.0 and +0.0 order consistently),
// then on label. Any two records compare equal under this order iff
// record_equal holds.
bool record_less(const DataRecord& a, const DataRecord& b);

// Gaussian cluster description for synthetic data generation.
struct ClusterSpec {
    std::vector<double> center;
    double stddev = 1.0;
    int label = 0;
    int count = 0;
};

// An immutable multiset of labeled records with a fixed feature
// dimensionality. All derived operations (distinct, concat) preserve the
// exact record order they document, so downstream training is reproducible.
class LabeledDataset {
public:
    LabeledDataset() = default;
    explicit LabeledDataset(std::size_t dim, std::string provenance = "");
    LabeledDataset(std::vector<DataRecord> records, std::string provenance = "");

    const std::vector<DataRecord>& records() const { return records_; }
    const DataRecord& record(std::size_t i) const { return records_[i]; }
    std::size_t size() const { return records_.size(); }
    bool empty() const { return records_.empty(); }
    std::size_t dim() const { return dim_; }
    const std::string& provenance() const { return provenance_; }
    int max_label() const;

    // Keep only records whose label is in `labels`.
    LabeledDataset filter_labels(std::span<const int> labels) const;

    // Order-independent content hash: records are hashed in canonical sorted
    // order, so any permutation of the same multiset fingerprints equally.
    std::uint64_t fingerprint() const;

private:
    std::vector<DataRecord> records_;
    std::size_t dim_ = 0;
    std::string provenance_;
};

// Multiset union; preserves a-then-b order. Dimensions must match unless one
// side is empty.
LabeledDataset concat(const LabeledDataset& a, const LabeledDataset& b);

// Canonically sorted set of unique records (exact bitwise dedup).
LabeledDataset distinct(const LabeledDataset& d);

// True iff a and b hold the same records with the same multiplicities,
// regardless of order.
bool same_multiset(const LabeledDataset& a, const LabeledDataset& b);

// Synthetic Gaussian clusters. Sampling is fully specified here (mt19937_64
// plus an explicit Box-Muller transform), so identical seeds give
// byte-identical datasets on any conforming platform.
LabeledDataset synth_clusters(std::span<const ClusterSpec> specs, std::uint64_t seed);

// IDX (MNIST-style) loader: big-endian headers, one byte per pixel scaled
// to [0,1]. Throws std::runtime_error naming the offending byte offset.
LabeledDataset load_idx(const std::filesystem::path& images, const std::filesystem::path& labels);

// CSV loader: first line is a header; `label_column` names the integer label
// column, all other columns are parsed as double features. Errors name the
// row and column. A file with only a header yields an empty dataset whose
// dim is the number of feature columns.
LabeledDataset load_csv(const std::filesystem::path& path, const std::string& label_column);

// Desk-scale helper: item ids become one-dimensional records ({double(id)},
// label=id). Used by coverage-gain markets, tests, and config files.
LabeledDataset items_dataset(std::span<const int> items);

}  // namespace shapmarket
