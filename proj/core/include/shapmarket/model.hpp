#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "shapmarket/dataset.hpp"

namespace shapmarket {

enum class ModelKind {
    LogisticRegression,
    OneNearestNeighbor,
};

struct ModelSpec {
    ModelKind kind = ModelKind::LogisticRegression;
    double learning_rate = 1e-2;
    int epochs = 100;
    double l2 = 1e-4;
    std::uint64_t seed = 0;
    int num_classes = 10;
};

namespace detail {
struct ModelBuilder;
}

// A trained predictor. Logistic regression holds a weight matrix and bias;
// 1-NN holds its (deduplicated, canonically ordered) training set. The
// fingerprint hashes the spec plus the distinct training data, so two
// models trained from any permutation of the same multiset match.
class TrainedModel {
public:
    TrainedModel() = default;

    ModelKind kind() const { return kind_; }
    int num_classes() const { return num_classes_; }
    std::size_t dim() const { return dim_; }
    std::uint64_t fingerprint() const { return fingerprint_; }

    int predict(std::span<const double> features) const;

    // Multinomial CE loss of the model on `data` (logistic only).
    double mean_cross_entropy(const LabeledDataset& data) const;

    const std::vector<double>& weights() const { return weights_; }
    const std::vector<double>& bias() const { return bias_; }
    const LabeledDataset& memorized() const { return train_data_; }

private:
    friend struct detail::ModelBuilder;

    ModelKind kind_ = ModelKind::LogisticRegression;
    int num_classes_ = 0;
    std::size_t dim_ = 0;
    std::vector<double> weights_;  // row-major, num_classes x dim
    std::vector<double> bias_;     // num_classes
    LabeledDataset train_data_;    // 1-NN only
    std::uint64_t fingerprint_ = 0;
};

// Throws std::invalid_argument for malformed specs (num_classes < 2,
// non-positive learning rate, ...). train() calls this; factories that
// store a spec for later use call it too, so bad specs fail fast.
void validate_spec(const ModelSpec& spec);

// Train a model. Training data is deduplicated (exact bitwise) and
// canonically ordered before fitting unless dedup is false, which makes the
// result invariant to record order and to replication of records.
TrainedModel train(const ModelSpec& spec, const LabeledDataset& data, bool dedup = true);

// Fraction of records in `data` the model labels correctly. Empty data is an
// error (gain of an empty coalition is defined at the market layer, not here).
double accuracy(const TrainedModel& model, const LabeledDataset& data);

// Binary round-trip. Format: magic "SMKM", version, kind, shape, then
// little-endian doubles. load_model validates the header and sizes and
// throws std::runtime_error with the failing field.
void save_model(const TrainedModel& model, const std::filesystem::path& path);
TrainedModel load_model(const std::filesystem::path& path);

namespace detail {

// Shared gradient-descent engine for logistic regression. Minimizes
//   CE(primary) - lambda * sum_t CE(adversarial[t]) + l2/2 * ||W||^2
// by full-batch gradient descent. With lambda == 0 or no adversarial tasks
// the adversarial pass is skipped entirely, so plain training and
// customized training at lambda == 0 are byte-identical.
// Throws std::runtime_error (naming the epoch) if the loss goes non-finite.
TrainedModel logreg_gradient_descent(const ModelSpec& spec,
                                     const LabeledDataset& primary,
                                     std::span<const LabeledDataset> adversarial,
                                     double lambda);

}  // namespace detail

}  // namespace shapmarket
