#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "shapmarket/dataset.hpp"
#include "shapmarket/model.hpp"

namespace shapmarket {

enum class GainKind {
    ModelAccuracy,
    SyntheticCoverage,
};

// A gain function G(V; D) in [0, 1]: the value of training data D measured
// on validation data V. Two families:
//
//  * model_accuracy: trains spec's model on D (deduplicated unless dedup is
//    off) and reports validation accuracy. Replication-invariant exactly
//    when dedup is on.
//  * synthetic_coverage: (min(1, r / universe_size))^exponent where r counts
//    the distinct records of D that are relevant to the task. When V is
//    non-empty, relevant means "appears in distinct(V)"; with an empty V all
//    distinct records count. Exactly replication-invariant; monotone and
//    supermodular for exponent >= 1. Exponents in (0, 1) are accepted for
//    adversarial (submodular) stress runs.
class GainFunction {
public:
    // Default: coverage over a single-item universe. Valid, mostly useful as
    // a placeholder before assigning a real factory result.
    GainFunction() = default;

    static GainFunction model_accuracy(const ModelSpec& spec, bool dedup = true);
    static GainFunction synthetic_coverage(std::size_t universe_size, double exponent = 1.0);

    GainKind kind() const { return kind_; }
    bool dedup() const { return dedup_; }
    const ModelSpec& model_spec() const { return spec_; }
    std::size_t universe_size() const { return universe_size_; }
    double exponent() const { return exponent_; }

    // True when replication invariance G(V; D+D) == G(V; D) is an exact
    // structural property, not just an empirical observation.
    bool exact_replication_invariance() const;

    // Evaluate G(V; D). D must be non-empty (the empty-coalition convention
    // G := 0 lives in the characteristic functions, not here). V must be
    // non-empty for model-backed gains.
    double evaluate(const LabeledDataset& validation, const LabeledDataset& training) const;

    // The model a model-backed gain would evaluate; throws for synthetic
    // gains. Lets callers persist or fingerprint the grand-coalition model.
    TrainedModel build_model(const LabeledDataset& training) const;

    // Hash of the gain's own parameters (not of any dataset).
    std::uint64_t parameter_hash() const;

    std::string describe() const;

private:
    GainKind kind_ = GainKind::SyntheticCoverage;
    ModelSpec spec_;
    bool dedup_ = true;
    std::size_t universe_size_ = 1;
    double exponent_ = 1.0;
};

// ---- property checkers ----------------------------------------------------

struct ReplicationInvarianceReport {
    bool exact = false;       // structurally guaranteed by the gain
    bool holds = false;       // observed on this input
    double deviation = 0.0;   // max |G(V; D*(r+1)) - G(V; D)| over r replicas
};

// Evaluates G on D, D+D, ..., D*(replicas+1) and reports the worst drift.
ReplicationInvarianceReport check_replication_invariance(const GainFunction& gain,
                                                         const LabeledDataset& validation,
                                                         const LabeledDataset& training,
                                                         int replicas = 2);

// A single witness of a failed set-function inequality over pool subsets
// (masks index into the pool vector). For monotonicity, subset_a ⊂ subset_b
// and added_index is -1; for supermodularity the witness is the triple
// (R=subset_a, Q=subset_b, x=added_index) with lhs = g(R∪x)-g(R) and
// rhs = g(Q∪x)-g(Q).
struct SetFunctionViolation {
    std::uint32_t subset_a = 0;
    std::uint32_t subset_b = 0;
    int added_index = -1;
    double lhs = 0.0;
    double rhs = 0.0;
};

struct SetFunctionReport {
    bool holds = true;
    std::size_t checks = 0;
    double worst_excess = 0.0;  // max(lhs - rhs) over all checks
    std::vector<SetFunctionViolation> violations;
};

using PoolGainEvaluator = std::function<double(const LabeledDataset& validation,
                                               const LabeledDataset& training)>;

// Exhaustive monotonicity check of S -> G(V; union of pool[S]) over all
// subset pairs of the pool, with G(empty) := 0. Pool size is capped (the
// check is exponential); exceeding the cap throws std::invalid_argument.
SetFunctionReport check_monotonicity(const PoolGainEvaluator& gain,
                                     const LabeledDataset& validation,
                                     const std::vector<LabeledDataset>& pool,
                                     double tolerance = 1e-12,
                                     int max_pool = 12);
SetFunctionReport check_monotonicity(const GainFunction& gain,
                                     const LabeledDataset& validation,
                                     const std::vector<LabeledDataset>& pool,
                                     double tolerance = 1e-12,
                                     int max_pool = 12);

// Exhaustive supermodularity check: for every Q, every R ⊆ Q and x outside
// Q, g(R∪x)-g(R) <= g(Q∪x)-g(Q) + tolerance.
SetFunctionReport check_supermodularity(const PoolGainEvaluator& gain,
                                        const LabeledDataset& validation,
                                        const std::vector<LabeledDataset>& pool,
                                        double tolerance = 1e-12,
                                        int max_pool = 12);
SetFunctionReport check_supermodularity(const GainFunction& gain,
                                        const LabeledDataset& validation,
                                        const std::vector<LabeledDataset>& pool,
                                        double tolerance = 1e-12,
                                        int max_pool = 12);

// Bounds check: 0 <= G <= 1 on every non-empty pool union.
SetFunctionReport check_bounded(const PoolGainEvaluator& gain,
                                const LabeledDataset& validation,
                                const std::vector<LabeledDataset>& pool,
                                double tolerance = 1e-12,
                                int max_pool = 12);
SetFunctionReport check_bounded(const GainFunction& gain,
                                const LabeledDataset& validation,
                                const std::vector<LabeledDataset>& pool,
                                double tolerance = 1e-12,
                                int max_pool = 12);

std::string to_json_string(const SetFunctionReport& report, int indent = 2);

}  // namespace shapmarket
