#include "shapmarket/gain.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include <json.hpp>

#include "shapmarket/hashing.hpp"

namespace shapmarket {

GainFunction GainFunction::model_accuracy(const ModelSpec& spec, bool dedup) {
    validate_spec(spec);
    GainFunction g;
    g.kind_ = GainKind::ModelAccuracy;
    g.spec_ = spec;
    g.dedup_ = dedup;
    return g;
}

GainFunction GainFunction::synthetic_coverage(std::size_t universe_size, double exponent) {
    if (universe_size == 0)
        throw std::invalid_argument("synthetic coverage: universe_size must be >= 1");
    if (!(exponent > 0.0) || !std::isfinite(exponent))
        throw std::invalid_argument("synthetic coverage: exponent must be positive");
    GainFunction g;
    g.kind_ = GainKind::SyntheticCoverage;
    g.universe_size_ = universe_size;
    g.exponent_ = exponent;
    return g;
}

bool GainFunction::exact_replication_invariance() const {
    if (kind_ == GainKind::SyntheticCoverage) return true;
    return dedup_;
}

namespace {

// Count of distinct training records that matter for the task: all of them
// when validation is empty, otherwise only those present in distinct(V).
std::size_t relevant_distinct_count(const LabeledDataset& validation,
                                    const LabeledDataset& training) {
    const LabeledDataset d = distinct(training);
    if (validation.empty()) return d.size();
    const LabeledDataset v = distinct(validation);
    std::size_t count = 0;
    std::size_t i = 0, j = 0;
    while (i < d.size() && j < v.size()) {
        if (record_less(d.record(i), v.record(j))) {
            ++i;
        } else if (record_less(v.record(j), d.record(i))) {
            ++j;
        } else {
            ++count;
            ++i;
            ++j;
        }
    }
    return count;
}

}  // namespace

double GainFunction::evaluate(const LabeledDataset& validation,
                              const LabeledDataset& training) const {
    if (training.empty())
        throw std::invalid_argument("gain evaluated on empty training data (the empty "
                                    "coalition is handled by the characteristic function)");
    if (kind_ == GainKind::ModelAccuracy) {
        if (validation.empty())
            throw std::invalid_argument("model-accuracy gain requires non-empty validation data");
        return accuracy(train(spec_, training, dedup_), validation);
    }

    const std::size_t r = relevant_distinct_count(validation, training);
    const double ratio = std::min(1.0, double(r) / double(universe_size_));
    if (exponent_ == 1.0) return ratio;
    if (exponent_ == 2.0) return ratio * ratio;
    if (exponent_ == 3.0) return ratio * ratio * ratio;
    return std::pow(ratio, exponent_);
}

TrainedModel GainFunction::build_model(const LabeledDataset& training) const {
    if (kind_ != GainKind::ModelAccuracy)
        throw std::invalid_argument("synthetic gains have no underlying model");
    return train(spec_, training, dedup_);
}

std::uint64_t GainFunction::parameter_hash() const {
    Fnv1a h;
    h.feed(static_cast<std::uint32_t>(kind_));
    if (kind_ == GainKind::ModelAccuracy) {
        h.feed(static_cast<std::uint32_t>(spec_.kind));
        h.feed(spec_.learning_rate);
        h.feed(spec_.epochs);
        h.feed(spec_.l2);
        h.feed(spec_.seed);
        h.feed(spec_.num_classes);
        h.feed(dedup_);
    } else {
        h.feed(universe_size_);
        h.feed(exponent_);
    }
    return h.digest();
}

std::string GainFunction::describe() const {
    if (kind_ == GainKind::ModelAccuracy) {
        std::string name =
            spec_.kind == ModelKind::LogisticRegression ? "logistic" : "one_nn";
        return "model_accuracy(" + name + (dedup_ ? ", dedup" : ", no-dedup") + ")";
    }
    return "synthetic_coverage(N=" + std::to_string(universe_size_) +
           ", p=" + std::to_string(exponent_) + ")";
}

// ---- property checkers -----------------------------------------------------

ReplicationInvarianceReport check_replication_invariance(const GainFunction& gain,
                                                         const LabeledDataset& validation,
                                                         const LabeledDataset& training,
                                                         int replicas) {
    if (replicas < 1) throw std::invalid_argument("replicas must be >= 1");
    ReplicationInvarianceReport report;
    report.exact = gain.exact_replication_invariance();
    const double base = gain.evaluate(validation, training);
    LabeledDataset stacked = training;
    double worst = 0.0;
    for (int r = 0; r < replicas; ++r) {
        stacked = concat(stacked, training);
        worst = std::max(worst, std::fabs(gain.evaluate(validation, stacked) - base));
    }
    report.deviation = worst;
    report.holds = worst == 0.0;
    return report;
}

namespace {

std::vector<double> union_gain_table(const PoolGainEvaluator& gain,
                                     const LabeledDataset& validation,
                                     const std::vector<LabeledDataset>& pool,
                                     int max_pool) {
    const int n = int(pool.size());
    if (n > max_pool) {
        throw std::invalid_argument("pool of " + std::to_string(n) +
                                    " exceeds the exhaustive-check cap of " +
                                    std::to_string(max_pool));
    }
    std::vector<double> value(std::size_t(1) << n, 0.0);
    for (std::uint32_t mask = 1; mask < value.size(); ++mask) {
        LabeledDataset u;
        for (int i = 0; i < n; ++i)
            if (mask & (1u << i)) u = concat(u, pool[i]);
        value[mask] = gain(validation, u);
        if (!std::isfinite(value[mask]))
            throw std::runtime_error("gain returned a non-finite value");
    }
    return value;
}

void note_violation(SetFunctionReport& report, std::uint32_t a, std::uint32_t b, int x,
                    double lhs, double rhs) {
    report.holds = false;
    if (report.violations.size() < 64)
        report.violations.push_back(SetFunctionViolation{a, b, x, lhs, rhs});
}

PoolGainEvaluator wrap(const GainFunction& gain) {
    return [&gain](const LabeledDataset& v, const LabeledDataset& d) {
        return gain.evaluate(v, d);
    };
}

}  // namespace

SetFunctionReport check_monotonicity(const PoolGainEvaluator& gain,
                                     const LabeledDataset& validation,
                                     const std::vector<LabeledDataset>& pool,
                                     double tolerance, int max_pool) {
    const auto value = union_gain_table(gain, validation, pool, max_pool);
    SetFunctionReport report;
    for (std::uint32_t q = 1; q < value.size(); ++q) {
        // All proper submasks of q, including the empty set.
        std::uint32_t a = (q - 1) & q;
        for (;; a = (a - 1) & q) {
            ++report.checks;
            const double excess = value[a] - value[q];
            report.worst_excess = std::max(report.worst_excess, excess);
            if (excess > tolerance) note_violation(report, a, q, -1, value[a], value[q]);
            if (a == 0) break;
        }
    }
    return report;
}

SetFunctionReport check_monotonicity(const GainFunction& gain, const LabeledDataset& validation,
                                     const std::vector<LabeledDataset>& pool, double tolerance,
                                     int max_pool) {
    return check_monotonicity(wrap(gain), validation, pool, tolerance, max_pool);
}

SetFunctionReport check_supermodularity(const PoolGainEvaluator& gain,
                                        const LabeledDataset& validation,
                                        const std::vector<LabeledDataset>& pool,
                                        double tolerance, int max_pool) {
    const auto value = union_gain_table(gain, validation, pool, max_pool);
    const int n = int(pool.size());
    const std::uint32_t full = std::uint32_t(value.size() - 1);
    SetFunctionReport report;
    for (int x = 0; x < n; ++x) {
        const std::uint32_t xb = 1u << x;
        const std::uint32_t rest = full ^ xb;
        // Every Q not containing x, every R subset of Q.
        for (std::uint32_t q = rest;; q = (q - 1) & rest) {
            for (std::uint32_t r = q;; r = (r - 1) & q) {
                ++report.checks;
                const double lhs = value[r | xb] - value[r];
                const double rhs = value[q | xb] - value[q];
                report.worst_excess = std::max(report.worst_excess, lhs - rhs);
                if (lhs > rhs + tolerance) note_violation(report, r, q, x, lhs, rhs);
                if (r == 0) break;
            }
            if (q == 0) break;
        }
    }
    return report;
}

SetFunctionReport check_supermodularity(const GainFunction& gain,
                                        const LabeledDataset& validation,
                                        const std::vector<LabeledDataset>& pool,
                                        double tolerance, int max_pool) {
    return check_supermodularity(wrap(gain), validation, pool, tolerance, max_pool);
}

SetFunctionReport check_bounded(const PoolGainEvaluator& gain, const LabeledDataset& validation,
                                const std::vector<LabeledDataset>& pool, double tolerance,
                                int max_pool) {
    const auto value = union_gain_table(gain, validation, pool, max_pool);
    SetFunctionReport report;
    for (std::uint32_t mask = 1; mask < value.size(); ++mask) {
        ++report.checks;
        const double low_excess = -value[mask];
        const double high_excess = value[mask] - 1.0;
        report.worst_excess = std::max({report.worst_excess, low_excess, high_excess});
        if (low_excess > tolerance) note_violation(report, mask, mask, -1, value[mask], 0.0);
        if (high_excess > tolerance) note_violation(report, mask, mask, -1, value[mask], 1.0);
    }
    return report;
}

SetFunctionReport check_bounded(const GainFunction& gain, const LabeledDataset& validation,
                                const std::vector<LabeledDataset>& pool, double tolerance,
                                int max_pool) {
    return check_bounded(wrap(gain), validation, pool, tolerance, max_pool);
}

std::string to_json_string(const SetFunctionReport& report, int indent) {
    nlohmann::json j;
    j["holds"] = report.holds;
    j["checks"] = report.checks;
    j["worst_excess"] = report.worst_excess;
    auto& v = j["violations"] = nlohmann::json::array();
    for (const SetFunctionViolation& w : report.violations) {
        v.push_back({{"subset_a", w.subset_a},
                     {"subset_b", w.subset_b},
                     {"added_index", w.added_index},
                     {"lhs", w.lhs},
                     {"rhs", w.rhs}});
    }
    return j.dump(indent);
}

}  // namespace shapmarket
