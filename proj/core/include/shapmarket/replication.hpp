#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "shapmarket/market.hpp"
#include "shapmarket/multi_task.hpp"

namespace shapmarket {

enum class MarketKind { Single, Multi };

// Roster with `count` bitwise copies of the given party appended. Replicas
// get fresh ids (max id + 1, ...) and replica_of set to the original.
std::vector<Party> replicate(const std::vector<Party>& parties, int party_id, int count);

// Witness of a violated replica marginal bound: a coalition containing the
// replica for which the original's marginal exceeded its price.
struct MarginViolation {
    Coalition coalition = 0;
    double marginal = 0.0;
    double cap = 0.0;  // a'_target
};

// Everything one replication attack produces. The family aggregates sum the
// target and its replicas. For a single replica the report also carries the
// full analytic battery: the robustness condition on normalized Shapley
// values, the bound phi^R <= (phi v(P) + a') / (2 v(P^R)), the value shift
// v(P^R) == v(P) + a', the per-coalition marginal caps, the exact 1/2
// Shapley-weight identity over replica-containing coalitions, and the
// a'/(2 v(P^R)) cap on the mass those coalitions actually contribute.
struct RobustnessReport {
    MarketKind kind = MarketKind::Single;
    int target_id = 0;
    int replicas = 1;

    MarketOutcome original;
    MarketOutcome replicated;

    double honest_net = 0.0;      // t: target's net in the honest market
    double family_net = 0.0;      // t_R: net summed over target + replicas
    double honest_share = 0.0;    // normalized Shapley share, honest
    double family_share = 0.0;    // summed normalized share of the family
    double price = 0.0;           // a'_target in the honest market
    bool robust = false;          // family_net <= honest_net + 1e-9

    // Single-replica analytics (left NaN for replicas != 1).
    double condition_lhs = 0.0, condition_rhs = 0.0;
    bool condition_holds = false;
    double phi_bound_lhs = 0.0, phi_bound_rhs = 0.0;
    bool phi_bound_holds = false;
    double value_shift_lhs = 0.0, value_shift_rhs = 0.0;
    bool value_shift_holds = false;
    double new_coalition_weight = 0.0;  // must equal 1/2 exactly
    double new_coalition_mass = 0.0;    // observed normalized mass
    double new_coalition_cap = 0.0;     // a' / (2 v(P^R))
    bool mass_cap_holds = false;
    std::vector<MarginViolation> margin_violations;
    bool corollary_applicable = false;  // a' == 0
    double corollary_lhs = 0.0, corollary_rhs = 0.0;
};

// Runs the market with and without `replicas` copies of the target and
// compares family payoff against honest payoff. Fees are identical for the
// original in both runs and each replica pays its own fee on top, so the
// fee-free net comparison used here is the attacker-optimistic one.
RobustnessReport attack_payoff(const std::vector<Party>& parties,
                               int target_id,
                               int replicas,
                               const GainFunction& gain,
                               const MarketConfig& config,
                               MarketKind kind);

// Single-replica deep check only (the analytic battery above) without the
// full sweep conveniences. attack_payoff(replicas == 1) includes this.
RobustnessReport verify_lemma_bounds(const std::vector<Party>& parties,
                                     int target_id,
                                     const GainFunction& gain,
                                     const MarketConfig& config,
                                     MarketKind kind);

struct AttackSweepRow {
    int replicas = 0;
    double family_net = 0.0;
    double honest_net = 0.0;
    double family_share = 0.0;
    double honest_share = 0.0;
    double grand_value = 0.0;
    double pool = 0.0;
};

// Replays the attack for k = 0..max_replicas copies.
std::vector<AttackSweepRow> attack_sweep(const std::vector<Party>& parties,
                                         int target_id,
                                         int max_replicas,
                                         const GainFunction& gain,
                                         const MarketConfig& config,
                                         MarketKind kind);

// ---- randomized property suite --------------------------------------------

struct SuiteOptions {
    int trials = 100;
    int min_parties = 2;
    int max_parties = 5;
    std::uint64_t seed = 1;
    MarketKind kind = MarketKind::Single;
    // Inject a submodular coverage exponent (0.5): theorem preconditions are
    // deliberately broken, so violations are reported, not asserted.
    bool adversarial_submodular = false;
};

struct SuiteCounterexample {
    std::uint64_t trial_seed = 0;
    int trial = 0;
    int parties = 0;
    int target_id = 0;
    std::string which;  // failed invariant
    double lhs = 0.0, rhs = 0.0;
};

struct SuiteSummary {
    SuiteOptions options;
    int attacks = 0;
    int robustness_violations = 0;
    int condition_violations = 0;
    int phi_bound_violations = 0;
    int value_shift_violations = 0;
    int margin_violations = 0;
    int weight_identity_violations = 0;
    int mass_cap_violations = 0;
    std::vector<SuiteCounterexample> counterexamples;

    bool clean() const {
        return robustness_violations == 0 && condition_violations == 0 &&
               phi_bound_violations == 0 && value_shift_violations == 0 &&
               margin_violations == 0 && weight_identity_violations == 0 &&
               mass_cap_violations == 0;
    }
};

// Generates random coverage-gain markets (tau pinned to 0 so task relevance
// is stable under replication), replicates every party once, and checks the
// full battery per attack.
SuiteSummary randomized_robustness_suite(const SuiteOptions& options);

// Random market generator backing the suite; exposed so tests and the
// acceptance harness can draw from the same distribution. Coverage gain
// over a small item universe, disjoint endowments, every party non-empty.
struct RandomMarket {
    std::vector<Party> parties;
    LabeledDataset validation;  // single-task validation (empty for multi)
    GainFunction gain;
    MarketKind kind = MarketKind::Single;
};

RandomMarket random_coverage_market(std::uint64_t seed, int parties, MarketKind kind,
                                    double exponent = 0.0 /* 0 => random in {1,2,3} */);

std::string to_json_string(const RobustnessReport& report, const Provenance& provenance = {},
                           int indent = 2);
std::string to_json_string(const SuiteSummary& summary, const Provenance& provenance = {},
                           int indent = 2);
std::string sweep_to_csv(const std::vector<AttackSweepRow>& rows);

}  // namespace shapmarket
