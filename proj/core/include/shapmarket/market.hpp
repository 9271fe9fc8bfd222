#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "shapmarket/dataset.hpp"
#include "shapmarket/gain.hpp"
#include "shapmarket/shapley.hpp"

namespace shapmarket {

// A market participant. `id` is the external identifier used in reports;
// roster position (index into the vector) is what coalition bitmasks refer
// to. `replica_of` marks synthetic copies created by replication attacks.
struct Party {
    int id = 0;
    LabeledDataset training;
    LabeledDataset validation;
    std::optional<int> replica_of;
};

struct MarketConfig {
    double unit_price = 1.0;  // c: price per unit of gain
    double tau = 0.0;         // data-value threshold for task relevance
    double lambda = 1.0;      // customized-training degradation weight
    double epsilon = 0.05;    // tolerated own-task accuracy sacrifice
    int exact_cap = 20;       // max parties for exact Shapley
};

// Throws std::invalid_argument naming the offending field.
void validate(const MarketConfig& config);

struct PartyOutcome {
    int party_id = 0;
    double fee = 0.0;              // alpha_i = c * (1 - G(V_i; f_i))
    double standalone_gain = 0.0;  // G(V_i; f_i)
    double price = 0.0;            // a'_i = G(V_i; f^i_P) - G(V_i; f_i)
    double shapley_value = 0.0;    // phi_i
    double shapley_share = 0.0;    // phi_i / v(P)
    double payout = 0.0;           // b_i = c * a * share_i
    double refund = 0.0;           // t_i = (alpha_i - c a'_i) + b_i
    double net = 0.0;              // b_i - c a'_i  (ignores the sunk fee)
    std::optional<int> replica_of;
};

// Per-task summary for multi-task markets.
struct TaskReport {
    int representative_id = 0;       // party id of the first member seen
    std::vector<int> member_ids;     // parties sharing this task
    std::vector<int> relevant_ids;   // selected relevant set of the representative
    double grand_gain = 0.0;         // G(V_task; model on the relevant union)
    std::uint64_t model_fingerprint = 0;
};

struct MarketOutcome {
    std::vector<PartyOutcome> parties;
    double unit_price = 1.0;
    double pool = 0.0;         // a = sum of prices
    double grand_value = 0.0;  // v(P) (or w(P,P))
    bool exact_shapley = true;
    std::vector<TaskReport> tasks;                       // multi-task only
    std::vector<std::pair<Coalition, double>> char_table;  // audit, optional
    std::vector<std::string> warnings;
    std::uint64_t final_model_fingerprint = 0;  // single-task, model gains
};

struct ClearOptions {
    bool audit_table = false;   // attach the full characteristic table
    int sample_permutations = 20000;
    std::uint64_t sample_seed = 1;
};

// Entry fee alpha = c * (1 - G(V; D)).
double fee(const GainFunction& gain, const LabeledDataset& validation,
           const LabeledDataset& training, double unit_price);

// Single-task characteristic function
//   v(S) = (|S|+1) * G(f_S) - sum_{j in S} G(f_j),  v(empty) = 0,
// where f_S is trained on the union of coalition members' data. Gains are
// cached per coalition, so repeated Shapley queries train each model once.
CharacteristicFunction char_single(const GainFunction& gain,
                                   const LabeledDataset& validation,
                                   const std::vector<Party>& parties);

// Clears a single-task market end to end: fees, prices, Shapley division,
// payouts, refunds. Uses exact Shapley up to config.exact_cap parties and
// permutation sampling (with a warning) beyond. Throws std::domain_error
// when v(P) <= 0 and no settlement is possible.
MarketOutcome clear_single(const std::vector<Party>& parties,
                           const LabeledDataset& validation,
                           const GainFunction& gain,
                           const MarketConfig& config,
                           const ClearOptions& options = {});

struct ParticipationEntry {
    int party_id = 0;
    bool helps_others = false;     // exists j != i with G(i union j) > G(j)
    bool market_helps = false;     // exists S strictly containing i with G(S) > G(i)
    bool eligible = false;         // both
    std::string reason;
};

// Pre-trade screen from the market protocol: parties whose data moves no
// one, or whom the market cannot move, should abstain.
std::vector<ParticipationEntry> participation_check(const std::vector<Party>& parties,
                                                    const GainFunction& gain,
                                                    const LabeledDataset& validation);

// Provenance block stamped into every serialized report.
struct Provenance {
    std::uint64_t config_hash = 0;
    std::uint64_t seed = 0;
};

std::string to_json_string(const MarketOutcome& outcome, const Provenance& provenance = {},
                           int indent = 2);
std::string to_json_string(const std::vector<ParticipationEntry>& entries, int indent = 2);

// Flat per-party CSV (one row per party, %.17g doubles).
std::string outcome_to_csv(const MarketOutcome& outcome);

}  // namespace shapmarket
