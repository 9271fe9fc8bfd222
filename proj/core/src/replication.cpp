#include "shapmarket/replication.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <numeric>
#include <random>
#include <stdexcept>

#include <json.hpp>

#include "market_internal.hpp"
#include "shapmarket/hashing.hpp"

namespace shapmarket {

std::vector<Party> replicate(const std::vector<Party>& parties, int party_id, int count) {
    if (count < 0) throw std::invalid_argument("replica count must be >= 0");
    const Party* target = nullptr;
    int max_id = 0;
    for (const Party& p : parties) {
        if (p.id == party_id) target = &p;
        max_id = std::max(max_id, p.id);
    }
    if (target == nullptr)
        throw std::invalid_argument("no party with id " + std::to_string(party_id));

    std::vector<Party> out = parties;
    for (int k = 0; k < count; ++k) {
        Party replica = *target;
        replica.id = max_id + 1 + k;
        replica.replica_of = party_id;
        out.push_back(std::move(replica));
    }
    return out;
}

namespace {

constexpr double kNetTolerance = 1e-9;

LabeledDataset single_task_validation(const std::vector<Party>& parties) {
    for (const Party& p : parties) {
        if (!p.validation.empty()) return p.validation;
    }
    return LabeledDataset();
}

MarketOutcome run_clear(MarketKind kind, const std::vector<Party>& parties,
                        const GainFunction& gain, const MarketConfig& config) {
    if (kind == MarketKind::Single)
        return clear_single(parties, single_task_validation(parties), gain, config);
    return clear_multi(parties, gain, config);
}

const PartyOutcome& find_party(const MarketOutcome& outcome, int id) {
    for (const PartyOutcome& po : outcome.parties) {
        if (po.party_id == id) return po;
    }
    throw std::logic_error("party id missing from outcome");
}

CharacteristicFunction build_char(MarketKind kind, const std::vector<Party>& parties,
                                  const GainFunction& gain, const MarketConfig& config) {
    if (kind == MarketKind::Single)
        return char_single(gain, single_task_validation(parties), parties);
    return char_multi(gain, parties,
                      select_relevance(parties, gain, config.tau, config.exact_cap));
}

// The single-replica analytic battery; assumes report.original/replicated
// are already filled and exactly one replica was added (roster index m).
void fill_single_replica_analytics(RobustnessReport& report,
                                   const std::vector<Party>& parties, int target_index,
                                   const GainFunction& gain, const MarketConfig& config) {
    const double a = report.original.pool;
    const double aprime = report.price;
    const double phi_hat = report.honest_share;
    const double phi_hat_r = find_party(report.replicated, report.target_id).shapley_share;
    const double vp = report.original.grand_value;
    const double vpr = report.replicated.grand_value;

    report.condition_lhs = phi_hat_r;
    if (a + aprime > 0.0) {
        report.condition_rhs = (phi_hat * a + aprime) / (2.0 * (a + aprime));
        report.condition_holds = report.condition_lhs <= report.condition_rhs + kNetTolerance;
    } else {
        // No pool at stake: the condition is vacuous.
        report.condition_rhs = std::numeric_limits<double>::quiet_NaN();
        report.condition_holds = true;
    }

    report.phi_bound_lhs = phi_hat_r;
    report.phi_bound_rhs = (phi_hat * vp + aprime) / (2.0 * vpr);
    report.phi_bound_holds = report.phi_bound_lhs <= report.phi_bound_rhs + kNetTolerance;

    report.value_shift_lhs = vpr;
    report.value_shift_rhs = vp + aprime;
    report.value_shift_holds =
        std::fabs(vpr - report.value_shift_rhs) <=
        kNetTolerance * std::max(1.0, std::fabs(report.value_shift_rhs));

    report.corollary_applicable = aprime == 0.0;
    if (report.corollary_applicable) {
        report.corollary_lhs = phi_hat_r;
        report.corollary_rhs = phi_hat / 2.0;
    }

    // Per-coalition marginal caps plus the exact-weight and mass identities
    // over coalitions that contain the replica but not the original.
    const int m = int(parties.size());
    const int mr = m + 1;
    if (mr > kDefaultExactCap) return;  // exhaustive scan not feasible

    const std::vector<Party> roster_r = replicate(parties, report.target_id, 1);
    const CharacteristicFunction vr = build_char(report.kind, roster_r, gain, config);
    const Coalition target_bit = Coalition(1) << target_index;
    const Coalition replica_bit = Coalition(1) << m;
    const Coalition full_r = vr.full_coalition();

    std::vector<double> weight(mr);
    for (int s = 0; s < mr; ++s)
        weight[s] = 1.0 / (double(mr) * double(binomial(mr - 1, s)));

    double weight_sum = 0.0;
    double mass = 0.0;
    for (Coalition mask = 0; mask <= full_r; ++mask) {
        if (!(mask & replica_bit) || (mask & target_bit)) continue;
        const double marginal = vr.value(mask | target_bit) - vr.value(mask);
        const double w = weight[coalition_size(mask)];
        weight_sum += w;
        mass += w * marginal;
        if (marginal > aprime + 1e-12)
            report.margin_violations.push_back(MarginViolation{mask, marginal, aprime});
    }
    report.new_coalition_weight = weight_sum;
    report.new_coalition_mass = mass / vpr;
    report.new_coalition_cap = aprime / (2.0 * vpr);
    report.mass_cap_holds = report.new_coalition_mass <= report.new_coalition_cap + 1e-12;
}

}  // namespace

RobustnessReport attack_payoff(const std::vector<Party>& parties, int target_id, int replicas,
                               const GainFunction& gain, const MarketConfig& config,
                               MarketKind kind) {
    if (replicas < 1) throw std::invalid_argument("attack needs at least one replica");
    int target_index = -1;
    for (std::size_t i = 0; i < parties.size(); ++i) {
        if (parties[i].id == target_id) target_index = int(i);
    }
    if (target_index < 0)
        throw std::invalid_argument("no party with id " + std::to_string(target_id));

    RobustnessReport report;
    report.kind = kind;
    report.target_id = target_id;
    report.replicas = replicas;
    const double nan = std::numeric_limits<double>::quiet_NaN();
    report.condition_lhs = report.condition_rhs = nan;
    report.phi_bound_lhs = report.phi_bound_rhs = nan;
    report.value_shift_lhs = report.value_shift_rhs = nan;
    report.new_coalition_weight = report.new_coalition_mass = report.new_coalition_cap = nan;
    report.corollary_lhs = report.corollary_rhs = nan;

    report.original = run_clear(kind, parties, gain, config);
    const PartyOutcome& honest = find_party(report.original, target_id);
    report.honest_net = honest.net;
    report.honest_share = honest.shapley_share;
    report.price = honest.price;

    const std::vector<Party> roster_r = replicate(parties, target_id, replicas);
    report.replicated = run_clear(kind, roster_r, gain, config);
    for (const PartyOutcome& po : report.replicated.parties) {
        if (po.party_id == target_id || (po.replica_of && *po.replica_of == target_id)) {
            report.family_net += po.net;
            report.family_share += po.shapley_share;
        }
    }
    report.robust = report.family_net <= report.honest_net + kNetTolerance;

    if (replicas == 1)
        fill_single_replica_analytics(report, parties, target_index, gain, config);
    return report;
}

RobustnessReport verify_lemma_bounds(const std::vector<Party>& parties, int target_id,
                                     const GainFunction& gain, const MarketConfig& config,
                                     MarketKind kind) {
    return attack_payoff(parties, target_id, 1, gain, config, kind);
}

std::vector<AttackSweepRow> attack_sweep(const std::vector<Party>& parties, int target_id,
                                         int max_replicas, const GainFunction& gain,
                                         const MarketConfig& config, MarketKind kind) {
    if (max_replicas < 0) throw std::invalid_argument("max_replicas must be >= 0");
    std::vector<AttackSweepRow> rows;
    MarketOutcome honest = run_clear(kind, parties, gain, config);
    const PartyOutcome& target = find_party(honest, target_id);

    for (int k = 0; k <= max_replicas; ++k) {
        AttackSweepRow row;
        row.replicas = k;
        row.honest_net = target.net;
        row.honest_share = target.shapley_share;
        const MarketOutcome outcome =
            k == 0 ? honest : run_clear(kind, replicate(parties, target_id, k), gain, config);
        for (const PartyOutcome& po : outcome.parties) {
            if (po.party_id == target_id || (po.replica_of && *po.replica_of == target_id)) {
                row.family_net += po.net;
                row.family_share += po.shapley_share;
            }
        }
        row.grand_value = outcome.grand_value;
        row.pool = outcome.pool;
        rows.push_back(row);
    }
    return rows;
}

// ---- randomized suite --------------------------------------------------------

namespace {

std::uint64_t bounded_uniform(std::mt19937_64& rng, std::uint64_t bound) {
    const std::uint64_t rem = (0 - bound) % bound;
    if (rem == 0) return rng() % bound;
    const std::uint64_t threshold = 0 - rem;
    for (;;) {
        const std::uint64_t x = rng();
        if (x < threshold) return x % bound;
    }
}

std::vector<int> shuffled_items(std::mt19937_64& rng, int n) {
    std::vector<int> items(static_cast<std::size_t>(n));
    std::iota(items.begin(), items.end(), 0);
    for (std::size_t j = items.size() - 1; j > 0; --j) {
        const std::uint64_t r = bounded_uniform(rng, j + 1);
        std::swap(items[j], items[std::size_t(r)]);
    }
    return items;
}

}  // namespace

RandomMarket random_coverage_market(std::uint64_t seed, int parties, MarketKind kind,
                                    double exponent) {
    if (parties < 1 || parties > 12)
        throw std::invalid_argument("random market supports 1..12 parties");
    std::mt19937_64 rng(seed);
    const double p = exponent > 0.0 ? exponent : double(1 + bounded_uniform(rng, 3));

    RandomMarket market;
    market.kind = kind;

    if (kind == MarketKind::Single) {
        const int n_items = parties + 1 + int(bounded_uniform(rng, std::uint64_t(parties) + 3));
        const std::vector<int> order = shuffled_items(rng, n_items);

        std::vector<std::vector<int>> owned(static_cast<std::size_t>(parties));
        for (int i = 0; i < parties; ++i) owned[std::size_t(i)].push_back(order[std::size_t(i)]);
        for (int k = parties; k < n_items; ++k) {
            const std::uint64_t r = bounded_uniform(rng, std::uint64_t(parties) + 1);
            if (r < std::uint64_t(parties)) owned[std::size_t(r)].push_back(order[std::size_t(k)]);
        }

        std::vector<int> universe(static_cast<std::size_t>(n_items));
        std::iota(universe.begin(), universe.end(), 0);
        market.validation = items_dataset(universe);

        for (int i = 0; i < parties; ++i) {
            std::sort(owned[std::size_t(i)].begin(), owned[std::size_t(i)].end());
            Party party;
            party.id = i + 1;
            party.training = items_dataset(owned[std::size_t(i)]);
            party.validation = market.validation;
            market.parties.push_back(std::move(party));
        }
        market.gain = GainFunction::synthetic_coverage(std::size_t(n_items), p);
        return market;
    }

    // Multi-task: 2-3 tasks, each with its own item block and validation;
    // every party owns at least one item of its own task, endowments are
    // disjoint.
    int tasks = parties >= 3 ? 2 + int(bounded_uniform(rng, 2)) : 2;
    tasks = std::min(tasks, parties);

    std::vector<int> task_of(static_cast<std::size_t>(parties));
    for (int i = 0; i < parties; ++i)
        task_of[std::size_t(i)] = i < tasks ? i : int(bounded_uniform(rng, std::uint64_t(tasks)));

    std::vector<std::vector<int>> members(static_cast<std::size_t>(tasks));
    for (int i = 0; i < parties; ++i) members[std::size_t(task_of[std::size_t(i)])].push_back(i);

    std::vector<std::vector<int>> owned(static_cast<std::size_t>(parties));
    std::vector<std::vector<int>> task_items(static_cast<std::size_t>(tasks));
    int next_item = 0;
    std::size_t max_universe = 0;
    for (int t = 0; t < tasks; ++t) {
        const int n_members = int(members[std::size_t(t)].size());
        const int n_task_items = n_members + 1 + int(bounded_uniform(rng, 3));
        max_universe = std::max(max_universe, std::size_t(n_task_items));
        for (int k = 0; k < n_task_items; ++k) {
            const int item = next_item++;
            task_items[std::size_t(t)].push_back(item);
            if (k < n_members) {
                owned[std::size_t(members[std::size_t(t)][std::size_t(k)])].push_back(item);
            } else {
                const std::uint64_t r = bounded_uniform(rng, std::uint64_t(n_members) + 1);
                if (r < std::uint64_t(n_members))
                    owned[std::size_t(members[std::size_t(t)][std::size_t(r)])].push_back(item);
            }
        }
    }

    for (int i = 0; i < parties; ++i) {
        std::sort(owned[std::size_t(i)].begin(), owned[std::size_t(i)].end());
        Party party;
        party.id = i + 1;
        party.training = items_dataset(owned[std::size_t(i)]);
        party.validation = items_dataset(task_items[std::size_t(task_of[std::size_t(i)])]);
        market.parties.push_back(std::move(party));
    }
    market.gain = GainFunction::synthetic_coverage(max_universe, p);
    return market;
}

namespace {

void add_counterexample(SuiteSummary& summary, std::uint64_t tseed, int trial, int parties,
                        int target_id, const char* which, double lhs, double rhs) {
    if (summary.counterexamples.size() < 32) {
        summary.counterexamples.push_back(
            SuiteCounterexample{tseed, trial, parties, target_id, which, lhs, rhs});
    }
}

}  // namespace

SuiteSummary randomized_robustness_suite(const SuiteOptions& options) {
    if (options.trials < 1) throw std::invalid_argument("suite needs trials >= 1");
    if (options.min_parties < 2 || options.max_parties < options.min_parties ||
        options.max_parties > 10) {
        throw std::invalid_argument("suite party range must satisfy 2 <= min <= max <= 10");
    }

    SuiteSummary summary;
    summary.options = options;

    MarketConfig config;
    config.unit_price = 1.0;
    config.tau = 0.0;  // pinned: selection stays stable under replication

    for (int trial = 0; trial < options.trials; ++trial) {
        const std::uint64_t tseed = mix_seed(options.seed, std::uint64_t(trial));
        std::mt19937_64 trng(tseed);
        const int span = options.max_parties - options.min_parties + 1;
        const int m = options.min_parties + int(bounded_uniform(trng, std::uint64_t(span)));
        const double exponent = options.adversarial_submodular ? 0.5 : 0.0;
        const RandomMarket market =
            random_coverage_market(mix_seed(tseed, 1), m, options.kind, exponent);

        for (const Party& p : market.parties) {
            const RobustnessReport r =
                attack_payoff(market.parties, p.id, 1, market.gain, config, options.kind);
            ++summary.attacks;

            if (!r.robust) {
                ++summary.robustness_violations;
                add_counterexample(summary, tseed, trial, m, p.id, "family_net > honest_net",
                                   r.family_net, r.honest_net);
            }
            if (!r.condition_holds) {
                ++summary.condition_violations;
                add_counterexample(summary, tseed, trial, m, p.id, "condition",
                                   r.condition_lhs, r.condition_rhs);
            }
            if (!r.phi_bound_holds) {
                ++summary.phi_bound_violations;
                add_counterexample(summary, tseed, trial, m, p.id, "phi_bound",
                                   r.phi_bound_lhs, r.phi_bound_rhs);
            }
            if (!r.value_shift_holds) {
                ++summary.value_shift_violations;
                add_counterexample(summary, tseed, trial, m, p.id, "value_shift",
                                   r.value_shift_lhs, r.value_shift_rhs);
            }
            if (!r.margin_violations.empty()) {
                summary.margin_violations += int(r.margin_violations.size());
                add_counterexample(summary, tseed, trial, m, p.id, "margin",
                                   r.margin_violations.front().marginal,
                                   r.margin_violations.front().cap);
            }
            if (std::fabs(r.new_coalition_weight - 0.5) > 1e-12) {
                ++summary.weight_identity_violations;
                add_counterexample(summary, tseed, trial, m, p.id, "weight_identity",
                                   r.new_coalition_weight, 0.5);
            }
            if (!r.mass_cap_holds) {
                ++summary.mass_cap_violations;
                add_counterexample(summary, tseed, trial, m, p.id, "mass_cap",
                                   r.new_coalition_mass, r.new_coalition_cap);
            }
        }
    }
    return summary;
}

// ---- serialization ------------------------------------------------------------

namespace {

std::string hex64(std::uint64_t v) {
    char buf[17];
    std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(v));
    return buf;
}

nlohmann::json json_or_null(double v) {
    if (std::isnan(v)) return nullptr;
    return v;
}

}  // namespace

std::string to_json_string(const RobustnessReport& report, const Provenance& provenance,
                           int indent) {
    nlohmann::json j;
    j["kind"] = report.kind == MarketKind::Single ? "single" : "multi";
    j["target_id"] = report.target_id;
    j["replicas"] = report.replicas;
    j["honest_net"] = report.honest_net;
    j["family_net"] = report.family_net;
    j["honest_share"] = report.honest_share;
    j["family_share"] = report.family_share;
    j["price"] = report.price;
    j["robust"] = report.robust;
    j["condition"] = {{"lhs", json_or_null(report.condition_lhs)},
                      {"rhs", json_or_null(report.condition_rhs)},
                      {"holds", report.condition_holds}};
    j["phi_bound"] = {{"lhs", json_or_null(report.phi_bound_lhs)},
                      {"rhs", json_or_null(report.phi_bound_rhs)},
                      {"holds", report.phi_bound_holds}};
    j["value_shift"] = {{"lhs", json_or_null(report.value_shift_lhs)},
                        {"rhs", json_or_null(report.value_shift_rhs)},
                        {"holds", report.value_shift_holds}};
    j["new_coalitions"] = {{"weight", json_or_null(report.new_coalition_weight)},
                           {"mass", json_or_null(report.new_coalition_mass)},
                           {"cap", json_or_null(report.new_coalition_cap)},
                           {"mass_cap_holds", report.mass_cap_holds}};
    auto& margins = j["margin_violations"] = nlohmann::json::array();
    for (const MarginViolation& mv : report.margin_violations) {
        margins.push_back(
            {{"coalition", mv.coalition}, {"marginal", mv.marginal}, {"cap", mv.cap}});
    }
    j["corollary"] = {{"applicable", report.corollary_applicable},
                      {"lhs", json_or_null(report.corollary_lhs)},
                      {"rhs", json_or_null(report.corollary_rhs)}};
    j["provenance"] = {{"config_hash", hex64(provenance.config_hash)},
                       {"seed", provenance.seed}};
    return j.dump(indent);
}

std::string to_json_string(const SuiteSummary& summary, const Provenance& provenance,
                           int indent) {
    nlohmann::json j;
    j["options"] = {
        {"trials", summary.options.trials},
        {"min_parties", summary.options.min_parties},
        {"max_parties", summary.options.max_parties},
        {"seed", summary.options.seed},
        {"kind", summary.options.kind == MarketKind::Single ? "single" : "multi"},
        {"adversarial_submodular", summary.options.adversarial_submodular}};
    j["attacks"] = summary.attacks;
    j["violations"] = {{"robustness", summary.robustness_violations},
                       {"condition", summary.condition_violations},
                       {"phi_bound", summary.phi_bound_violations},
                       {"value_shift", summary.value_shift_violations},
                       {"margin", summary.margin_violations},
                       {"weight_identity", summary.weight_identity_violations},
                       {"mass_cap", summary.mass_cap_violations}};
    j["clean"] = summary.clean();
    auto& ces = j["counterexamples"] = nlohmann::json::array();
    for (const SuiteCounterexample& ce : summary.counterexamples) {
        ces.push_back({{"trial_seed", ce.trial_seed},
                       {"trial", ce.trial},
                       {"parties", ce.parties},
                       {"target_id", ce.target_id},
                       {"which", ce.which},
                       {"lhs", ce.lhs},
                       {"rhs", ce.rhs}});
    }
    j["provenance"] = {{"config_hash", hex64(provenance.config_hash)},
                       {"seed", provenance.seed}};
    return j.dump(indent);
}

std::string sweep_to_csv(const std::vector<AttackSweepRow>& rows) {
    std::string csv =
        "replicas,family_net,honest_net,family_share,honest_share,grand_value,pool\n";
    char buf[256];
    for (const AttackSweepRow& row : rows) {
        std::snprintf(buf, sizeof(buf), "%d,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g\n",
                      row.replicas, row.family_net, row.honest_net, row.family_share,
                      row.honest_share, row.grand_value, row.pool);
        csv += buf;
    }
    return csv;
}

}  // namespace shapmarket
