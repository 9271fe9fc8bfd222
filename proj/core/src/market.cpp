#include "shapmarket/market.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <memory>
#include <mutex>
#include <set>
#include <stdexcept>
#include <unordered_map>

#include <json.hpp>

#include "market_internal.hpp"

namespace shapmarket {

void validate(const MarketConfig& config) {
    if (!(config.unit_price > 0.0) || !std::isfinite(config.unit_price))
        throw std::invalid_argument("market config: unit_price must be positive");
    if (!std::isfinite(config.tau))
        throw std::invalid_argument("market config: tau must be finite");
    if (!(config.lambda >= 0.0) || !std::isfinite(config.lambda))
        throw std::invalid_argument("market config: lambda must be >= 0");
    if (!(config.epsilon >= 0.0) || !std::isfinite(config.epsilon))
        throw std::invalid_argument("market config: epsilon must be >= 0");
    if (config.exact_cap < 1 || config.exact_cap > kDefaultExactCap) {
        throw std::invalid_argument("market config: exact_cap must be in [1, " +
                                    std::to_string(kDefaultExactCap) + "]");
    }
}

namespace detail_market {

void validate_roster(const std::vector<Party>& parties) {
    if (parties.empty()) throw std::invalid_argument("market needs at least one party");
    if (int(parties.size()) > kMaxParties) {
        throw std::invalid_argument("market of " + std::to_string(parties.size()) +
                                    " parties exceeds the supported maximum of " +
                                    std::to_string(kMaxParties));
    }
    std::set<int> ids;
    for (const Party& p : parties) {
        if (!ids.insert(p.id).second)
            throw std::invalid_argument("duplicate party id " + std::to_string(p.id));
        if (p.training.empty())
            throw std::invalid_argument("party " + std::to_string(p.id) +
                                        " has empty training data");
    }
}

// Shared per-market cache of coalition gains G(V; union of coalition data).
// One model training (or coverage count) per distinct coalition, reused by
// prices, fees, the characteristic function, and participation checks.
class CoalitionGainCache {
public:
    CoalitionGainCache(const GainFunction& gain, LabeledDataset validation,
                       const std::vector<Party>& parties)
        : gain_(gain), validation_(std::move(validation)), parties_(parties) {}

    double at(Coalition s) {
        if (s == 0) return 0.0;
        {
            std::lock_guard<std::mutex> lock(mu_);
            if (auto it = memo_.find(s); it != memo_.end()) return it->second;
        }
        LabeledDataset u;
        for (std::size_t i = 0; i < parties_.size(); ++i) {
            if (s & (Coalition(1) << i)) u = concat(u, parties_[i].training);
        }
        const double g = gain_.evaluate(validation_, u);
        std::lock_guard<std::mutex> lock(mu_);
        return memo_.emplace(s, g).first->second;
    }

    const GainFunction& gain() const { return gain_; }
    const LabeledDataset& validation() const { return validation_; }
    const std::vector<Party>& parties() const { return parties_; }

private:
    GainFunction gain_;
    LabeledDataset validation_;
    std::vector<Party> parties_;
    std::unordered_map<Coalition, double> memo_;
    std::mutex mu_;
};

CharacteristicFunction make_char_single(std::shared_ptr<CoalitionGainCache> cache) {
    const int m = int(cache->parties().size());
    return CharacteristicFunction(m, [cache](Coalition s) -> double {
        if (s == 0) return 0.0;
        // v(S) = (|S|+1) G(f_S) - sum_j G(f_j): the coalition model's gain
        // plus each member's improvement over going alone.
        double singles = 0.0;
        for (int i = 0; i < int(cache->parties().size()); ++i) {
            const Coalition bit = Coalition(1) << i;
            if (s & bit) singles += cache->at(bit);
        }
        return double(coalition_size(s) + 1) * cache->at(s) - singles;
    });
}

}  // namespace detail_market

using detail_market::CoalitionGainCache;

double fee(const GainFunction& gain, const LabeledDataset& validation,
           const LabeledDataset& training, double unit_price) {
    if (!(unit_price > 0.0) || !std::isfinite(unit_price))
        throw std::invalid_argument("unit_price must be positive");
    return unit_price * (1.0 - gain.evaluate(validation, training));
}

CharacteristicFunction char_single(const GainFunction& gain, const LabeledDataset& validation,
                                   const std::vector<Party>& parties) {
    detail_market::validate_roster(parties);
    auto cache = std::make_shared<CoalitionGainCache>(gain, validation, parties);
    return detail_market::make_char_single(std::move(cache));
}

namespace detail_market {

ShapleyRun run_shapley(const CharacteristicFunction& v, const MarketConfig& config,
                       const ClearOptions& options, std::vector<std::string>& warnings) {
    ShapleyRun out;
    if (v.arity() <= config.exact_cap) {
        out.values = shapley_exact(v);
        return out;
    }
    out.exact = false;
    char buf[160];
    std::snprintf(buf, sizeof(buf),
                  "market size %d exceeds exact_cap %d: Shapley values estimated from %d "
                  "sampled permutations (seed %llu)",
                  v.arity(), config.exact_cap, options.sample_permutations,
                  static_cast<unsigned long long>(options.sample_seed));
    warnings.emplace_back(buf);
    out.values = shapley_sampled(v, options.sample_permutations, options.sample_seed).values;
    return out;
}

void settle(MarketOutcome& outcome, const std::vector<double>& phi) {
    // b_i = c * a * phi_hat_i ; t_i = (alpha_i - c a'_i) + b_i ; net = b - c a'.
    const double c = outcome.unit_price;
    const double vp = outcome.grand_value;
    for (std::size_t i = 0; i < outcome.parties.size(); ++i) {
        PartyOutcome& po = outcome.parties[i];
        po.shapley_value = phi[i];
        po.shapley_share = phi[i] / vp;
        po.payout = c * outcome.pool * po.shapley_share;
        po.refund = (po.fee - c * po.price) + po.payout;
        po.net = po.payout - c * po.price;
    }
}

}  // namespace detail_market

MarketOutcome clear_single(const std::vector<Party>& parties, const LabeledDataset& validation,
                           const GainFunction& gain, const MarketConfig& config,
                           const ClearOptions& options) {
    validate(config);
    detail_market::validate_roster(parties);

    MarketOutcome outcome;
    outcome.unit_price = config.unit_price;

    for (const Party& p : parties) {
        if (!p.validation.empty() && !same_multiset(p.validation, validation)) {
            outcome.warnings.push_back("party " + std::to_string(p.id) +
                                       " has a validation set differing from the market task; "
                                       "single-task clearing uses the market's");
            break;
        }
    }

    const int m = int(parties.size());
    auto cache = std::make_shared<CoalitionGainCache>(gain, validation, parties);
    const Coalition full = (Coalition(1) << m) - 1;

    const double grand_gain = cache->at(full);
    outcome.parties.resize(m);
    for (int i = 0; i < m; ++i) {
        PartyOutcome& po = outcome.parties[i];
        const Party& p = parties[i];
        po.party_id = p.id;
        po.replica_of = p.replica_of;
        po.standalone_gain = cache->at(Coalition(1) << i);
        po.fee = config.unit_price * (1.0 - po.standalone_gain);
        double price = grand_gain - po.standalone_gain;
        if (price < 0.0) {
            outcome.warnings.push_back(
                "party " + std::to_string(p.id) +
                " has negative raw price (non-monotone gain); clamped to 0");
            price = 0.0;
        }
        po.price = price;
        outcome.pool += price;
    }

    // v(P) = (M+1) G(f_P) - sum_j G(f_j) = G(f_P) + pool when prices are
    // unclamped; compute through the characteristic function for
    // consistency with the Shapley run.
    CharacteristicFunction v = detail_market::make_char_single(cache);
    outcome.grand_value = v.value(full);
    if (!(outcome.grand_value > 0.0)) {
        throw std::domain_error("grand coalition value " + std::to_string(outcome.grand_value) +
                                " is not positive; no meaningful division exists (are all "
                                "gains zero?)");
    }

    detail_market::ShapleyRun phi =
        detail_market::run_shapley(v, config, options, outcome.warnings);
    outcome.exact_shapley = phi.exact;
    detail_market::settle(outcome, phi.values);

    if (options.audit_table && m <= config.exact_cap) {
        outcome.char_table.reserve(std::size_t(full) + 1);
        for (Coalition s = 0; s <= full; ++s)
            outcome.char_table.emplace_back(s, v.value(s));
    }

    if (gain.kind() == GainKind::ModelAccuracy) {
        LabeledDataset all;
        for (const Party& p : parties) all = concat(all, p.training);
        outcome.final_model_fingerprint = gain.build_model(all).fingerprint();
    }
    return outcome;
}

std::vector<ParticipationEntry> participation_check(const std::vector<Party>& parties,
                                                    const GainFunction& gain,
                                                    const LabeledDataset& validation) {
    detail_market::validate_roster(parties);
    const int m = int(parties.size());
    if (m < 2)
        throw std::invalid_argument("participation check needs at least two parties");
    auto cache = std::make_shared<CoalitionGainCache>(gain, validation, parties);
    const Coalition full = (Coalition(1) << m) - 1;

    std::vector<ParticipationEntry> entries(m);
    for (int i = 0; i < m; ++i) {
        ParticipationEntry& e = entries[i];
        e.party_id = parties[i].id;
        const Coalition bi = Coalition(1) << i;
        const double gi = cache->at(bi);

        for (int j = 0; j < m && !e.helps_others; ++j) {
            if (j == i) continue;
            const Coalition bj = Coalition(1) << j;
            if (cache->at(bi | bj) > cache->at(bj)) e.helps_others = true;
        }
        for (Coalition s = bi; s <= full && !e.market_helps; s = (s + 1) | bi) {
            if (s == bi) continue;
            if (cache->at(s) > gi) e.market_helps = true;
        }
        e.eligible = e.helps_others && e.market_helps;
        if (e.eligible) {
            e.reason = "data improves at least one other party and the market improves its own";
        } else if (!e.helps_others && !e.market_helps) {
            e.reason = "no mutual benefit: neither helps others nor gains from any coalition";
        } else if (!e.helps_others) {
            e.reason = "its data never strictly improves another party's model";
        } else {
            e.reason = "no coalition strictly improves on training alone";
        }
    }
    return entries;
}

// ---- serialization ----------------------------------------------------------

namespace {

char hex_digit(std::uint64_t v) { return "0123456789abcdef"[v & 0xf]; }

std::string hex64(std::uint64_t v) {
    std::string s(16, '0');
    for (int i = 15; i >= 0; --i) {
        s[std::size_t(i)] = hex_digit(v);
        v >>= 4;
    }
    return s;
}

nlohmann::json party_json(const PartyOutcome& po) {
    nlohmann::json j;
    j["party_id"] = po.party_id;
    j["fee"] = po.fee;
    j["standalone_gain"] = po.standalone_gain;
    j["price"] = po.price;
    j["shapley_value"] = po.shapley_value;
    j["shapley_share"] = po.shapley_share;
    j["payout"] = po.payout;
    j["refund"] = po.refund;
    j["net"] = po.net;
    if (po.replica_of) j["replica_of"] = *po.replica_of;
    return j;
}

}  // namespace

std::string to_json_string(const MarketOutcome& outcome, const Provenance& provenance,
                           int indent) {
    nlohmann::json j;
    j["unit_price"] = outcome.unit_price;
    j["pool"] = outcome.pool;
    j["grand_value"] = outcome.grand_value;
    j["exact_shapley"] = outcome.exact_shapley;
    j["provenance"] = {{"config_hash", hex64(provenance.config_hash)},
                       {"seed", provenance.seed}};
    auto& parties = j["parties"] = nlohmann::json::array();
    for (const PartyOutcome& po : outcome.parties) parties.push_back(party_json(po));

    if (!outcome.tasks.empty()) {
        auto& tasks = j["tasks"] = nlohmann::json::array();
        for (const TaskReport& t : outcome.tasks) {
            tasks.push_back({{"representative_id", t.representative_id},
                             {"member_ids", t.member_ids},
                             {"relevant_ids", t.relevant_ids},
                             {"grand_gain", t.grand_gain},
                             {"model_fingerprint", hex64(t.model_fingerprint)}});
        }
    }
    if (!outcome.char_table.empty()) {
        auto& table = j["char_table"] = nlohmann::json::array();
        for (const auto& [mask, value] : outcome.char_table)
            table.push_back({{"coalition", mask}, {"value", value}});
    }
    j["warnings"] = outcome.warnings;
    if (outcome.final_model_fingerprint != 0)
        j["final_model_fingerprint"] = hex64(outcome.final_model_fingerprint);
    return j.dump(indent);
}

std::string to_json_string(const std::vector<ParticipationEntry>& entries, int indent) {
    nlohmann::json j = nlohmann::json::array();
    for (const ParticipationEntry& e : entries) {
        j.push_back({{"party_id", e.party_id},
                     {"helps_others", e.helps_others},
                     {"market_helps", e.market_helps},
                     {"eligible", e.eligible},
                     {"reason", e.reason}});
    }
    return j.dump(indent);
}

std::string outcome_to_csv(const MarketOutcome& outcome) {
    std::string csv =
        "party_id,fee,standalone_gain,price,shapley_value,shapley_share,payout,refund,net,"
        "replica_of\n";
    char buf[512];
    for (const PartyOutcome& po : outcome.parties) {
        std::snprintf(buf, sizeof(buf),
                      "%d,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,", po.party_id,
                      po.fee, po.standalone_gain, po.price, po.shapley_value, po.shapley_share,
                      po.payout, po.refund, po.net);
        csv += buf;
        if (po.replica_of) csv += std::to_string(*po.replica_of);
        csv += '\n';
    }
    return csv;
}

}  // namespace shapmarket
