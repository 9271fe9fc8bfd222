#include "shapmarket/multi_task.hpp"

#include <memory>
#include <mutex>
#include <stdexcept>
#include <unordered_map>

#include "market_internal.hpp"
#include "shapmarket/selection.hpp"

namespace shapmarket {

TaskIndex distinct_tasks(const std::vector<Party>& parties) {
    TaskIndex index;
    index.representative.resize(parties.size());
    for (std::size_t i = 0; i < parties.size(); ++i) {
        int rep = int(i);
        for (int j : index.distinct) {
            if (same_multiset(parties[i].validation, parties[std::size_t(j)].validation)) {
                rep = j;
                break;
            }
        }
        if (rep == int(i)) index.distinct.push_back(rep);
        index.representative[i] = rep;
    }
    return index;
}

namespace {

// Gains G(V_task; f trained on a sub-coalition's data), memoized per
// (task representative, sub-coalition) pair.
class TaskGainCache {
public:
    TaskGainCache(const GainFunction& gain, const std::vector<Party>& parties)
        : gain_(gain), parties_(parties) {}

    double at(int rep, Coalition sub) {
        if (sub == 0) return 0.0;  // nobody relevant: the task gets nothing
        const std::uint64_t key = (std::uint64_t(rep) << 32) | sub;
        {
            std::lock_guard<std::mutex> lock(mu_);
            if (auto it = memo_.find(key); it != memo_.end()) return it->second;
        }
        LabeledDataset pooled;
        for (std::size_t i = 0; i < parties_.size(); ++i) {
            if (sub & (Coalition(1) << i)) pooled = concat(pooled, parties_[i].training);
        }
        const double g = gain_.evaluate(parties_[std::size_t(rep)].validation, pooled);
        std::lock_guard<std::mutex> lock(mu_);
        return memo_.emplace(key, g).first->second;
    }

private:
    GainFunction gain_;
    std::vector<Party> parties_;  // owned copy so the cache can outlive the caller
    std::unordered_map<std::uint64_t, double> memo_;
    std::mutex mu_;
};

void validate_relevance(const std::vector<Party>& parties, const RelevanceMap& relevance) {
    if (relevance.size() != parties.size())
        throw std::invalid_argument("relevance map size does not match the roster");
    for (std::size_t i = 0; i < parties.size(); ++i) {
        if (!(relevance[i] & (Coalition(1) << i))) {
            throw std::invalid_argument("relevance set of party " +
                                        std::to_string(parties[i].id) +
                                        " does not contain the party itself");
        }
    }
}

CharacteristicFunction make_char_multi(std::shared_ptr<TaskGainCache> cache,
                                       const std::vector<Party>& parties,
                                       TaskIndex index, RelevanceMap relevance) {
    const int m = int(parties.size());
    return CharacteristicFunction(
        m, [cache, index = std::move(index), relevance = std::move(relevance)](Coalition s) {
            if (s == 0) return 0.0;
            // w(S,P) = sum over distinct tasks of the buyers' gain plus each
            // seller's improvement over its standalone model on its own task.
            double total = 0.0;
            for (int rep : index.distinct)
                total += cache->at(rep, s & relevance[std::size_t(rep)]);
            for (int i = 0; i < int(index.representative.size()); ++i) {
                const Coalition bit = Coalition(1) << i;
                if (!(s & bit)) continue;
                const int rep = index.representative[std::size_t(i)];
                total += cache->at(rep, s & relevance[std::size_t(i)]) - cache->at(rep, bit);
            }
            return total;
        });
}

}  // namespace

RelevanceMap select_relevance(const std::vector<Party>& parties, const GainFunction& gain,
                              double tau, int exact_cap) {
    detail_market::validate_roster(parties);
    const TaskIndex index = distinct_tasks(parties);

    std::unordered_map<int, Coalition> base_by_rep;
    for (int rep : index.distinct) {
        const std::vector<double> values =
            data_value(gain, parties[std::size_t(rep)].validation, parties, exact_cap);
        base_by_rep[rep] = select_relevant(values, tau, -1);
    }

    RelevanceMap relevance(parties.size());
    for (std::size_t i = 0; i < parties.size(); ++i) {
        const int rep = index.representative[i];
        relevance[i] = base_by_rep[rep] | (Coalition(1) << i);
    }
    return relevance;
}

CharacteristicFunction char_multi(const GainFunction& gain, const std::vector<Party>& parties,
                                  const RelevanceMap& relevance) {
    detail_market::validate_roster(parties);
    validate_relevance(parties, relevance);
    auto cache = std::make_shared<TaskGainCache>(gain, parties);
    return make_char_multi(std::move(cache), parties, distinct_tasks(parties), relevance);
}

MarketOutcome clear_multi(const std::vector<Party>& parties, const GainFunction& gain,
                          const MarketConfig& config, const ClearOptions& options) {
    validate(config);
    detail_market::validate_roster(parties);
    const int m = int(parties.size());
    const TaskIndex index = distinct_tasks(parties);
    const RelevanceMap relevance = select_relevance(parties, gain, config.tau, config.exact_cap);

    MarketOutcome outcome;
    outcome.unit_price = config.unit_price;

    auto cache = std::make_shared<TaskGainCache>(gain, parties);
    outcome.parties.resize(std::size_t(m));
    for (int i = 0; i < m; ++i) {
        PartyOutcome& po = outcome.parties[std::size_t(i)];
        const Party& p = parties[std::size_t(i)];
        const int rep = index.representative[std::size_t(i)];
        po.party_id = p.id;
        po.replica_of = p.replica_of;
        po.standalone_gain = cache->at(rep, Coalition(1) << i);
        po.fee = config.unit_price * (1.0 - po.standalone_gain);
        double price = cache->at(rep, relevance[std::size_t(i)]) - po.standalone_gain;
        if (price < 0.0) {
            outcome.warnings.push_back("party " + std::to_string(p.id) +
                                       " has negative raw price (non-monotone gain); "
                                       "clamped to 0");
            price = 0.0;
        }
        po.price = price;
        outcome.pool += price;
    }

    CharacteristicFunction w = make_char_multi(cache, parties, index, relevance);
    outcome.grand_value = w.value(w.full_coalition());
    if (!(outcome.grand_value > 0.0)) {
        throw std::domain_error("grand coalition value " + std::to_string(outcome.grand_value) +
                                " is not positive; no meaningful division exists");
    }

    detail_market::ShapleyRun phi =
        detail_market::run_shapley(w, config, options, outcome.warnings);
    outcome.exact_shapley = phi.exact;
    detail_market::settle(outcome, phi.values);

    if (options.audit_table && m <= config.exact_cap) {
        const Coalition full = w.full_coalition();
        outcome.char_table.reserve(std::size_t(full) + 1);
        for (Coalition s = 0; s <= full; ++s) outcome.char_table.emplace_back(s, w.value(s));
    }

    for (int rep : index.distinct) {
        TaskReport report;
        report.representative_id = parties[std::size_t(rep)].id;
        for (std::size_t i = 0; i < parties.size(); ++i) {
            if (index.representative[i] == rep) report.member_ids.push_back(parties[i].id);
        }
        const Coalition d = relevance[std::size_t(rep)];
        LabeledDataset pooled;
        for (std::size_t i = 0; i < parties.size(); ++i) {
            if (d & (Coalition(1) << i)) {
                report.relevant_ids.push_back(parties[i].id);
                pooled = concat(pooled, parties[i].training);
            }
        }
        report.grand_gain = cache->at(rep, d);
        if (gain.kind() == GainKind::ModelAccuracy)
            report.model_fingerprint = gain.build_model(pooled).fingerprint();
        outcome.tasks.push_back(std::move(report));
    }
    return outcome;
}

}  // namespace shapmarket
