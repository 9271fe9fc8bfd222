#include "shapmarket/selection.hpp"

#include <cstdio>
#include <memory>
#include <mutex>
#include <stdexcept>
#include <unordered_map>

#include <json.hpp>

#include "market_internal.hpp"

namespace shapmarket {

std::vector<double> data_value(const GainFunction& gain, const LabeledDataset& task_validation,
                               const std::vector<Party>& parties, int exact_cap) {
    detail_market::validate_roster(parties);
    const int m = int(parties.size());
    if (m > exact_cap) {
        throw std::invalid_argument("data valuation of " + std::to_string(m) +
                                    " parties exceeds exact_cap " + std::to_string(exact_cap));
    }

    // u(S) = G(V; union of S), u(empty) = 0: the plain utility of pooled
    // data for this one task; memoized per coalition inside the function.
    auto cache = std::make_shared<std::unordered_map<Coalition, double>>();
    auto mu = std::make_shared<std::mutex>();
    CharacteristicFunction u(m, [&gain, &task_validation, &parties, cache, mu](Coalition s) {
        if (s == 0) return 0.0;
        {
            std::lock_guard<std::mutex> lock(*mu);
            if (auto it = cache->find(s); it != cache->end()) return it->second;
        }
        LabeledDataset pooled;
        for (std::size_t i = 0; i < parties.size(); ++i) {
            if (s & (Coalition(1) << i)) pooled = concat(pooled, parties[i].training);
        }
        const double g = gain.evaluate(task_validation, pooled);
        std::lock_guard<std::mutex> lock(*mu);
        return cache->emplace(s, g).first->second;
    });
    return shapley_exact(u);
}

Coalition select_relevant(std::span<const double> values, double tau, int owner_index) {
    if (values.size() > std::size_t(kMaxParties))
        throw std::invalid_argument("too many parties for a coalition mask");
    if (owner_index >= int(values.size()))
        throw std::invalid_argument("owner_index out of range");
    Coalition selected = 0;
    for (std::size_t j = 0; j < values.size(); ++j) {
        if (values[j] >= tau) selected |= Coalition(1) << j;
    }
    if (owner_index >= 0) selected |= Coalition(1) << owner_index;
    return selected;
}

std::string to_csv(const SelectionReport& report) {
    std::string csv = "party_id,shapley_value,selected\n";
    char buf[128];
    for (const SelectionRow& row : report.rows) {
        std::snprintf(buf, sizeof(buf), "%d,%.17g,%d\n", row.party_id, row.shapley_value,
                      row.selected ? 1 : 0);
        csv += buf;
    }
    return csv;
}

std::string to_json_string(const std::vector<SelectionReport>& reports, int indent) {
    nlohmann::json j = nlohmann::json::array();
    for (const SelectionReport& report : reports) {
        nlohmann::json rows = nlohmann::json::array();
        for (const SelectionRow& row : report.rows) {
            rows.push_back({{"party_id", row.party_id},
                            {"shapley_value", row.shapley_value},
                            {"selected", row.selected}});
        }
        j.push_back({{"task_representative_id", report.task_representative_id},
                     {"tau", report.tau},
                     {"rows", rows}});
    }
    return j.dump(indent);
}

}  // namespace shapmarket
