#pragma once

#include <span>
#include <string>
#include <vector>

#include "shapmarket/gain.hpp"
#include "shapmarket/market.hpp"

namespace shapmarket {

// Shapley data values of every roster party for one task:
//   u(S) = G(task_validation; model on union of S),  u(empty) = 0,
// returning phi(u, j) for each j. Requires roster size <= exact_cap.
std::vector<double> data_value(const GainFunction& gain,
                               const LabeledDataset& task_validation,
                               const std::vector<Party>& parties,
                               int exact_cap = kDefaultExactCap);

// Threshold rule: {j : value_j >= tau} union {owner}. owner_index < 0 means
// no forced member.
Coalition select_relevant(std::span<const double> values, double tau, int owner_index);

struct SelectionRow {
    int party_id = 0;
    double shapley_value = 0.0;
    bool selected = false;
};

struct SelectionReport {
    int task_representative_id = 0;
    double tau = 0.0;
    std::vector<SelectionRow> rows;
};

std::string to_csv(const SelectionReport& report);
std::string to_json_string(const std::vector<SelectionReport>& reports, int indent = 2);

}  // namespace shapmarket
