#pragma once

// Internals shared between single- and multi-task clearing. Not installed.

#include <string>
#include <vector>

#include "shapmarket/market.hpp"

namespace shapmarket::detail_market {

void validate_roster(const std::vector<Party>& parties);

struct ShapleyRun {
    std::vector<double> values;
    bool exact = true;
};

// Exact Shapley up to config.exact_cap, sampled (with a warning appended)
// beyond.
ShapleyRun run_shapley(const CharacteristicFunction& v, const MarketConfig& config,
                       const ClearOptions& options, std::vector<std::string>& warnings);

// Fills shapley_share/payout/refund/net from phi given pool, grand value,
// unit price, fees, and prices already present in the outcome.
void settle(MarketOutcome& outcome, const std::vector<double>& phi);

}  // namespace shapmarket::detail_market
