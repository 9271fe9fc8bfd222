#pragma once

#include <vector>

#include "shapmarket/market.hpp"

namespace shapmarket {

// Groups parties by task: two parties share a task iff their validation
// sets are equal as multisets. `representative[i]` is the roster index of
// the first party seen with party i's task; `distinct` lists those
// first-seen indices in roster order.
struct TaskIndex {
    std::vector<int> representative;
    std::vector<int> distinct;
};

TaskIndex distinct_tasks(const std::vector<Party>& parties);

// relevance[i] is the coalition of parties whose data is relevant to party
// i's task (always contains i itself).
using RelevanceMap = std::vector<Coalition>;

// Data-value selection for every distinct task: party j is relevant to task
// i iff phi(u_i, j) >= tau, and each party is force-included for its own
// task. Requires exact Shapley (roster size <= exact_cap).
RelevanceMap select_relevance(const std::vector<Party>& parties,
                              const GainFunction& gain,
                              double tau,
                              int exact_cap = kDefaultExactCap);

// Multi-task characteristic function
//   w(S,P) = sum_{i in P_D} G(V_i; f^i_S) + sum_{i in S} [G(V_i; f^i_S) - G(V_i; f^i_i)]
// where f^i_S is trained on the union over S intersect D_i and P_D holds one
// representative per distinct task. A task whose relevant intersection with
// S is empty contributes gain 0. Per-task per-subcoalition gains are cached.
CharacteristicFunction char_multi(const GainFunction& gain,
                                  const std::vector<Party>& parties,
                                  const RelevanceMap& relevance);

// Clears a multi-task market: runs data-value selection at config.tau,
// builds w, and settles fees/prices/payouts exactly as in the single-task
// protocol (prices use each party's own task gain).
MarketOutcome clear_multi(const std::vector<Party>& parties,
                          const GainFunction& gain,
                          const MarketConfig& config,
                          const ClearOptions& options = {});

}  // namespace shapmarket
