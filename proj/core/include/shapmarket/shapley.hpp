#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <vector>

namespace shapmarket {

// Coalitions over up to 24 parties are bitmasks: bit i set means party
// index i (position in the roster, not the external party id) is in.
using Coalition = std::uint32_t;

inline constexpr int kMaxParties = 24;
inline constexpr int kDefaultExactCap = 20;

inline int coalition_size(Coalition c) { return __builtin_popcount(c); }

// A memoized characteristic function v: 2^P -> R with v(empty) == 0
// enforced. The oracle is called at most once per coalition (values are
// cached in a dense table); lookups are thread-safe and the oracle runs
// outside the lock so expensive evaluations (model training) can overlap.
class CharacteristicFunction {
public:
    CharacteristicFunction(int arity, std::function<double(Coalition)> oracle);

    int arity() const;
    Coalition full_coalition() const;
    double value(Coalition c) const;

    // Number of oracle invocations so far (memoization audit).
    std::size_t evaluations() const;

    // Force every coalition into the cache. Work is spread over worker
    // threads; each writes disjoint table slots, so the table contents are
    // identical to a sequential fill.
    void precompute_all() const;

private:
    struct State;
    std::shared_ptr<State> state_;
};

// Exact Shapley values by subset enumeration with the closed-form weights
// |S|! (M-|S|-1)! / M!. Requires arity <= kDefaultExactCap. The efficiency
// identity sum(phi) == v(P) is verified internally to 1e-9 (relative) and a
// violation throws - it would mean a numerical defect, never a modeling one.
std::vector<double> shapley_exact(const CharacteristicFunction& v);

// phi / v(P). Throws std::domain_error when v(P) <= 0.
std::vector<double> shapley_normalized(const CharacteristicFunction& v);

struct SampledShapley {
    std::vector<double> values;
    std::vector<double> std_errors;  // per party, 0 when n_perms < 2
    int permutations = 0;
};

// Monte-Carlo permutation sampling. For arity <= 8 permutations are drawn
// by a systematic cyclic scan of the M! permutation table starting at a
// seeded random offset, so n_perms == M! reproduces the exact values and
// the estimator stays unbiased; for larger arities permutations are iid
// Fisher-Yates draws. All randomness is hand-specified on mt19937_64.
SampledShapley shapley_sampled(const CharacteristicFunction& v, int n_perms, std::uint64_t seed);

// Exact binomial via 128-bit intermediates; throws std::overflow_error when
// the result would not fit in 64 bits.
std::uint64_t binomial(int n, int k);

// The replication-weight identity, computed in exact integer arithmetic:
//   sum_{s=1}^{M-1} (n_{s,M+1} - n_{s,M}) / n_{s,M+1}  with n_{s,M} = C(M-1, s).
// Returns exactly (M-1)/2 for every M >= 2; supported for 2 <= M <= 60.
double claim1_sum(int parties);

}  // namespace shapmarket
