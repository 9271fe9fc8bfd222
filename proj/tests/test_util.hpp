#pragma once

// Shared fixtures and independent oracles. The oracles deliberately
// re-derive everything the library computes (permutation-enumeration
// Shapley, direct characteristic formulas) so the two implementations can
// only agree by being right.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <memory>
#include <numeric>
#include <random>
#include <vector>

#include "shapmarket/gain.hpp"
#include "shapmarket/market.hpp"
#include "shapmarket/shapley.hpp"

namespace testutil {

using namespace shapmarket;

inline bool close(double a, double b, double tol = 1e-9) {
    return std::fabs(a - b) <= tol * std::max({1.0, std::fabs(a), std::fabs(b)});
}

// ---- Scenario A -------------------------------------------------------------
// Coverage gain over a 4-item universe with exponent 2; party 1 holds item
// {0}, party 2 holds {1,2}, validation covers all four items. Every number
// below was derived by hand from the closed forms and is frozen here.
struct ScenarioA {
    GainFunction gain = GainFunction::synthetic_coverage(4, 2.0);
    LabeledDataset validation = items_dataset(std::array{0, 1, 2, 3});
    std::vector<Party> parties;
    MarketConfig config;

    ScenarioA() {
        Party p1;
        p1.id = 1;
        p1.training = items_dataset(std::array{0});
        p1.validation = validation;
        Party p2;
        p2.id = 2;
        p2.training = items_dataset(std::array{1, 2});
        p2.validation = validation;
        parties = {p1, p2};
        config.unit_price = 1.0;
        config.tau = 0.0;
    }
};

namespace scenario_a {
inline constexpr double kG1 = 0.0625;       // (1/4)^2
inline constexpr double kG2 = 0.25;         // (2/4)^2
inline constexpr double kG12 = 0.5625;      // (3/4)^2
inline constexpr double kV1 = 0.0625;       // 2 G1 - G1
inline constexpr double kV2 = 0.25;
inline constexpr double kVP = 1.375;        // 3 G12 - G1 - G2
inline constexpr double kPhi1 = 0.59375;
inline constexpr double kPhi2 = 0.78125;
inline constexpr double kShare1 = 19.0 / 44.0;
inline constexpr double kShare2 = 25.0 / 44.0;
inline constexpr double kFee1 = 0.9375;     // 1 - G1
inline constexpr double kFee2 = 0.75;
inline constexpr double kPrice1 = 0.5;      // G12 - G1
inline constexpr double kPrice2 = 0.3125;
inline constexpr double kPool = 0.8125;
inline constexpr double kNet1 = -105.0 / 704.0;  // about -0.1491477
inline constexpr double kNet2 = 105.0 / 704.0;
// One replica of party 2:
inline constexpr double kVPR = 1.6875;            // v(P) + price2
inline constexpr double kShareR2 = 13.0 / 54.0;   // replicated share of party 2
inline constexpr double kFamilyNetR = -1.0 / 12.0;
inline constexpr double kConditionRhs = 545.0 / 1584.0;
inline constexpr double kPhiBoundRhs = 35.0 / 108.0;
inline constexpr double kNewMass = 0.0617283950617284;  // (1/3)(0.3125)/1.6875
inline constexpr double kNewMassCap = 0.0925925925925926;
}  // namespace scenario_a

// ---- independent oracles ------------------------------------------------------

// Shapley by enumerating all |P|! orderings and averaging marginals.
inline std::vector<double> shapley_permutation_oracle(const CharacteristicFunction& v) {
    const int m = v.arity();
    std::vector<int> order(static_cast<std::size_t>(m));
    std::iota(order.begin(), order.end(), 0);
    std::vector<double> phi(std::size_t(m), 0.0);
    std::size_t count = 0;
    do {
        Coalition s = 0;
        for (int p : order) {
            const Coalition with = s | (Coalition(1) << p);
            phi[std::size_t(p)] += v.value(with) - v.value(s);
            s = with;
        }
        ++count;
    } while (std::next_permutation(order.begin(), order.end()));
    for (double& x : phi) x /= double(count);
    return phi;
}

// Direct transcription of the single-task characteristic formula.
inline double char_single_oracle(const GainFunction& gain, const LabeledDataset& validation,
                                 const std::vector<Party>& parties, Coalition s) {
    if (s == 0) return 0.0;
    LabeledDataset pool;
    double singles = 0.0;
    int size = 0;
    for (std::size_t i = 0; i < parties.size(); ++i) {
        if (!(s & (Coalition(1) << i))) continue;
        pool = concat(pool, parties[i].training);
        singles += gain.evaluate(validation, parties[i].training);
        ++size;
    }
    return double(size + 1) * gain.evaluate(validation, pool) - singles;
}

// Random characteristic function with v(empty) == 0 and values in [0, 1).
inline CharacteristicFunction random_game(std::mt19937_64& rng, int m) {
    const std::size_t n = std::size_t(1) << m;
    auto table = std::make_shared<std::vector<double>>(n);
    for (std::size_t s = 1; s < n; ++s)
        (*table)[s] = double(rng() >> 11) * 0x1.0p-53;
    return CharacteristicFunction(m, [table](Coalition s) { return (*table)[s]; });
}

// The same, but monotone and grand-coalition positive (safe to normalize).
inline CharacteristicFunction random_monotone_game(std::mt19937_64& rng, int m) {
    const std::size_t n = std::size_t(1) << m;
    auto table = std::make_shared<std::vector<double>>(n, 0.0);
    for (std::size_t s = 1; s < n; ++s) {
        double floor = 0.0;
        for (int i = 0; i < m; ++i) {
            if (s & (Coalition(1) << i))
                floor = std::max(floor, (*table)[s & ~(Coalition(1) << i)]);
        }
        (*table)[s] = floor + double(rng() >> 11) * 0x1.0p-53;
    }
    return CharacteristicFunction(m, [table](Coalition s) { return (*table)[s]; });
}

// Exhaustive supermodularity scan of a characteristic function:
//   v(R + x) - v(R) <= v(Q + x) - v(Q)  for all R subset of Q, x outside Q.
// Returns the worst violation (positive means broken).
inline double supermodularity_excess(const CharacteristicFunction& v) {
    const int m = v.arity();
    const Coalition full = v.full_coalition();
    double worst = -1e300;
    for (Coalition q = 0; q <= full; ++q) {
        for (int x = 0; x < m; ++x) {
            const Coalition xbit = Coalition(1) << x;
            if (q & xbit) continue;
            const double high = v.value(q | xbit) - v.value(q);
            // enumerate R subset of Q
            Coalition r = q;
            for (;;) {
                const double low = v.value(r | xbit) - v.value(r);
                worst = std::max(worst, low - high);
                if (r == 0) break;
                r = (r - 1) & q;
            }
        }
    }
    return worst;
}

}  // namespace testutil
