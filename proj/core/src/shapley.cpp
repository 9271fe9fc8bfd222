#include "shapmarket/shapley.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <mutex>
#include <numeric>
#include <random>
#include <stdexcept>
#include <unordered_map>

#include "shapmarket/parallel.hpp"

namespace shapmarket {

struct CharacteristicFunction::State {
    int arity = 0;
    bool dense = true;  // dense table up to 20 parties, sparse map beyond
    std::function<double(Coalition)> oracle;
    mutable std::vector<double> table;
    mutable std::vector<std::uint8_t> known;
    mutable std::unordered_map<Coalition, double> sparse;
    mutable std::mutex mu;
    mutable std::atomic<std::size_t> evals{0};

    double compute(Coalition c) const {
        evals.fetch_add(1, std::memory_order_relaxed);
        const double v = oracle(c);
        if (c == 0 && v != 0.0)
            throw std::logic_error("characteristic function violates v(empty) == 0");
        if (!std::isfinite(v))
            throw std::runtime_error("characteristic function returned a non-finite value for "
                                     "coalition mask " + std::to_string(c));
        return v;
    }
};

CharacteristicFunction::CharacteristicFunction(int arity, std::function<double(Coalition)> oracle)
    : state_(std::make_shared<State>()) {
    if (arity < 1 || arity > kMaxParties) {
        throw std::invalid_argument("characteristic function arity " + std::to_string(arity) +
                                    " outside [1, " + std::to_string(kMaxParties) + "]");
    }
    if (!oracle) throw std::invalid_argument("characteristic function needs an oracle");
    state_->arity = arity;
    state_->oracle = std::move(oracle);
    state_->dense = arity <= kDefaultExactCap;
    if (state_->dense) {
        state_->table.assign(std::size_t(1) << arity, 0.0);
        state_->known.assign(std::size_t(1) << arity, 0);
    }
}

int CharacteristicFunction::arity() const { return state_->arity; }

Coalition CharacteristicFunction::full_coalition() const {
    return (Coalition(1) << state_->arity) - 1;
}

double CharacteristicFunction::value(Coalition c) const {
    if (c > full_coalition())
        throw std::invalid_argument("coalition mask " + std::to_string(c) +
                                    " out of range for arity " + std::to_string(state_->arity));
    {
        std::lock_guard<std::mutex> lock(state_->mu);
        if (state_->dense) {
            if (state_->known[c]) return state_->table[c];
        } else if (auto it = state_->sparse.find(c); it != state_->sparse.end()) {
            return it->second;
        }
    }
    // Evaluate outside the lock; a racing duplicate evaluation of a pure
    // oracle is wasteful but harmless.
    const double v = state_->compute(c);
    std::lock_guard<std::mutex> lock(state_->mu);
    if (state_->dense) {
        if (!state_->known[c]) {
            state_->table[c] = v;
            state_->known[c] = 1;
        }
        return state_->table[c];
    }
    return state_->sparse.emplace(c, v).first->second;
}

std::size_t CharacteristicFunction::evaluations() const {
    return state_->evals.load(std::memory_order_relaxed);
}

void CharacteristicFunction::precompute_all() const {
    if (!state_->dense) {
        throw std::logic_error("precompute_all requires a dense table (arity <= " +
                               std::to_string(kDefaultExactCap) + ")");
    }
    const std::size_t n = state_->table.size();
    // Each index owns its slot, so workers never write the same byte.
    parallel_for(n, [this](std::size_t c) {
        if (!state_->known[c]) {
            state_->table[c] = state_->compute(Coalition(c));
            state_->known[c] = 1;
        }
    });
}

std::vector<double> shapley_exact(const CharacteristicFunction& v) {
    const int m = v.arity();
    if (m > kDefaultExactCap) {
        throw std::invalid_argument("exact Shapley supports at most " +
                                    std::to_string(kDefaultExactCap) + " parties, got " +
                                    std::to_string(m));
    }
    v.precompute_all();

    // weight[s] = s! (m-s-1)! / m! = 1 / (m * C(m-1, s))
    std::vector<double> weight(m);
    for (int s = 0; s < m; ++s)
        weight[s] = 1.0 / (double(m) * double(binomial(m - 1, s)));

    const Coalition full = v.full_coalition();
    std::vector<double> phi(m, 0.0);
    for (Coalition mask = 0; mask < full; ++mask) {
        const double base = v.value(mask);
        const double w = weight[coalition_size(mask)];
        for (int i = 0; i < m; ++i) {
            const Coalition bit = Coalition(1) << i;
            if (mask & bit) continue;
            phi[i] += w * (v.value(mask | bit) - base);
        }
    }

    // Efficiency must hold to numerical precision by construction; a breach
    // here is a numerical defect worth failing loudly on.
    const double total = std::accumulate(phi.begin(), phi.end(), 0.0);
    const double vp = v.value(full);
    if (std::fabs(total - vp) > 1e-9 * std::max(1.0, std::fabs(vp))) {
        throw std::runtime_error("Shapley efficiency check failed: sum(phi)=" +
                                 std::to_string(total) + " vs v(full)=" + std::to_string(vp));
    }
    return phi;
}

std::vector<double> shapley_normalized(const CharacteristicFunction& v) {
    const double vp = v.value(v.full_coalition());
    if (!(vp > 0.0))
        throw std::domain_error("cannot normalize Shapley values: v(P) = " + std::to_string(vp) +
                                " is not positive");
    std::vector<double> phi = shapley_exact(v);
    for (double& x : phi) x /= vp;
    return phi;
}

namespace {

std::uint64_t factorial_u64(int n) {
    std::uint64_t f = 1;
    for (int i = 2; i <= n; ++i) f *= std::uint64_t(i);
    return f;
}

// Decode the k-th permutation of [0, m) in the factorial number system.
void lehmer_permutation(std::uint64_t index, int m, std::vector<int>& out) {
    static thread_local std::vector<int> avail;
    avail.resize(m);
    std::iota(avail.begin(), avail.end(), 0);
    out.resize(m);
    std::uint64_t rem = index;
    for (int pos = 0; pos < m; ++pos) {
        const std::uint64_t f = factorial_u64(m - 1 - pos);
        const std::size_t digit = std::size_t(rem / f);
        rem %= f;
        out[pos] = avail[digit];
        avail.erase(avail.begin() + long(digit));
    }
}

std::uint64_t bounded_uniform(std::mt19937_64& rng, std::uint64_t bound) {
    // Unbiased rejection sampling; fully specified (no distribution objects).
    const std::uint64_t rem = (0 - bound) % bound;  // 2^64 mod bound
    if (rem == 0) return rng() % bound;
    const std::uint64_t threshold = 0 - rem;  // 2^64 - rem
    for (;;) {
        const std::uint64_t x = rng();
        if (x < threshold) return x % bound;
    }
}

void fisher_yates(std::mt19937_64& rng, std::vector<int>& perm) {
    std::iota(perm.begin(), perm.end(), 0);
    for (std::size_t j = perm.size() - 1; j > 0; --j) {
        const std::uint64_t r = bounded_uniform(rng, j + 1);
        std::swap(perm[j], perm[std::size_t(r)]);
    }
}

}  // namespace

SampledShapley shapley_sampled(const CharacteristicFunction& v, int n_perms,
                               std::uint64_t seed) {
    if (n_perms < 1) throw std::invalid_argument("shapley_sampled needs n_perms >= 1");
    const int m = v.arity();
    std::mt19937_64 rng(seed);

    std::vector<double> sum(m, 0.0), sumsq(m, 0.0);
    std::vector<int> perm(m);

    const bool systematic = m <= 8;
    std::uint64_t total = 0, offset = 0;
    if (systematic) {
        // Cyclic scan of the full permutation table from a random start:
        // unbiased for any n_perms, and exact once n_perms reaches m!.
        total = factorial_u64(m);
        offset = bounded_uniform(rng, total);
    }

    for (int k = 0; k < n_perms; ++k) {
        if (systematic) {
            lehmer_permutation((offset + std::uint64_t(k)) % total, m, perm);
        } else {
            fisher_yates(rng, perm);
        }
        Coalition prefix = 0;
        double prev = 0.0;  // v(empty)
        for (int pos = 0; pos < m; ++pos) {
            const int party = perm[pos];
            prefix |= Coalition(1) << party;
            const double cur = v.value(prefix);
            const double marginal = cur - prev;
            sum[party] += marginal;
            sumsq[party] += marginal * marginal;
            prev = cur;
        }
    }

    SampledShapley out;
    out.permutations = n_perms;
    out.values.resize(m);
    out.std_errors.assign(m, 0.0);
    const double n = double(n_perms);
    for (int i = 0; i < m; ++i) {
        const double mean = sum[i] / n;
        out.values[i] = mean;
        if (n_perms > 1) {
            const double var = std::max(0.0, (sumsq[i] - n * mean * mean) / (n - 1.0));
            out.std_errors[i] = std::sqrt(var / n);
        }
    }
    return out;
}

std::uint64_t binomial(int n, int k) {
    if (n < 0) throw std::invalid_argument("binomial: n must be >= 0");
    if (n > 64) throw std::invalid_argument("binomial: supports n <= 64");
    if (k < 0 || k > n) return 0;
    k = std::min(k, n - k);
    unsigned __int128 result = 1;
    for (int i = 1; i <= k; ++i) {
        result = result * (unsigned __int128)(n - k + i) / (unsigned __int128)i;
    }
    if (result > (unsigned __int128)UINT64_MAX)
        throw std::overflow_error("binomial overflows 64 bits");
    return std::uint64_t(result);
}

double claim1_sum(int parties) {
    if (parties < 2 || parties > 60)
        throw std::invalid_argument("claim1_sum supports 2 <= parties <= 60");
    const int m = parties;
    // Exact rational accumulation. Each term (C(m,s) - C(m-1,s)) / C(m,s)
    // reduces to s/m, so the running denominator stays <= m and nothing
    // approaches overflow; the final value (m-1)/2 converts to double
    // exactly (integers and half-integers are representable).
    std::uint64_t acc_num = 0, acc_den = 1;
    for (int s = 1; s <= m - 1; ++s) {
        std::uint64_t num = binomial(m, s) - binomial(m - 1, s);
        std::uint64_t den = binomial(m, s);
        const std::uint64_t g = std::gcd(num, den);
        num /= g;
        den /= g;
        // acc += num/den
        const std::uint64_t l = std::lcm(acc_den, den);
        acc_num = acc_num * (l / acc_den) + num * (l / den);
        acc_den = l;
        const std::uint64_t g2 = std::gcd(acc_num, acc_den);
        acc_num /= g2;
        acc_den /= g2;
    }
    return double(acc_num) / double(acc_den);
}

}  // namespace shapmarket
