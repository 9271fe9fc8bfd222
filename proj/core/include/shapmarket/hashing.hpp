#pragma once

#include <cstdint>
#include <cstring>
#include <string_view>
#include <type_traits>

namespace shapmarket {

// Incremental FNV-1a (64-bit). Used for dataset/model fingerprints and
// config hashes embedded in reports; stable across platforms for the same
// byte stream.
class Fnv1a {
public:
    static constexpr std::uint64_t kOffset = 14695981039346656037ull;
    static constexpr std::uint64_t kPrime = 1099511628211ull;

    void feed_bytes(const void* data, std::size_t n) {
        const auto* p = static_cast<const unsigned char*>(data);
        for (std::size_t i = 0; i < n; ++i) {
            state_ ^= p[i];
            state_ *= kPrime;
        }
    }

    template <typename T>
    void feed(const T& value) {
        static_assert(std::is_trivially_copyable_v<T>);
        unsigned char buf[sizeof(T)];
        std::memcpy(buf, &value, sizeof(T));
        feed_bytes(buf, sizeof(T));
    }

    void feed_string(std::string_view s) {
        feed(s.size());
        feed_bytes(s.data(), s.size());
    }

    std::uint64_t digest() const { return state_; }

private:
    std::uint64_t state_ = kOffset;
};

inline std::uint64_t fnv1a(std::string_view s) {
    Fnv1a h;
    h.feed_bytes(s.data(), s.size());
    return h.digest();
}

// SplitMix64 step; used to derive independent child seeds from a master
// seed plus a stream index without correlated low bits.
inline std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t stream) {
    std::uint64_t z = seed + 0x9e3779b97f4a7c15ull * (stream + 1);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
    return z ^ (z >> 31);
}

}  // namespace shapmarket
