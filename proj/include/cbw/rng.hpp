#pragma once

// Deterministic random streams. Every piece of randomness in the workbench
// flows from one root seed through named derivation, so per-record transforms
// draw from independent streams and results do not depend on iteration order
// or on the platform's standard-library distributions.

#include <cstdint>
#include <stdexcept>
#include <string_view>
#include <vector>

namespace cbw {

constexpr std::uint64_t fnv1a64(std::string_view s) {
    std::uint64_t h = 1469598103934665603ull;
    for (unsigned char c : s) {
        h ^= c;
        h *= 1099511628211ull;
    }
    return h;
}

inline std::uint64_t splitmix64(std::uint64_t& state) {
    state += 0x9e3779b97f4a7c15ull;
    std::uint64_t z = state;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
    return z ^ (z >> 31);
}

// xoshiro256** seeded through splitmix64.
class Rng {
  public:
    explicit Rng(std::uint64_t seed) {
        std::uint64_t sm = seed;
        for (auto& word : state_) word = splitmix64(sm);
    }

    std::uint64_t next_u64() {
        const std::uint64_t result = rotl(state_[1] * 5, 7) * 9;
        const std::uint64_t t = state_[1] << 17;
        state_[2] ^= state_[0];
        state_[3] ^= state_[1];
        state_[1] ^= state_[2];
        state_[0] ^= state_[3];
        state_[2] ^= t;
        state_[3] = rotl(state_[3], 45);
        return result;
    }

    // Unbiased draw in [0, n). Lemire's multiply-with-rejection.
    std::uint64_t below(std::uint64_t n) {
        if (n == 0) throw std::invalid_argument("Rng::below(0)");
        using u128 = unsigned __int128;
        std::uint64_t x = next_u64();
        u128 m = static_cast<u128>(x) * n;
        auto low = static_cast<std::uint64_t>(m);
        if (low < n) {
            const std::uint64_t threshold = (0 - n) % n;
            while (low < threshold) {
                x = next_u64();
                m = static_cast<u128>(x) * n;
                low = static_cast<std::uint64_t>(m);
            }
        }
        return static_cast<std::uint64_t>(m >> 64);
    }

    // Uniform in [0, 1) with 53-bit resolution.
    double real() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    // Uniform in [lo, hi).
    double real(double lo, double hi) { return lo + (hi - lo) * real(); }

    template <typename T>
    void shuffle(std::vector<T>& v) {
        for (std::size_t i = v.size(); i > 1; --i) {
            std::swap(v[i - 1], v[below(i)]);
        }
    }

  private:
    static std::uint64_t rotl(std::uint64_t x, int k) {
        return (x << k) | (x >> (64 - k));
    }

    std::uint64_t state_[4];
};

// Stream derivation: (root seed, label[, id]) -> fresh seed. Labels name the
// pipeline stage, ids name the record, so streams never collide or realign.
inline std::uint64_t derive_seed(std::uint64_t root, std::string_view label,
                                 std::string_view id = {}) {
    std::uint64_t h = root;
    h ^= fnv1a64(label) + 0x9e3779b97f4a7c15ull + (h << 6) + (h >> 2);
    h ^= fnv1a64(id) + 0x9e3779b97f4a7c15ull + (h << 6) + (h >> 2);
    std::uint64_t sm = h;
    return splitmix64(sm);
}

inline Rng derive_rng(std::uint64_t root, std::string_view label,
                      std::string_view id = {}) {
    return Rng(derive_seed(root, label, id));
}

}  // namespace cbw
