#pragma once

#include <cmath>
#include <cstdint>
#include <initializer_list>

namespace epikit {

/// Identifies one reproducible random stream: (master_seed, stream_id).
struct SeedPolicy {
    std::uint64_t master_seed = 0;
    std::uint64_t stream_id = 0;

    friend bool operator==(const SeedPolicy&, const SeedPolicy&) = default;
};

inline SeedPolicy derive_stream(SeedPolicy policy, std::uint64_t k) {
    policy.stream_id = k;
    return policy;
}

namespace rng {

// splitmix64 finalizer
constexpr std::uint64_t mix64(std::uint64_t z) noexcept {
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

constexpr std::uint64_t kGolden = 0x9e3779b97f4a7c15ULL;

/// Key of a stream: every draw is a pure function of (key, counter words).
constexpr std::uint64_t stream_key(const SeedPolicy& p) noexcept {
    return mix64(mix64(p.master_seed + kGolden) ^ (p.stream_id * 0xd6e8feb86659fd93ULL + 0x632be59bd9b4e019ULL));
}

/// Counter-based hash of a stream key and a sequence of counter words.
inline std::uint64_t hash(std::uint64_t key, std::initializer_list<std::uint64_t> words) noexcept {
    std::uint64_t h = key;
    for (std::uint64_t w : words) h = mix64(h ^ mix64(w + kGolden));
    return h;
}

/// Maps 64 random bits to a double in [0, 1).
constexpr double to_unit(std::uint64_t bits) noexcept {
    return static_cast<double>(bits >> 11) * 0x1.0p-53;
}

/// Maps 64 random bits to a double in (0, 1].
constexpr double to_unit_open_low(std::uint64_t bits) noexcept {
    return static_cast<double>((bits >> 11) + 1) * 0x1.0p-53;
}

inline double uniform(std::uint64_t key, std::initializer_list<std::uint64_t> words) noexcept {
    return to_unit(hash(key, words));
}

}  // namespace rng

/// Sequential generator over a counter-based stream. Platform independent:
/// no std:: distributions are involved, so draws are bit-identical everywhere.
class RandomStream {
public:
    explicit RandomStream(const SeedPolicy& policy) : key_(rng::stream_key(policy)) {}

    std::uint64_t next_u64() noexcept { return rng::mix64(key_ ^ rng::mix64(counter_++ + rng::kGolden)); }

    /// [0, 1)
    double uniform() noexcept { return rng::to_unit(next_u64()); }

    /// Integer in [0, n). Uses rejection to stay unbiased.
    std::uint64_t below(std::uint64_t n) noexcept {
        if (n <= 1) return 0;
        const std::uint64_t limit = ~std::uint64_t{0} - (~std::uint64_t{0} % n);
        std::uint64_t x;
        do {
            x = next_u64();
        } while (x >= limit);
        return x % n;
    }

    /// Standard normal via Box-Muller (one value per call; the partner is discarded).
    double normal() noexcept {
        const double u1 = rng::to_unit_open_low(next_u64());
        const double u2 = uniform();
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586 * u2);
    }

    std::uint64_t draws() const noexcept { return counter_; }

private:
    std::uint64_t key_;
    std::uint64_t counter_ = 0;
};

}  // namespace epikit
