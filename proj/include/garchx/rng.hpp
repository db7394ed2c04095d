#pragma once

#include <cstdint>
#include <initializer_list>
#include <limits>

namespace garchx {

/// splitmix64 finalizer; also used to derive sub-stream seeds.
[[nodiscard]] constexpr std::uint64_t splitmix64(std::uint64_t& state) noexcept {
    std::uint64_t z = (state += 0x9E3779B97F4A7C15ULL);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
}

/// Order-sensitive hash of a seed and a list of tags. Sub-streams of one
/// seed are derived as derive_seed(seed, {tag, index, ...}).
[[nodiscard]] constexpr std::uint64_t derive_seed(std::uint64_t seed, std::initializer_list<std::uint64_t> tags) noexcept {
    std::uint64_t state = seed;
    std::uint64_t h = splitmix64(state);
    for (std::uint64_t tag : tags) {
        state = h ^ (tag + 0x632BE59BD9B4E019ULL);
        h = splitmix64(state);
    }
    return h;
}

/// xoshiro256** with splitmix64 seeding. Bit-identical across platforms;
/// the normal and gamma samplers below rely only on IEEE arithmetic plus
/// std::log/std::sqrt.
class Rng {
  public:
    using result_type = std::uint64_t;

    explicit Rng(std::uint64_t seed) noexcept {
        std::uint64_t state = seed;
        for (auto& word : s_) word = splitmix64(state);
    }

    static constexpr result_type min() noexcept { return 0; }
    static constexpr result_type max() noexcept { return std::numeric_limits<result_type>::max(); }

    result_type operator()() noexcept {
        const std::uint64_t result = rotl(s_[1] * 5, 7) * 9;
        const std::uint64_t t = s_[1] << 17;
        s_[2] ^= s_[0];
        s_[3] ^= s_[1];
        s_[1] ^= s_[2];
        s_[0] ^= s_[3];
        s_[2] ^= t;
        s_[3] = rotl(s_[3], 45);
        return result;
    }

    /// Uniform on the open interval (0, 1).
    double uniform() noexcept { return (static_cast<double>((*this)() >> 11) + 0.5) * 0x1.0p-53; }

    double normal() noexcept;
    /// Gamma(shape, 1), Marsaglia-Tsang.
    double gamma(double shape) noexcept;
    double chi_square(double df) noexcept { return 2.0 * gamma(0.5 * df); }
    /// Raw (unit-scale) Student t draw.
    double student_t(double df) noexcept;

  private:
    static constexpr std::uint64_t rotl(std::uint64_t x, int k) noexcept { return (x << k) | (x >> (64 - k)); }

    std::uint64_t s_[4]{};
    double spare_ = 0.0;
    bool has_spare_ = false;
};

}  // namespace garchx
