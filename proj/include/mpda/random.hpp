#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <vector>

namespace mpda {

/// splitmix64 finalizer; used to derive independent substream seeds.
constexpr std::uint64_t mix64(std::uint64_t x) noexcept
{
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

constexpr std::uint64_t substream_seed(std::uint64_t seed, std::uint64_t index, std::uint64_t salt = 0) noexcept
{
    return mix64(mix64(seed ^ mix64(salt)) + index);
}

/// Seeded generator whose draws are identical on every platform.
///
/// std::mt19937_64's raw output is fixed by the standard, the <random>
/// distributions are not, so the conversions live here.
class Rng {
public:
    explicit Rng(std::uint64_t seed = 0) : engine_(seed) {}
    Rng(std::uint64_t seed, std::uint64_t stream, std::uint64_t salt = 0) : engine_(substream_seed(seed, stream, salt)) {}

    std::uint64_t next() { return engine_(); }

    /// [0, 1)
    double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }
    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    /// [0, n)
    std::uint64_t below(std::uint64_t n)
    {
        // Lemire-style rejection keeps this unbiased.
        const std::uint64_t limit = ~std::uint64_t(0) - (~std::uint64_t(0) % n);
        std::uint64_t x;
        do
            x = engine_();
        while (x >= limit);
        return x % n;
    }

    bool bernoulli(double p) { return uniform() < p; }

    double normal()
    {
        // Box-Muller; one value per call keeps the draw count predictable.
        double u1 = uniform();
        while (u1 <= 0.0)
            u1 = uniform();
        const double u2 = uniform();
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586 * u2);
    }

    template <typename It>
    void shuffle(It first, It last)
    {
        const auto n = static_cast<std::uint64_t>(last - first);
        for (std::uint64_t i = n; i > 1; --i)
            std::swap(first[i - 1], first[below(i)]);
    }

private:
    std::mt19937_64 engine_;
};

}  // namespace mpda
