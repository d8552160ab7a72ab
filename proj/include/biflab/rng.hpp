#pragma once

#include <cmath>
#include <complex>
#include <cstdint>

namespace biflab {

inline std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

inline std::uint64_t hash_combine(std::uint64_t a, std::uint64_t b) {
    return splitmix64(a ^ (0x9e3779b97f4a7c15ULL + (b << 6) + (b >> 2)));
}

// xoshiro256++ seeded via splitmix64. Streams derived from (seed, stream ids)
// are independent for all practical purposes and bit-reproducible everywhere.
class Rng {
  public:
    explicit Rng(std::uint64_t seed) {
        std::uint64_t x = seed;
        for (auto& w : s_) w = (x = splitmix64(x));
    }
    Rng(std::uint64_t seed, std::uint64_t stream) : Rng(hash_combine(seed, stream)) {}
    Rng(std::uint64_t seed, std::uint64_t s1, std::uint64_t s2)
        : Rng(hash_combine(hash_combine(seed, s1), s2)) {}

    std::uint64_t next() {
        const std::uint64_t result = rotl(s_[0] + s_[3], 23) + s_[0];
        const std::uint64_t t = s_[1] << 17;
        s_[2] ^= s_[0];
        s_[3] ^= s_[1];
        s_[1] ^= s_[2];
        s_[0] ^= s_[3];
        s_[2] ^= t;
        s_[3] = rotl(s_[3], 45);
        return result;
    }

    // uniform in [0, 1)
    double uniform() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }
    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
    // uniform index in [0, n)
    std::size_t index(std::size_t n) { return static_cast<std::size_t>(uniform() * static_cast<double>(n)) % n; }

    double gaussian() {
        // Box-Muller; spare discarded to keep the stream layout simple.
        double u1 = uniform(), u2 = uniform();
        if (u1 < 1e-300) u1 = 1e-300;
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586 * u2);
    }

    std::complex<double> in_disk(double radius) {
        double r = radius * std::sqrt(uniform());
        double t = 6.283185307179586 * uniform();
        return {r * std::cos(t), r * std::sin(t)};
    }

  private:
    static std::uint64_t rotl(std::uint64_t x, int k) { return (x << k) | (x >> (64 - k)); }
    std::uint64_t s_[4];
};

}  // namespace biflab
