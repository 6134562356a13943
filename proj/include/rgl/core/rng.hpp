#pragma once

#include <cmath>
#include <cstdint>
#include <string_view>

#include "rgl/core/small_linalg.hpp"

// Counter-based random numbers: every draw is a pure function of
// (seed, stream label, counter), so sweeps are reproducible regardless of
// evaluation order or worker count.

namespace rgl {

namespace detail {
inline uint64_t mix64(uint64_t z) {
    // splitmix64 finalizer
    z += 0x9e3779b97f4a7c15ULL;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}
inline uint64_t fnv1a(std::string_view s) {
    uint64_t h = 0xcbf29ce484222325ULL;
    for (char c : s) {
        h ^= static_cast<uint64_t>(static_cast<unsigned char>(c));
        h *= 0x100000001b3ULL;
    }
    return h;
}
}  // namespace detail

class CounterRng {
  public:
    CounterRng(uint64_t seed, std::string_view stream)
        : key_(detail::mix64(seed ^ detail::mix64(detail::fnv1a(stream)))) {}

    // mix in extra identifying material (point coordinates, instance ids, ...)
    CounterRng fork(uint64_t salt) const {
        CounterRng r = *this;
        r.key_ = detail::mix64(key_ ^ detail::mix64(salt));
        return r;
    }

    uint64_t bits(uint64_t counter) const { return detail::mix64(key_ ^ (counter * 0xd1342543de82ef95ULL + 1)); }

    // uniform in [0, 1)
    double uniform(uint64_t counter) const {
        return static_cast<double>(bits(counter) >> 11) * 0x1.0p-53;
    }
    double uniform(uint64_t counter, double lo, double hi) const {
        return lo + (hi - lo) * uniform(counter);
    }

    // isotropic unit vector, dim 2 or 3
    Vec unit_vector(int n, uint64_t counter) const {
        Vec u(n);
        if (n == 2) {
            const double th = 2.0 * M_PI * uniform(counter);
            u[0] = std::cos(th);
            u[1] = std::sin(th);
        } else {
            const double z = 2.0 * uniform(counter) - 1.0;
            const double th = 2.0 * M_PI * uniform(counter + 0x10000000ULL);
            const double r = std::sqrt(std::max(0.0, 1.0 - z * z));
            u[0] = r * std::cos(th);
            u[1] = r * std::sin(th);
            u[2] = z;
        }
        return u;
    }

    // uniform in the coordinate ball of the given radius
    Vec in_ball(int n, uint64_t counter, double radius) const {
        const Vec u = unit_vector(n, counter);
        const double p = 1.0 / static_cast<double>(n);
        const double r = radius * std::pow(uniform(counter + 0x20000000ULL), p);
        return r * u;
    }

  private:
    uint64_t key_;
};

// Stable 64-bit fingerprint of doubles, for deriving per-instance streams.
inline uint64_t hash_doubles(std::initializer_list<double> xs) {
    uint64_t h = 0x2545f4914f6cdd1dULL;
    for (double x : xs) {
        uint64_t b;
        static_assert(sizeof(b) == sizeof(x));
        __builtin_memcpy(&b, &x, sizeof(b));
        h = detail::mix64(h ^ b);
    }
    return h;
}

}  // namespace rgl
