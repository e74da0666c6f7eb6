#ifndef PHI2_RNG_HPP
#define PHI2_RNG_HPP

#include <cmath>
#include <cstdint>
#include <stdexcept>

namespace phi2 {

// Counter-based stream: splitmix64 with a per-stream odd increment derived
// from (seed, replica, purpose).  Identical keys reproduce identical draws;
// distinct keys give statistically independent sequences.
class RngStream {
public:
    RngStream(std::uint64_t seed, std::uint64_t replica = 0,
              std::uint64_t purpose = 0) {
        state_ = mix(seed ^ mix(replica ^ 0x9e3779b97f4a7c15ull));
        state_ = mix(state_ ^ mix(purpose ^ 0xbf58476d1ce4e5b9ull));
        gamma_ = mix(state_ ^ mix(purpose + 0x94d049bb133111ebull)) | 1ull;
        have_cached_ = false;
    }

    std::uint64_t next_u64() {
        state_ += gamma_;
        return mix(state_);
    }

    // uniform in (0,1)
    double uniform() {
        return (static_cast<double>(next_u64() >> 11) + 0.5) * 0x1.0p-53;
    }

    // standard normal, Marsaglia polar method
    double normal() {
        if (have_cached_) {
            have_cached_ = false;
            return cached_;
        }
        double u, v, s;
        do {
            u = 2.0 * uniform() - 1.0;
            v = 2.0 * uniform() - 1.0;
            s = u * u + v * v;
        } while (s >= 1.0 || s == 0.0);
        const double f = std::sqrt(-2.0 * std::log(s) / s);
        cached_ = v * f;
        have_cached_ = true;
        return u * f;
    }

    // Gamma(shape, 1), Marsaglia-Tsang; shape > 0
    double gamma(double shape) {
        if (!(shape > 0.0)) throw std::invalid_argument("gamma: shape must be positive");
        if (shape < 1.0) {
            const double u = uniform();
            return gamma(shape + 1.0) * std::pow(u, 1.0 / shape);
        }
        const double d = shape - 1.0 / 3.0;
        const double c = 1.0 / std::sqrt(9.0 * d);
        for (;;) {
            double x, v;
            do {
                x = normal();
                v = 1.0 + c * x;
            } while (v <= 0.0);
            v = v * v * v;
            const double u = uniform();
            if (u < 1.0 - 0.0331 * x * x * x * x) return d * v;
            if (std::log(u) < 0.5 * x * x + d * (1.0 - v + std::log(v))) return d * v;
        }
    }

    // chi^2 with integer dof >= 0
    double chi_squared(unsigned dof) {
        if (dof == 0) return 0.0;
        return 2.0 * gamma(0.5 * static_cast<double>(dof));
    }

    // noncentral chi^2, integer dof >= 1, noncentrality lambda >= 0
    double noncentral_chi_squared(unsigned dof, double lambda) {
        if (dof < 1) throw std::invalid_argument("noncentral_chi_squared: dof must be >= 1");
        const double z = normal() + std::sqrt(lambda);
        return chi_squared(dof - 1) + z * z;
    }

private:
    static std::uint64_t mix(std::uint64_t z) {
        z += 0x9e3779b97f4a7c15ull;
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
        return z ^ (z >> 31);
    }

    std::uint64_t state_;
    std::uint64_t gamma_;
    double cached_ = 0.0;
    bool have_cached_;
};

} // namespace phi2

#endif
