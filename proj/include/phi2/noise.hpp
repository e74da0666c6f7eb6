#ifndef PHI2_NOISE_HPP
#define PHI2_NOISE_HPP

#include <cmath>
#include <cstdio>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <stdexcept>
#include <vector>

#include "phi2/parallel.hpp"
#include "phi2/rng.hpp"
#include "phi2/spectral.hpp"

namespace phi2 {

// per-mode amplitude of Q_delta^{1/2}
inline double lambda_amp(double alpha_k, double delta, double beta) {
    if (!(alpha_k > 0.0)) throw std::invalid_argument("lambda_amp: alpha_k must be positive");
    if (!(delta >= 0.0)) throw std::invalid_argument("lambda_amp: delta must be nonnegative");
    if (!(beta >= 0.0)) throw std::invalid_argument("lambda_amp: beta must be nonnegative");
    return std::pow(1.0 + delta * std::sqrt(alpha_k), -beta);
}

// Spatially colored Wiener forcing on the sine basis: per-mode amplitudes
// lambda_k(delta) = (1 + delta sqrt(alpha_k))^{-beta}, the eigenvalues of
// Q_delta^{1/2}.  The admissibility flag records whether the smoothing
// exponent satisfies beta > (d - 2 + alpha)/2.
class NoiseModel {
public:
    NoiseModel(std::shared_ptr<const SpectralBasis> basis, double delta, double beta)
        : basis_(std::move(basis)), delta_(delta), beta_(beta) {
        if (!(delta >= 0.0)) throw std::invalid_argument("NoiseModel: delta must be nonnegative");
        if (!(beta >= 0.0)) throw std::invalid_argument("NoiseModel: beta must be nonnegative");
        amps_.resize(basis_->size());
        for (std::size_t i = 0; i < amps_.size(); ++i)
            amps_[i] = lambda_amp(basis_->eigenvalue(i), delta, beta);
        // box eigenfunctions have uniformly bounded sup norm: alpha = 0
        admissible_ = beta > 0.5 * (basis_->dim() - 2.0);
        if (!admissible_)
            std::fprintf(stderr,
                         "warning: beta=%g violates beta > (d-2+alpha)/2 for d=%d, alpha=0\n",
                         beta, basis_->dim());
    }

    const SpectralBasis& basis() const { return *basis_; }
    std::shared_ptr<const SpectralBasis> basis_ptr() const { return basis_; }
    double delta() const { return delta_; }
    double beta() const { return beta_; }
    bool admissible() const { return admissible_; }
    const std::vector<double>& mode_amps() const { return amps_; }
    double amp(std::size_t i) const { return amps_[i]; }

private:
    std::shared_ptr<const SpectralBasis> basis_;
    double delta_;
    double beta_;
    std::vector<double> amps_;
    bool admissible_;
};

// increment of w^delta over dt: independent N(0, lambda_k^2 dt) per mode
inline SpectralField wiener_increment(const NoiseModel& noise, double dt, RngStream& rng) {
    if (!(dt > 0.0)) throw std::invalid_argument("wiener_increment: dt must be positive");
    SpectralField out(noise.basis_ptr());
    const double sdt = std::sqrt(dt);
    for (std::size_t i = 0; i < out.size(); ++i)
        out[i] = noise.amp(i) * sdt * rng.normal();
    return out;
}

// exact distributional step of dz = Az dt + dw^delta per mode
inline SpectralField ou_step(const SpectralField& z, double dt, const NoiseModel& noise,
                             RngStream& rng) {
    if (!(dt >= 0.0)) throw std::invalid_argument("ou_step: dt must be nonnegative");
    if (!(z.basis() == noise.basis())) throw std::invalid_argument("ou_step: basis mismatch");
    SpectralField out = z;
    for (std::size_t i = 0; i < out.size(); ++i) {
        const double a = z.basis().eigenvalue(i);
        const double decay = std::exp(-a * dt);
        const double var = noise.amp(i) * noise.amp(i) * (1.0 - decay * decay) / (2.0 * a);
        out[i] = decay * out[i] + std::sqrt(var) * rng.normal();
    }
    return out;
}

namespace detail {

inline double simpson(double a, double b, double fa, double fm, double fb) {
    return (b - a) / 6.0 * (fa + 4.0 * fm + fb);
}

inline double adaptive_simpson(const std::function<double(double)>& f, double a, double b,
                               double fa, double fm, double fb, double whole, double tol,
                               int depth) {
    const double m = 0.5 * (a + b);
    const double lm = 0.5 * (a + m), rm = 0.5 * (m + b);
    const double flm = f(lm), frm = f(rm);
    const double left = simpson(a, m, fa, flm, fm);
    const double right = simpson(m, b, fm, frm, fb);
    if (depth <= 0 || std::abs(left + right - whole) <= 15.0 * tol)
        return left + right + (left + right - whole) / 15.0;
    return adaptive_simpson(f, a, m, fa, flm, fm, left, 0.5 * tol, depth - 1) +
           adaptive_simpson(f, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1);
}

inline double integrate(const std::function<double(double)>& f, double a, double b,
                        double tol = 1e-12) {
    if (b <= a) return 0.0;
    const double fa = f(a), fb = f(b), fm = f(0.5 * (a + b));
    return adaptive_simpson(f, a, b, fa, fm, fb, simpson(a, b, fa, fm, fb), tol, 40);
}

} // namespace detail

// int_0^t r^{-theta} e^{-2 alpha r} dr, singularity removed by r = s^{1/(1-theta)}
inline double convolution_variance_integral(double alpha, double theta, double t) {
    if (!(theta >= 0.0 && theta < 1.0))
        throw std::invalid_argument("convolution_variance_integral: theta must be in [0,1)");
    if (t <= 0.0) return 0.0;
    if (theta == 0.0) return (1.0 - std::exp(-2.0 * alpha * t)) / (2.0 * alpha);
    const double q = 1.0 - theta;
    auto g = [&](double s) { return std::exp(-2.0 * alpha * std::pow(s, 1.0 / q)) / q; };
    return detail::integrate(g, 0.0, std::pow(t, q));
}

// Trajectory of marginal-law samples of the weighted stochastic convolution
// z_{delta,theta}: per mode and output time, an independent Gaussian with the
// exact variance lambda_k^2 int_0^t r^{-theta} e^{-2 alpha_k r} dr.
struct ConvolutionSamples {
    std::vector<double> times;
    std::vector<SpectralField> states;
};

inline ConvolutionSamples convolution_theta(const NoiseModel& noise, double theta, double T,
                                            double dt, RngStream& rng) {
    if (!(theta >= 0.0 && theta < 1.0))
        throw std::invalid_argument("convolution_theta: theta must be in [0,1)");
    if (!(T > 0.0 && dt > 0.0)) throw std::invalid_argument("convolution_theta: T, dt must be positive");
    const std::size_t nt = static_cast<std::size_t>(std::llround(T / dt));
    ConvolutionSamples out;
    out.times.reserve(nt + 1);
    for (std::size_t j = 0; j <= nt; ++j) {
        const double t = static_cast<double>(j) * dt;
        out.times.push_back(t);
        SpectralField z(noise.basis_ptr());
        for (std::size_t i = 0; i < z.size(); ++i) {
            const double var = noise.amp(i) * noise.amp(i) *
                               convolution_variance_integral(noise.basis().eigenvalue(i), theta, t);
            z[i] = std::sqrt(var) * rng.normal();
        }
        out.states.push_back(std::move(z));
    }
    return out;
}

// Divergence rate of sup_t E |z_{delta,theta}(t)|_p^2 as delta -> 0
inline double Lambda_theta(double delta, double theta, int d, double alpha) {
    if (!(delta > 0.0 && delta < 1.0))
        throw std::invalid_argument("Lambda_theta: delta must be in (0,1)");
    if (!(theta >= 0.0 && theta < 1.0))
        throw std::invalid_argument("Lambda_theta: theta must be in [0,1)");
    if (!(alpha >= 0.0)) throw std::invalid_argument("Lambda_theta: alpha must be nonnegative");
    if (alpha == 0.0 && theta == 0.0 && d == 2) return std::log(1.0 / delta);
    return std::pow(delta, -(d - 2.0 * (1.0 - theta) + alpha));
}

inline double Lambda(double delta, int d, double alpha) {
    return Lambda_theta(delta, 0.0, d, alpha);
}

// Divergence rate of sup_t E |z_{delta,theta}(t)|_{H^{-s}}^2
inline double Gamma_theta_s(double delta, double theta, double s, int d) {
    if (!(delta > 0.0 && delta < 1.0))
        throw std::invalid_argument("Gamma_theta_s: delta must be in (0,1)");
    if (!(theta >= 0.0 && theta < 1.0))
        throw std::invalid_argument("Gamma_theta_s: theta must be in [0,1)");
    if (!(s > 0.0)) throw std::invalid_argument("Gamma_theta_s: s must be positive");
    if (theta == s && d == 2) return std::log(1.0 / delta);
    return std::pow(delta, -(d - 2.0 * (1.0 - theta) - 2.0 * s));
}

// ---------------------------------------------------------------------------
// Moment scaling experiments.
//
// The per-mode variances depend on the eigenvalue only, so box modes are
// grouped by the integer |k|^2; a group of m modes contributes its variance
// times a chi^2_m draw (final-time laws) or follows a squared
// Ornstein-Uhlenbeck radial process sampled by exact noncentral-chi^2
// transitions (running suprema).
// ---------------------------------------------------------------------------

struct ModeGroup {
    double alpha;     // eigenvalue shared by the group
    unsigned mult;    // number of modes
};

inline std::vector<ModeGroup> group_box_modes(int d, double L, int M) {
    std::map<long, unsigned> counts;
    std::vector<int> k(static_cast<std::size_t>(d), 1);
    for (;;) {
        long q = 0;
        for (int i = 0; i < d; ++i) q += static_cast<long>(k[static_cast<std::size_t>(i)]) *
                                         k[static_cast<std::size_t>(i)];
        ++counts[q];
        int axis = d - 1;
        while (axis >= 0 && ++k[static_cast<std::size_t>(axis)] > M) {
            k[static_cast<std::size_t>(axis)] = 1;
            --axis;
        }
        if (axis < 0) break;
    }
    const double base = (M_PI / L) * (M_PI / L);
    std::vector<ModeGroup> groups;
    groups.reserve(counts.size());
    for (const auto& [q, m] : counts) groups.push_back({base * static_cast<double>(q), m});
    return groups;
}

// Synthetic spectrum: alpha_k = k^{2/d} with sup-norm weight w_k = k^{alpha/d}
// per Hypothesis-1-style eigenfunction growth; scalar modes, no spatial grid.
struct SyntheticSpectrum {
    int d = 2;
    double alpha_exponent = 0.0;
    std::size_t K = 100000;
};

struct MomentScalingRow {
    double delta;
    double estimate; // MC estimate of the moment
    double stderr_;  // standard error over replicas
    double oracle;   // exact variance sum at the final time
    std::size_t reps;
};

enum class MomentQuantity {
    L2_final,  // E |z_delta,theta(T)|_H^2
    Hneg_sup,  // E sup_t |z_delta(t)|_{H^{-s}}^2 over the output grid (theta = 0)
};

struct MomentScalingConfig {
    MomentQuantity quantity = MomentQuantity::L2_final;
    double theta = 0.0;
    double s = 1.0;            // H^{-s} exponent for Hneg_sup
    double T = 1.0;
    std::size_t sup_times = 16; // output-grid resolution for the running sup
    std::size_t reps = 1000;
    std::uint64_t seed = 0;
};

namespace detail {

// one replica of sum_g weight_g * S_g where S_g ~ var_g * chi^2_{m_g}
inline double sample_final(const std::vector<ModeGroup>& groups,
                           const std::vector<double>& var,
                           const std::vector<double>& weight, RngStream& rng) {
    double acc = 0.0;
    for (std::size_t g = 0; g < groups.size(); ++g)
        acc += weight[g] * var[g] * rng.chi_squared(groups[g].mult);
    return acc;
}

// one replica of sup over the output grid of sum_g weight_g * S_g(t), where
// S_g is the sum of squares of m iid OU modes (exact CIR transitions)
inline double sample_sup(const std::vector<ModeGroup>& groups,
                         const std::vector<double>& lam2,
                         const std::vector<double>& weight, double T,
                         std::size_t n_times, RngStream& rng) {
    const double dt = T / static_cast<double>(n_times);
    std::vector<double> S(groups.size(), 0.0);
    std::vector<double> decay2(groups.size()), c(groups.size());
    for (std::size_t g = 0; g < groups.size(); ++g) {
        const double a = groups[g].alpha;
        const double e2 = std::exp(-2.0 * a * dt);
        decay2[g] = e2;
        c[g] = lam2[g] * (1.0 - e2) / (2.0 * a);
    }
    double best = 0.0;
    for (std::size_t j = 0; j < n_times; ++j) {
        double norm = 0.0;
        for (std::size_t g = 0; g < groups.size(); ++g) {
            const double nc = S[g] * decay2[g] / c[g];
            S[g] = c[g] * rng.noncentral_chi_squared(groups[g].mult, nc);
            norm += weight[g] * S[g];
        }
        best = std::max(best, norm);
    }
    return best;
}

inline void mean_stderr(const std::vector<double>& v, double& mean, double& se) {
    mean = 0.0;
    for (double x : v) mean += x;
    mean /= static_cast<double>(v.size());
    double var = 0.0;
    for (double x : v) var += (x - mean) * (x - mean);
    var /= static_cast<double>(v.size() > 1 ? v.size() - 1 : 1);
    se = std::sqrt(var / static_cast<double>(v.size()));
}

} // namespace detail

// Box-basis scaling study over a delta grid.
inline std::vector<MomentScalingRow> moment_scaling_experiment(
    int d, double L, int M, double beta, const std::vector<double>& deltas,
    const MomentScalingConfig& cfg) {
    if (cfg.reps < 2) throw std::invalid_argument("moment_scaling_experiment: reps too small");
    for (std::size_t i = 1; i < deltas.size(); ++i)
        if (!(deltas[i] < deltas[i - 1]))
            throw std::invalid_argument("moment_scaling_experiment: delta grid must be strictly decreasing");
    if (cfg.quantity == MomentQuantity::Hneg_sup && cfg.theta != 0.0)
        throw std::invalid_argument("moment_scaling_experiment: running sup requires theta = 0");

    const auto groups = group_box_modes(d, L, M);
    std::vector<MomentScalingRow> rows;
    for (std::size_t di = 0; di < deltas.size(); ++di) {
        const double delta = deltas[di];
        std::vector<double> lam2(groups.size()), var(groups.size()), weight(groups.size());
        double oracle = 0.0;
        for (std::size_t g = 0; g < groups.size(); ++g) {
            const double lam = lambda_amp(groups[g].alpha, delta, beta);
            lam2[g] = lam * lam;
            var[g] = lam2[g] * convolution_variance_integral(groups[g].alpha, cfg.theta, cfg.T);
            weight[g] = cfg.quantity == MomentQuantity::Hneg_sup
                            ? std::pow(groups[g].alpha, -cfg.s)
                            : 1.0;
            oracle += weight[g] * var[g] * groups[g].mult;
        }
        std::vector<double> samples(cfg.reps);
        parallel_for_replicas(cfg.reps, [&](std::size_t r) {
            RngStream rng(cfg.seed, r, 1000 + di);
            samples[r] = cfg.quantity == MomentQuantity::Hneg_sup
                             ? detail::sample_sup(groups, lam2, weight, cfg.T, cfg.sup_times, rng)
                             : detail::sample_final(groups, var, weight, rng);
        });
        double mean, se;
        detail::mean_stderr(samples, mean, se);
        rows.push_back({delta, mean, se, oracle, cfg.reps});
    }
    return rows;
}

// Synthetic-spectrum scaling study: weighted final-time second moment
// sum_k k^{alpha/d} E z_k(T)^2, the mode-sum surrogate for E |z(T)|_p^2
// under eigenfunction growth |e_k|_inf^2 <= c k^{alpha/d}.
inline std::vector<MomentScalingRow> moment_scaling_experiment_synthetic(
    const SyntheticSpectrum& spec, double beta, const std::vector<double>& deltas,
    const MomentScalingConfig& cfg) {
    if (cfg.reps < 2) throw std::invalid_argument("moment_scaling_experiment: reps too small");
    std::vector<MomentScalingRow> rows;
    const double inv_d = 1.0 / static_cast<double>(spec.d);
    std::vector<double> alpha(spec.K), w(spec.K);
    for (std::size_t k = 0; k < spec.K; ++k) {
        const double kk = static_cast<double>(k + 1);
        alpha[k] = std::pow(kk, 2.0 * inv_d);
        w[k] = std::pow(kk, spec.alpha_exponent * inv_d);
    }
    for (std::size_t di = 0; di < deltas.size(); ++di) {
        const double delta = deltas[di];
        std::vector<double> q(spec.K);
        double oracle = 0.0;
        for (std::size_t k = 0; k < spec.K; ++k) {
            const double lam = lambda_amp(alpha[k], delta, beta);
            q[k] = w[k] * lam * lam * convolution_variance_integral(alpha[k], cfg.theta, cfg.T);
            oracle += q[k];
        }
        std::vector<double> samples(cfg.reps);
        parallel_for_replicas(cfg.reps, [&](std::size_t r) {
            RngStream rng(cfg.seed, r, 2000 + di);
            double acc = 0.0;
            for (std::size_t k = 0; k < spec.K; ++k) {
                const double z = rng.normal();
                acc += q[k] * z * z;
            }
            samples[r] = acc;
        });
        double mean, se;
        detail::mean_stderr(samples, mean, se);
        rows.push_back({delta, mean, se, oracle, cfg.reps});
    }
    return rows;
}

// least-squares slope of log(estimate) against log(delta)
inline double fit_log_slope(const std::vector<MomentScalingRow>& rows) {
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    const double n = static_cast<double>(rows.size());
    for (const auto& r : rows) {
        const double x = std::log(r.delta), y = std::log(r.estimate);
        sx += x; sy += y; sxx += x * x; sxy += x * y;
    }
    return (n * sxy - sx * sy) / (n * sxx - sx * sx);
}

// R^2 of a linear fit of estimate against log(1/delta)
inline double fit_loginv_r2(const std::vector<MomentScalingRow>& rows) {
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    const double n = static_cast<double>(rows.size());
    for (const auto& r : rows) {
        const double x = std::log(1.0 / r.delta), y = r.estimate;
        sx += x; sy += y; sxx += x * x; sxy += x * y;
    }
    const double slope = (n * sxy - sx * sy) / (n * sxx - sx * sx);
    const double icept = (sy - slope * sx) / n;
    double ssr = 0, sst = 0;
    for (const auto& r : rows) {
        const double x = std::log(1.0 / r.delta), y = r.estimate;
        ssr += (y - slope * x - icept) * (y - slope * x - icept);
        sst += (y - sy / n) * (y - sy / n);
    }
    return 1.0 - ssr / sst;
}

} // namespace phi2

#endif
