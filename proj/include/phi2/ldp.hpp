#ifndef PHI2_LDP_HPP
#define PHI2_LDP_HPP

#include <cmath>
#include <functional>
#include <optional>
#include <stdexcept>
#include <vector>

#include "phi2/action.hpp"
#include "phi2/dynamics.hpp"
#include "phi2/noise.hpp"
#include "phi2/parallel.hpp"

namespace phi2 {

// Joint scaling delta(eps) = delta0 * eps^a.  Exponent a = 0 freezes the
// correlation length, the benchmark mode; regime classification requires a > 0.
struct ScalingFamily {
    double a = 0.5;
    int d = 1;
    double alpha = 0.0;   // eigenfunction growth exponent
    double delta0 = 1.0;

    double delta(double eps) const { return delta0 * std::pow(eps, a); }
};

struct RegimeClassification {
    bool holds_rd46;   // eps * Lambda(delta(eps)) -> 0
    bool holds_rd5050; // exists gamma > d-2+alpha with eps * delta(eps)^-gamma -> 0
};

// Exact power-law classification: with delta = eps^a the product
// eps * Lambda(delta) is eps^{1 - a e} for e = d-2+alpha (always vanishing in
// the d=2, alpha=0 log case).
inline RegimeClassification classify_regime(const ScalingFamily& fam,
                                            std::optional<double> gamma_opt = std::nullopt) {
    if (!(fam.a > 0.0)) throw std::invalid_argument("classify_regime: exponent a must be positive");
    const double e = fam.d - 2.0 + fam.alpha;
    RegimeClassification out{};
    out.holds_rd46 = (fam.d == 2 && fam.alpha == 0.0) ? true : fam.a * e < 1.0;
    if (gamma_opt) {
        out.holds_rd5050 = (*gamma_opt > e) && (fam.a * *gamma_opt < 1.0);
    } else {
        // gamma may be chosen anywhere above max(e, 0)
        out.holds_rd5050 = fam.a * std::max(e, 0.0) < 1.0;
    }
    return out;
}

// Rare events measurable from a trajectory.
struct EventSpec {
    enum class Kind { TerminalBall, PathExceedance } kind = Kind::TerminalBall;
    SpectralField center;    // terminal target, or ignored for exceedance
    double radius = 0.1;
    double hneg_s = 0.0;     // 0 means the H norm, otherwise H^{-s}

    EventSpec(SpectralField c, double r, double s = 0.0,
              Kind k = Kind::TerminalBall)
        : kind(k), center(std::move(c)), radius(r), hneg_s(s) {
        if (!(radius > 0.0)) throw std::invalid_argument("EventSpec: radius must be positive");
    }

    // reference: zero-noise path for exceedance events
    bool occurred(const Trajectory& u, const Trajectory* reference = nullptr) const {
        if (kind == Kind::TerminalBall) {
            SpectralField diff = u.back();
            for (std::size_t i = 0; i < diff.size(); ++i) diff[i] -= center[i];
            const double d = hneg_s > 0.0 ? norm_Hneg(diff, hneg_s) : norm_H(diff);
            return d <= radius;
        }
        if (!reference) throw std::invalid_argument("EventSpec: exceedance needs a reference path");
        return sup_norm_gap(u, *reference, hneg_s) > radius;
    }
};

struct ProbabilityEstimate {
    double p_hat;
    double ci_low;
    double ci_high;
    std::size_t hits;
    std::size_t reps;
    bool censored; // zero hits: one-sided interval
};

// 95% Wilson score interval
inline void wilson_interval(std::size_t hits, std::size_t reps, double& lo, double& hi) {
    const double z = 1.959963984540054;
    const double n = static_cast<double>(reps);
    const double p = static_cast<double>(hits) / n;
    const double z2 = z * z;
    const double denom = 1.0 + z2 / n;
    const double center = (p + z2 / (2.0 * n)) / denom;
    const double half = z * std::sqrt(p * (1.0 - p) / n + z2 / (4.0 * n * n)) / denom;
    lo = std::max(0.0, center - half);
    hi = std::min(1.0, center + half);
}

struct ModelConfig {
    std::shared_ptr<const SpectralBasis> basis;
    PolynomialDrift drift;
    double beta = 1.0;
    SpectralField x;
    SolverOptions solver;
    bool drift_enabled = true;

    ModelConfig(std::shared_ptr<const SpectralBasis> b, PolynomialDrift dr, double beta_,
                SpectralField x0)
        : basis(std::move(b)), drift(dr), beta(beta_), x(std::move(x0)) {}
};

// Plain Monte Carlo over stochastic replicas with delta = family.delta(eps).
inline ProbabilityEstimate estimate_probability(const EventSpec& event, double eps,
                                                const ScalingFamily& family,
                                                const ModelConfig& model, std::size_t reps,
                                                std::uint64_t seed) {
    if (reps < 100) throw std::invalid_argument("estimate_probability: need at least 100 replicas");
    const double delta = family.delta(eps);
    NoiseModel noise(model.basis, delta, model.beta);

    std::optional<Trajectory> reference;
    if (event.kind == EventSpec::Kind::PathExceedance) {
        Control none;
        reference = solve_skeleton(model.x, none, model.drift, model.solver, nullptr,
                                   model.drift_enabled);
    }
    std::vector<unsigned char> hit(reps, 0);
    parallel_for_replicas(reps, [&](std::size_t r) {
        RngStream rng(seed, r, 7);
        const Trajectory u = solve_stochastic(model.x, eps, noise, model.drift, model.solver, rng,
                                              nullptr, model.drift_enabled);
        hit[r] = event.occurred(u, reference ? &*reference : nullptr) ? 1 : 0;
    });
    std::size_t hits = 0;
    for (auto h : hit) hits += h;
    ProbabilityEstimate out{};
    out.hits = hits;
    out.reps = reps;
    out.p_hat = static_cast<double>(hits) / static_cast<double>(reps);
    out.censored = hits == 0;
    wilson_interval(hits, reps, out.ci_low, out.ci_high);
    return out;
}

struct LdpCurveRow {
    double eps;
    double delta;
    double p_hat;
    double ci_low;
    double ci_high;
    double minus_eps_log_p; // NaN when censored
    double rel_gap;         // |(-eps log p) - I*| / I*
    bool censored;
};

struct LdpCurve {
    std::vector<LdpCurveRow> rows;
    double action_value;  // I* from minimize_action for the event
    double trend_slope;   // slope of -eps log p against eps over uncensored rows
};

// Probability curve over a decreasing eps grid, compared against the
// minimized action for the event's terminal target.
inline LdpCurve ldp_curve(const EventSpec& event, const std::vector<double>& eps_grid,
                          const ScalingFamily& family, const ModelConfig& model,
                          std::size_t reps, std::uint64_t seed,
                          const InstantonResult& instanton) {
    for (std::size_t i = 1; i < eps_grid.size(); ++i)
        if (!(eps_grid[i] < eps_grid[i - 1]))
            throw std::invalid_argument("ldp_curve: eps grid must be decreasing");
    LdpCurve curve;
    curve.action_value = instanton.action_value;
    for (std::size_t i = 0; i < eps_grid.size(); ++i) {
        const double eps = eps_grid[i];
        const auto est = estimate_probability(event, eps, family, model, reps, seed + i);
        LdpCurveRow row{};
        row.eps = eps;
        row.delta = family.delta(eps);
        row.p_hat = est.p_hat;
        row.ci_low = est.ci_low;
        row.ci_high = est.ci_high;
        row.censored = est.censored;
        row.minus_eps_log_p = est.censored ? std::nan("") : -eps * std::log(est.p_hat);
        row.rel_gap = est.censored
                          ? std::nan("")
                          : std::abs(row.minus_eps_log_p - curve.action_value) /
                                std::max(curve.action_value, 1e-300);
        curve.rows.push_back(row);
    }
    // trend of -eps log p across eps, uncensored points only
    double sx = 0, sy = 0, sxx = 0, sxy = 0, n = 0;
    for (const auto& r : curve.rows) {
        if (r.censored) continue;
        sx += r.eps; sy += r.minus_eps_log_p;
        sxx += r.eps * r.eps; sxy += r.eps * r.minus_eps_log_p;
        n += 1;
    }
    curve.trend_slope = n > 1 ? (n * sxy - sx * sy) / (n * sxx - sx * sx) : 0.0;
    return curve;
}

// Kendall rank correlation between x and y
inline double kendall_tau(const std::vector<double>& x, const std::vector<double>& y) {
    if (x.size() != y.size() || x.size() < 2)
        throw std::invalid_argument("kendall_tau: need matched samples");
    double s = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i)
        for (std::size_t j = i + 1; j < x.size(); ++j) {
            const double cx = x[j] - x[i], cy = y[j] - y[i];
            const double prod = cx * cy;
            s += prod > 0 ? 1.0 : (prod < 0 ? -1.0 : 0.0);
        }
    const double pairs = 0.5 * static_cast<double>(x.size()) * static_cast<double>(x.size() - 1);
    return s / pairs;
}

struct Condition2Row {
    double eps;
    double delta;
    double mean_gap; // E sup_t |u_eps^{x,phi_eps} - u^{x,phi}| in the chosen norm
    double stderr_;
};

struct Condition2Result {
    std::vector<Condition2Row> rows;
    double tau; // Kendall tau of mean gap against position along the decreasing
                // eps grid; -1 means the gap shrinks monotonically with eps
};

// Perturbation schedule phi_eps = phi + amplitude(eps) sin(t/eps) e_1.
struct PerturbationSchedule {
    double amplitude = 0.0;
    std::function<double(double, double)> shape =
        [](double t, double eps) { return std::sin(t / eps); };

    Control apply(const Control& phi, double eps) const {
        Control out = phi;
        for (std::size_t j = 0; j < out.values.size(); ++j)
            out.values[j][0] += amplitude * shape(out.times[j], eps);
        return out;
    }
};

// Weak-convergence check: the controlled stochastic solution against the
// deterministic skeleton limit, averaged over replicas per eps.
inline Condition2Result condition2_experiment(const ModelConfig& model, const Control& phi,
                                              const PerturbationSchedule& schedule,
                                              const std::vector<double>& eps_grid,
                                              const ScalingFamily& family, std::size_t reps,
                                              std::uint64_t seed, double cost_clamp,
                                              double hneg_s = 1.0) {
    Condition2Result out;
    std::vector<double> gaps;
    for (std::size_t ei = 0; ei < eps_grid.size(); ++ei) {
        const double eps = eps_grid[ei];
        const double delta = family.delta(eps);
        NoiseModel noise(model.basis, delta, model.beta);
        const Control phi_eps = schedule.apply(phi, eps);
        if (phi_eps.squared_l2() > cost_clamp)
            throw std::invalid_argument("condition2_experiment: schedule violates the cost clamp");
        const Trajectory limit =
            solve_skeleton(model.x, phi, model.drift, model.solver, nullptr, model.drift_enabled);
        std::vector<double> sample(reps);
        parallel_for_replicas(reps, [&](std::size_t r) {
            RngStream rng(seed, r, 40 + ei);
            const Trajectory u = solve_controlled(model.x, eps, phi_eps, noise, model.drift,
                                                  model.solver, rng, nullptr, model.drift_enabled);
            sample[r] = sup_norm_gap(u, limit, hneg_s);
        });
        double mean, se;
        detail::mean_stderr(sample, mean, se);
        out.rows.push_back({eps, delta, mean, se});
        gaps.push_back(mean);
    }
    std::vector<double> position(gaps.size());
    for (std::size_t i = 0; i < position.size(); ++i) position[i] = static_cast<double>(i);
    out.tau = kendall_tau(position, gaps);
    return out;
}

} // namespace phi2

#endif
