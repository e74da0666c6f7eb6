#ifndef PHI2_DYNAMICS_HPP
#define PHI2_DYNAMICS_HPP

#include <cmath>
#include <memory>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "phi2/noise.hpp"
#include "phi2/nonlinearity.hpp"
#include "phi2/spectral.hpp"

namespace phi2 {

struct BlowUpError : std::runtime_error {
    std::size_t step;
    explicit BlowUpError(std::size_t s)
        : std::runtime_error("solution blew up (non-finite state) at step " + std::to_string(s)),
          step(s) {}
};

// Time-indexed sequence of spectral states on a uniform grid.
struct Trajectory {
    std::vector<double> times;
    std::vector<SpectralField> states;

    double dt() const { return times.size() > 1 ? times[1] - times[0] : 0.0; }
    std::size_t steps() const { return times.empty() ? 0 : times.size() - 1; }
    const SpectralField& front() const { return states.front(); }
    const SpectralField& back() const { return states.back(); }
};

// Piecewise-constant (left endpoint) control on the same grid contract:
// values[j] acts on [t_j, t_{j+1}); the final slot is carried but unused.
struct Control {
    std::vector<double> times;
    std::vector<SpectralField> values;

    double dt() const { return times.size() > 1 ? times[1] - times[0] : 0.0; }
    std::size_t steps() const { return times.empty() ? 0 : times.size() - 1; }

    static Control zero(std::shared_ptr<const SpectralBasis> basis, double T, double dt) {
        Control c;
        const std::size_t nt = static_cast<std::size_t>(std::llround(T / dt));
        for (std::size_t j = 0; j <= nt; ++j) {
            c.times.push_back(static_cast<double>(j) * dt);
            c.values.emplace_back(basis);
        }
        return c;
    }

    // squared L^2(0,T;H) norm
    double squared_l2() const {
        double acc = 0.0;
        for (std::size_t j = 0; j + 1 < values.size(); ++j) {
            double s = 0.0;
            for (double v : values[j].coeffs()) s += v * v;
            acc += s;
        }
        return acc * dt();
    }
};

struct SolverDiagnostics {
    double sup_norm_H = 0.0;     // sup_t |u(t)|_H
    double int_Lpn = 0.0;        // int_0^T |u(t)|_{p_n}^{p_n} dt
    bool accuracy_warning = false; // |f'(max|u|)| dt exceeded 1 somewhere
};

struct SolverOptions {
    double dt = 1.0 / 256;
    double T = 1.0;
    std::size_t output_stride = 1;
    bool dealias = true;
    bool use_truncation = false;   // integrate with f_N instead of f
    bool track_Lpn = false;        // grid pass per step for the a-priori bound
};

namespace detail {

// Exponential-Euler integrator core.  Per mode,
//   u_k <- e^{-a dt} u_k + psi_k (F(u)_k + cmul_k phi_k) + noise_k,
// with psi_k = (1 - e^{-a dt})/a exact for the linear part, and the noise
// increment carrying the exact Ornstein-Uhlenbeck variance.
struct ExpEulerStepper {
    std::shared_ptr<const SpectralBasis> basis;
    std::vector<double> decay, psi;
    NonlinearSpectralOp op;
    bool drift_enabled;

    ExpEulerStepper(std::shared_ptr<const SpectralBasis> b, const PolynomialDrift& drift,
                    const SolverOptions& opt, bool enable_drift = true)
        : basis(b), op(b, drift, opt.dealias, opt.use_truncation), drift_enabled(enable_drift) {
        decay.resize(b->size());
        psi.resize(b->size());
        for (std::size_t i = 0; i < b->size(); ++i) {
            const double a = b->eigenvalue(i);
            decay[i] = std::exp(-a * opt.dt);
            psi[i] = (1.0 - decay[i]) / a;
        }
    }
};

} // namespace detail

// Deterministic controlled equation u' = Au + F(u) + cmul*phi.  The optional
// per-mode control multiplier cmul covers the Q_delta phi and Q_delta^{1/2} phi
// variants; empty means the plain control.
inline Trajectory solve_skeleton_weighted(const SpectralField& x, const Control& phi,
                                          const PolynomialDrift& drift, const SolverOptions& opt,
                                          const std::vector<double>& cmul,
                                          SolverDiagnostics* diag = nullptr,
                                          bool drift_enabled = true) {
    const auto basis = x.basis_ptr();
    const std::size_t nt = static_cast<std::size_t>(std::llround(opt.T / opt.dt));
    if (!phi.times.empty()) {
        if (!(phi.values.front().basis() == *basis))
            throw std::invalid_argument("solve_skeleton: control basis mismatch");
        if (phi.steps() != nt)
            throw std::invalid_argument("solve_skeleton: control grid does not match dt, T");
    }
    if (!x.finite()) throw std::invalid_argument("solve_skeleton: non-finite initial state");

    detail::ExpEulerStepper st(basis, drift, opt, drift_enabled);
    Trajectory out;
    out.times.push_back(0.0);
    out.states.push_back(x);
    SpectralField u = x;
    SolverDiagnostics d;
    d.sup_norm_H = norm_H(u);

    for (std::size_t j = 0; j < nt; ++j) {
        SpectralField rhs(basis);
        if (drift_enabled) rhs = st.op.apply(u);
        if (!phi.times.empty()) {
            const auto& pj = phi.values[j];
            for (std::size_t i = 0; i < rhs.size(); ++i)
                rhs[i] += (cmul.empty() ? 1.0 : cmul[i]) * pj[i];
        }
        for (std::size_t i = 0; i < u.size(); ++i)
            u[i] = st.decay[i] * u[i] + st.psi[i] * rhs[i];
        if (!u.finite()) throw BlowUpError(j + 1);

        d.sup_norm_H = std::max(d.sup_norm_H, norm_H(u));
        if (opt.track_Lpn) {
            GridField g = to_grid(u);
            d.int_Lpn += opt.dt * std::pow(norm_Lp(g, drift.p_n()), drift.p_n());
            if (drift_enabled && std::abs(drift.f_prime(g.max_abs())) * opt.dt > 1.0)
                d.accuracy_warning = true;
        }
        if ((j + 1) % opt.output_stride == 0 || j + 1 == nt) {
            out.times.push_back(static_cast<double>(j + 1) * opt.dt);
            out.states.push_back(u);
        }
    }
    if (diag) *diag = d;
    return out;
}

inline Trajectory solve_skeleton(const SpectralField& x, const Control& phi,
                                 const PolynomialDrift& drift, const SolverOptions& opt,
                                 SolverDiagnostics* diag = nullptr, bool drift_enabled = true) {
    return solve_skeleton_weighted(x, phi, drift, opt, {}, diag, drift_enabled);
}

// du = [Au + F(u)] dt + sqrt(eps) dw^delta; exact OU treatment of the noise.
// eps = 0 reproduces the skeleton path with zero control bit-for-bit.
inline Trajectory solve_stochastic(const SpectralField& x, double eps, const NoiseModel& noise,
                                   const PolynomialDrift& drift, const SolverOptions& opt,
                                   RngStream& rng, SolverDiagnostics* diag = nullptr,
                                   bool drift_enabled = true) {
    if (!(eps >= 0.0)) throw std::invalid_argument("solve_stochastic: eps must be nonnegative");
    if (!(noise.basis() == x.basis())) throw std::invalid_argument("solve_stochastic: basis mismatch");
    Control none;
    return [&] {
        const auto basis = x.basis_ptr();
        const std::size_t nt = static_cast<std::size_t>(std::llround(opt.T / opt.dt));
        detail::ExpEulerStepper st(basis, drift, opt, drift_enabled);
        std::vector<double> nstd(basis->size(), 0.0);
        if (eps > 0.0)
            for (std::size_t i = 0; i < nstd.size(); ++i) {
                const double a = basis->eigenvalue(i);
                nstd[i] = std::sqrt(eps) * noise.amp(i) *
                          std::sqrt((1.0 - st.decay[i] * st.decay[i]) / (2.0 * a));
            }
        Trajectory out;
        out.times.push_back(0.0);
        out.states.push_back(x);
        SpectralField u = x;
        SolverDiagnostics d;
        d.sup_norm_H = norm_H(u);
        for (std::size_t j = 0; j < nt; ++j) {
            SpectralField rhs(basis);
            if (drift_enabled) rhs = st.op.apply(u);
            for (std::size_t i = 0; i < u.size(); ++i) {
                u[i] = st.decay[i] * u[i] + st.psi[i] * rhs[i];
                if (eps > 0.0) u[i] += nstd[i] * rng.normal();
            }
            if (!u.finite()) throw BlowUpError(j + 1);
            d.sup_norm_H = std::max(d.sup_norm_H, norm_H(u));
            if ((j + 1) % opt.output_stride == 0 || j + 1 == nt) {
                out.times.push_back(static_cast<double>(j + 1) * opt.dt);
                out.states.push_back(u);
            }
        }
        if (diag) *diag = d;
        return out;
    }();
}

// du = [Au + F(u) + Q_delta phi] dt + sqrt(eps) dw^delta; the control passes
// through the full covariance, mode-wise multiplication by lambda_k^2.
inline Trajectory solve_controlled(const SpectralField& x, double eps, const Control& phi,
                                   const NoiseModel& noise, const PolynomialDrift& drift,
                                   const SolverOptions& opt, RngStream& rng,
                                   SolverDiagnostics* diag = nullptr, bool drift_enabled = true) {
    if (!(eps >= 0.0)) throw std::invalid_argument("solve_controlled: eps must be nonnegative");
    const auto basis = x.basis_ptr();
    const std::size_t nt = static_cast<std::size_t>(std::llround(opt.T / opt.dt));
    if (!phi.times.empty() && phi.steps() != nt)
        throw std::invalid_argument("solve_controlled: control grid does not match dt, T");
    detail::ExpEulerStepper st(basis, drift, opt, drift_enabled);
    std::vector<double> q(basis->size()), nstd(basis->size(), 0.0);
    for (std::size_t i = 0; i < q.size(); ++i) {
        q[i] = noise.amp(i) * noise.amp(i);
        if (eps > 0.0) {
            const double a = basis->eigenvalue(i);
            nstd[i] = std::sqrt(eps) * noise.amp(i) *
                      std::sqrt((1.0 - st.decay[i] * st.decay[i]) / (2.0 * a));
        }
    }
    Trajectory out;
    out.times.push_back(0.0);
    out.states.push_back(x);
    SpectralField u = x;
    SolverDiagnostics d;
    d.sup_norm_H = norm_H(u);
    for (std::size_t j = 0; j < nt; ++j) {
        SpectralField rhs(basis);
        if (drift_enabled) rhs = st.op.apply(u);
        if (!phi.times.empty()) {
            const auto& pj = phi.values[j];
            for (std::size_t i = 0; i < rhs.size(); ++i) rhs[i] += q[i] * pj[i];
        }
        for (std::size_t i = 0; i < u.size(); ++i) {
            u[i] = st.decay[i] * u[i] + st.psi[i] * rhs[i];
            if (eps > 0.0) u[i] += nstd[i] * rng.normal();
        }
        if (!u.finite()) throw BlowUpError(j + 1);
        d.sup_norm_H = std::max(d.sup_norm_H, norm_H(u));
        if ((j + 1) % opt.output_stride == 0 || j + 1 == nt) {
            out.times.push_back(static_cast<double>(j + 1) * opt.dt);
            out.states.push_back(u);
        }
    }
    if (diag) *diag = d;
    return out;
}

// Phi(phi)(t) = int_0^t e^{(t-s)A} phi(s) ds: the skeleton solver with the
// nonlinearity disabled and zero initial state.
inline Trajectory convolution_map(const Control& phi, const SolverOptions& opt) {
    if (phi.times.empty()) throw std::invalid_argument("convolution_map: empty control");
    SpectralField zero(phi.values.front().basis_ptr());
    return solve_skeleton(zero, phi, PolynomialDrift{}, opt, nullptr, /*drift_enabled=*/false);
}

// sup_t of the chosen norm of the difference of two trajectories on a shared grid
inline double sup_norm_gap(const Trajectory& a, const Trajectory& b, double hneg_s = 0.0) {
    if (a.states.size() != b.states.size())
        throw std::invalid_argument("sup_norm_gap: trajectory grids differ");
    double best = 0.0;
    for (std::size_t j = 0; j < a.states.size(); ++j) {
        SpectralField diff = a.states[j];
        for (std::size_t i = 0; i < diff.size(); ++i) diff[i] -= b.states[j][i];
        best = std::max(best, hneg_s > 0.0 ? norm_Hneg(diff, hneg_s) : norm_H(diff));
    }
    return best;
}

} // namespace phi2

#endif
