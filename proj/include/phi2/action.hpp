#ifndef PHI2_ACTION_HPP
#define PHI2_ACTION_HPP

#include <cmath>
#include <deque>
#include <functional>
#include <memory>
#include <optional>
#include <stdexcept>
#include <vector>

#include "phi2/dynamics.hpp"

namespace phi2 {

enum class TargetNorm { H, Hneg };

// Terminal-constrained minimization of the Freidlin-Wentzell action.
// The control is optimized with cost 1/2 |phi|^2_{L^2(0,T;H)}; when a noise
// model is attached, the control enters the state equation through
// Q_delta^{1/2} (mode-wise lambda_k), so the optimal value predicts
// -eps log P for forcing with covariance Q_delta.
struct ActionProblem {
    SpectralField x;
    double T = 1.0;
    PolynomialDrift drift;
    SpectralField y_target;
    double radius = 0.0;      // admissible terminal miss
    TargetNorm norm = TargetNorm::H;
    double hneg_s = 1.0;      // exponent when norm == Hneg
    double mu0 = 1.0;         // initial penalty weight
    bool drift_enabled = true; // false: linear benchmark, F dropped
    std::optional<NoiseModel> noise; // control multiplier lambda_k if present
    SolverOptions solver;

    ActionProblem(SpectralField x_, double T_, PolynomialDrift drift_, SpectralField y_)
        : x(std::move(x_)), T(T_), drift(drift_), y_target(std::move(y_)) {
        if (!(T > 0.0)) throw std::invalid_argument("ActionProblem: T must be positive");
        solver.T = T;
    }

    std::vector<double> control_multiplier() const {
        if (!noise) return {};
        return noise->mode_amps();
    }

    double terminal_weight(std::size_t mode) const {
        return norm == TargetNorm::H ? 1.0 : std::pow(x.basis().eigenvalue(mode), -hneg_s);
    }
};

struct InstantonResult {
    Control control;       // phi*
    Trajectory path;       // u*
    double action_value;   // 1/2 |phi*|^2_{L^2(0,T;H)}
    double gradient_norm;  // L^2 norm of the gradient at exit
    double terminal_miss;  // distance of u*(T) from the target in the chosen norm
    std::size_t iterations;
    double mu_final;
    bool converged;
};

// 1/2 sum_j dt |phi_j|_H^2
inline double control_cost(const Control& phi) {
    return 0.5 * phi.squared_l2();
}

// Midpoint discretization of 1/2 int |u' - Au - F(u)|_H^2 dt.
inline double evaluate_action(const Trajectory& u, const PolynomialDrift& drift,
                              bool dealias = true) {
    if (u.times.size() < 3) throw std::invalid_argument("evaluate_action: need at least two steps");
    const double dt = u.dt();
    for (std::size_t j = 1; j < u.times.size(); ++j)
        if (std::abs(u.times[j] - u.times[j - 1] - dt) > 1e-10 * (1.0 + dt))
            throw std::invalid_argument("evaluate_action: non-uniform time grid");
    const auto basis = u.front().basis_ptr();
    NonlinearSpectralOp op(basis, drift, dealias);
    double acc = 0.0;
    for (std::size_t j = 0; j + 1 < u.states.size(); ++j) {
        SpectralField mid(basis);
        for (std::size_t i = 0; i < mid.size(); ++i)
            mid[i] = 0.5 * (u.states[j][i] + u.states[j + 1][i]);
        const SpectralField fm = op.apply(mid);
        double r2 = 0.0;
        for (std::size_t i = 0; i < mid.size(); ++i) {
            const double w = (u.states[j + 1][i] - u.states[j][i]) / dt +
                             basis->eigenvalue(i) * mid[i] - fm[i];
            r2 += w * w;
        }
        acc += r2;
    }
    return 0.5 * dt * acc;
}

namespace detail {

// Forward sweep storing every state and the nonlinearity evaluation grids.
struct ForwardRecord {
    std::vector<SpectralField> states;     // u^0 .. u^Nt
    std::vector<std::vector<double>> grids; // evaluation grid per step
};

inline ForwardRecord forward_sweep(const ActionProblem& prob, const Control& phi,
                                   NonlinearSpectralOp& op, const std::vector<double>& decay,
                                   const std::vector<double>& psi,
                                   const std::vector<double>& cmul) {
    const std::size_t nt = phi.steps();
    ForwardRecord rec;
    rec.states.reserve(nt + 1);
    rec.grids.reserve(nt);
    SpectralField u = prob.x;
    rec.states.push_back(u);
    for (std::size_t j = 0; j < nt; ++j) {
        SpectralField rhs(prob.x.basis_ptr());
        if (prob.drift_enabled) {
            rhs = op.apply(u);
            rec.grids.push_back(op.last_grid());
        }
        const auto& pj = phi.values[j];
        for (std::size_t i = 0; i < u.size(); ++i) {
            rhs[i] += (cmul.empty() ? 1.0 : cmul[i]) * pj[i];
            u[i] = decay[i] * u[i] + psi[i] * rhs[i];
        }
        if (!u.finite()) throw BlowUpError(j + 1);
        rec.states.push_back(u);
    }
    return rec;
}

} // namespace detail

// Gradient of J(phi) = control_cost(phi) + mu/2 |u(T) - y|^2 by the discrete
// adjoint of the exponential-Euler scheme; returned as the L^2(0,T;H)
// representer on the control grid.
inline Control adjoint_gradient(const ActionProblem& prob, const Control& phi, double mu,
                                double* objective = nullptr, Trajectory* path_out = nullptr) {
    const auto basis = prob.x.basis_ptr();
    const double dt = phi.dt();
    const std::size_t nt = phi.steps();
    const auto cmul = prob.control_multiplier();

    std::vector<double> decay(basis->size()), psi(basis->size());
    for (std::size_t i = 0; i < basis->size(); ++i) {
        const double a = basis->eigenvalue(i);
        decay[i] = std::exp(-a * dt);
        psi[i] = (1.0 - decay[i]) / a;
    }
    NonlinearSpectralOp op(basis, prob.drift, prob.solver.dealias, prob.solver.use_truncation);
    const auto rec = detail::forward_sweep(prob, phi, op, decay, psi, cmul);

    // terminal condition p^Nt = mu W (u^Nt - y)
    SpectralField p(basis);
    double miss2 = 0.0;
    for (std::size_t i = 0; i < p.size(); ++i) {
        const double w = prob.terminal_weight(i);
        const double diff = rec.states[nt][i] - prob.y_target[i];
        miss2 += w * diff * diff;
        p[i] = mu * w * diff;
    }
    if (objective) *objective = control_cost(phi) + 0.5 * mu * miss2;
    if (path_out) {
        path_out->times = phi.times;
        path_out->states = rec.states;
    }

    Control grad = phi;
    for (std::size_t jj = nt; jj-- > 0;) {
        // gradient slot j: phi_j + C Psi p^{j+1} / dt
        for (std::size_t i = 0; i < p.size(); ++i)
            grad.values[jj][i] = phi.values[jj][i] +
                                 (cmul.empty() ? 1.0 : cmul[i]) * psi[i] * p[i] / dt;
        // p^j = D p^{j+1} + J_F(u^j)^T (Psi p^{j+1})
        if (prob.drift_enabled) {
            SpectralField psip(basis);
            for (std::size_t i = 0; i < p.size(); ++i) psip[i] = psi[i] * p[i];
            SpectralField jt = op.jacobian_apply(rec.grids[jj], psip);
            for (std::size_t i = 0; i < p.size(); ++i) p[i] = decay[i] * p[i] + jt[i];
        } else {
            for (std::size_t i = 0; i < p.size(); ++i) p[i] = decay[i] * p[i];
        }
    }
    // unused trailing slot
    for (auto& v : grad.values[nt].coeffs()) v = 0.0;
    return grad;
}

namespace detail {

// L-BFGS with the L^2(0,T;H) inner product and Armijo backtracking.
struct LbfgsOptions {
    std::size_t memory = 10;
    std::size_t max_iter = 500;
    double grad_tol = 1e-6;   // relative to max(1, initial gradient norm)
    double armijo_c1 = 1e-4;
};

struct LbfgsOutcome {
    double objective;
    double gradient_norm;
    std::size_t iterations;
    bool converged;
};

inline LbfgsOutcome lbfgs_minimize(
    std::vector<double>& xvec, double dot_weight,
    const std::function<double(const std::vector<double>&, std::vector<double>&)>& fg,
    const LbfgsOptions& opt) {
    const std::size_t n = xvec.size();
    auto dot = [&](const std::vector<double>& a, const std::vector<double>& b) {
        double s = 0.0;
        for (std::size_t i = 0; i < n; ++i) s += a[i] * b[i];
        return s * dot_weight;
    };
    std::vector<double> g(n), gnew(n), dir(n), xnew(n);
    double fx = fg(xvec, g);
    double g0 = std::sqrt(dot(g, g));
    const double tol = opt.grad_tol * std::max(1.0, g0);
    std::deque<std::vector<double>> s_hist, y_hist;
    std::deque<double> rho_hist;
    std::size_t it = 0;
    double gnorm = g0;
    for (; it < opt.max_iter && gnorm > tol; ++it) {
        // two-loop recursion
        dir = g;
        std::vector<double> alpha(s_hist.size());
        for (std::size_t i = s_hist.size(); i-- > 0;) {
            alpha[i] = rho_hist[i] * dot(s_hist[i], dir);
            for (std::size_t k = 0; k < n; ++k) dir[k] -= alpha[i] * y_hist[i][k];
        }
        if (!s_hist.empty()) {
            const double gamma = dot(s_hist.back(), y_hist.back()) /
                                 dot(y_hist.back(), y_hist.back());
            for (auto& v : dir) v *= gamma;
        }
        for (std::size_t i = 0; i < s_hist.size(); ++i) {
            const double beta = rho_hist[i] * dot(y_hist[i], dir);
            for (std::size_t k = 0; k < n; ++k) dir[k] += (alpha[i] - beta) * s_hist[i][k];
        }
        for (auto& v : dir) v = -v;

        double slope = dot(g, dir);
        if (slope >= 0.0) { // fall back to steepest descent
            for (std::size_t k = 0; k < n; ++k) dir[k] = -g[k];
            slope = -dot(g, g);
        }
        double step = 1.0;
        double fnew = fx;
        bool accepted = false;
        for (int ls = 0; ls < 50; ++ls) {
            for (std::size_t k = 0; k < n; ++k) xnew[k] = xvec[k] + step * dir[k];
            fnew = fg(xnew, gnew);
            if (std::isfinite(fnew) && fnew <= fx + opt.armijo_c1 * step * slope) {
                accepted = true;
                break;
            }
            step *= 0.5;
        }
        if (!accepted) break;

        std::vector<double> sv(n), yv(n);
        for (std::size_t k = 0; k < n; ++k) {
            sv[k] = xnew[k] - xvec[k];
            yv[k] = gnew[k] - g[k];
        }
        const double sy = dot(sv, yv);
        if (sy > 1e-14 * dot(yv, yv)) {
            s_hist.push_back(std::move(sv));
            y_hist.push_back(std::move(yv));
            rho_hist.push_back(1.0 / sy);
            if (s_hist.size() > opt.memory) {
                s_hist.pop_front();
                y_hist.pop_front();
                rho_hist.pop_front();
            }
        }
        xvec.swap(xnew);
        g.swap(gnew);
        fx = fnew;
        gnorm = std::sqrt(dot(g, g));
    }
    return {fx, gnorm, it, gnorm <= tol};
}

} // namespace detail

// Quasi-Newton descent on the control with geometric penalty continuation
// until the terminal miss is within the requested radius.
inline InstantonResult minimize_action(const ActionProblem& prob, const Control& phi0,
                                       double grad_tol = 1e-6, std::size_t max_iter = 500) {
    const auto basis = prob.x.basis_ptr();
    const double dt = phi0.dt();
    const std::size_t nt = phi0.steps();
    const std::size_t m = basis->size();
    if (nt == 0) throw std::invalid_argument("minimize_action: empty control grid");

    std::vector<double> xvec(nt * m);
    for (std::size_t j = 0; j < nt; ++j)
        for (std::size_t i = 0; i < m; ++i) xvec[j * m + i] = phi0.values[j][i];

    auto unpack = [&](const std::vector<double>& v) {
        Control c = Control::zero(basis, prob.T, dt);
        for (std::size_t j = 0; j < nt; ++j)
            for (std::size_t i = 0; i < m; ++i) c.values[j][i] = v[j * m + i];
        return c;
    };

    double mu = prob.mu0;
    detail::LbfgsOutcome out{0.0, 0.0, 0, false};
    std::size_t total_iter = 0;
    double miss = 0.0;
    Trajectory path;
    Control phi = unpack(xvec);
    const int max_continuation = 12;
    for (int round = 0; round < max_continuation; ++round) {
        auto fg = [&](const std::vector<double>& v, std::vector<double>& gout) {
            const Control c = unpack(v);
            double obj = 0.0;
            const Control grad = adjoint_gradient(prob, c, mu, &obj);
            gout.resize(v.size());
            for (std::size_t j = 0; j < nt; ++j)
                for (std::size_t i = 0; i < m; ++i) gout[j * m + i] = grad.values[j][i];
            return obj;
        };
        detail::LbfgsOptions lopt;
        lopt.grad_tol = grad_tol;
        lopt.max_iter = max_iter;
        out = detail::lbfgs_minimize(xvec, dt, fg, lopt);
        total_iter += out.iterations;

        phi = unpack(xvec);
        double obj;
        adjoint_gradient(prob, phi, mu, &obj, &path);
        SpectralField diff = path.back();
        double m2 = 0.0;
        for (std::size_t i = 0; i < m; ++i) {
            const double d = diff[i] - prob.y_target[i];
            m2 += prob.terminal_weight(i) * d * d;
        }
        miss = std::sqrt(m2);
        if (miss <= prob.radius || prob.radius <= 0.0) break;
        mu *= 10.0;
    }
    return {phi, path, control_cost(phi), out.gradient_norm, miss, total_iter, mu,
            out.converged && (prob.radius <= 0.0 || miss <= prob.radius)};
}

} // namespace phi2

#endif
