#ifndef PHI2_NONLINEARITY_HPP
#define PHI2_NONLINEARITY_HPP

#include <cmath>
#include <optional>
#include <stdexcept>
#include <utility>

#include "phi2/spectral.hpp"

namespace phi2 {

// Polynomial drift f(r) = -r^{2n+1} + lambda1 r + lambda2 and its
// composition operator F(x)(xi) = f(x(xi)).
struct PolynomialDrift {
    int n = 1;
    double lambda1 = 0.0;
    double lambda2 = 0.0;
    std::optional<double> truncation; // clamp level N for f_N

    PolynomialDrift() = default;
    PolynomialDrift(int n_, double l1, double l2,
                    std::optional<double> trunc = std::nullopt)
        : n(n_), lambda1(l1), lambda2(l2), truncation(trunc) {
        if (n < 1) throw std::invalid_argument("PolynomialDrift: n must be >= 1");
        if (truncation && !(*truncation > 0.0))
            throw std::invalid_argument("PolynomialDrift: truncation level must be positive");
    }

    int degree() const { return 2 * n + 1; }
    double p_n() const { return 2.0 * (n + 1); }
    double q_n() const { return 2.0 * (n + 1) / (2.0 * n + 1); }

    double f(double r) const {
        double p = r;
        for (int i = 0; i < 2 * n; ++i) p *= r;
        return -p + lambda1 * r + lambda2;
    }

    double f_prime(double r) const {
        double p = 1.0;
        for (int i = 0; i < 2 * n; ++i) p *= r;
        return -(2.0 * n + 1) * p + lambda1;
    }

    // clamped drift f_N(r) = f(clamp(r, -N, N))
    double f_truncated(double r) const {
        if (!truncation)
            throw std::invalid_argument("PolynomialDrift: truncation level not set");
        const double N = *truncation;
        return f(std::clamp(r, -N, N));
    }

    double f_truncated_prime(double r) const {
        if (!truncation)
            throw std::invalid_argument("PolynomialDrift: truncation level not set");
        return std::abs(r) <= *truncation ? f_prime(r) : (r > 0 ? f_prime(*truncation) : f_prime(-*truncation));
    }

    // sup of |f'| over the clamp interval, a global Lipschitz constant of f_N
    double lipschitz_truncated() const {
        if (!truncation)
            throw std::invalid_argument("PolynomialDrift: truncation level not set");
        const double N = *truncation;
        return std::max(std::abs(f_prime(N)), std::abs(f_prime(0.0)));
    }
};

inline GridField apply_F(const GridField& x, const PolynomialDrift& drift) {
    GridField out = x;
    for (auto& v : out.values()) v = drift.f(v);
    return out;
}

inline GridField apply_F_N(const GridField& x, const PolynomialDrift& drift) {
    GridField out = x;
    for (auto& v : out.values()) v = drift.f_truncated(v);
    return out;
}

// Returns (lhs, rhs) of the dissipativity bound
//   <F(x)-F(y), x-y>  <=  -2^{-2n} |x-y|_{p_n}^{p_n} + lambda1 |x-y|_H^2
// evaluated with grid quadrature; callers assert lhs <= rhs.
inline std::pair<double, double> dissipativity_gap(const GridField& x, const GridField& y,
                                                   const PolynomialDrift& drift) {
    if (!(x.basis() == y.basis()))
        throw std::invalid_argument("dissipativity_gap: grid mismatch");
    const double w = x.basis().quadrature_weight();
    const double pn = drift.p_n();
    double lhs = 0.0, pnorm = 0.0, hnorm2 = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double dv = x[i] - y[i];
        lhs += (drift.f(x[i]) - drift.f(y[i])) * dv;
        pnorm += std::pow(std::abs(dv), pn);
        hnorm2 += dv * dv;
    }
    lhs *= w;
    const double c = std::pow(2.0, -2.0 * drift.n);
    const double rhs = -c * w * pnorm + drift.lambda1 * w * hnorm2;
    return {lhs, rhs};
}

// Composition operator in mode space.  With dealiasing on, coefficients are
// zero-padded by factor (n+1) before the pointwise power: a degree-p product
// of sines with index <= M stays below the reflection frequency of the padded
// transform when Mp >= (p+1)M/2, so no aliased image lands on a retained mode.
class NonlinearSpectralOp {
public:
    NonlinearSpectralOp(std::shared_ptr<const SpectralBasis> basis, PolynomialDrift drift,
                        bool dealias = true, bool truncated = false)
        : basis_(std::move(basis)), drift_(drift), dealias_(dealias), truncated_(truncated) {
        if (truncated_ && !drift_.truncation)
            throw std::invalid_argument("NonlinearSpectralOp: truncation level not set");
        if (dealias_) {
            fine_ = std::make_shared<SpectralBasis>(
                basis_->dim(), basis_->length(), basis_->modes_per_dim() * (drift_.n + 1));
            embed_.resize(basis_->size());
            for (std::size_t i = 0; i < basis_->size(); ++i) {
                const auto idx = fine_->find_mode(basis_->mode(i));
                embed_[i] = static_cast<std::size_t>(idx);
            }
        }
    }

    const PolynomialDrift& drift() const { return drift_; }
    bool dealias() const { return dealias_; }

    // F in mode coefficients; stores the evaluation grid for jacobian_apply
    SpectralField apply(const SpectralField& u) {
        if (dealias_) {
            SpectralField fine(fine_);
            for (std::size_t i = 0; i < embed_.size(); ++i) fine[embed_[i]] = u[i];
            GridField g = to_grid(fine);
            last_grid_ = g.values();
            for (auto& v : g.values()) v = truncated_ ? drift_.f_truncated(v) : drift_.f(v);
            SpectralField fm = to_modes(g);
            SpectralField out(u.basis_ptr());
            for (std::size_t i = 0; i < embed_.size(); ++i) out[i] = fm[embed_[i]];
            return out;
        }
        GridField g = to_grid(u);
        last_grid_ = g.values();
        for (auto& v : g.values()) v = truncated_ ? drift_.f_truncated(v) : drift_.f(v);
        return to_modes(g);
    }

    // Jacobian-vector product of apply at the stored evaluation point.
    // The transform pair is symmetric up to the quadrature weight, so the
    // same routine serves as the adjoint product.
    SpectralField jacobian_apply(const std::vector<double>& point_grid,
                                 const SpectralField& v) const {
        if (dealias_) {
            SpectralField fine(fine_);
            for (std::size_t i = 0; i < embed_.size(); ++i) fine[embed_[i]] = v[i];
            GridField g = to_grid(fine);
            for (std::size_t i = 0; i < g.size(); ++i) {
                const double r = point_grid[i];
                g[i] *= truncated_ ? drift_.f_truncated_prime(r) : drift_.f_prime(r);
            }
            SpectralField fm = to_modes(g);
            SpectralField out(v.basis_ptr());
            for (std::size_t i = 0; i < embed_.size(); ++i) out[i] = fm[embed_[i]];
            return out;
        }
        GridField g = to_grid(v);
        for (std::size_t i = 0; i < g.size(); ++i) {
            const double r = point_grid[i];
            g[i] *= truncated_ ? drift_.f_truncated_prime(r) : drift_.f_prime(r);
        }
        return to_modes(g);
    }

    // grid values of the latest apply() argument, for jacobian_apply
    const std::vector<double>& last_grid() const { return last_grid_; }

private:
    std::shared_ptr<const SpectralBasis> basis_;
    PolynomialDrift drift_;
    bool dealias_;
    bool truncated_;
    std::shared_ptr<const SpectralBasis> fine_;
    std::vector<std::size_t> embed_;
    std::vector<double> last_grid_;
};

} // namespace phi2

#endif
