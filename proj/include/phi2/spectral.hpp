#ifndef PHI2_SPECTRAL_HPP
#define PHI2_SPECTRAL_HPP

#include <algorithm>
#include <array>
#include <cmath>
#include <memory>
#include <numeric>
#include <stdexcept>
#include <vector>

namespace phi2 {

// Dirichlet sine eigenbasis of the box [0,L]^d.
//
// Eigenfunctions e_k(xi) = prod_i sqrt(2/L) sin(k_i pi xi_i / L) with
// multi-index k in {1..M}^d, eigenvalues alpha_k = sum_i (k_i pi / L)^2.
// Collocation grid: the M interior points xi_j = j L/(M+1) per dimension,
// under which the eigenfunctions are exactly orthonormal with quadrature
// weight (L/(M+1))^d.
//
// Linearized mode order: sorted by eigenvalue, ties broken lexicographically
// on the multi-index.
class SpectralBasis {
public:
    SpectralBasis(int d, double L, int M) : d_(d), L_(L), M_(M) {
        if (d < 1 || d > 3) throw std::invalid_argument("SpectralBasis: d must be 1, 2 or 3");
        if (!(L > 0.0)) throw std::invalid_argument("SpectralBasis: L must be positive");
        if (M < 2) throw std::invalid_argument("SpectralBasis: M must be at least 2");

        size_ = 1;
        for (int i = 0; i < d; ++i) size_ *= static_cast<std::size_t>(M);

        const double base = M_PI / L;
        modes_.resize(size_);
        eigenvalues_.resize(size_);
        std::vector<std::size_t> order(size_);
        std::vector<std::array<int, 3>> raw(size_);
        std::vector<double> raw_alpha(size_);
        for (std::size_t lin = 0; lin < size_; ++lin) {
            std::array<int, 3> k{1, 1, 1};
            std::size_t r = lin;
            // k_d fastest
            for (int i = d - 1; i >= 0; --i) {
                k[static_cast<std::size_t>(i)] = static_cast<int>(r % M) + 1;
                r /= static_cast<std::size_t>(M);
            }
            double a = 0.0;
            for (int i = 0; i < d; ++i) {
                const double ki = k[static_cast<std::size_t>(i)] * base;
                a += ki * ki;
            }
            raw[lin] = k;
            raw_alpha[lin] = a;
        }
        std::iota(order.begin(), order.end(), std::size_t{0});
        std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
            if (raw_alpha[a] != raw_alpha[b]) return raw_alpha[a] < raw_alpha[b];
            return raw[a] < raw[b];
        });
        tensor_index_.resize(size_);
        for (std::size_t i = 0; i < size_; ++i) {
            modes_[i] = raw[order[i]];
            eigenvalues_[i] = raw_alpha[order[i]];
            tensor_index_[i] = order[i];
        }

        // per-dimension synthesis matrix S[j][k] = sqrt(2/L) sin((j+1)(k+1) pi/(M+1))
        sine_.resize(static_cast<std::size_t>(M) * static_cast<std::size_t>(M));
        const double norm = std::sqrt(2.0 / L);
        for (int j = 0; j < M; ++j)
            for (int k = 0; k < M; ++k)
                sine_[static_cast<std::size_t>(j) * M + k] =
                    norm * std::sin(M_PI * (j + 1.0) * (k + 1.0) / (M + 1.0));
    }

    int dim() const { return d_; }
    double length() const { return L_; }
    int modes_per_dim() const { return M_; }
    std::size_t size() const { return size_; }
    double quadrature_weight() const { return std::pow(L_ / (M_ + 1), d_); }

    const std::vector<double>& eigenvalues() const { return eigenvalues_; }
    double eigenvalue(std::size_t i) const { return eigenvalues_[i]; }
    const std::array<int, 3>& mode(std::size_t i) const { return modes_[i]; }

    // linearized (sorted) index -> lexicographic tensor index, k_d fastest
    std::size_t tensor_index(std::size_t i) const { return tensor_index_[i]; }

    // find sorted index of a multi-index, -1 if absent
    std::ptrdiff_t find_mode(const std::array<int, 3>& k) const {
        for (std::size_t i = 0; i < size_; ++i)
            if (modes_[i] == k) return static_cast<std::ptrdiff_t>(i);
        return -1;
    }

    double sine(int grid_j, int mode_k) const {
        return sine_[static_cast<std::size_t>(grid_j) * M_ + mode_k];
    }

    bool operator==(const SpectralBasis& o) const {
        return d_ == o.d_ && L_ == o.L_ && M_ == o.M_;
    }

private:
    int d_;
    double L_;
    int M_;
    std::size_t size_;
    std::vector<std::array<int, 3>> modes_;
    std::vector<double> eigenvalues_;
    std::vector<std::size_t> tensor_index_;
    std::vector<double> sine_;
};

class GridField;

// One spatial state in mode coefficients, linearized in sorted-eigenvalue order.
class SpectralField {
public:
    explicit SpectralField(std::shared_ptr<const SpectralBasis> basis)
        : basis_(std::move(basis)), coeffs_(basis_->size(), 0.0) {}
    SpectralField(std::shared_ptr<const SpectralBasis> basis, std::vector<double> coeffs)
        : basis_(std::move(basis)), coeffs_(std::move(coeffs)) {
        if (coeffs_.size() != basis_->size())
            throw std::invalid_argument("SpectralField: coefficient count does not match basis");
    }

    const SpectralBasis& basis() const { return *basis_; }
    std::shared_ptr<const SpectralBasis> basis_ptr() const { return basis_; }
    std::vector<double>& coeffs() { return coeffs_; }
    const std::vector<double>& coeffs() const { return coeffs_; }
    double& operator[](std::size_t i) { return coeffs_[i]; }
    double operator[](std::size_t i) const { return coeffs_[i]; }
    std::size_t size() const { return coeffs_.size(); }

    bool finite() const {
        for (double c : coeffs_)
            if (!std::isfinite(c)) return false;
        return true;
    }

private:
    std::shared_ptr<const SpectralBasis> basis_;
    std::vector<double> coeffs_;
};

// One spatial state as collocation values over the interior grid,
// lexicographic order with the last dimension fastest.
class GridField {
public:
    explicit GridField(std::shared_ptr<const SpectralBasis> basis)
        : basis_(std::move(basis)), values_(basis_->size(), 0.0) {}
    GridField(std::shared_ptr<const SpectralBasis> basis, std::vector<double> values)
        : basis_(std::move(basis)), values_(std::move(values)) {
        if (values_.size() != basis_->size())
            throw std::invalid_argument("GridField: value count does not match basis");
    }

    const SpectralBasis& basis() const { return *basis_; }
    std::shared_ptr<const SpectralBasis> basis_ptr() const { return basis_; }
    std::vector<double>& values() { return values_; }
    const std::vector<double>& values() const { return values_; }
    double& operator[](std::size_t i) { return values_[i]; }
    double operator[](std::size_t i) const { return values_[i]; }
    std::size_t size() const { return values_.size(); }

    double max_abs() const {
        double m = 0.0;
        for (double v : values_) m = std::max(m, std::abs(v));
        return m;
    }

private:
    std::shared_ptr<const SpectralBasis> basis_;
    std::vector<double> values_;
};

namespace detail {

// Apply the per-dimension sine matrix (or its transpose) along every axis of
// a d-dimensional tensor of edge M stored with the last axis fastest.
inline void apply_separable(const SpectralBasis& b, std::vector<double>& data, bool transpose) {
    const int d = b.dim();
    const std::size_t M = static_cast<std::size_t>(b.modes_per_dim());
    const std::size_t n = data.size();
    std::vector<double> tmp(M);
    for (int axis = 0; axis < d; ++axis) {
        std::size_t stride = 1;
        for (int i = axis + 1; i < d; ++i) stride *= M;
        const std::size_t block = stride * M;
        for (std::size_t start = 0; start < n; start += block) {
            for (std::size_t off = 0; off < stride; ++off) {
                double* line = data.data() + start + off;
                for (std::size_t j = 0; j < M; ++j) {
                    double s = 0.0;
                    if (!transpose) {
                        for (std::size_t k = 0; k < M; ++k)
                            s += b.sine(static_cast<int>(j), static_cast<int>(k)) * line[k * stride];
                    } else {
                        for (std::size_t k = 0; k < M; ++k)
                            s += b.sine(static_cast<int>(k), static_cast<int>(j)) * line[k * stride];
                    }
                    tmp[j] = s;
                }
                for (std::size_t j = 0; j < M; ++j) line[j * stride] = tmp[j];
            }
        }
    }
}

} // namespace detail

inline GridField to_grid(const SpectralField& x) {
    const SpectralBasis& b = x.basis();
    std::vector<double> data(b.size(), 0.0);
    for (std::size_t i = 0; i < b.size(); ++i) data[b.tensor_index(i)] = x[i];
    detail::apply_separable(b, data, /*transpose=*/false);
    return GridField(x.basis_ptr(), std::move(data));
}

inline SpectralField to_modes(const GridField& v) {
    const SpectralBasis& b = v.basis();
    std::vector<double> data = v.values();
    detail::apply_separable(b, data, /*transpose=*/true);
    const double w = b.quadrature_weight();
    std::vector<double> coeffs(b.size());
    for (std::size_t i = 0; i < b.size(); ++i) coeffs[i] = w * data[b.tensor_index(i)];
    return SpectralField(v.basis_ptr(), std::move(coeffs));
}

inline double norm_H(const SpectralField& x) {
    double s = 0.0;
    for (double c : x.coeffs()) s += c * c;
    return std::sqrt(s);
}

inline double inner_H(const SpectralField& x, const SpectralField& y) {
    if (!(x.basis() == y.basis())) throw std::invalid_argument("inner_H: basis mismatch");
    double s = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) s += x[i] * y[i];
    return s;
}

// |x|_{H^{-s}}^2 = sum_k x_k^2 alpha_k^{-s}
inline double norm_Hneg(const SpectralField& x, double s) {
    if (!(s > 0.0)) throw std::invalid_argument("norm_Hneg: s must be positive");
    double acc = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i)
        acc += x[i] * x[i] * std::pow(x.basis().eigenvalue(i), -s);
    return std::sqrt(acc);
}

// rectangle rule over the interior collocation grid
inline double norm_Lp(const GridField& v, double p) {
    if (!(p >= 1.0)) throw std::invalid_argument("norm_Lp: p must be >= 1");
    const double w = v.basis().quadrature_weight();
    double acc = 0.0;
    for (double val : v.values()) acc += std::pow(std::abs(val), p);
    return std::pow(w * acc, 1.0 / p);
}

inline double inner_L2_grid(const GridField& a, const GridField& b) {
    if (!(a.basis() == b.basis())) throw std::invalid_argument("inner_L2_grid: basis mismatch");
    const double w = a.basis().quadrature_weight();
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
    return w * s;
}

// coefficient-wise multiplication by e^{-alpha_k t}
inline SpectralField heat_propagate(const SpectralField& x, double t) {
    if (!(t >= 0.0)) throw std::invalid_argument("heat_propagate: t must be nonnegative");
    SpectralField out = x;
    for (std::size_t i = 0; i < out.size(); ++i)
        out[i] *= std::exp(-x.basis().eigenvalue(i) * t);
    return out;
}

} // namespace phi2

#endif
