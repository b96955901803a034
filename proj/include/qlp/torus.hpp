#pragma once

// Flat n-torus (n <= 3) with an exact Fourier calculus. Nodes are stored
// row-major, last axis fastest.

#include <array>
#include <complex>
#include <cstddef>
#include <span>
#include <vector>

namespace qlp {

using Complex = std::complex<double>;
using MultiIndex = std::vector<int>;  // 0-based axis per derivative

class TorusGrid {
public:
    TorusGrid() = default;
    TorusGrid(std::vector<int> modes, std::vector<double> period);

    int dims() const { return static_cast<int>(modes_.size()); }
    int modes(int axis) const { return modes_[static_cast<std::size_t>(axis)]; }
    double period(int axis) const { return period_[static_cast<std::size_t>(axis)]; }
    const std::vector<int>& modes() const { return modes_; }
    const std::vector<double>& periods() const { return period_; }

    std::size_t size() const { return size_; }
    double spacing(int axis) const { return period(axis) / modes(axis); }
    /// Uniform quadrature weight, the product of spacings.
    double weight() const { return weight_; }
    double volume() const;

    /// Coordinate of node `node` along `axis`.
    double coordinate(std::size_t node, int axis) const;
    std::array<int, 3> unravel(std::size_t node) const;

    /// Signed integer wavenumber of FFT slot `slot` on `axis` (range -N/2..N/2-1).
    int wavenumber(int slot, int axis) const;
    double angular_wavenumber(int slot, int axis) const;

    /// Grid with every bandwidth enlarged by 3/2 (rounded up to even).
    TorusGrid padded() const;

    bool operator==(const TorusGrid&) const = default;

private:
    std::vector<int> modes_;
    std::vector<double> period_;
    std::size_t size_ = 0;
    double weight_ = 0.0;
};

/// Validated constructor. Rejects odd bandwidths and dimensions outside 1..3.
TorusGrid make_grid(int n_dims, std::vector<int> modes_per_dim, std::vector<double> period);
TorusGrid make_grid(int n_dims, std::vector<int> modes_per_dim);

class ScalarField {
public:
    ScalarField() = default;
    explicit ScalarField(TorusGrid grid);
    ScalarField(TorusGrid grid, std::vector<double> values);

    const TorusGrid& grid() const { return grid_; }
    std::span<const double> values() const { return values_; }
    std::span<double> values() { return values_; }
    double operator[](std::size_t i) const { return values_[i]; }
    double& operator[](std::size_t i) { return values_[i]; }
    std::size_t size() const { return values_.size(); }

    double max_abs() const;
    bool all_finite() const;

    ScalarField& operator+=(const ScalarField& other);
    ScalarField& operator-=(const ScalarField& other);
    ScalarField& operator*=(double a);
    /// this += a * other
    ScalarField& add_scaled(double a, const ScalarField& other);

    template <class F>
    static ScalarField sample(const TorusGrid& grid, F&& fn) {
        ScalarField out(grid);
        std::array<double, 3> x{};
        for (std::size_t i = 0; i < grid.size(); ++i) {
            for (int d = 0; d < grid.dims(); ++d) x[static_cast<std::size_t>(d)] = grid.coordinate(i, d);
            out.values_[i] = fn(x);
        }
        return out;
    }

private:
    TorusGrid grid_;
    std::vector<double> values_;
};

ScalarField operator+(ScalarField a, const ScalarField& b);
ScalarField operator-(ScalarField a, const ScalarField& b);
ScalarField operator*(double a, ScalarField f);

/// Rank-k tensor field with n^k components stored component-major; component
/// (i1,...,ik) sits at flat index sum_j i_j n^(k-1-j).
class TensorField {
public:
    TensorField() = default;
    TensorField(TorusGrid grid, int rank);
    explicit TensorField(const ScalarField& scalar);

    const TorusGrid& grid() const { return grid_; }
    int rank() const { return rank_; }
    std::size_t component_count() const { return components_.size(); }
    std::span<const double> component(std::size_t flat) const { return components_[flat]; }
    std::span<double> component(std::size_t flat) { return components_[flat]; }
    std::size_t flat_index(std::span<const int> index) const;
    MultiIndex unflatten(std::size_t flat) const;

    ScalarField as_scalar() const;

private:
    TorusGrid grid_;
    int rank_ = 0;
    std::vector<std::vector<double>> components_;
};

namespace spectral {

/// Normalized forward transform: f_j = sum_k c_k exp(i k.x_j).
std::vector<Complex> forward(const TorusGrid& grid, std::span<const double> values);
/// Inverse transform; the imaginary part is discarded (Hermitian projection).
std::vector<double> inverse(const TorusGrid& grid, std::span<const Complex> coeffs);

/// Fourier symbol of d^|idx| / dx_idx. Odd orders on a Nyquist slot give 0.
std::vector<Complex> derivative_symbol(const TorusGrid& grid, std::span<const int> multi_index);

/// Zero-pad coefficients from `coarse` onto `fine` (fine bandwidths >= coarse).
/// Nyquist content is split evenly across +-N/2.
std::vector<Complex> pad(const TorusGrid& coarse, const TorusGrid& fine, std::span<const Complex> c);
/// Inverse of `pad` on band-limited input; modes above the coarse band are dropped.
std::vector<Complex> truncate(const TorusGrid& fine, const TorusGrid& coarse, std::span<const Complex> c);

/// Fraction of spectral energy in the top third of the band on any axis.
double top_band_energy_fraction(const ScalarField& f);

}  // namespace spectral

/// Exact Fourier derivative d/dx_{i1}...d/dx_{ik} f (0-based axes).
ScalarField spectral_derivative(const ScalarField& f, std::span<const int> multi_index);
ScalarField spectral_derivative(const ScalarField& f, std::initializer_list<int> multi_index);
/// Full tensor of k-th derivatives (all ordered index tuples).
TensorField gradient_tensor(const ScalarField& f, int k);
/// Divergence on the first index of a rank >= 1 tensor.
TensorField divergence(const TensorField& h);

/// Spectral interpolation onto a finer grid and its exact left inverse.
ScalarField interpolate(const ScalarField& f, const TorusGrid& fine);
ScalarField restrict_to(const ScalarField& f, const TorusGrid& coarse);

double l2_inner(const TensorField& f, const TensorField& h);
double l2_inner(const ScalarField& f, const ScalarField& h);
double l2_norm(const ScalarField& f);
/// (sum_{j<=k} ||grad^j f||^2)^(1/2) with full tensor contractions.
double sobolev_norm(const ScalarField& f, int k);

}  // namespace qlp
