#include "qlp/torus.hpp"

#include <fftw3.h>

#include <algorithm>
#include <cmath>
#include <map>
#include <mutex>
#include <numbers>
#include <string>

#include "qlp/error.hpp"
#include "qlp/kernels.hpp"

namespace qlp {

TorusGrid::TorusGrid(std::vector<int> modes, std::vector<double> period)
    : modes_(std::move(modes)), period_(std::move(period)) {
    size_ = 1;
    weight_ = 1.0;
    for (int d = 0; d < dims(); ++d) {
        size_ *= static_cast<std::size_t>(modes_[static_cast<std::size_t>(d)]);
        weight_ *= spacing(d);
    }
}

double TorusGrid::volume() const {
    double v = 1.0;
    for (double p : period_) v *= p;
    return v;
}

std::array<int, 3> TorusGrid::unravel(std::size_t node) const {
    std::array<int, 3> idx{};
    for (int d = dims() - 1; d >= 0; --d) {
        const auto n = static_cast<std::size_t>(modes(d));
        idx[static_cast<std::size_t>(d)] = static_cast<int>(node % n);
        node /= n;
    }
    return idx;
}

double TorusGrid::coordinate(std::size_t node, int axis) const {
    return unravel(node)[static_cast<std::size_t>(axis)] * spacing(axis);
}

int TorusGrid::wavenumber(int slot, int axis) const {
    const int n = modes(axis);
    return slot < n / 2 ? slot : slot - n;
}

double TorusGrid::angular_wavenumber(int slot, int axis) const {
    return 2.0 * std::numbers::pi * wavenumber(slot, axis) / period(axis);
}

TorusGrid TorusGrid::padded() const {
    std::vector<int> m(modes_);
    for (int& v : m) {
        v = (3 * v + 1) / 2;
        if (v % 2 != 0) ++v;
    }
    return TorusGrid(std::move(m), period_);
}

TorusGrid make_grid(int n_dims, std::vector<int> modes_per_dim, std::vector<double> period) {
    if (n_dims < 1 || n_dims > 3)
        throw InvalidArgument("make_grid: n_dims must be in 1..3, got " + std::to_string(n_dims));
    if (static_cast<int>(modes_per_dim.size()) != n_dims || static_cast<int>(period.size()) != n_dims)
        throw InvalidArgument("make_grid: modes and period lists must have length n_dims");
    for (int m : modes_per_dim) {
        if (m <= 0) throw InvalidArgument("make_grid: bandwidth must be positive");
        if (m % 2 != 0)
            throw InvalidArgument("make_grid: odd bandwidth " + std::to_string(m) +
                                  " (real transforms need an even node count)");
    }
    for (double p : period)
        if (!(p > 0.0) || !std::isfinite(p)) throw InvalidArgument("make_grid: period must be positive");
    return TorusGrid(std::move(modes_per_dim), std::move(period));
}

TorusGrid make_grid(int n_dims, std::vector<int> modes_per_dim) {
    return make_grid(n_dims, std::move(modes_per_dim),
                     std::vector<double>(static_cast<std::size_t>(std::max(n_dims, 0)), 2.0 * std::numbers::pi));
}

// ---------------------------------------------------------------------------

ScalarField::ScalarField(TorusGrid grid) : grid_(std::move(grid)), values_(grid_.size(), 0.0) {}

ScalarField::ScalarField(TorusGrid grid, std::vector<double> values)
    : grid_(std::move(grid)), values_(std::move(values)) {
    if (values_.size() != grid_.size()) throw InvalidArgument("ScalarField: value count does not match grid");
}

double ScalarField::max_abs() const {
    double m = 0.0;
    for (double v : values_) m = std::max(m, std::abs(v));
    return m;
}

bool ScalarField::all_finite() const {
    return std::all_of(values_.begin(), values_.end(), [](double v) { return std::isfinite(v); });
}

ScalarField& ScalarField::operator+=(const ScalarField& other) {
    kernels::add(values_, other.values_, values_);
    return *this;
}

ScalarField& ScalarField::operator-=(const ScalarField& other) { return add_scaled(-1.0, other); }

ScalarField& ScalarField::operator*=(double a) {
    kernels::scale(a, values_, values_);
    return *this;
}

ScalarField& ScalarField::add_scaled(double a, const ScalarField& other) {
    if (other.size() != size()) throw InvalidArgument("ScalarField: size mismatch");
    kernels::axpy(a, other.values_, values_);
    return *this;
}

ScalarField operator+(ScalarField a, const ScalarField& b) { return a += b; }
ScalarField operator-(ScalarField a, const ScalarField& b) { return a -= b; }
ScalarField operator*(double a, ScalarField f) { return f *= a; }

// ---------------------------------------------------------------------------

TensorField::TensorField(TorusGrid grid, int rank) : grid_(std::move(grid)), rank_(rank) {
    std::size_t count = 1;
    for (int r = 0; r < rank; ++r) count *= static_cast<std::size_t>(grid_.dims());
    components_.assign(count, std::vector<double>(grid_.size(), 0.0));
}

TensorField::TensorField(const ScalarField& scalar) : grid_(scalar.grid()), rank_(0) {
    components_.emplace_back(scalar.values().begin(), scalar.values().end());
}

std::size_t TensorField::flat_index(std::span<const int> index) const {
    std::size_t flat = 0;
    for (int i : index) flat = flat * static_cast<std::size_t>(grid_.dims()) + static_cast<std::size_t>(i);
    return flat;
}

MultiIndex TensorField::unflatten(std::size_t flat) const {
    MultiIndex idx(static_cast<std::size_t>(rank_));
    const auto n = static_cast<std::size_t>(grid_.dims());
    for (int r = rank_ - 1; r >= 0; --r) {
        idx[static_cast<std::size_t>(r)] = static_cast<int>(flat % n);
        flat /= n;
    }
    return idx;
}

ScalarField TensorField::as_scalar() const {
    if (rank_ != 0) throw InvalidArgument("TensorField::as_scalar: rank is not 0");
    return ScalarField(grid_, components_[0]);
}

// ---------------------------------------------------------------------------

namespace spectral {
namespace {

struct PlanKey {
    std::vector<int> shape;
    int sign;
    bool operator<(const PlanKey& o) const { return std::tie(shape, sign) < std::tie(o.shape, o.sign); }
};

// FFTW planning is not thread-safe; execution with new-array calls is.
fftw_plan plan_for(const std::vector<int>& shape, int sign) {
    static std::mutex mutex;
    static std::map<PlanKey, fftw_plan> cache;
    std::lock_guard lock(mutex);
    PlanKey key{shape, sign};
    if (auto it = cache.find(key); it != cache.end()) return it->second;
    std::size_t n = 1;
    for (int s : shape) n *= static_cast<std::size_t>(s);
    auto* in = fftw_alloc_complex(n);
    auto* out = fftw_alloc_complex(n);
    fftw_plan plan = fftw_plan_dft(static_cast<int>(shape.size()), shape.data(), in, out, sign,
                                   FFTW_ESTIMATE | FFTW_UNALIGNED);
    fftw_free(in);
    fftw_free(out);
    cache.emplace(std::move(key), plan);
    return plan;
}

}  // namespace

std::vector<Complex> forward(const TorusGrid& grid, std::span<const double> values) {
    std::vector<Complex> in(values.begin(), values.end());
    std::vector<Complex> out(in.size());
    fftw_execute_dft(plan_for(grid.modes(), FFTW_FORWARD), reinterpret_cast<fftw_complex*>(in.data()),
                     reinterpret_cast<fftw_complex*>(out.data()));
    const double inv = 1.0 / static_cast<double>(grid.size());
    for (auto& c : out) c *= inv;
    return out;
}

std::vector<double> inverse(const TorusGrid& grid, std::span<const Complex> coeffs) {
    std::vector<Complex> in(coeffs.begin(), coeffs.end());
    std::vector<Complex> out(in.size());
    fftw_execute_dft(plan_for(grid.modes(), FFTW_BACKWARD), reinterpret_cast<fftw_complex*>(in.data()),
                     reinterpret_cast<fftw_complex*>(out.data()));
    std::vector<double> values(out.size());
    for (std::size_t i = 0; i < out.size(); ++i) values[i] = out[i].real();
    return values;
}

std::vector<Complex> derivative_symbol(const TorusGrid& grid, std::span<const int> multi_index) {
    std::array<int, 3> count{};
    for (int axis : multi_index) {
        if (axis < 0 || axis >= grid.dims())
            throw InvalidArgument("spectral_derivative: axis " + std::to_string(axis + 1) + " outside 1.." +
                                  std::to_string(grid.dims()));
        ++count[static_cast<std::size_t>(axis)];
    }
    // Per-axis factors (i kappa)^count, tabulated per slot.
    std::array<std::vector<Complex>, 3> factor;
    for (int d = 0; d < grid.dims(); ++d) {
        const int n = grid.modes(d);
        const int q = count[static_cast<std::size_t>(d)];
        auto& f = factor[static_cast<std::size_t>(d)];
        f.resize(static_cast<std::size_t>(n));
        for (int s = 0; s < n; ++s) {
            if (q % 2 == 1 && s == n / 2) {
                f[static_cast<std::size_t>(s)] = 0.0;
                continue;
            }
            f[static_cast<std::size_t>(s)] = std::pow(Complex(0.0, grid.angular_wavenumber(s, d)), q);
            if (q == 0) f[static_cast<std::size_t>(s)] = 1.0;
        }
    }
    std::vector<Complex> symbol(grid.size());
    for (std::size_t i = 0; i < grid.size(); ++i) {
        const auto idx = grid.unravel(i);
        Complex v = 1.0;
        for (int d = 0; d < grid.dims(); ++d)
            v *= factor[static_cast<std::size_t>(d)][static_cast<std::size_t>(idx[static_cast<std::size_t>(d)])];
        symbol[i] = v;
    }
    return symbol;
}

namespace {

std::size_t ravel(const TorusGrid& grid, const std::array<int, 3>& idx) {
    std::size_t flat = 0;
    for (int d = 0; d < grid.dims(); ++d)
        flat = flat * static_cast<std::size_t>(grid.modes(d)) + static_cast<std::size_t>(idx[static_cast<std::size_t>(d)]);
    return flat;
}

int slot_of(int k, int n) { return k >= 0 ? k : k + n; }

}  // namespace

std::vector<Complex> pad(const TorusGrid& coarse, const TorusGrid& fine, std::span<const Complex> c) {
    std::vector<Complex> out(fine.size(), 0.0);
    const int dims = coarse.dims();
    for (std::size_t i = 0; i < coarse.size(); ++i) {
        if (c[i] == 0.0) continue;
        const auto idx = coarse.unravel(i);
        // Each Nyquist axis doubles the number of targets.
        std::array<int, 3> k{};
        int nyquist_axes = 0;
        for (int d = 0; d < dims; ++d) {
            k[static_cast<std::size_t>(d)] = coarse.wavenumber(idx[static_cast<std::size_t>(d)], d);
            if (idx[static_cast<std::size_t>(d)] == coarse.modes(d) / 2) nyquist_axes |= 1 << d;
        }
        const int combos = 1 << dims;
        for (int mask = 0; mask < combos; ++mask) {
            if ((mask & ~nyquist_axes) != 0) continue;
            std::array<int, 3> target{};
            double w = 1.0;
            for (int d = 0; d < dims; ++d) {
                int kd = k[static_cast<std::size_t>(d)];
                if (nyquist_axes & (1 << d)) {
                    w *= 0.5;
                    kd = (mask & (1 << d)) ? -kd : kd;  // kd == -N/2 here; flip gives +N/2
                }
                target[static_cast<std::size_t>(d)] = slot_of(kd, fine.modes(d));
            }
            out[ravel(fine, target)] += w * c[i];
        }
    }
    return out;
}

std::vector<Complex> truncate(const TorusGrid& fine, const TorusGrid& coarse, std::span<const Complex> c) {
    std::vector<Complex> out(coarse.size(), 0.0);
    const int dims = coarse.dims();
    for (std::size_t i = 0; i < fine.size(); ++i) {
        const auto idx = fine.unravel(i);
        std::array<int, 3> target{};
        bool inside = true;
        for (int d = 0; d < dims; ++d) {
            const int k = fine.wavenumber(idx[static_cast<std::size_t>(d)], d);
            const int half = coarse.modes(d) / 2;
            if (k < -half || k > half) {
                inside = false;
                break;
            }
            target[static_cast<std::size_t>(d)] = slot_of(k == half ? -half : k, coarse.modes(d));
        }
        if (inside) out[ravel(coarse, target)] += c[i];
    }
    return out;
}

double top_band_energy_fraction(const ScalarField& f) {
    const auto& grid = f.grid();
    const auto c = forward(grid, f.values());
    double total = 0.0;
    double top = 0.0;
    for (std::size_t i = 0; i < c.size(); ++i) {
        const double e = std::norm(c[i]);
        total += e;
        const auto idx = grid.unravel(i);
        for (int d = 0; d < grid.dims(); ++d) {
            if (3 * std::abs(grid.wavenumber(idx[static_cast<std::size_t>(d)], d)) > grid.modes(d)) {
                top += e;
                break;
            }
        }
    }
    return total > 0.0 ? top / total : 0.0;
}

}  // namespace spectral

// ---------------------------------------------------------------------------

ScalarField spectral_derivative(const ScalarField& f, std::span<const int> multi_index) {
    const auto& grid = f.grid();
    const auto symbol = spectral::derivative_symbol(grid, multi_index);
    if (multi_index.empty()) return f;
    auto c = spectral::forward(grid, f.values());
    for (std::size_t i = 0; i < c.size(); ++i) c[i] *= symbol[i];
    return ScalarField(grid, spectral::inverse(grid, c));
}

ScalarField spectral_derivative(const ScalarField& f, std::initializer_list<int> multi_index) {
    return spectral_derivative(f, std::span<const int>(multi_index.begin(), multi_index.size()));
}

TensorField gradient_tensor(const ScalarField& f, int k) {
    TensorField out(f.grid(), k);
    const auto c = spectral::forward(f.grid(), f.values());
    // Derivatives commute on the flat torus: one transform per sorted index.
    std::map<MultiIndex, std::vector<double>> cache;
    for (std::size_t flat = 0; flat < out.component_count(); ++flat) {
        auto idx = out.unflatten(flat);
        std::sort(idx.begin(), idx.end());
        auto it = cache.find(idx);
        if (it == cache.end()) {
            const auto symbol = spectral::derivative_symbol(f.grid(), idx);
            std::vector<Complex> d(c.size());
            for (std::size_t i = 0; i < c.size(); ++i) d[i] = c[i] * symbol[i];
            it = cache.emplace(idx, spectral::inverse(f.grid(), d)).first;
        }
        std::copy(it->second.begin(), it->second.end(), out.component(flat).begin());
    }
    return out;
}

TensorField divergence(const TensorField& h) {
    if (h.rank() < 1) throw InvalidArgument("divergence: rank must be >= 1");
    const auto& grid = h.grid();
    TensorField out(grid, h.rank() - 1);
    for (std::size_t flat = 0; flat < h.component_count(); ++flat) {
        const auto idx = h.unflatten(flat);
        const int axis = idx[0];
        ScalarField comp(grid, std::vector<double>(h.component(flat).begin(), h.component(flat).end()));
        const auto d = spectral_derivative(comp, {axis});
        const MultiIndex rest(idx.begin() + 1, idx.end());
        auto target = out.component(out.flat_index(rest));
        kernels::add(target, d.values(), target);
    }
    return out;
}

ScalarField interpolate(const ScalarField& f, const TorusGrid& fine) {
    if (fine == f.grid()) return f;
    const auto c = spectral::forward(f.grid(), f.values());
    const auto p = spectral::pad(f.grid(), fine, c);
    return ScalarField(fine, spectral::inverse(fine, p));
}

ScalarField restrict_to(const ScalarField& f, const TorusGrid& coarse) {
    if (coarse == f.grid()) return f;
    const auto c = spectral::forward(f.grid(), f.values());
    const auto t = spectral::truncate(f.grid(), coarse, c);
    return ScalarField(coarse, spectral::inverse(coarse, t));
}

double l2_inner(const TensorField& f, const TensorField& h) {
    if (f.rank() != h.rank()) throw InvalidArgument("l2_inner: rank mismatch");
    if (!(f.grid() == h.grid())) throw InvalidArgument("l2_inner: grid mismatch");
    double s = 0.0;
    for (std::size_t c = 0; c < f.component_count(); ++c) s += kernels::dot(f.component(c), h.component(c));
    return s * f.grid().weight();
}

double l2_inner(const ScalarField& f, const ScalarField& h) {
    if (!(f.grid() == h.grid())) throw InvalidArgument("l2_inner: grid mismatch");
    return kernels::dot(f.values(), h.values()) * f.grid().weight();
}

double l2_norm(const ScalarField& f) { return std::sqrt(l2_inner(f, f)); }

double sobolev_norm(const ScalarField& f, int k) {
    if (k < 0) throw InvalidArgument("sobolev_norm: order must be nonnegative");
    double sum = l2_inner(f, f);
    for (int j = 1; j <= k; ++j) {
        const auto g = gradient_tensor(f, j);
        sum += l2_inner(g, g);
    }
    return std::sqrt(sum);
}

}  // namespace qlp
