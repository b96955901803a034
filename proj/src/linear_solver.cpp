#include "qlp/linear_solver.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <memory>
#include <string>

#include "qlp/error.hpp"
#include "qlp/kernels.hpp"

namespace qlp {

std::vector<double> time_grid(double T, double dt) {
    if (!(dt > 0.0) || !(T > 0.0)) throw InvalidArgument("time grid: T and dt must be positive");
    const double ratio = T / dt;
    const double steps = std::round(ratio);
    if (std::abs(ratio - steps) > 1e-9 || steps < 1.0)
        throw InvalidArgument("time grid: T/dt = " + std::to_string(ratio) + " is not an integer");
    std::vector<double> t(static_cast<std::size_t>(steps) + 1);
    for (std::size_t k = 0; k < t.size(); ++k) t[k] = static_cast<double>(k) * dt;
    return t;
}

void FrozenLinearOperator::validate() const {
    if (p < 1) throw InvalidArgument("frozen operator: p must be >= 1");
    if (times.size() < 2) throw InvalidArgument("frozen operator: need at least two time nodes");
    if (A_field.size() != times.size()) throw InvalidArgument("frozen operator: A_field does not match time grid");
    if (!R_fields.empty() && R_fields.size() != times.size())
        throw InvalidArgument("frozen operator: R_fields does not match time grid");
    if (source.size() + 1 != times.size()) throw InvalidArgument("frozen operator: one source per interval expected");
    for (const auto& A : A_field)
        if (!(A.grid() == eval_grid) || A.rank() != 2 * p)
            throw InvalidArgument("frozen operator: A_field must have rank 2p on the evaluation grid");
    for (const auto& Rs : R_fields) {
        if (!Rs.empty() && static_cast<int>(Rs.size()) != 2 * p)
            throw InvalidArgument("frozen operator: R_fields needs ranks 0..2p-1");
        for (std::size_t k = 0; k < Rs.size(); ++k)
            if (!(Rs[k].grid() == eval_grid) || Rs[k].rank() != static_cast<int>(k))
                throw InvalidArgument("frozen operator: R_k must have rank k on the evaluation grid");
    }
    for (const auto& s : source)
        if (!(s.grid() == grid)) throw InvalidArgument("frozen operator: source grid mismatch");
}

std::size_t FrozenLinearOperator::node_of(double t) const {
    const double tol = 1e-12 * std::max(1.0, std::abs(t));
    const auto it = std::lower_bound(times.begin(), times.end(), t - tol);
    if (it == times.end() || std::abs(*it - t) > tol)
        throw InvalidArgument("frozen operator: t = " + std::to_string(t) + " is not a time node");
    return static_cast<std::size_t>(it - times.begin());
}

FrozenLinearOperator freeze_coefficients(const OperatorSpec& spec, const std::vector<StateJet>& reference) {
    spec.validate();
    if (reference.size() < 2) throw InvalidArgument("freeze_coefficients: need at least two reference states");
    const CompiledOperator op(spec);
    FrozenLinearOperator out;
    out.p = spec.p;
    out.grid = reference.front().grid();
    out.eval_grid = out.grid.padded();
    out.ellipticity_floor = spec.ellipticity_floor;
    std::vector<ScalarField> b;
    for (const auto& ref : reference) {
        if (!(ref.grid() == out.grid)) throw InvalidArgument("freeze_coefficients: reference grids differ");
        if (ref.order() < 2 * spec.p) throw InvalidArgument("freeze_coefficients: reference jet too short");
        if (!out.times.empty() && !(ref.t > out.times.back()))
            throw InvalidArgument("freeze_coefficients: reference times must increase");
        out.times.push_back(ref.t);
        const auto fine = interpolate(ref, out.eval_grid);
        out.A_field.push_back(assemble_A(spec, fine));
        const SlotEnvironment env(out.eval_grid, fine, op.jet_slots());
        auto lower = restrict_to(ScalarField(out.eval_grid, env.evaluate(spec.lower_order)), out.grid);
        if (spec.forcing) lower += spec.forcing->at(out.grid, ref.t);
        b.push_back(std::move(lower));
    }
    for (std::size_t k = 0; k + 1 < b.size(); ++k) out.source.push_back(0.5 * (b[k] + b[k + 1]));
    return out;
}

// ---------------------------------------------------------------------------

FrozenApplier::FrozenApplier(const FrozenLinearOperator& op, std::size_t node) : op_(&op) {
    if (node >= op.times.size()) throw InvalidArgument("frozen operator: node out of range");
    const std::size_t n = op.eval_grid.size();
    auto collapse = [&](const TensorField& T, bool top) {
        std::map<MultiIndex, std::vector<double>> sums;
        for (std::size_t c = 0; c < T.component_count(); ++c) {
            auto J = T.unflatten(c);
            std::sort(J.begin(), J.end());
            auto [it, fresh] = sums.try_emplace(J, std::vector<double>(n, 0.0));
            kernels::add(it->second, T.component(c), it->second);
        }
        for (auto& [S, v] : sums) {
            const auto [lo, hi] = std::minmax_element(v.begin(), v.end());
            if (*lo == 0.0 && *hi == 0.0) continue;
            double mean = 0.0;
            for (double x : v) mean += x;
            mean /= static_cast<double>(n);
            const bool uniform = *hi == *lo;
            if (!uniform) constant_ = false;
            if (uniform) mean = *lo;
            terms_.push_back({S, std::move(v), mean, top, uniform});
        }
    };
    collapse(op.A_field[node], true);
    if (!op.R_fields.empty())
        for (const auto& R : op.R_fields[node]) collapse(R, false);
    for (const auto& t : terms_)
        if (!t.top) constant_ = false;
}

void FrozenApplier::apply(std::span<const double> v, std::span<double> out) const {
    const auto& grid = op_->grid;
    const auto& fine = op_->eval_grid;
    const auto c = spectral::forward(grid, v);
    std::vector<Complex> exact(c.size(), Complex(0.0, 0.0));
    std::vector<double> acc;
    for (const auto& t : terms_) {
        if (t.uniform) {
            const auto sym = spectral::derivative_symbol(grid, t.index);
            for (std::size_t i = 0; i < c.size(); ++i) exact[i] += t.mean * sym[i] * c[i];
        } else {
            if (acc.empty()) acc.assign(fine.size(), 0.0);
            kernels::fma(t.coeff, padded_derivative(grid, c, t.index, fine), acc);
        }
    }
    const auto r = spectral::inverse(grid, exact);
    std::copy(r.begin(), r.end(), out.begin());
    if (!acc.empty()) {
        const auto f = restrict_to(ScalarField(fine, std::move(acc)), grid);
        kernels::add(f.values(), out, out);
    }
}

ScalarField FrozenApplier::apply(const ScalarField& v) const {
    ScalarField out(op_->grid);
    apply(v.values(), out.values());
    return out;
}

std::vector<Complex> FrozenApplier::mean_symbol() const {
    std::vector<Complex> sym(op_->grid.size(), Complex(0.0, 0.0));
    for (const auto& t : terms_) {
        if (!t.top) continue;
        const auto s = spectral::derivative_symbol(op_->grid, t.index);
        for (std::size_t i = 0; i < sym.size(); ++i) sym[i] += t.mean * s[i];
    }
    return sym;
}

void check_frozen_ellipticity(const FrozenLinearOperator& op, std::size_t node) {
    const int n = op.grid.dims();
    std::vector<std::vector<double>> directions;
    for (int a = 0; a < n; ++a) {
        std::vector<double> e(static_cast<std::size_t>(n), 0.0);
        e[static_cast<std::size_t>(a)] = 1.0;
        directions.push_back(e);
        for (int b = a + 1; b < n; ++b)
            for (double s : {1.0, -1.0}) {
                auto f = e;
                f[static_cast<std::size_t>(b)] = s;
                for (auto& x : f) x /= std::sqrt(2.0);
                directions.push_back(f);
            }
    }
    const auto& A = op.A_field[node];
    const std::size_t m = op.eval_grid.size();
    const double sign = (op.p - 1) % 2 == 0 ? 1.0 : -1.0;
    const double floor = std::pow(op.ellipticity_floor / 2.0, op.p);
    for (const auto& xi : directions) {
        std::vector<double> q(m, 0.0);
        for (std::size_t c = 0; c < A.component_count(); ++c) {
            double w = sign;
            for (int j : A.unflatten(c)) w *= xi[static_cast<std::size_t>(j)];
            if (w != 0.0) kernels::axpy(w, A.component(c), q);
        }
        const double lo = *std::min_element(q.begin(), q.end());
        if (lo < floor * (1.0 - 1e-12))
            throw InvalidArgument("frozen operator: ellipticity floor violated at t = " +
                                  std::to_string(op.times[node]) + " (symbol " + std::to_string(lo) +
                                  " < " + std::to_string(floor) + ")");
    }
}

namespace {

ScalarField cn_step(const FrozenLinearOperator& op, const FrozenApplier& now, const FrozenApplier& next,
                    std::size_t interval, const ScalarField& state, double dt, GmresResult* info) {
    const auto& grid = op.grid;
    const std::size_t N = grid.size();
    // rhs = u + dt/2 L_k u + dt s_k
    std::vector<double> rhs(state.values().begin(), state.values().end());
    std::vector<double> Lu(N);
    now.apply(state.values(), Lu);
    kernels::axpy(0.5 * dt, Lu, rhs);
    kernels::axpy(dt, op.source[interval].values(), rhs);

    const auto sym = next.mean_symbol();
    std::vector<double> inv(N);
    for (std::size_t i = 0; i < N; ++i) {
        // Top-order symbols are real.
        const double d = 1.0 - 0.5 * dt * sym[i].real();
        inv[i] = d > 0.0 ? 1.0 / d : 1.0;
    }
    const LinearMap apply = [&](std::span<const double> in, std::span<double> out) {
        next.apply(in, out);
        for (std::size_t i = 0; i < N; ++i) out[i] = in[i] - 0.5 * dt * out[i];
    };
    const LinearMap precondition = [&](std::span<const double> in, std::span<double> out) {
        auto c = spectral::forward(grid, in);
        kernels::cmul_real(inv, c);
        const auto r = spectral::inverse(grid, c);
        std::copy(r.begin(), r.end(), out.begin());
    };
    ScalarField x = state;
    const auto res = gmres(apply, precondition, rhs, x.values());
    if (info) *info = res;
    return x;
}

}  // namespace

ScalarField step_linear(const FrozenLinearOperator& op, const ScalarField& state, double t, double dt,
                        GmresResult* info) {
    op.validate();
    if (!(dt > 0.0)) throw InvalidArgument("step_linear: dt must be positive");
    if (!(state.grid() == op.grid)) throw InvalidArgument("step_linear: state grid mismatch");
    const auto k = op.node_of(t);
    const auto k1 = op.node_of(t + dt);
    if (k1 != k + 1) throw InvalidArgument("step_linear: [t, t+dt] must be one interval of the operator");
    check_frozen_ellipticity(op, k1);
    const FrozenApplier now(op, k), next(op, k1);
    return cn_step(op, now, next, k, state, dt, info);
}

Trajectory solve_linear(const FrozenLinearOperator& op, const ScalarField& u0, double T, double dt) {
    op.validate();
    const auto times = time_grid(T, dt);
    if (!(u0.grid() == op.grid)) throw InvalidArgument("solve_linear: initial datum grid mismatch");
    if (op.times.size() < times.size() || std::abs(op.times[times.size() - 1] - T) > 1e-12 * std::max(1.0, T))
        throw InvalidArgument("solve_linear: operator does not cover [0, T] on the dt grid");
    for (std::size_t k = 0; k < times.size(); ++k)
        if (std::abs(op.times[k] - times[k]) > 1e-12 * std::max(1.0, T))
            throw InvalidArgument("solve_linear: operator time grid differs from the dt grid");

    Trajectory traj;
    traj.grid = op.grid;
    traj.dt = dt;
    traj.times = times;
    traj.states.push_back(u0);
    check_frozen_ellipticity(op, 0);
    auto now = std::make_unique<FrozenApplier>(op, 0);
    for (std::size_t k = 0; k + 1 < times.size(); ++k) {
        check_frozen_ellipticity(op, k + 1);
        auto next = std::make_unique<FrozenApplier>(op, k + 1);
        GmresResult info;
        traj.states.push_back(cn_step(op, *now, *next, k, traj.states.back(), dt, &info));
        traj.stats.iterations.push_back(info.iterations);
        traj.stats.residuals.push_back(info.relative_residual);
        now = std::move(next);
    }
    return traj;
}

}  // namespace qlp
