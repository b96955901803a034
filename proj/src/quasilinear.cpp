#include "qlp/quasilinear.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <sstream>
#include <thread>

#include "qlp/analysis.hpp"
#include "qlp/error.hpp"
#include "qlp/kernels.hpp"

namespace qlp {

std::vector<ScalarField> discrete_residual(const CompiledOperator& op, const Trajectory& traj) {
    if (traj.states.size() != traj.times.size() || traj.states.size() < 2)
        throw InvalidArgument("discrete_residual: malformed trajectory");
    std::vector<ScalarField> Q;
    Q.reserve(traj.states.size());
    for (std::size_t k = 0; k < traj.states.size(); ++k) Q.push_back(apply_Q(op, traj.states[k], traj.times[k]).value);
    std::vector<ScalarField> r;
    r.reserve(Q.size() - 1);
    for (std::size_t k = 0; k + 1 < Q.size(); ++k) {
        const double dt = traj.times[k + 1] - traj.times[k];
        ScalarField rk = traj.states[k + 1] - traj.states[k];
        rk *= 1.0 / dt;
        rk.add_scaled(-0.5, Q[k + 1]);
        rk.add_scaled(-0.5, Q[k]);
        r.push_back(std::move(rk));
    }
    return r;
}

double residual_norm(const std::vector<ScalarField>& residual, double dt) {
    double s = 0.0;
    for (const auto& r : residual) s += dt * l2_inner(r, r);
    return std::sqrt(s);
}

// ---------------------------------------------------------------------------

FrozenLinearOperator LinearizationAt::as_operator(int p, std::vector<ScalarField> source, double floor) const {
    FrozenLinearOperator op;
    op.p = p;
    op.grid = base.grid;
    op.eval_grid = base.grid.padded();
    op.times = base.times;
    op.A_field = A_tilde;
    const bool any_r = std::any_of(R_tilde.begin(), R_tilde.end(), [](const auto& r) { return !r.empty(); });
    if (any_r) op.R_fields = R_tilde;
    op.source = std::move(source);
    op.ellipticity_floor = floor;
    op.validate();
    return op;
}

LinearizationAt linearize_F(const OperatorSpec& spec, const Trajectory& base) {
    const CompiledOperator op(spec);
    const int p = spec.p;
    const auto fine = base.grid.padded();
    LinearizationAt lin;
    lin.base = base;
    for (std::size_t k = 0; k < base.states.size(); ++k) {
        const auto& u = base.states[k];
        const double t = base.times[k];
        lin.A_tilde.push_back(assemble_A(spec, interpolate(StateJet::of(u, t, p), fine)));
        std::vector<TensorField> R;
        if (op.depends_on_state()) {
            const SlotEnvironment env(fine, u, t, op.jet_slots());
            const auto c = spectral::forward(base.grid, u.values());
            std::vector<std::vector<double>> top_derivs;
            for (const auto& term : op.top_terms()) top_derivs.push_back(padded_derivative(base.grid, c, term.index, fine));
            for (int r = 0; r < 2 * p; ++r) R.emplace_back(fine, r);
            for (const auto& sd : op.slot_derivatives()) {
                auto rho = env.evaluate(sd.d_lower);
                for (std::size_t j = 0; j < sd.d_top.size(); ++j) {
                    if (expr::is_zero(sd.d_top[j])) continue;
                    kernels::fma(env.evaluate(sd.d_top[j]), top_derivs[j], rho);
                }
                auto& T = R[static_cast<std::size_t>(sd.slot.order())];
                const double share = 1.0 / expr::multiplicity(sd.slot.index);
                for (std::size_t f = 0; f < T.component_count(); ++f) {
                    auto J = T.unflatten(f);
                    std::sort(J.begin(), J.end());
                    if (J != sd.slot.index) continue;
                    kernels::scale(share, rho, T.component(f));
                }
            }
        }
        lin.R_tilde.push_back(std::move(R));
    }
    return lin;
}

double directional_derivative_check(const OperatorSpec& spec, const Trajectory& base, const Trajectory& direction,
                                    double h) {
    if (!(h >= 1e-7 && h <= 1e-3)) throw InvalidArgument("directional_derivative_check: h must lie in [1e-7, 1e-3]");
    if (!(direction.grid == base.grid) || direction.times.size() != base.times.size())
        throw InvalidArgument("directional_derivative_check: base and direction grids differ");
    OperatorSpec unforced = spec;
    unforced.forcing = nullptr;
    const CompiledOperator op(unforced);
    const auto lin = linearize_F(unforced, base);
    std::vector<ScalarField> zero(base.times.size() - 1, ScalarField(base.grid));
    const auto L = lin.as_operator(spec.p, std::move(zero), spec.ellipticity_floor);

    double mismatch = 0.0;
    for (std::size_t k = 0; k < base.states.size(); ++k) {
        const double t = base.times[k];
        const auto& b = base.states[k];
        ScalarField up = b, um = b;
        up.add_scaled(h, direction.states[k]);
        um.add_scaled(-h, direction.states[k]);
        // The perturbation actually formed, free of the rounding in b +- h d.
        ScalarField d_eff = up - um;
        d_eff *= 1.0 / (2.0 * h);
        ScalarField fd = apply_Q(op, up, t).value - apply_Q(op, um, t).value;
        fd *= 1.0 / (2.0 * h);
        const auto Jd = FrozenApplier(L, k).apply(d_eff);
        for (std::size_t i = 0; i < fd.size(); ++i) mismatch = std::max(mismatch, std::abs(fd[i] - Jd[i]));
    }
    return mismatch;
}

// ---------------------------------------------------------------------------

OperatorSpec prepare_spec(const OperatorSpec& spec, const ScalarField& u0) {
    if (spec.cutoff_applied) return spec;
    const CompiledOperator op(spec);
    // A state-independent operator is its own cutoff.
    if (!op.depends_on_state()) return spec;
    return apply_cutoff(spec, spec.cutoff_radius / 2.0, u0);
}

namespace {

Trajectory constant_trajectory(const ScalarField& u0, const std::vector<double>& times, double dt) {
    Trajectory traj;
    traj.grid = u0.grid();
    traj.dt = dt;
    traj.times = times;
    traj.states.assign(times.size(), u0);
    traj.stats.iterations.assign(times.size() - 1, 0);
    traj.stats.residuals.assign(times.size() - 1, 0.0);
    return traj;
}

void merge_stats(SolverStats& into, const SolverStats& from) {
    for (std::size_t k = 0; k < into.iterations.size() && k < from.iterations.size(); ++k) {
        into.iterations[k] += from.iterations[k];
        into.residuals[k] = from.residuals[k];
    }
}

bool blown_up(const Trajectory& traj, double limit) {
    for (const auto& s : traj.states)
        if (!s.all_finite() || s.max_abs() > limit) return true;
    return false;
}

enum class Outcome { Converged, Stalled, BlowUp };

Outcome newton(const OperatorSpec& spec, const CompiledOperator& op, Trajectory& traj, double tol, int max_iterations,
               std::vector<double>& history) {
    const double limit = 10.0 * spec.cutoff_radius;
    while (true) {
        if (blown_up(traj, limit)) return Outcome::BlowUp;
        const auto r = discrete_residual(op, traj);
        const double rn = residual_norm(r, traj.dt);
        history.push_back(rn);
        if (rn <= tol) return Outcome::Converged;
        if (history.size() > 1 && !(rn < history[history.size() - 2])) return Outcome::Stalled;
        if (static_cast<int>(history.size()) > max_iterations) return Outcome::Stalled;

        std::vector<ScalarField> source;
        source.reserve(r.size());
        for (const auto& rk : r) source.push_back(-1.0 * rk);
        const auto lin = linearize_F(spec, traj);
        const auto L = lin.as_operator(spec.p, std::move(source), spec.ellipticity_floor);
        Trajectory v;
        try {
            v = solve_linear(L, ScalarField(traj.grid), traj.times.back(), traj.dt);
        } catch (const InvalidArgument&) {
            // Ellipticity lost along the iterate.
            return Outcome::BlowUp;
        } catch (const KrylovError&) {
            return Outcome::Stalled;
        }
        for (std::size_t k = 1; k < traj.states.size(); ++k) traj.states[k] += v.states[k];
        merge_stats(traj.stats, v.stats);
    }
}

std::string history_text(const std::vector<double>& h) {
    std::ostringstream os;
    os.precision(3);
    for (std::size_t i = 0; i < h.size(); ++i) os << (i ? ", " : "") << h[i];
    return os.str();
}

}  // namespace

Solution solve_quasilinear(const OperatorSpec& spec_in, const ScalarField& u0, double T, double dt, double tol,
                           const NewtonOptions& options) {
    if (!(tol >= 1e-12)) throw InvalidArgument("solve_quasilinear: tol must be >= 1e-12");
    if (u0.grid().dims() != spec_in.dims) throw InvalidArgument("solve_quasilinear: dimension mismatch");
    const OperatorSpec spec = prepare_spec(spec_in, u0);
    const CompiledOperator op(spec);
    const int m = options.m > 0 ? options.m : default_jet_order(spec.dims, spec.p);

    Solution sol;
    sol.jet = build_jet(op, u0, m);
    std::size_t steps = time_grid(T, dt).size() - 1;
    std::vector<double> all_history;
    for (int halving = 0; halving <= options.max_halvings && steps > 0; ++halving, steps /= 2) {
        const double horizon = static_cast<double>(steps) * dt;
        const auto times = time_grid(horizon, dt);
        Trajectory traj;
        if (options.start_from_w) {
            std::vector<StateJet> refs;
            refs.reserve(times.size());
            for (double t : times) refs.push_back(assemble_u_tilde(sol.jet, t, spec.p));
            try {
                traj = solve_linear(freeze_coefficients(spec, refs), u0, horizon, dt);
            } catch (const SolverError&) {
                continue;
            }
        } else {
            traj = constant_trajectory(u0, times, dt);
        }
        std::vector<double> history;
        const auto outcome = newton(spec, op, traj, tol, options.max_iterations, history);
        all_history.insert(all_history.end(), history.begin(), history.end());
        if (outcome == Outcome::Converged) {
            sol.trajectory = std::move(traj);
            sol.newton_history = std::move(history);
            sol.horizon = horizon;
            sol.halvings = halving;
            sol.converged = true;
            for (std::size_t i = 2; i < sol.newton_history.size(); ++i)
                if (!(sol.newton_history[i] < sol.newton_history[i - 1])) sol.converged = false;
            return sol;
        }
    }
    throw SolverError("no short-time solution found at this resolution (residual history: " +
                      history_text(all_history) + ")");
}

Solution solve_picard(const OperatorSpec& spec_in, const ScalarField& u0, double T, double dt, double tol,
                      double relaxation, int max_iterations) {
    if (!(relaxation > 0.0 && relaxation <= 1.0)) throw InvalidArgument("solve_picard: relaxation must lie in (0, 1]");
    const OperatorSpec spec = prepare_spec(spec_in, u0);
    const CompiledOperator op(spec);
    const auto times = time_grid(T, dt);
    Solution sol;
    sol.horizon = times.back();
    Trajectory u = constant_trajectory(u0, times, dt);
    for (int it = 0; it < max_iterations; ++it) {
        auto residual = discrete_residual(op, u);
        const double rn = residual_norm(residual, dt);
        sol.newton_history.push_back(rn);
        if (rn <= tol) {
            sol.converged = true;
            break;
        }
        std::vector<StateJet> refs;
        refs.reserve(times.size());
        for (std::size_t k = 0; k < times.size(); ++k) refs.push_back(StateJet::of(u.states[k], times[k], spec.p));
        // The frozen solve v in correction form: v - u has zero initial value
        // and source -r, so GMRES resolves the update rather than v itself.
        auto frozen = freeze_coefficients(spec, refs);
        for (std::size_t k = 0; k < residual.size(); ++k) {
            residual[k] *= -1.0;
            frozen.source[k] = std::move(residual[k]);
        }
        const auto v = solve_linear(frozen, ScalarField(u0.grid()), sol.horizon, dt);
        for (std::size_t k = 1; k < times.size(); ++k) u.states[k].add_scaled(relaxation, v.states[k]);
        merge_stats(u.stats, v.stats);
        if (blown_up(u, 10.0 * spec.cutoff_radius)) throw SolverError("solve_picard: iterate blew up");
    }
    if (!sol.converged)
        throw SolverError("solve_picard: no convergence after " + std::to_string(max_iterations) + " iterations");
    sol.trajectory = std::move(u);
    return sol;
}

Trajectory difference(const Trajectory& a, const Trajectory& b) {
    if (!(a.grid == b.grid) || a.times.size() != b.times.size())
        throw InvalidArgument("difference: trajectories live on different grids");
    for (std::size_t k = 0; k < a.times.size(); ++k)
        if (std::abs(a.times[k] - b.times[k]) > 1e-12 * std::max(1.0, std::abs(a.times[k])))
            throw InvalidArgument("difference: time grids differ");
    Trajectory d;
    d.grid = a.grid;
    d.dt = a.dt;
    d.times = a.times;
    for (std::size_t k = 0; k < a.states.size(); ++k) d.states.push_back(a.states[k] - b.states[k]);
    return d;
}

std::vector<DependencePoint> continuous_dependence_probe(const OperatorSpec& spec, const ScalarField& u0,
                                                         const std::vector<ScalarField>& perturbations, double T,
                                                         double dt, double tol, int threads) {
    const auto base = solve_quasilinear(spec, u0, T, dt, tol);
    std::vector<DependencePoint> out(perturbations.size());
    std::atomic<std::size_t> next{0};
    auto worker = [&] {
        for (std::size_t i = next++; i < perturbations.size(); i = next++) {
            auto& pt = out[i];
            const auto& delta = perturbations[i];
            try {
                pt.input_distance = sobolev_norm(delta, 2 * spec.p);
                const auto s = solve_quasilinear(spec, u0 + delta, T, dt, tol);
                if (std::abs(s.horizon - base.horizon) > 1e-12)
                    throw SolverError("perturbed solve reached a shorter horizon");
                pt.output_distance = parabolic_norm(difference(s.trajectory, base.trajectory), 1, spec.p);
            } catch (const std::exception& e) {
                pt.failed = true;
                pt.error = e.what();
            }
        }
    };
    const int n = std::max(1, std::min<int>(threads, static_cast<int>(perturbations.size())));
    std::vector<std::thread> pool;
    for (int i = 1; i < n; ++i) pool.emplace_back(worker);
    worker();
    for (auto& t : pool) t.join();
    return out;
}

}  // namespace qlp
