#pragma once

// Full quasilinear problem u_t = Q[u], u(0) = u0, solved by Newton on the
// Crank-Nicolson residual starting from the frozen-coefficient solution w
// built on the compatible time-jet.

#include <optional>
#include <string>
#include <vector>

#include "qlp/jet.hpp"
#include "qlp/linear_solver.hpp"

namespace qlp {

/// r_k = (u_{k+1} - u_k)/dt - (Q_{k+1}[u_{k+1}] + Q_k[u_k]) / 2, one per interval.
std::vector<ScalarField> discrete_residual(const CompiledOperator& op, const Trajectory& traj);
/// (sum_k dt ||r_k||^2_{L2})^(1/2)
double residual_norm(const std::vector<ScalarField>& residual, double dt);

struct LinearizationAt {
    Trajectory base;
    /// A(base) per time node, on the padded evaluation grid.
    std::vector<TensorField> A_tilde;
    /// Per time node, R~_k of rank k = 0..2p-1 on the evaluation grid.
    std::vector<std::vector<TensorField>> R_tilde;

    /// Frozen operator with these coefficients and the given interval sources.
    FrozenLinearOperator as_operator(int p, std::vector<ScalarField> source, double floor) const;
};

LinearizationAt linearize_F(const OperatorSpec& spec, const Trajectory& base);

/// Largest pointwise mismatch, over all time nodes, between the central
/// difference of u -> A(u).grad^{2p}u + b(u) along `direction` and the
/// linearization at `base` applied to the perturbation actually formed.
double directional_derivative_check(const OperatorSpec& spec, const Trajectory& base, const Trajectory& direction,
                                    double h);

struct NewtonOptions {
    /// Jet order; 0 selects default_jet_order.
    int m = 0;
    int max_iterations = 12;
    int max_halvings = 6;
    /// Start from the frozen solution w (otherwise from u0 held constant in time).
    bool start_from_w = true;
};

struct Solution {
    Trajectory trajectory;
    /// Space-time residual norm per outer iteration; entry 0 is the starting point.
    std::vector<double> newton_history;
    double horizon = 0.0;
    int halvings = 0;
    TimeJet jet;
    bool converged = false;

    int iterations() const { return static_cast<int>(newton_history.size()); }
};

/// Applies the cutoff when the operator reads the state and none is applied yet.
OperatorSpec prepare_spec(const OperatorSpec& spec, const ScalarField& u0);

Solution solve_quasilinear(const OperatorSpec& spec, const ScalarField& u0, double T, double dt, double tol,
                           const NewtonOptions& options = {});

/// Damped fixed-point iteration u <- u + relaxation (solve_linear(freeze(u)) - u).
Solution solve_picard(const OperatorSpec& spec, const ScalarField& u0, double T, double dt, double tol,
                      double relaxation = 0.5, int max_iterations = 400);

struct DependencePoint {
    double input_distance = 0.0;   // ||delta||_{W^{2p,2}}
    double output_distance = 0.0;  // discrete P^1 distance of the solutions
    bool failed = false;
    std::string error;
};

std::vector<DependencePoint> continuous_dependence_probe(const OperatorSpec& spec, const ScalarField& u0,
                                                         const std::vector<ScalarField>& perturbations, double T,
                                                         double dt, double tol, int threads = 1);

/// Difference of two trajectories on the same grids.
Trajectory difference(const Trajectory& a, const Trajectory& b);

}  // namespace qlp
