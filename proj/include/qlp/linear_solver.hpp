#pragma once

// Frozen-coefficient linear problem
//   u_t = A(x,t) . grad^{2p} u + sum_k R_k(x,t) . grad^k u + b(x,t)
// advanced by Crank-Nicolson with a preconditioned GMRES implicit solve.

#include <vector>

#include "qlp/gmres.hpp"
#include "qlp/operator.hpp"

namespace qlp {

struct SolverStats {
    std::vector<int> iterations;      // GMRES iterations per step
    std::vector<double> residuals;    // final relative residual per step
};

struct Trajectory {
    TorusGrid grid;
    std::vector<double> times;
    std::vector<ScalarField> states;
    double dt = 0.0;
    SolverStats stats;

    std::size_t steps() const { return times.empty() ? 0 : times.size() - 1; }
    const ScalarField& final_state() const { return states.back(); }
};

/// Uniform time grid 0, dt, ..., T. Rejects T/dt farther than 1e-9 from an integer.
std::vector<double> time_grid(double T, double dt);

struct FrozenLinearOperator {
    int p = 1;
    TorusGrid grid;
    /// Grid the coefficient fields live on (3/2-padded `grid`).
    TorusGrid eval_grid;
    std::vector<double> times;
    /// Rank-2p tensor per time node, on eval_grid.
    std::vector<TensorField> A_field;
    /// Per time node, tensors of rank 0..2p-1 on eval_grid; an empty list means R = 0.
    std::vector<std::vector<TensorField>> R_fields;
    /// Per interval [t_k, t_{k+1}], on grid.
    std::vector<ScalarField> source;
    double ellipticity_floor = 1.0;

    void validate() const;
    /// Index of the time node equal to t (within 1e-12 * max(1, |t|)).
    std::size_t node_of(double t) const;
};

/// A = assemble_A(spec, reference(t_k)), R = 0, source = interval average of
/// b(reference) plus forcing.
FrozenLinearOperator freeze_coefficients(const OperatorSpec& spec, const std::vector<StateJet>& reference);

/// Linear operator L_k v on the grid, time node k (no source).
class FrozenApplier {
public:
    FrozenApplier(const FrozenLinearOperator& op, std::size_t node);

    ScalarField apply(const ScalarField& v) const;
    void apply(std::span<const double> v, std::span<double> out) const;
    /// Fourier symbol of the constant-coefficient part built from mean top coefficients.
    std::vector<Complex> mean_symbol() const;
    bool constant_coefficient() const { return constant_; }

private:
    struct Term {
        MultiIndex index;
        std::vector<double> coeff;  // on eval grid
        double mean = 0.0;
        bool top = false;
        bool uniform = false;  // spatially constant coefficient
    };
    const FrozenLinearOperator* op_;
    std::vector<Term> terms_;
    bool constant_ = true;
};

/// Rejects a frozen A whose symbol drops below (floor/2)^p on the unit sphere.
void check_frozen_ellipticity(const FrozenLinearOperator& op, std::size_t node);

/// One Crank-Nicolson step from t to t + dt.
ScalarField step_linear(const FrozenLinearOperator& op, const ScalarField& state, double t, double dt,
                        GmresResult* info = nullptr);

Trajectory solve_linear(const FrozenLinearOperator& op, const ScalarField& u0, double T, double dt);

}  // namespace qlp
