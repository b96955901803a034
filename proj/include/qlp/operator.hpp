#pragma once

// Quasilinear operator Q[u] = A(x,t,u,...,grad^{2p-1}u) . grad^{2p}u + b(...)
// with the product structure A = (-1)^{p-1} E_1 (x) ... (x) E_p.

#include <array>
#include <cstdint>
#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "qlp/expr.hpp"
#include "qlp/torus.hpp"

namespace qlp {

/// (u, grad u, ..., grad^{2p-1} u) at time t; entry k has rank k.
struct StateJet {
    double t = 0.0;
    std::vector<TensorField> derivatives;

    static StateJet of(const ScalarField& u, double t, int p);
    const TorusGrid& grid() const { return derivatives.front().grid(); }
    int order() const { return static_cast<int>(derivatives.size()); }
    const ScalarField value() const { return derivatives.front().as_scalar(); }
    /// Largest deviation of entry k from the k-th derivative of entry 0.
    double consistency_error() const;
};

/// Spectral interpolation of every entry onto a finer grid.
StateJet interpolate(const StateJet& state, const TorusGrid& fine);

/// Additive forcing f(x,t) that depends on position and time only.
struct Forcing {
    std::function<ScalarField(const TorusGrid&, double t)> at;
    /// Time derivatives d^l f/dt^l at t=0 for l < order.
    std::function<std::vector<ScalarField>(const TorusGrid&, int order)> taylor;
};

/// n x n matrix of coefficient expressions, row-major.
using FactorMatrix = std::vector<expr::Expr>;

struct OperatorSpec {
    int p = 1;
    int dims = 1;
    std::vector<FactorMatrix> factors;
    expr::Expr lower_order = expr::constant(0.0);
    /// The 2C threshold; a cutoff applied from it uses jet_bound = cutoff_radius / 2.
    double cutoff_radius = 4.0;
    double ellipticity_floor = 1.0;
    bool cutoff_applied = false;
    std::shared_ptr<const Forcing> forcing;

    /// Rejects malformed specs: factor count, shapes, asymmetry, jet slots of
    /// order >= 2p.
    void validate() const;
};

/// Factors given as scalar expressions times the identity.
OperatorSpec make_scalar_operator(int p, int dims, const std::vector<std::string>& factors,
                                  const std::string& lower_order, double cutoff_radius = 4.0);

/// All sorted multi-indices of length k over `dims` axes.
std::vector<MultiIndex> sorted_indices(int dims, int k);

/// Operator compiled for evaluation: the 2p-index contraction collapsed onto
/// sorted multi-indices, plus formal derivatives for the linearization.
class CompiledOperator {
public:
    explicit CompiledOperator(OperatorSpec spec);

    struct Term {
        MultiIndex index;  // sorted
        expr::Expr coeff;  // sum of A over orderings of `index`
    };
    struct SlotDerivative {
        expr::Slot slot;
        std::vector<expr::Expr> d_top;  // parallel to top_terms()
        expr::Expr d_lower;
    };

    const OperatorSpec& spec() const { return spec_; }
    const std::vector<Term>& top_terms() const { return top_; }
    const std::vector<SlotDerivative>& slot_derivatives() const { return derivs_; }
    /// Jet slots read by any coefficient.
    const std::vector<expr::Slot>& jet_slots() const { return jet_slots_; }
    bool depends_on_state() const { return !jet_slots_.empty(); }

private:
    OperatorSpec spec_;
    std::vector<Term> top_;
    std::vector<SlotDerivative> derivs_;
    std::vector<expr::Slot> jet_slots_;
};

/// Slot arrays on the evaluation grid (the 3/2-padded grid of the state).
class SlotEnvironment {
public:
    SlotEnvironment(const TorusGrid& eval_grid, const StateJet& state, const std::vector<expr::Slot>& needed);
    SlotEnvironment(const TorusGrid& eval_grid, const ScalarField& u, double t, const std::vector<expr::Slot>& needed);

    const TorusGrid& grid() const { return grid_; }
    double time() const { return t_; }
    std::span<const double> operator()(const expr::Slot& s) const;
    expr::SlotArrays arrays() const;
    std::vector<double> evaluate(const expr::Expr& e) const;

private:
    void add_coordinates();
    TorusGrid grid_;
    double t_ = 0.0;
    std::vector<double> time_;
    std::vector<std::pair<expr::Slot, std::vector<double>>> values_;
};

/// Spectral derivative of a coarse spectrum sampled on the fine grid.
std::vector<double> padded_derivative(const TorusGrid& coarse, std::span<const Complex> coeffs,
                                      std::span<const int> index, const TorusGrid& fine);

/// Pointwise A^{i1 j1 ... ip jp}(state) on the state grid.
TensorField assemble_A(const OperatorSpec& spec, const StateJet& state);

struct AppliedQ {
    ScalarField value;
    bool under_resolved = false;
    double top_band_fraction = 0.0;
};

/// A(state) . grad^{2p} u + b(state) (+ forcing), dealiased on the padded grid.
AppliedQ apply_Q(const OperatorSpec& spec, const StateJet& state, const ScalarField& u);
AppliedQ apply_Q(const CompiledOperator& op, const StateJet& state, const ScalarField& u);
/// Self-application Q[u] at time t.
AppliedQ apply_Q(const CompiledOperator& op, const ScalarField& u, double t);

struct EllipticitySample {
    std::array<double, 3> x{};
    double t = 0.0;
    std::vector<std::pair<std::string, double>> slots;
    int factor = 0;
    double min_eigenvalue = 0.0;
    std::vector<double> xi;
};

struct EllipticityCertificate {
    double lambda = 0.0;
    EllipticitySample worst;
    int samples_tested = 0;
};

class NotElliptic : public std::runtime_error {
public:
    NotElliptic(const std::string& msg, EllipticitySample sample)
        : std::runtime_error(msg), sample_(std::move(sample)) {}
    const EllipticitySample& sample() const { return sample_; }

private:
    EllipticitySample sample_;
};

/// min over sampled arguments (|u| <= L, |psi_k| <= L, t in [0, horizon]) of
/// the smallest eigenvalue of every factor. Corners of the box are always
/// included. Throws NotElliptic on a nonpositive minimum.
EllipticityCertificate check_ellipticity(const OperatorSpec& spec, double bound_L, int samples,
                                         std::uint64_t seed = 0, double horizon = 1.0);

/// sup over nodes of |u| + |grad u| + ... + |grad^{2p-1} u|.
double jet_size(const ScalarField& u, int p);

/// E -> I + chi(s)(E - I), b -> chi(s) b with chi = 1 on s <= jet_bound and
/// chi = 0 on s >= 2 jet_bound.
OperatorSpec apply_cutoff(const OperatorSpec& spec, double jet_bound);
/// As above, rejecting jet_bound below the measured initial jet size.
OperatorSpec apply_cutoff(const OperatorSpec& spec, double jet_bound, const ScalarField& u0);

}  // namespace qlp
