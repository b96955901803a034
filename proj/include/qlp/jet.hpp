#pragma once

// Compatible initial time-jet a_0, ..., a_{m-1} by truncated power series in t,
// and the polynomial u~_0(x,t) = sum a_l(x) t^l / l!.

#include <vector>

#include "qlp/operator.hpp"

namespace qlp {

/// Time derivatives at t0 (derivative values, not divided by l!).
struct TimeSeriesField {
    std::vector<ScalarField> coeffs;
    double t0 = 0.0;

    int order() const { return static_cast<int>(coeffs.size()); }
    const TorusGrid& grid() const { return coeffs.front().grid(); }
};

struct TimeJet {
    std::vector<ScalarField> a;
    /// ||a_l||_{W^{2p,2}} per coefficient.
    std::vector<double> sobolev_norms;
    /// a_l whose top-band spectral energy exceeds 10%.
    std::vector<int> under_resolved;

    int m() const { return static_cast<int>(a.size()); }
};

/// Series of t -> Q[u(., t)] through the order of `u_series`, including forcing.
TimeSeriesField series_apply_Q(const CompiledOperator& op, const TimeSeriesField& u_series);
TimeSeriesField series_apply_Q(const OperatorSpec& spec, const TimeSeriesField& u_series);

/// a_0 = u0, a_{l+1} = l-th coefficient of series_apply_Q on (a_0..a_l).
TimeJet build_jet(const CompiledOperator& op, const ScalarField& u0, int m);
TimeJet build_jet(const OperatorSpec& spec, const ScalarField& u0, int m);

/// max(2, min_order(n, p)).
int default_jet_order(int n, int p);

/// u~_0(., t).
ScalarField evaluate_u_tilde(const TimeJet& jet, double t);
/// u~_0(., t) and its spatial derivatives through order 2p-1.
StateJet assemble_u_tilde(const TimeJet& jet, double t, int p);

}  // namespace qlp
