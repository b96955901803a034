#include "qlp/jet.hpp"

#include <algorithm>
#include <cmath>

#include "qlp/analysis.hpp"
#include "qlp/error.hpp"
#include "qlp/kernels.hpp"

namespace qlp {

namespace {

double factorial(int k) { return std::tgamma(k + 1.0); }

}  // namespace

TimeSeriesField series_apply_Q(const CompiledOperator& op, const TimeSeriesField& u_series) {
    const int K = u_series.order();
    if (K < 1) throw InvalidArgument("series_apply_Q: series order must be >= 1");
    const auto& grid = u_series.grid();
    if (grid.dims() != op.spec().dims) throw InvalidArgument("series_apply_Q: dimension mismatch");
    const auto fine = grid.padded();
    const std::size_t n = fine.size();

    // Normalized Taylor coefficients c_l = a_l / l! in spectral form.
    std::vector<std::vector<Complex>> spectra;
    for (int l = 0; l < K; ++l) {
        auto c = spectral::forward(grid, u_series.coeffs[static_cast<std::size_t>(l)].values());
        for (auto& v : c) v /= factorial(l);
        spectra.push_back(std::move(c));
    }
    auto derivative_series = [&](const MultiIndex& index) {
        expr::Series s;
        for (int l = 0; l < K; ++l) s.push_back(padded_derivative(grid, spectra[static_cast<std::size_t>(l)], index, fine));
        return s;
    };

    std::vector<std::pair<expr::Slot, expr::Series>> env;
    for (const auto& slot : op.jet_slots()) env.emplace_back(slot, derivative_series(slot.index));
    {
        expr::Series tser(static_cast<std::size_t>(K), std::vector<double>(n, 0.0));
        std::fill(tser[0].begin(), tser[0].end(), u_series.t0);
        if (K > 1) std::fill(tser[1].begin(), tser[1].end(), 1.0);
        env.emplace_back(expr::Slot::time(), std::move(tser));
    }
    for (int d = 0; d < grid.dims(); ++d) {
        std::vector<double> x(n);
        for (std::size_t i = 0; i < n; ++i) x[i] = fine.coordinate(i, d);
        env.emplace_back(expr::Slot::coord(d), expr::series::constant(x, K));
    }
    const expr::SlotSeries lookup = [&](const expr::Slot& s) -> const expr::Series& {
        for (const auto& [slot, ser] : env)
            if (slot == s) return ser;
        throw InvalidArgument("series_apply_Q: slot " + s.name() + " unavailable");
    };

    auto acc = expr::evaluate_series(op.spec().lower_order, lookup, n, K);
    for (const auto& term : op.top_terms()) {
        const auto coeff = expr::evaluate_series(term.coeff, lookup, n, K);
        const auto d = derivative_series(term.index);
        const auto prod = expr::series::mul(coeff, d);
        for (int l = 0; l < K; ++l) kernels::add(acc[static_cast<std::size_t>(l)], prod[static_cast<std::size_t>(l)], acc[static_cast<std::size_t>(l)]);
    }

    TimeSeriesField out;
    out.t0 = u_series.t0;
    for (int l = 0; l < K; ++l) {
        auto f = restrict_to(ScalarField(fine, std::move(acc[static_cast<std::size_t>(l)])), grid);
        f *= factorial(l);
        out.coeffs.push_back(std::move(f));
    }
    if (const auto& forcing = op.spec().forcing) {
        if (u_series.t0 != 0.0) throw InvalidArgument("series_apply_Q: forcing series are only available at t = 0");
        const auto ft = forcing->taylor(grid, K);
        for (int l = 0; l < K; ++l) out.coeffs[static_cast<std::size_t>(l)] += ft[static_cast<std::size_t>(l)];
    }
    return out;
}

TimeSeriesField series_apply_Q(const OperatorSpec& spec, const TimeSeriesField& u_series) {
    return series_apply_Q(CompiledOperator(spec), u_series);
}

TimeJet build_jet(const CompiledOperator& op, const ScalarField& u0, int m) {
    if (m < 1) throw InvalidArgument("build_jet: m must be >= 1");
    TimeJet jet;
    jet.a.push_back(u0);
    for (int l = 0; l + 1 < m; ++l) {
        TimeSeriesField s{jet.a, 0.0};
        auto q = series_apply_Q(op, s);
        jet.a.push_back(std::move(q.coeffs[static_cast<std::size_t>(l)]));
    }
    const int p = op.spec().p;
    for (int l = 0; l < m; ++l) {
        const auto& a = jet.a[static_cast<std::size_t>(l)];
        jet.sobolev_norms.push_back(sobolev_norm(a, 2 * p));
        if (spectral::top_band_energy_fraction(a) > 0.1) jet.under_resolved.push_back(l);
    }
    return jet;
}

TimeJet build_jet(const OperatorSpec& spec, const ScalarField& u0, int m) {
    return build_jet(CompiledOperator(spec), u0, m);
}

int default_jet_order(int n, int p) { return std::max(2, min_order(n, p)); }

ScalarField evaluate_u_tilde(const TimeJet& jet, double t) {
    ScalarField u = jet.a.front();
    double w = 1.0;
    for (int l = 1; l < jet.m(); ++l) {
        w *= t / l;
        u.add_scaled(w, jet.a[static_cast<std::size_t>(l)]);
    }
    return u;
}

StateJet assemble_u_tilde(const TimeJet& jet, double t, int p) {
    return StateJet::of(evaluate_u_tilde(jet, t), t, p);
}

}  // namespace qlp
