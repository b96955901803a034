#include <gtest/gtest.h>

#include <cmath>

#include "qlp/analysis.hpp"
#include "qlp/error.hpp"
#include "qlp/jet.hpp"

using namespace qlp;

namespace {

ScalarField trig(const TorusGrid& g, double amp, int k) {
    return ScalarField::sample(g, [=](const std::array<double, 3>& x) { return amp * std::sin(k * x[0]); });
}

}  // namespace

TEST(Jet, ReactionDiffusionMatchesSymbolicDerivatives) {
    const auto g = make_grid(1, {16});
    const auto jet = build_jet(make_scalar_operator(1, 1, {"1"}, "u^2"), trig(g, 1, 1), 3);
    ASSERT_EQ(jet.m(), 3);
    for (std::size_t i = 0; i < g.size(); ++i) {
        const double x = g.coordinate(i, 0), s = std::sin(x);
        EXPECT_NEAR(jet.a[1][i], -s + s * s, 1e-12);
        EXPECT_NEAR(jet.a[2][i], s + 2 * std::cos(2 * x) - 2 * s * s + 2 * s * s * s, 1e-10);
    }
}

TEST(Jet, HeatCoefficientsAlternate) {
    const auto g = make_grid(1, {16});
    const auto u0 = trig(g, 1, 1);
    const auto jet = build_jet(make_scalar_operator(1, 1, {"1"}, "0"), u0, 6);
    // Roundoff in the top mode grows by k_max^2 = 64 per order.
    for (int l = 0; l < 6; ++l)
        EXPECT_LT((jet.a[static_cast<std::size_t>(l)] - std::pow(-1.0, l) * u0).max_abs(), 1e-14 * std::pow(64.0, l));
    // 1 - 0.1 + 0.005 at m = 3
    const auto u_tilde = evaluate_u_tilde(build_jet(make_scalar_operator(1, 1, {"1"}, "0"), u0, 3), 0.1);
    EXPECT_LT((u_tilde - 0.905 * u0).max_abs(), 1e-14);
}

TEST(Jet, BiharmonicCoefficients) {
    const auto g = make_grid(1, {16});
    const auto u0 = trig(g, 1, 2);
    const auto jet = build_jet(make_scalar_operator(2, 1, {"1", "1"}, "0"), u0, 4);
    for (int l = 0; l < 4; ++l) {
        const double f = std::pow(-16.0, l);
        // Roundoff in the top mode grows by k_max^4 = 4096 per order.
        EXPECT_LT((jet.a[static_cast<std::size_t>(l)] - f * u0).max_abs(), 1e-14 * std::pow(4096.0, l));
    }
}

TEST(Jet, TimeDependentCoefficient) {
    // u = exp(-(t + t^2/2)) sin x solves u_t = (1 + t) u_xx: derivatives -1, 0, 2 at t = 0.
    const auto g = make_grid(1, {16});
    const auto u0 = trig(g, 1, 1);
    const auto jet = build_jet(make_scalar_operator(1, 1, {"1 + t"}, "0"), u0, 4);
    EXPECT_LT((jet.a[1] + u0).max_abs(), 1e-13);
    EXPECT_LT(jet.a[2].max_abs(), 1e-12);
    EXPECT_LT((jet.a[3] - 2.0 * u0).max_abs(), 1e-10);
}

TEST(Jet, TruncationIsConsistent) {
    const auto g = make_grid(1, {32});
    const auto spec = make_scalar_operator(1, 1, {"1 + u^2"}, "u*d1u");
    const auto u0 = trig(g, 0.5, 1);
    const auto short_jet = build_jet(spec, u0, 3), long_jet = build_jet(spec, u0, 5);
    for (int l = 0; l < 3; ++l)
        EXPECT_EQ((short_jet.a[static_cast<std::size_t>(l)] - long_jet.a[static_cast<std::size_t>(l)]).max_abs(), 0.0);
}

TEST(Jet, SeriesApplyMatchesPlainApplyAtLeadingOrder) {
    const auto g = make_grid(1, {16});
    const auto spec = make_scalar_operator(1, 1, {"1 + u^2"}, "sin(u)");
    const auto u0 = trig(g, 0.7, 1);
    TimeSeriesField s{{u0, trig(g, 0.2, 2)}, 0.0};
    const auto q = series_apply_Q(spec, s);
    EXPECT_LT((q.coeffs[0] - apply_Q(spec, StateJet::of(u0, 0, 1), u0).value).max_abs(), 1e-13);
}

TEST(Jet, SeriesApplyMatchesTimeDifference) {
    // d/dt Q[u0 + t u1] at t = 0 from a centered difference.
    const auto g = make_grid(1, {16});
    const auto spec = make_scalar_operator(1, 1, {"1 + u^2"}, "u^3");
    const auto u0 = trig(g, 0.7, 1), u1 = trig(g, 0.3, 3);
    const auto q = series_apply_Q(spec, TimeSeriesField{{u0, u1}, 0.0});
    const double h = 1e-5;
    ScalarField up = u0, um = u0;
    up.add_scaled(h, u1);
    um.add_scaled(-h, u1);
    ScalarField fd = apply_Q(spec, StateJet::of(up, h, 1), up).value - apply_Q(spec, StateJet::of(um, -h, 1), um).value;
    fd *= 1.0 / (2 * h);
    EXPECT_LT((q.coeffs[1] - fd).max_abs(), 1e-7);
}

TEST(Jet, DefaultOrderAndValidation) {
    EXPECT_EQ(default_jet_order(1, 1), 2);
    EXPECT_EQ(default_jet_order(6, 1), 3);
    EXPECT_EQ(default_jet_order(3, 1), std::max(2, min_order(3, 1)));
    const auto g = make_grid(1, {8});
    EXPECT_THROW(build_jet(make_scalar_operator(1, 1, {"1"}, "0"), trig(g, 1, 1), 0), InvalidArgument);
}

TEST(Jet, FlagsUnderResolvedCoefficients) {
    const auto g = make_grid(1, {16});
    const auto jet = build_jet(make_scalar_operator(1, 1, {"1"}, "0"), trig(g, 1, 7), 2);
    EXPECT_FALSE(jet.under_resolved.empty());
    const auto ok = build_jet(make_scalar_operator(1, 1, {"1"}, "0"), trig(g, 1, 1), 2);
    EXPECT_TRUE(ok.under_resolved.empty());
    EXPECT_NEAR(ok.sobolev_norms[0], std::sqrt(3 * std::numbers::pi), 1e-12);
}

TEST(Jet, AssembledStateCarriesSpatialDerivatives) {
    const auto g = make_grid(1, {16});
    const auto jet = build_jet(make_scalar_operator(2, 1, {"1", "1"}, "0"), trig(g, 1, 1), 3);
    const auto st = assemble_u_tilde(jet, 0.05, 2);
    ASSERT_EQ(st.order(), 4);
    EXPECT_LT(st.consistency_error(), 1e-12);
}
