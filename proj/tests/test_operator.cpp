#include <gtest/gtest.h>

#include <cmath>

#include "qlp/error.hpp"
#include "qlp/operator.hpp"

using namespace qlp;

namespace {

ScalarField sample(const TorusGrid& g, double (*f)(double, double)) {
    return ScalarField::sample(g, [f](const std::array<double, 3>& x) { return f(x[0], x[1]); });
}

}  // namespace

TEST(OperatorSpec, ValidationErrors) {
    EXPECT_THROW(make_scalar_operator(0, 1, {}, "0"), InvalidArgument);
    EXPECT_THROW(make_scalar_operator(1, 1, {"1", "1"}, "0"), InvalidArgument);
    EXPECT_THROW(make_scalar_operator(1, 1, {"1"}, "d2u"), InvalidArgument);
    EXPECT_NO_THROW(make_scalar_operator(1, 1, {"1"}, "d1u^2"));
    OperatorSpec spec = make_scalar_operator(1, 2, {"1"}, "0");
    spec.factors[0][1] = expr::parse("u", {2, 1});
    EXPECT_THROW(spec.validate(), InvalidArgument);  // not symmetric
}

TEST(SortedIndices, CountsMultisets) {
    EXPECT_EQ(sorted_indices(1, 4).size(), 1u);
    EXPECT_EQ(sorted_indices(2, 2).size(), 3u);
    EXPECT_EQ(sorted_indices(3, 2).size(), 6u);
    EXPECT_EQ(sorted_indices(3, 4).size(), 15u);
    int total = 0;
    for (const auto& S : sorted_indices(3, 3)) total += expr::multiplicity(S);
    EXPECT_EQ(total, 27);
}

TEST(ApplyQ, HeatAndBiharmonicOnEigenfunctions) {
    const auto g = make_grid(1, {16});
    const auto u = ScalarField::sample(g, [](auto x) { return std::sin(3 * x[0]); });
    const auto heat = apply_Q(make_scalar_operator(1, 1, {"1"}, "0"), StateJet::of(u, 0, 1), u).value;
    const auto bih = apply_Q(make_scalar_operator(2, 1, {"1", "1"}, "0"), StateJet::of(u, 0, 2), u).value;
    for (std::size_t i = 0; i < g.size(); ++i) {
        EXPECT_NEAR(heat[i], -9 * u[i], 1e-12);
        EXPECT_NEAR(bih[i], -81 * u[i], 1e-11);
    }
}

TEST(ApplyQ, QuasilinearProductIsDealiased) {
    const auto g = make_grid(1, {16});
    const auto u = ScalarField::sample(g, [](auto x) { return std::sin(x[0]); });
    const auto spec = make_scalar_operator(1, 1, {"1 + u^2"}, "u^2");
    const auto q = apply_Q(spec, StateJet::of(u, 0, 1), u);
    for (std::size_t i = 0; i < g.size(); ++i) {
        const double s = u[i];
        EXPECT_NEAR(q.value[i], -(1 + s * s) * s + s * s, 1e-13);
    }
    EXPECT_FALSE(q.under_resolved);
}

TEST(ApplyQ, AnisotropicMatrixFactor) {
    const auto g = make_grid(2, {8, 8});
    OperatorSpec spec = make_scalar_operator(1, 2, {"1"}, "0");
    spec.factors[0] = {expr::constant(2.0), expr::constant(0.5), expr::constant(0.5), expr::constant(1.0)};
    const auto u = sample(g, [](double x, double y) { return std::sin(x) * std::cos(2 * y); });
    const auto q = apply_Q(spec, StateJet::of(u, 0, 1), u).value;
    // 2 u_xx + 2 * 0.5 u_xy + u_yy
    const auto expected = sample(g, [](double x, double y) {
        return -2 * std::sin(x) * std::cos(2 * y) - std::cos(x) * 2 * std::sin(2 * y) * 1.0 - 4 * std::sin(x) * std::cos(2 * y);
    });
    EXPECT_LT((q - expected).max_abs(), 1e-12);
}

TEST(ApplyQ, ProductStructureGivesBilaplacianIn2D) {
    const auto g = make_grid(2, {8, 8});
    const auto spec = make_scalar_operator(2, 2, {"1", "1"}, "0");
    const auto u = sample(g, [](double x, double y) { return std::sin(x + y); });
    const auto q = apply_Q(spec, StateJet::of(u, 0, 2), u).value;
    for (std::size_t i = 0; i < g.size(); ++i) EXPECT_NEAR(q[i], -4 * u[i], 1e-11);
}

TEST(AssembleA, FactorTensorProduct) {
    const auto g = make_grid(1, {8});
    const auto u = ScalarField::sample(g, [](auto x) { return 0.5 * std::sin(x[0]); });
    const auto A = assemble_A(make_scalar_operator(2, 1, {"1 + u^2", "2"}, "0"), StateJet::of(u, 0, 2));
    ASSERT_EQ(A.rank(), 4);
    for (std::size_t i = 0; i < g.size(); ++i) EXPECT_NEAR(A.component(0)[i], -2 * (1 + u[i] * u[i]), 1e-14);
}

TEST(CompiledOperator, CollapsesOntoSortedIndices) {
    const CompiledOperator op(make_scalar_operator(1, 2, {"1 + u^2"}, "d1u_1"));
    // Diagonal factor: only (0,0) and (1,1) carry weight.
    ASSERT_EQ(op.top_terms().size(), 2u);
    EXPECT_TRUE(op.depends_on_state());
    EXPECT_EQ(op.jet_slots().size(), 2u);
    for (const auto& d : op.slot_derivatives()) {
        if (d.slot == expr::Slot::value()) EXPECT_FALSE(expr::is_zero(d.d_top[0]));
        else EXPECT_TRUE(expr::is_constant(d.d_lower));
    }
}

TEST(Ellipticity, ConstantAndStateDependentFloors) {
    EXPECT_NEAR(check_ellipticity(make_scalar_operator(1, 1, {"1"}, "0"), 2.0, 64).lambda, 1.0, 1e-14);
    EXPECT_NEAR(check_ellipticity(make_scalar_operator(1, 1, {"1 + u^2"}, "0"), 2.0, 64).lambda, 1.0, 1e-14);
    EXPECT_NEAR(check_ellipticity(make_scalar_operator(1, 1, {"2 - u^2"}, "0"), 1.0, 64).lambda, 1.0, 1e-12);
}

TEST(Ellipticity, ReportsViolatingSample) {
    try {
        check_ellipticity(make_scalar_operator(1, 1, {"1 - u^2"}, "0"), 2.0, 64, 3);
        FAIL() << "expected NotElliptic";
    } catch (const NotElliptic& e) {
        EXPECT_LE(e.sample().min_eigenvalue, 0.0);
        EXPECT_FALSE(e.sample().slots.empty());
    }
}

TEST(Cutoff, InactiveInsideBallAndEllipticOutside) {
    const auto g = make_grid(1, {16});
    const auto spec = make_scalar_operator(1, 1, {"1 + u^2"}, "u^3");
    const auto u = ScalarField::sample(g, [](auto x) { return 0.3 * std::sin(x[0]); });
    const double size = jet_size(u, 1);
    EXPECT_NEAR(size, 0.3 * std::sqrt(2.0), 1e-3);
    const auto cut = apply_cutoff(spec, 2.0, u);
    EXPECT_TRUE(cut.cutoff_applied);
    EXPECT_DOUBLE_EQ(cut.cutoff_radius, 4.0);
    const auto a = apply_Q(spec, StateJet::of(u, 0, 1), u).value;
    const auto b = apply_Q(cut, StateJet::of(u, 0, 1), u).value;
    EXPECT_LT((a - b).max_abs(), 1e-14);
    // Far outside the ball the operator reverts to the Laplacian.
    const auto big = ScalarField::sample(g, [](auto x) { return 10 + std::sin(x[0]); });
    const auto q = apply_Q(cut, StateJet::of(big, 0, 1), big).value;
    for (std::size_t i = 0; i < g.size(); ++i) EXPECT_NEAR(q[i], -std::sin(g.coordinate(i, 0)), 1e-12);
    EXPECT_GT(check_ellipticity(cut, 50.0, 256).lambda, 0.0);
    EXPECT_THROW(apply_cutoff(spec, 0.1, u), InvalidArgument);
}

TEST(SlotEnvironment, ProvidesSortedJetComponents) {
    const auto g = make_grid(2, {8, 8});
    const auto u = sample(g, [](double x, double y) { return std::sin(x) * std::sin(y); });
    const auto slot = expr::Slot::jet({0, 1});
    const SlotEnvironment env(g, StateJet::of(u, 0, 2), {slot});
    const auto v = env(slot);
    for (std::size_t i = 0; i < g.size(); ++i)
        EXPECT_NEAR(v[i], std::cos(g.coordinate(i, 0)) * std::cos(g.coordinate(i, 1)), 1e-12);
}
