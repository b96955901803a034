#include <gtest/gtest.h>

#include <Eigen/Dense>
#include <cmath>
#include <complex>
#include <numbers>
#include <random>

#include "qlp/error.hpp"
#include "qlp/linear_solver.hpp"

using namespace qlp;
using std::numbers::pi;

namespace {

FrozenLinearOperator frozen(const OperatorSpec& spec, const TorusGrid& g, double T, double dt) {
    std::vector<StateJet> refs;
    for (double t : time_grid(T, dt)) refs.push_back(StateJet::of(ScalarField(g), t, spec.p));
    return freeze_coefficients(spec, refs);
}

ScalarField sine(const TorusGrid& g, int k, double amp = 1.0) {
    return ScalarField::sample(g, [=](const std::array<double, 3>& x) { return amp * std::sin(k * x[0]); });
}

// Independent dense construction of v -> trunc(a * pad(v_xx)) on N nodes
// with explicit DFT sums and 3/2 padding.
Eigen::MatrixXd dealiased_variable_laplacian(int N, double (*a)(double)) {
    using C = std::complex<double>;
    const int M = (3 * N + 1) / 2 + ((3 * N + 1) / 2) % 2;
    Eigen::MatrixXd L(N, N);
    for (int col = 0; col < N; ++col) {
        std::vector<C> c(static_cast<std::size_t>(N));  // index k + N/2
        for (int k = -N / 2; k < N / 2; ++k) {
            const double x = 2 * pi * col / N;
            c[static_cast<std::size_t>(k + N / 2)] = std::exp(C(0, -k * x)) / double(N) * double(-k * k);
        }
        std::vector<C> fine(static_cast<std::size_t>(M), 0.0);  // index k + M/2
        for (int k = -N / 2 + 1; k < N / 2; ++k) fine[static_cast<std::size_t>(k + M / 2)] = c[static_cast<std::size_t>(k + N / 2)];
        fine[static_cast<std::size_t>(-N / 2 + M / 2)] = 0.5 * c[0];
        fine[static_cast<std::size_t>(N / 2 + M / 2)] = 0.5 * c[0];
        std::vector<double> vals(static_cast<std::size_t>(M));
        for (int j = 0; j < M; ++j) {
            const double X = 2 * pi * j / M;
            C s = 0.0;
            for (int k = -M / 2; k < M / 2; ++k) s += fine[static_cast<std::size_t>(k + M / 2)] * std::exp(C(0, k * X));
            vals[static_cast<std::size_t>(j)] = s.real() * a(X);
        }
        std::vector<C> back(static_cast<std::size_t>(M));
        for (int k = -M / 2; k < M / 2; ++k) {
            C s = 0.0;
            for (int j = 0; j < M; ++j) s += vals[static_cast<std::size_t>(j)] * std::exp(C(0, -k * 2 * pi * j / M));
            back[static_cast<std::size_t>(k + M / 2)] = s / double(M);
        }
        std::vector<C> coarse(static_cast<std::size_t>(N));
        for (int k = -N / 2 + 1; k < N / 2; ++k) coarse[static_cast<std::size_t>(k + N / 2)] = back[static_cast<std::size_t>(k + M / 2)];
        coarse[0] = back[static_cast<std::size_t>(-N / 2 + M / 2)] + back[static_cast<std::size_t>(N / 2 + M / 2)];
        for (int row = 0; row < N; ++row) {
            const double x = 2 * pi * row / N;
            C s = 0.0;
            for (int k = -N / 2; k < N / 2; ++k) s += coarse[static_cast<std::size_t>(k + N / 2)] * std::exp(C(0, k * x));
            L(row, col) = s.real();
        }
    }
    return L;
}

}  // namespace

TEST(TimeGrid, RequiresIntegralStepCount) {
    EXPECT_EQ(time_grid(0.1, 1e-3).size(), 101u);
    EXPECT_DOUBLE_EQ(time_grid(0.1, 1e-3).back(), 0.1);
    EXPECT_THROW(time_grid(0.1, 0.03), InvalidArgument);
    EXPECT_THROW(time_grid(0.1, 0.0), InvalidArgument);
}

TEST(LinearSolver, SingleStepAmplificationFactor) {
    const auto g = make_grid(1, {16});
    const double dt = 1e-2;
    const auto op = frozen(make_scalar_operator(1, 1, {"1"}, "0"), g, dt, dt);
    const auto u0 = sine(g, 1);
    const auto u1 = step_linear(op, u0, 0.0, dt);
    EXPECT_LT((u1 - (1 - dt / 2) / (1 + dt / 2) * u0).max_abs(), 1e-12);
}

TEST(LinearSolver, MatchesDenseCrankNicolsonOracle) {
    const int N = 16;
    const auto g = make_grid(1, {N});
    const double dt = 1e-2, T = 0.1;
    const auto op = frozen(make_scalar_operator(1, 1, {"1 + sin(x)^2"}, "0"), g, T, dt);
    const auto traj = solve_linear(op, sine(g, 2), T, dt);

    const auto L = dealiased_variable_laplacian(N, [](double x) { return 1 + std::sin(x) * std::sin(x); });
    const Eigen::MatrixXd I = Eigen::MatrixXd::Identity(N, N);
    const Eigen::PartialPivLU<Eigen::MatrixXd> lhs(I - 0.5 * dt * L);
    const Eigen::MatrixXd rhs = I + 0.5 * dt * L;
    Eigen::VectorXd u(N);
    for (int i = 0; i < N; ++i) u[i] = std::sin(2 * 2 * pi * i / N);
    for (std::size_t k = 1; k < traj.times.size(); ++k) {
        u = lhs.solve(rhs * u);
        for (int i = 0; i < N; ++i) EXPECT_NEAR(traj.states[k][static_cast<std::size_t>(i)], u[i], 1e-9);
    }
}

TEST(LinearSolver, FrozenApplierMatchesDenseOperator) {
    const int N = 12;
    const auto g = make_grid(1, {N});
    const auto op = frozen(make_scalar_operator(1, 1, {"1 + sin(x)^2"}, "0"), g, 0.1, 0.1);
    const FrozenApplier app(op, 0);
    const auto L = dealiased_variable_laplacian(N, [](double x) { return 1 + std::sin(x) * std::sin(x); });
    for (int col = 0; col < N; ++col) {
        ScalarField e(g);
        e[static_cast<std::size_t>(col)] = 1.0;
        const auto Le = app.apply(e);
        for (int row = 0; row < N; ++row) EXPECT_NEAR(Le[static_cast<std::size_t>(row)], L(row, col), 1e-11);
    }
    EXPECT_FALSE(app.constant_coefficient());
}

TEST(LinearSolver, ExactDecayOfHeatMode) {
    const auto g = make_grid(1, {16});
    const auto op = frozen(make_scalar_operator(1, 1, {"1"}, "0"), g, 0.1, 1e-3);
    const auto traj = solve_linear(op, sine(g, 1), 0.1, 1e-3);
    EXPECT_LT((traj.final_state() - std::exp(-0.1) * sine(g, 1)).max_abs(), 1e-7);
    for (int it : traj.stats.iterations) EXPECT_EQ(it, 1);
}

TEST(LinearSolver, SteadyStateIsPreserved) {
    const auto g = make_grid(1, {16});
    const auto op = frozen(make_scalar_operator(1, 1, {"1"}, "sin(x)"), g, 0.1, 1e-3);
    const auto traj = solve_linear(op, sine(g, 1), 0.1, 1e-3);
    EXPECT_LT((traj.final_state() - sine(g, 1)).max_abs(), 1e-12);
}

TEST(LinearSolver, Superposition) {
    const auto g = make_grid(1, {16});
    const auto op = frozen(make_scalar_operator(1, 1, {"2 + cos(x)"}, "0"), g, 0.05, 1e-3);
    const auto a = sine(g, 1), b = sine(g, 3, 0.5);
    const auto ua = solve_linear(op, a, 0.05, 1e-3).final_state();
    const auto ub = solve_linear(op, b, 0.05, 1e-3).final_state();
    const auto uab = solve_linear(op, 2.0 * a + (-3.0) * b, 0.05, 1e-3).final_state();
    // Each solve is exact only to the GMRES tolerance.
    EXPECT_LT((uab - (2.0 * ua + (-3.0) * ub)).max_abs(), 1e-9);
}

TEST(LinearSolver, TemporalOrderIsTwo) {
    const auto g = make_grid(1, {16});
    const auto spec = make_scalar_operator(1, 1, {"1"}, "0");
    std::vector<double> errs;
    for (double dt : {0.02, 0.01, 0.005}) {
        const auto traj = solve_linear(frozen(spec, g, 1.0, dt), sine(g, 2), 1.0, dt);
        errs.push_back((traj.final_state() - std::exp(-4.0) * sine(g, 2)).max_abs());
    }
    for (std::size_t i = 1; i < errs.size(); ++i) EXPECT_NEAR(std::log2(errs[i - 1] / errs[i]), 2.0, 0.1);
}

TEST(LinearSolver, BiharmonicDecay) {
    const auto g = make_grid(1, {16});
    const auto op = frozen(make_scalar_operator(2, 1, {"1", "1"}, "0"), g, 0.1, 1e-3);
    const auto traj = solve_linear(op, sine(g, 1), 0.1, 1e-3);
    EXPECT_LT((traj.final_state() - std::exp(-0.1) * sine(g, 1)).max_abs(), 1e-7);
}

TEST(LinearSolver, RejectsLossOfEllipticity) {
    const auto g = make_grid(1, {16});
    auto op = frozen(make_scalar_operator(1, 1, {"1"}, "0"), g, 0.01, 1e-3);
    for (auto& v : op.A_field[3].component(0)) v = -1.0;
    EXPECT_THROW(solve_linear(op, sine(g, 1), 0.01, 1e-3), InvalidArgument);
}

TEST(LinearSolver, ValidatesShapes) {
    const auto g = make_grid(1, {16});
    auto op = frozen(make_scalar_operator(1, 1, {"1"}, "0"), g, 0.01, 1e-3);
    op.source.pop_back();
    EXPECT_THROW(op.validate(), InvalidArgument);
    auto op2 = frozen(make_scalar_operator(1, 1, {"1"}, "0"), g, 0.01, 1e-3);
    EXPECT_THROW(solve_linear(op2, sine(g, 1), 0.02, 1e-3), InvalidArgument);
    EXPECT_THROW(solve_linear(op2, sine(make_grid(1, {8}), 1), 0.01, 1e-3), InvalidArgument);
}

TEST(Gmres, SolvesNonsymmetricSystem) {
    const int n = 40;
    std::mt19937_64 rng(1);
    std::normal_distribution<double> d(0.0, 1.0);
    Eigen::MatrixXd A = Eigen::MatrixXd::Identity(n, n) * 4.0;
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) A(i, j) += 0.3 * d(rng) / std::sqrt(double(n));
    Eigen::VectorXd b(n);
    for (int i = 0; i < n; ++i) b[i] = d(rng);
    std::vector<double> x(n, 0.0);
    const LinearMap apply = [&](std::span<const double> in, std::span<double> out) {
        Eigen::Map<Eigen::VectorXd>(out.data(), n) = A * Eigen::Map<const Eigen::VectorXd>(in.data(), n);
    };
    const LinearMap identity = [](std::span<const double> in, std::span<double> out) {
        std::copy(in.begin(), in.end(), out.begin());
    };
    const auto res = gmres(apply, identity, std::span<const double>(b.data(), n), x);
    const Eigen::VectorXd ref = A.partialPivLu().solve(b);
    for (int i = 0; i < n; ++i) EXPECT_NEAR(x[static_cast<std::size_t>(i)], ref[i], 1e-9);
    EXPECT_LE(res.relative_residual, 1e-10);

    std::vector<double> zero(n, 0.0), x0(n, 1.0);
    EXPECT_EQ(gmres(apply, identity, zero, x0).iterations, 0);
    EXPECT_EQ(x0, zero);
}

TEST(Gmres, ThrowsAtIterationCap) {
    const int n = 50;
    // Cyclic shift: Krylov residual stalls until n iterations.
    const LinearMap shift = [n](std::span<const double> in, std::span<double> out) {
        for (int i = 0; i < n; ++i) out[static_cast<std::size_t>((i + 1) % n)] = in[static_cast<std::size_t>(i)];
    };
    const LinearMap identity = [](std::span<const double> in, std::span<double> out) {
        std::copy(in.begin(), in.end(), out.begin());
    };
    std::vector<double> b(n, 0.0), x(n, 0.0);
    b[0] = 1.0;
    GmresOptions opt;
    opt.max_iterations = 10;
    opt.restart = 5;
    EXPECT_THROW(gmres(shift, identity, b, x, opt), KrylovError);
}
