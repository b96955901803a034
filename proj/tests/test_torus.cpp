#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
#include <random>

#include "qlp/error.hpp"
#include "qlp/torus.hpp"

using namespace qlp;
using std::numbers::pi;

namespace {

ScalarField random_band_limited(const TorusGrid& g, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> d(0.0, 1.0);
    std::vector<double> v(g.size());
    for (auto& x : v) x = d(rng);
    // Drop the Nyquist content so the field is exactly representable on finer grids.
    auto c = spectral::forward(g, v);
    for (std::size_t s = 0; s < g.size(); ++s) {
        std::size_t rest = s;
        for (int ax = g.dims() - 1; ax >= 0; --ax) {
            const int slot = static_cast<int>(rest % static_cast<std::size_t>(g.modes(ax)));
            rest /= static_cast<std::size_t>(g.modes(ax));
            if (g.wavenumber(slot, ax) == -g.modes(ax) / 2) c[s] = 0.0;
        }
    }
    return ScalarField(g, spectral::inverse(g, c));
}

}  // namespace

TEST(TorusGrid, ValidatesShape) {
    EXPECT_THROW(make_grid(1, {15}), InvalidArgument);
    EXPECT_THROW(make_grid(0, {}), InvalidArgument);
    EXPECT_THROW(make_grid(4, {4, 4, 4, 4}), InvalidArgument);
    EXPECT_THROW(make_grid(2, {8}), InvalidArgument);
    const auto g = make_grid(2, {8, 4});
    EXPECT_EQ(g.size(), 32u);
    EXPECT_NEAR(g.volume(), 4 * pi * pi, 1e-12);
    EXPECT_EQ(g.padded().modes(), (std::vector<int>{12, 6}));
}

TEST(TorusGrid, WavenumbersCoverSymmetricBand) {
    const auto g = make_grid(1, {8});
    std::vector<int> k;
    for (int s = 0; s < 8; ++s) k.push_back(g.wavenumber(s, 0));
    EXPECT_EQ(k, (std::vector<int>{0, 1, 2, 3, -4, -3, -2, -1}));
}

TEST(Spectral, DerivativeOfTrigIsExact) {
    const auto g = make_grid(1, {16});
    const auto f = ScalarField::sample(g, [](auto x) { return std::sin(3 * x[0]); });
    const auto df = spectral_derivative(f, {0});
    const auto d3f = spectral_derivative(f, {0, 0, 0});
    for (std::size_t i = 0; i < g.size(); ++i) {
        const double x = g.coordinate(i, 0);
        EXPECT_NEAR(df[i], 3 * std::cos(3 * x), 1e-12);
        EXPECT_NEAR(d3f[i], -27 * std::cos(3 * x), 1e-11);
    }
}

TEST(Spectral, MixedDerivativeWithNonstandardPeriod) {
    const auto g = make_grid(2, {8, 16}, {2.0, 4 * pi});
    const auto f = ScalarField::sample(g, [](auto x) { return std::sin(pi * x[0]) * std::cos(1.5 * x[1]); });
    const auto fxy = spectral_derivative(f, {0, 1});
    for (std::size_t i = 0; i < g.size(); ++i) {
        const double x = g.coordinate(i, 0), y = g.coordinate(i, 1);
        EXPECT_NEAR(fxy[i], -pi * 1.5 * std::cos(pi * x) * std::sin(1.5 * y), 1e-12);
    }
}

TEST(Spectral, OddDerivativeAnnihilatesNyquist) {
    const auto g = make_grid(1, {8});
    const auto f = ScalarField::sample(g, [](auto x) { return std::cos(4 * x[0]); });
    EXPECT_LT(spectral_derivative(f, {0}).max_abs(), 1e-13);
    const auto f2 = spectral_derivative(f, {0, 0});
    for (std::size_t i = 0; i < g.size(); ++i) EXPECT_NEAR(f2[i], -16 * f[i], 1e-12);
}

TEST(Spectral, TruncateInvertsPad) {
    for (const auto& g : {make_grid(1, {16}), make_grid(2, {8, 6}), make_grid(3, {4, 6, 8})}) {
        const auto f = random_band_limited(g, 5);
        const auto fine = g.padded();
        const auto c = spectral::forward(g, f.values());
        const auto back = spectral::truncate(fine, g, spectral::pad(g, fine, c));
        ASSERT_EQ(back.size(), c.size());
        for (std::size_t i = 0; i < c.size(); ++i) EXPECT_NEAR(std::abs(back[i] - c[i]), 0.0, 1e-15);
        EXPECT_LT((restrict_to(interpolate(f, fine), g) - f).max_abs(), 1e-13);
    }
}

TEST(Spectral, NyquistContentSurvivesPadRoundTrip) {
    const auto g = make_grid(1, {8});
    const auto f = ScalarField::sample(g, [](auto x) { return std::cos(4 * x[0]) + std::sin(x[0]); });
    EXPECT_LT((restrict_to(interpolate(f, g.padded()), g) - f).max_abs(), 1e-14);
}

TEST(Spectral, InterpolationOfBandLimitedFieldIsSampling) {
    const auto g = make_grid(1, {16});
    const auto fine = make_grid(1, {40});
    const auto f = ScalarField::sample(g, [](auto x) { return std::sin(2 * x[0]) + 0.5 * std::cos(7 * x[0]); });
    const auto expected = ScalarField::sample(fine, [](auto x) { return std::sin(2 * x[0]) + 0.5 * std::cos(7 * x[0]); });
    EXPECT_LT((interpolate(f, fine) - expected).max_abs(), 1e-13);
}

TEST(Spectral, ParsevalAndSobolevNorms) {
    const auto g = make_grid(1, {16});
    const auto f = ScalarField::sample(g, [](auto x) { return std::sin(3 * x[0]); });
    EXPECT_NEAR(l2_norm(f), std::sqrt(pi), 1e-13);
    // |sin 3x|_{W^{2,2}}^2 = pi (1 + 9 + 81)
    EXPECT_NEAR(sobolev_norm(f, 2), std::sqrt(pi * 91), 1e-11);
    const auto h = ScalarField::sample(g, [](auto x) { return std::cos(3 * x[0]); });
    EXPECT_NEAR(l2_inner(f, h), 0.0, 1e-14);
}

TEST(Spectral, SobolevNormUsesFullTensorContraction) {
    const auto g = make_grid(2, {8, 8});
    const auto f = ScalarField::sample(g, [](auto x) { return std::sin(x[0] + 2 * x[1]); });
    // |grad f|^2 = 5 f'^2 ; |grad^2 f|^2 = (1 + 2*4 + 16) f^2 = 25 f^2
    const double l2 = 2 * pi * pi;
    EXPECT_NEAR(sobolev_norm(f, 2), std::sqrt(l2 * (1 + 5 + 25)), 1e-10);
}

TEST(Spectral, DivergenceOfGradientIsLaplacian) {
    const auto g = make_grid(2, {8, 8});
    const auto f = random_band_limited(g, 9);
    const auto lap = divergence(gradient_tensor(f, 1)).as_scalar();
    const auto expected = spectral_derivative(f, {0, 0}) + spectral_derivative(f, {1, 1});
    EXPECT_LT((lap - expected).max_abs(), 1e-11);
}

TEST(Spectral, GradientTensorIsSymmetric) {
    const auto g = make_grid(3, {4, 4, 4});
    const auto f = random_band_limited(g, 2);
    const auto H = gradient_tensor(f, 2);
    for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 3; ++j) {
            const int ij[2] = {i, j}, ji[2] = {j, i};
            const auto a = H.component(H.flat_index(ij)), b = H.component(H.flat_index(ji));
            for (std::size_t n = 0; n < a.size(); ++n) EXPECT_NEAR(a[n], b[n], 1e-12);
        }
}

TEST(Spectral, TopBandFractionFlagsHighModes) {
    const auto g = make_grid(1, {24});
    const auto low = ScalarField::sample(g, [](auto x) { return std::sin(x[0]); });
    const auto high = ScalarField::sample(g, [](auto x) { return std::sin(11 * x[0]); });
    EXPECT_LT(spectral::top_band_energy_fraction(low), 1e-20);
    EXPECT_NEAR(spectral::top_band_energy_fraction(high), 1.0, 1e-12);
}
