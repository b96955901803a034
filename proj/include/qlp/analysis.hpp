#pragma once

// Parabolic Sobolev norms and sampling-based checks of the coercivity,
// interpolation and embedding inequalities used by the existence theory.

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "qlp/linear_solver.hpp"

namespace qlp {

/// Finite-difference weights for the `order`-th derivative at `x0` on the
/// given nodes (Fornberg's recursion).
std::vector<double> fd_weights(double x0, const std::vector<double>& nodes, int order);

/// (sum over 2p j + k <= 2p m of int_0^T ||d_t^j grad^k f||^2 dt)^(1/2).
/// Time derivatives by second-order finite differences, space by Parseval,
/// trapezoid rule in time.
double parabolic_norm(const Trajectory& traj, int m, int p);

struct GardingCertificate {
    double sigma = 0.0;
    double C_const = 0.0;
    int samples_tested = 0;
    /// min over samples of (<-A grad^2p psi, psi> - sigma |psi|_{p,2}^2 + C |psi|^2) / |psi|_{p,2}^2
    double worst_margin = 0.0;
    /// Which sample attained the worst margin ("mode k=(..) cos", "random #i").
    std::string worst_sample;
    std::uint64_t seed = 0;

    bool valid() const { return worst_margin >= -1e-10; }
};

/// Checks -<psi, A(state).grad^{2p} psi> >= sigma ||psi||^2_{W^{p,2}} - C ||psi||^2
/// over every single Fourier mode of the grid and n_samples random unit-L2 psi.
GardingCertificate verify_garding(const OperatorSpec& spec, const StateJet& state, double sigma, double C_const,
                                  int n_samples, std::uint64_t seed = 0);

/// Largest (||grad^r f||^2 - eps ||grad^{2p} f||^2) / ||f||^2 over every single
/// mode and n_samples random band-limited f.
double verify_gn_interpolation(int p, int r, double eps, int n_samples, const TorusGrid& grid, std::uint64_t seed = 0);
/// max over lattice wavevectors of the grid of |k|^{2r} - eps |k|^{4p}.
double gn_integer_oracle(int p, int r, double eps, const TorusGrid& grid);
/// sup over real s >= 0 of s^{2r} - eps s^{4p}.
double gn_real_envelope(int p, int r, double eps);

/// Smallest integer strictly greater than (n + 6p - 2) / (4p).
int min_order(int n, int p);

struct Rational {
    long num = 0;
    long den = 1;
    double value() const { return static_cast<double>(num) / static_cast<double>(den); }
    bool operator==(const Rational&) const = default;
};

enum class Regime { Subcritical, Critical, Supercritical };
std::string to_string(Regime r);

struct EmbeddingParams {
    int n = 1, p = 1, m = 1, r = 0, l = 0;
};

struct EmbeddingExponent {
    Regime regime = Regime::Subcritical;
    /// 1/q = 1/2 - (2pm - l - 2pr)/(n + 2p), reduced.
    Rational inv_q;
    /// Finite in the subcritical regime only.
    std::optional<Rational> q;
};

EmbeddingExponent embedding_exponent(int n, int p, int m, int r, int l);

struct EmbeddingReport {
    EmbeddingParams params;
    Regime regime = Regime::Subcritical;
    /// Lebesgue exponent used; infinity for the continuous embedding.
    double q = 0.0;
    /// sup over samples of ||d_t^r grad^l u||_{L^q} / ||u||_{P^m}, per resolution.
    std::vector<double> sup_ratio;
    std::vector<int> resolutions_tested;
    /// Largest relative growth of sup_ratio between consecutive resolutions.
    double max_growth = 0.0;

    bool passed() const { return max_growth <= 0.10; }
};

/// Separable space-time sample u(x,t) = sum_j c_j phi_j(x) exp(-a_j t) on [0, 1].
struct SpaceTimeMode {
    std::vector<int> k;  // integer wavevector
    bool sine = false;
    double amplitude = 1.0;
    double decay = 0.0;
};

/// ||d_t^r grad^l u||_{L^q(M x [0,1])} (q = infinity for the sup norm) and
/// ||u||_{P^m(M,1)} evaluated on a grid with `modes` nodes per axis.
std::pair<double, double> embedding_norms(const std::vector<SpaceTimeMode>& sample, const EmbeddingParams& params,
                                          double q, int modes);

EmbeddingReport verify_embedding(const EmbeddingParams& params, int n_samples, const std::vector<int>& resolutions,
                                 std::uint64_t seed = 0);

struct EnergyPoint {
    double t = 0.0;
    double E = 0.0;
    double dEdt = 0.0;
    /// int w^2 at t.
    double l2_sq = 0.0;
};

struct EnergyReport {
    std::vector<EnergyPoint> series;
    /// Smallest C with E(t) <= E(0) exp(C t) at every sample (0 when E(0) = 0).
    double C_fit = 0.0;
    /// Smallest C with dE/dt <= C int w^2 at every sample.
    double C_derivative = 0.0;
    double max_energy = 0.0;
    bool gronwall_holds = true;
};

/// w = u - v, E(t) = int(|grad^p w|^2 + w^2).
EnergyReport energy_monitor(const Trajectory& u, const Trajectory& v, int p);

}  // namespace qlp
