#include "qlp/analysis.hpp"

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <numbers>
#include <numeric>
#include <random>

#include "qlp/error.hpp"
#include "qlp/kernels.hpp"
#include "qlp/quasilinear.hpp"

namespace qlp {

std::vector<double> fd_weights(double x0, const std::vector<double>& nodes, int order) {
    const int n = static_cast<int>(nodes.size());
    if (order < 0 || order >= n) throw InvalidArgument("fd_weights: need more nodes than the derivative order");
    // c[j][k]: weight of node j for the k-th derivative.
    std::vector<std::vector<double>> c(static_cast<std::size_t>(n), std::vector<double>(static_cast<std::size_t>(order + 1), 0.0));
    double c1 = 1.0;
    double c4 = nodes[0] - x0;
    c[0][0] = 1.0;
    for (int i = 1; i < n; ++i) {
        const auto ii = static_cast<std::size_t>(i);
        const int mn = std::min(i, order);
        double c2 = 1.0;
        const double c5 = c4;
        c4 = nodes[ii] - x0;
        for (int j = 0; j < i; ++j) {
            const auto jj = static_cast<std::size_t>(j);
            const double c3 = nodes[ii] - nodes[jj];
            c2 *= c3;
            if (j == i - 1) {
                for (int k = mn; k >= 1; --k) {
                    const auto kk = static_cast<std::size_t>(k);
                    c[ii][kk] = c1 * (k * c[ii - 1][kk - 1] - c5 * c[ii - 1][kk]) / c2;
                }
                c[ii][0] = -c1 * c5 * c[ii - 1][0] / c2;
            }
            for (int k = mn; k >= 1; --k) {
                const auto kk = static_cast<std::size_t>(k);
                c[jj][kk] = (c4 * c[jj][kk] - k * c[jj][kk - 1]) / c3;
            }
            c[jj][0] = c4 * c[jj][0] / c3;
        }
        c1 = c2;
    }
    std::vector<double> w(static_cast<std::size_t>(n));
    for (int j = 0; j < n; ++j) w[static_cast<std::size_t>(j)] = c[static_cast<std::size_t>(j)][static_cast<std::size_t>(order)];
    return w;
}

namespace {

/// int |grad^k f|^2 with the full tensor contraction, by Parseval.
double gradient_energy(const TorusGrid& grid, const std::vector<Complex>& c, int k) {
    double total = 0.0;
    if (k == 0) {
        for (const auto& v : c) total += std::norm(v);
        return grid.volume() * total;
    }
    for (const auto& S : sorted_indices(grid.dims(), k)) {
        const auto sym = spectral::derivative_symbol(grid, S);
        double s = 0.0;
        for (std::size_t i = 0; i < c.size(); ++i) s += std::norm(c[i] * sym[i]);
        total += expr::multiplicity(S) * s;
    }
    return grid.volume() * total;
}

/// j-th time derivative at node k from second-order stencils.
std::vector<double> time_stencil(const std::vector<double>& t, std::size_t k, int j, std::size_t& first) {
    const std::size_t N = t.size();
    const std::size_t half = static_cast<std::size_t>((j + 1) / 2);
    std::size_t width;
    if (k >= half && k + half < N) {
        first = k - half;
        width = 2 * half + 1;
    } else {
        width = static_cast<std::size_t>(j + 2);
        first = k < half ? 0 : N - width;
    }
    std::vector<double> nodes(t.begin() + static_cast<std::ptrdiff_t>(first),
                              t.begin() + static_cast<std::ptrdiff_t>(first + width));
    return fd_weights(t[k], nodes, j);
}

ScalarField time_derivative(const Trajectory& traj, std::size_t k, int j) {
    if (j == 0) return traj.states[k];
    std::size_t first = 0;
    const auto w = time_stencil(traj.times, k, j, first);
    ScalarField out(traj.grid);
    for (std::size_t i = 0; i < w.size(); ++i) out.add_scaled(w[i], traj.states[first + i]);
    return out;
}

std::vector<double> trapezoid_weights(const std::vector<double>& t) {
    std::vector<double> w(t.size(), 0.0);
    for (std::size_t k = 0; k + 1 < t.size(); ++k) {
        const double h = t[k + 1] - t[k];
        w[k] += 0.5 * h;
        w[k + 1] += 0.5 * h;
    }
    return w;
}

}  // namespace

double parabolic_norm(const Trajectory& traj, int m, int p) {
    if (m < 0 || p < 1) throw InvalidArgument("parabolic_norm: need m >= 0 and p >= 1");
    if (traj.states.size() != traj.times.size()) throw InvalidArgument("parabolic_norm: malformed trajectory");
    if (traj.times.size() < static_cast<std::size_t>(2 * m + 1) || traj.times.size() < 2)
        throw InvalidArgument("parabolic_norm: need at least 2m+1 time samples");
    const auto w = trapezoid_weights(traj.times);
    double total = 0.0;
    for (int j = 0; j <= m; ++j) {
        for (std::size_t k = 0; k < traj.times.size(); ++k) {
            const auto g = time_derivative(traj, k, j);
            const auto c = spectral::forward(traj.grid, g.values());
            for (int s = 0; 2 * p * j + s <= 2 * p * m; ++s) total += w[k] * gradient_energy(traj.grid, c, s);
        }
    }
    return std::sqrt(total);
}

// ---------------------------------------------------------------------------

namespace {

struct ModeSample {
    ScalarField field;
    std::string label;
};

std::string wavevector_text(const std::array<int, 3>& k, int dims) {
    std::string s = "(";
    for (int d = 0; d < dims; ++d) s += (d ? "," : "") + std::to_string(k[static_cast<std::size_t>(d)]);
    return s + ")";
}

std::array<int, 3> slot_wavevector(const TorusGrid& grid, std::size_t slot) {
    const auto u = grid.unravel(slot);
    std::array<int, 3> k{};
    for (int d = 0; d < grid.dims(); ++d) k[static_cast<std::size_t>(d)] = grid.wavenumber(u[static_cast<std::size_t>(d)], d);
    return k;
}

ScalarField trig_mode(const TorusGrid& grid, const std::array<int, 3>& k, bool sine) {
    return ScalarField::sample(grid, [&](const std::array<double, 3>& x) {
        double phase = 0.0;
        for (int d = 0; d < grid.dims(); ++d) {
            const auto dd = static_cast<std::size_t>(d);
            phase += 2.0 * std::numbers::pi * k[dd] * x[dd] / grid.period(d);
        }
        return sine ? std::sin(phase) : std::cos(phase);
    });
}

bool normalize(ScalarField& f) {
    const double n = l2_norm(f);
    if (!(n > 1e-12)) return false;
    f *= 1.0 / n;
    return true;
}

/// Every single real Fourier mode (one per +-k pair), unit L2.
std::vector<ModeSample> single_modes(const TorusGrid& grid) {
    std::vector<ModeSample> out;
    std::vector<std::array<int, 3>> seen;
    for (std::size_t slot = 0; slot < grid.size(); ++slot) {
        const auto k = slot_wavevector(grid, slot);
        std::array<int, 3> neg{-k[0], -k[1], -k[2]};
        if (std::find(seen.begin(), seen.end(), neg) != seen.end()) continue;
        seen.push_back(k);
        for (bool sine : {false, true}) {
            auto f = trig_mode(grid, k, sine);
            if (!normalize(f)) continue;
            out.push_back({std::move(f), "mode k=" + wavevector_text(k, grid.dims()) + (sine ? " sin" : " cos")});
        }
    }
    return out;
}

/// Random real field with Gaussian Fourier coefficients of decaying variance.
ScalarField random_field(const TorusGrid& grid, std::mt19937_64& rng) {
    std::normal_distribution<double> normal(0.0, 1.0);
    std::uniform_real_distribution<double> uniform(0.0, 2.0);
    const double decay = uniform(rng);
    std::vector<Complex> c(grid.size());
    for (std::size_t slot = 0; slot < grid.size(); ++slot) {
        const auto k = slot_wavevector(grid, slot);
        double k2 = 0.0;
        for (int d = 0; d < grid.dims(); ++d) k2 += double(k[static_cast<std::size_t>(d)]) * k[static_cast<std::size_t>(d)];
        const double a = std::pow(1.0 + k2, -0.5 * decay);
        const double re = normal(rng), im = normal(rng);
        c[slot] = Complex(a * re, a * im);
    }
    // The inverse transform keeps the real part, which is the Hermitian projection.
    return ScalarField(grid, spectral::inverse(grid, c));
}

}  // namespace

GardingCertificate verify_garding(const OperatorSpec& spec, const StateJet& state, double sigma, double C_const,
                                  int n_samples, std::uint64_t seed) {
    if (!(sigma > 0.0)) throw InvalidArgument("verify_garding: sigma must be positive");
    if (n_samples < 0) throw InvalidArgument("verify_garding: n_samples must be nonnegative");
    const auto& grid = state.grid();
    const auto fine = grid.padded();
    const auto A = assemble_A(spec, interpolate(state, fine));
    std::map<MultiIndex, std::vector<double>> C;
    for (std::size_t c = 0; c < A.component_count(); ++c) {
        auto J = A.unflatten(c);
        std::sort(J.begin(), J.end());
        auto [it, fresh] = C.try_emplace(J, std::vector<double>(fine.size(), 0.0));
        kernels::add(it->second, A.component(c), it->second);
    }

    GardingCertificate cert;
    cert.sigma = sigma;
    cert.C_const = C_const;
    cert.seed = seed;
    cert.worst_margin = std::numeric_limits<double>::infinity();
    auto test = [&](const ScalarField& psi, const std::string& label) {
        const auto c = spectral::forward(grid, psi.values());
        std::vector<double> g(fine.size(), 0.0);
        for (const auto& [S, coeff] : C) kernels::fma(coeff, padded_derivative(grid, c, S, fine), g);
        const auto psi_fine = interpolate(psi, fine);
        const double lhs = -kernels::dot(psi_fine.values(), g) * fine.weight();
        double wp = 0.0;
        for (int k = 0; k <= spec.p; ++k) wp += gradient_energy(grid, c, k);
        const double l2 = gradient_energy(grid, c, 0);
        // Relative to the W^{p,2} energy so margins are comparable across frequencies.
        const double margin = (lhs - sigma * wp + C_const * l2) / wp;
        ++cert.samples_tested;
        if (margin < cert.worst_margin) {
            cert.worst_margin = margin;
            cert.worst_sample = label;
        }
    };
    for (const auto& s : single_modes(grid)) test(s.field, s.label);
    std::mt19937_64 rng(seed);
    for (int i = 0; i < n_samples; ++i) {
        auto psi = random_field(grid, rng);
        if (!normalize(psi)) continue;
        test(psi, "random #" + std::to_string(i));
    }
    return cert;
}

double verify_gn_interpolation(int p, int r, double eps, int n_samples, const TorusGrid& grid, std::uint64_t seed) {
    if (p < 1 || r < 0 || r >= 2 * p) throw InvalidArgument("verify_gn_interpolation: need p >= 1 and 0 <= r < 2p");
    if (!(eps > 0.0)) throw InvalidArgument("verify_gn_interpolation: eps must be positive");
    double best = -std::numeric_limits<double>::infinity();
    auto test = [&](const ScalarField& f) {
        const auto c = spectral::forward(grid, f.values());
        const double l2 = gradient_energy(grid, c, 0);
        best = std::max(best, (gradient_energy(grid, c, r) - eps * gradient_energy(grid, c, 2 * p)) / l2);
    };
    for (const auto& s : single_modes(grid)) test(s.field);
    std::mt19937_64 rng(seed);
    for (int i = 0; i < n_samples; ++i) {
        auto f = random_field(grid, rng);
        if (normalize(f)) test(f);
    }
    return best;
}

double gn_integer_oracle(int p, int r, double eps, const TorusGrid& grid) {
    double best = -std::numeric_limits<double>::infinity();
    for (std::size_t slot = 0; slot < grid.size(); ++slot) {
        double k2 = 0.0;
        for (int d = 0; d < grid.dims(); ++d) {
            const double kappa = grid.angular_wavenumber(grid.unravel(slot)[static_cast<std::size_t>(d)], d);
            k2 += kappa * kappa;
        }
        best = std::max(best, std::pow(k2, r) - eps * std::pow(k2, 2 * p));
    }
    return best;
}

double gn_real_envelope(int p, int r, double eps) {
    if (r == 0) return 1.0;
    // x = s^2 maximizes x^r - eps x^{2p} at x^{2p-r} = r / (2p eps).
    const double x = std::pow(r / (2.0 * p * eps), 1.0 / (2 * p - r));
    return std::pow(x, r) - eps * std::pow(x, 2 * p);
}

int min_order(int n, int p) {
    if (n < 1 || p < 1) throw InvalidArgument("min_order: n and p must be positive");
    return (n + 6 * p - 2) / (4 * p) + 1;
}

// ---------------------------------------------------------------------------

std::string to_string(Regime r) {
    switch (r) {
        case Regime::Subcritical: return "subcritical";
        case Regime::Critical: return "critical";
        case Regime::Supercritical: return "supercritical";
    }
    return "unknown";
}

namespace {

Rational reduce(long num, long den) {
    if (den < 0) num = -num, den = -den;
    const long g = std::gcd(num < 0 ? -num : num, den);
    return {num / g, den / g};
}

}  // namespace

EmbeddingExponent embedding_exponent(int n, int p, int m, int r, int l) {
    if (n < 1 || p < 1 || m < 0 || r < 0 || l < 0) throw InvalidArgument("embedding_exponent: parameters out of range");
    if (2 * p * r + l > 2 * p * m) throw InvalidArgument("embedding_exponent: need 2pr + l <= 2pm");
    const long excess = 2L * p * m - l - 2L * p * r;
    const long dim = n + 2L * p;
    EmbeddingExponent e;
    e.inv_q = reduce(dim - 2 * excess, 2 * dim);
    if (e.inv_q.num > 0) {
        e.regime = Regime::Subcritical;
        e.q = Rational{e.inv_q.den, e.inv_q.num};
    } else if (e.inv_q.num == 0) {
        e.regime = Regime::Critical;
    } else {
        e.regime = Regime::Supercritical;
    }
    return e;
}

namespace {

/// Gauss-Legendre nodes and weights on [0, 1] (Golub-Welsch).
std::pair<std::vector<double>, std::vector<double>> gauss_legendre(int n) {
    Eigen::MatrixXd J = Eigen::MatrixXd::Zero(n, n);
    for (int i = 1; i < n; ++i) {
        const double b = i / std::sqrt(4.0 * i * i - 1.0);
        J(i, i - 1) = J(i - 1, i) = b;
    }
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(J);
    std::vector<double> x(static_cast<std::size_t>(n)), w(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) {
        x[static_cast<std::size_t>(i)] = 0.5 * (es.eigenvalues()(i) + 1.0);
        const double v = es.eigenvectors()(0, i);
        w[static_cast<std::size_t>(i)] = v * v;  // 2 v^2 on [-1,1], halved for [0,1]
    }
    return {x, w};
}

}  // namespace

std::pair<double, double> embedding_norms(const std::vector<SpaceTimeMode>& sample, const EmbeddingParams& P,
                                          double q, int modes) {
    std::vector<int> nodes(static_cast<std::size_t>(P.n), modes);
    const auto grid = make_grid(P.n, nodes);
    struct Term {
        double amplitude, decay;
        std::vector<Complex> spectrum;
        TensorField grad;  // grad^l phi
    };
    std::vector<Term> terms;
    for (const auto& mode : sample) {
        std::array<int, 3> k{};
        for (std::size_t d = 0; d < mode.k.size() && d < 3; ++d) k[d] = mode.k[d];
        const auto phi = trig_mode(grid, k, mode.sine);
        terms.push_back({mode.amplitude, mode.decay, spectral::forward(grid, phi.values()), gradient_tensor(phi, P.l)});
    }
    const auto [tn, tw] = gauss_legendre(48);
    const bool sup = std::isinf(q);

    // ||u||_{P^m}^2 over [0, 1]
    double pm = 0.0;
    for (std::size_t i = 0; i < tn.size(); ++i) {
        for (int j = 0; 2 * P.p * j <= 2 * P.p * P.m; ++j) {
            std::vector<Complex> c(grid.size(), Complex(0.0, 0.0));
            for (const auto& term : terms) {
                const double f = term.amplitude * std::pow(-term.decay, j) * std::exp(-term.decay * tn[i]);
                for (std::size_t s = 0; s < c.size(); ++s) c[s] += f * term.spectrum[s];
            }
            for (int k = 0; 2 * P.p * j + k <= 2 * P.p * P.m; ++k) pm += tw[i] * gradient_energy(grid, c, k);
        }
    }

    // ||d_t^r grad^l u||_{L^q}
    auto pointwise = [&](double t) {
        const std::size_t comps = terms.empty() ? 0 : terms.front().grad.component_count();
        std::vector<double> mag(grid.size(), 0.0);
        for (std::size_t cidx = 0; cidx < comps; ++cidx) {
            std::vector<double> g(grid.size(), 0.0);
            for (const auto& term : terms) {
                const double f = term.amplitude * std::pow(-term.decay, P.r) * std::exp(-term.decay * t);
                kernels::axpy(f, term.grad.component(cidx), g);
            }
            for (std::size_t i = 0; i < g.size(); ++i) mag[i] += g[i] * g[i];
        }
        for (auto& v : mag) v = std::sqrt(v);
        return mag;
    };
    double lq = 0.0;
    if (sup) {
        std::vector<double> times = tn;
        times.push_back(0.0);
        times.push_back(1.0);
        for (double t : times) {
            const auto mag = pointwise(t);
            lq = std::max(lq, *std::max_element(mag.begin(), mag.end()));
        }
    } else {
        for (std::size_t i = 0; i < tn.size(); ++i) {
            const auto mag = pointwise(tn[i]);
            double s = 0.0;
            for (double v : mag) s += std::pow(v, q);
            lq += tw[i] * s * grid.weight();
        }
        lq = std::pow(lq, 1.0 / q);
    }
    return {lq, std::sqrt(pm)};
}

EmbeddingReport verify_embedding(const EmbeddingParams& params, int n_samples, const std::vector<int>& resolutions,
                                 std::uint64_t seed) {
    const auto e = embedding_exponent(params.n, params.p, params.m, params.r, params.l);
    EmbeddingReport rep;
    rep.params = params;
    rep.regime = e.regime;
    switch (e.regime) {
        case Regime::Subcritical: rep.q = e.q->value(); break;
        case Regime::Critical: rep.q = 4.0; break;
        case Regime::Supercritical: rep.q = std::numeric_limits<double>::infinity(); break;
    }
    if (resolutions.empty()) throw InvalidArgument("verify_embedding: no resolutions given");
    // Band-limited classes are nested: each resolution re-evaluates every
    // coarser sample and adds its own random draws.
    std::vector<std::vector<SpaceTimeMode>> samples;
    // Low single modes with decay rates 0, 1/8, ..., 2 locate the extremizers
    // of the ratio, which sit at low frequency.
    for (int k = 0; k <= 2; ++k)
        for (bool sine : {false, true})
            for (int step = 0; step <= 16; ++step) {
                if (sine && k == 0) continue;
                const double a = step / 8.0;
                SpaceTimeMode mode{std::vector<int>(static_cast<std::size_t>(params.n), 0), sine, 1.0, a};
                mode.k[0] = k;
                samples.push_back({mode});
            }
    for (int N : resolutions) {
        if (N < 8 || N % 2 != 0) throw InvalidArgument("verify_embedding: resolutions must be even and >= 8");
        const int band = N / 2 - 1;
        std::mt19937_64 rng(seed + static_cast<std::uint64_t>(N));
        std::normal_distribution<double> normal(0.0, 1.0);
        std::uniform_int_distribution<int> wave(-band, band);
        std::uniform_real_distribution<double> decay(0.0, 2.0);
        std::uniform_int_distribution<int> count(1, 8);
        for (int s = 0; s < n_samples; ++s) {
            std::vector<SpaceTimeMode> sample;
            const int terms = count(rng);
            for (int j = 0; j < terms; ++j) {
                SpaceTimeMode mode;
                double k2 = 0.0;
                for (int d = 0; d < params.n; ++d) {
                    mode.k.push_back(wave(rng));
                    k2 += double(mode.k.back()) * mode.k.back();
                }
                mode.sine = normal(rng) > 0.0;
                mode.amplitude = normal(rng) / (1.0 + k2);
                mode.decay = decay(rng);
                sample.push_back(mode);
            }
            samples.push_back(std::move(sample));
        }
        double best = 0.0;
        for (const auto& sample : samples) {
            const auto [num, den] = embedding_norms(sample, params, rep.q, N);
            if (!(den > 1e-14)) continue;  // the zero function has no ratio
            best = std::max(best, num / den);
        }
        rep.sup_ratio.push_back(best);
        rep.resolutions_tested.push_back(N);
    }
    for (std::size_t i = 1; i < rep.sup_ratio.size(); ++i)
        rep.max_growth = std::max(rep.max_growth, rep.sup_ratio[i] / rep.sup_ratio[i - 1] - 1.0);
    return rep;
}

// ---------------------------------------------------------------------------

EnergyReport energy_monitor(const Trajectory& u, const Trajectory& v, int p) {
    if (!(u.grid == v.grid)) throw InvalidArgument("energy_monitor: grid mismatch");
    const auto w = difference(u, v);
    EnergyReport rep;
    const std::size_t N = w.times.size();
    for (std::size_t k = 0; k < N; ++k) {
        const auto c = spectral::forward(w.grid, w.states[k].values());
        EnergyPoint pt;
        pt.t = w.times[k];
        pt.l2_sq = gradient_energy(w.grid, c, 0);
        pt.E = gradient_energy(w.grid, c, p) + pt.l2_sq;
        rep.series.push_back(pt);
        rep.max_energy = std::max(rep.max_energy, pt.E);
    }
    if (N >= 3) {
        for (std::size_t k = 0; k < N; ++k) {
            std::size_t first = 0;
            const auto wts = time_stencil(w.times, k, 1, first);
            double d = 0.0;
            for (std::size_t i = 0; i < wts.size(); ++i) d += wts[i] * rep.series[first + i].E;
            rep.series[k].dEdt = d;
        }
    }
    const double E0 = rep.series.front().E;
    if (E0 > 0.0) {
        rep.C_fit = -std::numeric_limits<double>::infinity();
        for (std::size_t k = 1; k < N; ++k)
            rep.C_fit = std::max(rep.C_fit, std::log(rep.series[k].E / E0) / rep.series[k].t);
    }
    for (const auto& pt : rep.series)
        if (pt.l2_sq > 0.0) rep.C_derivative = std::max(rep.C_derivative, pt.dEdt / pt.l2_sq);
    // int w^2 <= E, so dE/dt <= C int w^2 integrates to E(t) <= E(0) exp(C t).
    const double C = std::max(rep.C_derivative, 0.0);
    for (const auto& pt : rep.series)
        if (pt.E > E0 * std::exp(C * pt.t) * (1.0 + 1e-6) + 1e-16) rep.gronwall_holds = false;
    return rep;
}

}  // namespace qlp
