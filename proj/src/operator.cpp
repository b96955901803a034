#include "qlp/operator.hpp"

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <numbers>
#include <random>
#include <set>

#include "qlp/error.hpp"
#include "qlp/kernels.hpp"

namespace qlp {

StateJet StateJet::of(const ScalarField& u, double t, int p) {
    StateJet s;
    s.t = t;
    s.derivatives.reserve(static_cast<std::size_t>(2 * p));
    s.derivatives.emplace_back(u);
    for (int k = 1; k < 2 * p; ++k) s.derivatives.push_back(gradient_tensor(u, k));
    return s;
}

double StateJet::consistency_error() const {
    const auto u = value();
    double err = 0.0;
    for (int k = 1; k < order(); ++k) {
        const auto ref = gradient_tensor(u, k);
        const auto& got = derivatives[static_cast<std::size_t>(k)];
        for (std::size_t c = 0; c < ref.component_count(); ++c)
            for (std::size_t i = 0; i < grid().size(); ++i)
                err = std::max(err, std::abs(ref.component(c)[i] - got.component(c)[i]));
    }
    return err;
}

StateJet interpolate(const StateJet& state, const TorusGrid& fine) {
    StateJet out;
    out.t = state.t;
    for (const auto& T : state.derivatives) {
        TensorField F(fine, T.rank());
        for (std::size_t c = 0; c < T.component_count(); ++c) {
            const auto comp = T.component(c);
            const auto f = interpolate(ScalarField(T.grid(), {comp.begin(), comp.end()}), fine);
            std::copy(f.values().begin(), f.values().end(), F.component(c).begin());
        }
        out.derivatives.push_back(std::move(F));
    }
    return out;
}

// ---------------------------------------------------------------------------

void OperatorSpec::validate() const {
    if (p < 1) throw InvalidArgument("operator: p must be >= 1");
    if (dims < 1 || dims > 3) throw InvalidArgument("operator: dimension must be in 1..3");
    if (static_cast<int>(factors.size()) != p)
        throw InvalidArgument("operator: expected " + std::to_string(p) + " factors, got " +
                              std::to_string(factors.size()));
    const auto n = static_cast<std::size_t>(dims);
    auto check_slots = [&](const expr::Expr& e, const std::string& where) {
        for (const auto& s : expr::slots(e)) {
            if (s.kind == expr::Slot::Kind::Jet && s.order() >= 2 * p)
                throw InvalidArgument(where + ": coefficients may read only up to grad^" + std::to_string(2 * p - 1) +
                                      " u (found " + s.name() + ")");
            if (s.kind == expr::Slot::Kind::X && s.axis >= dims)
                throw InvalidArgument(where + ": coordinate outside dimension");
            for (int a : s.index)
                if (a >= dims) throw InvalidArgument(where + ": derivative axis outside dimension");
        }
    };
    for (std::size_t l = 0; l < factors.size(); ++l) {
        const auto& E = factors[l];
        const std::string where = "factor E_" + std::to_string(l + 1);
        if (E.size() != n * n) throw InvalidArgument(where + ": must be " + std::to_string(n) + "x" + std::to_string(n));
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = i + 1; j < n; ++j)
                if (expr::to_string(E[i * n + j]) != expr::to_string(E[j * n + i]))
                    throw InvalidArgument(where + ": factor must be symmetric");
        for (const auto& e : E) check_slots(e, where);
    }
    check_slots(lower_order, "lower-order term b");
    if (!(cutoff_radius > 0.0)) throw InvalidArgument("operator: cutoff radius must be positive");
}

OperatorSpec make_scalar_operator(int p, int dims, const std::vector<std::string>& factors,
                                  const std::string& lower_order, double cutoff_radius) {
    OperatorSpec spec;
    spec.p = p;
    spec.dims = dims;
    spec.cutoff_radius = cutoff_radius;
    const expr::ParseContext ctx{dims, std::max(p, 1)};
    const auto n = static_cast<std::size_t>(dims);
    for (const auto& f : factors) {
        const auto e = expr::parse(f, ctx);
        FactorMatrix E(n * n, expr::constant(0.0));
        for (std::size_t i = 0; i < n; ++i) E[i * n + i] = e;
        spec.factors.push_back(std::move(E));
    }
    spec.lower_order = expr::parse(lower_order, ctx);
    spec.validate();
    return spec;
}

std::vector<MultiIndex> sorted_indices(int dims, int k) {
    std::vector<MultiIndex> out;
    MultiIndex cur;
    auto rec = [&](auto&& self, int start) -> void {
        if (static_cast<int>(cur.size()) == k) {
            out.push_back(cur);
            return;
        }
        for (int a = start; a < dims; ++a) {
            cur.push_back(a);
            self(self, a);
            cur.pop_back();
        }
    };
    rec(rec, 0);
    return out;
}

CompiledOperator::CompiledOperator(OperatorSpec spec) : spec_(std::move(spec)) {
    spec_.validate();
    const int n = spec_.dims;
    const int p = spec_.p;
    const int rank = 2 * p;
    const double sign = (p - 1) % 2 == 0 ? 1.0 : -1.0;

    std::map<MultiIndex, expr::Expr> collapsed;
    std::size_t total = 1;
    for (int r = 0; r < rank; ++r) total *= static_cast<std::size_t>(n);
    MultiIndex J(static_cast<std::size_t>(rank));
    for (std::size_t flat = 0; flat < total; ++flat) {
        std::size_t rem = flat;
        for (int r = rank - 1; r >= 0; --r) {
            J[static_cast<std::size_t>(r)] = static_cast<int>(rem % static_cast<std::size_t>(n));
            rem /= static_cast<std::size_t>(n);
        }
        expr::Expr prod = expr::constant(sign);
        for (int l = 0; l < p; ++l) {
            const auto i = static_cast<std::size_t>(J[static_cast<std::size_t>(2 * l)]);
            const auto j = static_cast<std::size_t>(J[static_cast<std::size_t>(2 * l + 1)]);
            prod = expr::mul(prod, spec_.factors[static_cast<std::size_t>(l)][i * static_cast<std::size_t>(n) + j]);
        }
        if (expr::is_zero(prod)) continue;
        MultiIndex S = J;
        std::sort(S.begin(), S.end());
        auto [it, inserted] = collapsed.try_emplace(S, prod);
        if (!inserted) it->second = expr::add(it->second, prod);
    }
    for (auto& [S, c] : collapsed)
        if (!expr::is_zero(c)) top_.push_back({S, c});

    std::set<expr::Slot> jet;
    auto gather = [&](const expr::Expr& e) {
        for (const auto& s : expr::slots(e))
            if (s.kind == expr::Slot::Kind::Jet) jet.insert(s);
    };
    for (const auto& t : top_) gather(t.coeff);
    gather(spec_.lower_order);
    jet_slots_.assign(jet.begin(), jet.end());

    for (const auto& s : jet_slots_) {
        SlotDerivative d{s, {}, expr::diff(spec_.lower_order, s)};
        for (const auto& t : top_) d.d_top.push_back(expr::diff(t.coeff, s));
        derivs_.push_back(std::move(d));
    }
}

// ---------------------------------------------------------------------------

std::vector<double> padded_derivative(const TorusGrid& coarse, std::span<const Complex> coeffs,
                                      std::span<const int> index, const TorusGrid& fine) {
    const auto symbol = spectral::derivative_symbol(coarse, index);
    std::vector<Complex> d(coeffs.size());
    for (std::size_t i = 0; i < d.size(); ++i) d[i] = coeffs[i] * symbol[i];
    if (fine == coarse) return spectral::inverse(coarse, d);
    return spectral::inverse(fine, spectral::pad(coarse, fine, d));
}

SlotEnvironment::SlotEnvironment(const TorusGrid& eval_grid, const StateJet& state,
                                 const std::vector<expr::Slot>& needed)
    : grid_(eval_grid), t_(state.t) {
    add_coordinates();
    for (const auto& s : needed) {
        if (s.kind != expr::Slot::Kind::Jet) continue;
        if (s.order() >= state.order()) throw InvalidArgument("state jet too short for slot " + s.name());
        const auto& tensor = state.derivatives[static_cast<std::size_t>(s.order())];
        const auto comp = tensor.component(tensor.flat_index(s.index));
        ScalarField f(state.grid(), std::vector<double>(comp.begin(), comp.end()));
        auto fine = interpolate(f, grid_);
        values_.emplace_back(s, std::vector<double>(fine.values().begin(), fine.values().end()));
    }
}

SlotEnvironment::SlotEnvironment(const TorusGrid& eval_grid, const ScalarField& u, double t,
                                 const std::vector<expr::Slot>& needed)
    : grid_(eval_grid), t_(t) {
    add_coordinates();
    const auto c = spectral::forward(u.grid(), u.values());
    for (const auto& s : needed) {
        if (s.kind != expr::Slot::Kind::Jet) continue;
        values_.emplace_back(s, padded_derivative(u.grid(), c, s.index, grid_));
    }
}

void SlotEnvironment::add_coordinates() {
    time_.assign(grid_.size(), t_);
    for (int d = 0; d < grid_.dims(); ++d) {
        std::vector<double> x(grid_.size());
        for (std::size_t i = 0; i < grid_.size(); ++i) x[i] = grid_.coordinate(i, d);
        values_.emplace_back(expr::Slot::coord(d), std::move(x));
    }
}

std::span<const double> SlotEnvironment::operator()(const expr::Slot& s) const {
    if (s.kind == expr::Slot::Kind::T) return time_;
    for (const auto& [slot, v] : values_)
        if (slot == s) return v;
    throw InvalidArgument("slot " + s.name() + " not available in environment");
}

expr::SlotArrays SlotEnvironment::arrays() const {
    return [this](const expr::Slot& s) { return (*this)(s); };
}

std::vector<double> SlotEnvironment::evaluate(const expr::Expr& e) const {
    return expr::evaluate(e, arrays(), grid_.size());
}

// ---------------------------------------------------------------------------

TensorField assemble_A(const OperatorSpec& spec, const StateJet& state) {
    spec.validate();
    const auto& grid = state.grid();
    if (grid.dims() != spec.dims)
        throw InvalidArgument("assemble_A: state dimension " + std::to_string(grid.dims()) +
                              " does not match operator dimension " + std::to_string(spec.dims));
    std::set<expr::Slot> needed;
    for (const auto& E : spec.factors)
        for (const auto& e : E)
            for (const auto& s : expr::slots(e)) needed.insert(s);
    const SlotEnvironment env(grid, state, {needed.begin(), needed.end()});

    const auto n = static_cast<std::size_t>(spec.dims);
    std::vector<std::vector<std::vector<double>>> E(spec.factors.size());
    for (std::size_t l = 0; l < spec.factors.size(); ++l)
        for (const auto& e : spec.factors[l]) E[l].push_back(env.evaluate(e));

    const int rank = 2 * spec.p;
    const double sign = (spec.p - 1) % 2 == 0 ? 1.0 : -1.0;
    TensorField A(grid, rank);
    for (std::size_t flat = 0; flat < A.component_count(); ++flat) {
        const auto J = A.unflatten(flat);
        auto out = A.component(flat);
        std::fill(out.begin(), out.end(), sign);
        for (int l = 0; l < spec.p; ++l) {
            const auto i = static_cast<std::size_t>(J[static_cast<std::size_t>(2 * l)]);
            const auto j = static_cast<std::size_t>(J[static_cast<std::size_t>(2 * l + 1)]);
            kernels::mul(E[static_cast<std::size_t>(l)][i * n + j], out, out);
        }
    }
    return A;
}

namespace {

AppliedQ finish_Q(const CompiledOperator& op, const SlotEnvironment& env, const ScalarField& u) {
    const auto& grid = u.grid();
    const auto& fine = env.grid();
    const auto c = spectral::forward(grid, u.values());
    // Constant coefficients act on the spectrum directly; the rest are
    // multiplied on the padded grid and truncated.
    std::vector<Complex> exact(c.size(), Complex(0.0, 0.0));
    std::vector<double> acc;
    const auto& lower = op.spec().lower_order;
    if (!expr::is_constant(lower)) acc = env.evaluate(lower);
    for (const auto& term : op.top_terms()) {
        if (expr::is_constant(term.coeff)) {
            const double a = expr::constant_value(term.coeff);
            const auto sym = spectral::derivative_symbol(grid, term.index);
            for (std::size_t i = 0; i < c.size(); ++i) exact[i] += a * sym[i] * c[i];
        } else {
            if (acc.empty()) acc.assign(fine.size(), 0.0);
            kernels::fma(env.evaluate(term.coeff), padded_derivative(grid, c, term.index, fine), acc);
        }
    }
    if (expr::is_constant(lower)) exact[0] += expr::constant_value(lower);
    AppliedQ out;
    out.value = ScalarField(grid, spectral::inverse(grid, exact));
    if (!acc.empty()) out.value += restrict_to(ScalarField(fine, std::move(acc)), grid);
    if (op.spec().forcing) out.value += op.spec().forcing->at(grid, env.time());
    out.top_band_fraction = spectral::top_band_energy_fraction(u);
    out.under_resolved = out.top_band_fraction > 0.1;
    return out;
}

}  // namespace

AppliedQ apply_Q(const CompiledOperator& op, const StateJet& state, const ScalarField& u) {
    if (!(state.grid() == u.grid())) throw InvalidArgument("apply_Q: state and field grids differ");
    if (u.grid().dims() != op.spec().dims) throw InvalidArgument("apply_Q: dimension mismatch");
    const SlotEnvironment env(u.grid().padded(), state, op.jet_slots());
    return finish_Q(op, env, u);
}

AppliedQ apply_Q(const OperatorSpec& spec, const StateJet& state, const ScalarField& u) {
    return apply_Q(CompiledOperator(spec), state, u);
}

AppliedQ apply_Q(const CompiledOperator& op, const ScalarField& u, double t) {
    if (u.grid().dims() != op.spec().dims) throw InvalidArgument("apply_Q: dimension mismatch");
    const SlotEnvironment env(u.grid().padded(), u, t, op.jet_slots());
    return finish_Q(op, env, u);
}

// ---------------------------------------------------------------------------

namespace {

double min_eigen(const std::vector<std::vector<double>>& E, std::size_t sample, std::size_t n,
                 std::vector<double>* xi) {
    if (n == 1) {
        if (xi) *xi = {1.0};
        return E[0][sample];
    }
    Eigen::MatrixXd M(n, n);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j) M(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = E[i * n + j][sample];
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(M);
    if (xi) {
        xi->resize(n);
        for (std::size_t i = 0; i < n; ++i) (*xi)[i] = es.eigenvectors()(static_cast<Eigen::Index>(i), 0);
    }
    return es.eigenvalues()(0);
}

}  // namespace

EllipticityCertificate check_ellipticity(const OperatorSpec& spec, double bound_L, int samples, std::uint64_t seed,
                                         double horizon) {
    spec.validate();
    if (samples < 1) throw InvalidArgument("check_ellipticity: samples must be >= 1");
    if (!(bound_L > 0.0)) throw InvalidArgument("check_ellipticity: bound must be positive");
    const int n = spec.dims;
    const int p = spec.p;

    std::set<expr::Slot> read;
    for (const auto& E : spec.factors)
        for (const auto& e : E)
            for (const auto& s : expr::slots(e)) read.insert(s);
    std::set<int> orders;
    for (const auto& s : read)
        if (s.kind == expr::Slot::Kind::Jet) orders.insert(s.order());

    // Per order k: the sorted components with their multiplicities.
    std::map<int, std::vector<MultiIndex>> comps;
    for (int k : orders) comps[k] = sorted_indices(n, k);

    std::map<expr::Slot, std::vector<double>> arrays;
    std::vector<double> tvals;
    std::array<std::vector<double>, 3> xvals;
    auto push_sample = [&](const std::array<double, 3>& x, double t, const std::map<expr::Slot, double>& jet) {
        for (int d = 0; d < n; ++d) xvals[static_cast<std::size_t>(d)].push_back(x[static_cast<std::size_t>(d)]);
        tvals.push_back(t);
        for (int k : orders)
            for (const auto& S : comps[k]) {
                const auto slot = expr::Slot::jet(S);
                auto it = jet.find(slot);
                arrays[slot].push_back(it == jet.end() ? 0.0 : it->second);
            }
    };

    // Corners: u in {-L, 0, L}; each psi_k zero or +-L along one component.
    std::vector<std::map<expr::Slot, double>> corners{{}};
    for (int k : orders) {
        std::vector<std::map<expr::Slot, double>> next;
        for (const auto& base : corners) {
            if (k == 0) {
                for (double v : {-bound_L, 0.0, bound_L}) {
                    auto m = base;
                    m[expr::Slot::value()] = v;
                    next.push_back(std::move(m));
                }
                continue;
            }
            next.push_back(base);
            for (const auto& S : comps[k]) {
                const double scale = bound_L / std::sqrt(static_cast<double>(expr::multiplicity(S)));
                for (double sgn : {-1.0, 1.0}) {
                    auto m = base;
                    m[expr::Slot::jet(S)] = sgn * scale;
                    next.push_back(std::move(m));
                }
            }
        }
        corners = std::move(next);
    }
    for (const auto& c : corners)
        for (double t : {0.0, horizon}) push_sample({0.0, 0.0, 0.0}, t, c);

    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    std::normal_distribution<double> gauss(0.0, 1.0);
    for (int s = 0; s < samples; ++s) {
        std::array<double, 3> x{};
        for (int d = 0; d < n; ++d) x[static_cast<std::size_t>(d)] = 2.0 * std::numbers::pi * unit(rng);
        const double t = horizon * unit(rng);
        std::map<expr::Slot, double> jet;
        for (int k : orders) {
            if (k == 0) {
                jet[expr::Slot::value()] = bound_L * (2.0 * unit(rng) - 1.0);
                continue;
            }
            // Random direction in the full tensor norm, radius uniform in [0, L].
            std::vector<double> g;
            double norm2 = 0.0;
            for (const auto& S : comps[k]) {
                g.push_back(gauss(rng));
                norm2 += expr::multiplicity(S) * g.back() * g.back();
            }
            const double r = bound_L * unit(rng) / std::sqrt(std::max(norm2, 1e-300));
            for (std::size_t i = 0; i < g.size(); ++i) jet[expr::Slot::jet(comps[k][i])] = r * g[i];
        }
        push_sample(x, t, jet);
    }

    const std::size_t total = tvals.size();
    const auto env = [&](const expr::Slot& s) -> std::span<const double> {
        if (s.kind == expr::Slot::Kind::T) return tvals;
        if (s.kind == expr::Slot::Kind::X) return xvals[static_cast<std::size_t>(s.axis)];
        return arrays.at(s);
    };

    EllipticityCertificate cert;
    cert.samples_tested = static_cast<int>(total);
    cert.lambda = std::numeric_limits<double>::infinity();
    std::size_t worst_sample = 0;
    int worst_factor = 0;
    for (std::size_t l = 0; l < spec.factors.size(); ++l) {
        std::vector<std::vector<double>> E;
        for (const auto& e : spec.factors[l]) E.push_back(expr::evaluate(e, env, total));
        for (std::size_t s = 0; s < total; ++s) {
            const double m = min_eigen(E, s, static_cast<std::size_t>(n), nullptr);
            if (m < cert.lambda) {
                cert.lambda = m;
                worst_sample = s;
                worst_factor = static_cast<int>(l);
            }
        }
    }

    auto& w = cert.worst;
    for (int d = 0; d < n; ++d) w.x[static_cast<std::size_t>(d)] = xvals[static_cast<std::size_t>(d)][worst_sample];
    w.t = tvals[worst_sample];
    for (const auto& [slot, v] : arrays) w.slots.emplace_back(slot.name(), v[worst_sample]);
    w.factor = worst_factor;
    {
        std::vector<std::vector<double>> E;
        for (const auto& e : spec.factors[static_cast<std::size_t>(worst_factor)])
            E.push_back(expr::evaluate(e, env, total));
        w.min_eigenvalue = min_eigen(E, worst_sample, static_cast<std::size_t>(n), &w.xi);
    }
    if (!(cert.lambda > 0.0)) {
        std::string where;
        for (const auto& [name, v] : w.slots) where += " " + name + "=" + std::to_string(v);
        throw NotElliptic("not locally elliptic on the sampled box: factor E_" + std::to_string(worst_factor + 1) +
                              " has eigenvalue " + std::to_string(cert.lambda) + " at t=" + std::to_string(w.t) + where,
                          w);
    }
    (void)p;
    return cert;
}

// ---------------------------------------------------------------------------

double jet_size(const ScalarField& u, int p) {
    std::vector<double> s(u.size());
    for (std::size_t i = 0; i < u.size(); ++i) s[i] = std::abs(u[i]);
    for (int k = 1; k < 2 * p; ++k) {
        const auto g = gradient_tensor(u, k);
        for (std::size_t i = 0; i < u.size(); ++i) {
            double sq = 0.0;
            for (std::size_t c = 0; c < g.component_count(); ++c) sq += g.component(c)[i] * g.component(c)[i];
            s[i] += std::sqrt(sq);
        }
    }
    return s.empty() ? 0.0 : *std::max_element(s.begin(), s.end());
}

OperatorSpec apply_cutoff(const OperatorSpec& spec, double jet_bound) {
    spec.validate();
    if (!(jet_bound > 0.0)) throw InvalidArgument("apply_cutoff: jet bound must be positive");
    using namespace expr;
    const int n = spec.dims;

    // s = |u| + |grad u| + ... + |grad^{2p-1} u| + t
    Expr s = add(abs(var(Slot::value())), var(Slot::time()));
    for (int k = 1; k < 2 * spec.p; ++k) {
        std::vector<Expr> args;
        std::vector<double> weights;
        for (const auto& S : sorted_indices(n, k)) {
            args.push_back(var(Slot::jet(S)));
            weights.push_back(multiplicity(S));
        }
        s = add(s, norm(std::move(args), std::move(weights)));
    }
    const Expr y = div(sub(s, constant(jet_bound)), constant(jet_bound));
    const Expr chi = sub(constant(1.0), smoothstep(y));

    OperatorSpec out = spec;
    const auto nn = static_cast<std::size_t>(n);
    for (auto& E : out.factors)
        for (std::size_t i = 0; i < nn; ++i)
            for (std::size_t j = 0; j < nn; ++j) {
                auto& e = E[i * nn + j];
                const Expr id = constant(i == j ? 1.0 : 0.0);
                e = add(id, mul(chi, sub(e, id)));
            }
    out.lower_order = mul(chi, spec.lower_order);
    out.cutoff_radius = 2.0 * jet_bound;
    out.ellipticity_floor = std::min(spec.ellipticity_floor, 1.0);
    out.cutoff_applied = true;
    return out;
}

OperatorSpec apply_cutoff(const OperatorSpec& spec, double jet_bound, const ScalarField& u0) {
    const double size = jet_size(u0, spec.p);
    if (jet_bound < size)
        throw InvalidArgument("apply_cutoff: jet bound " + std::to_string(jet_bound) +
                              " is below the initial jet size " + std::to_string(size));
    return apply_cutoff(spec, jet_bound);
}

}  // namespace qlp
