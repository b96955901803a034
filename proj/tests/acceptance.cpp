// Acceptance run: one PASS/FAIL line per criterion.
//
// Exit status is 0 iff every criterion passes. With --expect-fail a,b,... the
// exit status is 0 iff the failing set is exactly {a,b,...}; any other
// failure, or an unexpected pass, is an error.
#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "qlp/analysis.hpp"
#include "qlp/harness.hpp"
#include "qlp/quasilinear.hpp"

using namespace qlp;

namespace {

struct Outcome {
    bool pass = false;
    std::string detail;
};

std::string fmt(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.3g", v);
    return buf;
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

ScalarField sine(const TorusGrid& g, double amp) {
    return ScalarField::sample(g, [amp](const std::array<double, 3>& x) { return amp * std::sin(x[0]); });
}

double max_error_vs_decay(const Trajectory& traj) {
    double err = 0.0;
    for (std::size_t k = 0; k < traj.times.size(); ++k) {
        const double f = std::exp(-traj.times[k]);
        const auto exact = ScalarField::sample(traj.grid, [f](const std::array<double, 3>& x) { return f * std::sin(x[0]); });
        err = std::max(err, (traj.states[k] - exact).max_abs());
    }
    return err;
}

// 1. Exact linear decay, error <= 1e-6 and runtime < 1 s each.
Outcome exact_linear_decay() {
    const auto g = make_grid(1, {16});
    Outcome o{true, ""};
    for (const auto& [name, spec] : {std::pair{"heat", make_scalar_operator(1, 1, {"1"}, "0")},
                                     std::pair{"biharmonic", make_scalar_operator(2, 1, {"1", "1"}, "0")}}) {
        const auto t0 = std::chrono::steady_clock::now();
        const auto sol = solve_quasilinear(spec, sine(g, 1.0), 0.1, 1e-3, 1e-10);
        const double secs = seconds_since(t0);
        const double err = max_error_vs_decay(sol.trajectory);
        o.pass = o.pass && sol.converged && sol.halvings == 0 && err <= 1e-6 && secs < 1.0;
        o.detail += std::string(name) + ": err=" + fmt(err) + " (<=1e-6), " + fmt(secs) + " s (<1); ";
    }
    return o;
}

// 2. Manufactured quasilinear convergence, order >= 1.85, runtime < 10 s.
Outcome manufactured_convergence() {
    const auto g = make_grid(1, {16});
    const auto spec = make_scalar_operator(1, 1, {"1 + u^2"}, "0");
    const auto u_star = expr::parse("exp(-t)*sin(x)", {1, 1});
    const auto t0 = std::chrono::steady_clock::now();
    const auto res = convergence_study(spec, u_star, g, 0.1, {4e-3, 2e-3, 1e-3}, 1e-12);
    const double secs = seconds_since(t0);
    std::string errs;
    for (const auto& r : res.rows) errs += fmt(r.error) + " ";
    return {res.monotone && res.order >= 1.85 && secs < 10.0,
            "errors " + errs + "order=" + fmt(res.order) + " (>=1.85), " + fmt(secs) + " s (<10)"};
}

// 3. Newton tail r_{k+1} <= kappa r_k^2, kappa within +-50% across 16/32
// modes, <= 5 iterations to 1e-10.
Outcome newton_behavior() {
    const auto spec = make_scalar_operator(1, 1, {"1"}, "u^2");
    std::vector<double> kappas;
    Outcome o{true, ""};
    for (int N : {16, 32}) {
        const auto g = make_grid(1, {N});
        const auto sol = solve_quasilinear(spec, sine(g, 0.1), 0.1, 1e-3, 1e-10);
        const auto& h = sol.newton_history;
        const int steps = static_cast<int>(h.size()) - 1;
        // Tail constant from the last step; every earlier step must respect it.
        double kappa = std::numeric_limits<double>::quiet_NaN();
        bool quadratic = steps >= 1;
        if (quadratic) {
            const auto n = static_cast<std::size_t>(steps);
            kappa = h[n] / (h[n - 1] * h[n - 1]);
            for (std::size_t k = 1; k < n; ++k) quadratic = quadratic && h[k + 1] <= kappa * h[k] * h[k];
        }
        kappas.push_back(kappa);
        o.pass = o.pass && sol.converged && steps <= 5 && h.back() <= 1e-10 && quadratic;
        std::string hist;
        for (double r : h) hist += fmt(r) + " ";
        o.detail += "N=" + std::to_string(N) + ": history " + hist + "kappa=" + fmt(kappa) + "; ";
    }
    const double rel = std::abs(kappas[1] / kappas[0] - 1.0);
    o.pass = o.pass && rel <= 0.5;
    o.detail += "kappa drift " + fmt(rel) + " (<=0.5)";
    return o;
}

// 4. Jet a_2 for u_t = u_xx + u^2 from sin x, to 1e-10 pointwise.
Outcome jet_golden() {
    const auto g = make_grid(1, {16});
    const auto jet = build_jet(make_scalar_operator(1, 1, {"1"}, "u^2"), sine(g, 1.0), 3);
    const auto golden = ScalarField::sample(g, [](const std::array<double, 3>& x) {
        const double s = std::sin(x[0]);
        return s + 2 * std::cos(2 * x[0]) - 2 * s * s + 2 * s * s * s;
    });
    const double err = (jet.a[2] - golden).max_abs();
    return {err <= 1e-10, "max |a_2 - golden| = " + fmt(err) + " (<=1e-10)"};
}

// 5. Garding certificates over 1000 random samples.
Outcome garding() {
    const auto g = make_grid(1, {16});
    const auto bih = make_scalar_operator(2, 1, {"1", "1"}, "0");
    const auto heat = make_scalar_operator(1, 1, {"1"}, "0");
    const auto c1 = verify_garding(bih, StateJet::of(ScalarField(g), 0.0, 2), 1.0 / 3, 1.0 / 3, 1000, 1);
    const auto c2 = verify_garding(heat, StateJet::of(ScalarField(g), 0.0, 1), 0.5, 0.5, 1000, 1);
    const auto c3 = verify_garding(heat, StateJet::of(ScalarField(g), 0.0, 1), 2.0, 0.0, 1000, 1);
    const bool constant_violator = c3.worst_sample == "mode k=(0) cos";
    return {c1.valid() && c2.valid() && !c3.valid() && constant_violator,
            "biharmonic margin=" + fmt(c1.worst_margin) + ", heat margin=" + fmt(c2.worst_margin) +
                " (>=-1e-10); inflated margin=" + fmt(c3.worst_margin) + " at '" + c3.worst_sample + "'"};
}

// 6. GN constant between oracles and within 5% of the envelope at 64 modes.
Outcome gn() {
    const auto g = make_grid(1, {64});
    Outcome o{true, ""};
    for (double eps : {1.0, 0.1, 0.01}) {
        const double c = verify_gn_interpolation(1, 1, eps, 200, g, 1);
        const double lo = gn_integer_oracle(1, 1, eps, g);
        const double hi = gn_real_envelope(1, 1, eps);
        const bool between = c >= lo - 1e-9 && c <= hi + 1e-9;
        const bool near = std::abs(c - hi) <= 0.05 * hi;
        o.pass = o.pass && between && near;
        o.detail += "eps=" + fmt(eps) + ": " + fmt(lo) + " <= " + fmt(c) + " <= " + fmt(hi) + (between ? "" : " VIOLATED") +
                    ", gap " + fmt(std::abs(c - hi) / hi) + " (<=0.05); ";
    }
    return o;
}

// 7. min_order threshold against exact rational arithmetic.
Outcome min_order_threshold() {
    bool ok = min_order(1, 1) == 2 && min_order(2, 2) == 2 && min_order(6, 1) == 3;
    int matched = 0;
    for (int n = 1; n <= 6; ++n)
        for (int p = 1; p <= 3; ++p) {
            // Smallest integer m with 4pm > n + 6p - 2.
            int m = 0;
            while (4 * p * m <= n + 6 * p - 2) ++m;
            if (min_order(n, p) == m) ++matched;
        }
    ok = ok && matched == 18;
    return {ok, "examples (1,1)->" + std::to_string(min_order(1, 1)) + " (2,2)->" + std::to_string(min_order(2, 2)) +
                    " (6,1)->" + std::to_string(min_order(6, 1)) + "; " + std::to_string(matched) + "/18 cases match"};
}

// 8. Embedding regimes and bounded sup ratios.
Outcome embedding() {
    const auto a = embedding_exponent(1, 1, 1, 0, 0);
    const auto b = embedding_exponent(1, 1, 1, 0, 2);
    bool ok = a.regime == Regime::Supercritical && b.regime == Regime::Subcritical && b.q && *b.q == Rational{2, 1};
    std::string detail = "(l=0) " + to_string(a.regime) + ", (l=2) " + to_string(b.regime) +
                         (b.q ? " q=" + std::to_string(b.q->num) + "/" + std::to_string(b.q->den) : "") + "; growth";
    for (int l : {0, 2}) {
        const auto rep = verify_embedding({1, 1, 1, 0, l}, 100, {16, 32, 64}, 1);
        ok = ok && rep.passed();
        detail += " l=" + std::to_string(l) + ": " + fmt(rep.max_growth);
    }
    return {ok, detail + " (<=0.10)"};
}

// 9. Newton vs damped Picard, and the energy of their difference.
Outcome uniqueness() {
    const auto g = make_grid(1, {16});
    const auto spec = make_scalar_operator(1, 1, {"1"}, "u^2");
    const double tol = 1e-10, dt = 1e-3, T = 0.1;
    const auto u0 = sine(g, 0.1);
    const auto newton = solve_quasilinear(spec, u0, T, dt, tol);
    const auto picard = solve_picard(spec, u0, T, dt, tol);
    const auto fine = solve_quasilinear(spec, u0, T, dt / 2, tol);
    Trajectory sub = newton.trajectory;
    for (std::size_t k = 0; k < sub.states.size(); ++k) sub.states[k] = fine.trajectory.states[2 * k];
    const double disc = parabolic_norm(difference(newton.trajectory, sub), 1, 1);
    const double dist = parabolic_norm(difference(newton.trajectory, picard.trajectory), 1, 1);
    const auto energy = energy_monitor(newton.trajectory, picard.trajectory, 1);
    const bool ok = newton.halvings == 0 && dist <= 10 * std::max(tol, disc) && energy.series.front().E == 0.0 &&
                    energy.max_energy <= 1e-16 + tol;
    return {ok, "P1 distance=" + fmt(dist) + " (<=10*max(tol, " + fmt(disc) + ")), max E=" + fmt(energy.max_energy) +
                    " (<=1e-16+tol)"};
}

// 10. Output/input distance ratios within a factor 3, runtime < 60 s.
Outcome dependence() {
    const auto g = make_grid(1, {16});
    const auto spec = make_scalar_operator(1, 1, {"1"}, "u^2");
    std::vector<ScalarField> deltas;
    for (int k = 1; k <= 8; ++k) deltas.push_back(sine(g, std::ldexp(1.0, -k)));
    const auto t0 = std::chrono::steady_clock::now();
    const auto pts = continuous_dependence_probe(spec, sine(g, 0.1), deltas, 0.1, 1e-3, 1e-10);
    const double secs = seconds_since(t0);
    double lo = std::numeric_limits<double>::infinity(), hi = 0.0;
    bool failed = false;
    for (const auto& pt : pts) {
        failed = failed || pt.failed;
        lo = std::min(lo, pt.output_distance / pt.input_distance);
        hi = std::max(hi, pt.output_distance / pt.input_distance);
    }
    return {!failed && hi / lo <= 3.0 && secs < 60.0,
            "ratios in [" + fmt(lo) + ", " + fmt(hi) + "], spread " + fmt(hi / lo) + " (<=3), " + fmt(secs) + " s (<60)"};
}

// 11. Directional derivative check: O(h^2) for nonlinear specs, <= 1e-12 for
// constant coefficients.
Outcome linearization() {
    const auto g = make_grid(1, {16});
    const std::vector<double> hs = {std::ldexp(1.0, -10), std::ldexp(1.0, -11), std::ldexp(1.0, -12)};
    auto mismatches = [&](const OperatorSpec& spec, double amp) {
        const auto base = solve_quasilinear(spec, sine(g, amp), 0.01, 1e-3, 1e-10).trajectory;
        Trajectory dir = base;
        for (auto& s : dir.states) s = ScalarField::sample(g, [](const std::array<double, 3>& x) { return std::cos(x[0]); });
        std::vector<double> out;
        for (double h : hs) out.push_back(directional_derivative_check(spec, base, dir, h));
        return out;
    };
    Outcome o{true, ""};
    for (const auto& [name, spec] : {std::pair{"b=u^2", make_scalar_operator(1, 1, {"1"}, "u^2")},
                                     std::pair{"E=1+u^2", make_scalar_operator(1, 1, {"1 + u^2"}, "0")}}) {
        const auto m = mismatches(spec, 0.5);
        o.detail += std::string(name) + ":";
        for (std::size_t i = 1; i < m.size(); ++i) {
            const double ratio = m[i - 1] / m[i];
            o.pass = o.pass && std::abs(ratio - 4.0) <= 0.5;
            o.detail += " " + fmt(ratio);
        }
        o.detail += " (4+-0.5); ";
    }
    for (const auto& [name, spec] : {std::pair{"heat", make_scalar_operator(1, 1, {"1"}, "0")},
                                     std::pair{"biharmonic", make_scalar_operator(2, 1, {"1", "1"}, "0")}}) {
        const auto m = mismatches(spec, 0.1);
        const double worst = *std::max_element(m.begin(), m.end());
        o.pass = o.pass && worst <= 1e-12;
        o.detail += std::string(name) + " max=" + fmt(worst) + " (<=1e-12); ";
    }
    return o;
}

std::set<int> parse_list(const std::string& s) {
    std::set<int> out;
    std::stringstream ss(s);
    std::string item;
    while (std::getline(ss, item, ',')) out.insert(std::stoi(item));
    return out;
}

}  // namespace

int main(int argc, char** argv) {
    std::set<int> expected_fail;
    for (int i = 1; i < argc; ++i) {
        const std::string arg = argv[i];
        if (arg == "--expect-fail" && i + 1 < argc) expected_fail = parse_list(argv[++i]);
        else {
            std::fprintf(stderr, "usage: %s [--expect-fail 6,11]\n", argv[0]);
            return 2;
        }
    }

    const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria = {
        {"exact linear decay", exact_linear_decay},
        {"manufactured quasilinear convergence", manufactured_convergence},
        {"newton quadratic tail", newton_behavior},
        {"jet golden values", jet_golden},
        {"garding certificates", garding},
        {"gagliardo-nirenberg interpolation", gn},
        {"minimal jet order threshold", min_order_threshold},
        {"embedding regimes", embedding},
        {"uniqueness cross-check", uniqueness},
        {"continuous dependence", dependence},
        {"linearization correctness", linearization},
    };
    std::set<int> failed;
    for (std::size_t i = 0; i < criteria.size(); ++i) {
        const int id = static_cast<int>(i + 1);
        Outcome o;
        try {
            o = criteria[i].second();
        } catch (const std::exception& e) {
            o = {false, std::string("exception: ") + e.what()};
        }
        if (!o.pass) failed.insert(id);
        std::printf("[%s] %2d %s: %s\n", o.pass ? "PASS" : "FAIL", id, criteria[i].first.c_str(), o.detail.c_str());
        std::fflush(stdout);
    }
    std::printf("%zu/%zu criteria pass\n", criteria.size() - failed.size(), criteria.size());
    if (argc == 1) return failed.empty() ? 0 : 1;
    if (failed == expected_fail) {
        std::printf("failing set matches the documented unattainable set\n");
        return 0;
    }
    std::printf("failing set differs from the documented unattainable set\n");
    return 1;
}
