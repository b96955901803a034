#include "qlp/expr.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <map>
#include <numbers>
#include <set>
#include <sstream>

#include "qlp/error.hpp"
#include "qlp/kernels.hpp"

namespace qlp::expr {

Slot Slot::jet(MultiIndex index) {
    std::sort(index.begin(), index.end());
    return {Kind::Jet, 0, std::move(index)};
}

std::string Slot::name() const {
    switch (kind) {
        case Kind::X: return "x" + std::to_string(axis + 1);
        case Kind::T: return "t";
        case Kind::Jet: break;
    }
    if (index.empty()) return "u";
    std::string s = "d" + std::to_string(index.size()) + "u_";
    for (int i : index) s += std::to_string(i + 1);
    return s;
}

int multiplicity(const MultiIndex& index) {
    // k! / prod(count_a!)
    std::map<int, int> counts;
    for (int i : index) ++counts[i];
    double m = std::tgamma(static_cast<double>(index.size()) + 1.0);
    for (auto [axis, c] : counts) m /= std::tgamma(c + 1.0);
    return static_cast<int>(std::lround(m));
}

// ---------------------------------------------------------------------------
// Construction with constant folding

namespace {

Expr make(Op op, std::vector<Expr> args, double value = 0.0) {
    auto n = std::make_shared<Node>();
    n->op = op;
    n->args = std::move(args);
    n->value = value;
    return n;
}

}  // namespace

Expr constant(double v) {
    auto n = std::make_shared<Node>();
    n->op = Op::Const;
    n->value = v;
    return n;
}

Expr var(Slot s) {
    auto n = std::make_shared<Node>();
    n->op = Op::Var;
    n->slot = std::move(s);
    return n;
}

bool is_constant(const Expr& e) { return e->op == Op::Const; }
bool is_zero(const Expr& e) { return e->op == Op::Const && e->value == 0.0; }
double constant_value(const Expr& e) {
    if (!is_constant(e)) throw InvalidArgument("expression is not constant: " + to_string(e));
    return e->value;
}

Expr add(Expr a, Expr b) {
    if (is_constant(a) && is_constant(b)) return constant(a->value + b->value);
    if (is_zero(a)) return b;
    if (is_zero(b)) return a;
    return make(Op::Add, {std::move(a), std::move(b)});
}

Expr neg(Expr a) {
    if (is_constant(a)) return constant(-a->value);
    if (a->op == Op::Neg) return a->args[0];
    return make(Op::Neg, {std::move(a)});
}

Expr sub(Expr a, Expr b) {
    if (is_constant(a) && is_constant(b)) return constant(a->value - b->value);
    if (to_string(a) == to_string(b)) return constant(0.0);
    return add(std::move(a), neg(std::move(b)));
}

Expr mul(Expr a, Expr b) {
    if (is_constant(a) && is_constant(b)) return constant(a->value * b->value);
    if (is_zero(a) || is_zero(b)) return constant(0.0);
    if (is_constant(a) && a->value == 1.0) return b;
    if (is_constant(b) && b->value == 1.0) return a;
    if (is_constant(a) && a->value == -1.0) return neg(std::move(b));
    if (is_constant(b) && b->value == -1.0) return neg(std::move(a));
    return make(Op::Mul, {std::move(a), std::move(b)});
}

Expr div(Expr a, Expr b) {
    if (is_constant(b) && b->value == 0.0) throw InvalidArgument("division by constant zero");
    if (is_constant(a) && is_constant(b)) return constant(a->value / b->value);
    if (is_zero(a)) return constant(0.0);
    if (is_constant(b) && b->value == 1.0) return a;
    return make(Op::Div, {std::move(a), std::move(b)});
}

Expr pow(Expr a, double exponent) {
    if (is_constant(a)) return constant(std::pow(a->value, exponent));
    if (exponent == 0.0) return constant(1.0);
    if (exponent == 1.0) return a;
    return make(Op::PowConst, {std::move(a)}, exponent);
}

Expr sin(Expr a) { return is_constant(a) ? constant(std::sin(a->value)) : make(Op::Sin, {std::move(a)}); }
Expr cos(Expr a) { return is_constant(a) ? constant(std::cos(a->value)) : make(Op::Cos, {std::move(a)}); }
Expr exp(Expr a) { return is_constant(a) ? constant(std::exp(a->value)) : make(Op::Exp, {std::move(a)}); }
Expr abs(Expr a) { return is_constant(a) ? constant(std::abs(a->value)) : make(Op::Abs, {std::move(a)}); }

Expr sign(Expr a) {
    if (is_constant(a)) return constant(a->value > 0 ? 1.0 : (a->value < 0 ? -1.0 : 0.0));
    return make(Op::Sign, {std::move(a)});
}

Expr norm(std::vector<Expr> args, std::vector<double> weights) {
    if (args.size() != weights.size()) throw InvalidArgument("norm: weight count mismatch");
    auto n = std::make_shared<Node>();
    n->op = Op::Norm;
    n->args = std::move(args);
    n->weights = std::move(weights);
    return n;
}

namespace {

// k-th derivative of 6y^5 - 15y^4 + 10y^3 as ascending coefficients.
std::vector<double> smoothstep_poly(int order) {
    std::vector<double> c{0, 0, 0, 10, -15, 6};
    for (int k = 0; k < order; ++k) {
        if (c.size() <= 1) return {0.0};
        std::vector<double> d(c.size() - 1);
        for (std::size_t i = 1; i < c.size(); ++i) d[i - 1] = c[i] * static_cast<double>(i);
        c = std::move(d);
    }
    return c;
}

double poly_eval(const std::vector<double>& c, double y) {
    double v = 0.0;
    for (auto it = c.rbegin(); it != c.rend(); ++it) v = v * y + *it;
    return v;
}

double smoothstep_value(double y, int order) {
    if (y <= 0.0) return 0.0;
    if (y >= 1.0) return order == 0 ? 1.0 : 0.0;
    return poly_eval(smoothstep_poly(order), y);
}

}  // namespace

Expr smoothstep(Expr a, int order) {
    if (order > 5) return constant(0.0);
    if (is_constant(a)) return constant(smoothstep_value(a->value, order));
    return make(Op::SmoothStep, {std::move(a)}, order);
}

Expr safe_div(Expr a, Expr b) {
    if (is_zero(a)) return constant(0.0);
    return make(Op::SafeDiv, {std::move(a), std::move(b)});
}

// ---------------------------------------------------------------------------

Expr diff(const Expr& e, const Slot& s) {
    const auto& a = e->args;
    switch (e->op) {
        case Op::Const: return constant(0.0);
        case Op::Var: return constant(e->slot == s ? 1.0 : 0.0);
        case Op::Add: return add(diff(a[0], s), diff(a[1], s));
        case Op::Mul: return add(mul(diff(a[0], s), a[1]), mul(a[0], diff(a[1], s)));
        case Op::Neg: return neg(diff(a[0], s));
        case Op::Div: {
            auto da = diff(a[0], s);
            auto db = diff(a[1], s);
            return sub(div(da, a[1]), div(mul(a[0], db), mul(a[1], a[1])));
        }
        case Op::PowConst:
            return mul(mul(constant(e->value), pow(a[0], e->value - 1.0)), diff(a[0], s));
        case Op::Sin: return mul(cos(a[0]), diff(a[0], s));
        case Op::Cos: return neg(mul(sin(a[0]), diff(a[0], s)));
        case Op::Exp: return mul(e, diff(a[0], s));
        case Op::Abs: return mul(sign(a[0]), diff(a[0], s));
        case Op::Sign: return constant(0.0);
        case Op::Norm: {
            Expr sum = constant(0.0);
            for (std::size_t i = 0; i < a.size(); ++i) {
                auto di = diff(a[i], s);
                if (is_zero(di)) continue;
                sum = add(sum, mul(constant(e->weights[i]), mul(a[i], di)));
            }
            return safe_div(sum, e);
        }
        case Op::SmoothStep:
            return mul(smoothstep(a[0], static_cast<int>(e->value) + 1), diff(a[0], s));
        case Op::SafeDiv: {
            auto da = diff(a[0], s);
            auto db = diff(a[1], s);
            return sub(safe_div(da, a[1]), safe_div(mul(a[0], db), mul(a[1], a[1])));
        }
    }
    return constant(0.0);
}

namespace {

void collect(const Expr& e, std::set<Slot>& out) {
    if (e->op == Op::Var) out.insert(e->slot);
    for (const auto& c : e->args) collect(c, out);
}

std::string fmt_double(double v) {
    std::ostringstream os;
    os.precision(17);
    os << v;
    return os.str();
}

}  // namespace

std::vector<Slot> slots(const Expr& e) {
    std::set<Slot> s;
    collect(e, s);
    return {s.begin(), s.end()};
}

std::string to_string(const Expr& e) {
    const auto& a = e->args;
    switch (e->op) {
        case Op::Const: return fmt_double(e->value);
        case Op::Var: return e->slot.name();
        case Op::Add: return "(" + to_string(a[0]) + " + " + to_string(a[1]) + ")";
        case Op::Mul: return "(" + to_string(a[0]) + " * " + to_string(a[1]) + ")";
        case Op::Neg: return "(-" + to_string(a[0]) + ")";
        case Op::Div: return "(" + to_string(a[0]) + " / " + to_string(a[1]) + ")";
        case Op::PowConst: return "(" + to_string(a[0]) + " ^ " + fmt_double(e->value) + ")";
        case Op::Sin: return "sin(" + to_string(a[0]) + ")";
        case Op::Cos: return "cos(" + to_string(a[0]) + ")";
        case Op::Exp: return "exp(" + to_string(a[0]) + ")";
        case Op::Abs: return "abs(" + to_string(a[0]) + ")";
        case Op::Sign: return "sign(" + to_string(a[0]) + ")";
        case Op::Norm: {
            std::string s = "norm(";
            for (std::size_t i = 0; i < a.size(); ++i)
                s += (i ? ", " : "") + fmt_double(e->weights[i]) + ":" + to_string(a[i]);
            return s + ")";
        }
        case Op::SmoothStep:
            return "smoothstep" + (e->value > 0 ? "_d" + fmt_double(e->value) : std::string()) + "(" +
                   to_string(a[0]) + ")";
        case Op::SafeDiv: return "safediv(" + to_string(a[0]) + ", " + to_string(a[1]) + ")";
    }
    return "?";
}

// ---------------------------------------------------------------------------
// Array evaluation

std::vector<double> evaluate(const Expr& e, const SlotArrays& env, std::size_t n) {
    const auto& a = e->args;
    std::vector<double> out(n);
    auto unary = [&](auto&& fn) {
        auto x = evaluate(a[0], env, n);
        for (std::size_t i = 0; i < n; ++i) out[i] = fn(x[i]);
        return out;
    };
    switch (e->op) {
        case Op::Const: std::fill(out.begin(), out.end(), e->value); return out;
        case Op::Var: {
            auto v = env(e->slot);
            if (v.size() != n) throw InvalidArgument("evaluate: slot " + e->slot.name() + " has wrong size");
            std::copy(v.begin(), v.end(), out.begin());
            return out;
        }
        case Op::Add: {
            auto x = evaluate(a[0], env, n);
            auto y = evaluate(a[1], env, n);
            kernels::add(x, y, out);
            return out;
        }
        case Op::Mul: {
            auto x = evaluate(a[0], env, n);
            auto y = evaluate(a[1], env, n);
            kernels::mul(x, y, out);
            return out;
        }
        case Op::Neg: return unary([](double x) { return -x; });
        case Op::Div: {
            auto x = evaluate(a[0], env, n);
            auto y = evaluate(a[1], env, n);
            for (std::size_t i = 0; i < n; ++i) out[i] = x[i] / y[i];
            return out;
        }
        case Op::PowConst: {
            const double c = e->value;
            if (c == 2.0) return unary([](double x) { return x * x; });
            return unary([c](double x) { return std::pow(x, c); });
        }
        case Op::Sin: return unary([](double x) { return std::sin(x); });
        case Op::Cos: return unary([](double x) { return std::cos(x); });
        case Op::Exp: return unary([](double x) { return std::exp(x); });
        case Op::Abs: return unary([](double x) { return std::abs(x); });
        case Op::Sign: return unary([](double x) { return x > 0 ? 1.0 : (x < 0 ? -1.0 : 0.0); });
        case Op::Norm: {
            std::fill(out.begin(), out.end(), 0.0);
            for (std::size_t k = 0; k < a.size(); ++k) {
                auto x = evaluate(a[k], env, n);
                for (std::size_t i = 0; i < n; ++i) out[i] += e->weights[k] * x[i] * x[i];
            }
            for (auto& v : out) v = std::sqrt(v);
            return out;
        }
        case Op::SmoothStep: {
            const int order = static_cast<int>(e->value);
            return unary([order](double y) { return smoothstep_value(y, order); });
        }
        case Op::SafeDiv: {
            auto x = evaluate(a[0], env, n);
            auto y = evaluate(a[1], env, n);
            for (std::size_t i = 0; i < n; ++i) out[i] = y[i] == 0.0 ? 0.0 : x[i] / y[i];
            return out;
        }
    }
    return out;
}

// ---------------------------------------------------------------------------
// Truncated Taylor series of arrays

namespace series {

Series constant(std::span<const double> v, int order) {
    Series s(static_cast<std::size_t>(order), std::vector<double>(v.size(), 0.0));
    if (order > 0) std::copy(v.begin(), v.end(), s[0].begin());
    return s;
}

Series add(const Series& a, const Series& b) {
    Series out(a.size(), std::vector<double>(a[0].size()));
    for (std::size_t k = 0; k < a.size(); ++k) kernels::add(a[k], b[k], out[k]);
    return out;
}

Series mul(const Series& a, const Series& b) {
    Series out(a.size(), std::vector<double>(a[0].size(), 0.0));
    for (std::size_t k = 0; k < a.size(); ++k)
        for (std::size_t j = 0; j <= k; ++j) kernels::fma(a[j], b[k - j], out[k]);
    return out;
}

}  // namespace series

namespace {

using series::mul;

Series zeros_like(std::size_t order, std::size_t n) { return Series(order, std::vector<double>(n, 0.0)); }

// Per-node recurrences: out_k = (1/k) sum_{j=1..k} j a_j g_{k-j} for exp; the
// sin/cos pair is coupled the same way.
Series exp_series(const Series& a) {
    const std::size_t K = a.size(), n = a[0].size();
    auto e = zeros_like(K, n);
    for (std::size_t i = 0; i < n; ++i) e[0][i] = std::exp(a[0][i]);
    for (std::size_t k = 1; k < K; ++k)
        for (std::size_t j = 1; j <= k; ++j) {
            const double w = static_cast<double>(j) / static_cast<double>(k);
            for (std::size_t i = 0; i < n; ++i) e[k][i] += w * a[j][i] * e[k - j][i];
        }
    return e;
}

std::pair<Series, Series> sincos_series(const Series& a) {
    const std::size_t K = a.size(), n = a[0].size();
    auto s = zeros_like(K, n);
    auto c = zeros_like(K, n);
    for (std::size_t i = 0; i < n; ++i) {
        s[0][i] = std::sin(a[0][i]);
        c[0][i] = std::cos(a[0][i]);
    }
    for (std::size_t k = 1; k < K; ++k)
        for (std::size_t j = 1; j <= k; ++j) {
            const double w = static_cast<double>(j) / static_cast<double>(k);
            for (std::size_t i = 0; i < n; ++i) {
                s[k][i] += w * a[j][i] * c[k - j][i];
                c[k][i] -= w * a[j][i] * s[k - j][i];
            }
        }
    return {std::move(s), std::move(c)};
}

// q_k = (a_k - sum_{j=1..k} b_j q_{k-j}) / b_0; nodes with b_0 == 0 give 0
// when `safe`.
Series div_series(const Series& a, const Series& b, bool safe) {
    const std::size_t K = a.size(), n = a[0].size();
    auto q = zeros_like(K, n);
    for (std::size_t i = 0; i < n; ++i) {
        const double b0 = b[0][i];
        if (safe && b0 == 0.0) continue;
        for (std::size_t k = 0; k < K; ++k) {
            double v = a[k][i];
            for (std::size_t j = 1; j <= k; ++j) v -= b[j][i] * q[k - j][i];
            q[k][i] = v / b0;
        }
    }
    return q;
}

// y = a^c with y_k = 1/(k a_0) sum_{j=1..k} ((c+1) j - k) a_j y_{k-j}.
// Small nonnegative integer exponents use repeated products (valid at a_0 = 0).
Series pow_series(const Series& a, double c, bool zero_safe) {
    const std::size_t K = a.size(), n = a[0].size();
    if (c >= 0.0 && c == std::floor(c) && c <= 16.0) {
        std::vector<double> ones(n, 1.0);
        auto result = series::constant(ones, static_cast<int>(K));
        for (int r = 0; r < static_cast<int>(c); ++r) result = mul(result, a);
        return result;
    }
    auto y = zeros_like(K, n);
    for (std::size_t i = 0; i < n; ++i) {
        const double a0 = a[0][i];
        if (a0 == 0.0 && zero_safe) continue;
        y[0][i] = std::pow(a0, c);
        for (std::size_t k = 1; k < K; ++k) {
            double v = 0.0;
            for (std::size_t j = 1; j <= k; ++j)
                v += ((c + 1.0) * static_cast<double>(j) - static_cast<double>(k)) * a[j][i] * y[k - j][i];
            y[k][i] = v / (static_cast<double>(k) * a0);
        }
    }
    return y;
}

Series smoothstep_series(const Series& a, int order) {
    const std::size_t K = a.size(), n = a[0].size();
    const auto poly = smoothstep_poly(order);
    auto out = zeros_like(K, n);
    for (std::size_t i = 0; i < n; ++i) {
        const double y0 = a[0][i];
        if (y0 <= 0.0 || y0 >= 1.0) {
            out[0][i] = smoothstep_value(y0, order);
            continue;
        }
        // Horner on the scalar series of this node.
        std::vector<double> acc(K, 0.0);
        for (auto it = poly.rbegin(); it != poly.rend(); ++it) {
            std::vector<double> next(K, 0.0);
            for (std::size_t k = 0; k < K; ++k)
                for (std::size_t j = 0; j <= k; ++j) next[k] += acc[j] * a[k - j][i];
            next[0] += *it;
            acc = std::move(next);
        }
        for (std::size_t k = 0; k < K; ++k) out[k][i] = acc[k];
    }
    return out;
}

}  // namespace

Series evaluate_series(const Expr& e, const SlotSeries& env, std::size_t n, int order) {
    const auto K = static_cast<std::size_t>(order);
    const auto& a = e->args;
    auto arg = [&](std::size_t i) { return evaluate_series(a[i], env, n, order); };
    switch (e->op) {
        case Op::Const: {
            std::vector<double> v(n, e->value);
            return series::constant(v, order);
        }
        case Op::Var: {
            const auto& s = env(e->slot);
            if (s.size() < K) throw InvalidArgument("evaluate_series: slot series too short");
            return Series(s.begin(), s.begin() + static_cast<std::ptrdiff_t>(K));
        }
        case Op::Add: return series::add(arg(0), arg(1));
        case Op::Mul: return mul(arg(0), arg(1));
        case Op::Neg: {
            auto x = arg(0);
            for (auto& c : x) kernels::scale(-1.0, c, c);
            return x;
        }
        case Op::Div: return div_series(arg(0), arg(1), false);
        case Op::SafeDiv: return div_series(arg(0), arg(1), true);
        case Op::PowConst: return pow_series(arg(0), e->value, false);
        case Op::Sin: return sincos_series(arg(0)).first;
        case Op::Cos: return sincos_series(arg(0)).second;
        case Op::Exp: return exp_series(arg(0));
        case Op::Abs: {
            auto x = arg(0);
            for (std::size_t i = 0; i < n; ++i) {
                double sgn = 0.0;
                for (std::size_t k = 0; k < K && sgn == 0.0; ++k)
                    sgn = x[k][i] > 0 ? 1.0 : (x[k][i] < 0 ? -1.0 : 0.0);
                for (std::size_t k = 0; k < K; ++k) x[k][i] *= sgn;
            }
            return x;
        }
        case Op::Sign: {
            auto x = arg(0);
            auto out = zeros_like(K, n);
            for (std::size_t i = 0; i < n; ++i) out[0][i] = x[0][i] > 0 ? 1.0 : (x[0][i] < 0 ? -1.0 : 0.0);
            return out;
        }
        case Op::Norm: {
            auto sum = zeros_like(K, n);
            for (std::size_t k = 0; k < a.size(); ++k) {
                auto x = arg(k);
                auto sq = mul(x, x);
                for (std::size_t j = 0; j < K; ++j) kernels::axpy(e->weights[k], sq[j], sum[j]);
            }
            return pow_series(sum, 0.5, true);
        }
        case Op::SmoothStep: return smoothstep_series(arg(0), static_cast<int>(e->value));
    }
    return zeros_like(K, n);
}

// ---------------------------------------------------------------------------
// Parser

namespace {

class Parser {
public:
    Parser(std::string_view text, const ParseContext& ctx) : text_(text), ctx_(ctx) {}

    Expr parse_all() {
        auto e = parse_sum();
        skip_ws();
        if (pos_ != text_.size()) fail("unexpected '" + std::string(1, text_[pos_]) + "'");
        return e;
    }

private:
    [[noreturn]] void fail(const std::string& msg) const {
        throw InvalidArgument("expression \"" + std::string(text_) + "\" at " + std::to_string(pos_) + ": " + msg);
    }

    void skip_ws() {
        while (pos_ < text_.size() && std::isspace(static_cast<unsigned char>(text_[pos_]))) ++pos_;
    }

    bool accept(std::string_view tok) {
        skip_ws();
        if (text_.substr(pos_, tok.size()) == tok) {
            pos_ += tok.size();
            return true;
        }
        return false;
    }

    Expr parse_sum() {
        auto e = parse_product();
        for (;;) {
            if (accept("+")) e = add(e, parse_product());
            else if (accept("-")) e = sub(e, parse_product());
            else return e;
        }
    }

    Expr parse_product() {
        auto e = parse_unary();
        for (;;) {
            if (accept("*") || accept("\xC3\x97")) e = mul(e, parse_unary());
            else if (accept("/")) e = div(e, parse_unary());
            else return e;
        }
    }

    Expr parse_unary() {
        if (accept("-")) return neg(parse_unary());
        if (accept("+")) return parse_unary();
        return parse_power();
    }

    Expr parse_power() {
        auto base = parse_primary();
        if (accept("^")) {
            auto ex = parse_unary();
            if (!is_constant(ex)) fail("exponent must be constant (no series rule for variable exponents)");
            return pow(base, ex->value);
        }
        return base;
    }

    Expr parse_primary() {
        skip_ws();
        if (pos_ >= text_.size()) fail("unexpected end of input");
        const char c = text_[pos_];
        if (c == '(') {
            ++pos_;
            auto e = parse_sum();
            if (!accept(")")) fail("expected ')'");
            return e;
        }
        if (std::isdigit(static_cast<unsigned char>(c)) || c == '.') return parse_number();
        if (std::isalpha(static_cast<unsigned char>(c))) return parse_identifier();
        fail("unexpected '" + std::string(1, c) + "'");
    }

    Expr parse_number() {
        const char* begin = text_.data() + pos_;
        char* end = nullptr;
        const double v = std::strtod(begin, &end);
        if (end == begin) fail("bad number");
        pos_ += static_cast<std::size_t>(end - begin);
        return constant(v);
    }

    Expr parse_identifier() {
        const std::size_t start = pos_;
        while (pos_ < text_.size() &&
               (std::isalnum(static_cast<unsigned char>(text_[pos_])) || text_[pos_] == '_'))
            ++pos_;
        const std::string id(text_.substr(start, pos_ - start));

        static const std::map<std::string, Expr (*)(Expr)> functions{
            {"sin", [](Expr a) { return sin(std::move(a)); }},
            {"cos", [](Expr a) { return cos(std::move(a)); }},
            {"exp", [](Expr a) { return exp(std::move(a)); }},
            {"abs", [](Expr a) { return abs(std::move(a)); }},
            {"sqrt", [](Expr a) { return pow(std::move(a), 0.5); }},
            {"smoothstep", [](Expr a) { return smoothstep(std::move(a), 0); }},
        };
        if (auto it = functions.find(id); it != functions.end()) {
            if (!accept("(")) fail("expected '(' after " + id);
            auto arg = parse_sum();
            if (!accept(")")) fail("expected ')'");
            return it->second(std::move(arg));
        }
        if (id == "pi") return constant(std::numbers::pi);
        if (id == "t") return var(Slot::time());
        if (id == "u") return var(Slot::value());
        if (id == "x" || id == "y" || id == "z") {
            const int axis = id[0] - 'x';
            if (axis >= ctx_.dims) fail("coordinate " + id + " exceeds dimension " + std::to_string(ctx_.dims));
            return var(Slot::coord(axis));
        }
        if (id.size() == 2 && id[0] == 'x' && id[1] >= '1' && id[1] <= '3') {
            const int axis = id[1] - '1';
            if (axis >= ctx_.dims) fail("coordinate " + id + " exceeds dimension " + std::to_string(ctx_.dims));
            return var(Slot::coord(axis));
        }
        if (id.size() >= 3 && id[0] == 'd' && std::isdigit(static_cast<unsigned char>(id[1]))) return jet_slot(id);
        fail("unknown identifier '" + id + "'");
    }

    // dKu or dKu_<axes>
    Expr jet_slot(const std::string& id) {
        std::size_t i = 1;
        int k = 0;
        while (i < id.size() && std::isdigit(static_cast<unsigned char>(id[i]))) k = 10 * k + (id[i++] - '0');
        if (i >= id.size() || id[i] != 'u') fail("malformed derivative slot '" + id + "'");
        ++i;
        if (k >= 2 * ctx_.p)
            fail("coefficients may read only up to grad^" + std::to_string(2 * ctx_.p - 1) + " u, got '" + id + "'");
        if (k == 0) return var(Slot::value());
        MultiIndex index;
        if (i == id.size()) {
            if (ctx_.dims != 1) fail("slot '" + id + "' needs explicit axes (e.g. d2u_12) when n > 1");
            index.assign(static_cast<std::size_t>(k), 0);
        } else {
            if (id[i] != '_') fail("malformed derivative slot '" + id + "'");
            for (++i; i < id.size(); ++i) {
                const int axis = id[i] - '1';
                if (axis < 0 || axis >= ctx_.dims) fail("axis out of range in '" + id + "'");
                index.push_back(axis);
            }
            if (static_cast<int>(index.size()) != k) fail("slot '" + id + "' lists the wrong number of axes");
        }
        return var(Slot::jet(std::move(index)));
    }

    std::string_view text_;
    ParseContext ctx_;
    std::size_t pos_ = 0;
};

}  // namespace

Expr parse(std::string_view text, const ParseContext& ctx) { return Parser(text, ctx).parse_all(); }

}  // namespace qlp::expr
