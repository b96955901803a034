#pragma once

// Coefficient functions as immutable expression trees over the slots
// (x, t, u, grad u, ..., grad^{2p-1} u). Trees support formal differentiation
// with respect to any slot and evaluation on arrays, either plainly or as
// truncated Taylor series in t.

#include <compare>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "qlp/torus.hpp"

namespace qlp::expr {

/// A variable a coefficient may read. Jet slots carry a sorted multi-index;
/// the empty index is u itself.
struct Slot {
    enum class Kind { X, T, Jet };
    Kind kind = Kind::Jet;
    int axis = 0;
    MultiIndex index;

    static Slot coord(int axis) { return {Kind::X, axis, {}}; }
    static Slot time() { return {Kind::T, 0, {}}; }
    static Slot jet(MultiIndex index);
    static Slot value() { return {Kind::Jet, 0, {}}; }

    int order() const { return kind == Kind::Jet ? static_cast<int>(index.size()) : -1; }
    std::string name() const;
    auto operator<=>(const Slot&) const = default;
    bool operator==(const Slot&) const = default;
};

/// Number of ordered index tuples that sort to `index` (n^k tuples over all).
int multiplicity(const MultiIndex& index);

enum class Op { Const, Var, Add, Mul, Neg, Div, PowConst, Sin, Cos, Exp, Abs, Sign, Norm, SmoothStep, SafeDiv };

struct Node;
using Expr = std::shared_ptr<const Node>;

struct Node {
    Op op = Op::Const;
    double value = 0.0;  // constant, exponent, or smoothstep derivative order
    Slot slot;
    std::vector<Expr> args;
    std::vector<double> weights;  // Norm only
};

Expr constant(double v);
Expr var(Slot s);
Expr add(Expr a, Expr b);
Expr sub(Expr a, Expr b);
Expr mul(Expr a, Expr b);
Expr neg(Expr a);
Expr div(Expr a, Expr b);
Expr pow(Expr a, double exponent);
Expr sin(Expr a);
Expr cos(Expr a);
Expr exp(Expr a);
Expr abs(Expr a);
Expr sign(Expr a);
/// sqrt(sum_i w_i a_i^2); its gradient is taken as 0 where the norm vanishes.
Expr norm(std::vector<Expr> args, std::vector<double> weights);
/// Clamped quintic 6y^5-15y^4+10y^3 on [0,1] (0 below, 1 above), or its
/// `order`-th derivative.
Expr smoothstep(Expr a, int order = 0);
/// a / b, defined as 0 where b == 0.
Expr safe_div(Expr a, Expr b);

bool is_constant(const Expr& e);
bool is_zero(const Expr& e);
double constant_value(const Expr& e);

/// Formal partial derivative.
Expr diff(const Expr& e, const Slot& s);
/// Every slot the tree reads.
std::vector<Slot> slots(const Expr& e);
/// Canonical text form (also used for structural equality).
std::string to_string(const Expr& e);

/// Array evaluation. The callback returns the node values of a slot.
using SlotArrays = std::function<std::span<const double>(const Slot&)>;
std::vector<double> evaluate(const Expr& e, const SlotArrays& env, std::size_t n);

/// Truncated Taylor series of arrays, normalized coefficients:
/// f(t) = sum_k coeff[k] t^k.
using Series = std::vector<std::vector<double>>;
using SlotSeries = std::function<const Series&(const Slot&)>;
Series evaluate_series(const Expr& e, const SlotSeries& env, std::size_t n, int order);

namespace series {
Series constant(std::span<const double> v, int order);
Series mul(const Series& a, const Series& b);
Series add(const Series& a, const Series& b);
}  // namespace series

/// Parser settings: spatial dimension and half-order p (jet slots of order
/// >= 2p are rejected).
struct ParseContext {
    int dims = 1;
    int p = 1;
};

/// Parses the coefficient mini-language: numbers, pi, u, t, x/y/z or x1..x3,
/// dKu and dKu_<axes>, + - * / ^, sin cos exp abs sqrt smoothstep.
Expr parse(std::string_view text, const ParseContext& ctx);

}  // namespace qlp::expr
