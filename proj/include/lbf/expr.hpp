#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "lbf/interval.hpp"

namespace lbf {

enum class Op : uint8_t {
    Const,   // value (tunable flag marks const-production literals)
    Var,     // variable (kind, index)
    Param,   // parameter slot
    Neg,
    Add,
    Sub,
    Mul,
    Div,
    Pow,     // integer exponent >= 0
    Sin,
    Cos,
    Exp,
    Sqrt,
    Min,
    Max,
    Sign,    // outer-semicontinuous; nonsmooth
    Sat,     // sat(lo,hi; x); nonsmooth

    // Grammar template placeholders. These never appear in phenotypes or
    // anywhere downstream of the grammar module.
    NtRef,      // reference to nonterminal (index)
    ConstDraw,  // random-real terminal with range in sat_lo/sat_hi
};

enum class VarKind : uint8_t { State, Input, Disturbance, Output, Aux };

struct ExprNode;
using ExprPtr = std::shared_ptr<const ExprNode>;

struct ExprNode {
    Op op = Op::Const;
    double value = 0.0;       // Const
    bool tunable = false;     // Const originating from a `const` production
    VarKind kind = VarKind::State;
    int index = 0;            // Var / Param
    int ipow = 0;             // Pow exponent
    double sat_lo = 0.0, sat_hi = 0.0;
    ExprPtr a, b;
};

class ExprError : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
};
class NonsmoothDifferentiation : public ExprError {
  public:
    using ExprError::ExprError;
};

// Immutable symbolic expression; value-semantic handle over a shared tree.
class Expr {
  public:
    Expr() : node_(constant_node(0.0)) {}
    explicit Expr(ExprPtr n) : node_(std::move(n)) {}

    static Expr constant(double v, bool tunable = false);
    static Expr var(VarKind kind, int index);
    static Expr state(int index) { return var(VarKind::State, index); }
    static Expr input(int index) { return var(VarKind::Input, index); }
    static Expr disturbance(int index) { return var(VarKind::Disturbance, index); }
    static Expr output(int index) { return var(VarKind::Output, index); }
    static Expr aux(int index) { return var(VarKind::Aux, index); }
    static Expr param(int slot);

    static Expr pow(Expr base, int exponent);
    static Expr sin(Expr x);
    static Expr cos(Expr x);
    static Expr exp(Expr x);
    static Expr sqrt(Expr x);
    static Expr min(Expr x, Expr y);
    static Expr max(Expr x, Expr y);
    static Expr sign(Expr x);
    static Expr sat(double lo, double hi, Expr x);
    static Expr nt_ref(int index);
    static Expr const_draw(double lo, double hi);

    const ExprNode& node() const { return *node_; }
    const ExprPtr& ptr() const { return node_; }
    Op op() const { return node_->op; }

    bool is_constant() const { return node_->op == Op::Const; }
    double constant_value() const { return node_->value; }

    size_t size() const;          // node count
    bool contains_nonsmooth() const;

    friend Expr operator+(Expr a, Expr b);
    friend Expr operator-(Expr a, Expr b);
    friend Expr operator*(Expr a, Expr b);
    friend Expr operator/(Expr a, Expr b);
    friend Expr operator-(Expr a);

  private:
    static ExprPtr constant_node(double v);
    ExprPtr node_;
};

// Variable bindings for pointwise evaluation. Spans may be empty when the
// expression does not reference that kind.
struct EvalContext {
    std::span<const double> state;
    std::span<const double> input;
    std::span<const double> disturbance;
    std::span<const double> output;
    std::span<const double> aux;
    std::span<const double> params;
};

// Pointwise evaluation; domain errors (sqrt of negative, division by zero)
// yield NaN, which callers treat as maximal error. sign(0) evaluates to 0.
double eval(const Expr& e, const EvalContext& ctx);
double eval(const Expr& e, std::span<const double> state,
            std::span<const double> params = {});

// Symbolic derivative w.r.t. a variable. Throws NonsmoothDifferentiation if
// a nonsmooth node (sign, sat, min, max) lies on the path to the variable.
Expr diff(const Expr& e, VarKind kind, int index);

struct IntervalContext {
    std::span<const Interval> state;
    std::span<const Interval> input;
    std::span<const Interval> disturbance;
    std::span<const Interval> output;
    std::span<const Interval> aux;
    std::span<const double> params;
};

// Interval enclosure of the range of e over the box. Never throws; possible
// domain violations (division by an interval containing 0, sqrt of a partly
// negative interval) set *defined = false.
Interval ieval(const Expr& e, const IntervalContext& ctx, bool* defined = nullptr);
Interval ieval(const Expr& e, std::span<const Interval> state,
               std::span<const double> params = {}, bool* defined = nullptr);

// Replaces every tunable constant with a parameter slot (in depth-first
// order, after any slots already present). Returns the initial values of
// the new slots.
std::pair<Expr, std::vector<double>> extract_params(const Expr& e);

// Substitutes parameter slots with (untunable) constants.
Expr bind_params(const Expr& e, std::span<const double> values);

int param_count(const Expr& e); // 1 + max slot index, 0 if none

// Substitutes variables of a given kind using the map kind/index -> Expr.
// Entries may be empty (unbound), in which case the variable is kept.
struct Substitution {
    std::vector<Expr> state, input, disturbance, output, aux;
    std::vector<bool> state_set, input_set, disturbance_set, output_set, aux_set;

    void set(VarKind kind, int index, Expr value);
};
Expr substitute(const Expr& e, const Substitution& sub);

// Replaces every subtree structurally equal to `pattern` by `replacement`.
Expr replace_subtree(const Expr& e, const Expr& pattern, const Expr& replacement);

bool structurally_equal(const Expr& a, const Expr& b);

// Light local simplification: constant folding, 0/1 identities. No
// polynomial expansion.
Expr simplify(const Expr& e);

// Expands products of sums over {+,-,*,pow} and collects monomials with
// exactly matching variable/parameter/atom factors, cancelling coefficients
// that sum to zero. Non-polynomial subtrees (sin, div, sat, ...) are treated
// as opaque atoms. Gives up (returns the simplified input) past `max_terms`.
Expr expand_collect(const Expr& e, size_t max_terms = 4096);

// Collects distinct maximal sign/sat subtrees (for region splitting).
void collect_nonsmooth_atoms(const Expr& e, std::vector<Expr>& atoms);

// Structural check: all variables referenced by e are within the given
// dimensions (negative dimension = kind not allowed).
bool vars_within(const Expr& e, int n_state, int n_input, int n_disturbance,
                 int n_output = -1, int n_aux = -1);

std::string to_string(const Expr& e);

// Infix parser for the problem-file expression syntax: operators + - * / ^
// (integer exponents), functions sin cos exp sqrt min max sign sat(lo,hi;x),
// variables s1..sn / u1..um / d1..dk / y1..yl, decimal literals.
struct ParseOptions {
    int n_state = -1;        // -1 = any index allowed
    int n_input = -1;
    int n_disturbance = -1;
    int n_output = -1;
    bool tunable_literals = false; // mark plain literals as tunable constants
    // Grammar context: when set, `<name>` parses to an NtRef (resolved or
    // appended here) and `const[lo,hi]` to a ConstDraw.
    std::vector<std::string>* nonterminals = nullptr;
};
Expr parse_expr(const std::string& text, const ParseOptions& opts = {});

} // namespace lbf
