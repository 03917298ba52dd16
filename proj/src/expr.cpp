#include "lbf/expr.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <functional>
#include <map>
#include <unordered_map>

namespace lbf {

namespace {

ExprPtr make_node(ExprNode n) { return std::make_shared<const ExprNode>(std::move(n)); }

ExprPtr unary(Op op, ExprPtr a) {
    ExprNode n;
    n.op = op;
    n.a = std::move(a);
    return make_node(std::move(n));
}

ExprPtr binary(Op op, ExprPtr a, ExprPtr b) {
    ExprNode n;
    n.op = op;
    n.a = std::move(a);
    n.b = std::move(b);
    return make_node(std::move(n));
}

bool is_const(const ExprPtr& p, double v) {
    return p->op == Op::Const && p->value == v && !p->tunable;
}

} // namespace

ExprPtr Expr::constant_node(double v) {
    ExprNode n;
    n.op = Op::Const;
    n.value = v;
    return make_node(std::move(n));
}

Expr Expr::constant(double v, bool tunable) {
    ExprNode n;
    n.op = Op::Const;
    n.value = v;
    n.tunable = tunable;
    return Expr(make_node(std::move(n)));
}

Expr Expr::var(VarKind kind, int index) {
    if (index < 0) throw ExprError("negative variable index");
    ExprNode n;
    n.op = Op::Var;
    n.kind = kind;
    n.index = index;
    return Expr(make_node(std::move(n)));
}

Expr Expr::param(int slot) {
    if (slot < 0) throw ExprError("negative parameter slot");
    ExprNode n;
    n.op = Op::Param;
    n.index = slot;
    return Expr(make_node(std::move(n)));
}

Expr operator+(Expr a, Expr b) { return Expr(binary(Op::Add, a.node_, b.node_)); }
Expr operator-(Expr a, Expr b) { return Expr(binary(Op::Sub, a.node_, b.node_)); }
Expr operator*(Expr a, Expr b) { return Expr(binary(Op::Mul, a.node_, b.node_)); }
Expr operator/(Expr a, Expr b) { return Expr(binary(Op::Div, a.node_, b.node_)); }
Expr operator-(Expr a) { return Expr(unary(Op::Neg, a.node_)); }

Expr Expr::pow(Expr base, int exponent) {
    if (exponent < 0) throw ExprError("negative exponent; use division");
    ExprNode n;
    n.op = Op::Pow;
    n.ipow = exponent;
    n.a = base.node_;
    return Expr(make_node(std::move(n)));
}
Expr Expr::sin(Expr x) { return Expr(unary(Op::Sin, x.node_)); }
Expr Expr::cos(Expr x) { return Expr(unary(Op::Cos, x.node_)); }
Expr Expr::exp(Expr x) { return Expr(unary(Op::Exp, x.node_)); }
Expr Expr::sqrt(Expr x) { return Expr(unary(Op::Sqrt, x.node_)); }
Expr Expr::min(Expr x, Expr y) { return Expr(binary(Op::Min, x.node_, y.node_)); }
Expr Expr::max(Expr x, Expr y) { return Expr(binary(Op::Max, x.node_, y.node_)); }
Expr Expr::sign(Expr x) { return Expr(unary(Op::Sign, x.node_)); }

Expr Expr::sat(double lo, double hi, Expr x) {
    if (!(lo <= hi)) throw ExprError("sat bounds out of order");
    ExprNode n;
    n.op = Op::Sat;
    n.sat_lo = lo;
    n.sat_hi = hi;
    n.a = x.node_;
    return Expr(make_node(std::move(n)));
}

Expr Expr::nt_ref(int index) {
    ExprNode n;
    n.op = Op::NtRef;
    n.index = index;
    return Expr(make_node(std::move(n)));
}

Expr Expr::const_draw(double lo, double hi) {
    if (!(lo <= hi)) throw ExprError("const range out of order");
    ExprNode n;
    n.op = Op::ConstDraw;
    n.sat_lo = lo;
    n.sat_hi = hi;
    return Expr(make_node(std::move(n)));
}

size_t Expr::size() const {
    size_t count = 0;
    std::function<void(const ExprNode&)> walk = [&](const ExprNode& n) {
        ++count;
        if (n.a) walk(*n.a);
        if (n.b) walk(*n.b);
    };
    walk(*node_);
    return count;
}

bool Expr::contains_nonsmooth() const {
    std::function<bool(const ExprNode&)> walk = [&](const ExprNode& n) -> bool {
        if (n.op == Op::Sign || n.op == Op::Sat || n.op == Op::Min || n.op == Op::Max)
            return true;
        if (n.a && walk(*n.a)) return true;
        if (n.b && walk(*n.b)) return true;
        return false;
    };
    return walk(*node_);
}

// ---------------------------------------------------------------------------
// evaluation

namespace {

double lookup(std::span<const double> v, int i, const char* what) {
    if (i < 0 || static_cast<size_t>(i) >= v.size())
        throw ExprError(std::string("unbound ") + what + " index " + std::to_string(i + 1));
    return v[i];
}

double eval_node(const ExprNode& n, const EvalContext& ctx) {
    switch (n.op) {
    case Op::Const: return n.value;
    case Op::Var:
        switch (n.kind) {
        case VarKind::State: return lookup(ctx.state, n.index, "state");
        case VarKind::Input: return lookup(ctx.input, n.index, "input");
        case VarKind::Disturbance: return lookup(ctx.disturbance, n.index, "disturbance");
        case VarKind::Output: return lookup(ctx.output, n.index, "output");
        case VarKind::Aux: return lookup(ctx.aux, n.index, "aux");
        }
        return 0;
    case Op::Param: return lookup(ctx.params, n.index, "parameter");
    case Op::Neg: return -eval_node(*n.a, ctx);
    case Op::Add: return eval_node(*n.a, ctx) + eval_node(*n.b, ctx);
    case Op::Sub: return eval_node(*n.a, ctx) - eval_node(*n.b, ctx);
    case Op::Mul: return eval_node(*n.a, ctx) * eval_node(*n.b, ctx);
    case Op::Div: {
        double d = eval_node(*n.b, ctx);
        if (d == 0.0) return std::numeric_limits<double>::quiet_NaN();
        return eval_node(*n.a, ctx) / d;
    }
    case Op::Pow: {
        double base = eval_node(*n.a, ctx);
        double r = 1.0;
        for (int i = 0; i < n.ipow; ++i) r *= base;
        return r;
    }
    case Op::Sin: return std::sin(eval_node(*n.a, ctx));
    case Op::Cos: return std::cos(eval_node(*n.a, ctx));
    case Op::Exp: return std::exp(eval_node(*n.a, ctx));
    case Op::Sqrt: {
        double x = eval_node(*n.a, ctx);
        if (x < 0.0) return std::numeric_limits<double>::quiet_NaN();
        return std::sqrt(x);
    }
    case Op::Min: return std::min(eval_node(*n.a, ctx), eval_node(*n.b, ctx));
    case Op::Max: return std::max(eval_node(*n.a, ctx), eval_node(*n.b, ctx));
    case Op::Sign: {
        double x = eval_node(*n.a, ctx);
        if (x > 0) return 1.0;
        if (x < 0) return -1.0;
        return 0.0; // point-sampling convention
    }
    case Op::Sat: {
        double x = eval_node(*n.a, ctx);
        return std::clamp(x, n.sat_lo, n.sat_hi);
    }
    case Op::NtRef:
    case Op::ConstDraw:
        throw ExprError("grammar placeholder in evaluated expression");
    }
    return 0;
}

} // namespace

double eval(const Expr& e, const EvalContext& ctx) { return eval_node(e.node(), ctx); }

double eval(const Expr& e, std::span<const double> state, std::span<const double> params) {
    EvalContext ctx;
    ctx.state = state;
    ctx.params = params;
    return eval_node(e.node(), ctx);
}

// ---------------------------------------------------------------------------
// differentiation

namespace {

bool depends_on(const ExprNode& n, VarKind kind, int index) {
    if (n.op == Op::Var) return n.kind == kind && n.index == index;
    if (n.a && depends_on(*n.a, kind, index)) return true;
    if (n.b && depends_on(*n.b, kind, index)) return true;
    return false;
}

} // namespace

Expr diff(const Expr& e, VarKind kind, int index) {
    const ExprNode& n = e.node();
    if (!depends_on(n, kind, index)) return Expr::constant(0.0);
    Expr a = n.a ? Expr(n.a) : Expr();
    Expr b = n.b ? Expr(n.b) : Expr();
    switch (n.op) {
    case Op::Var: return Expr::constant(1.0);
    case Op::Neg: return -diff(a, kind, index);
    case Op::Add: return diff(a, kind, index) + diff(b, kind, index);
    case Op::Sub: return diff(a, kind, index) - diff(b, kind, index);
    case Op::Mul:
        return simplify(diff(a, kind, index) * b + a * diff(b, kind, index));
    case Op::Div:
        return simplify((diff(a, kind, index) * b - a * diff(b, kind, index)) /
                        Expr::pow(b, 2));
    case Op::Pow:
        if (n.ipow == 0) return Expr::constant(0.0);
        return simplify(Expr::constant(static_cast<double>(n.ipow)) *
                        Expr::pow(a, n.ipow - 1) * diff(a, kind, index));
    case Op::Sin: return simplify(Expr::cos(a) * diff(a, kind, index));
    case Op::Cos: return simplify(-(Expr::sin(a) * diff(a, kind, index)));
    case Op::Exp: return simplify(Expr::exp(a) * diff(a, kind, index));
    case Op::Sqrt:
        return simplify(diff(a, kind, index) /
                        (Expr::constant(2.0) * Expr::sqrt(a)));
    case Op::Min:
    case Op::Max:
    case Op::Sign:
    case Op::Sat:
        throw NonsmoothDifferentiation("nonsmooth node on differentiation path");
    default:
        throw ExprError("cannot differentiate node");
    }
}

// ---------------------------------------------------------------------------
// interval evaluation

namespace {

Interval ilookup(std::span<const Interval> v, int i, const char* what) {
    if (i < 0 || static_cast<size_t>(i) >= v.size())
        throw ExprError(std::string("unbound ") + what + " index " + std::to_string(i + 1));
    return v[i];
}

Interval ieval_node(const ExprNode& n, const IntervalContext& ctx, bool& defined) {
    switch (n.op) {
    case Op::Const: return Interval::point(n.value);
    case Op::Var:
        switch (n.kind) {
        case VarKind::State: return ilookup(ctx.state, n.index, "state");
        case VarKind::Input: return ilookup(ctx.input, n.index, "input");
        case VarKind::Disturbance: return ilookup(ctx.disturbance, n.index, "disturbance");
        case VarKind::Output: return ilookup(ctx.output, n.index, "output");
        case VarKind::Aux: return ilookup(ctx.aux, n.index, "aux");
        }
        return {};
    case Op::Param: {
        double v = lookup(ctx.params, n.index, "parameter");
        return Interval::point(v);
    }
    case Op::Neg: return -ieval_node(*n.a, ctx, defined);
    case Op::Add: return ieval_node(*n.a, ctx, defined) + ieval_node(*n.b, ctx, defined);
    case Op::Sub: return ieval_node(*n.a, ctx, defined) - ieval_node(*n.b, ctx, defined);
    case Op::Mul: return ieval_node(*n.a, ctx, defined) * ieval_node(*n.b, ctx, defined);
    case Op::Div: {
        Interval num = ieval_node(*n.a, ctx, defined);
        Interval den = ieval_node(*n.b, ctx, defined);
        bool ok = true;
        Interval r = interval_div(num, den, &ok);
        if (!ok) defined = false;
        return r;
    }
    case Op::Pow: return interval_ipow(ieval_node(*n.a, ctx, defined), n.ipow);
    case Op::Sin: return interval_sin(ieval_node(*n.a, ctx, defined));
    case Op::Cos: return interval_cos(ieval_node(*n.a, ctx, defined));
    case Op::Exp: return interval_exp(ieval_node(*n.a, ctx, defined));
    case Op::Sqrt: {
        bool ok = true;
        Interval r = interval_sqrt(ieval_node(*n.a, ctx, defined), &ok);
        if (!ok) defined = false;
        return r;
    }
    case Op::Min: return interval_min(ieval_node(*n.a, ctx, defined), ieval_node(*n.b, ctx, defined));
    case Op::Max: return interval_max(ieval_node(*n.a, ctx, defined), ieval_node(*n.b, ctx, defined));
    case Op::Sign: return interval_sign(ieval_node(*n.a, ctx, defined));
    case Op::Sat: return interval_sat(ieval_node(*n.a, ctx, defined), n.sat_lo, n.sat_hi);
    case Op::NtRef:
    case Op::ConstDraw:
        throw ExprError("grammar placeholder in evaluated expression");
    }
    return {};
}

} // namespace

Interval ieval(const Expr& e, const IntervalContext& ctx, bool* defined) {
    bool ok = true;
    Interval r = ieval_node(e.node(), ctx, ok);
    if (defined) *defined = ok;
    return r;
}

Interval ieval(const Expr& e, std::span<const Interval> state,
               std::span<const double> params, bool* defined) {
    IntervalContext ctx;
    ctx.state = state;
    ctx.params = params;
    return ieval(e, ctx, defined);
}

// ---------------------------------------------------------------------------
// parameters

namespace {

ExprPtr extract_walk(const ExprPtr& p, std::vector<double>& values, int base) {
    if (p->op == Op::Const && p->tunable) {
        values.push_back(p->value);
        ExprNode n;
        n.op = Op::Param;
        n.index = base + static_cast<int>(values.size()) - 1;
        return make_node(std::move(n));
    }
    if (!p->a && !p->b) return p;
    ExprNode n = *p;
    if (p->a) n.a = extract_walk(p->a, values, base);
    if (p->b) n.b = extract_walk(p->b, values, base);
    return make_node(std::move(n));
}

} // namespace

int param_count(const Expr& e) {
    int maxslot = -1;
    std::function<void(const ExprNode&)> walk = [&](const ExprNode& n) {
        if (n.op == Op::Param) maxslot = std::max(maxslot, n.index);
        if (n.a) walk(*n.a);
        if (n.b) walk(*n.b);
    };
    walk(e.node());
    return maxslot + 1;
}

std::pair<Expr, std::vector<double>> extract_params(const Expr& e) {
    std::vector<double> values;
    int base = param_count(e);
    ExprPtr p = extract_walk(e.ptr(), values, base);
    return {Expr(p), values};
}

Expr bind_params(const Expr& e, std::span<const double> values) {
    std::function<ExprPtr(const ExprPtr&)> walk = [&](const ExprPtr& p) -> ExprPtr {
        if (p->op == Op::Param) {
            if (p->index < 0 || static_cast<size_t>(p->index) >= values.size())
                throw ExprError("parameter slot out of range in bind_params");
            ExprNode n;
            n.op = Op::Const;
            n.value = values[p->index];
            return make_node(std::move(n));
        }
        if (!p->a && !p->b) return p;
        ExprNode n = *p;
        if (p->a) n.a = walk(p->a);
        if (p->b) n.b = walk(p->b);
        return make_node(std::move(n));
    };
    return Expr(walk(e.ptr()));
}

// ---------------------------------------------------------------------------
// substitution and structural ops

void Substitution::set(VarKind kind, int index, Expr value) {
    auto place = [&](std::vector<Expr>& v, std::vector<bool>& s) {
        if (static_cast<size_t>(index) >= v.size()) {
            v.resize(index + 1);
            s.resize(index + 1, false);
        }
        v[index] = std::move(value);
        s[index] = true;
    };
    switch (kind) {
    case VarKind::State: place(state, state_set); break;
    case VarKind::Input: place(input, input_set); break;
    case VarKind::Disturbance: place(disturbance, disturbance_set); break;
    case VarKind::Output: place(output, output_set); break;
    case VarKind::Aux: place(aux, aux_set); break;
    }
}

Expr substitute(const Expr& e, const Substitution& sub) {
    std::function<ExprPtr(const ExprPtr&)> walk = [&](const ExprPtr& p) -> ExprPtr {
        if (p->op == Op::Var) {
            const std::vector<Expr>* v = nullptr;
            const std::vector<bool>* s = nullptr;
            switch (p->kind) {
            case VarKind::State: v = &sub.state; s = &sub.state_set; break;
            case VarKind::Input: v = &sub.input; s = &sub.input_set; break;
            case VarKind::Disturbance: v = &sub.disturbance; s = &sub.disturbance_set; break;
            case VarKind::Output: v = &sub.output; s = &sub.output_set; break;
            case VarKind::Aux: v = &sub.aux; s = &sub.aux_set; break;
            }
            if (static_cast<size_t>(p->index) < s->size() && (*s)[p->index])
                return (*v)[p->index].ptr();
            return p;
        }
        if (!p->a && !p->b) return p;
        ExprNode n = *p;
        if (p->a) n.a = walk(p->a);
        if (p->b) n.b = walk(p->b);
        return make_node(std::move(n));
    };
    return Expr(walk(e.ptr()));
}

bool structurally_equal(const Expr& a, const Expr& b) {
    std::function<bool(const ExprNode&, const ExprNode&)> eq =
        [&](const ExprNode& x, const ExprNode& y) -> bool {
        if (x.op != y.op) return false;
        switch (x.op) {
        case Op::Const: return x.value == y.value && x.tunable == y.tunable;
        case Op::Var: return x.kind == y.kind && x.index == y.index;
        case Op::Param: return x.index == y.index;
        case Op::Pow:
            if (x.ipow != y.ipow) return false;
            break;
        case Op::Sat:
        case Op::ConstDraw:
            if (x.sat_lo != y.sat_lo || x.sat_hi != y.sat_hi) return false;
            break;
        case Op::NtRef:
            return x.index == y.index;
        default: break;
        }
        if (static_cast<bool>(x.a) != static_cast<bool>(y.a)) return false;
        if (static_cast<bool>(x.b) != static_cast<bool>(y.b)) return false;
        if (x.a && !eq(*x.a, *y.a)) return false;
        if (x.b && !eq(*x.b, *y.b)) return false;
        return true;
    };
    return eq(a.node(), b.node());
}

Expr replace_subtree(const Expr& e, const Expr& pattern, const Expr& replacement) {
    std::function<ExprPtr(const ExprPtr&)> walk = [&](const ExprPtr& p) -> ExprPtr {
        if (structurally_equal(Expr(p), pattern)) return replacement.ptr();
        if (!p->a && !p->b) return p;
        ExprNode n = *p;
        if (p->a) n.a = walk(p->a);
        if (p->b) n.b = walk(p->b);
        return make_node(std::move(n));
    };
    return Expr(walk(e.ptr()));
}

// ---------------------------------------------------------------------------
// simplification

namespace {

ExprPtr simplify_node(const ExprPtr& p);

ExprPtr simplified_children(const ExprPtr& p) {
    if (!p->a && !p->b) return p;
    ExprNode n = *p;
    if (p->a) n.a = simplify_node(p->a);
    if (p->b) n.b = simplify_node(p->b);
    return make_node(std::move(n));
}

bool plain_const(const ExprPtr& p) { return p->op == Op::Const && !p->tunable; }

ExprPtr simplify_node(const ExprPtr& p0) {
    ExprPtr p = simplified_children(p0);
    const ExprNode& n = *p;
    auto cfold = [&](double v) { return Expr::constant(v).ptr(); };
    switch (n.op) {
    case Op::Neg:
        if (plain_const(n.a)) return cfold(-n.a->value);
        break;
    case Op::Add:
        if (plain_const(n.a) && plain_const(n.b)) return cfold(n.a->value + n.b->value);
        if (is_const(n.a, 0.0)) return n.b;
        if (is_const(n.b, 0.0)) return n.a;
        break;
    case Op::Sub:
        if (plain_const(n.a) && plain_const(n.b)) return cfold(n.a->value - n.b->value);
        if (is_const(n.b, 0.0)) return n.a;
        if (structurally_equal(Expr(n.a), Expr(n.b))) return cfold(0.0);
        break;
    case Op::Mul:
        if (plain_const(n.a) && plain_const(n.b)) return cfold(n.a->value * n.b->value);
        if (is_const(n.a, 0.0) || is_const(n.b, 0.0)) return cfold(0.0);
        if (is_const(n.a, 1.0)) return n.b;
        if (is_const(n.b, 1.0)) return n.a;
        break;
    case Op::Div:
        if (plain_const(n.a) && plain_const(n.b) && n.b->value != 0.0)
            return cfold(n.a->value / n.b->value);
        if (is_const(n.a, 0.0)) return cfold(0.0);
        if (is_const(n.b, 1.0)) return n.a;
        break;
    case Op::Pow:
        if (n.ipow == 0) return cfold(1.0);
        if (n.ipow == 1) return n.a;
        if (plain_const(n.a)) {
            double r = 1.0;
            for (int i = 0; i < n.ipow; ++i) r *= n.a->value;
            return cfold(r);
        }
        break;
    case Op::Sign:
        if (plain_const(n.a)) {
            double v = n.a->value;
            return cfold(v > 0 ? 1.0 : (v < 0 ? -1.0 : 0.0));
        }
        break;
    case Op::Sat:
        if (plain_const(n.a)) return cfold(std::clamp(n.a->value, n.sat_lo, n.sat_hi));
        break;
    case Op::Sin:
        if (plain_const(n.a)) return cfold(std::sin(n.a->value));
        break;
    case Op::Cos:
        if (plain_const(n.a)) return cfold(std::cos(n.a->value));
        break;
    case Op::Exp:
        if (plain_const(n.a)) return cfold(std::exp(n.a->value));
        break;
    case Op::Min:
        if (plain_const(n.a) && plain_const(n.b)) return cfold(std::min(n.a->value, n.b->value));
        break;
    case Op::Max:
        if (plain_const(n.a) && plain_const(n.b)) return cfold(std::max(n.a->value, n.b->value));
        break;
    default:
        break;
    }
    return p;
}

} // namespace

Expr simplify(const Expr& e) { return Expr(simplify_node(e.ptr())); }

// ---------------------------------------------------------------------------
// expand-and-collect

namespace {

// Monomial key: sorted factor list. A factor is a state/... variable, a
// parameter, or an opaque atom subtree; exponents are collected.
struct Factor {
    // tag 0 = var, 1 = param, 2 = atom
    int tag;
    VarKind kind = VarKind::State;
    int index = 0;
    ExprPtr atom;
    int exponent = 1;
};

struct Monomial {
    double coeff = 1.0;
    std::vector<Factor> factors; // kept sorted/merged
};

bool factor_same_base(const Factor& a, const Factor& b) {
    if (a.tag != b.tag) return false;
    if (a.tag == 0) return a.kind == b.kind && a.index == b.index;
    if (a.tag == 1) return a.index == b.index;
    return structurally_equal(Expr(a.atom), Expr(b.atom));
}

int factor_order(const Factor& a, const Factor& b) {
    if (a.tag != b.tag) return a.tag < b.tag ? -1 : 1;
    if (a.tag == 0) {
        if (a.kind != b.kind) return a.kind < b.kind ? -1 : 1;
        if (a.index != b.index) return a.index < b.index ? -1 : 1;
        return 0;
    }
    if (a.tag == 1) {
        if (a.index != b.index) return a.index < b.index ? -1 : 1;
        return 0;
    }
    // atoms: order by printed form (stable, structural)
    std::string sa = to_string(Expr(a.atom));
    std::string sb = to_string(Expr(b.atom));
    if (sa != sb) return sa < sb ? -1 : 1;
    return 0;
}

void merge_factor(std::vector<Factor>& fs, Factor f) {
    for (auto& g : fs) {
        if (factor_same_base(g, f)) {
            g.exponent += f.exponent;
            return;
        }
    }
    fs.push_back(std::move(f));
    std::sort(fs.begin(), fs.end(),
              [](const Factor& a, const Factor& b) { return factor_order(a, b) < 0; });
}

Monomial mono_mul(const Monomial& a, const Monomial& b) {
    Monomial r = a;
    r.coeff *= b.coeff;
    for (const auto& f : b.factors) merge_factor(r.factors, f);
    return r;
}

bool mono_same_key(const Monomial& a, const Monomial& b) {
    if (a.factors.size() != b.factors.size()) return false;
    for (size_t i = 0; i < a.factors.size(); ++i) {
        if (!factor_same_base(a.factors[i], b.factors[i])) return false;
        if (a.factors[i].exponent != b.factors[i].exponent) return false;
    }
    return true;
}

using Poly = std::vector<Monomial>;

void poly_add_mono(Poly& p, const Monomial& m) {
    for (auto& e : p) {
        if (mono_same_key(e, m)) {
            e.coeff += m.coeff;
            return;
        }
    }
    p.push_back(m);
}

struct ExpandLimit : std::exception {};

Poly poly_add(const Poly& a, const Poly& b, size_t cap) {
    Poly r = a;
    for (const auto& m : b) poly_add_mono(r, m);
    if (r.size() > cap) throw ExpandLimit();
    return r;
}

Poly poly_neg(const Poly& a) {
    Poly r = a;
    for (auto& m : r) m.coeff = -m.coeff;
    return r;
}

Poly poly_mul(const Poly& a, const Poly& b, size_t cap) {
    Poly r;
    for (const auto& x : a)
        for (const auto& y : b) poly_add_mono(r, mono_mul(x, y));
    if (r.size() > cap) throw ExpandLimit();
    return r;
}

Poly to_poly(const ExprPtr& p, size_t cap);

Poly atom_poly(const ExprPtr& p) {
    Monomial m;
    Factor f;
    f.tag = 2;
    f.atom = p;
    m.factors.push_back(std::move(f));
    return {m};
}

Poly to_poly(const ExprPtr& p, size_t cap) {
    switch (p->op) {
    case Op::Const: {
        if (p->tunable) return atom_poly(p); // keep tunable literals intact
        Monomial m;
        m.coeff = p->value;
        if (m.coeff == 0.0) return {};
        return {m};
    }
    case Op::Var: {
        Monomial m;
        Factor f;
        f.tag = 0;
        f.kind = p->kind;
        f.index = p->index;
        m.factors.push_back(f);
        return {m};
    }
    case Op::Param: {
        Monomial m;
        Factor f;
        f.tag = 1;
        f.index = p->index;
        m.factors.push_back(f);
        return {m};
    }
    case Op::Neg: return poly_neg(to_poly(p->a, cap));
    case Op::Add: return poly_add(to_poly(p->a, cap), to_poly(p->b, cap), cap);
    case Op::Sub: return poly_add(to_poly(p->a, cap), poly_neg(to_poly(p->b, cap)), cap);
    case Op::Mul: return poly_mul(to_poly(p->a, cap), to_poly(p->b, cap), cap);
    case Op::Pow: {
        Poly base = to_poly(p->a, cap);
        Monomial one;
        Poly r = {one};
        for (int i = 0; i < p->ipow; ++i) r = poly_mul(r, base, cap);
        return r;
    }
    default:
        break;
    }
    // opaque atom (Div, Sin, Sqrt, Sign, Sat, Min, Max, Exp)
    return atom_poly(p);
}

ExprPtr factor_expr(const Factor& f) {
    Expr base = f.tag == 0   ? Expr::var(f.kind, f.index)
                : f.tag == 1 ? Expr::param(f.index)
                             : Expr(f.atom);
    if (f.exponent == 1) return base.ptr();
    return Expr::pow(base, f.exponent).ptr();
}

Expr from_poly(const Poly& p) {
    std::vector<Expr> terms;
    for (const auto& m : p) {
        if (m.coeff == 0.0) continue;
        Expr t = Expr::constant(m.coeff);
        bool have = false;
        if (m.coeff == 1.0 && !m.factors.empty()) {
            t = Expr(factor_expr(m.factors[0]));
            have = true;
        }
        for (size_t i = have ? 1 : 0; i < m.factors.size(); ++i)
            t = t * Expr(factor_expr(m.factors[i]));
        terms.push_back(t);
    }
    if (terms.empty()) return Expr::constant(0.0);
    Expr r = terms[0];
    for (size_t i = 1; i < terms.size(); ++i) r = r + terms[i];
    return r;
}

} // namespace

Expr expand_collect(const Expr& e, size_t max_terms) {
    Expr s = simplify(e);
    try {
        Poly p = to_poly(s.ptr(), max_terms);
        return simplify(from_poly(p));
    } catch (const ExpandLimit&) {
        return s;
    }
}

// ---------------------------------------------------------------------------
// nonsmooth atoms

void collect_nonsmooth_atoms(const Expr& e, std::vector<Expr>& atoms) {
    std::function<void(const ExprPtr&)> walk = [&](const ExprPtr& p) {
        if (p->op == Op::Sign || p->op == Op::Sat) {
            Expr cand(p);
            for (const auto& a : atoms)
                if (structurally_equal(a, cand)) {
                    if (p->a) walk(p->a);
                    return;
                }
            atoms.push_back(cand);
        }
        if (p->a) walk(p->a);
        if (p->b) walk(p->b);
    };
    walk(e.ptr());
}

bool vars_within(const Expr& e, int n_state, int n_input, int n_disturbance,
                 int n_output, int n_aux) {
    std::function<bool(const ExprNode&)> walk = [&](const ExprNode& n) -> bool {
        if (n.op == Op::Var) {
            int limit = -1;
            switch (n.kind) {
            case VarKind::State: limit = n_state; break;
            case VarKind::Input: limit = n_input; break;
            case VarKind::Disturbance: limit = n_disturbance; break;
            case VarKind::Output: limit = n_output; break;
            case VarKind::Aux: limit = n_aux; break;
            }
            if (limit < 0 || n.index >= limit) return false;
        }
        if (n.a && !walk(*n.a)) return false;
        if (n.b && !walk(*n.b)) return false;
        return true;
    };
    return walk(e.node());
}

// ---------------------------------------------------------------------------
// printing

namespace {

int precedence(Op op) {
    switch (op) {
    case Op::Add:
    case Op::Sub: return 1;
    case Op::Mul:
    case Op::Div: return 2;
    case Op::Neg: return 3;
    case Op::Pow: return 4;
    default: return 5;
    }
}

std::string fmt_double(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    // trim to shortest round-trip representation
    for (int prec = 1; prec <= 17; ++prec) {
        char t[40];
        std::snprintf(t, sizeof t, "%.*g", prec, v);
        if (std::strtod(t, nullptr) == v) return t;
    }
    return buf;
}

void print_node(const ExprNode& n, std::string& out, int parent_prec) {
    int prec = precedence(n.op);
    switch (n.op) {
    case Op::Const: {
        if (n.value < 0) {
            out += "(" + fmt_double(n.value) + ")";
        } else {
            out += fmt_double(n.value);
        }
        return;
    }
    case Op::Var: {
        const char* prefix = "s";
        switch (n.kind) {
        case VarKind::State: prefix = "s"; break;
        case VarKind::Input: prefix = "u"; break;
        case VarKind::Disturbance: prefix = "d"; break;
        case VarKind::Output: prefix = "y"; break;
        case VarKind::Aux: prefix = "z"; break;
        }
        out += prefix + std::to_string(n.index + 1);
        return;
    }
    case Op::Param:
        out += "p" + std::to_string(n.index + 1);
        return;
    case Op::Neg: {
        bool paren = prec < parent_prec;
        if (paren) out += "(";
        out += "-";
        print_node(*n.a, out, prec + 1);
        if (paren) out += ")";
        return;
    }
    case Op::Add:
    case Op::Sub:
    case Op::Mul:
    case Op::Div: {
        bool paren = prec < parent_prec;
        if (paren) out += "(";
        print_node(*n.a, out, prec);
        out += n.op == Op::Add ? " + " : n.op == Op::Sub ? " - "
               : n.op == Op::Mul ? "*" : "/";
        print_node(*n.b, out, prec + 1);
        if (paren) out += ")";
        return;
    }
    case Op::Pow: {
        bool paren = prec < parent_prec;
        if (paren) out += "(";
        print_node(*n.a, out, prec + 1);
        out += "^" + std::to_string(n.ipow);
        if (paren) out += ")";
        return;
    }
    case Op::Sin: out += "sin("; print_node(*n.a, out, 0); out += ")"; return;
    case Op::Cos: out += "cos("; print_node(*n.a, out, 0); out += ")"; return;
    case Op::Exp: out += "exp("; print_node(*n.a, out, 0); out += ")"; return;
    case Op::Sqrt: out += "sqrt("; print_node(*n.a, out, 0); out += ")"; return;
    case Op::Sign: out += "sign("; print_node(*n.a, out, 0); out += ")"; return;
    case Op::Min:
        out += "min(";
        print_node(*n.a, out, 0);
        out += ", ";
        print_node(*n.b, out, 0);
        out += ")";
        return;
    case Op::Max:
        out += "max(";
        print_node(*n.a, out, 0);
        out += ", ";
        print_node(*n.b, out, 0);
        out += ")";
        return;
    case Op::Sat:
        out += "sat(" + fmt_double(n.sat_lo) + ", " + fmt_double(n.sat_hi) + "; ";
        print_node(*n.a, out, 0);
        out += ")";
        return;
    case Op::NtRef:
        out += "<nt" + std::to_string(n.index) + ">";
        return;
    case Op::ConstDraw:
        out += "const[" + fmt_double(n.sat_lo) + "," + fmt_double(n.sat_hi) + "]";
        return;
    }
}

} // namespace

std::string to_string(const Expr& e) {
    std::string out;
    print_node(e.node(), out, 0);
    return out;
}

} // namespace lbf
