#include "lbf/tape.hpp"

#include <algorithm>
#include <cmath>
#include <functional>

namespace lbf {

void VarMap::map(VarKind kind, int index, int s) {
    auto place = [&](std::vector<int>& v) {
        if (static_cast<size_t>(index) >= v.size()) v.resize(index + 1, -1);
        v[index] = s;
    };
    switch (kind) {
    case VarKind::State: place(state); break;
    case VarKind::Input: place(input); break;
    case VarKind::Disturbance: place(disturbance); break;
    case VarKind::Output: place(output); break;
    case VarKind::Aux: place(aux); break;
    }
}

int VarMap::slot(VarKind kind, int index) const {
    const std::vector<int>* v = nullptr;
    switch (kind) {
    case VarKind::State: v = &state; break;
    case VarKind::Input: v = &input; break;
    case VarKind::Disturbance: v = &disturbance; break;
    case VarKind::Output: v = &output; break;
    case VarKind::Aux: v = &aux; break;
    }
    if (static_cast<size_t>(index) >= v->size()) return -1;
    return (*v)[index];
}

Tape Tape::compile(const Expr& e, const VarMap& vm) {
    Tape t;
    std::function<int(const ExprNode&)> emit = [&](const ExprNode& n) -> int {
        Ins ins;
        ins.op = n.op;
        switch (n.op) {
        case Op::Const:
            ins.value = n.value;
            break;
        case Op::Var: {
            int s = vm.slot(n.kind, n.index);
            if (s < 0) throw ExprError("free variable not bound by formula domain");
            ins.a = s;
            break;
        }
        case Op::Param:
            ins.a = n.index;
            break;
        case Op::NtRef:
        case Op::ConstDraw:
            throw ExprError("grammar placeholder in compiled expression");
        default:
            ins.a = emit(*n.a);
            if (n.b) ins.b = emit(*n.b);
            ins.ipow = n.ipow;
            ins.lo = n.sat_lo;
            ins.hi = n.sat_hi;
            break;
        }
        t.code_.push_back(ins);
        return static_cast<int>(t.code_.size()) - 1;
    };
    emit(e.node());
    return t;
}

double Tape::eval(std::span<const double> domain, std::span<const double> params,
                  std::vector<double>& ws) const {
    if (ws.size() < code_.size()) ws.resize(code_.size());
    for (size_t i = 0; i < code_.size(); ++i) {
        const Ins& s = code_[i];
        double r = 0;
        switch (s.op) {
        case Op::Const: r = s.value; break;
        case Op::Var: r = domain[s.a]; break;
        case Op::Param: r = params[s.a]; break;
        case Op::Neg: r = -ws[s.a]; break;
        case Op::Add: r = ws[s.a] + ws[s.b]; break;
        case Op::Sub: r = ws[s.a] - ws[s.b]; break;
        case Op::Mul: r = ws[s.a] * ws[s.b]; break;
        case Op::Div:
            r = ws[s.b] == 0.0 ? std::numeric_limits<double>::quiet_NaN()
                               : ws[s.a] / ws[s.b];
            break;
        case Op::Pow: {
            double base = ws[s.a];
            r = 1.0;
            for (int k = 0; k < s.ipow; ++k) r *= base;
            break;
        }
        case Op::Sin: r = std::sin(ws[s.a]); break;
        case Op::Cos: r = std::cos(ws[s.a]); break;
        case Op::Exp: r = std::exp(ws[s.a]); break;
        case Op::Sqrt:
            r = ws[s.a] < 0 ? std::numeric_limits<double>::quiet_NaN()
                            : std::sqrt(ws[s.a]);
            break;
        case Op::Min: r = std::min(ws[s.a], ws[s.b]); break;
        case Op::Max: r = std::max(ws[s.a], ws[s.b]); break;
        case Op::Sign: r = ws[s.a] > 0 ? 1.0 : (ws[s.a] < 0 ? -1.0 : 0.0); break;
        case Op::Sat: r = std::clamp(ws[s.a], s.lo, s.hi); break;
        default: break;
        }
        ws[i] = r;
    }
    return ws[code_.size() - 1];
}

Interval Tape::ieval(std::span<const Interval> box, std::span<const double> params,
                     std::vector<Interval>& ws, bool* defined) const {
    if (ws.size() < code_.size()) ws.resize(code_.size());
    bool ok = true;
    for (size_t i = 0; i < code_.size(); ++i) {
        const Ins& s = code_[i];
        Interval r;
        switch (s.op) {
        case Op::Const: r = Interval::point(s.value); break;
        case Op::Var: r = box[s.a]; break;
        case Op::Param: r = Interval::point(params[s.a]); break;
        case Op::Neg: r = -ws[s.a]; break;
        case Op::Add: r = ws[s.a] + ws[s.b]; break;
        case Op::Sub: r = ws[s.a] - ws[s.b]; break;
        case Op::Mul: r = ws[s.a] * ws[s.b]; break;
        case Op::Div: {
            bool d = true;
            r = interval_div(ws[s.a], ws[s.b], &d);
            if (!d) ok = false;
            break;
        }
        case Op::Pow: r = interval_ipow(ws[s.a], s.ipow); break;
        case Op::Sin: r = interval_sin(ws[s.a]); break;
        case Op::Cos: r = interval_cos(ws[s.a]); break;
        case Op::Exp: r = interval_exp(ws[s.a]); break;
        case Op::Sqrt: {
            bool d = true;
            r = interval_sqrt(ws[s.a], &d);
            if (!d) ok = false;
            break;
        }
        case Op::Min: r = interval_min(ws[s.a], ws[s.b]); break;
        case Op::Max: r = interval_max(ws[s.a], ws[s.b]); break;
        case Op::Sign: r = interval_sign(ws[s.a]); break;
        case Op::Sat: r = interval_sat(ws[s.a], s.lo, s.hi); break;
        default: break;
        }
        ws[i] = r;
    }
    if (defined) *defined = ok;
    return ws[code_.size() - 1];
}

namespace {

const Interval kWhole = Interval::whole();

// sign-preserving outward n-th root enclosure helper for backward Pow
double root_up(double v, int n) {
    if (v <= 0) return 0;
    double r = std::pow(v, 1.0 / n);
    return detail::lib_up(r);
}
double root_dn(double v, int n) {
    if (v <= 0) return 0;
    double r = std::pow(v, 1.0 / n);
    return detail::lib_dn(r);
}

} // namespace

bool Tape::contract(std::span<Interval> box, std::span<const double> params,
                    Interval required, std::vector<Interval>& fwd,
                    std::vector<Interval>& req) const {
    bool defined = true;
    ieval(box, params, fwd, &defined);
    if (!defined) return true; // cannot contract safely, not infeasible

    if (req.size() < code_.size()) req.resize(code_.size());
    std::fill(req.begin(), req.begin() + code_.size(), kWhole);
    req[code_.size() - 1] = required;

    for (size_t ri = code_.size(); ri-- > 0;) {
        const Ins& s = code_[ri];
        Interval want = intersect(req[ri], fwd[ri]);
        if (empty(want)) return false;
        switch (s.op) {
        case Op::Const:
        case Op::Param:
            break;
        case Op::Var:
            box[s.a] = intersect(box[s.a], want);
            if (empty(box[s.a])) return false;
            break;
        case Op::Neg:
            req[s.a] = intersect(req[s.a], -want);
            break;
        case Op::Add:
            req[s.a] = intersect(req[s.a], want - fwd[s.b]);
            req[s.b] = intersect(req[s.b], want - fwd[s.a]);
            break;
        case Op::Sub:
            req[s.a] = intersect(req[s.a], want + fwd[s.b]);
            req[s.b] = intersect(req[s.b], fwd[s.a] - want);
            break;
        case Op::Mul: {
            bool d = true;
            Interval qa = interval_div(want, fwd[s.b], &d);
            if (d) req[s.a] = intersect(req[s.a], qa);
            d = true;
            Interval qb = interval_div(want, fwd[s.a], &d);
            if (d) req[s.b] = intersect(req[s.b], qb);
            break;
        }
        case Op::Div: {
            // out = a / b  =>  a = out * b
            req[s.a] = intersect(req[s.a], want * fwd[s.b]);
            if (!want.contains(0.0)) {
                bool d = true;
                Interval qb = interval_div(fwd[s.a], want, &d);
                if (d) req[s.b] = intersect(req[s.b], qb);
            }
            break;
        }
        case Op::Pow: {
            if (s.ipow <= 0) break;
            if (s.ipow % 2 == 0) {
                double m = root_up(std::max(want.hi, 0.0), s.ipow);
                req[s.a] = intersect(req[s.a], Interval(-m, m));
            } else {
                double lo = want.lo < 0 ? -root_up(-want.lo, s.ipow) : root_dn(want.lo, s.ipow);
                double hi = want.hi < 0 ? -root_dn(-want.hi, s.ipow) : root_up(want.hi, s.ipow);
                req[s.a] = intersect(req[s.a], Interval(lo, hi));
            }
            break;
        }
        case Op::Sqrt: {
            Interval w = intersect(want, Interval(0, detail::kInf));
            if (empty(w)) return false;
            req[s.a] = intersect(req[s.a], interval_ipow(w, 2));
            break;
        }
        case Op::Exp: {
            if (want.hi <= 0.0) return false;
            double lo = want.lo > 0 ? detail::lib_dn(std::log(want.lo)) : -detail::kInf;
            double hi = std::isfinite(want.hi) ? detail::lib_up(std::log(want.hi)) : detail::kInf;
            req[s.a] = intersect(req[s.a], Interval(lo, hi));
            break;
        }
        case Op::Sin:
        case Op::Cos:
        case Op::Sign:
        case Op::Sat:
        case Op::Min:
        case Op::Max:
            // no backward rule; children keep their forward ranges
            break;
        default:
            break;
        }
    }
    return true;
}

} // namespace lbf
