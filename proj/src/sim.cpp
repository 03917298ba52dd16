#include "lbf/sim.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <random>

#include "lbf/grammar.hpp"
#include "lbf/tape.hpp"

namespace lbf {

bool HybridArc::well_formed() const {
    for (size_t i = 1; i < points.size(); ++i) {
        const auto& a = points[i - 1];
        const auto& b = points[i];
        if (b.t < a.t) return false;
        if (b.j != a.j && b.j != a.j + 1) return false;
        if (b.j == a.j + 1 && b.t != a.t) return false; // jumps are instantaneous
    }
    return true;
}

namespace {

constexpr double kGuardTol = 1e-9;

struct CompiledLoop {
    const ClosedLoop& cl;
    int n;
    VarMap vm;
    std::vector<Tape> flow;
    std::vector<Tape> flow_constraints;
    struct Piece {
        std::vector<Tape> guards;
        std::vector<Tape> map;
        std::string name;
        bool timer = false;
        int timer_index = -1;
    };
    std::vector<Piece> pieces;
    mutable std::vector<double> ws;

    explicit CompiledLoop(const ClosedLoop& cl_) : cl(cl_), n(cl_.part().n()) {
        for (int i = 0; i < n; ++i) vm.map(VarKind::State, i, i);
        for (int k = 0; k < cl.sys.n_disturbances; ++k)
            vm.map(VarKind::Disturbance, k, n + k);
        for (const auto& f : cl.flow) flow.push_back(Tape::compile(f, vm));
        for (const auto& g : cl.flow_constraints)
            flow_constraints.push_back(Tape::compile(g, vm));
        for (const auto& j : cl.system_jumps) {
            Piece p;
            p.name = j.name;
            for (const auto& g : j.guards) p.guards.push_back(Tape::compile(g, vm));
            for (const auto& m : j.map) p.map.push_back(Tape::compile(m, vm));
            pieces.push_back(std::move(p));
        }
        for (const auto& j : cl.timer_jumps) {
            Piece p;
            p.name = j.name;
            p.timer = true;
            p.timer_index = j.timer_index;
            for (const auto& m : j.map) p.map.push_back(Tape::compile(m, vm));
            pieces.push_back(std::move(p));
        }
    }

    // membership margin of piece k: <= 0 means the guard region is active
    double piece_margin(const Piece& p, std::span<const double> v) const {
        if (p.timer) {
            double st = v[cl.part().t_offset() + p.timer_index];
            return cl.part().eta[p.timer_index] - st;
        }
        double m = -1e300;
        for (const auto& g : p.guards) {
            double x = g.eval(v, {}, ws);
            if (std::isnan(x)) return 1e300;
            m = std::max(m, x);
        }
        return m;
    }

    int active_piece(std::span<const double> v) const {
        for (size_t k = 0; k < pieces.size(); ++k)
            if (piece_margin(pieces[k], v) <= kGuardTol) return static_cast<int>(k);
        return -1;
    }

    bool in_flow_set(std::span<const double> v) const {
        for (const auto& g : flow_constraints) {
            double x = g.eval(v, {}, ws);
            if (std::isnan(x) || x > kGuardTol) return false;
        }
        // timers must not exceed their periods
        for (int i = 0; i < cl.part().n_t; ++i)
            if (v[cl.part().t_offset() + i] > cl.part().eta[i] + kGuardTol) return false;
        return true;
    }

    bool deriv(std::span<const double> v, std::vector<double>& dx) const {
        dx.resize(n);
        for (int i = 0; i < n; ++i) {
            dx[i] = flow[i].eval(v, {}, ws);
            if (!std::isfinite(dx[i])) return false;
        }
        return true;
    }
};

// one RK4 step on the state part of v (disturbance coordinates held)
bool rk4_step(const CompiledLoop& sys, std::vector<double>& v, double h) {
    const int n = sys.n;
    std::vector<double> k1, k2, k3, k4;
    std::vector<double> tmp = v;
    if (!sys.deriv(v, k1)) return false;
    for (int i = 0; i < n; ++i) tmp[i] = v[i] + 0.5 * h * k1[i];
    if (!sys.deriv(tmp, k2)) return false;
    for (int i = 0; i < n; ++i) tmp[i] = v[i] + 0.5 * h * k2[i];
    if (!sys.deriv(tmp, k3)) return false;
    for (int i = 0; i < n; ++i) tmp[i] = v[i] + h * k3[i];
    if (!sys.deriv(tmp, k4)) return false;
    for (int i = 0; i < n; ++i)
        v[i] += h / 6.0 * (k1[i] + 2 * k2[i] + 2 * k3[i] + k4[i]);
    return true;
}

} // namespace

HybridArc simulate(const ClosedLoop& cl, std::span<const double> x0,
                   const SimOptions& opts) {
    CompiledLoop sys(cl);
    const int n = sys.n;
    if (static_cast<int>(x0.size()) != n)
        throw DimensionMismatch("initial state has wrong dimension");

    std::vector<double> v(n + cl.sys.n_disturbances);
    std::copy(x0.begin(), x0.end(), v.begin());
    for (int k = 0; k < cl.sys.n_disturbances; ++k)
        v[n + k] = k < static_cast<int>(opts.disturbance.size())
                       ? opts.disturbance[k]
                       : cl.sys.disturbance_box[k].mid();

    HybridArc arc;
    double t = 0;
    int j = 0;
    arc.points.push_back({t, j, {v.begin(), v.begin() + n}});

    const double dt0 = opts.dt > 0 ? opts.dt : 1e-3 * opts.t_max;
    std::deque<double> jump_times;

    auto take_jump = [&](int piece_idx) {
        const auto& p = sys.pieces[piece_idx];
        std::vector<double> img(n);
        for (int i = 0; i < n; ++i) {
            img[i] = p.map[i].eval(v, {}, sys.ws);
            if (!std::isfinite(img[i])) return false;
        }
        arc.jumps.push_back({t, j, p.name, p.timer});
        std::copy(img.begin(), img.end(), v.begin());
        ++j;
        arc.points.push_back({t, j, img});
        jump_times.push_back(t);
        while (jump_times.size() > 100) jump_times.pop_front();
        return true;
    };

    while (t < opts.t_max && j < opts.j_max) {
        // Zeno guard
        if (jump_times.size() >= 100 && t - jump_times.front() < 1e-6) {
            arc.end = ArcEnd::ZenoSuspected;
            return arc;
        }

        int piece = sys.active_piece(v);
        if (opts.jump_priority && piece >= 0) {
            if (!take_jump(piece)) {
                arc.end = ArcEnd::EvalError;
                return arc;
            }
            continue;
        }
        if (!sys.in_flow_set(v)) {
            if (piece >= 0) { // flow priority fallback
                if (!take_jump(piece)) {
                    arc.end = ArcEnd::EvalError;
                    return arc;
                }
                continue;
            }
            arc.end = ArcEnd::EscapedDomain;
            return arc;
        }

        double h = std::min(dt0, opts.t_max - t);
        std::vector<double> saved = v;
        if (!rk4_step(sys, v, h)) {
            arc.end = ArcEnd::EvalError;
            return arc;
        }

        // did a guard activate (or the flow set break) during the step?
        bool event = sys.active_piece(v) >= 0 || !sys.in_flow_set(v);
        if (event) {
            // bisect the step so the boundary is resolved within event_tol
            double lo = 0, hi = h;
            while (hi - lo > opts.event_tol) {
                double mid = 0.5 * (lo + hi);
                std::vector<double> trial = saved;
                if (!rk4_step(sys, trial, mid)) {
                    arc.end = ArcEnd::EvalError;
                    return arc;
                }
                if (sys.active_piece(trial) >= 0 || !sys.in_flow_set(trial))
                    hi = mid;
                else
                    lo = mid;
            }
            v = saved;
            if (!rk4_step(sys, v, hi)) {
                arc.end = ArcEnd::EvalError;
                return arc;
            }
            h = hi;
        }
        t += h;
        arc.points.push_back({t, j, {v.begin(), v.begin() + n}});

        if (event) {
            int p = sys.active_piece(v);
            if (p >= 0) {
                if (!take_jump(p)) {
                    arc.end = ArcEnd::EvalError;
                    return arc;
                }
            } else if (!sys.in_flow_set(v)) {
                arc.end = ArcEnd::EscapedDomain;
                return arc;
            }
        }
    }
    arc.end = ArcEnd::Horizon;
    return arc;
}

// ---------------------------------------------------------------------------
// validation

namespace {

bool in_box_set(const std::vector<Interval>& box, std::span<const double> x, int off,
                double tol) {
    for (size_t i = 0; i < box.size(); ++i)
        if (x[off + i] < box[i].lo - tol || x[off + i] > box[i].hi + tol) return false;
    return true;
}

bool in_discrete(const std::vector<DiscreteSet>& qs, std::span<const double> x, int off,
                 double tol) {
    for (size_t i = 0; i < qs.size(); ++i) {
        double v = x[off + i];
        if (qs[i].finite) {
            bool ok = false;
            for (double w : qs[i].values)
                if (std::abs(v - w) <= tol) ok = true;
            if (!ok) return false;
        } else {
            if (v < qs[i].box.lo - tol || v > qs[i].box.hi + tol) return false;
        }
    }
    return true;
}

} // namespace

ValidationReport validate_certificate(const ClosedLoop& cl, const SpecSets& sets,
                                      bool rsws, bool certified, int n_runs,
                                      uint64_t seed, const SimOptions& opts) {
    const StatePartition& part = cl.part();
    ValidationReport rep;
    rep.runs = n_runs;
    Rng rng(seed);
    std::uniform_real_distribution<double> u01(0.0, 1.0);

    const double tol = 1e-6;
    const auto& iq = sets.I_q ? *sets.I_q : sets.S_q;

    for (int run = 0; run < n_runs; ++run) {
        std::vector<double> x0(part.n());
        for (int i = 0; i < part.n_x; ++i)
            x0[i] = sets.I_x[i].lo + u01(rng) * sets.I_x[i].width();
        for (int i = 0; i < part.n_q; ++i) {
            const DiscreteSet& d = iq[i];
            if (d.finite) {
                std::uniform_int_distribution<size_t> pick(0, d.values.size() - 1);
                x0[part.q_offset() + i] = d.values[pick(rng)];
            } else {
                x0[part.q_offset() + i] = d.box.lo + u01(rng) * d.box.width();
            }
        }
        for (int i = 0; i < part.n_t; ++i) {
            if (!sets.I_t.empty() && sets.I_t[i])
                x0[part.t_offset() + i] = *sets.I_t[i];
            else
                x0[part.t_offset() + i] = u01(rng) * part.eta[i];
        }
        for (const auto& [dst, src] : sets.I_couple_pairs) x0[dst] = x0[src];

        SimOptions o = opts;
        o.disturbance.clear();
        for (const auto& b : cl.sys.disturbance_box)
            o.disturbance.push_back(b.lo + u01(rng) * b.width());

        HybridArc arc = simulate(cl, x0, o);

        bool stayed_s = true;
        int first_reach = -1;
        for (size_t k = 0; k < arc.points.size(); ++k) {
            const auto& p = arc.points[k];
            bool in_s = in_box_set(sets.S_x, p.x, 0, tol) &&
                        in_discrete(sets.S_q, p.x, part.q_offset(), tol);
            bool in_o = in_box_set(sets.O_x, p.x, 0, tol) &&
                        in_discrete(sets.O_q, p.x, part.q_offset(), tol);
            if (in_o && first_reach < 0) first_reach = static_cast<int>(k);
            if (!in_s && first_reach < 0) stayed_s = false;
            if (!in_s && rsws) stayed_s = false;
        }

        bool success;
        bool violated;
        if (!rsws) {
            success = stayed_s && first_reach >= 0;
            violated = !stayed_s || arc.end == ArcEnd::EscapedDomain;
        } else {
            // the tail of the arc must remain in O
            int tail_ok_from = -1;
            for (int k = static_cast<int>(arc.points.size()) - 1; k >= 0; --k) {
                const auto& p = arc.points[k];
                bool in_o = in_box_set(sets.O_x, p.x, 0, tol) &&
                            in_discrete(sets.O_q, p.x, part.q_offset(), tol);
                if (!in_o) break;
                tail_ok_from = k;
            }
            bool reached_and_stayed =
                tail_ok_from >= 0 && tail_ok_from < static_cast<int>(arc.points.size());
            success = stayed_s && reached_and_stayed && arc.end == ArcEnd::Horizon;
            violated = !stayed_s || arc.end == ArcEnd::EscapedDomain;
        }

        if (success) {
            ++rep.successes;
        } else if (violated) {
            ++rep.violations;
        } else {
            ++rep.inconclusive;
        }
    }
    rep.toolkit_bug = certified && rep.violations > 0;
    return rep;
}

} // namespace lbf
