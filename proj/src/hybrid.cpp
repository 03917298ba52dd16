#include "lbf/hybrid.hpp"

#include <algorithm>
#include <functional>

namespace lbf {

void StatePartition::validate() const {
    if (n_x < 0 || n_q < 0 || n_t < 0)
        throw ModelError("negative state dimension");
    if (static_cast<int>(eta.size()) != n_t)
        throw ModelError("eta length must equal n_t");
    for (double e : eta)
        if (!(e > 0)) throw ModelError("timer periods must be positive");
    if (n() == 0) throw ModelError("system has no states");
}

void OpenLoopSystem::validate() const {
    part.validate();
    if (static_cast<int>(flow_x.size()) != part.n_x)
        throw DimensionMismatch("flow must have n_x components");
    if (part.n_t > 0 && static_cast<int>(timer_jump_xq.size()) != part.n_x + part.n_q)
        throw DimensionMismatch("timer jump map must have n_x + n_q components");
    if (part.n_t == 0 && !timer_jump_xq.empty())
        throw ModelError("timer jump map given but n_t = 0");
    for (const auto& p : system_jumps) {
        if (static_cast<int>(p.map_xq.size()) != part.n_x + part.n_q)
            throw DimensionMismatch("system jump map must have n_x + n_q components");
        if (p.guards.empty())
            throw ModelError("system jump piece needs at least one guard");
    }
    if (output.empty()) throw ModelError("output map is empty");
    if (static_cast<int>(input_bounds.size()) != n_inputs)
        throw DimensionMismatch("input bounds list must match input count");
    if (static_cast<int>(disturbance_box.size()) != n_disturbances)
        throw DimensionMismatch("disturbance box must match disturbance count");

    const int n = part.n();
    auto check = [&](const Expr& e, const char* where) {
        if (!vars_within(e, n, n_inputs, n_disturbances))
            throw ModelError(std::string("expression in ") + where +
                             " references an out-of-range variable");
    };
    for (const auto& e : flow_x) check(e, "flow");
    for (const auto& e : flow_constraints) check(e, "flow set");
    for (const auto& p : system_jumps) {
        for (const auto& e : p.guards) check(e, "jump guard");
        for (const auto& e : p.map_xq) check(e, "jump map");
    }
    for (const auto& e : timer_jump_xq) check(e, "timer jump map");
    for (const auto& e : output)
        if (!vars_within(e, n, 0, 0))
            throw ModelError("output map may only reference states");
}

void SpecSets::validate(const StatePartition& part) const {
    auto boxes_ok = [](const std::vector<Interval>& v) {
        return std::all_of(v.begin(), v.end(),
                           [](const Interval& i) { return i.lo <= i.hi; });
    };
    if (static_cast<int>(S_x.size()) != part.n_x ||
        static_cast<int>(I_x.size()) != part.n_x ||
        static_cast<int>(O_x.size()) != part.n_x)
        throw DimensionMismatch("S_x/I_x/O_x must have n_x components");
    if (!boxes_ok(S_x) || !boxes_ok(I_x) || !boxes_ok(O_x))
        throw ModelError("malformed set box");
    if (static_cast<int>(S_q.size()) != part.n_q ||
        static_cast<int>(O_q.size()) != part.n_q)
        throw DimensionMismatch("S_q/O_q must have n_q components");
    for (int i = 0; i < part.n_x; ++i) {
        if (!(S_x[i].lo < I_x[i].lo && I_x[i].hi < S_x[i].hi))
            throw ModelError("I_x must lie in the interior of S_x");
        if (!(S_x[i].lo < O_x[i].lo && O_x[i].hi < S_x[i].hi))
            throw ModelError("O_x must lie in the interior of S_x");
    }
    if (!I_t.empty() && static_cast<int>(I_t.size()) != part.n_t)
        throw DimensionMismatch("I_t must have n_t entries");
}

// ---------------------------------------------------------------------------
// closed loop

ClosedLoop close_loop(const OpenLoopSystem& sys, const std::vector<Expr>& kappa) {
    sys.validate();
    if (static_cast<int>(kappa.size()) < sys.n_inputs)
        throw DimensionMismatch("controller has fewer components than inputs");

    const StatePartition& P = sys.part;
    const int n = P.n();
    const int l = static_cast<int>(sys.output.size());

    ClosedLoop cl;
    cl.sys = sys;
    cl.kappa = kappa;

    // kappa over outputs -> kappa over states, then saturate
    Substitution ysub;
    for (int j = 0; j < l; ++j) ysub.set(VarKind::Output, j, sys.output[j]);
    Substitution usub;
    for (size_t i = 0; i < kappa.size(); ++i) {
        Expr k = substitute(kappa[i], ysub);
        if (!vars_within(k, n, 0, sys.n_disturbances))
            throw ModelError("controller references unavailable variables");
        if (static_cast<int>(i) < sys.n_inputs && sys.input_bounds[i])
            k = Expr::sat(sys.input_bounds[i]->first, sys.input_bounds[i]->second, k);
        cl.kappa_closed.push_back(k);
        usub.set(VarKind::Input, static_cast<int>(i), k);
    }

    auto close = [&](const Expr& e) { return simplify(substitute(e, usub)); };

    for (const auto& f : sys.flow_x) cl.flow.push_back(close(f));
    for (int i = 0; i < P.n_q; ++i) cl.flow.push_back(Expr::constant(0.0));
    for (int i = 0; i < P.n_t; ++i) cl.flow.push_back(Expr::constant(1.0));
    for (const auto& g : sys.flow_constraints) cl.flow_constraints.push_back(close(g));

    for (const auto& piece : sys.system_jumps) {
        ClosedJump j;
        j.name = piece.name;
        for (const auto& g : piece.guards) j.guards.push_back(close(g));
        for (const auto& m : piece.map_xq) j.map.push_back(close(m));
        for (int t = 0; t < P.n_t; ++t)
            j.map.push_back(Expr::state(P.t_offset() + t)); // timers held
        cl.system_jumps.push_back(std::move(j));
    }

    for (int t = 0; t < P.n_t; ++t) {
        ClosedJump j;
        j.name = "timer" + std::to_string(t + 1);
        j.timer_index = t;
        for (const auto& m : sys.timer_jump_xq) j.map.push_back(close(m));
        for (int t2 = 0; t2 < P.n_t; ++t2)
            j.map.push_back(t2 == t ? Expr::constant(0.0)
                                    : Expr::state(P.t_offset() + t2));
        cl.timer_jumps.push_back(std::move(j));
    }
    return cl;
}

// ---------------------------------------------------------------------------
// sampled data

OpenLoopSystem build_sampled_data(const OpenLoopSystem& sys, double eta) {
    sys.validate();
    if (!(eta > 0)) throw ModelError("sampling period must be positive");
    if (sys.part.n_q != 0 || sys.part.n_t != 0 || !sys.system_jumps.empty())
        throw ModelError("sampled-data wrapper expects a purely continuous system");

    const int nx = sys.part.n_x;
    OpenLoopSystem sd = sys;
    sd.part.n_q = nx;
    sd.part.n_t = 1;
    sd.part.eta = {eta};

    // h(s) = h_base evaluated on the held copy
    Substitution hold;
    for (int i = 0; i < nx; ++i) hold.set(VarKind::State, i, Expr::state(nx + i));
    sd.output.clear();
    for (const auto& h : sys.output) sd.output.push_back(substitute(h, hold));

    // timer jump: continuous states kept, held copy refreshed
    sd.timer_jump_xq.clear();
    for (int i = 0; i < nx; ++i) sd.timer_jump_xq.push_back(Expr::state(i));
    for (int i = 0; i < nx; ++i) sd.timer_jump_xq.push_back(Expr::state(i));
    return sd;
}

SpecSets build_sampled_data_sets(const SpecSets& sets, int n_x) {
    SpecSets sd = sets;
    sd.S_q.clear();
    sd.O_q.clear();
    for (int i = 0; i < n_x; ++i) {
        DiscreteSet s;
        s.finite = false;
        s.box = sets.S_x[i];
        sd.S_q.push_back(s);
        DiscreteSet o;
        o.finite = false;
        o.box = sets.O_x[i];
        sd.O_q.push_back(o);
    }
    std::vector<DiscreteSet> iq;
    for (int i = 0; i < n_x; ++i) {
        DiscreteSet d;
        d.finite = false;
        d.box = sets.I_x[i];
        iq.push_back(d);
    }
    sd.I_q = iq;
    sd.I_couplings.clear();
    sd.I_couple_pairs.clear();
    for (int i = 0; i < n_x; ++i) {
        sd.I_couplings.push_back(Expr::state(n_x + i) - Expr::state(i));
        sd.I_couple_pairs.emplace_back(n_x + i, i);
    }
    sd.I_t = {0.0};
    return sd;
}

// ---------------------------------------------------------------------------
// regions

namespace {

struct InstanceEnum {
    // one entry per discrete dim: the values to enumerate, or empty when the
    // dim stays a box
    std::vector<std::vector<double>> values;
    std::vector<Interval> boxes;
};

InstanceEnum instance_enum(const std::vector<DiscreteSet>& qsets) {
    InstanceEnum e;
    for (const auto& q : qsets) {
        if (q.finite) {
            e.values.push_back(q.values);
            e.boxes.push_back({0, 0});
        } else {
            e.values.push_back({});
            e.boxes.push_back(q.box);
        }
    }
    return e;
}

// Calls fn once per discrete instance with the q-dim intervals.
void for_each_instance(const InstanceEnum& e,
                       const std::function<void(const std::vector<Interval>&,
                                                const std::string&)>& fn) {
    const size_t nq = e.values.size();
    std::vector<Interval> qbox(nq);
    std::string tag;
    std::function<void(size_t)> rec = [&](size_t dim) {
        if (dim == nq) {
            fn(qbox, tag);
            return;
        }
        if (e.values[dim].empty()) {
            qbox[dim] = e.boxes[dim];
            rec(dim + 1);
        } else {
            for (double v : e.values[dim]) {
                qbox[dim] = Interval::point(v);
                std::string saved = tag;
                tag += "/q" + std::to_string(dim + 1) + "=" + std::to_string(v);
                rec(dim + 1);
                tag = saved;
            }
        }
    };
    rec(0);
}

std::vector<Interval> timer_box(const StatePartition& part) {
    std::vector<Interval> t;
    for (int i = 0; i < part.n_t; ++i) t.push_back({0.0, part.eta[i]});
    return t;
}

Region assemble(const std::string& tag, const std::vector<Interval>& xbox,
                const std::vector<Interval>& qbox, const std::vector<Interval>& tbox) {
    Region r;
    r.tag = tag;
    r.box = xbox;
    r.box.insert(r.box.end(), qbox.begin(), qbox.end());
    r.box.insert(r.box.end(), tbox.begin(), tbox.end());
    return r;
}

} // namespace

Regions membership_formulas(const SpecSets& sets, const StatePartition& part) {
    sets.validate(part);
    for (int i = 0; i < part.n_x; ++i)
        if (!(sets.O_x[i].lo < sets.O_x[i].hi))
            throw EmptyInterior("goal set O_x has empty interior");

    Regions out;
    const auto T = timer_box(part);
    const auto Senum = instance_enum(sets.S_q);
    const auto Oenum = instance_enum(sets.O_q);

    // S and its boundary faces
    for_each_instance(Senum, [&](const std::vector<Interval>& qbox, const std::string& t) {
        out.S.push_back(assemble("S" + t, sets.S_x, qbox, T));
        for (int i = 0; i < part.n_x; ++i) {
            auto lo = sets.S_x, hi = sets.S_x;
            lo[i] = Interval::point(sets.S_x[i].lo);
            hi[i] = Interval::point(sets.S_x[i].hi);
            out.boundary_S.push_back(
                assemble("dS/x" + std::to_string(i + 1) + "=lo" + t, lo, qbox, T));
            out.boundary_S.push_back(
                assemble("dS/x" + std::to_string(i + 1) + "=hi" + t, hi, qbox, T));
        }
    });

    // I: I_x box, I_q (default S_q), pinned timers, couplings as paired
    // inequalities
    {
        const auto& iq = sets.I_q ? *sets.I_q : sets.S_q;
        auto Ienum = instance_enum(iq);
        std::vector<Interval> it;
        for (int i = 0; i < part.n_t; ++i) {
            if (!sets.I_t.empty() && sets.I_t[i])
                it.push_back(Interval::point(*sets.I_t[i]));
            else
                it.push_back({0.0, part.eta[i]});
        }
        for_each_instance(Ienum, [&](const std::vector<Interval>& qbox, const std::string& t) {
            Region r = assemble("I" + t, sets.I_x, qbox, it);
            for (const auto& g : sets.I_couplings) {
                r.constraints.push_back(g);
                r.constraints.push_back(simplify(-g));
            }
            r.copy_dims = sets.I_couple_pairs;
            out.I.push_back(std::move(r));
        });
    }

    // O and its boundary faces (over O_q instances)
    for_each_instance(Oenum, [&](const std::vector<Interval>& qbox, const std::string& t) {
        out.O.push_back(assemble("O" + t, sets.O_x, qbox, T));
        for (int i = 0; i < part.n_x; ++i) {
            auto lo = sets.O_x, hi = sets.O_x;
            lo[i] = Interval::point(sets.O_x[i].lo);
            hi[i] = Interval::point(sets.O_x[i].hi);
            out.boundary_O.push_back(
                assemble("dO/x" + std::to_string(i + 1) + "=lo" + t, lo, qbox, T));
            out.boundary_O.push_back(
                assemble("dO/x" + std::to_string(i + 1) + "=hi" + t, hi, qbox, T));
        }
    });

    // S \ O as half-space branches: per continuous dim the two clipped
    // boxes, per box-valued discrete dim likewise, and whole instance slices
    // for finite discrete values outside O_q.
    for_each_instance(Senum, [&](const std::vector<Interval>& qbox, const std::string& t) {
        // does this instance's finite part intersect O_q?
        bool q_outside_O = false;
        for (int i = 0; i < part.n_q; ++i) {
            if (!sets.S_q[i].finite) continue;
            double v = qbox[i].lo;
            const auto& oq = sets.O_q[i];
            bool in_o = false;
            if (oq.finite) {
                for (double w : oq.values)
                    if (w == v) in_o = true;
            } else {
                in_o = oq.box.contains(v);
            }
            if (!in_o) q_outside_O = true;
        }
        if (q_outside_O) {
            out.S_minus_O.push_back(assemble("S\\O" + t, sets.S_x, qbox, T));
            return;
        }
        for (int i = 0; i < part.n_x; ++i) {
            if (sets.O_x[i].lo > sets.S_x[i].lo) {
                auto b = sets.S_x;
                b[i] = {sets.S_x[i].lo, sets.O_x[i].lo};
                out.S_minus_O.push_back(
                    assemble("S\\O/x" + std::to_string(i + 1) + "<=" + t, b, qbox, T));
            }
            if (sets.O_x[i].hi < sets.S_x[i].hi) {
                auto b = sets.S_x;
                b[i] = {sets.O_x[i].hi, sets.S_x[i].hi};
                out.S_minus_O.push_back(
                    assemble("S\\O/x" + std::to_string(i + 1) + ">=" + t, b, qbox, T));
            }
        }
        for (int i = 0; i < part.n_q; ++i) {
            if (sets.S_q[i].finite) continue;
            const Interval sq = sets.S_q[i].box;
            const Interval oq = sets.O_q[i].box;
            if (oq.lo > sq.lo) {
                auto q2 = qbox;
                q2[i] = {sq.lo, oq.lo};
                out.S_minus_O.push_back(
                    assemble("S\\O/q" + std::to_string(i + 1) + "<=" + t, sets.S_x, q2, T));
            }
            if (oq.hi < sq.hi) {
                auto q2 = qbox;
                q2[i] = {oq.hi, sq.hi};
                out.S_minus_O.push_back(
                    assemble("S\\O/q" + std::to_string(i + 1) + ">=" + t, sets.S_x, q2, T));
            }
        }
    });

    return out;
}

} // namespace lbf
