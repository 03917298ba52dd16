#include "lbf/conditions.hpp"

#include <algorithm>
#include <functional>

namespace lbf {

void StandardFormula::prepare() {
    VarMap vm;
    for (size_t k = 0; k < dims.size(); ++k)
        vm.map(dims[k].kind, dims[k].index, static_cast<int>(k));
    tapes.clear();
    tapes.reserve(rows.size());
    for (const auto& row : rows) {
        std::vector<Tape> rt;
        rt.reserve(row.size());
        for (const auto& e : row) rt.push_back(Tape::compile(e, vm));
        tapes.push_back(std::move(rt));
    }
}

std::vector<Interval> StandardFormula::box() const {
    std::vector<Interval> b;
    b.reserve(dims.size());
    for (const auto& d : dims) b.push_back(d.range);
    return b;
}

namespace {

bool contains_signsat(const Expr& e) {
    std::function<bool(const ExprNode&)> walk = [&](const ExprNode& n) -> bool {
        if (n.op == Op::Sign || n.op == Op::Sat) return true;
        if (n.a && walk(*n.a)) return true;
        if (n.b && walk(*n.b)) return true;
        return false;
    };
    return walk(e.node());
}

bool uses_disturbance(const Expr& e, int k) {
    std::function<bool(const ExprNode&)> walk = [&](const ExprNode& n) -> bool {
        if (n.op == Op::Var && n.kind == VarKind::Disturbance && n.index == k) return true;
        if (n.a && walk(*n.a)) return true;
        if (n.b && walk(*n.b)) return true;
        return false;
    };
    return walk(e.node());
}

// A core-row disjunct; jump-difference bodies are polynomial-normalized so
// structurally cancelling terms (timer resets, held states, enumerated
// discrete values) collapse to exact constants the prover can decide.
struct Disjunct {
    Expr e;
    bool expand = false;
};
using CoreRow = std::vector<Disjunct>;

// Builds formulas for one domain region: substitutes pinned (width-0)
// coordinates, plumbs guard disjuncts into every row, splits sign/sat atoms
// into smooth branches, attaches disturbance and auxiliary dims, drops
// trivially-true rows, compiles tapes.
struct Emitter {
    const ClosedLoop& cl;
    double c;

    Expr guard_violation(const Expr& g) const {
        return simplify(Expr::constant(c) - g);
    }

    void emit(FormulaGroup& out, int groupno, const std::string& tag,
              const Region& region, const std::vector<Expr>& extra_guards,
              const std::vector<CoreRow>& core_rows) const {
        const int domain_id = static_cast<int>(out.domains.size());
        {
            SampleDomain sd;
            sd.tag = tag + (region.tag.empty() ? "" : "/" + region.tag);
            sd.state_box = region.box;
            sd.copy_dims = region.copy_dims;
            out.domains.push_back(std::move(sd));
        }

        // pinned coordinates become exact constants inside the formulas
        Substitution pin;
        bool any_pin = false;
        for (size_t i = 0; i < region.box.size(); ++i) {
            if (region.box[i].is_point()) {
                pin.set(VarKind::State, static_cast<int>(i),
                        Expr::constant(region.box[i].lo));
                any_pin = true;
            }
        }
        auto pinned = [&](const Expr& e) {
            return any_pin ? simplify(substitute(e, pin)) : e;
        };

        struct Proto {
            std::vector<CoreRow> rows;
            int n_aux = 0;
            std::string suffix;
        };

        Proto first;
        first.rows.reserve(core_rows.size());
        for (const auto& row : core_rows) {
            CoreRow r;
            for (const auto& d : row) r.push_back({pinned(d.e), d.expand});
            first.rows.push_back(std::move(r));
        }
        for (const auto& g : region.constraints)
            for (auto& row : first.rows)
                row.push_back({guard_violation(pinned(g)), false});
        for (const auto& g : extra_guards)
            for (auto& row : first.rows)
                row.push_back({guard_violation(pinned(g)), false});

        std::vector<Proto> work{std::move(first)}, done;
        while (!work.empty()) {
            Proto p = std::move(work.back());
            work.pop_back();

            // innermost sign/sat atom across all disjuncts
            std::vector<Expr> atoms;
            for (const auto& row : p.rows)
                for (const auto& d : row) collect_nonsmooth_atoms(d.e, atoms);
            Expr atom;
            bool found = false;
            for (const auto& a : atoms) {
                if (!contains_signsat(Expr(a.node().a))) {
                    atom = a;
                    found = true;
                    break;
                }
            }
            if (!found && !atoms.empty()) {
                atom = atoms[0];
                for (;;) {
                    std::vector<Expr> inner;
                    collect_nonsmooth_atoms(Expr(atom.node().a), inner);
                    if (inner.empty()) break;
                    atom = inner[0];
                }
                found = true;
            }
            if (!found) {
                done.push_back(std::move(p));
                continue;
            }

            const Expr arg(atom.node().a);
            struct Branch {
                Expr repl;
                std::vector<Expr> guards;
                const char* name;
                bool new_aux = false;
            };
            std::vector<Branch> branches;
            if (atom.op() == Op::Sat) {
                double lo = atom.node().sat_lo, hi = atom.node().sat_hi;
                branches.push_back({Expr::constant(lo), {arg - Expr::constant(lo)}, "lo"});
                branches.push_back(
                    {arg, {Expr::constant(lo) - arg, arg - Expr::constant(hi)}, "mid"});
                branches.push_back({Expr::constant(hi), {Expr::constant(hi) - arg}, "hi"});
            } else {
                branches.push_back({Expr::constant(1.0), {-arg}, "pos"});
                branches.push_back({Expr::constant(-1.0), {arg}, "neg"});
                branches.push_back({Expr::aux(p.n_aux), {arg, -arg}, "set", true});
            }
            int bi = 0;
            for (const auto& br : branches) {
                Proto q;
                q.n_aux = p.n_aux + (br.new_aux ? 1 : 0);
                q.suffix = p.suffix + "/b" + std::to_string(bi++) + br.name;
                q.rows.reserve(p.rows.size());
                for (const auto& row : p.rows) {
                    CoreRow nr;
                    nr.reserve(row.size() + br.guards.size());
                    for (const auto& d : row)
                        nr.push_back({simplify(replace_subtree(d.e, atom, br.repl)),
                                      d.expand});
                    for (const auto& g : br.guards)
                        nr.push_back({guard_violation(simplify(g)), false});
                    q.rows.push_back(std::move(nr));
                }
                work.push_back(std::move(q));
            }
        }

        for (auto& p : done) {
            StandardFormula f;
            f.group = groupno;
            f.domain_id = domain_id;
            f.tag = tag + (region.tag.empty() ? "" : "/" + region.tag) + p.suffix;

            // normalize, then drop rows satisfied by a constant disjunct and
            // strip constant positive disjuncts; a row with no remaining
            // disjunct is unsatisfiable
            std::vector<std::vector<Expr>> rows;
            for (auto& row : p.rows) {
                bool row_true = false;
                std::vector<Expr> kept;
                for (auto& d : row) {
                    Expr s = d.expand ? expand_collect(d.e) : simplify(d.e);
                    if (s.is_constant() && !s.node().tunable) {
                        if (s.constant_value() <= 0.0) {
                            row_true = true;
                            break;
                        }
                        continue;
                    }
                    kept.push_back(std::move(s));
                }
                if (row_true) continue;
                if (kept.empty())
                    rows.push_back({Expr::constant(1.0)});
                else
                    rows.push_back(std::move(kept));
            }
            if (rows.empty()) continue; // trivially true

            f.rows = std::move(rows);

            const StatePartition& part = cl.part();
            for (int i = 0; i < part.n(); ++i) {
                DomainDim d;
                d.name = "s" + std::to_string(i + 1);
                d.range = region.box[i];
                d.kind = VarKind::State;
                d.index = i;
                f.dims.push_back(std::move(d));
            }
            for (int k = 0; k < cl.sys.n_disturbances; ++k) {
                bool used = false;
                for (const auto& row : f.rows)
                    for (const auto& e : row)
                        if (uses_disturbance(e, k)) used = true;
                if (!used) continue;
                DomainDim d;
                d.name = "d" + std::to_string(k + 1);
                d.range = cl.sys.disturbance_box[k];
                d.kind = VarKind::Disturbance;
                d.index = k;
                f.dims.push_back(std::move(d));
            }
            for (int a = 0; a < p.n_aux; ++a) {
                DomainDim d;
                d.name = "z" + std::to_string(a + 1);
                d.range = {-1.0, 1.0};
                d.kind = VarKind::Aux;
                d.index = a;
                f.dims.push_back(std::move(d));
            }

            f.prepare();
            out.members.push_back(std::move(f));
        }
    }
};

Disjunct dj(Expr e) { return {std::move(e), false}; }
Disjunct dj_expand(Expr e) { return {std::move(e), true}; }

// V composed with a jump image.
Expr compose(const Expr& V, const std::vector<Expr>& map) {
    Substitution sub;
    for (size_t i = 0; i < map.size(); ++i)
        sub.set(VarKind::State, static_cast<int>(i), map[i]);
    return substitute(V, sub);
}

// Containment bodies for "map(s) in target" where target is the box/finite
// structure (S or O) of the spec sets.
std::vector<Expr> containment_bodies(const std::vector<Expr>& map,
                                     const std::vector<Interval>& target_x,
                                     const std::vector<DiscreteSet>& target_q,
                                     const StatePartition& part) {
    std::vector<Expr> bodies;
    for (int i = 0; i < part.n_x; ++i) {
        bodies.push_back(simplify(map[i] - Expr::constant(target_x[i].hi)));
        bodies.push_back(simplify(Expr::constant(target_x[i].lo) - map[i]));
    }
    for (int i = 0; i < part.n_q; ++i) {
        const Expr& g = map[part.q_offset() + i];
        const DiscreteSet& t = target_q[i];
        if (t.finite) {
            // membership in a finite value set: min_v |g - v| <= 0
            Expr m;
            bool havem = false;
            for (double v : t.values) {
                Expr dist = Expr::max(g - Expr::constant(v), Expr::constant(v) - g);
                m = havem ? Expr::min(m, dist) : dist;
                havem = true;
            }
            bodies.push_back(simplify(havem ? m : Expr::constant(1.0)));
        } else {
            bodies.push_back(simplify(g - Expr::constant(t.box.hi)));
            bodies.push_back(simplify(Expr::constant(t.box.lo) - g));
        }
    }
    for (int i = 0; i < part.n_t; ++i) {
        const Expr& g = map[part.t_offset() + i];
        bodies.push_back(simplify(g - Expr::constant(part.eta[i])));
        bodies.push_back(simplify(Expr::constant(0.0) - g));
    }
    return bodies;
}

Region pin_timer(Region r, const StatePartition& part, int timer) {
    r.box[part.t_offset() + timer] = Interval::point(part.eta[timer]);
    r.tag += "/t" + std::to_string(timer + 1) + "=eta";
    return r;
}

int params_in(const Expr& e) { return param_count(e); }

} // namespace

ConditionSet compile_rws(const ClosedLoop& cl, const SpecSets& sets, const Expr& V,
                         double gamma_c, double gamma_d, double c,
                         int n_params_hint) {
    if (V.contains_nonsmooth())
        throw NonsmoothV("candidate V contains a nonsmooth node");
    if (!(gamma_c > 0)) throw ModelError("gamma_c must be positive");
    if (gamma_d < 0) throw ModelError("gamma_d must be nonnegative");
    if (!(c > 0)) throw ModelError("strictness constant c must be positive");

    const StatePartition& part = cl.part();
    if (!vars_within(V, part.n(), 0, 0))
        throw ModelError("V references non-state variables");

    ConditionSet cs;
    cs.gamma_c = gamma_c;
    cs.gamma_d = gamma_d;
    cs.c = c;
    cs.n_params = std::max(n_params_hint, params_in(V));
    for (const auto& e : cl.flow) cs.n_params = std::max(cs.n_params, params_in(e));
    for (const auto& j : cl.system_jumps) {
        for (const auto& e : j.map) cs.n_params = std::max(cs.n_params, params_in(e));
        for (const auto& e : j.guards) cs.n_params = std::max(cs.n_params, params_in(e));
    }
    for (const auto& j : cl.timer_jumps)
        for (const auto& e : j.map) cs.n_params = std::max(cs.n_params, params_in(e));
    for (const auto& e : cl.flow_constraints)
        cs.n_params = std::max(cs.n_params, params_in(e));

    Regions regions = membership_formulas(sets, part);
    Emitter em{cl, c};

    std::vector<Expr> gradV(part.n());
    for (int i = 0; i < part.n(); ++i) gradV[i] = diff(V, VarKind::State, i);

    const Expr a_guard = simplify(Expr::constant(c) - V); // outside A exemption

    // phi1: V <= 0 on I
    FormulaGroup phi1{"phi1", {}, {}};
    for (const auto& r : regions.I) em.emit(phi1, 1, "phi1", r, {}, {{dj(V)}});
    cs.groups.push_back(std::move(phi1));

    // phi2: V > 0 on the continuous-state boundary of S
    FormulaGroup phi2{"phi2", {}, {}};
    for (const auto& r : regions.boundary_S)
        em.emit(phi2, 2, "phi2", r, {}, {{dj(simplify(Expr::constant(c) - V))}});
    cs.groups.push_back(std::move(phi2));

    // phi3: jump images stay in S, on (S\O) n D
    FormulaGroup phi3{"phi3", {}, {}};
    auto all_jumps = [&]() {
        std::vector<const ClosedJump*> js;
        for (const auto& j : cl.system_jumps) js.push_back(&j);
        for (const auto& j : cl.timer_jumps) js.push_back(&j);
        return js;
    }();
    for (const auto& r : regions.S_minus_O) {
        for (const ClosedJump* j : all_jumps) {
            Region rr = j->timer_index >= 0 ? pin_timer(r, part, j->timer_index) : r;
            rr.tag += "/" + j->name;
            auto bodies = containment_bodies(j->map, sets.S_x, sets.S_q, part);
            std::vector<CoreRow> rows;
            for (const auto& b : bodies) rows.push_back({dj(a_guard), dj(b)});
            em.emit(phi3, 3, "phi3", rr, j->guards, rows);
        }
    }
    cs.groups.push_back(std::move(phi3));

    // phi4: flow decrease on (S\O) n C
    FormulaGroup phi4{"phi4", {}, {}};
    for (const auto& r : regions.S_minus_O) {
        Expr body = Expr::constant(gamma_c);
        for (int i = 0; i < part.n(); ++i)
            body = body + simplify(gradV[i] * cl.flow[i]);
        body = simplify(body);
        em.emit(phi4, 4, "phi4", r, cl.flow_constraints, {{dj(a_guard), dj(body)}});
    }
    cs.groups.push_back(std::move(phi4));

    // phi5: decrease by gamma_d over system jumps on (S\O) n D_s
    FormulaGroup phi5{"phi5", {}, {}};
    for (const auto& r : regions.S_minus_O) {
        for (const auto& j : cl.system_jumps) {
            Expr body = compose(V, j.map) - V + Expr::constant(gamma_d);
            Region rr = r;
            rr.tag += "/" + j.name;
            em.emit(phi5, 5, "phi5", rr, j.guards, {{dj(a_guard), dj_expand(body)}});
        }
    }
    cs.groups.push_back(std::move(phi5));

    // phi6: no increase over timer jumps on (S\O) n D_t
    FormulaGroup phi6{"phi6", {}, {}};
    for (const auto& r : regions.S_minus_O) {
        for (const auto& j : cl.timer_jumps) {
            Expr body = compose(V, j.map) - V;
            Region rr = pin_timer(r, part, j.timer_index);
            rr.tag += "/" + j.name;
            em.emit(phi6, 6, "phi6", rr, j.guards, {{dj(a_guard), dj_expand(body)}});
        }
    }
    cs.groups.push_back(std::move(phi6));

    return cs;
}

void compile_rsws(ConditionSet& cs, const ClosedLoop& cl, const SpecSets& sets,
                  const Expr& V) {
    if (cs.groups.size() != 6)
        throw ModelError("compile_rsws expects a compiled RWS set");
    cs.beta_slot = cs.n_params;
    const Expr beta = Expr::param(cs.beta_slot);
    const double c = cs.c;
    const StatePartition& part = cl.part();

    Regions regions = membership_formulas(sets, part);
    Emitter em{cl, c};

    std::vector<Expr> gradV(part.n());
    for (int i = 0; i < part.n(); ++i) gradV[i] = diff(V, VarKind::State, i);

    // outside-B exemption for phi7..phi10 domains O \ int(B): V(x1) <= beta - c
    const Expr b_low_guard = simplify(V - beta + Expr::constant(c));
    // inside-B exemption for phi12 (domain B n D): V(x1) >= beta + c
    const Expr b_high_guard = simplify(beta + Expr::constant(c) - V);

    auto all_jumps = [&]() {
        std::vector<const ClosedJump*> js;
        for (const auto& j : cl.system_jumps) js.push_back(&j);
        for (const auto& j : cl.timer_jumps) js.push_back(&j);
        return js;
    }();

    FormulaGroup phi7{"phi7", {}, {}};
    for (const auto& r : regions.O) {
        for (const ClosedJump* j : all_jumps) {
            Region rr = j->timer_index >= 0 ? pin_timer(r, part, j->timer_index) : r;
            rr.tag += "/" + j->name;
            auto bodies = containment_bodies(j->map, sets.S_x, sets.S_q, part);
            std::vector<CoreRow> rows;
            for (const auto& b : bodies) rows.push_back({dj(b_low_guard), dj(b)});
            em.emit(phi7, 7, "phi7", rr, j->guards, rows);
        }
    }
    cs.groups.push_back(std::move(phi7));

    FormulaGroup phi8{"phi8", {}, {}};
    for (const auto& r : regions.O) {
        Expr body = Expr::constant(cs.gamma_c);
        for (int i = 0; i < part.n(); ++i)
            body = body + simplify(gradV[i] * cl.flow[i]);
        em.emit(phi8, 8, "phi8", r, cl.flow_constraints,
                {{dj(b_low_guard), dj(simplify(body))}});
    }
    cs.groups.push_back(std::move(phi8));

    FormulaGroup phi9{"phi9", {}, {}};
    for (const auto& r : regions.O) {
        for (const auto& j : cl.system_jumps) {
            Expr body = compose(V, j.map) - V + Expr::constant(cs.gamma_d);
            Region rr = r;
            rr.tag += "/" + j.name;
            em.emit(phi9, 9, "phi9", rr, j.guards, {{dj(b_low_guard), dj_expand(body)}});
        }
    }
    cs.groups.push_back(std::move(phi9));

    FormulaGroup phi10{"phi10", {}, {}};
    for (const auto& r : regions.O) {
        for (const auto& j : cl.timer_jumps) {
            Expr body = compose(V, j.map) - V;
            Region rr = pin_timer(r, part, j.timer_index);
            rr.tag += "/" + j.name;
            em.emit(phi10, 10, "phi10", rr, j.guards, {{dj(b_low_guard), dj_expand(body)}});
        }
    }
    cs.groups.push_back(std::move(phi10));

    FormulaGroup phi11{"phi11", {}, {}};
    for (const auto& r : regions.boundary_O)
        em.emit(phi11, 11, "phi11", r, {},
                {{dj(simplify(beta + Expr::constant(c) - V))}});
    cs.groups.push_back(std::move(phi11));

    // phi12: jump images from B n D land in B
    FormulaGroup phi12{"phi12", {}, {}};
    for (const auto& r : regions.O) {
        for (const ClosedJump* j : all_jumps) {
            Region rr = j->timer_index >= 0 ? pin_timer(r, part, j->timer_index) : r;
            rr.tag += "/" + j->name;
            auto bodies = containment_bodies(j->map, sets.O_x, sets.O_q, part);
            std::vector<CoreRow> rows;
            for (const auto& b : bodies) rows.push_back({dj(b_high_guard), dj(b)});
            rows.push_back({dj(b_high_guard), dj_expand(compose(V, j->map) - beta)});
            em.emit(phi12, 12, "phi12", rr, j->guards, rows);
        }
    }
    cs.groups.push_back(std::move(phi12));
}

FormulaGroup zeno_condition(const ClosedLoop& cl, const SpecSets& sets, const Expr& V,
                            const ConditionSet& cs) {
    if (cs.beta_slot < 0)
        throw ModelError("Zeno condition requires a compiled RSWS set");
    const StatePartition& part = cl.part();
    Regions regions = membership_formulas(sets, part);
    Emitter em{cl, cs.c};
    const Expr beta = Expr::param(cs.beta_slot);

    FormulaGroup g{"zeno", {}, {}};
    for (const auto& r : regions.O) {
        for (const auto& j : cl.system_jumps) {
            Region rr = r;
            rr.tag += "/" + j.name;
            em.emit(g, 0, "zeno", rr, j.guards,
                    {{dj(simplify(beta + Expr::constant(cs.c) - V))}});
        }
    }
    return g;
}

FormulaGroup assumption_restricted_jumps(const ClosedLoop& cl, const SpecSets& sets,
                                         const ConditionSet& cs) {
    const StatePartition& part = cl.part();
    Regions regions = membership_formulas(sets, part);
    Emitter em{cl, cs.c};
    const double c = cs.c;

    auto all_jumps = [&]() {
        std::vector<const ClosedJump*> js;
        for (const auto& j : cl.system_jumps) js.push_back(&j);
        for (const auto& j : cl.timer_jumps) js.push_back(&j);
        return js;
    }();

    FormulaGroup g{"nojumpchain", {}, {}};
    for (const auto& r : regions.S) {
        for (const ClosedJump* src : all_jumps) {
            Region rr = src->timer_index >= 0 ? pin_timer(r, part, src->timer_index) : r;
            rr.tag += "/" + src->name;

            std::vector<CoreRow> rows;
            // image must violate every system piece and miss every timer limit
            for (const auto& dst : cl.system_jumps) {
                CoreRow row;
                for (const auto& gd : dst.guards) {
                    Substitution sub;
                    for (size_t i = 0; i < src->map.size(); ++i)
                        sub.set(VarKind::State, static_cast<int>(i), src->map[i]);
                    row.push_back(
                        dj_expand(simplify(Expr::constant(c) - substitute(gd, sub))));
                }
                rows.push_back(std::move(row));
            }
            for (const auto& dst : cl.timer_jumps) {
                const Expr& gt = src->map[part.t_offset() + dst.timer_index];
                rows.push_back({dj_expand(
                    simplify(gt - Expr::constant(part.eta[dst.timer_index]) +
                             Expr::constant(c)))});
            }
            if (rows.empty()) continue; // no jump set at all
            em.emit(g, 0, "nojumpchain", rr, src->guards, rows);
        }
    }
    return g;
}

std::string dump(const FormulaGroup& g) {
    std::string out = g.name + (g.vacuous() ? " (vacuous)\n" : "\n");
    for (const auto& f : g.members) {
        out += "  " + f.tag + "  dims:";
        for (const auto& d : f.dims)
            out += " " + d.name + "=[" + std::to_string(d.range.lo) + "," +
                   std::to_string(d.range.hi) + "]";
        out += "\n";
        for (const auto& row : f.rows) {
            out += "    AND:";
            for (const auto& e : row) out += "  " + to_string(e) + " <= 0  |";
            out += "\n";
        }
    }
    return out;
}

} // namespace lbf
