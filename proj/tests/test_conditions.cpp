#include <doctest.h>

#include <cmath>

#include "lbf/conditions.hpp"
#include "lbf/fitness.hpp"

using namespace lbf;

TEST_SUITE_BEGIN("conditions");

namespace {

Expr s(int i) { return Expr::state(i); }

// 1-D pure ODE x' = -x over S = [-2,2], I = [-0.5,0.5], O = [-0.1,0.1]
struct Ode1D {
    ClosedLoop cl;
    SpecSets sets;
    Expr V;

    Ode1D() {
        OpenLoopSystem sys;
        sys.part.n_x = 1;
        sys.flow_x = {Expr::constant(-1.0) * s(0)};
        sys.output = {s(0)};
        cl = close_loop(sys, {});
        sets.S_x = {{-2, 2}};
        sets.I_x = {{-0.5, 0.5}};
        sets.O_x = {{-0.1, 0.1}};
        V = Expr::pow(s(0), 2) - Expr::constant(1.0); // x^2 - 1
    }
};

double rho_group_at(const FormulaGroup& g, double x) {
    double worst = -std::numeric_limits<double>::infinity();
    bool any = false;
    for (const auto& f : g.members) {
        if (f.dims.size() != 1) continue;
        if (x < f.dims[0].range.lo || x > f.dims[0].range.hi) continue;
        any = true;
        std::vector<double> pt{x};
        worst = std::max(worst, rho(f, pt, {}));
    }
    REQUIRE(any);
    return worst;
}

} // namespace

TEST_CASE("RWS compiles the six groups in fitness order") {
    Ode1D m;
    ConditionSet cs = compile_rws(m.cl, m.sets, m.V, 1e-2, 1e-2, 1e-2);
    REQUIRE(cs.groups.size() == 6);
    for (int i = 0; i < 6; ++i) {
        CHECK(cs.groups[i].name == "phi" + std::to_string(i + 1));
        for (const auto& f : cs.groups[i].members) CHECK(f.group == i + 1);
    }
    // pure ODE: no jumps, phi3/phi5/phi6 vacuous
    CHECK(cs.groups[2].vacuous());
    CHECK(cs.groups[4].vacuous());
    CHECK(cs.groups[5].vacuous());
    CHECK(!cs.groups[0].vacuous());
    CHECK(!cs.groups[3].vacuous());
    // 1-D boundary faces are points: with a fully bound V they constant-fold
    // to a proved-at-compile-time (vacuous) group
    CHECK(cs.groups[1].vacuous());
}

TEST_CASE("planar boundary faces survive as formulas") {
    OpenLoopSystem sys;
    sys.part.n_x = 2;
    sys.flow_x = {s(1), Expr::constant(-1.0) * s(0)};
    sys.output = {s(0), s(1)};
    ClosedLoop cl = close_loop(sys, {});
    SpecSets sets;
    sets.S_x = {{-2, 2}, {-2, 2}};
    sets.I_x = {{-0.5, 0.5}, {-0.5, 0.5}};
    sets.O_x = {{-0.1, 0.1}, {-0.1, 0.1}};
    Expr V = Expr::pow(s(0), 2) + Expr::pow(s(1), 2) - Expr::constant(1.0);
    ConditionSet cs = compile_rws(cl, sets, V, 1e-2, 1e-2, 1e-2);
    const FormulaGroup& phi2 = cs.groups[1];
    REQUIRE(phi2.members.size() == 4);
    for (const auto& f : phi2.members) {
        // pinned dim substituted: only the free coordinate remains
        int pinned = 0;
        for (const auto& d : f.dims) pinned += d.range.is_point() ? 1 : 0;
        CHECK(pinned == 1);
        // at the face corner (2, 2): -V + c
        std::vector<double> pt{2.0, 2.0};
        CHECK(rho(f, pt, {}) == doctest::Approx(-(4.0 + 4.0 - 1.0) + 1e-2));
    }
}

TEST_CASE("phi1 and phi4 clause values match hand evaluation") {
    Ode1D m;
    const double c = 1e-2, gc = 1e-2;
    ConditionSet cs = compile_rws(m.cl, m.sets, m.V, gc, 1e-2, c);

    // phi1: single member over I, row [V]; max V on I = -0.75
    const FormulaGroup& phi1 = cs.groups[0];
    REQUIRE(phi1.members.size() == 1);
    CHECK(rho_group_at(phi1, 0.5) == doctest::Approx(0.25 - 1.0));
    CHECK(rho_group_at(phi1, 0.0) == doctest::Approx(-1.0));

    // phi4 at x = 1: min(-V(1)+c, 2*1*(-1)+gc) = min(c, -2+gc)
    const FormulaGroup& phi4 = cs.groups[3];
    REQUIRE(!phi4.members.empty());
    double expect = std::min(-(1.0 - 1.0) + c, 2.0 * 1.0 * (-1.0) + gc);
    CHECK(rho_group_at(phi4, 1.0) == doctest::Approx(expect));
}

TEST_CASE("1-D flow clauses agree with the hand oracle on a grid") {
    Ode1D m;
    const double c = 1e-2, gc = 1e-2;
    ConditionSet cs = compile_rws(m.cl, m.sets, m.V, gc, 1e-2, c);
    const FormulaGroup& phi4 = cs.groups[3];
    // hand-coded classical clause: on S\O, min(-V(x)+c, <dV,f> + gc)
    for (int k = 0; k <= 100; ++k) {
        double x = -2.0 + 4.0 * k / 100.0;
        if (std::abs(x) < 0.1) continue; // inside O
        double hand = std::min(-(x * x - 1.0) + c, 2.0 * x * (-x) + gc);
        CHECK(rho_group_at(phi4, x) == doctest::Approx(hand).epsilon(1e-12));
    }
}

TEST_CASE("compiled formulas bind all their free variables") {
    Ode1D m;
    ConditionSet cs = compile_rws(m.cl, m.sets, m.V, 1e-2, 1e-2, 1e-2);
    for (const auto& g : cs.groups)
        for (const auto& f : g.members) {
            int nst = 0, nd = 0, na = 0;
            for (const auto& d : f.dims) {
                if (d.kind == VarKind::State) nst = std::max(nst, d.index + 1);
                if (d.kind == VarKind::Disturbance) nd = std::max(nd, d.index + 1);
                if (d.kind == VarKind::Aux) na = std::max(na, d.index + 1);
            }
            for (const auto& row : f.rows)
                for (const auto& e : row) CHECK(vars_within(e, nst, 0, nd, -1, na));
        }
}

TEST_CASE("RSWS adds phi7..phi12 with a beta parameter slot") {
    Ode1D m;
    ConditionSet cs = compile_rws(m.cl, m.sets, m.V, 1e-2, 1e-2, 1e-2);
    compile_rsws(cs, m.cl, m.sets, m.V);
    REQUIRE(cs.groups.size() == 12);
    CHECK(cs.beta_slot == 0); // bound V has no params
    CHECK(cs.total_params() == 1);
    // pure ODE: phi7, phi9, phi10, phi12 vacuous
    CHECK(cs.groups[6].vacuous());
    CHECK(cs.groups[8].vacuous());
    CHECK(cs.groups[9].vacuous());
    CHECK(cs.groups[11].vacuous());
    CHECK(!cs.groups[7].vacuous());  // flow decrease on O
    CHECK(!cs.groups[10].vacuous()); // boundary of O

    // phi11 at the O faces with beta: -V(x) + beta + c
    const double beta = -0.5;
    std::vector<double> theta{beta};
    const FormulaGroup& phi11 = cs.groups[10];
    REQUIRE(phi11.members.size() == 2);
    for (const auto& f : phi11.members) {
        double x = f.dims[0].range.lo;
        std::vector<double> pt{x};
        CHECK(rho(f, pt, theta) == doctest::Approx(-(x * x - 1.0) + beta + 1e-2));
    }
}

TEST_CASE("saturated flow splits into three smooth branches") {
    OpenLoopSystem sys;
    sys.part.n_x = 1;
    sys.n_inputs = 1;
    sys.flow_x = {Expr::input(0)};
    sys.output = {s(0)};
    sys.input_bounds = {std::make_pair(-1.0, 1.0)};
    ClosedLoop cl = close_loop(sys, {Expr::constant(-3.0) * Expr::output(0)});

    SpecSets sets;
    sets.S_x = {{-2, 2}};
    sets.I_x = {{-0.5, 0.5}};
    sets.O_x = {{-0.1, 0.1}};
    Expr V = Expr::pow(s(0), 2) - Expr::constant(1.0);
    ConditionSet cs = compile_rws(cl, sets, V, 1e-2, 1e-2, 1e-2);
    // two S\O half-space regions x three saturation branches
    CHECK(cs.groups[3].members.size() == 6);
    CHECK(cs.groups[3].domains.size() == 2);
    for (const auto& f : cs.groups[3].members) CHECK(f.dims.size() == 1);
}

TEST_CASE("sign in the flow adds a set-valued branch with an aux dim") {
    OpenLoopSystem sys;
    sys.part.n_x = 1;
    sys.n_inputs = 1;
    sys.flow_x = {Expr::input(0)};
    sys.output = {s(0)};
    sys.input_bounds = {std::nullopt}; // unbounded input
    ClosedLoop cl =
        close_loop(sys, {Expr::constant(-1.0) * Expr::sign(Expr::output(0))});

    SpecSets sets;
    sets.S_x = {{-2, 2}};
    sets.I_x = {{-0.5, 0.5}};
    sets.O_x = {{-0.1, 0.1}};
    Expr V = Expr::pow(s(0), 2) - Expr::constant(1.0);
    ConditionSet cs = compile_rws(cl, sets, V, 1e-2, 1e-2, 1e-2);
    bool saw_aux = false;
    for (const auto& f : cs.groups[3].members)
        for (const auto& d : f.dims)
            if (d.kind == VarKind::Aux) {
                saw_aux = true;
                CHECK(d.range == Interval{-1.0, 1.0});
            }
    CHECK(saw_aux);
    CHECK(cs.groups[3].members.size() == 6); // 2 regions x 3 sign branches
}

TEST_CASE("timer-jump condition cancels exactly for the held-state template") {
    // sampled-data shape: V = p0 x^2 + (eta - t) p1 (x - z)^2 + p2 collapses
    // to a vacuous timer-decrease condition
    OpenLoopSystem base;
    base.part.n_x = 1;
    base.n_inputs = 1;
    base.flow_x = {Expr::input(0)};
    base.output = {s(0)};
    base.input_bounds = {std::make_pair(-1.0, 1.0)};
    OpenLoopSystem sd = build_sampled_data(base, 0.01);
    ClosedLoop cl = close_loop(sd, {Expr::constant(-1.0) * Expr::output(0)});

    SpecSets sets;
    sets.S_x = {{-1, 1}};
    sets.I_x = {{-0.5, 0.5}};
    sets.O_x = {{-0.1, 0.1}};
    sets = build_sampled_data_sets(sets, 1);

    Expr V = Expr::param(0) * Expr::pow(s(0), 2) +
             (Expr::constant(0.01) - s(2)) * Expr::param(1) *
                 Expr::pow(s(0) - s(1), 2) +
             Expr::param(2);
    ConditionSet cs = compile_rws(cl, sets, V, 1e-2, 1e-2, 1e-2, 3);
    CHECK(cs.n_params == 3);
    // phi6's decrease collapses to 0 <= 0 on the pinned timer domain
    CHECK(cs.groups[5].vacuous());
    // phi3 (jump containment) keeps its zero-margin rows; the prover prunes
    // them instantly thanks to exact interval endpoints
    CHECK(!cs.groups[2].vacuous());
}

TEST_CASE("nonsmooth V is rejected") {
    Ode1D m;
    Expr bad = Expr::sat(-1, 1, s(0));
    CHECK_THROWS_AS(compile_rws(m.cl, m.sets, bad, 1e-2, 1e-2, 1e-2), NonsmoothV);
}

TEST_CASE("zeno condition and restricted jumps compile for a jump system") {
    // hysteresis-like: q in {-1,1}, flip when q*s1 >= 1
    OpenLoopSystem sys;
    sys.part.n_x = 1;
    sys.part.n_q = 1;
    sys.n_inputs = 1;
    sys.flow_x = {s(1) + Expr::input(0)};
    sys.flow_constraints = {s(1) * s(0) - Expr::constant(1.0)};
    sys.output = {s(0), s(1)};
    sys.input_bounds = {std::nullopt};
    JumpPiece d1;
    d1.name = "flip";
    d1.guards = {Expr::constant(1.0) - s(1) * s(0)};
    d1.map_xq = {s(0), Expr::constant(-1.0) * s(1)};
    sys.system_jumps = {d1};

    SpecSets sets;
    sets.S_x = {{-5, 5}};
    sets.I_x = {{-2, 2}};
    sets.O_x = {{-1, 1}};
    DiscreteSet q;
    q.finite = true;
    q.values = {-1, 1};
    sets.S_q = {q};
    sets.O_q = {q};

    ClosedLoop cl = close_loop(sys, {Expr::constant(-2.0) * Expr::output(0)});
    Expr V = Expr::constant(0.1) * Expr::pow(s(0), 2) - Expr::constant(1.0);
    ConditionSet cs = compile_rws(cl, sets, V, 1e-2, 1e-2, 1e-2);
    CHECK(!cs.groups[4].vacuous()); // system jumps exist
    CHECK(cs.groups[5].vacuous());  // no timers

    compile_rsws(cs, cl, sets, V);
    FormulaGroup zeno = zeno_condition(cl, sets, V, cs);
    CHECK(!zeno.members.empty());
    FormulaGroup nj = assumption_restricted_jumps(cl, sets, cs);
    CHECK(!nj.members.empty());
}

TEST_SUITE_END();
