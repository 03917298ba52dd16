#include <doctest.h>

#include <random>

#include "lbf/hybrid.hpp"

using namespace lbf;

TEST_SUITE_BEGIN("hybrid");

namespace {

Expr s(int i) { return Expr::state(i); }

// Table-style linear system: x' = (x2, -x1 + u), saturated input
OpenLoopSystem system1() {
    OpenLoopSystem sys;
    sys.part.n_x = 2;
    sys.n_inputs = 1;
    sys.flow_x = {s(1), Expr::constant(-1) * s(0) + Expr::input(0)};
    sys.output = {s(0), s(1)};
    sys.input_bounds = {std::make_pair(-1.0, 1.0)};
    return sys;
}

SpecSets sets1() {
    SpecSets st;
    st.S_x = {{-1, 1}, {-1, 1}};
    st.I_x = {{-0.5, 0.5}, {-0.5, 0.5}};
    st.O_x = {{-0.1, 0.1}, {-0.1, 0.1}};
    return st;
}

} // namespace

TEST_CASE("close_loop substitutes saturated controller") {
    OpenLoopSystem sys = system1();
    std::vector<Expr> kappa{Expr::constant(-2.0) * Expr::output(0) +
                            Expr::constant(-1.0) * Expr::output(1)};
    ClosedLoop cl = close_loop(sys, kappa);
    REQUIRE(cl.flow.size() == 2);
    // F = (s2, -s1 + sat(-1,1; -2 s1 - s2))
    std::vector<double> x{0.3, -0.2};
    double u = std::clamp(-2.0 * 0.3 - 1.0 * -0.2, -1.0, 1.0);
    CHECK(eval(cl.flow[0], x) == -0.2);
    CHECK(eval(cl.flow[1], x) == doctest::Approx(-0.3 + u));
}

TEST_CASE("closed loop equals open loop with u := sat(kappa(h(s))) pointwise") {
    OpenLoopSystem sys = system1();
    std::vector<Expr> kappa{Expr::constant(3.0) * Expr::output(0) -
                            Expr::constant(0.5) * Expr::output(1)};
    ClosedLoop cl = close_loop(sys, kappa);

    std::mt19937_64 rng(21);
    std::uniform_real_distribution<double> u(-2.0, 2.0);
    for (int i = 0; i < 1000; ++i) {
        std::vector<double> x{u(rng), u(rng)};
        double kraw = 3.0 * x[0] - 0.5 * x[1];
        double uin = std::clamp(kraw, -1.0, 1.0);
        EvalContext ctx;
        ctx.state = x;
        std::vector<double> uv{uin};
        ctx.input = uv;
        for (int d = 0; d < 2; ++d) {
            double open = eval(sys.flow_x[d], ctx);
            double closed = eval(cl.flow[d], x);
            CHECK(open == closed); // exact, same operation order
        }
    }
}

TEST_CASE("zero controller on integrator gives sat(0) = 0 flow") {
    OpenLoopSystem sys;
    sys.part.n_x = 1;
    sys.n_inputs = 1;
    sys.flow_x = {Expr::input(0)};
    sys.output = {s(0)};
    sys.input_bounds = {std::make_pair(-1.0, 1.0)};
    ClosedLoop cl = close_loop(sys, {Expr::constant(0.0)});
    CHECK(eval(cl.flow[0], std::vector<double>{5.0}) == 0.0);
}

TEST_CASE("controller dimension mismatch is rejected") {
    OpenLoopSystem sys = system1();
    CHECK_THROWS_AS(close_loop(sys, {}), DimensionMismatch);
}

TEST_CASE("sampled-data wrapper doubles the state and adds one timer") {
    OpenLoopSystem sd = build_sampled_data(system1(), 0.01);
    CHECK(sd.part.n_x == 2);
    CHECK(sd.part.n_q == 2);
    CHECK(sd.part.n_t == 1);
    CHECK(sd.part.n() == 5);
    CHECK(sd.part.eta == std::vector<double>{0.01});
    // h(s) = s_q
    CHECK(eval(sd.output[0], std::vector<double>{1, 2, 3, 4, 0}) == 3.0);
    CHECK(eval(sd.output[1], std::vector<double>{1, 2, 3, 4, 0}) == 4.0);

    ClosedLoop cl = close_loop(sd, {Expr::constant(-1.0) * Expr::output(0)});
    // flow: (f_x(s_x, u(s_q)), 0, 0, 1)
    std::vector<double> x{0.5, -0.5, 0.2, 0.1, 0.003};
    CHECK(eval(cl.flow[2], x) == 0.0);
    CHECK(eval(cl.flow[3], x) == 0.0);
    CHECK(eval(cl.flow[4], x) == 1.0);
    // u depends on the held copy only
    CHECK(eval(cl.flow[1], x) == doctest::Approx(-0.5 + std::clamp(-0.2, -1.0, 1.0)));

    // timer jump: (s_x, s_x, 0), other timers none
    REQUIRE(cl.timer_jumps.size() == 1);
    const auto& tj = cl.timer_jumps[0];
    std::vector<double> at{0.7, -0.3, 9, 9, 0.01};
    CHECK(eval(tj.map[0], at) == 0.7);
    CHECK(eval(tj.map[1], at) == -0.3);
    CHECK(eval(tj.map[2], at) == 0.7);
    CHECK(eval(tj.map[3], at) == -0.3);
    CHECK(eval(tj.map[4], at) == 0.0);
}

TEST_CASE("timer jump resets only the triggering timer") {
    OpenLoopSystem sys;
    sys.part.n_x = 1;
    sys.part.n_t = 2;
    sys.part.eta = {0.5, 0.8};
    sys.flow_x = {Expr::constant(0.0)};
    sys.timer_jump_xq = {s(0)};
    sys.output = {s(0)};
    ClosedLoop cl = close_loop(sys, {});
    REQUIRE(cl.timer_jumps.size() == 2);
    std::vector<double> at{1.0, 0.5, 0.3};
    CHECK(eval(cl.timer_jumps[0].map[1], at) == 0.0); // reset_1 = 0
    CHECK(eval(cl.timer_jumps[0].map[2], at) == 0.3); // other timer unchanged
    CHECK(eval(cl.timer_jumps[1].map[1], at) == 0.5);
    CHECK(eval(cl.timer_jumps[1].map[2], at) == 0.0);
}

TEST_CASE("sampled-data set transform couples q to x") {
    SpecSets sd = build_sampled_data_sets(sets1(), 2);
    CHECK(sd.S_q.size() == 2);
    CHECK(!sd.S_q[0].finite);
    CHECK(sd.S_q[0].box == Interval{-1, 1});
    CHECK(sd.O_q[0].box == Interval{-0.1, 0.1});
    CHECK(sd.I_couplings.size() == 2);
    CHECK(sd.I_couple_pairs.size() == 2);
    REQUIRE(sd.I_t.size() == 1);
    CHECK(*sd.I_t[0] == 0.0);
}

TEST_CASE("boundary of a planar box is four faces") {
    StatePartition part;
    part.n_x = 2;
    Regions r = membership_formulas(sets1(), part);
    CHECK(r.boundary_S.size() == 4);
    CHECK(r.boundary_O.size() == 4);
    CHECK(r.S.size() == 1);
    for (const auto& f : r.boundary_S) {
        int pinned = 0;
        for (const auto& b : f.box) pinned += b.is_point() ? 1 : 0;
        CHECK(pinned == 1);
    }
    // S\O as half-space branches: 2 per dim
    CHECK(r.S_minus_O.size() == 4);
}

TEST_CASE("discrete instances enumerate and O instances respect O_q") {
    StatePartition part;
    part.n_x = 1;
    part.n_q = 1;
    SpecSets st;
    st.S_x = {{-5, 5}};
    st.I_x = {{-2, 2}};
    st.O_x = {{-1, 1}};
    DiscreteSet q;
    q.finite = true;
    q.values = {-1, 1};
    st.S_q = {q};
    st.O_q = {q};
    Regions r = membership_formulas(st, part);
    CHECK(r.S.size() == 2);          // q = -1, q = 1
    CHECK(r.boundary_S.size() == 4); // 2 faces x 2 instances
    CHECK(r.O.size() == 2);
    CHECK(r.S_minus_O.size() == 4);  // 2 half-spaces x 2 instances

    // q value outside O_q puts the whole instance slice in S\O
    DiscreteSet oq;
    oq.finite = true;
    oq.values = {1};
    st.O_q = {oq};
    Regions r2 = membership_formulas(st, part);
    CHECK(r2.O.size() == 1);
    CHECK(r2.S_minus_O.size() == 3); // full slice at q=-1 plus 2 branches at q=1
}

TEST_CASE("empty goal interior is rejected") {
    SpecSets st = sets1();
    st.O_x[0] = Interval::point(0.0);
    StatePartition part;
    part.n_x = 2;
    CHECK_THROWS_AS(membership_formulas(st, part), EmptyInterior);
}

TEST_CASE("sets must satisfy the interiority assumptions") {
    SpecSets st = sets1();
    st.I_x[0] = {-1, 0.5}; // touches the S boundary
    StatePartition part;
    part.n_x = 2;
    CHECK_THROWS_AS(st.validate(part), ModelError);
}

TEST_CASE("pure ODE degenerates cleanly") {
    OpenLoopSystem sys = system1();
    ClosedLoop cl = close_loop(sys, {Expr::constant(0.0)});
    CHECK(cl.system_jumps.empty());
    CHECK(cl.timer_jumps.empty());
    CHECK(cl.flow_constraints.empty());
}

TEST_SUITE_END();
