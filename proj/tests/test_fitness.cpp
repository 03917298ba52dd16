#include <doctest.h>

#include <cmath>

#include "lbf/fitness.hpp"
#include "lbf/verify.hpp"

using namespace lbf;

TEST_SUITE_BEGIN("fitness");

namespace {

Expr s(int i) { return Expr::state(i); }

StandardFormula make_formula(std::vector<Interval> box,
                             std::vector<std::vector<Expr>> rows, int domain_id = 0) {
    StandardFormula f;
    f.tag = "test";
    f.domain_id = domain_id;
    for (size_t i = 0; i < box.size(); ++i)
        f.dims.push_back({"s" + std::to_string(i + 1), box[i], VarKind::State,
                          static_cast<int>(i)});
    f.rows = std::move(rows);
    f.prepare();
    return f;
}

FormulaGroup one_member_group(StandardFormula f) {
    FormulaGroup g;
    g.name = "phi1";
    SampleDomain d;
    d.tag = "test";
    for (const auto& dd : f.dims) d.state_box.push_back(dd.range);
    g.domains.push_back(d);
    g.members.push_back(std::move(f));
    return g;
}

} // namespace

TEST_CASE("rho: max over conjuncts of min over disjuncts") {
    // single clause f = x - 1 at x = 0
    auto f1 = make_formula({{-2, 2}}, {{s(0) - Expr::constant(1.0)}});
    CHECK(rho(f1, std::vector<double>{0.0}, {}) == -1.0);

    // two disjuncts (x-1, -x-1) at x = 0: min(-1,-1) = -1
    auto f2 = make_formula({{-2, 2}},
                           {{s(0) - Expr::constant(1.0), -s(0) - Expr::constant(1.0)}});
    CHECK(rho(f2, std::vector<double>{0.0}, {}) == -1.0);

    // two conjuncts (x-1) and (x+2) at x = 0: max(-1, 2) = 2
    auto f3 = make_formula({{-2, 2}},
                           {{s(0) - Expr::constant(1.0)}, {s(0) + Expr::constant(2.0)}});
    CHECK(rho(f3, std::vector<double>{0.0}, {}) == 2.0);
}

TEST_CASE("rho agrees with a brute-force re-implementation") {
    Rng rng(5);
    std::uniform_real_distribution<double> u(-2.0, 2.0);
    for (int trial = 0; trial < 200; ++trial) {
        int nrows = 1 + static_cast<int>(rng() % 3);
        std::vector<std::vector<Expr>> rows;
        std::vector<std::vector<std::array<double, 3>>> coef;
        for (int i = 0; i < nrows; ++i) {
            int nd = 1 + static_cast<int>(rng() % 3);
            std::vector<Expr> row;
            std::vector<std::array<double, 3>> crow;
            for (int j = 0; j < nd; ++j) {
                double a = u(rng), b = u(rng), c = u(rng);
                row.push_back(Expr::constant(a) * s(0) + Expr::constant(b) * s(1) +
                              Expr::constant(c));
                crow.push_back({a, b, c});
            }
            rows.push_back(row);
            coef.push_back(crow);
        }
        auto f = make_formula({{-2, 2}, {-2, 2}}, rows);
        for (int p = 0; p < 50; ++p) {
            std::vector<double> x{u(rng), u(rng)};
            double expect = -std::numeric_limits<double>::infinity();
            for (const auto& crow : coef) {
                double mn = std::numeric_limits<double>::infinity();
                for (const auto& abc : crow)
                    mn = std::min(mn, abc[0] * x[0] + abc[1] * x[1] + abc[2]);
                expect = std::max(expect, mn);
            }
            CHECK(rho(f, x, {}) == expect); // exact same operations
        }
    }
}

TEST_CASE("err applies the epsilon strengthening") {
    auto id = make_formula({{-10, 10}}, {{s(0)}});
    FormulaGroup g = one_member_group(std::move(id));
    SampleLayout lay{1, 0};
    Sample at;
    at.domain_id = 0;
    at.v = {-1.0, 0, 0, 0, 0};
    CHECK(err_at_sample(g, at, lay, {}, 0.0) == 0.0); // rho = -1 -> 0
    at.v[0] = 0.3;
    CHECK(err_at_sample(g, at, lay, {}, 0.0) == doctest::Approx(0.3));
    at.v[0] = -0.005; // f = -0.005, eps = 0.01 -> e = 0.005
    CHECK(err_at_sample(g, at, lay, {}, 0.01) == doctest::Approx(0.005));
}

TEST_CASE("f_samp closed forms") {
    auto id = make_formula({{-10, 10}}, {{s(0)}});
    FormulaGroup g = one_member_group(std::move(id));
    SampleLayout lay{1, 0};
    SamplePool pool;

    auto sample_at = [&](double x) {
        Sample s0;
        s0.domain_id = 0;
        s0.v = {x, 0, 0, 0, 0};
        return s0;
    };

    pool.base = {sample_at(-1), sample_at(-2), sample_at(-0.5)};
    CHECK(f_samp(g, pool, lay, {}, 0.0) == 1.0);

    pool.base = {sample_at(1.0)};
    CHECK(f_samp(g, pool, lay, {}, 0.0) == doctest::Approx(0.5));

    // e = (3,4) -> (1+5)^-1 = 1/6 (Euclidean norm)
    pool.base = {sample_at(3.0), sample_at(4.0)};
    CHECK(f_samp(g, pool, lay, {}, 0.0) == doctest::Approx(1.0 / 6.0));
}

TEST_CASE("f_samp strictly decreases when any error grows") {
    auto id = make_formula({{-10, 10}}, {{s(0)}});
    FormulaGroup g = one_member_group(std::move(id));
    SampleLayout lay{1, 0};
    SamplePool pool;
    Sample a;
    a.domain_id = 0;
    a.v = {1.0, 0, 0, 0, 0};
    Sample b = a;
    b.v[0] = 2.0;
    pool.base = {a, b};
    double f0 = f_samp(g, pool, lay, {}, 0.0);
    pool.base[0].v[0] = 1.5;
    double f1 = f_samp(g, pool, lay, {}, 0.0);
    CHECK(f1 < f0);
}

TEST_CASE("evaluation domain errors count as maximal error") {
    auto f = make_formula({{-1, 1}}, {{Expr::constant(1.0) / s(0)}});
    CHECK(rho(f, std::vector<double>{0.0}, {}) ==
          std::numeric_limits<double>::infinity());
    FormulaGroup g = one_member_group(std::move(f));
    SampleLayout lay{1, 0};
    SamplePool pool;
    Sample s0;
    s0.domain_id = 0;
    s0.v = {0.0, 0, 0, 0, 0};
    pool.base = {s0};
    CHECK(f_samp(g, pool, lay, {}, 0.0) == 0.0);
}

TEST_CASE("counterexample FIFO evicts oldest at capacity") {
    SamplePool pool;
    pool.cex_capacity = 3;
    for (int i = 0; i < 5; ++i) {
        Sample s0;
        s0.domain_id = i;
        pool.push_cex(s0);
    }
    REQUIRE(pool.cex.size() == 3);
    CHECK(pool.cex.front().domain_id == 2);
    CHECK(pool.cex.back().domain_id == 4);
}

TEST_CASE("weight cascade") {
    auto w = cascade_weights(std::vector<double>{1, 1, 1, 1, 1, 1});
    CHECK(w == std::vector<int>{1, 1, 1, 1, 1, 1});

    w = cascade_weights(std::vector<double>{0.8, 1, 1, 1, 1, 1});
    CHECK(w == std::vector<int>{1, 0, 0, 0, 0, 0});

    w = cascade_weights(std::vector<double>{1, 1, 0.99, 1, 1, 1});
    CHECK(w == std::vector<int>{1, 1, 1, 0, 0, 0});
}

TEST_CASE("weight cascade equals the product closed form") {
    Rng rng(7);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (int t = 0; t < 200; ++t) {
        std::vector<double> fs(6);
        for (auto& v : fs) v = rng() % 3 == 0 ? 1.0 : u(rng);
        auto w = cascade_weights(fs);
        for (size_t k = 0; k < fs.size(); ++k) {
            int prod = 1;
            for (size_t i = 0; i < k; ++i) prod *= static_cast<int>(std::floor(fs[i]));
            CHECK(w[k] == prod);
        }
    }
}

TEST_CASE("overall fitness closed forms") {
    std::vector<double> ones(6, 1.0);
    std::vector<int> smt1(6, 1), smt0(6, 0);
    CHECK(overall_fitness(ones, smt1) == 1.0);
    CHECK(overall_fitness(ones, smt0) == 0.5);

    // w = (1,0,...), F_samp = (1, 0.5, ...), F_SMT,1 = 1 -> (1+1)/12
    std::vector<double> fs{1.0, 0.5, 0, 0, 0, 0};
    std::vector<int> smt{1, 0, 0, 0, 0, 0};
    // w = (1, 1, 0, 0, 0, 0): second group weighted but F_SMT = 0
    CHECK(overall_fitness(fs, smt) == doctest::Approx((2.0 + 0.5) / 12.0));

    // RSWS normalization: 12 groups, all perfect -> 1
    std::vector<double> ones12(12, 1.0);
    std::vector<int> smt12(12, 1);
    CHECK(overall_fitness(ones12, smt12) == 1.0);
}

TEST_CASE("secondary measures order lexicographically") {
    Phenotype none;
    CHECK(secondary(none).param_count == 0);
    CHECK(secondary(none).param_norm == 0.0);

    Phenotype p34;
    p34.params = {3, 4};
    CHECK(secondary(p34).param_norm == doctest::Approx(5.0));

    Secondary a{2, 2.0}, b{2, 5.0}, c{1, 100.0};
    CHECK(a < b);
    CHECK(c < a); // fewer parameters wins regardless of norm
}

TEST_CASE("to_sample maps prover counterexamples into the shared layout") {
    StandardFormula f;
    f.tag = "t";
    f.domain_id = 3;
    f.dims = {{"s1", {-1, 1}, VarKind::State, 0},
              {"s2", {0, 2}, VarKind::State, 1},
              {"d1", {-0.5, 0.5}, VarKind::Disturbance, 0},
              {"z1", {-1, 1}, VarKind::Aux, 0}};
    SampleLayout lay{2, 1};
    std::vector<double> point{0.25, 1.5, -0.1, 0.7};
    std::vector<Interval> dbox{{-0.5, 0.5}};
    Sample s0 = to_sample(f, point, lay, dbox);
    CHECK(s0.domain_id == 3);
    CHECK(s0.v[0] == 0.25);
    CHECK(s0.v[1] == 1.5);
    CHECK(s0.v[2] == -0.1);
    CHECK(s0.v[3] == 0.7); // first aux slot
}

TEST_CASE("base samples stay in their domain and respect couplings") {
    auto f = make_formula({{-1, 1}, {0, 2}}, {{s(0) + s(1)}});
    FormulaGroup g;
    g.name = "phi1";
    SampleDomain d;
    d.tag = "dom";
    d.state_box = {{-1, 1}, {0, 2}};
    d.copy_dims = {{1, 0}}; // s2 copies s1
    g.domains.push_back(d);
    g.members.push_back(std::move(f));

    SampleLayout lay{2, 0};
    Rng rng(9);
    auto samples = make_base_samples(g, lay, {}, 100, rng);
    CHECK(samples.size() == 100);
    for (const auto& s0 : samples) {
        CHECK(s0.v[0] >= -1.0);
        CHECK(s0.v[0] <= 1.0);
        CHECK(s0.v[1] == s0.v[0]); // coupling exact
    }
}

TEST_SUITE_END();
