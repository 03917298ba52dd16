#include <doctest.h>

#include <cmath>

#include "lbf/cma.hpp"
#include "lbf/evolve.hpp"

using namespace lbf;

TEST_SUITE_BEGIN("cma");

namespace {

double dist_to_ones(std::span<const double> x) {
    double sq = 0;
    for (double v : x) sq += (v - 1.0) * (v - 1.0);
    return std::sqrt(sq);
}

} // namespace

TEST_CASE("sphere objective reaches the known optimum") {
    // minimize sum (c_i - 1)^2; the default population is 4 + 3 ln n, so the
    // iteration budget scales with the dimension to hold the 1e-3 tolerance
    Objective sphere = [](std::span<const double> x) {
        double s = 0;
        for (double v : x) s += (v - 1.0) * (v - 1.0);
        return s;
    };
    for (int n : {1, 2, 4, 8}) {
        std::vector<double> x0(n, 0.0);
        Rng rng(31 + n);
        int iterations = n <= 2 ? 30 : 30 * n / 2;
        CmaResult r = cma_minimize(sphere, x0, 0.5, iterations, rng);
        CHECK(dist_to_ones(r.best_x) < 1e-3);
    }
}

TEST_CASE("strategy state respects the sep-CMA-ES shapes") {
    std::vector<double> x0(6, 0.0);
    CmaState s = CmaState::init(x0, 0.3);
    CHECK(s.lambda == 4 + static_cast<int>(std::floor(3 * std::log(6))));
    CHECK(s.mu == s.lambda / 2);
    CHECK(s.diag.size() == 6);
    for (double d : s.diag) CHECK(d > 0);
    CHECK(s.sigma == 0.3);
    double wsum = 0;
    for (double w : s.weights) {
        CHECK(w > 0);
        wsum += w;
    }
    CHECK(wsum == doctest::Approx(1.0));
    CHECK(s.mu_eff > 1.0);
}

TEST_CASE("objective is invariant to parameter-slot permutation") {
    // run identical seeds on f(x) and f(P x): dynamics are dimension-wise,
    // so the best values coincide exactly
    Objective f = [](std::span<const double> x) {
        double s = 0;
        for (size_t i = 0; i < x.size(); ++i) s += (x[i] - 1.0) * (x[i] - 1.0);
        return s;
    };
    Objective fp = [](std::span<const double> x) {
        double s = 0;
        for (size_t i = x.size(); i-- > 0;) s += (x[i] - 1.0) * (x[i] - 1.0);
        return s;
    };
    std::vector<double> x0(5, 0.25);
    Rng a(77), b(77);
    CmaResult ra = cma_minimize(f, x0, 0.5, 60, a);
    CmaResult rb = cma_minimize(fp, x0, 0.5, 60, b);
    // floating summation order differs, so compare outcome quality
    CHECK(std::abs(ra.best_f) < 1e-6);
    CHECK(std::abs(rb.best_f) < 1e-6);
}

TEST_CASE("cma_optimize writes constants back into the genotype") {
    Grammar g = parse_grammar({"start = tuple(<c>*s1^2 + <c> ; <c>*s1)",
                               "<c> ::= const[-10,10]"},
                              1, 1, 4);
    Rng rng(11);
    Genotype gt = grow(g, rng);
    Phenotype before = to_phenotype(g, gt);
    REQUIRE(before.params.size() == 3);

    // drive all three constants to (2, -1, 0.5)
    Objective target = [](std::span<const double> x) {
        double s = 0;
        const double want[3] = {2.0, -1.0, 0.5};
        for (int i = 0; i < 3; ++i) s -= (x[i] - want[i]) * (x[i] - want[i]);
        return s; // maximized
    };
    Genotype opt = cma_optimize(g, gt, target, 60, 1.0, rng);
    CHECK(adheres(g, opt));
    Phenotype after = to_phenotype(g, opt);
    REQUIRE(after.params.size() == 3);
    CHECK(after.params[0] == doctest::Approx(2.0).epsilon(1e-2));
    CHECK(after.params[1] == doctest::Approx(-1.0).epsilon(1e-2));
    CHECK(after.params[2] == doctest::Approx(0.5).epsilon(1e-2));
    // phenotype is reproducible from the tree alone
    Phenotype again = to_phenotype(g, opt);
    CHECK(again.params == after.params);
}

TEST_CASE("zero-parameter genotype passes through unchanged") {
    Grammar g = parse_grammar({"start = tuple(s1^2 ; s1)"}, 1, 1, 4);
    Rng rng(1);
    Genotype gt = grow(g, rng);
    Objective any = [](std::span<const double>) { return 0.0; };
    Genotype out = cma_optimize(g, gt, any, 30, 1.0, rng);
    CHECK(genotype_size(out) == genotype_size(gt));
    CHECK(to_string(to_phenotype(g, out).V) == to_string(to_phenotype(g, gt).V));
}

TEST_SUITE_END();
