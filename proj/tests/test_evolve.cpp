#include <doctest.h>

#include "lbf/evolve.hpp"

using namespace lbf;

TEST_SUITE_BEGIN("evolve");

namespace {

Expr s(int i) { return Expr::state(i); }

// single-input integrator: x' = u, easy to certify with a quadratic V
SynthesisTask integrator_task(const std::string& vrule) {
    SynthesisTask task;
    task.sys.part.n_x = 1;
    task.sys.n_inputs = 1;
    task.sys.flow_x = {Expr::input(0)};
    task.sys.output = {s(0)};
    task.sys.input_bounds = {std::make_pair(-1.0, 1.0)};
    task.sets.S_x = {{-2, 2}};
    task.sets.I_x = {{-0.5, 0.5}};
    task.sets.O_x = {{-0.1, 0.1}};
    task.grammar = parse_grammar({"start = tuple(<V> ; <k>)",
                                  vrule,
                                  "<k> ::= <c>*y1",
                                  "<c> ::= const[-10,10]"},
                                 1, 1, 6);
    return task;
}

GPConfig small_gp() {
    GPConfig gp;
    gp.population = 8;
    gp.elites = 2;
    gp.max_generations = 12;
    gp.cma_generations = 20;
    gp.base_samples = 60;
    gp.seed = 42;
    return gp;
}

ProverConfig fast_prover() {
    ProverConfig pc;
    pc.delta = 1e-3;
    pc.timeout_s = 5;
    return pc;
}

std::vector<Individual> fake_population(const std::vector<double>& fs,
                                        const std::vector<int>& params) {
    std::vector<Individual> pop(fs.size());
    for (size_t i = 0; i < fs.size(); ++i) {
        pop[i].F = fs[i];
        pop[i].sec = Secondary{params[i], static_cast<double>(params[i])};
    }
    return pop;
}

} // namespace

TEST_CASE("tournament with k = population returns the global best") {
    auto pop = fake_population({0.1, 0.9, 0.4, 0.2}, {3, 3, 3, 3});
    Rng rng(1);
    for (int t = 0; t < 20; ++t)
        CHECK(select(pop, static_cast<int>(pop.size()), rng) == 1);
}

TEST_CASE("equal fitness breaks ties by fewer parameters") {
    auto pop = fake_population({0.5, 0.5, 0.5}, {7, 2, 9});
    Rng rng(2);
    for (int t = 0; t < 20; ++t) CHECK(select(pop, 3, rng) == 1);
}

TEST_CASE("k = 1 is a uniform draw") {
    auto pop = fake_population({0.1, 0.9, 0.4, 0.2}, {1, 1, 1, 1});
    Rng rng(3);
    std::vector<int> hits(4, 0);
    for (int t = 0; t < 4000; ++t) ++hits[select(pop, 1, rng)];
    for (int h : hits) CHECK(h > 800); // roughly uniform
}

TEST_CASE("next generation keeps the elites verbatim and the size") {
    SynthesisTask task = integrator_task("<V> ::= <c>*s1^2 + <c>");
    GPConfig gp = small_gp();
    Rng rng(5);
    std::vector<Individual> pop(gp.population);
    for (auto& ind : pop) ind.gt = grow(task.grammar, rng);
    pop[3].F = 0.9;
    pop[5].F = 0.8;
    std::string sig3 = to_string(to_phenotype(task.grammar, pop[3].gt).V);
    std::string sig5 = to_string(to_phenotype(task.grammar, pop[5].gt).V);

    Rng rng2(7);
    auto next = next_generation(task.grammar, pop, gp, rng2);
    CHECK(next.size() == pop.size());
    CHECK(to_string(to_phenotype(task.grammar, next[0].gt).V) == sig3);
    CHECK(to_string(to_phenotype(task.grammar, next[1].gt).V) == sig5);
    for (const auto& ind : next) CHECK(adheres(task.grammar, ind.gt));

    // deterministic under the same seed
    Rng rng3(7);
    auto again = next_generation(task.grammar, pop, gp, rng3);
    for (size_t i = 0; i < next.size(); ++i)
        CHECK(to_string(to_phenotype(task.grammar, again[i].gt).V) ==
              to_string(to_phenotype(task.grammar, next[i].gt).V));
}

TEST_CASE("integrator certifies with the quadratic template") {
    SynthesisTask task = integrator_task("<V> ::= <c>*s1^2 + <c>");
    GPConfig gp = small_gp();
    Outcome out = run(task, gp, fast_prover());
    CHECK(out.certified);
    REQUIRE(out.certificate);
    CHECK(out.certificate->spec_type == "rws");
    CHECK(out.best.F == 1.0);
    CHECK(out.reason == "certified");
    // verdicts cover the six groups
    CHECK(out.certificate->verdicts.size() == 6);
}

TEST_CASE("constant V can never satisfy phi1 and phi2 together") {
    SynthesisTask task = integrator_task("<V> ::= <c>");
    GPConfig gp = small_gp();
    gp.max_generations = 6;
    Outcome out = run(task, gp, fast_prover());
    CHECK(!out.certified);
    CHECK(out.reason == "max-generations");
    CHECK(out.best.F < 1.0);
}

TEST_CASE("with the prover disabled the fitness caps at one half") {
    SynthesisTask task = integrator_task("<V> ::= <c>*s1^2 + <c>");
    GPConfig gp = small_gp();
    gp.enable_prover = false;
    gp.max_generations = 8;
    Outcome out = run(task, gp, fast_prover());
    CHECK(!out.certified);
    CHECK(out.best.F <= 0.5);
}

TEST_CASE("monotone best fitness under a static pool") {
    SynthesisTask task = integrator_task("<V> ::= <c>*s1^2 + <c>");
    GPConfig gp = small_gp();
    gp.enable_prover = false; // no counterexamples: pools stay fixed
    gp.max_generations = 8;
    std::vector<double> best;
    RunSinks sinks;
    sinks.generation = [&](const GenerationRow& row) { best.push_back(row.best_f); };
    run(task, gp, fast_prover(), sinks);
    REQUIRE(best.size() >= 2);
    for (size_t i = 1; i < best.size(); ++i) CHECK(best[i] >= best[i - 1] - 1e-12);
}

TEST_CASE("seeded runs are reproducible") {
    SynthesisTask task = integrator_task("<V> ::= <c>*s1^2 + <c>");
    GPConfig gp = small_gp();
    gp.max_generations = 4;
    gp.enable_prover = false;
    std::vector<double> a, b;
    RunSinks sa, sb;
    sa.generation = [&](const GenerationRow& r) {
        a.push_back(r.best_f);
        a.insert(a.end(), r.best_fsamp.begin(), r.best_fsamp.end());
    };
    sb.generation = [&](const GenerationRow& r) {
        b.push_back(r.best_f);
        b.insert(b.end(), r.best_fsamp.begin(), r.best_fsamp.end());
    };
    run(task, gp, fast_prover(), sa);
    run(task, gp, fast_prover(), sb);
    CHECK(a == b);
}

TEST_SUITE_END();
