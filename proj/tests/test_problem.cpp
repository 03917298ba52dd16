#include <doctest.h>

#include <cstdio>
#include <fstream>

#include "lbf/problem.hpp"
#include "lbf/report.hpp"

using namespace lbf;

TEST_SUITE_BEGIN("problem");

namespace {

const char* kSystem1 = R"(
# linear benchmark, continuous-time model
[partition]
n_x = 2
n_q = 0
n_t = 0

[flow]
f1 = s2
f2 = -s1 + u1

[input]
u1 = -1, 1

[output]
y1 = s1
y2 = s2

[sets]
S_x = [-1, 1]^2
I_x = [-0.5, 0.5]^2
O_x = [-0.1, 0.1]^2

[spec]
type = rws
gamma_c = 0.01
gamma_d = 0.01
c = 0.01

[grammar]
start = tuple(<c>*s1^2 + <c>*s1*s2 + <c>*s2^2 + <c> ; <c>*y1 + <c>*y2)
<c> ::= const[-10,10]
max_depth = 10

[gp]
population = 14
max_generations = 50

[prover]
delta = 0.001
timeout = 20
)";

} // namespace

TEST_CASE("a full problem file parses into a validated bundle") {
    Problem p = parse_problem(kSystem1);
    CHECK(p.task.sys.part.n_x == 2);
    CHECK(p.task.sys.n_inputs == 1);
    CHECK(p.task.sys.input_bounds[0]->first == -1.0);
    CHECK(p.task.sets.S_x[0] == Interval{-1, 1});
    CHECK(p.task.sets.O_x[1] == Interval{-0.1, 0.1});
    CHECK(!p.task.rsws);
    CHECK(p.gp.population == 14);
    CHECK(p.gp.max_generations == 50);
    CHECK(p.prover.delta == 0.001);
    CHECK(p.has_grammar);
    CHECK(p.task.grammar.start.size() == 2);
    CHECK(!p.digest.empty());

    // closed loop from a grown candidate works end to end
    Rng rng(1);
    Genotype gt = grow(p.task.grammar, rng);
    Phenotype ph = to_phenotype(p.task.grammar, gt);
    CHECK(ph.params.size() == 6);
    ClosedLoop cl = close_loop(p.task.sys, ph.kappa);
    CHECK(cl.flow.size() == 2);
}

TEST_CASE("unknown keys and sections are rejected with line numbers") {
    std::string bad = kSystem1;
    size_t pos = bad.find("S_x =");
    bad.replace(pos, 3, "S_y");
    try {
        parse_problem(bad);
        FAIL("expected a parse error");
    } catch (const ProblemError& e) {
        std::string msg = e.what();
        CHECK(msg.find("unknown key") != std::string::npos);
        CHECK(msg.find("line") != std::string::npos);
    }

    std::string badsec = kSystem1;
    badsec += "\n[frobnicate]\nx = 1\n";
    CHECK_THROWS_AS(parse_problem(badsec), ProblemError);

    std::string dup = kSystem1;
    dup += "\n[sets]\nS_x = [-1,1]^2\n";
    CHECK_THROWS_AS(parse_problem(dup), ProblemError);
}

TEST_CASE("malformed expressions carry diagnostics") {
    std::string bad = kSystem1;
    size_t pos = bad.find("f1 = s2");
    bad.replace(pos, 7, "f1 = s9");
    try {
        parse_problem(bad);
        FAIL("expected a parse error");
    } catch (const ProblemError& e) {
        std::string msg = e.what();
        CHECK(msg.find("line") != std::string::npos);
        CHECK(msg.find("s9") != std::string::npos);
    }
}

TEST_CASE("sampled-data section wraps the declared system") {
    std::string sd = kSystem1;
    sd += "\n[sampled_data]\neta = 0.01\n";
    // the sampled-data controller looks at held outputs
    Problem p = parse_problem(sd);
    CHECK(p.task.sys.part.n_x == 2);
    CHECK(p.task.sys.part.n_q == 2);
    CHECK(p.task.sys.part.n_t == 1);
    CHECK(p.task.sys.part.eta == std::vector<double>{0.01});
    CHECK(p.task.sets.I_couple_pairs.size() == 2);
    REQUIRE(p.task.sets.I_t.size() == 1);
    CHECK(*p.task.sets.I_t[0] == 0.0);
    // h now reads the held copy
    CHECK(eval(p.task.sys.output[0], std::vector<double>{1, 2, 3, 4, 0}) == 3.0);
}

TEST_CASE("certificate files round-trip") {
    Problem p = parse_problem(kSystem1);
    Certificate c;
    c.V = parse_expr("2.5*s1^2 + 1.25*s1*s2 + 3*s2^2 - 1.5");
    c.kappa = {parse_expr("-2*s1 - 1*s2")};
    c.gamma_c = 0.01;
    c.gamma_d = 0.01;
    c.c = 0.01;
    c.delta = 1e-3;
    c.spec_type = "rws";
    c.problem_digest = p.digest;
    c.verdicts = {{"phi1", ProveStatus::Proved}, {"phi2", ProveStatus::Proved}};

    const char* path = "/tmp/lbf_test_cert.cert";
    write_certificate(path, c);
    Certificate r = read_certificate(path, p);
    CHECK(structurally_equal(r.V, c.V));
    REQUIRE(r.kappa.size() == 1);
    CHECK(structurally_equal(r.kappa[0], c.kappa[0]));
    CHECK(r.problem_digest == p.digest);
    CHECK(r.gamma_c == 0.01);
    CHECK(!r.beta);
    std::remove(path);

    c.beta = -14.0381;
    write_certificate(path, c);
    Certificate r2 = read_certificate(path, p);
    REQUIRE(r2.beta);
    CHECK(*r2.beta == -14.0381);
    std::remove(path);
}

TEST_CASE("run reports are deterministic byte-for-byte") {
    Problem p = parse_problem(kSystem1);
    Outcome out;
    out.certified = false;
    out.reason = "max-generations";
    out.generations = 3;
    out.best.V = parse_expr("s1^2 - 1");
    out.best.kappa = {parse_expr("-2*s1")};
    out.best.F = 0.25;
    out.best.fsamp = {1, 0.5, 1, 1, 1, 1};
    out.best.fsmt = {0, 0, 0, 0, 0, 0};

    const char* p1 = "/tmp/lbf_rep1.json";
    const char* p2 = "/tmp/lbf_rep2.json";
    write_run_report(p1, p, out, 7, "generations.csv");
    write_run_report(p2, p, out, 7, "generations.csv");
    std::ifstream f1(p1), f2(p2);
    std::string s1((std::istreambuf_iterator<char>(f1)), {});
    std::string s2((std::istreambuf_iterator<char>(f2)), {});
    CHECK(s1 == s2);
    CHECK(!s1.empty());
    CHECK(s1.find("\"seed\": 7") != std::string::npos);
    std::remove(p1);
    std::remove(p2);
}

TEST_CASE("finite discrete sets parse") {
    const char* hyst = R"(
[partition]
n_x = 1
n_q = 1

[flow]
f1 = s2 + u1
c1 = s2*s1 - 1

[input]
u1 = free

[output]
y1 = s1
y2 = s2

[jumps.system.1]
name = to-minus
guard1 = 1 - s1
guard2 = s2 - 1
guard3 = 1 - s2
g1 = s1
g2 = -1

[jumps.system.2]
name = to-plus
guard1 = s1 + 1
guard2 = -1 - s2
guard3 = s2 + 1
g1 = s1
g2 = 1

[sets]
S_x = [-5, 5]
I_x = [-2, 2]
O_x = [-1, 1]
S_q = {-1, 1}
O_q = {-1, 1}

[spec]
type = rws
)";
    Problem p = parse_problem(hyst);
    CHECK(p.task.sys.part.n_q == 1);
    REQUIRE(p.task.sets.S_q.size() == 1);
    CHECK(p.task.sets.S_q[0].finite);
    CHECK(p.task.sets.S_q[0].values == std::vector<double>{-1, 1});
    CHECK(p.task.sys.system_jumps.size() == 2);
    CHECK(p.task.sys.system_jumps[0].name == "to-minus");
    CHECK(!p.has_grammar);
}

TEST_SUITE_END();
