#include <doctest.h>

#include <functional>
#include <set>

#include "lbf/grammar.hpp"

using namespace lbf;

TEST_SUITE_BEGIN("grammar");

namespace {

std::vector<std::string> prexamp_lines() {
    return {
        "start = tuple(<pol> ; <pol>)",
        "<pol> ::= <pol> + <pol> | <const>*<mon>",
        "<mon> ::= <var> | <var>*<mon>",
        "<var> ::= s1 | s2",
        "<const> ::= const[-10,10]",
    };
}

Grammar prexamp(int depth_cap = 10) {
    return parse_grammar(prexamp_lines(), 2, 2, depth_cap);
}

// test-side adherence oracle, written independently of the library check:
// walks the derivation against the grammar's templates
bool oracle_adheres(const Grammar& g, const DerivationNode& n) {
    if (n.nt < 0 || n.nt >= static_cast<int>(g.rules.size())) return false;
    if (n.alt < 0 || n.alt >= static_cast<int>(g.rules[n.nt].alts.size())) return false;
    const Production& p = g.rules[n.nt].alts[n.alt];
    std::vector<int> want_children;
    int want_consts = 0;
    std::function<void(const ExprNode&)> scan = [&](const ExprNode& e) {
        if (e.op == Op::NtRef) want_children.push_back(e.index);
        if (e.op == Op::ConstDraw) ++want_consts;
        if (e.a) scan(*e.a);
        if (e.b) scan(*e.b);
    };
    scan(p.body.node());
    if (static_cast<int>(n.consts.size()) != want_consts) return false;
    if (n.children.size() != want_children.size()) return false;
    for (size_t i = 0; i < n.children.size(); ++i) {
        if (n.children[i].nt != want_children[i]) return false;
        if (!oracle_adheres(g, n.children[i])) return false;
    }
    return true;
}

bool oracle_adheres(const Grammar& g, const Genotype& gt) {
    for (const auto& c : gt.start_children)
        if (!oracle_adheres(g, c)) return false;
    return true;
}

int tree_depth(const DerivationNode& n) {
    int d = 0;
    for (const auto& c : n.children) d = std::max(d, tree_depth(c));
    return 1 + d;
}

// structural signature of a derivation (alt choices), ignoring const values
std::string signature(const DerivationNode& n) {
    std::string s = std::to_string(n.nt) + ":" + std::to_string(n.alt) + "(";
    for (const auto& c : n.children) s += signature(c) + ",";
    return s + ")";
}

// all signatures of derivations of `nt` with depth <= budget
void enumerate(const Grammar& g, int nt, int budget, std::set<std::string>& out,
               const std::string& prefix = "") {
    (void)prefix;
    if (budget <= 0) return;
    for (size_t a = 0; a < g.rules[nt].alts.size(); ++a) {
        const Production& p = g.rules[nt].alts[a];
        std::vector<std::set<std::string>> child_sigs;
        bool feasible = true;
        for (int r : p.nt_refs) {
            std::set<std::string> cs;
            enumerate(g, r, budget - 1, cs);
            if (cs.empty()) feasible = false;
            child_sigs.push_back(std::move(cs));
        }
        if (!feasible) continue;
        std::vector<std::string> acc{std::to_string(nt) + ":" + std::to_string(a) + "("};
        for (const auto& cs : child_sigs) {
            std::vector<std::string> next;
            for (const auto& base : acc)
                for (const auto& c : cs) next.push_back(base + c + ",");
            acc = std::move(next);
        }
        for (const auto& s : acc) out.insert(s + ")");
    }
}

} // namespace

TEST_CASE("grow produces depth-capped members of the enumerated language") {
    // depth counts nonterminal nesting: the smallest polynomial derivation
    // pol -> const*mon -> var needs depth 3
    Grammar g = prexamp(3);
    std::set<std::string> language;
    int pol = g.find_nonterminal("pol");
    enumerate(g, pol, 3, language);
    CHECK(!language.empty());

    Rng rng(42);
    for (int i = 0; i < 200; ++i) {
        Genotype gt = grow(g, rng);
        REQUIRE(gt.start_children.size() == 2);
        for (const auto& root : gt.start_children) {
            CHECK(tree_depth(root) <= 3);
            CHECK(language.count(signature(root)) == 1);
        }
    }
}

TEST_CASE("single-alternative grammar gives the fixed template") {
    Grammar g = parse_grammar({"start = tuple(<V> ; <k>)",
                               "<V> ::= <c>*s1^2",
                               "<k> ::= <c>*s1",
                               "<c> ::= const[-10,10]"},
                              1, 1, 4);
    Rng rng(1);
    Genotype gt = grow(g, rng);
    Phenotype ph = to_phenotype(g, gt);
    CHECK(ph.params.size() == 2);
    CHECK(param_count(ph.V) == 1);
    CHECK(param_count(ph.kappa[0]) == 2); // joint numbering across the tuple
    CHECK(ph.kappa.size() == 1);
    // phenotype evaluates as c0*s1^2
    double c0 = ph.params[0];
    CHECK(eval(ph.V, std::vector<double>{2.0}, ph.params) == doctest::Approx(4 * c0));
    CHECK(c0 >= -10.0);
    CHECK(c0 <= 10.0);
}

TEST_CASE("start tuple yields a (V, kappa) pair") {
    Grammar g = prexamp();
    Rng rng(7);
    Genotype gt = grow(g, rng);
    Phenotype ph = to_phenotype(g, gt);
    CHECK(ph.kappa.size() == 1);
    CHECK(ph.params.size() > 0);
    // parameter count equals the number of const leaves
    std::function<size_t(const DerivationNode&)> count_consts =
        [&](const DerivationNode& n) {
            size_t c = n.consts.size();
            for (const auto& ch : n.children) c += count_consts(ch);
            return c;
        };
    size_t consts = gt.start_consts.size();
    for (const auto& ch : gt.start_children) consts += count_consts(ch);
    CHECK(ph.params.size() == consts);
}

TEST_CASE("grow is deterministic under a fixed seed") {
    Grammar g = prexamp();
    Rng a(123), b(123);
    Genotype ga = grow(g, a), gb = grow(g, b);
    CHECK(signature(ga.start_children[0]) == signature(gb.start_children[0]));
    Phenotype pa = to_phenotype(g, ga), pb = to_phenotype(g, gb);
    CHECK(to_string(pa.V) == to_string(pb.V));
    CHECK(pa.params == pb.params);
}

TEST_CASE("operators preserve adherence (oracle-checked)") {
    Grammar g = prexamp();
    Rng rng(99);
    std::vector<Genotype> pop;
    for (int i = 0; i < 20; ++i) pop.push_back(grow(g, rng));
    for (int step = 0; step < 1000; ++step) {
        size_t i = rng() % pop.size(), j = rng() % pop.size();
        auto [a, b] = crossover(g, pop[i], pop[j], rng);
        CHECK(oracle_adheres(g, a));
        CHECK(oracle_adheres(g, b));
        CHECK(adheres(g, a));
        Genotype m = mutate(g, pop[i], rng);
        CHECK(oracle_adheres(g, m));
        CHECK(adheres(g, m));
        pop[i % pop.size()] = a;
        pop[j % pop.size()] = m;
    }
}

TEST_CASE("crossover without a common nonterminal returns parents") {
    Grammar g1 = parse_grammar({"start = tuple(<V> ; <k>)",
                                "<V> ::= <c>*s1^2",
                                "<k> ::= <c>*s1",
                                "<c> ::= const[-1,1]"},
                               1, 1, 4);
    // both genotypes share <c>/<V>/<k>, so build one with zero nodes instead
    Grammar g0 = parse_grammar({"start = tuple(s1^2 ; s1)"}, 1, 1, 4);
    Rng rng(5);
    Genotype a = grow(g0, rng), b = grow(g0, rng);
    auto [ca, cb] = crossover(g0, a, b, rng);
    CHECK(genotype_size(ca) == 0);
    CHECK(adheres(g0, ca));
    (void)g1;
}

TEST_CASE("mutating a const redraws within the range") {
    Grammar g = parse_grammar({"start = tuple(<c>*s1^2 ; <c>*s1)",
                               "<c> ::= const[-10,10]"},
                              1, 1, 4);
    Rng rng(3);
    Genotype gt = grow(g, rng);
    for (int i = 0; i < 1000; ++i) {
        gt = mutate(g, gt, rng);
        CHECK(adheres(g, gt));
        Phenotype ph = to_phenotype(g, gt);
        for (double p : ph.params) {
            CHECK(p >= -10.0);
            CHECK(p <= 10.0);
        }
    }
}

TEST_CASE("grammar with no finite derivation is rejected") {
    CHECK_THROWS_AS(parse_grammar({"start = tuple(<a> ; s1)", "<a> ::= <a> + <a>"},
                                  1, 1, 10),
                    GrammarNotTerminating);
}

TEST_CASE("depth cap keeps recursion from exceeding the budget") {
    Grammar g = prexamp(4);
    Rng rng(17);
    for (int i = 0; i < 300; ++i) {
        Genotype gt = grow(g, rng);
        for (const auto& root : gt.start_children) CHECK(tree_depth(root) <= 4);
    }
}

TEST_SUITE_END();
