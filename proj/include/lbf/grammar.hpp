#pragma once

#include <random>
#include <string>
#include <vector>

#include "lbf/expr.hpp"

namespace lbf {

using Rng = std::mt19937_64;

class GrammarError : public ExprError {
  public:
    using ExprError::ExprError;
};
class GrammarNotTerminating : public GrammarError {
  public:
    using GrammarError::GrammarError;
};

// One alternative of a production rule: an expression template whose NtRef
// leaves are expanded by child derivations and whose ConstDraw leaves are
// drawn random reals.
struct Production {
    Expr body;
    std::vector<int> nt_refs;                          // dfs order
    std::vector<std::pair<double, double>> const_ranges; // dfs order
};

struct Rule {
    std::string name;
    std::vector<Production> alts;
};

// BNF grammar (N, S, P). The start tree is a tuple of expression templates:
// component 0 is the candidate V, the rest are the controller components.
struct Grammar {
    std::vector<Rule> rules;        // rule i belongs to nonterminal i
    std::vector<Production> start;  // tuple components
    int depth_cap = 10;

    std::vector<int> min_depth;     // per nonterminal; filled by finalize()

    int find_nonterminal(const std::string& name) const;
    // Validates rule bodies and computes min_depth. Throws
    // GrammarNotTerminating when some nonterminal admits no finite
    // derivation.
    void finalize();
};

// Parses grammar text: one `<name> ::= alt | alt` rule per line and a
// `start = tuple(V ; k1, k2, ...)` line. Bodies use the problem expression
// syntax plus `<nt>` references and `const[lo,hi]` random-real terminals.
Grammar parse_grammar(const std::vector<std::string>& lines, int n_state,
                      int n_output, int depth_cap);

// Derivation-tree node: which alternative was chosen for a nonterminal and
// the drawn constants / child derivations of its template (dfs order).
struct DerivationNode {
    int nt = -1;
    int alt = 0;
    std::vector<double> consts;
    std::vector<DerivationNode> children;
};

struct Phenotype {
    Expr V;                     // parameter slots extracted
    std::vector<Expr> kappa;
    std::vector<double> params; // initial slot values (the drawn constants)
};

// Genotype: per-start-component derivations (the start tuple is fixed
// structure and is not itself subject to variation).
struct Genotype {
    std::vector<double> start_consts;          // ConstDraws in start templates
    std::vector<DerivationNode> start_children; // NtRefs across start templates
};

Genotype grow(const Grammar& g, Rng& rng);
Phenotype to_phenotype(const Grammar& g, const Genotype& gt);

std::pair<Genotype, Genotype> crossover(const Grammar& g, const Genotype& a,
                                        const Genotype& b, Rng& rng);
Genotype mutate(const Grammar& g, const Genotype& a, Rng& rng);

// Recursive adherence check (also used by the evolution loop after every
// generation).
bool adheres(const Grammar& g, const Genotype& gt);

size_t genotype_size(const Genotype& gt); // derivation node count

} // namespace lbf
