#pragma once

#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "lbf/conditions.hpp"
#include "lbf/grammar.hpp"

namespace lbf {

enum class ProveStatus { Proved, RefutedDelta, Timeout, Skipped };

const char* to_string(ProveStatus s);

struct ProverConfig {
    double delta = 1e-3;      // must stay below the strictness constant c
    double timeout_s = 20.0;  // per query
    uint64_t max_splits = ~0ull;
    int workers = 1;
    bool early_exit = true;   // verify_all stops at the first non-proved group

    void validate(double c) const;
};

// Result of one delta-decision query. Proved = the negation is
// unsatisfiable; RefutedDelta = delta-weakened negation satisfiable on the
// witness boxes.
struct Verdict {
    ProveStatus status = ProveStatus::Skipped;
    std::vector<std::vector<Interval>> witnesses;
    uint64_t splits = 0;
    double seconds = 0.0;
};

struct GroupVerdict {
    std::string name;
    ProveStatus status = ProveStatus::Skipped;
    int refuted_member = -1; // index into group.members
    std::vector<Verdict> members;
    uint64_t splits = 0;
    double seconds = 0.0;
};

// Branch-and-prune check of one standard-form formula: searches the negation
// exists x: OR_i AND_j f_ij(x) > 0 by interval evaluation, one
// forward-backward propagation round per clause, and scaled widest-first
// splitting. Deterministic for a fixed config.
Verdict check(const StandardFormula& f, std::span<const double> params,
              const ProverConfig& cfg);

// Sample k counterexample points from a refuted verdict: box centers first,
// then uniform interior points. Every point x satisfies rho(x) > -delta.
std::vector<std::vector<double>> counterexamples(const Verdict& v, int k, Rng& rng);

using ProverStatsSink = std::function<void(const std::string& tag, ProveStatus status,
                                           uint64_t splits, double seconds)>;

struct VerifyAllResult {
    std::vector<GroupVerdict> groups;
    bool all_proved = false;
};

// Checks all groups in fitness order; a group proves iff every member
// proves. Member checks may run on cfg.workers threads; results merge by
// index.
VerifyAllResult verify_all(const ConditionSet& cs, std::span<const double> params,
                           const ProverConfig& cfg,
                           const ProverStatsSink& sink = nullptr);
VerifyAllResult verify_group_list(const std::vector<const FormulaGroup*>& groups,
                                  std::span<const double> params,
                                  const ProverConfig& cfg,
                                  const ProverStatsSink& sink = nullptr);

// A proven tuple with everything needed to reproduce the check.
struct Certificate {
    Expr V;
    std::vector<Expr> kappa;
    double gamma_c = 0, gamma_d = 0, c = 0;
    std::optional<double> beta;
    double delta = 0;
    std::string spec_type; // "rws" | "rsws"
    std::string problem_digest;
    std::vector<std::pair<std::string, ProveStatus>> verdicts;
};

} // namespace lbf
