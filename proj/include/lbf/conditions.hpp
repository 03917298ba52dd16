#pragma once

#include <optional>
#include <string>
#include <vector>

#include "lbf/expr.hpp"
#include "lbf/hybrid.hpp"
#include "lbf/tape.hpp"

namespace lbf {

class NonsmoothV : public ExprError {
  public:
    using ExprError::ExprError;
};

struct DomainDim {
    std::string name;
    Interval range;
    VarKind kind = VarKind::State;
    int index = 0;
};

// forall x in X: AND_i OR_j f_ij(x) <= 0 over a box domain. Region guards
// and sublevel-set guards appear as extra disjuncts in every row. Domain
// dims: the n state dims first, then any referenced disturbance dims, then
// auxiliary dims (set-valued sign branches).
struct StandardFormula {
    std::string tag;
    int group = 0;     // 1..12; 0 for auxiliary checks
    int domain_id = 0; // index into the group's sample domains
    std::vector<DomainDim> dims;
    std::vector<std::vector<Expr>> rows;

    std::vector<std::vector<Tape>> tapes; // filled by prepare()
    void prepare();

    std::vector<Interval> box() const;
};

// One (region x jump-piece) source of formulas. Sample domains are
// candidate-independent, so test pools built over them stay valid across
// the whole evolutionary run.
struct SampleDomain {
    std::string tag;
    std::vector<Interval> state_box; // n state dims
    std::vector<std::pair<int, int>> copy_dims;
};

struct FormulaGroup {
    std::string name;            // "phi1" .. "phi12", "zeno", "nojumpchain"
    std::vector<StandardFormula> members; // empty = vacuously true
    std::vector<SampleDomain> domains;
    bool vacuous() const { return members.empty(); }
};

struct ConditionSet {
    std::vector<FormulaGroup> groups; // fitness order phi1..phi6 (.. phi12)
    double gamma_c = 1e-2;
    double gamma_d = 1e-2;
    double c = 1e-2;
    int n_params = 0;   // genotype parameter slots used by the formulas
    int beta_slot = -1; // extra param slot carrying beta (RSWS); -1 = none
    bool persistent_flow = false;
    bool zeno_requested = false;

    int total_params() const { return beta_slot >= 0 ? n_params + 1 : n_params; }
};

// Compiles the reach-while-stay condition groups phi1..phi6 for candidate V
// (smooth, parameter slots allowed). gamma_d may be 0 under the
// persistent-flow relaxation. n_params_hint reserves slots beyond those the
// formulas reference (the beta slot is appended after all of them).
ConditionSet compile_rws(const ClosedLoop& cl, const SpecSets& sets, const Expr& V,
                         double gamma_c, double gamma_d, double c,
                         int n_params_hint = 0);

// Extends a compiled RWS set with phi7..phi12. beta is carried as an extra
// parameter slot (index beta_slot) so line searches need no recompilation.
void compile_rsws(ConditionSet& base, const ClosedLoop& cl, const SpecSets& sets,
                  const Expr& V);

// B and D_s are disjoint: forall x in O and D_s: V(x) > beta.
FormulaGroup zeno_condition(const ClosedLoop& cl, const SpecSets& sets, const Expr& V,
                            const ConditionSet& cs);

// forall s in S and D: G(s) not in D. When proved, gamma_d may be set to 0.
FormulaGroup assumption_restricted_jumps(const ClosedLoop& cl, const SpecSets& sets,
                                         const ConditionSet& cs);

// Debug dump: one clause per line.
std::string dump(const FormulaGroup& g);

} // namespace lbf
