#pragma once

#include <optional>
#include <string>
#include <vector>

#include "lbf/expr.hpp"
#include "lbf/interval.hpp"

namespace lbf {

class ModelError : public ExprError {
  public:
    using ExprError::ExprError;
};
class DimensionMismatch : public ModelError {
  public:
    using ModelError::ModelError;
};
class EmptyInterior : public ModelError {
  public:
    using ModelError::ModelError;
};

// State layout: continuous states first, then discrete states, then timers.
struct StatePartition {
    int n_x = 0, n_q = 0, n_t = 0;
    std::vector<double> eta; // timer periods, length n_t, each > 0

    int n() const { return n_x + n_q + n_t; }
    int q_offset() const { return n_x; }
    int t_offset() const { return n_x + n_q; }
    void validate() const;
};

// One system-jump piece: guard conjunction (exprs <= 0 over s, u) and the
// jump map for the (x, q) components. Timers are held during system jumps.
struct JumpPiece {
    std::string name;
    std::vector<Expr> guards;
    std::vector<Expr> map_xq;
};

struct OpenLoopSystem {
    StatePartition part;
    int n_inputs = 0;
    int n_disturbances = 0;
    std::vector<Expr> flow_x;           // n_x exprs over (s, u, d)
    std::vector<Expr> flow_constraints; // C as exprs <= 0; empty = everywhere
    std::vector<JumpPiece> system_jumps;
    std::vector<Expr> timer_jump_xq;    // G_ol,t (x,q) part; empty iff n_t == 0
    std::vector<Expr> output;           // h(s); l exprs over s
    std::vector<std::optional<std::pair<double, double>>> input_bounds; // per input
    std::vector<Interval> disturbance_box;

    void validate() const;
};

// Per-discrete-dimension safe/goal set: finite value list or a box.
struct DiscreteSet {
    bool finite = true;
    std::vector<double> values;
    Interval box{0, 0};
};

struct SpecSets {
    std::vector<Interval> S_x, I_x, O_x;  // boxes, length n_x
    std::vector<DiscreteSet> S_q, O_q;    // length n_q
    std::optional<std::vector<DiscreteSet>> I_q; // default: S_q (or coupling)
    std::vector<Expr> I_couplings;        // exprs == 0 on I (e.g. s3 - s1)
    // structured couplings "dim a copies dim b" (enables exact sampling)
    std::vector<std::pair<int, int>> I_couple_pairs;
    std::vector<std::optional<double>> I_t; // pinned timer starts; empty = full T

    void validate(const StatePartition& part) const;
};

struct ClosedJump {
    std::string name;
    std::vector<Expr> guards;  // over (s, d)
    std::vector<Expr> map;     // full n-dim image over (s, d)
    int timer_index = -1;      // >= 0 for timer jumps
};

// Closed-loop jump-flow data over (s, d) after substituting
// u_i := sat(bounds_i; kappa_i(h(s))).
struct ClosedLoop {
    OpenLoopSystem sys;
    std::vector<Expr> kappa;            // as supplied (over outputs/states)
    std::vector<Expr> kappa_closed;     // kappa with outputs substituted, sat applied
    std::vector<Expr> flow;             // n-dim: (F_x, 0_q, 1_t)
    std::vector<Expr> flow_constraints;
    std::vector<ClosedJump> system_jumps;
    std::vector<ClosedJump> timer_jumps; // one per timer

    const StatePartition& part() const { return sys.part; }
};

ClosedLoop close_loop(const OpenLoopSystem& sys, const std::vector<Expr>& kappa);

// Sampled-data wrapper: doubles the continuous state (held copy as discrete
// states), adds one timer with period eta; the timer jump copies s_x into
// s_q and resets the timer. The system must be purely continuous.
OpenLoopSystem build_sampled_data(const OpenLoopSystem& sys, double eta);
SpecSets build_sampled_data_sets(const SpecSets& sets, int n_x);

// A region of the state space: a box over all n state dimensions (discrete
// instances appear as pinned width-0 dims) plus guard constraints
// (exprs <= 0).
struct Region {
    std::string tag;
    std::vector<Interval> box;
    std::vector<Expr> constraints;
    // sampling hint: point[first] := point[second] satisfies the equality
    // constraints exactly
    std::vector<std::pair<int, int>> copy_dims;
};
using RegionSet = std::vector<Region>;

struct Regions {
    RegionSet S;           // per discrete instance
    RegionSet boundary_S;  // faces of S_x x S_q x T
    RegionSet I;
    RegionSet O;           // O_q instances
    RegionSet boundary_O;
    RegionSet S_minus_O;   // half-space branches covering S \ O
};

// Region descriptions for the prover; throws EmptyInterior when int(O_x)
// is empty.
Regions membership_formulas(const SpecSets& sets, const StatePartition& part);

} // namespace lbf
