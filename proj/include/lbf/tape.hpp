#pragma once

#include <span>
#include <vector>

#include "lbf/expr.hpp"
#include "lbf/interval.hpp"

namespace lbf {

// Maps (kind, index) variables to flat domain slots for compiled formulas.
struct VarMap {
    std::vector<int> state, input, disturbance, output, aux;

    void map(VarKind kind, int index, int slot);
    int slot(VarKind kind, int index) const; // -1 if unmapped
};

// Expression flattened to a postfix instruction tape; instruction i writes
// workspace slot i. Used for fast repeated point evaluation, interval
// evaluation, and one-sweep forward-backward (HC4) contraction.
class Tape {
  public:
    struct Ins {
        Op op;
        int a = -1, b = -1;  // child slots; for Var/Param: source index
        double value = 0.0;
        int ipow = 0;
        double lo = 0.0, hi = 0.0; // sat bounds
    };

    static Tape compile(const Expr& e, const VarMap& vm);

    size_t size() const { return code_.size(); }

    // NaN on domain error (division by zero, sqrt of negative).
    double eval(std::span<const double> domain, std::span<const double> params,
                std::vector<double>& ws) const;

    // Enclosure of the range over the box; *defined=false flags possible
    // domain violations (the enclosure is then only valid on the defined
    // subdomain).
    Interval ieval(std::span<const Interval> box, std::span<const double> params,
                   std::vector<Interval>& ws, bool* defined = nullptr) const;

    // One forward-backward sweep contracting `box` w.r.t. value(e) in
    // `required`. Returns false when the constraint is infeasible on the
    // box (the box may be partially contracted in that case).
    bool contract(std::span<Interval> box, std::span<const double> params,
                  Interval required, std::vector<Interval>& fwd,
                  std::vector<Interval>& req) const;

  private:
    std::vector<Ins> code_;
};

} // namespace lbf
