#pragma once

#include <optional>
#include <string>
#include <vector>

#include "lbf/hybrid.hpp"

namespace lbf {

struct SimOptions {
    double t_max = 10.0;
    int j_max = 1000;
    double dt = 0.0; // 0: 1e-3 * t_max, halved near events
    std::vector<double> disturbance; // held value; empty = box midpoints
    bool jump_priority = true;
    double event_tol = 1e-9; // bisection tolerance in time
};

enum class ArcEnd { Horizon, EscapedDomain, ZenoSuspected, EvalError };

struct ArcPoint {
    double t = 0;
    int j = 0;
    std::vector<double> x;
};

struct JumpRecord {
    double t = 0;
    int j_before = 0;
    std::string piece;
    bool timer = false;
};

struct HybridArc {
    std::vector<ArcPoint> points; // grouped into flow intervals by j
    std::vector<JumpRecord> jumps;
    ArcEnd end = ArcEnd::Horizon;

    // hybrid-time-domain axioms: t nondecreasing, j increments by one at
    // jumps, both only grow
    bool well_formed() const;
};

// Explicit RK4 flow with guard bisection; jumps taken with priority when the
// state is in both C and D (flow-priority via jump_priority = false). Stops
// at the horizon, on escape from C u D, or when >= 100 jumps happen within
// a 1e-6 time span.
HybridArc simulate(const ClosedLoop& cl, std::span<const double> x0,
                   const SimOptions& opts = {});

struct ValidationReport {
    int runs = 0;
    int successes = 0;
    int violations = 0;     // spec violated (not merely inconclusive)
    int inconclusive = 0;   // horizon hit before reaching the goal
    bool toolkit_bug = false; // violation observed on a certified system
};

// Simulates n_runs random initial points in I and checks the reach-while-
// stay (or reach-and-stay) specification sample-wise. `certified` marks the
// closed loop as carrying a certificate: any violation is then flagged.
ValidationReport validate_certificate(const ClosedLoop& cl, const SpecSets& sets,
                                      bool rsws, bool certified, int n_runs,
                                      uint64_t seed, const SimOptions& opts = {});

} // namespace lbf
