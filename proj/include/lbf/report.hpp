#pragma once

#include <string>

#include "lbf/problem.hpp"
#include "lbf/sim.hpp"

namespace lbf {

// Certificate text file: metadata header plus V and controller expressions.
void write_certificate(const std::string& path, const Certificate& c);
Certificate read_certificate(const std::string& path, const Problem& problem);

// Deterministic per-run report (no wall-clock content; timing lives in the
// generations CSV and the prover stats log).
void write_run_report(const std::string& path, const Problem& problem,
                      const Outcome& outcome, uint64_t seed,
                      const std::string& csv_name);

std::string expr_text(const Expr& e);

} // namespace lbf
