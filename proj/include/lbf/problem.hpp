#pragma once

#include <string>

#include "lbf/evolve.hpp"

namespace lbf {

class ProblemError : public ExprError {
  public:
    using ExprError::ExprError;
};

// Parsed and validated problem file.
struct Problem {
    SynthesisTask task;
    GPConfig gp;
    ProverConfig prover;
    bool has_grammar = false;
    std::string digest; // content hash of the file
    std::string path;
};

Problem load_problem(const std::string& path);
Problem parse_problem(const std::string& text, const std::string& path = "<string>");

// 64-bit FNV-1a, hex-encoded; used as the problem digest.
std::string content_digest(const std::string& bytes);

} // namespace lbf
