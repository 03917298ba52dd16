#pragma once

#include <deque>
#include <span>
#include <vector>

#include "lbf/conditions.hpp"
#include "lbf/grammar.hpp"

namespace lbf {

// Samples live in a fixed layout shared by all candidates: the n state
// coordinates, then all disturbance coordinates, then a few auxiliary
// coordinates for set-valued sign branches.
struct SampleLayout {
    int n_state = 0;
    int n_disturbance = 0;
    static constexpr int n_aux = 4;
    int dim() const { return n_state + n_disturbance + n_aux; }
};

// A test point for one sample domain (region x piece) of a condition group.
struct Sample {
    int domain_id = 0;
    std::vector<double> v; // SampleLayout order
};

// Per-condition pool: fixed base samples plus a bounded counterexample FIFO.
struct SamplePool {
    std::vector<Sample> base;
    std::deque<Sample> cex;
    size_t cex_capacity = 300;

    void push_cex(Sample s) {
        while (cex.size() >= cex_capacity) cex.pop_front();
        cex.push_back(std::move(s));
    }
    size_t size() const { return base.size() + cex.size(); }
};

// Latin-hypercube base samples spread evenly over the group's sample
// domains; coupled dims are copied so equality constraints hold exactly.
std::vector<Sample> make_base_samples(const FormulaGroup& g, const SampleLayout& lay,
                                      std::span<const Interval> disturbance_box,
                                      int total, Rng& rng);

// Satisfaction measure of one member formula: max over conjuncts of min
// over disjuncts; negative means the formula holds at the point (member
// dim order). Evaluation domain errors yield +inf.
double rho(const StandardFormula& f, std::span<const double> point,
           std::span<const double> params);

// Group satisfaction at a layout sample: max over the members compiled from
// the sample's domain; -inf when every branch was trivially true there.
double rho_at_sample(const FormulaGroup& g, const Sample& s, const SampleLayout& lay,
                     std::span<const double> params);

// Error metric of the epsilon-strengthened formula: max(rho + eps, 0).
double err_at_sample(const FormulaGroup& g, const Sample& s, const SampleLayout& lay,
                     std::span<const double> params, double epsilon);

// (1 + ||[e(x1) ... e(xp)]||)^-1 over the pool; 1 when the pool is empty.
double f_samp(const FormulaGroup& g, const SamplePool& pool, const SampleLayout& lay,
              std::span<const double> params, double epsilon);

// Converts a prover counterexample point (member dim order) to the shared
// sample layout; unreferenced coordinates take domain midpoints.
Sample to_sample(const StandardFormula& f, std::span<const double> point,
                 const SampleLayout& lay,
                 std::span<const Interval> disturbance_box);

// w_1 = 1, w_i = floor(w_{i-1} * F_samp,{i-1}).
std::vector<int> cascade_weights(std::span<const double> fsamp);

// sum_i w_i F_samp,i (the CMA-ES objective).
double cascade_value(std::span<const double> fsamp);

// F = 1/(2N) sum w_i (F_samp,i + F_SMT,i).
double overall_fitness(std::span<const double> fsamp, std::span<const int> fsmt);

// Tie-break measures: fewer parameters first, then smaller Euclidean norm.
struct Secondary {
    int param_count = 0;
    double param_norm = 0.0;

    bool operator<(const Secondary& o) const {
        if (param_count != o.param_count) return param_count < o.param_count;
        return param_norm < o.param_norm;
    }
};
Secondary secondary(const Phenotype& ph);

} // namespace lbf
