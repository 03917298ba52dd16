#pragma once

#include <functional>
#include <span>
#include <vector>

#include "lbf/grammar.hpp"

namespace lbf {

// Separable CMA-ES (diagonal covariance, linear space/time in the dimension).
struct CmaState {
    std::vector<double> mean;
    double sigma = 0.5;
    std::vector<double> diag;     // covariance diagonal
    std::vector<double> p_sigma;  // step-size evolution path
    std::vector<double> p_c;      // covariance evolution path
    int iteration = 0;

    // strategy constants
    int lambda = 0, mu = 0;
    std::vector<double> weights;
    double mu_eff = 0, c_sigma = 0, d_sigma = 0, c_c = 0, c_1 = 0, c_mu = 0,
           chi_n = 0;

    static CmaState init(std::span<const double> x0, double sigma0, int lambda = 0);
};

struct CmaResult {
    std::vector<double> best_x;
    double best_f = 0;
    int evaluations = 0;
};

using Objective = std::function<double(std::span<const double>)>;

// Minimizes f starting from x0; lambda = 0 picks 4 + floor(3 ln n).
CmaResult cma_minimize(const Objective& f, std::span<const double> x0,
                       double sigma0, int iterations, Rng& rng, int lambda = 0);

} // namespace lbf
