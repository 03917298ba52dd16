#include "lbf/cma.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace lbf {

CmaState CmaState::init(std::span<const double> x0, double sigma0, int lambda_in) {
    CmaState s;
    const int n = static_cast<int>(x0.size());
    s.mean.assign(x0.begin(), x0.end());
    s.sigma = sigma0;
    s.diag.assign(n, 1.0);
    s.p_sigma.assign(n, 0.0);
    s.p_c.assign(n, 0.0);

    s.lambda = lambda_in > 0 ? lambda_in
                             : 4 + static_cast<int>(std::floor(3.0 * std::log(std::max(n, 1))));
    s.mu = s.lambda / 2;
    s.weights.resize(s.mu);
    double wsum = 0;
    for (int i = 0; i < s.mu; ++i) {
        s.weights[i] = std::log(s.mu + 0.5) - std::log(i + 1.0);
        wsum += s.weights[i];
    }
    double sqsum = 0;
    for (auto& w : s.weights) {
        w /= wsum;
        sqsum += w * w;
    }
    s.mu_eff = 1.0 / sqsum;

    const double nn = std::max(n, 1);
    s.c_sigma = (s.mu_eff + 2.0) / (nn + s.mu_eff + 5.0);
    s.d_sigma = 1.0 + 2.0 * std::max(0.0, std::sqrt((s.mu_eff - 1.0) / (nn + 1.0)) - 1.0) +
                s.c_sigma;
    s.c_c = (4.0 + s.mu_eff / nn) / (nn + 4.0 + 2.0 * s.mu_eff / nn);
    // separable variant: learning rates scaled by (n+2)/3
    const double sep = (nn + 2.0) / 3.0;
    s.c_1 = std::min(1.0, sep * 2.0 / ((nn + 1.3) * (nn + 1.3) + s.mu_eff));
    s.c_mu = std::min(1.0 - s.c_1,
                      sep * 2.0 * (s.mu_eff - 2.0 + 1.0 / s.mu_eff) /
                          ((nn + 2.0) * (nn + 2.0) + s.mu_eff));
    s.chi_n = std::sqrt(nn) * (1.0 - 1.0 / (4.0 * nn) + 1.0 / (21.0 * nn * nn));
    return s;
}

CmaResult cma_minimize(const Objective& f, std::span<const double> x0,
                       double sigma0, int iterations, Rng& rng, int lambda) {
    CmaResult res;
    const int n = static_cast<int>(x0.size());
    res.best_x.assign(x0.begin(), x0.end());
    res.best_f = f(res.best_x);
    res.evaluations = 1;
    if (n == 0 || iterations <= 0) return res;

    CmaState s = CmaState::init(x0, sigma0, lambda);
    std::normal_distribution<double> gauss(0.0, 1.0);

    std::vector<std::vector<double>> z(s.lambda, std::vector<double>(n));
    std::vector<std::vector<double>> x(s.lambda, std::vector<double>(n));
    std::vector<double> fx(s.lambda);
    std::vector<int> order(s.lambda);

    for (int it = 0; it < iterations; ++it) {
        for (int k = 0; k < s.lambda; ++k) {
            for (int j = 0; j < n; ++j) {
                z[k][j] = gauss(rng);
                x[k][j] = s.mean[j] + s.sigma * std::sqrt(s.diag[j]) * z[k][j];
            }
            fx[k] = f(x[k]);
            ++res.evaluations;
            if (fx[k] < res.best_f) {
                res.best_f = fx[k];
                res.best_x = x[k];
            }
        }
        std::iota(order.begin(), order.end(), 0);
        std::stable_sort(order.begin(), order.end(),
                         [&](int a, int b) { return fx[a] < fx[b]; });

        std::vector<double> old_mean = s.mean;
        std::vector<double> zw(n, 0.0);
        for (int j = 0; j < n; ++j) {
            double m = 0;
            for (int i = 0; i < s.mu; ++i) {
                m += s.weights[i] * x[order[i]][j];
                zw[j] += s.weights[i] * z[order[i]][j];
            }
            s.mean[j] = m;
        }

        double ps_norm_sq = 0;
        for (int j = 0; j < n; ++j) {
            s.p_sigma[j] = (1.0 - s.c_sigma) * s.p_sigma[j] +
                           std::sqrt(s.c_sigma * (2.0 - s.c_sigma) * s.mu_eff) * zw[j];
            ps_norm_sq += s.p_sigma[j] * s.p_sigma[j];
        }
        double ps_norm = std::sqrt(ps_norm_sq);

        ++s.iteration;
        double denom = std::sqrt(1.0 - std::pow(1.0 - s.c_sigma, 2.0 * s.iteration));
        bool h_sigma = ps_norm / denom < (1.4 + 2.0 / (n + 1.0)) * s.chi_n;

        for (int j = 0; j < n; ++j) {
            double yw = (s.mean[j] - old_mean[j]) / s.sigma;
            s.p_c[j] = (1.0 - s.c_c) * s.p_c[j] +
                       (h_sigma ? std::sqrt(s.c_c * (2.0 - s.c_c) * s.mu_eff) * yw : 0.0);
        }
        for (int j = 0; j < n; ++j) {
            double rank_mu = 0;
            for (int i = 0; i < s.mu; ++i) {
                double y = std::sqrt(s.diag[j]) * z[order[i]][j];
                rank_mu += s.weights[i] * y * y;
            }
            double correction = h_sigma ? 0.0 : s.c_c * (2.0 - s.c_c) * s.diag[j];
            s.diag[j] = (1.0 - s.c_1 - s.c_mu) * s.diag[j] +
                        s.c_1 * (s.p_c[j] * s.p_c[j] + correction) + s.c_mu * rank_mu;
            s.diag[j] = std::max(s.diag[j], 1e-20);
        }
        s.sigma *= std::exp((s.c_sigma / s.d_sigma) * (ps_norm / s.chi_n - 1.0));
        s.sigma = std::clamp(s.sigma, 1e-12, 1e12);
    }
    return res;
}

} // namespace lbf
