#include "lbf/fitness.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

namespace lbf {

std::vector<Sample> make_base_samples(const FormulaGroup& g, const SampleLayout& lay,
                                      std::span<const Interval> disturbance_box,
                                      int total, Rng& rng) {
    std::vector<Sample> out;
    const int m = static_cast<int>(g.domains.size());
    if (m == 0 || total <= 0) return out;

    std::vector<int> counts(m, total / m);
    for (int i = 0; i < total % m; ++i) ++counts[i];
    for (auto& c : counts) c = std::max(c, 1);

    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (int di = 0; di < m; ++di) {
        const SampleDomain& dom = g.domains[di];
        const int n = counts[di];
        const int d = lay.dim();

        std::vector<Interval> box(dom.state_box);
        for (const auto& b : disturbance_box) box.push_back(b);
        for (int a = 0; a < SampleLayout::n_aux; ++a) box.push_back({-1.0, 1.0});

        std::vector<std::vector<int>> strata(d, std::vector<int>(n));
        for (int k = 0; k < d; ++k) {
            std::iota(strata[k].begin(), strata[k].end(), 0);
            std::shuffle(strata[k].begin(), strata[k].end(), rng);
        }
        for (int j = 0; j < n; ++j) {
            Sample s;
            s.domain_id = di;
            s.v.resize(d);
            for (int k = 0; k < d; ++k) {
                const Interval& r = box[k];
                if (r.is_point()) {
                    s.v[k] = r.lo;
                } else {
                    double cell = r.width() / n;
                    s.v[k] = std::clamp(r.lo + (strata[k][j] + u(rng)) * cell, r.lo, r.hi);
                }
            }
            for (const auto& [dst, src] : dom.copy_dims) s.v[dst] = s.v[src];
            out.push_back(std::move(s));
        }
    }
    return out;
}

namespace {
thread_local std::vector<double> tl_ws;
thread_local std::vector<double> tl_point;

// gather the member's dim values from a layout sample
void project(const StandardFormula& f, const Sample& s, const SampleLayout& lay,
             std::vector<double>& point) {
    point.resize(f.dims.size());
    for (size_t k = 0; k < f.dims.size(); ++k) {
        const DomainDim& d = f.dims[k];
        switch (d.kind) {
        case VarKind::State: point[k] = s.v[d.index]; break;
        case VarKind::Disturbance: point[k] = s.v[lay.n_state + d.index]; break;
        case VarKind::Aux:
            point[k] = s.v[lay.n_state + lay.n_disturbance + d.index];
            break;
        default: point[k] = 0; break;
        }
    }
}

} // namespace

double rho(const StandardFormula& f, std::span<const double> point,
           std::span<const double> params) {
    constexpr double inf = std::numeric_limits<double>::infinity();
    double worst = -inf;
    for (const auto& row : f.tapes) {
        double best = inf;
        for (const auto& t : row) {
            double v = t.eval(point, params, tl_ws);
            if (std::isnan(v)) v = inf;
            best = std::min(best, v);
        }
        worst = std::max(worst, best);
    }
    return worst;
}

double rho_at_sample(const FormulaGroup& g, const Sample& s, const SampleLayout& lay,
                     std::span<const double> params) {
    constexpr double inf = std::numeric_limits<double>::infinity();
    double worst = -inf;
    for (const auto& f : g.members) {
        if (f.domain_id != s.domain_id) continue;
        project(f, s, lay, tl_point);
        worst = std::max(worst, rho(f, tl_point, params));
    }
    return worst;
}

double err_at_sample(const FormulaGroup& g, const Sample& s, const SampleLayout& lay,
                     std::span<const double> params, double epsilon) {
    double r = rho_at_sample(g, s, lay, params);
    if (r == -std::numeric_limits<double>::infinity()) return 0.0;
    return std::max(r + epsilon, 0.0);
}

double f_samp(const FormulaGroup& g, const SamplePool& pool, const SampleLayout& lay,
              std::span<const double> params, double epsilon) {
    double sq = 0.0;
    auto add = [&](const Sample& s) {
        double e = err_at_sample(g, s, lay, params, epsilon);
        sq += e * e;
    };
    for (const auto& s : pool.base) add(s);
    for (const auto& s : pool.cex) add(s);
    if (sq == 0.0) return 1.0;
    return 1.0 / (1.0 + std::sqrt(sq));
}

Sample to_sample(const StandardFormula& f, std::span<const double> point,
                 const SampleLayout& lay,
                 std::span<const Interval> disturbance_box) {
    Sample s;
    s.domain_id = f.domain_id;
    s.v.assign(lay.dim(), 0.0);
    for (int k = 0; k < lay.n_disturbance; ++k)
        s.v[lay.n_state + k] = disturbance_box[k].mid();
    for (size_t k = 0; k < f.dims.size(); ++k) {
        const DomainDim& d = f.dims[k];
        switch (d.kind) {
        case VarKind::State: s.v[d.index] = point[k]; break;
        case VarKind::Disturbance: s.v[lay.n_state + d.index] = point[k]; break;
        case VarKind::Aux:
            s.v[lay.n_state + lay.n_disturbance + d.index] = point[k];
            break;
        default: break;
        }
    }
    return s;
}

std::vector<int> cascade_weights(std::span<const double> fsamp) {
    std::vector<int> w(fsamp.size(), 0);
    if (fsamp.empty()) return w;
    w[0] = 1;
    for (size_t i = 1; i < fsamp.size(); ++i)
        w[i] = static_cast<int>(std::floor(w[i - 1] * fsamp[i - 1]));
    return w;
}

double cascade_value(std::span<const double> fsamp) {
    auto w = cascade_weights(fsamp);
    double v = 0;
    for (size_t i = 0; i < fsamp.size(); ++i) v += w[i] * fsamp[i];
    return v;
}

double overall_fitness(std::span<const double> fsamp, std::span<const int> fsmt) {
    auto w = cascade_weights(fsamp);
    double sum = 0;
    for (size_t i = 0; i < fsamp.size(); ++i)
        sum += w[i] * (fsamp[i] + static_cast<double>(fsmt[i]));
    return sum / (2.0 * static_cast<double>(fsamp.size()));
}

Secondary secondary(const Phenotype& ph) {
    Secondary s;
    s.param_count = static_cast<int>(ph.params.size());
    double sq = 0;
    for (double v : ph.params) sq += v * v;
    s.param_norm = std::sqrt(sq);
    return s;
}

} // namespace lbf
