#include "lbf/verify.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <future>

namespace lbf {

const char* to_string(ProveStatus s) {
    switch (s) {
    case ProveStatus::Proved: return "proved";
    case ProveStatus::RefutedDelta: return "refuted-delta";
    case ProveStatus::Timeout: return "timeout";
    case ProveStatus::Skipped: return "skipped";
    }
    return "?";
}

void ProverConfig::validate(double c) const {
    if (!(delta > 0)) throw ModelError("delta must be positive");
    if (!(delta < c)) throw ModelError("delta must stay below the strictness constant c");
    if (!(timeout_s > 0)) throw ModelError("prover timeout must be positive");
}

namespace {

using Clock = std::chrono::steady_clock;

struct Search {
    const StandardFormula& f;
    std::span<const double> params;
    const ProverConfig& cfg;
    Clock::time_point deadline;

    std::vector<double> scale;
    std::vector<Interval> iws;
    std::vector<Interval> fwd, req;
    uint64_t splits = 0;
    bool timed_out = false;

    static constexpr size_t kMaxWitnesses = 8;

    explicit Search(const StandardFormula& f_, std::span<const double> params_,
                    const ProverConfig& cfg_)
        : f(f_), params(params_), cfg(cfg_) {
        deadline = Clock::now() + std::chrono::duration_cast<Clock::duration>(
                                      std::chrono::duration<double>(cfg.timeout_s));
        scale.reserve(f.dims.size());
        for (const auto& d : f.dims) {
            double w = d.range.width();
            scale.push_back(w > 0 ? w : 1.0);
        }
    }

    // one conjunction branch of the negation: all disjuncts of `row` > 0
    void search_row(size_t row, std::vector<std::vector<Interval>>& witnesses) {
        const auto& tapes = f.tapes[row];
        std::vector<std::vector<Interval>> stack;
        stack.push_back(f.box());
        uint64_t iter = 0;

        while (!stack.empty()) {
            if ((++iter & 0x3f) == 0 && Clock::now() > deadline) {
                timed_out = true;
                return;
            }
            if (splits > cfg.max_splits) {
                timed_out = true;
                return;
            }
            std::vector<Interval> box = std::move(stack.back());
            stack.pop_back();

            bool pruned = false;
            bool witness_ok = true;
            for (const auto& t : tapes) {
                bool defined = true;
                Interval v = t.ieval(box, params, iws, &defined);
                if (defined && v.hi <= 0.0) {
                    pruned = true;
                    break;
                }
                if (defined && !(v.lo > -cfg.delta)) witness_ok = false;
            }
            if (pruned) continue;

            double width = 0;
            for (const auto& b : box) width = std::max(width, b.width());

            if (width < cfg.delta && witness_ok) {
                witnesses.push_back(box);
                if (witnesses.size() >= kMaxWitnesses) return;
                continue;
            }

            // one contraction round per clause
            bool infeasible = false;
            for (const auto& t : tapes) {
                if (!t.contract(box, params, Interval(0.0, detail::kInf), fwd, req)) {
                    infeasible = true;
                    break;
                }
            }
            if (infeasible) continue;

            // split widest scaled dim, ties to the lowest index
            int dim = -1;
            double best = 0;
            for (size_t i = 0; i < box.size(); ++i) {
                double w = box[i].width() / scale[i];
                if (w > best) {
                    best = w;
                    dim = static_cast<int>(i);
                }
            }
            if (dim < 0) {
                // nothing splittable left; conservatively a witness
                witnesses.push_back(box);
                if (witnesses.size() >= kMaxWitnesses) return;
                continue;
            }
            double mid = box[dim].mid();
            if (!(mid > box[dim].lo && mid < box[dim].hi)) {
                witnesses.push_back(box);
                if (witnesses.size() >= kMaxWitnesses) return;
                continue;
            }
            ++splits;
            std::vector<Interval> hi = box;
            hi[dim].lo = mid;
            box[dim].hi = mid;
            stack.push_back(std::move(hi));
            stack.push_back(std::move(box));
        }
    }
};

} // namespace

Verdict check(const StandardFormula& f, std::span<const double> params,
              const ProverConfig& cfg) {
    auto t0 = Clock::now();
    Verdict v;
    Search s(f, params, cfg);
    for (size_t row = 0; row < f.rows.size(); ++row) {
        std::vector<std::vector<Interval>> witnesses;
        s.search_row(row, witnesses);
        if (s.timed_out) {
            v.status = ProveStatus::Timeout;
            v.splits = s.splits;
            v.seconds = std::chrono::duration<double>(Clock::now() - t0).count();
            return v;
        }
        if (!witnesses.empty()) {
            v.status = ProveStatus::RefutedDelta;
            v.witnesses = std::move(witnesses);
            v.splits = s.splits;
            v.seconds = std::chrono::duration<double>(Clock::now() - t0).count();
            return v;
        }
    }
    v.status = ProveStatus::Proved;
    v.splits = s.splits;
    v.seconds = std::chrono::duration<double>(Clock::now() - t0).count();
    return v;
}

std::vector<std::vector<double>> counterexamples(const Verdict& v, int k, Rng& rng) {
    std::vector<std::vector<double>> points;
    if (v.status != ProveStatus::RefutedDelta || v.witnesses.empty() || k <= 0)
        return points;
    // centers first
    for (const auto& box : v.witnesses) {
        if (static_cast<int>(points.size()) >= k) return points;
        std::vector<double> p;
        p.reserve(box.size());
        for (const auto& b : box) p.push_back(b.mid());
        points.push_back(std::move(p));
    }
    // then uniform interior points, round-robin over the boxes
    size_t which = 0;
    while (static_cast<int>(points.size()) < k) {
        const auto& box = v.witnesses[which % v.witnesses.size()];
        ++which;
        std::vector<double> p;
        p.reserve(box.size());
        for (const auto& b : box) {
            if (b.is_point()) {
                p.push_back(b.lo);
            } else {
                std::uniform_real_distribution<double> d(b.lo, b.hi);
                p.push_back(d(rng));
            }
        }
        points.push_back(std::move(p));
    }
    return points;
}

namespace {

GroupVerdict check_group(const FormulaGroup& g, std::span<const double> params,
                         const ProverConfig& cfg, const ProverStatsSink& sink) {
    GroupVerdict gv;
    gv.name = g.name;
    gv.members.resize(g.members.size());

    auto run_member = [&](size_t i) {
        gv.members[i] = check(g.members[i], params, cfg);
        return gv.members[i].status;
    };

    if (cfg.workers > 1 && g.members.size() > 1) {
        std::vector<std::future<ProveStatus>> futs;
        futs.reserve(g.members.size());
        for (size_t i = 0; i < g.members.size(); ++i)
            futs.push_back(std::async(std::launch::async, run_member, i));
        for (auto& f : futs) f.get();
    } else {
        for (size_t i = 0; i < g.members.size(); ++i) {
            run_member(i);
            if (gv.members[i].status != ProveStatus::Proved) break;
        }
    }

    gv.status = ProveStatus::Proved;
    for (size_t i = 0; i < gv.members.size(); ++i) {
        const Verdict& m = gv.members[i];
        if (m.status == ProveStatus::Skipped) {
            if (gv.status == ProveStatus::Proved) gv.status = ProveStatus::Skipped;
            continue;
        }
        gv.splits += m.splits;
        gv.seconds += m.seconds;
        if (sink) sink(g.members[i].tag, m.status, m.splits, m.seconds);
        if (m.status == ProveStatus::RefutedDelta &&
            gv.status != ProveStatus::RefutedDelta) {
            gv.status = ProveStatus::RefutedDelta;
            gv.refuted_member = static_cast<int>(i);
        } else if (m.status == ProveStatus::Timeout &&
                   gv.status == ProveStatus::Proved) {
            gv.status = ProveStatus::Timeout;
        }
    }
    // a group whose members were all skipped cannot happen: empty groups are
    // vacuous and proved
    if (g.members.empty()) gv.status = ProveStatus::Proved;
    return gv;
}

} // namespace

VerifyAllResult verify_group_list(const std::vector<const FormulaGroup*>& groups,
                                  std::span<const double> params,
                                  const ProverConfig& cfg,
                                  const ProverStatsSink& sink) {
    VerifyAllResult r;
    r.all_proved = true;
    bool stopped = false;
    for (const FormulaGroup* g : groups) {
        if (stopped) {
            GroupVerdict gv;
            gv.name = g->name;
            gv.status = ProveStatus::Skipped;
            gv.members.resize(g->members.size());
            r.groups.push_back(std::move(gv));
            continue;
        }
        r.groups.push_back(check_group(*g, params, cfg, sink));
        if (r.groups.back().status != ProveStatus::Proved) {
            r.all_proved = false;
            if (cfg.early_exit) stopped = true;
        }
    }
    return r;
}

VerifyAllResult verify_all(const ConditionSet& cs, std::span<const double> params,
                           const ProverConfig& cfg, const ProverStatsSink& sink) {
    std::vector<const FormulaGroup*> gs;
    gs.reserve(cs.groups.size());
    for (const auto& g : cs.groups) gs.push_back(&g);
    return verify_group_list(gs, params, cfg, sink);
}

} // namespace lbf
