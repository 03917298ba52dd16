#include "lbf/evolve.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <functional>
#include <future>
#include <numeric>

namespace lbf {

void GPConfig::validate() const {
    if (population < elites + 2)
        throw ModelError("population must be at least elites + 2");
    if (p_mutation < 0 || p_mutation > 1 || p_crossover < 0 || p_crossover > 1)
        throw ModelError("operator probabilities must lie in [0,1]");
    if (tournament < 1) throw ModelError("tournament size must be positive");
}

namespace {

uint64_t splitmix(uint64_t x) {
    x += 0x9e3779b97f4a7c15ull;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
    return x ^ (x >> 31);
}

Rng stream(uint64_t seed, uint64_t gen, uint64_t idx, uint64_t salt) {
    return Rng(splitmix(splitmix(splitmix(seed ^ salt) ^ gen) ^ idx));
}

// derivation-order pointers to the genotype's drawn constants, matching the
// phenotype's parameter slot order
void collect_const_slots(const Grammar& g, Genotype& gt, std::vector<double*>& out) {
    std::function<void(const Production&, std::vector<DerivationNode>&, size_t&,
                       std::vector<double>&, size_t&)>
        walk_tmpl = [&](const Production& p, std::vector<DerivationNode>& children,
                        size_t& child, std::vector<double>& consts, size_t& cnst) {
            std::function<void(const ExprNode&)> walk = [&](const ExprNode& n) {
                if (n.op == Op::NtRef) {
                    DerivationNode& c = children.at(child++);
                    const Production& cp = g.rules[c.nt].alts[c.alt];
                    size_t cc = 0, ck = 0;
                    walk_tmpl(cp, c.children, cc, c.consts, ck);
                    return;
                }
                if (n.op == Op::ConstDraw) {
                    out.push_back(&consts.at(cnst++));
                    return;
                }
                if (n.a) walk(*n.a);
                if (n.b) walk(*n.b);
            };
            walk(p.body.node());
        };

    size_t child = 0, cnst = 0;
    for (const auto& p : g.start) {
        std::function<void(const ExprNode&)> walk = [&](const ExprNode& n) {
            if (n.op == Op::NtRef) {
                DerivationNode& c = gt.start_children.at(child++);
                const Production& cp = g.rules[c.nt].alts[c.alt];
                size_t cc = 0, ck = 0;
                walk_tmpl(cp, c.children, cc, c.consts, ck);
                return;
            }
            if (n.op == Op::ConstDraw) {
                out.push_back(&gt.start_consts.at(cnst++));
                return;
            }
            if (n.a) walk(*n.a);
            if (n.b) walk(*n.b);
        };
        walk(p.body.node());
    }
}

} // namespace

int select(std::span<const Individual> population, int k, Rng& rng) {
    const int p = static_cast<int>(population.size());
    k = std::clamp(k, 1, p);
    std::vector<int> idx(p);
    std::iota(idx.begin(), idx.end(), 0);
    // partial Fisher-Yates for k distinct contestants
    for (int i = 0; i < k; ++i) {
        std::uniform_int_distribution<int> d(i, p - 1);
        std::swap(idx[i], idx[d(rng)]);
    }
    int best = idx[0];
    for (int i = 1; i < k; ++i) {
        const Individual& a = population[idx[i]];
        const Individual& b = population[best];
        if (a.F > b.F || (a.F == b.F && a.sec < b.sec)) best = idx[i];
    }
    return best;
}

std::vector<Individual> next_generation(const Grammar& g,
                                        const std::vector<Individual>& population,
                                        const GPConfig& gp, Rng& rng) {
    std::vector<int> order(population.size());
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](int a, int b) {
        if (population[a].F != population[b].F) return population[a].F > population[b].F;
        return population[a].sec < population[b].sec;
    });

    std::vector<Individual> next;
    for (int e = 0; e < gp.elites && e < static_cast<int>(order.size()); ++e)
        next.push_back(population[order[e]]); // caches kept

    std::uniform_real_distribution<double> u(0.0, 1.0);
    while (static_cast<int>(next.size()) < gp.population) {
        int ia = select(population, gp.tournament, rng);
        int ib = select(population, gp.tournament, rng);
        Genotype a = population[ia].gt;
        Genotype b = population[ib].gt;
        if (u(rng) < gp.p_crossover) std::tie(a, b) = crossover(g, a, b, rng);
        if (u(rng) < gp.p_mutation) a = mutate(g, a, rng);
        if (u(rng) < gp.p_mutation) b = mutate(g, b, rng);
        Individual ca;
        ca.gt = std::move(a);
        next.push_back(std::move(ca));
        if (static_cast<int>(next.size()) < gp.population) {
            Individual cb;
            cb.gt = std::move(b);
            next.push_back(std::move(cb));
        }
    }
    return next;
}

Genotype cma_optimize(const Grammar& g, const Genotype& gt, const Objective& objective,
                      int generations, double sigma0, Rng& rng) {
    Genotype out = gt;
    std::vector<double*> slots;
    collect_const_slots(g, out, slots);
    if (slots.empty()) return out;

    std::vector<double> x0(slots.size());
    for (size_t i = 0; i < slots.size(); ++i) x0[i] = *slots[i];

    auto neg = [&](std::span<const double> x) { return -objective(x); };
    CmaResult res = cma_minimize(neg, x0, sigma0, generations, rng);
    for (size_t i = 0; i < slots.size(); ++i) *slots[i] = res.best_x[i];
    return out;
}

// ---------------------------------------------------------------------------
// run loop

namespace {

using Clock = std::chrono::steady_clock;

struct Evaluator {
    const SynthesisTask& task;
    const GPConfig& gp;
    const ProverConfig& prover;
    double epsilon;
    SampleLayout layout;
    std::vector<SamplePool>* pools = nullptr;

    size_t n_groups() const { return task.rsws ? 12 : 6; }

    void compile(Individual& ind) const {
        ind.valid = false;
        try {
            ind.ph = std::make_shared<Phenotype>(to_phenotype(task.grammar, ind.gt));
            ClosedLoop cl = close_loop(task.sys, ind.ph->kappa);
            auto cs = std::make_shared<ConditionSet>(compile_rws(
                cl, task.sets, ind.ph->V, task.gamma_c, task.gamma_d, task.c,
                static_cast<int>(ind.ph->params.size())));
            if (task.rsws) compile_rsws(*cs, cl, task.sets, ind.ph->V);
            ind.cs = std::move(cs);
            ind.theta = ind.ph->params;
            if (task.rsws) ind.theta.push_back(0.0); // beta joins the search
            ind.valid = true;
        } catch (const ExprError&) {
            ind.ph.reset();
            ind.cs.reset();
            ind.theta.clear();
        }
    }

    std::vector<double> fsamp_of(const Individual& ind,
                                 std::span<const double> theta) const {
        std::vector<double> fs(n_groups(), 0.0);
        for (size_t i = 0; i < n_groups(); ++i)
            fs[i] = f_samp(ind.cs->groups[i], (*pools)[i], layout, theta, epsilon);
        return fs;
    }

    // returns counterexamples produced by the prover as (group, sample)
    std::vector<std::pair<int, Sample>> evaluate(Individual& ind, Rng& rng) const {
        std::vector<std::pair<int, Sample>> cex;
        if (!ind.cs) compile(ind);
        if (!ind.valid) {
            ind.fsamp.assign(n_groups(), 0.0);
            ind.fsmt.assign(n_groups(), 0);
            ind.F = 0;
            ind.sec = Secondary{1 << 20, 1e300};
            return cex;
        }

        // constant optimization against the weighted sample fitness
        if (!ind.theta.empty() && gp.cma_generations > 0) {
            Objective obj = [&](std::span<const double> theta) {
                return cascade_value(fsamp_of(ind, theta));
            };
            std::vector<double> x0 = ind.theta;
            auto neg = [&](std::span<const double> x) { return -obj(x); };
            CmaResult res = cma_minimize(neg, x0, gp.cma_sigma0, gp.cma_generations, rng);
            ind.theta = res.best_x;
            // keep the genotype reproducible: write optimized constants back
            std::vector<double*> slots;
            collect_const_slots(task.grammar, ind.gt, slots);
            for (size_t i = 0; i < slots.size(); ++i) *slots[i] = ind.theta[i];
            ind.ph->params.assign(ind.theta.begin(),
                                  ind.theta.begin() + static_cast<long>(slots.size()));
        }

        ind.fsamp = fsamp_of(ind, ind.theta);
        ind.fsmt.assign(n_groups(), 0);
        ind.full_samples =
            std::all_of(ind.fsamp.begin(), ind.fsamp.end(), [](double v) { return v == 1.0; });
        ind.timed_out = false;
        ind.produced_cex = false;

        if (ind.full_samples && gp.enable_prover) {
            VerifyAllResult vr = verify_all(*ind.cs, ind.theta, prover);
            for (size_t i = 0; i < vr.groups.size() && i < n_groups(); ++i) {
                const GroupVerdict& gv = vr.groups[i];
                ind.fsmt[i] = gv.status == ProveStatus::Proved ? 1 : 0;
                if (gv.status == ProveStatus::Timeout) ind.timed_out = true;
                if (gv.status == ProveStatus::RefutedDelta && gv.refuted_member >= 0) {
                    const StandardFormula& member =
                        ind.cs->groups[i].members[gv.refuted_member];
                    auto pts = counterexamples(gv.members[gv.refuted_member],
                                               gp.cex_per_refutation, rng);
                    for (const auto& p : pts)
                        cex.emplace_back(static_cast<int>(i),
                                         to_sample(member, p, layout,
                                                   task.sys.disturbance_box));
                    if (!pts.empty()) ind.produced_cex = true;
                }
            }
        }
        ind.F = overall_fitness(ind.fsamp, ind.fsmt);
        ind.sec = secondary(*ind.ph);
        return cex;
    }
};

Certificate make_certificate(const SynthesisTask& task, const Individual& ind,
                             const ProverConfig& prover,
                             const std::vector<GroupVerdict>& verdicts) {
    Certificate c;
    const size_t np = ind.ph->params.size();
    std::vector<double> params(ind.theta.begin(), ind.theta.begin() + np);
    c.V = bind_params(ind.ph->V, params);
    for (const auto& k : ind.ph->kappa) c.kappa.push_back(bind_params(k, params));
    c.gamma_c = task.gamma_c;
    c.gamma_d = task.gamma_d;
    c.c = task.c;
    c.delta = prover.delta;
    c.spec_type = task.rsws ? "rsws" : "rws";
    if (task.rsws) c.beta = ind.theta.back();
    for (const auto& gv : verdicts) c.verdicts.emplace_back(gv.name, gv.status);
    return c;
}

} // namespace

Outcome run(const SynthesisTask& task, const GPConfig& gp, const ProverConfig& prover,
            const RunSinks& sinks) {
    gp.validate();
    prover.validate(task.c);
    task.sys.validate();

    auto t0 = Clock::now();
    Outcome out;
    out.reason = "max-generations";

    Evaluator ev{task, gp, prover,
                 gp.epsilon < 0 ? 2.0 * prover.delta : gp.epsilon,
                 SampleLayout{task.sys.part.n(), task.sys.n_disturbances},
                 nullptr};

    Rng rng_init = stream(gp.seed, 0, 0, 0xA11CE);
    std::vector<Individual> pop(gp.population);
    for (auto& ind : pop) ind.gt = grow(task.grammar, rng_init);

    std::vector<SamplePool> pools;
    bool pools_ready = false;

    double best_ever = -1.0;
    Individual best_ind;

    for (int gen = 0; gen < gp.max_generations; ++gen) {
        out.generations = gen + 1;
        double elapsed = std::chrono::duration<double>(Clock::now() - t0).count();
        if (elapsed > gp.wallclock_s) {
            out.reason = "wallclock";
            out.generations = gen;
            break;
        }

        // sample pools are built from the first compilable individual; the
        // domain list is candidate-independent
        if (!pools_ready) {
            for (auto& ind : pop) {
                if (!ind.cs) ev.compile(ind);
                if (ind.valid) {
                    Rng prng = stream(gp.seed, 0, 0, 0xBA5E);
                    pools.resize(ev.n_groups());
                    for (size_t i = 0; i < ev.n_groups(); ++i) {
                        pools[i].cex_capacity = static_cast<size_t>(gp.cex_capacity);
                        pools[i].base =
                            make_base_samples(ind.cs->groups[i], ev.layout,
                                              task.sys.disturbance_box,
                                              gp.base_samples, prng);
                    }
                    pools_ready = true;
                    break;
                }
            }
        }
        ev.pools = &pools;

        const auto t_gen = Clock::now();
        std::vector<std::vector<std::pair<int, Sample>>> cex_by_ind(pop.size());
        auto eval_one = [&](size_t i) {
            Rng r = stream(gp.seed, static_cast<uint64_t>(gen) + 1, i, 0xE7A1);
            cex_by_ind[i] = ev.evaluate(pop[i], r);
        };
        if (gp.workers > 1) {
            std::vector<std::future<void>> futs;
            for (size_t i = 0; i < pop.size(); ++i)
                futs.push_back(std::async(std::launch::async, eval_one, i));
            for (auto& f : futs) f.get();
        } else {
            for (size_t i = 0; i < pop.size(); ++i) eval_one(i);
        }
        double gen_seconds = std::chrono::duration<double>(Clock::now() - t_gen).count();

        // generation barrier: merge counterexamples in individual order
        for (auto& list : cex_by_ind)
            for (auto& [g, s] : list) pools[g].push_cex(std::move(s));

        // adherence audit after variation + evaluation
        for (const auto& ind : pop)
            if (!adheres(task.grammar, ind.gt))
                throw GrammarError("population lost grammar adherence");

        int best_idx = 0;
        double mean = 0;
        for (size_t i = 0; i < pop.size(); ++i) {
            mean += pop[i].F;
            const Individual& a = pop[i];
            const Individual& b = pop[best_idx];
            if (a.F > b.F || (a.F == b.F && a.sec < b.sec)) best_idx = static_cast<int>(i);
        }
        mean /= static_cast<double>(pop.size());

        if (pop[best_idx].F > best_ever) {
            best_ever = pop[best_idx].F;
            best_ind = pop[best_idx];
        }

        if (sinks.generation) {
            GenerationRow row;
            row.generation = gen;
            row.best_f = pop[best_idx].F;
            row.mean_f = mean;
            row.best_fsamp = pop[best_idx].fsamp;
            row.prover_seconds = gen_seconds;
            sinks.generation(row);
        }

        if (pop[best_idx].F == 1.0) {
            Individual& win = pop[best_idx];
            VerifyAllResult vr = verify_all(*win.cs, win.theta, prover, sinks.prover);
            if (vr.all_proved) {
                out.certified = true;
                out.reason = "certified";
                out.certificate = make_certificate(task, win, prover, vr.groups);
                out.best = BestEffort{out.certificate->V, out.certificate->kappa, 1.0,
                                      win.fsamp, win.fsmt};
                out.seconds = std::chrono::duration<double>(Clock::now() - t0).count();
                return out;
            }
            // re-verification disagreed (e.g. timing); fall through
            win.F = overall_fitness(win.fsamp, win.fsmt);
        }

        // the run cannot progress when every prover-eligible individual only
        // times out: no verdicts, no counterexamples
        int eligible = 0, hopeless = 0;
        for (const auto& ind : pop) {
            if (ind.full_samples && gp.enable_prover) {
                ++eligible;
                if (ind.timed_out && !ind.produced_cex) ++hopeless;
            }
        }
        if (eligible > 0 && hopeless == eligible) {
            out.reason = "smt-timeout";
            break;
        }

        if (gen + 1 < gp.max_generations) {
            Rng r = stream(gp.seed, static_cast<uint64_t>(gen) + 1, 0, 0xB4EED);
            pop = next_generation(task.grammar, pop, gp, r);
        }
    }

    if (best_ind.ph) {
        const size_t np = best_ind.ph->params.size();
        std::vector<double> params(best_ind.theta.begin(),
                                   best_ind.theta.begin() + np);
        out.best.V = bind_params(best_ind.ph->V, params);
        for (const auto& k : best_ind.ph->kappa)
            out.best.kappa.push_back(bind_params(k, params));
        out.best.F = best_ind.F;
        out.best.fsamp = best_ind.fsamp;
        out.best.fsmt = best_ind.fsmt;
    }
    out.seconds = std::chrono::duration<double>(Clock::now() - t0).count();
    return out;
}

} // namespace lbf
