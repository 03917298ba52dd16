#pragma once

#include <functional>
#include <memory>
#include <optional>

#include "lbf/cma.hpp"
#include "lbf/fitness.hpp"
#include "lbf/verify.hpp"

namespace lbf {

struct GPConfig {
    int population = 14;
    int tournament = 3;
    int elites = 2;
    double p_mutation = 0.8;
    double p_crossover = 0.3;
    int max_generations = 200;
    int cma_generations = 30;
    int base_samples = 100;
    int cex_capacity = 300;
    int cex_per_refutation = 10;
    double epsilon = -1.0;        // < 0: 2 * delta
    double wallclock_s = 7200.0;
    uint64_t seed = 0;
    int workers = 1;
    bool enable_prover = true;    // off: F_SMT forced 0, F caps at 1/2
    double cma_sigma0 = 2.5;      // 0.25 x const-range half-width

    void validate() const;
};

struct SynthesisTask {
    OpenLoopSystem sys;
    SpecSets sets;
    Grammar grammar;
    bool rsws = false;
    bool zeno = false;            // request the Zeno exclusion check
    bool persistent_flow = false; // gamma_d = 0 once restricted jumps prove
    double gamma_c = 1e-2, gamma_d = 1e-2, c = 1e-2;
};

struct GenerationRow {
    int generation = 0;
    double best_f = 0, mean_f = 0;
    std::vector<double> best_fsamp;
    double prover_seconds = 0;
};

struct RunSinks {
    std::function<void(const GenerationRow&)> generation;
    ProverStatsSink prover;
};

struct BestEffort {
    Expr V;
    std::vector<Expr> kappa;
    double F = 0;
    std::vector<double> fsamp;
    std::vector<int> fsmt;
};

struct Outcome {
    bool certified = false;
    std::optional<Certificate> certificate;
    BestEffort best;
    int generations = 0; // generations executed when the run ended
    double seconds = 0;
    std::string reason;  // certified | max-generations | smt-timeout | wallclock
};

struct Individual {
    Genotype gt;
    std::shared_ptr<Phenotype> ph;
    std::shared_ptr<ConditionSet> cs;
    std::vector<double> theta; // current parameters (+ beta when RSWS)
    std::vector<double> fsamp;
    std::vector<int> fsmt;
    double F = 0;
    Secondary sec;
    bool valid = false;
    bool full_samples = false;
    bool timed_out = false;
    bool produced_cex = false;
};

// Tournament selection: best primary fitness among k distinct individuals,
// ties broken by the secondary measures.
int select(std::span<const Individual> population, int k, Rng& rng);

// Elites copied verbatim, remainder bred by tournament -> crossover (prob)
// -> mutation (prob).
std::vector<Individual> next_generation(const Grammar& g,
                                        const std::vector<Individual>& population,
                                        const GPConfig& gp, Rng& rng);

// Writes CMA-ES-optimized constants back into the genotype's const draws;
// `objective` is maximized over the constant vector. Identity when the
// genotype has no constants.
Genotype cma_optimize(const Grammar& g, const Genotype& gt, const Objective& objective,
                      int generations, double sigma0, Rng& rng);

Outcome run(const SynthesisTask& task, const GPConfig& gp, const ProverConfig& prover,
            const RunSinks& sinks = {});

} // namespace lbf
