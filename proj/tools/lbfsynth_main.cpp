#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>

#include <CLI11.hpp>
#include <json.hpp>

#include "lbf/report.hpp"
#include "lbf/svg.hpp"

namespace fs = std::filesystem;
using namespace lbf;

namespace {

constexpr int kExitParse = 2;
constexpr int kExitNoCertificate = 3;
constexpr int kExitRefuted = 4;
constexpr int kExitBadState = 5;

struct CommonOverrides {
    double delta = -1;
    double timeout = -1;
    int workers = -1;
    std::string spec;

    void apply(Problem& p) const {
        if (delta > 0) p.prover.delta = delta;
        if (timeout > 0) p.prover.timeout_s = timeout;
        if (workers > 0) {
            p.prover.workers = workers;
            p.gp.workers = workers;
        }
        if (spec == "rws") p.task.rsws = false;
        if (spec == "rsws") p.task.rsws = true;
    }
};

std::ofstream open_or_die(const fs::path& p) {
    std::ofstream out(p);
    if (!out) {
        std::cerr << "error: cannot write " << p << "\n";
        std::exit(1);
    }
    return out;
}

ProverStatsSink jsonl_sink(std::ofstream& out) {
    return [&out](const std::string& tag, ProveStatus status, uint64_t splits,
                  double seconds) {
        nlohmann::ordered_json j;
        j["formula"] = tag;
        j["status"] = to_string(status);
        j["splits"] = splits;
        j["seconds"] = seconds;
        out << j.dump() << "\n";
    };
}

// gamma_d = 0 is admissible once the restricted-jumps assumption proves
double effective_gamma_d(const Problem& problem, const ClosedLoop& cl,
                         const ProverConfig& prover, bool quiet) {
    if (!problem.task.persistent_flow) return problem.task.gamma_d;
    ConditionSet probe;
    probe.c = problem.task.c;
    FormulaGroup g = assumption_restricted_jumps(cl, problem.task.sets, probe);
    auto r = verify_group_list({&g}, {}, prover);
    bool ok = r.all_proved;
    if (!quiet)
        std::cout << "restricted-jumps assumption: "
                  << (ok ? "proved, using gamma_d = 0" : "not proved, keeping gamma_d")
                  << "\n";
    return ok ? 0.0 : problem.task.gamma_d;
}

int cmd_synthesize(const std::string& path, uint64_t seed, int runs,
                   const std::string& out_dir, const CommonOverrides& ov,
                   int generations_override) {
    Problem problem;
    try {
        problem = load_problem(path);
        ov.apply(problem);
        if (generations_override > 0) problem.gp.max_generations = generations_override;
        if (!problem.has_grammar)
            throw ProblemError("problem file has no [grammar] section");
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitParse;
    }

    fs::create_directories(out_dir);
    std::vector<double> secs(runs, 0.0);
    int certified = 0;

    for (int r = 0; r < runs; ++r) {
        uint64_t run_seed = seed + static_cast<uint64_t>(r);
        fs::path run_dir = fs::path(out_dir) / ("run_" + std::to_string(run_seed));
        fs::create_directories(run_dir);

        std::ofstream csv = open_or_die(run_dir / "generations.csv");
        std::ofstream stats = open_or_die(run_dir / "prover_stats.jsonl");
        const size_t n_groups = problem.task.rsws ? 12 : 6;
        csv << "generation,best_F,mean_F";
        for (size_t i = 0; i < n_groups; ++i) csv << ",fsamp_phi" << (i + 1);
        csv << ",prover_seconds\n";

        RunSinks sinks;
        sinks.generation = [&](const GenerationRow& row) {
            csv << row.generation << "," << row.best_f << "," << row.mean_f;
            for (size_t i = 0; i < n_groups; ++i)
                csv << "," << (i < row.best_fsamp.size() ? row.best_fsamp[i] : 0.0);
            csv << "," << row.prover_seconds << "\n";
        };
        sinks.prover = jsonl_sink(stats);

        GPConfig gp = problem.gp;
        gp.seed = run_seed;

        SynthesisTask task = problem.task;
        if (task.persistent_flow) {
            ClosedLoop cl0 = close_loop(
                task.sys, std::vector<Expr>(task.sys.n_inputs, Expr::constant(0)));
            task.gamma_d = effective_gamma_d(problem, cl0, problem.prover, r != 0);
        }

        Outcome outcome = lbf::run(task, gp, problem.prover, sinks);
        secs[r] = outcome.seconds;

        if (outcome.certificate) {
            outcome.certificate->problem_digest = problem.digest;
            write_certificate((run_dir / "certificate.cert").string(),
                              *outcome.certificate);
            ++certified;
        }
        write_run_report((run_dir / "report.json").string(), problem, outcome, run_seed,
                         "generations.csv");
        std::cout << "run " << run_seed << ": " << outcome.reason << " after "
                  << outcome.generations << " generations ("
                  << std::round(outcome.seconds * 100) / 100 << " s), best F = "
                  << outcome.best.F << "\n";
    }

    auto summarize = [](const std::vector<double>& v) {
        double mn = 1e300, mx = -1e300, mean = 0, sd = 0;
        for (double x : v) {
            mn = std::min(mn, x);
            mx = std::max(mx, x);
            mean += x;
        }
        mean /= v.empty() ? 1 : v.size();
        for (double x : v) sd += (x - mean) * (x - mean);
        sd = v.size() > 1 ? std::sqrt(sd / (v.size() - 1)) : 0;
        return std::array<double, 4>{mn, mx, mean, sd};
    };

    nlohmann::ordered_json agg;
    agg["problem"] = problem.digest;
    agg["runs"] = runs;
    agg["certified"] = certified;
    if (certified > 0) {
        std::vector<double> g_ok, s_ok;
        for (int r = 0; r < runs; ++r) {
            fs::path rep = fs::path(out_dir) / ("run_" + std::to_string(seed + r)) /
                           "report.json";
            std::ifstream in(rep);
            nlohmann::json j = nlohmann::json::parse(in);
            if (j["outcome"]["certified"].get<bool>()) {
                g_ok.push_back(j["outcome"]["generations"].get<double>());
                s_ok.push_back(secs[r]);
            }
        }
        auto gs = summarize(g_ok), ss = summarize(s_ok);
        agg["generations"] = {{"min", gs[0]}, {"max", gs[1]}, {"mean", gs[2]}, {"sd", gs[3]}};
        agg["seconds"] = {{"min", ss[0]}, {"max", ss[1]}, {"mean", ss[2]}, {"sd", ss[3]}};
        std::printf("certified %d/%d | generations min %.0f max %.0f mean %.2f sd %.2f"
                    " | seconds min %.2f max %.2f mean %.2f sd %.2f\n",
                    certified, runs, gs[0], gs[1], gs[2], gs[3], ss[0], ss[1], ss[2],
                    ss[3]);
    } else {
        std::printf("certified 0/%d\n", runs);
    }
    open_or_die(fs::path(out_dir) / "aggregate.json") << agg.dump(2) << "\n";

    return certified > 0 ? 0 : kExitNoCertificate;
}

// grid minimum of V over the goal set (start of the beta line search)
double min_V_on_O(const Problem& problem, const Expr& V) {
    const auto& sets = problem.task.sets;
    const auto& part = problem.task.sys.part;
    Regions regions = membership_formulas(sets, part);
    double vmin = 1e300;
    const int steps = 9;
    for (const auto& region : regions.O) {
        std::vector<double> p(part.n());
        std::function<void(int)> rec = [&](int d) {
            if (d == part.n()) {
                vmin = std::min(vmin, eval(V, p));
                return;
            }
            const Interval& b = region.box[d];
            if (b.is_point()) {
                p[d] = b.lo;
                rec(d + 1);
                return;
            }
            for (int k = 0; k <= steps; ++k) {
                p[d] = b.lo + b.width() * k / steps;
                rec(d + 1);
            }
        };
        rec(0);
    }
    return vmin;
}

int cmd_check(const std::string& path, const std::string& cert_path, bool find_beta,
              const CommonOverrides& ov, const std::string& stats_path) {
    Problem problem;
    Certificate cert;
    try {
        problem = load_problem(path);
        ov.apply(problem);
        cert = read_certificate(cert_path, problem);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitParse;
    }
    if (!cert.problem_digest.empty() && cert.problem_digest != problem.digest)
        std::cout << "note: certificate was issued for a different problem file ("
                  << cert.problem_digest << " vs " << problem.digest << ")\n";

    std::ofstream stats;
    ProverStatsSink sink;
    if (!stats_path.empty()) {
        stats = open_or_die(stats_path);
        sink = jsonl_sink(stats);
    }

    try {
        ClosedLoop cl = close_loop(problem.task.sys, cert.kappa);
        double gamma_d = effective_gamma_d(problem, cl, problem.prover, false);

        ConditionSet cs = compile_rws(cl, problem.task.sets, cert.V, cert.gamma_c,
                                      problem.task.persistent_flow ? gamma_d
                                                                   : cert.gamma_d,
                                      cert.c);
        const bool rsws = problem.task.rsws;
        if (rsws) compile_rsws(cs, cl, problem.task.sets, cert.V);
        problem.prover.validate(cs.c);

        std::vector<double> theta;
        if (rsws) {
            if (!cert.beta && !find_beta) {
                std::cerr << "error: RSWS check needs beta in the certificate or "
                             "--find-beta\n";
                return kExitParse;
            }
            theta.push_back(cert.beta.value_or(0.0));
        }

        bool all_ok = true;
        auto report_group = [&](const GroupVerdict& gv) {
            std::cout << "  " << gv.name << ": " << to_string(gv.status) << " ("
                      << gv.splits << " splits, "
                      << std::round(gv.seconds * 1000) / 1000 << " s)\n";
            if (gv.status != ProveStatus::Proved) all_ok = false;
        };

        if (!rsws || !find_beta) {
            ProverConfig pc = problem.prover;
            pc.early_exit = false;
            VerifyAllResult vr = verify_all(cs, theta, pc, sink);
            for (const auto& gv : vr.groups) report_group(gv);
        } else {
            // phi1..phi6 are beta-independent
            ProverConfig pc = problem.prover;
            pc.early_exit = false;
            std::vector<const FormulaGroup*> rws_groups;
            for (int i = 0; i < 6; ++i) rws_groups.push_back(&cs.groups[i]);
            VerifyAllResult base = verify_group_list(rws_groups, theta, pc, sink);
            for (const auto& gv : base.groups) report_group(gv);
            if (!base.all_proved) {
                std::cout << "RWS part failed; skipping the beta search\n";
                return kExitRefuted;
            }
            double vmin = min_V_on_O(problem, cert.V);
            std::cout << "beta line search over [" << vmin << ", 0]\n";
            std::vector<const FormulaGroup*> beta_groups;
            for (int i = 6; i < 12; ++i) beta_groups.push_back(&cs.groups[i]);
            bool found = false;
            for (int k = 0; k < 100 && !found; ++k) {
                double beta = vmin + (0.0 - vmin) * k / 99.0;
                theta = {beta};
                ProverConfig fast = pc;
                fast.early_exit = true;
                VerifyAllResult vr = verify_group_list(beta_groups, theta, fast, nullptr);
                if (vr.all_proved) {
                    std::cout << "beta = " << beta << " proves phi7..phi12:\n";
                    VerifyAllResult full =
                        verify_group_list(beta_groups, theta, pc, sink);
                    for (const auto& gv : full.groups) report_group(gv);
                    found = true;
                    cert.beta = beta;
                }
            }
            if (!found) {
                std::cout << "no provable beta found on the grid\n";
                all_ok = false;
            }
        }

        if (problem.task.zeno && rsws && all_ok) {
            FormulaGroup zg = zeno_condition(cl, problem.task.sets, cert.V, cs);
            VerifyAllResult vr = verify_group_list({&zg}, theta, problem.prover, sink);
            report_group(vr.groups[0]);
            std::cout << "  (B and D_s "
                      << (vr.all_proved ? "disjoint: solutions non-Zeno"
                                        : "not shown disjoint")
                      << ")\n";
        }

        std::cout << (all_ok ? "certificate verified" : "certificate NOT verified")
                  << "\n";
        return all_ok ? 0 : kExitRefuted;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitParse;
    }
}

int cmd_simulate(const std::string& path, const std::string& cert_path,
                 const std::string& x0_text, double t_max, int j_max, bool plots,
                 const std::string& out_dir, int validate_n, uint64_t seed,
                 const CommonOverrides& ov) {
    try {
        Problem problem = load_problem(path);
        ov.apply(problem);
        Certificate cert = read_certificate(cert_path, problem);
        ClosedLoop cl = close_loop(problem.task.sys, cert.kappa);
        fs::create_directories(out_dir);

        SimOptions opts;
        opts.t_max = t_max;
        opts.j_max = j_max;

        if (validate_n > 0) {
            ValidationReport rep = validate_certificate(
                cl, problem.task.sets, problem.task.rsws, true, validate_n, seed, opts);
            std::cout << "validation: " << rep.successes << "/" << rep.runs
                      << " satisfied the specification, " << rep.violations
                      << " violations, " << rep.inconclusive << " inconclusive\n";
            if (rep.toolkit_bug) {
                std::cout << "VIOLATION ON A CERTIFIED SYSTEM - toolkit bug\n";
                return 1;
            }
            return 0;
        }

        std::vector<double> x0;
        {
            std::string cur;
            for (char c : x0_text + ",") {
                if (c == ',') {
                    if (!cur.empty()) x0.push_back(std::strtod(cur.c_str(), nullptr));
                    cur.clear();
                } else {
                    cur += c;
                }
            }
        }
        if (static_cast<int>(x0.size()) != problem.task.sys.part.n()) {
            std::cerr << "error: --x0 needs " << problem.task.sys.part.n()
                      << " coordinates\n";
            return kExitParse;
        }

        HybridArc arc = simulate(cl, x0, opts);
        if (!arc.well_formed()) {
            std::cerr << "internal: malformed hybrid arc\n";
            return 1;
        }
        if (arc.points.size() <= 1 && arc.end == ArcEnd::EscapedDomain) {
            std::cerr << "error: initial state outside C u D\n";
            return kExitBadState;
        }
        write_arc_csv((fs::path(out_dir) / "arc.csv").string(), arc);
        const char* end = arc.end == ArcEnd::Horizon         ? "horizon"
                          : arc.end == ArcEnd::EscapedDomain ? "escaped-domain"
                          : arc.end == ArcEnd::ZenoSuspected ? "zeno-suspected"
                                                             : "eval-error";
        std::cout << "simulated " << arc.points.size() << " samples, "
                  << arc.jumps.size() << " jumps, end: " << end << "\n";
        if (plots) {
            write_phase_svg((fs::path(out_dir) / "phase.svg").string(),
                            problem.task.sets, problem.task.sys.part, cert.V,
                            cert.beta, {arc});
            std::cout << "wrote " << (fs::path(out_dir) / "phase.svg").string() << "\n";
        }
        return 0;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitParse;
    }
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Controller and Lyapunov-barrier certificate synthesis for "
                 "jump-flow hybrid systems"};
    app.require_subcommand(1);

    CommonOverrides ov;

    auto* syn = app.add_subcommand("synthesize", "co-synthesize a controller and LBF");
    std::string problem_path, out_dir = "out";
    uint64_t seed = 0;
    int runs = 1, generations = -1;
    syn->add_option("problem", problem_path, "problem file")->required();
    syn->add_option("--seed", seed, "base seed (run r uses seed + r)");
    syn->add_option("--runs", runs, "seeded repeats");
    syn->add_option("--out-dir,--out", out_dir, "output directory");
    syn->add_option("--generations", generations, "override max generations");
    syn->add_option("--workers", ov.workers, "worker threads");
    syn->add_option("--timeout", ov.timeout, "prover timeout per query [s]");
    syn->add_option("--delta", ov.delta, "prover delta");
    syn->add_option("--spec", ov.spec, "override spec type (rws|rsws)");

    auto* chk = app.add_subcommand("check", "re-verify a certificate");
    std::string cert_path, stats_path;
    bool find_beta = false;
    chk->add_option("problem", problem_path, "problem file")->required();
    chk->add_option("certificate", cert_path, "certificate file")->required();
    chk->add_flag("--find-beta", find_beta, "line search for a provable beta");
    chk->add_option("--stats", stats_path, "write prover stats JSONL here");
    chk->add_option("--workers", ov.workers, "worker threads");
    chk->add_option("--timeout", ov.timeout, "prover timeout per query [s]");
    chk->add_option("--delta", ov.delta, "prover delta");
    chk->add_option("--spec", ov.spec, "override spec type (rws|rsws)");

    auto* sim = app.add_subcommand("simulate", "simulate the closed loop");
    std::string x0_text;
    double t_max = 10;
    int j_max = 1000, validate_n = 0;
    bool plots = false;
    sim->add_option("problem", problem_path, "problem file")->required();
    sim->add_option("certificate", cert_path, "certificate file")->required();
    sim->add_option("--x0", x0_text, "initial state, comma separated");
    sim->add_option("--tmax", t_max, "time horizon");
    sim->add_option("--jmax", j_max, "jump horizon");
    sim->add_flag("--plots", plots, "emit phase.svg");
    sim->add_option("--out-dir,--out", out_dir, "output directory");
    sim->add_option("--validate", validate_n, "simulate N random x0 in I instead");
    sim->add_option("--seed", seed, "seed for --validate");

    CLI11_PARSE(app, argc, argv);

    if (syn->parsed())
        return cmd_synthesize(problem_path, seed, runs, out_dir, ov, generations);
    if (chk->parsed())
        return cmd_check(problem_path, cert_path, find_beta, ov, stats_path);
    if (sim->parsed())
        return cmd_simulate(problem_path, cert_path, x0_text, t_max, j_max, plots,
                            out_dir, validate_n, seed, ov);
    return 1;
}
