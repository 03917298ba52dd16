#include "lbf/report.hpp"

#include <fstream>
#include <sstream>

#include <json.hpp>

namespace lbf {

std::string expr_text(const Expr& e) { return to_string(e); }

void write_certificate(const std::string& path, const Certificate& c) {
    std::ofstream out(path);
    if (!out) throw ProblemError("cannot write certificate: " + path);
    out << "# lbf-certificate v1\n";
    out << "problem = " << c.problem_digest << "\n";
    out << "spec = " << c.spec_type << "\n";
    out << "gamma_c = " << c.gamma_c << "\n";
    out << "gamma_d = " << c.gamma_d << "\n";
    out << "c = " << c.c << "\n";
    out << "delta = " << c.delta << "\n";
    if (c.beta) {
        char buf[40];
        std::snprintf(buf, sizeof buf, "%.17g", *c.beta);
        out << "beta = " << buf << "\n";
    }
    if (!c.verdicts.empty()) {
        out << "verdicts = ";
        for (size_t i = 0; i < c.verdicts.size(); ++i) {
            if (i) out << ",";
            out << c.verdicts[i].first << "=" << to_string(c.verdicts[i].second);
        }
        out << "\n";
    }
    out << "V = " << to_string(c.V) << "\n";
    for (size_t i = 0; i < c.kappa.size(); ++i)
        out << "k" << (i + 1) << " = " << to_string(c.kappa[i]) << "\n";
}

Certificate read_certificate(const std::string& path, const Problem& problem) {
    std::ifstream in(path);
    if (!in) throw ProblemError("cannot open certificate: " + path);

    Certificate c;
    c.gamma_c = problem.task.gamma_c;
    c.gamma_d = problem.task.gamma_d;
    c.c = problem.task.c;
    c.delta = problem.prover.delta;
    c.spec_type = problem.task.rsws ? "rsws" : "rws";

    ParseOptions eo;
    eo.n_state = problem.task.sys.part.n();

    std::string line;
    int number = 0;
    std::vector<std::pair<int, Expr>> kappas;
    while (std::getline(in, line)) {
        ++number;
        auto hash = line.find('#');
        if (hash != std::string::npos) line = line.substr(0, hash);
        auto eq = line.find('=');
        if (eq == std::string::npos) continue;
        auto trim = [](std::string s) {
            size_t b = s.find_first_not_of(" \t\r\n");
            if (b == std::string::npos) return std::string();
            size_t e = s.find_last_not_of(" \t\r\n");
            return s.substr(b, e - b + 1);
        };
        std::string key = trim(line.substr(0, eq));
        std::string value = trim(line.substr(eq + 1));
        try {
            if (key == "problem") c.problem_digest = value;
            else if (key == "spec") c.spec_type = value;
            else if (key == "gamma_c") c.gamma_c = std::stod(value);
            else if (key == "gamma_d") c.gamma_d = std::stod(value);
            else if (key == "c") c.c = std::stod(value);
            else if (key == "delta") c.delta = std::stod(value);
            else if (key == "beta") c.beta = std::stod(value);
            else if (key == "verdicts") { /* informational */ }
            else if (key == "V") c.V = parse_expr(value, eo);
            else if (key[0] == 'k') {
                int idx = std::atoi(key.c_str() + 1);
                kappas.emplace_back(idx, parse_expr(value, eo));
            } else {
                throw ProblemError("unknown certificate key '" + key + "'");
            }
        } catch (const std::exception& e) {
            throw ProblemError(path + " line " + std::to_string(number) + ": " + e.what());
        }
    }
    std::sort(kappas.begin(), kappas.end(),
              [](const auto& a, const auto& b) { return a.first < b.first; });
    for (auto& [i, k] : kappas) c.kappa.push_back(std::move(k));
    return c;
}

void write_run_report(const std::string& path, const Problem& problem,
                      const Outcome& outcome, uint64_t seed,
                      const std::string& csv_name) {
    nlohmann::ordered_json j;
    j["problem"] = {{"path", problem.path}, {"digest", problem.digest}};
    j["seed"] = seed;
    j["spec"] = {{"type", problem.task.rsws ? "rsws" : "rws"},
                 {"zeno", problem.task.zeno},
                 {"persistent_flow", problem.task.persistent_flow},
                 {"gamma_c", problem.task.gamma_c},
                 {"gamma_d", problem.task.gamma_d},
                 {"c", problem.task.c}};
    j["gp"] = {{"population", problem.gp.population},
               {"tournament", problem.gp.tournament},
               {"elites", problem.gp.elites},
               {"mutation", problem.gp.p_mutation},
               {"crossover", problem.gp.p_crossover},
               {"max_generations", problem.gp.max_generations},
               {"cma_generations", problem.gp.cma_generations},
               {"samples", problem.gp.base_samples},
               {"cex_capacity", problem.gp.cex_capacity}};
    j["prover"] = {{"delta", problem.prover.delta},
                   {"timeout", problem.prover.timeout_s}};
    j["outcome"] = {{"certified", outcome.certified},
                    {"reason", outcome.reason},
                    {"generations", outcome.generations}};
    if (outcome.certificate) {
        const Certificate& c = *outcome.certificate;
        nlohmann::ordered_json jc;
        jc["V"] = to_string(c.V);
        nlohmann::ordered_json ks = nlohmann::ordered_json::array();
        for (const auto& k : c.kappa) ks.push_back(to_string(k));
        jc["kappa"] = ks;
        jc["gamma_c"] = c.gamma_c;
        jc["gamma_d"] = c.gamma_d;
        jc["c"] = c.c;
        if (c.beta) jc["beta"] = *c.beta;
        nlohmann::ordered_json vs = nlohmann::ordered_json::object();
        for (const auto& [name, status] : c.verdicts) vs[name] = to_string(status);
        jc["verdicts"] = vs;
        j["certificate"] = jc;
    } else {
        j["certificate"] = nullptr;
        nlohmann::ordered_json jb;
        jb["V"] = to_string(outcome.best.V);
        nlohmann::ordered_json ks = nlohmann::ordered_json::array();
        for (const auto& k : outcome.best.kappa) ks.push_back(to_string(k));
        jb["kappa"] = ks;
        jb["F"] = outcome.best.F;
        jb["fsamp"] = outcome.best.fsamp;
        jb["fsmt"] = outcome.best.fsmt;
        j["best_effort"] = jb;
    }
    j["generations_csv"] = csv_name;

    std::ofstream out(path);
    if (!out) throw ProblemError("cannot write report: " + path);
    out << j.dump(2) << "\n";
}

} // namespace lbf
