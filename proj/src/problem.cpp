#include "lbf/problem.hpp"

#include <algorithm>
#include <cctype>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <map>
#include <sstream>

namespace lbf {

std::string content_digest(const std::string& bytes) {
    uint64_t h = 1469598103934665603ull;
    for (unsigned char c : bytes) {
        h ^= c;
        h *= 1099511628211ull;
    }
    char buf[20];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

namespace {

std::string trim(const std::string& s) {
    size_t b = s.find_first_not_of(" \t\r\n");
    if (b == std::string::npos) return "";
    size_t e = s.find_last_not_of(" \t\r\n");
    return s.substr(b, e - b + 1);
}

std::vector<std::string> split_top(const std::string& s, char sep) {
    std::vector<std::string> parts;
    int depth = 0;
    std::string cur;
    for (char c : s) {
        if (c == '(' || c == '[' || c == '{') ++depth;
        if (c == ')' || c == ']' || c == '}') --depth;
        if (c == sep && depth == 0) {
            parts.push_back(trim(cur));
            cur.clear();
        } else {
            cur += c;
        }
    }
    parts.push_back(trim(cur));
    return parts;
}

struct Line {
    int number;
    std::string key, value;
};

struct Section {
    std::string name;
    int line = 0;
    std::vector<Line> entries;   // key = value lines
    std::vector<Line> raw_lines; // grammar rules keep their raw form
};

[[noreturn]] void fail(int line, const std::string& msg) {
    throw ProblemError("line " + std::to_string(line) + ": " + msg);
}

double to_number(const Line& l) {
    char* end = nullptr;
    double v = std::strtod(l.value.c_str(), &end);
    if (end == l.value.c_str() || trim(end) != "") fail(l.number, "expected a number");
    return v;
}

int to_int(const Line& l) {
    double v = to_number(l);
    if (v != std::floor(v)) fail(l.number, "expected an integer");
    return static_cast<int>(v);
}

bool to_bool(const Line& l) {
    if (l.value == "true" || l.value == "1") return true;
    if (l.value == "false" || l.value == "0") return false;
    fail(l.number, "expected true or false");
}

// "[-1, 1] x [-2, 2]" or "[-1,1]^2"
std::vector<Interval> parse_box(const Line& l) {
    std::vector<Interval> dims;
    for (const auto& part : split_top(l.value, 'x')) {
        std::string p = trim(part);
        int rep = 1;
        size_t caret = p.rfind('^');
        if (caret != std::string::npos && p.find(']') < caret) {
            rep = std::atoi(p.c_str() + caret + 1);
            if (rep < 1) fail(l.number, "bad replication count");
            p = trim(p.substr(0, caret));
        }
        if (p.size() < 2 || p.front() != '[' || p.back() != ']')
            fail(l.number, "expected [lo, hi]");
        auto nums = split_top(p.substr(1, p.size() - 2), ',');
        if (nums.size() != 2) fail(l.number, "expected [lo, hi]");
        double lo = std::strtod(nums[0].c_str(), nullptr);
        double hi = std::strtod(nums[1].c_str(), nullptr);
        if (!(lo <= hi)) fail(l.number, "interval bounds out of order");
        for (int r = 0; r < rep; ++r) dims.push_back({lo, hi});
    }
    return dims;
}

// per q dim: "{-1, 1}" (finite) or "[lo, hi]", dims joined with 'x'
std::vector<DiscreteSet> parse_discrete(const Line& l) {
    std::vector<DiscreteSet> dims;
    for (const auto& part : split_top(l.value, 'x')) {
        std::string p = trim(part);
        DiscreteSet d;
        if (p.size() >= 2 && p.front() == '{' && p.back() == '}') {
            d.finite = true;
            for (const auto& v : split_top(p.substr(1, p.size() - 2), ','))
                d.values.push_back(std::strtod(v.c_str(), nullptr));
            if (d.values.empty()) fail(l.number, "empty finite set");
        } else if (p.size() >= 2 && p.front() == '[' && p.back() == ']') {
            d.finite = false;
            auto nums = split_top(p.substr(1, p.size() - 2), ',');
            if (nums.size() != 2) fail(l.number, "expected [lo, hi]");
            d.box = {std::strtod(nums[0].c_str(), nullptr),
                     std::strtod(nums[1].c_str(), nullptr)};
            if (!(d.box.lo <= d.box.hi)) fail(l.number, "interval bounds out of order");
        } else {
            fail(l.number, "expected {v1, v2} or [lo, hi]");
        }
        dims.push_back(std::move(d));
    }
    return dims;
}

struct Parsed {
    std::vector<Section> sections;
};

Parsed tokenize(const std::string& text) {
    Parsed out;
    std::istringstream in(text);
    std::string raw;
    int number = 0;
    Section* cur = nullptr;
    while (std::getline(in, raw)) {
        ++number;
        std::string line = trim(raw);
        if (line.empty() || line[0] == '#') continue;
        if (line.front() == '[') {
            if (line.back() != ']') fail(number, "malformed section header");
            std::string name = trim(line.substr(1, line.size() - 2));
            for (const auto& s : out.sections)
                if (s.name == name)
                    fail(number, "duplicate section [" + name + "]");
            out.sections.push_back({name, number, {}, {}});
            cur = &out.sections.back();
            continue;
        }
        if (!cur) fail(number, "content before any [section]");
        cur->raw_lines.push_back({number, "", line});
        size_t eq = line.find('=');
        // grammar rules contain "::=", handled by the grammar parser
        if (line.find("::=") == std::string::npos && eq != std::string::npos) {
            cur->entries.push_back(
                {number, trim(line.substr(0, eq)), trim(line.substr(eq + 1))});
        }
    }
    return out;
}

class Loader {
  public:
    explicit Loader(const Parsed& p) : parsed_(p) {}

    Problem build() {
        Problem pr;
        auto& task = pr.task;
        OpenLoopSystem& sys = task.sys;

        // ---- partition
        const Section* part = find("partition");
        if (!part) throw ProblemError("missing [partition] section");
        for (const auto& l : part->entries) {
            if (l.key == "n_x") sys.part.n_x = to_int(l);
            else if (l.key == "n_q") sys.part.n_q = to_int(l);
            else if (l.key == "n_t") sys.part.n_t = to_int(l);
            else if (l.key == "eta") {
                for (const auto& v : split_top(l.value, ','))
                    sys.part.eta.push_back(std::strtod(v.c_str(), nullptr));
            } else fail(l.number, "unknown key '" + l.key + "' in [partition]");
        }
        const Section* sd = find("sampled_data");
        double sd_eta = 0;
        if (sd) {
            for (const auto& l : sd->entries) {
                if (l.key == "eta") sd_eta = to_number(l);
                else fail(l.number, "unknown key '" + l.key + "' in [sampled_data]");
            }
            if (!(sd_eta > 0)) fail(sd->line, "sampled_data needs eta > 0");
        }

        const int nx = sys.part.n_x;
        const int n_base = sys.part.n();
        ParseOptions eo;
        eo.n_state = n_base;

        // ---- disturbance (dimensions needed before flow parsing)
        if (const Section* s = find("disturbance")) {
            for (const auto& l : s->entries) {
                int idx = var_index(l, 'd');
                auto nums = split_top(l.value, ',');
                if (nums.size() != 2) fail(l.number, "expected 'dK = lo, hi'");
                Interval b{std::strtod(nums[0].c_str(), nullptr),
                           std::strtod(nums[1].c_str(), nullptr)};
                place(sys.disturbance_box, idx, b, l.number);
            }
            sys.n_disturbances = static_cast<int>(sys.disturbance_box.size());
        }
        eo.n_disturbance = sys.n_disturbances;

        // ---- input
        if (const Section* s = find("input")) {
            for (const auto& l : s->entries) {
                int idx = var_index(l, 'u');
                std::optional<std::pair<double, double>> bounds;
                if (l.value != "free") {
                    auto nums = split_top(l.value, ',');
                    if (nums.size() != 2) fail(l.number, "expected 'uK = lo, hi' or 'uK = free'");
                    bounds = {std::strtod(nums[0].c_str(), nullptr),
                              std::strtod(nums[1].c_str(), nullptr)};
                    if (!(bounds->first < bounds->second))
                        fail(l.number, "input bounds out of order");
                }
                place(sys.input_bounds, idx, bounds, l.number);
            }
            sys.n_inputs = static_cast<int>(sys.input_bounds.size());
        }
        eo.n_input = sys.n_inputs;

        // ---- flow
        const Section* fl = find("flow");
        if (!fl) throw ProblemError("missing [flow] section");
        for (const auto& l : fl->entries) {
            if (l.key.size() >= 2 && l.key[0] == 'f') {
                int idx = var_index(l, 'f');
                place(sys.flow_x, idx, parse(l, eo), l.number);
            } else if (l.key.size() >= 2 && l.key[0] == 'c') {
                sys.flow_constraints.push_back(parse(l, eo));
            } else {
                fail(l.number, "unknown key '" + l.key + "' in [flow]");
            }
        }
        if (static_cast<int>(sys.flow_x.size()) != nx)
            fail(fl->line, "flow must define f1..f" + std::to_string(nx));

        // ---- output (default: identity on all states)
        if (const Section* s = find("output")) {
            for (const auto& l : s->entries) {
                int idx = var_index(l, 'y');
                ParseOptions so = eo;
                so.n_input = 0;
                so.n_disturbance = 0;
                place(sys.output, idx, parse(l, so), l.number);
            }
        } else {
            for (int i = 0; i < n_base; ++i) sys.output.push_back(Expr::state(i));
        }

        // ---- jumps
        for (const auto& sec : parsed_.sections) {
            if (sec.name.rfind("jumps.system", 0) == 0) {
                JumpPiece jp;
                jp.name = sec.name.substr(std::string("jumps.").size());
                for (const auto& l : sec.entries) {
                    if (l.key.rfind("guard", 0) == 0) jp.guards.push_back(parse(l, eo));
                    else if (l.key[0] == 'g') {
                        int idx = var_index(l, 'g');
                        place(jp.map_xq, idx, parse(l, eo), l.number);
                    } else if (l.key == "name") jp.name = l.value;
                    else fail(l.number, "unknown key '" + l.key + "' in [" + sec.name + "]");
                }
                sys.system_jumps.push_back(std::move(jp));
            } else if (sec.name == "jumps.timer") {
                for (const auto& l : sec.entries) {
                    int idx = var_index(l, 'g');
                    place(sys.timer_jump_xq, idx, parse(l, eo), l.number);
                }
            }
        }

        // ---- sets
        SpecSets& sets = task.sets;
        const Section* se = find("sets");
        if (!se) throw ProblemError("missing [sets] section");
        for (const auto& l : se->entries) {
            if (l.key == "S_x") sets.S_x = parse_box(l);
            else if (l.key == "I_x") sets.I_x = parse_box(l);
            else if (l.key == "O_x") sets.O_x = parse_box(l);
            else if (l.key == "S_q") sets.S_q = parse_discrete(l);
            else if (l.key == "O_q") sets.O_q = parse_discrete(l);
            else if (l.key == "I_q") sets.I_q = parse_discrete(l);
            else if (l.key == "I_t") {
                for (const auto& v : split_top(l.value, ',')) {
                    if (v == "free") sets.I_t.push_back(std::nullopt);
                    else sets.I_t.push_back(std::strtod(v.c_str(), nullptr));
                }
            } else if (l.key == "couple") {
                // "s3 = s1, s4 = s2"
                for (const auto& pair : split_top(l.value, ',')) {
                    auto sides = split_top(pair, '=');
                    if (sides.size() != 2) fail(l.number, "couple entries look like s3 = s1");
                    Expr a = parse_expr(sides[0], eo), b = parse_expr(sides[1], eo);
                    if (a.op() != Op::Var || b.op() != Op::Var)
                        fail(l.number, "couple entries must be plain state variables");
                    sets.I_couplings.push_back(a - b);
                    sets.I_couple_pairs.emplace_back(a.node().index, b.node().index);
                }
            } else fail(l.number, "unknown key '" + l.key + "' in [sets]");
        }

        // ---- spec
        if (const Section* s = find("spec")) {
            for (const auto& l : s->entries) {
                if (l.key == "type") {
                    if (l.value == "rws") task.rsws = false;
                    else if (l.value == "rsws") task.rsws = true;
                    else if (l.value == "rsws+zeno") {
                        task.rsws = true;
                        task.zeno = true;
                    } else fail(l.number, "spec type must be rws, rsws or rsws+zeno");
                } else if (l.key == "persistent_flow") task.persistent_flow = to_bool(l);
                else if (l.key == "gamma_c") task.gamma_c = to_number(l);
                else if (l.key == "gamma_d") task.gamma_d = to_number(l);
                else if (l.key == "c") task.c = to_number(l);
                else fail(l.number, "unknown key '" + l.key + "' in [spec]");
            }
        }

        // ---- prover
        if (const Section* s = find("prover")) {
            for (const auto& l : s->entries) {
                if (l.key == "delta") pr.prover.delta = to_number(l);
                else if (l.key == "timeout") pr.prover.timeout_s = to_number(l);
                else if (l.key == "max_splits") pr.prover.max_splits = static_cast<uint64_t>(to_number(l));
                else if (l.key == "workers") pr.prover.workers = to_int(l);
                else fail(l.number, "unknown key '" + l.key + "' in [prover]");
            }
        }

        // ---- gp
        if (const Section* s = find("gp")) {
            for (const auto& l : s->entries) {
                if (l.key == "population") pr.gp.population = to_int(l);
                else if (l.key == "tournament") pr.gp.tournament = to_int(l);
                else if (l.key == "elites") pr.gp.elites = to_int(l);
                else if (l.key == "mutation") pr.gp.p_mutation = to_number(l);
                else if (l.key == "crossover") pr.gp.p_crossover = to_number(l);
                else if (l.key == "max_generations") pr.gp.max_generations = to_int(l);
                else if (l.key == "cma_generations") pr.gp.cma_generations = to_int(l);
                else if (l.key == "samples") pr.gp.base_samples = to_int(l);
                else if (l.key == "cex_capacity") pr.gp.cex_capacity = to_int(l);
                else if (l.key == "cex_per_refutation") pr.gp.cex_per_refutation = to_int(l);
                else if (l.key == "epsilon") pr.gp.epsilon = to_number(l);
                else if (l.key == "wallclock") pr.gp.wallclock_s = to_number(l);
                else if (l.key == "workers") pr.gp.workers = to_int(l);
                else if (l.key == "cma_sigma0") pr.gp.cma_sigma0 = to_number(l);
                else fail(l.number, "unknown key '" + l.key + "' in [gp]");
            }
        }

        // ---- sampled-data wrapper
        if (sd) {
            sys = build_sampled_data(sys, sd_eta);
            sets = build_sampled_data_sets(sets, nx);
        }

        // fill defaults for q/t set components the file omitted
        if (sets.S_q.empty() && sys.part.n_q > 0)
            throw ProblemError("S_q required when n_q > 0");
        if (sets.O_q.empty()) sets.O_q = sets.S_q;

        // ---- grammar (after the final partition is known)
        if (const Section* s = find("grammar")) {
            int depth_cap = 10;
            std::vector<std::string> lines;
            for (const auto& l : s->entries)
                if (l.key == "max_depth") depth_cap = to_int(l);
            for (const auto& l : s->raw_lines) {
                if (l.value.rfind("max_depth", 0) == 0) continue;
                lines.push_back(l.value);
            }
            task.grammar = parse_grammar(lines, sys.part.n(),
                                         static_cast<int>(sys.output.size()), depth_cap);
            pr.has_grammar = true;
        }

        for (const auto& sec : parsed_.sections) {
            static const char* known[] = {"partition", "sampled_data", "flow", "input",
                                          "disturbance", "output", "sets", "spec",
                                          "prover", "gp", "grammar", "jumps.timer"};
            bool ok = sec.name.rfind("jumps.system", 0) == 0;
            for (const char* k : known) ok = ok || sec.name == k;
            if (!ok) fail(sec.line, "unknown section [" + sec.name + "]");
        }

        sys.validate();
        sets.validate(sys.part);
        pr.prover.validate(task.c);
        pr.gp.validate();
        return pr;
    }

  private:
    const Parsed& parsed_;

    const Section* find(const std::string& name) const {
        for (const auto& s : parsed_.sections)
            if (s.name == name) return &s;
        return nullptr;
    }

    static int var_index(const Line& l, char prefix) {
        if (l.key.size() < 2 || l.key[0] != prefix)
            fail(l.number, std::string("expected key ") + prefix + "K");
        int idx = std::atoi(l.key.c_str() + 1);
        if (idx < 1) fail(l.number, "bad index in key '" + l.key + "'");
        return idx - 1;
    }

    template <typename T>
    static void place(std::vector<T>& v, int idx, T value, int line) {
        if (static_cast<size_t>(idx) >= v.size()) v.resize(idx + 1);
        (void)line;
        v[idx] = std::move(value);
    }

    static Expr parse(const Line& l, const ParseOptions& eo) {
        try {
            return parse_expr(l.value, eo);
        } catch (const ExprError& e) {
            fail(l.number, e.what());
        }
    }
};

} // namespace

Problem parse_problem(const std::string& text, const std::string& path) {
    Parsed p = tokenize(text);
    Loader loader(p);
    Problem pr = loader.build();
    pr.digest = content_digest(text);
    pr.path = path;
    return pr;
}

Problem load_problem(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ProblemError("cannot open problem file: " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return parse_problem(ss.str(), path);
}

} // namespace lbf
