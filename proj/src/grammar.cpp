#include "lbf/grammar.hpp"

#include <algorithm>
#include <functional>
#include <limits>

namespace lbf {

namespace {

constexpr int kUnbounded = std::numeric_limits<int>::max() / 4;

// Collects NtRef ids and ConstDraw ranges of a template in dfs order.
void scan_template(const Expr& body, std::vector<int>& nts,
                   std::vector<std::pair<double, double>>& ranges) {
    std::function<void(const ExprNode&)> walk = [&](const ExprNode& n) {
        if (n.op == Op::NtRef) nts.push_back(n.index);
        if (n.op == Op::ConstDraw) ranges.emplace_back(n.sat_lo, n.sat_hi);
        if (n.a) walk(*n.a);
        if (n.b) walk(*n.b);
    };
    walk(body.node());
}

Production make_production(Expr body) {
    Production p;
    p.body = std::move(body);
    scan_template(p.body, p.nt_refs, p.const_ranges);
    return p;
}

} // namespace

int Grammar::find_nonterminal(const std::string& name) const {
    for (size_t i = 0; i < rules.size(); ++i)
        if (rules[i].name == name) return static_cast<int>(i);
    return -1;
}

void Grammar::finalize() {
    const int n = static_cast<int>(rules.size());
    auto check_refs = [&](const Production& p, const std::string& where) {
        for (int r : p.nt_refs)
            if (r < 0 || r >= n)
                throw GrammarError("undefined nonterminal referenced in " + where);
    };
    for (const auto& r : rules) {
        if (r.alts.empty())
            throw GrammarError("nonterminal <" + r.name + "> has no production rule");
        for (const auto& p : r.alts) check_refs(p, "<" + r.name + ">");
    }
    for (const auto& p : start) check_refs(p, "start tree");

    // fixpoint for minimal full-expansion depth
    min_depth.assign(n, kUnbounded);
    for (bool changed = true; changed;) {
        changed = false;
        for (int i = 0; i < n; ++i) {
            for (const auto& p : rules[i].alts) {
                int need = 0;
                for (int r : p.nt_refs) need = std::max(need, min_depth[r]);
                int d = need >= kUnbounded ? kUnbounded : 1 + need;
                if (d < min_depth[i]) {
                    min_depth[i] = d;
                    changed = true;
                }
            }
        }
    }
    for (int i = 0; i < n; ++i)
        if (min_depth[i] >= kUnbounded)
            throw GrammarNotTerminating("nonterminal <" + rules[i].name +
                                        "> admits no finite derivation");
    for (const auto& p : start)
        for (int r : p.nt_refs)
            if (min_depth[r] > depth_cap)
                throw GrammarNotTerminating(
                    "start tree cannot be expanded within the depth cap");
}

// ---------------------------------------------------------------------------
// text format

namespace {

std::vector<std::string> split_top_level(const std::string& s, char sep) {
    std::vector<std::string> parts;
    int depth = 0;
    std::string cur;
    for (char c : s) {
        if (c == '(' || c == '[') ++depth;
        if (c == ')' || c == ']') --depth;
        if (c == sep && depth == 0) {
            parts.push_back(cur);
            cur.clear();
        } else {
            cur += c;
        }
    }
    parts.push_back(cur);
    return parts;
}

std::string trim(const std::string& s) {
    size_t b = s.find_first_not_of(" \t\r\n");
    if (b == std::string::npos) return "";
    size_t e = s.find_last_not_of(" \t\r\n");
    return s.substr(b, e - b + 1);
}

} // namespace

Grammar parse_grammar(const std::vector<std::string>& lines, int n_state,
                      int n_output, int depth_cap) {
    Grammar g;
    g.depth_cap = depth_cap;

    std::vector<std::string> names; // resolved/declared nonterminal names
    ParseOptions opts;
    opts.n_state = n_state;
    opts.n_output = n_output;
    opts.nonterminals = &names;

    std::string start_text;
    struct RawRule {
        std::string name;
        std::string body;
    };
    std::vector<RawRule> raw;

    for (const auto& line0 : lines) {
        std::string line = trim(line0);
        if (line.empty() || line[0] == '#') continue;
        if (line.rfind("start", 0) == 0 && line.find("::=") == std::string::npos) {
            size_t eq = line.find('=');
            if (eq == std::string::npos) throw GrammarError("malformed start line");
            start_text = trim(line.substr(eq + 1));
            continue;
        }
        size_t sep = line.find("::=");
        if (sep == std::string::npos)
            throw GrammarError("malformed grammar line: " + line);
        std::string head = trim(line.substr(0, sep));
        if (head.size() < 3 || head.front() != '<' || head.back() != '>')
            throw GrammarError("rule head must be <name>: " + line);
        raw.push_back({trim(head.substr(1, head.size() - 2)), trim(line.substr(sep + 3))});
    }
    if (start_text.empty()) throw GrammarError("grammar has no start line");

    // declare rule names first so references resolve to the same ids
    for (const auto& r : raw) {
        if (std::find(names.begin(), names.end(), r.name) == names.end())
            names.push_back(r.name);
    }

    // start = tuple(V ; k1, k2, ...)
    {
        std::string s = start_text;
        if (s.rfind("tuple", 0) != 0)
            throw GrammarError("start must be tuple(V ; k1, ...)");
        size_t open = s.find('(');
        size_t close = s.rfind(')');
        if (open == std::string::npos || close == std::string::npos || close <= open)
            throw GrammarError("malformed start tuple");
        std::string inner = s.substr(open + 1, close - open - 1);
        auto vk = split_top_level(inner, ';');
        if (vk.empty() || vk.size() > 2)
            throw GrammarError("start tuple needs V ; controllers");
        g.start.push_back(make_production(parse_expr(trim(vk[0]), opts)));
        if (vk.size() == 2) {
            for (const auto& k : split_top_level(vk[1], ','))
                g.start.push_back(make_production(parse_expr(trim(k), opts)));
        }
    }

    g.rules.resize(names.size());
    for (size_t i = 0; i < names.size(); ++i) g.rules[i].name = names[i];
    for (const auto& r : raw) {
        int id = g.find_nonterminal(r.name);
        for (const auto& alt : split_top_level(r.body, '|'))
            g.rules[id].alts.push_back(make_production(parse_expr(trim(alt), opts)));
    }
    for (const auto& r : g.rules)
        if (r.alts.empty())
            throw GrammarError("nonterminal <" + r.name + "> referenced but not defined");

    g.finalize();
    return g;
}

// ---------------------------------------------------------------------------
// grow / phenotype

namespace {

double draw_const(const std::pair<double, double>& range, Rng& rng) {
    std::uniform_real_distribution<double> d(range.first, range.second);
    return d(rng);
}

DerivationNode grow_node(const Grammar& g, int nt, int budget, Rng& rng) {
    const Rule& rule = g.rules[nt];
    // admissible: alternatives that can still finish within the budget;
    // beyond the cap only minimal completions remain selectable
    std::vector<int> admissible;
    for (size_t a = 0; a < rule.alts.size(); ++a) {
        int need = 0;
        for (int r : rule.alts[a].nt_refs) need = std::max(need, g.min_depth[r]);
        if (need <= budget - 1) admissible.push_back(static_cast<int>(a));
    }
    if (admissible.empty()) {
        int best = 0, bestneed = kUnbounded;
        for (size_t a = 0; a < rule.alts.size(); ++a) {
            int need = 0;
            for (int r : rule.alts[a].nt_refs) need = std::max(need, g.min_depth[r]);
            if (need < bestneed) {
                bestneed = need;
                best = static_cast<int>(a);
            }
        }
        admissible.push_back(best);
        budget = bestneed + 1;
    }
    std::uniform_int_distribution<size_t> pick(0, admissible.size() - 1);
    int alt = admissible[pick(rng)];

    DerivationNode node;
    node.nt = nt;
    node.alt = alt;
    const Production& p = rule.alts[alt];
    node.consts.reserve(p.const_ranges.size());
    for (const auto& r : p.const_ranges) node.consts.push_back(draw_const(r, rng));
    node.children.reserve(p.nt_refs.size());
    for (int r : p.nt_refs) node.children.push_back(grow_node(g, r, budget - 1, rng));
    return node;
}

} // namespace

Genotype grow(const Grammar& g, Rng& rng) {
    Genotype gt;
    for (const auto& p : g.start) {
        for (const auto& r : p.const_ranges) gt.start_consts.push_back(draw_const(r, rng));
        for (int r : p.nt_refs)
            gt.start_children.push_back(grow_node(g, r, g.depth_cap, rng));
    }
    return gt;
}

namespace {

// Assembles the expression of a template, consuming child derivations and
// drawn constants in dfs order.
struct Assembler {
    const Grammar& g;

    Expr assemble_node(const DerivationNode& node) const {
        const Production& p = g.rules[node.nt].alts[node.alt];
        size_t child = 0, cnst = 0;
        Expr e = instantiate(p.body, node.children, child, node.consts, cnst);
        return e;
    }

    Expr instantiate(const Expr& tmpl, const std::vector<DerivationNode>& children,
                     size_t& child, const std::vector<double>& consts,
                     size_t& cnst) const {
        const ExprNode& n = tmpl.node();
        if (n.op == Op::NtRef) return assemble_node(children.at(child++));
        if (n.op == Op::ConstDraw) return Expr::constant(consts.at(cnst++), true);
        if (!n.a && !n.b) return tmpl;
        ExprNode copy = n;
        if (n.a) copy.a = instantiate(Expr(n.a), children, child, consts, cnst).ptr();
        if (n.b) copy.b = instantiate(Expr(n.b), children, child, consts, cnst).ptr();
        return Expr(std::make_shared<const ExprNode>(std::move(copy)));
    }
};

Expr shift_params(const Expr& e, int offset) {
    if (offset == 0) return e;
    std::function<ExprPtr(const ExprPtr&)> shift = [&](const ExprPtr& p) -> ExprPtr {
        if (p->op == Op::Param) {
            ExprNode nn = *p;
            nn.index += offset;
            return std::make_shared<const ExprNode>(std::move(nn));
        }
        if (!p->a && !p->b) return p;
        ExprNode nn = *p;
        if (p->a) nn.a = shift(p->a);
        if (p->b) nn.b = shift(p->b);
        return std::make_shared<const ExprNode>(std::move(nn));
    };
    return Expr(shift(e.ptr()));
}

} // namespace

Phenotype to_phenotype(const Grammar& g, const Genotype& gt) {
    Assembler as{g};
    std::vector<Expr> components;
    size_t child = 0, cnst = 0;
    for (const auto& p : g.start)
        components.push_back(
            as.instantiate(p.body, gt.start_children, child, gt.start_consts, cnst));
    if (child != gt.start_children.size() || cnst != gt.start_consts.size())
        throw GrammarError("genotype does not match start tree");

    // lift drawn constants into parameter slots, numbered jointly across the
    // tuple in component order
    Phenotype ph;
    int offset = 0;
    std::vector<Expr> lifted;
    for (auto& e : components) {
        auto [withslots, values] = extract_params(e);
        lifted.push_back(shift_params(withslots, offset));
        offset += static_cast<int>(values.size());
        for (double v : values) ph.params.push_back(v);
    }
    ph.V = lifted.at(0);
    for (size_t i = 1; i < lifted.size(); ++i) ph.kappa.push_back(lifted[i]);
    return ph;
}

// ---------------------------------------------------------------------------
// genetic operators

namespace {

void collect_nodes(DerivationNode& n, int depth,
                   std::vector<std::pair<DerivationNode*, int>>& out) {
    out.emplace_back(&n, depth);
    for (auto& c : n.children) collect_nodes(c, depth + 1, out);
}

std::vector<std::pair<DerivationNode*, int>> all_nodes(Genotype& gt) {
    std::vector<std::pair<DerivationNode*, int>> out;
    for (auto& c : gt.start_children) collect_nodes(c, 1, out);
    return out;
}

} // namespace

std::pair<Genotype, Genotype> crossover(const Grammar& g, const Genotype& a,
                                        const Genotype& b, Rng& rng) {
    (void)g;
    Genotype ca = a, cb = b;
    auto na = all_nodes(ca);
    auto nb = all_nodes(cb);

    // sites in `a` whose nonterminal also occurs in `b`
    std::vector<size_t> eligible;
    for (size_t i = 0; i < na.size(); ++i)
        for (const auto& [nodeb, db] : nb)
            if (nodeb->nt == na[i].first->nt) {
                eligible.push_back(i);
                break;
            }
    if (eligible.empty()) return {ca, cb};

    std::uniform_int_distribution<size_t> picka(0, eligible.size() - 1);
    DerivationNode* site_a = na[eligible[picka(rng)]].first;

    std::vector<DerivationNode*> partners;
    for (const auto& [nodeb, db] : nb)
        if (nodeb->nt == site_a->nt) partners.push_back(nodeb);
    std::uniform_int_distribution<size_t> pickb(0, partners.size() - 1);
    DerivationNode* site_b = partners[pickb(rng)];

    std::swap(*site_a, *site_b);
    return {ca, cb};
}

Genotype mutate(const Grammar& g, const Genotype& a, Rng& rng) {
    Genotype c = a;
    auto nodes = all_nodes(c);
    if (nodes.empty()) return c;
    std::uniform_int_distribution<size_t> pick(0, nodes.size() - 1);
    auto [site, depth] = nodes[pick(rng)];
    int budget = std::max(g.depth_cap - depth + 1, g.min_depth[site->nt]);
    *site = grow_node(g, site->nt, budget, rng);
    return c;
}

// ---------------------------------------------------------------------------
// adherence

namespace {

bool node_adheres(const Grammar& g, const DerivationNode& n) {
    if (n.nt < 0 || n.nt >= static_cast<int>(g.rules.size())) return false;
    const Rule& rule = g.rules[n.nt];
    if (n.alt < 0 || n.alt >= static_cast<int>(rule.alts.size())) return false;
    const Production& p = rule.alts[n.alt];
    if (n.children.size() != p.nt_refs.size()) return false;
    // adherence is structural; constant values may leave their draw range
    // during parameter optimization
    if (n.consts.size() != p.const_ranges.size()) return false;
    for (size_t i = 0; i < n.children.size(); ++i) {
        if (n.children[i].nt != p.nt_refs[i]) return false;
        if (!node_adheres(g, n.children[i])) return false;
    }
    return true;
}

} // namespace

bool adheres(const Grammar& g, const Genotype& gt) {
    size_t want_children = 0, want_consts = 0;
    for (const auto& p : g.start) {
        want_children += p.nt_refs.size();
        want_consts += p.const_ranges.size();
    }
    if (gt.start_children.size() != want_children) return false;
    if (gt.start_consts.size() != want_consts) return false;
    size_t k = 0;
    for (const auto& p : g.start)
        for (int r : p.nt_refs) {
            if (gt.start_children[k].nt != r) return false;
            if (!node_adheres(g, gt.start_children[k])) return false;
            ++k;
        }
    return true;
}

size_t genotype_size(const Genotype& gt) {
    std::function<size_t(const DerivationNode&)> count = [&](const DerivationNode& n) {
        size_t c = 1;
        for (const auto& ch : n.children) c += count(ch);
        return c;
    };
    size_t total = 0;
    for (const auto& c : gt.start_children) total += count(c);
    return total;
}

} // namespace lbf
