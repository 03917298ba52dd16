#include "lbf/expr.hpp"

#include <cctype>
#include <cstdlib>
#include <string>

namespace lbf {

namespace {

class Parser {
  public:
    Parser(const std::string& text, const ParseOptions& opts)
        : text_(text), opts_(opts) {}

    Expr parse() {
        Expr e = parse_sum();
        skip_ws();
        if (pos_ != text_.size()) fail("trailing input");
        return e;
    }

  private:
    const std::string& text_;
    const ParseOptions& opts_;
    size_t pos_ = 0;

    [[noreturn]] void fail(const std::string& msg) {
        throw ExprError("parse error at column " + std::to_string(pos_ + 1) +
                        ": " + msg + " in \"" + text_ + "\"");
    }

    void skip_ws() {
        while (pos_ < text_.size() && std::isspace(static_cast<unsigned char>(text_[pos_])))
            ++pos_;
    }

    char peek() {
        skip_ws();
        return pos_ < text_.size() ? text_[pos_] : '\0';
    }

    bool accept(char c) {
        if (peek() == c) {
            ++pos_;
            return true;
        }
        return false;
    }

    void expect(char c) {
        if (!accept(c)) fail(std::string("expected '") + c + "'");
    }

    Expr parse_sum() {
        Expr e = parse_product();
        for (;;) {
            if (accept('+')) e = e + parse_product();
            else if (accept('-')) e = e - parse_product();
            else return e;
        }
    }

    Expr parse_product() {
        Expr e = parse_unary();
        for (;;) {
            if (accept('*')) e = e * parse_unary();
            else if (accept('/')) e = e / parse_unary();
            else return e;
        }
    }

    Expr parse_unary() {
        if (accept('-')) return -parse_unary();
        if (accept('+')) return parse_unary();
        return parse_power();
    }

    Expr parse_power() {
        Expr base = parse_primary();
        if (accept('^')) {
            skip_ws();
            size_t start = pos_;
            while (pos_ < text_.size() && std::isdigit(static_cast<unsigned char>(text_[pos_])))
                ++pos_;
            if (pos_ == start) fail("exponent must be a non-negative integer");
            int e = std::atoi(text_.substr(start, pos_ - start).c_str());
            return Expr::pow(base, e);
        }
        return base;
    }

    double parse_number_token() {
        skip_ws();
        const char* begin = text_.c_str() + pos_;
        char* end = nullptr;
        double v = std::strtod(begin, &end);
        if (end == begin) fail("expected number");
        pos_ += static_cast<size_t>(end - begin);
        return v;
    }

    // a possibly signed literal, used for sat/const bounds
    double parse_signed_literal() {
        skip_ws();
        bool neg = accept('-');
        double v = parse_number_token();
        return neg ? -v : v;
    }

    std::string parse_ident() {
        skip_ws();
        size_t start = pos_;
        while (pos_ < text_.size() &&
               (std::isalnum(static_cast<unsigned char>(text_[pos_])) || text_[pos_] == '_'))
            ++pos_;
        return text_.substr(start, pos_ - start);
    }

    Expr make_var(VarKind kind, int index1, int limit, const char* what) {
        if (index1 <= 0) fail(std::string("bad ") + what + " index");
        if (limit >= 0 && index1 > limit)
            fail(std::string(what) + std::to_string(index1) + " exceeds declared dimension " +
                 std::to_string(limit));
        return Expr::var(kind, index1 - 1);
    }

    Expr parse_primary() {
        skip_ws();
        if (pos_ >= text_.size()) fail("unexpected end of input");
        char c = text_[pos_];

        if (c == '(') {
            ++pos_;
            Expr e = parse_sum();
            expect(')');
            return e;
        }
        if (std::isdigit(static_cast<unsigned char>(c)) || c == '.') {
            double v = parse_number_token();
            return Expr::constant(v, opts_.tunable_literals);
        }
        if (c == '<') {
            if (!opts_.nonterminals) fail("nonterminal reference outside grammar context");
            ++pos_;
            std::string name = parse_ident();
            expect('>');
            auto& nts = *opts_.nonterminals;
            for (size_t i = 0; i < nts.size(); ++i)
                if (nts[i] == name) return Expr::nt_ref(static_cast<int>(i));
            nts.push_back(name);
            return Expr::nt_ref(static_cast<int>(nts.size()) - 1);
        }
        if (std::isalpha(static_cast<unsigned char>(c))) {
            std::string id = parse_ident();
            if (id == "sin" || id == "cos" || id == "exp" || id == "sqrt" || id == "sign") {
                expect('(');
                Expr a = parse_sum();
                expect(')');
                if (id == "sin") return Expr::sin(a);
                if (id == "cos") return Expr::cos(a);
                if (id == "exp") return Expr::exp(a);
                if (id == "sqrt") return Expr::sqrt(a);
                return Expr::sign(a);
            }
            if (id == "min" || id == "max") {
                expect('(');
                Expr a = parse_sum();
                expect(',');
                Expr b = parse_sum();
                expect(')');
                return id == "min" ? Expr::min(a, b) : Expr::max(a, b);
            }
            if (id == "sat") {
                expect('(');
                double lo = parse_signed_literal();
                expect(',');
                double hi = parse_signed_literal();
                expect(';');
                Expr a = parse_sum();
                expect(')');
                if (!(lo <= hi)) fail("sat bounds out of order");
                return Expr::sat(lo, hi, a);
            }
            if (id == "const") {
                if (!opts_.nonterminals) fail("const terminal outside grammar context");
                expect('[');
                double lo = parse_signed_literal();
                expect(',');
                double hi = parse_signed_literal();
                expect(']');
                if (!(lo <= hi)) fail("const range out of order");
                return Expr::const_draw(lo, hi);
            }
            if (id == "pi") return Expr::constant(3.14159265358979323846);
            // variable: letter prefix + 1-based index
            if (id.size() >= 2) {
                char prefix = id[0];
                bool digits = true;
                for (size_t i = 1; i < id.size(); ++i)
                    if (!std::isdigit(static_cast<unsigned char>(id[i]))) digits = false;
                if (digits) {
                    int idx = std::atoi(id.c_str() + 1);
                    switch (prefix) {
                    case 's': return make_var(VarKind::State, idx, opts_.n_state, "s");
                    case 'u': return make_var(VarKind::Input, idx, opts_.n_input, "u");
                    case 'd': return make_var(VarKind::Disturbance, idx, opts_.n_disturbance, "d");
                    case 'y': return make_var(VarKind::Output, idx, opts_.n_output, "y");
                    default: break;
                    }
                }
            }
            fail("unknown identifier '" + id + "'");
        }
        fail("unexpected character");
    }
};

} // namespace

Expr parse_expr(const std::string& text, const ParseOptions& opts) {
    Parser p(text, opts);
    return p.parse();
}

} // namespace lbf
