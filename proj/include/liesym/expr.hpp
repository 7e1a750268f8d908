// Minimal immutable expression engine: parse, differentiate, evaluate, and
// collect polynomial coefficients with respect to chosen indeterminates.
//
// Node set: constants, named variables, n-ary sums/products, negation,
// integer powers, and applications of exp/ln/sin/cos/sqrt. Division is
// represented as multiplication by an integer power of -1. There is no
// canonical simplification beyond constant folding and flattening; all
// downstream correctness rests on numeric evaluation.

#pragma once

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdint>
#include <map>
#include <memory>
#include <set>
#include <sstream>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

namespace liesym {

class parse_error : public std::runtime_error {
public:
    parse_error(std::string msg, std::size_t pos)
        : std::runtime_error(std::move(msg)), position(pos) {}
    std::size_t position;
};

class eval_error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Raised by collect_monomials when an indeterminate occurs non-polynomially.
class nonpoly_error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

enum class NodeKind { Constant, Variable, Add, Mul, Neg, Pow, Func };
enum class FuncKind { Exp, Ln, Sin, Cos, Sqrt };

class Expr;
using ExprPtr = std::shared_ptr<const Expr>;

class Expr {
public:
    NodeKind kind;
    double value = 0.0;          // Constant
    std::string name;            // Variable
    int exponent = 1;            // Pow
    FuncKind func = FuncKind::Exp;
    std::vector<ExprPtr> kids;

    explicit Expr(NodeKind k) : kind(k) {}
};

// ---------------------------------------------------------------------------
// Node builders. These fold constants and flatten nested sums/products so
// that derivative trees stay compact; they perform no other rewriting.

inline ExprPtr constant(double v) {
    if (!std::isfinite(v)) throw eval_error("non-finite constant");
    auto e = std::make_shared<Expr>(NodeKind::Constant);
    e->value = v;
    return e;
}

inline ExprPtr var(std::string name) {
    auto e = std::make_shared<Expr>(NodeKind::Variable);
    e->name = std::move(name);
    return e;
}

inline bool is_const(const ExprPtr& e, double v) {
    return e->kind == NodeKind::Constant && e->value == v;
}

inline ExprPtr add(std::vector<ExprPtr> terms) {
    std::vector<ExprPtr> flat;
    double c = 0.0;
    for (auto& t : terms) {
        if (t->kind == NodeKind::Add) {
            for (auto& k : t->kids) {
                if (k->kind == NodeKind::Constant) c += k->value;
                else flat.push_back(k);
            }
        } else if (t->kind == NodeKind::Constant) {
            c += t->value;
        } else {
            flat.push_back(std::move(t));
        }
    }
    if (c != 0.0 || flat.empty()) flat.push_back(constant(c));
    if (flat.size() == 1) return flat[0];
    auto e = std::make_shared<Expr>(NodeKind::Add);
    e->kids = std::move(flat);
    return e;
}

inline ExprPtr add(ExprPtr a, ExprPtr b) { return add(std::vector<ExprPtr>{std::move(a), std::move(b)}); }

inline ExprPtr mul(std::vector<ExprPtr> factors) {
    std::vector<ExprPtr> flat;
    double c = 1.0;
    for (auto& f : factors) {
        if (f->kind == NodeKind::Mul) {
            for (auto& k : f->kids) {
                if (k->kind == NodeKind::Constant) c *= k->value;
                else flat.push_back(k);
            }
        } else if (f->kind == NodeKind::Constant) {
            c *= f->value;
        } else {
            flat.push_back(std::move(f));
        }
    }
    if (c == 0.0) return constant(0.0);
    if (flat.empty()) return constant(c);
    if (c != 1.0) flat.insert(flat.begin(), constant(c));
    if (flat.size() == 1) return flat[0];
    auto e = std::make_shared<Expr>(NodeKind::Mul);
    e->kids = std::move(flat);
    return e;
}

inline ExprPtr mul(ExprPtr a, ExprPtr b) { return mul(std::vector<ExprPtr>{std::move(a), std::move(b)}); }

inline ExprPtr neg(ExprPtr a) {
    if (a->kind == NodeKind::Constant) return constant(-a->value);
    if (a->kind == NodeKind::Neg) return a->kids[0];
    auto e = std::make_shared<Expr>(NodeKind::Neg);
    e->kids.push_back(std::move(a));
    return e;
}

inline ExprPtr sub(ExprPtr a, ExprPtr b) { return add(std::move(a), neg(std::move(b))); }

inline double pow_int_value(double base, int n) {
    if (n < 0) {
        if (base == 0.0) throw eval_error("zero raised to a negative power");
        return 1.0 / pow_int_value(base, -n);
    }
    double r = 1.0, b = base;
    unsigned e = static_cast<unsigned>(n);
    while (e) {
        if (e & 1u) r *= b;
        b *= b;
        e >>= 1;
    }
    return r;
}

inline ExprPtr pow_int(ExprPtr base, int n) {
    if (n == 0) return constant(1.0);
    if (n == 1) return base;
    if (base->kind == NodeKind::Constant) {
        if (base->value != 0.0 || n > 0) {
            double v = pow_int_value(base->value, n);
            if (std::isfinite(v)) return constant(v);
        }
    }
    if (base->kind == NodeKind::Pow) {
        long long m = static_cast<long long>(base->exponent) * n;
        if (m >= INT32_MIN && m <= INT32_MAX)
            return pow_int(base->kids[0], static_cast<int>(m));
    }
    auto e = std::make_shared<Expr>(NodeKind::Pow);
    e->exponent = n;
    e->kids.push_back(std::move(base));
    return e;
}

inline ExprPtr inv(ExprPtr a) { return pow_int(std::move(a), -1); }
inline ExprPtr div(ExprPtr a, ExprPtr b) { return mul(std::move(a), inv(std::move(b))); }

inline double apply_func(FuncKind f, double x) {
    switch (f) {
        case FuncKind::Exp: return std::exp(x);
        case FuncKind::Ln:
            if (x <= 0.0) throw eval_error("ln of non-positive value");
            return std::log(x);
        case FuncKind::Sin: return std::sin(x);
        case FuncKind::Cos: return std::cos(x);
        case FuncKind::Sqrt:
            if (x < 0.0) throw eval_error("sqrt of negative value");
            return std::sqrt(x);
    }
    throw eval_error("unknown function");
}

inline ExprPtr fcall(FuncKind f, ExprPtr arg) {
    if (arg->kind == NodeKind::Constant) {
        try {
            double v = apply_func(f, arg->value);
            if (std::isfinite(v)) return constant(v);
        } catch (const eval_error&) {
            // keep symbolic; evaluation will report the domain error
        }
    }
    auto e = std::make_shared<Expr>(NodeKind::Func);
    e->func = f;
    e->kids.push_back(std::move(arg));
    return e;
}

// ---------------------------------------------------------------------------
// Evaluation

/// Variable bindings for evaluation; lookup is a linear scan, which is fine
/// for the handful of base variables a coefficient function depends on.
class Bindings {
public:
    Bindings() = default;
    Bindings(std::initializer_list<std::pair<std::string, double>> init) {
        for (auto& p : init) set(p.first, p.second);
    }
    void set(const std::string& name, double v) {
        for (auto& p : vals_)
            if (p.first == name) { p.second = v; return; }
        vals_.emplace_back(name, v);
    }
    const double* find(const std::string& name) const {
        for (auto& p : vals_)
            if (p.first == name) return &p.second;
        return nullptr;
    }
private:
    std::vector<std::pair<std::string, double>> vals_;
};

namespace detail {
inline double eval_rec(const Expr& e, const Bindings& b) {
    switch (e.kind) {
        case NodeKind::Constant: return e.value;
        case NodeKind::Variable: {
            const double* v = b.find(e.name);
            if (!v) throw eval_error("unbound variable: " + e.name);
            return *v;
        }
        case NodeKind::Add: {
            double s = 0.0;
            for (auto& k : e.kids) s += eval_rec(*k, b);
            return s;
        }
        case NodeKind::Mul: {
            double p = 1.0;
            for (auto& k : e.kids) p *= eval_rec(*k, b);
            return p;
        }
        case NodeKind::Neg: return -eval_rec(*e.kids[0], b);
        case NodeKind::Pow: return pow_int_value(eval_rec(*e.kids[0], b), e.exponent);
        case NodeKind::Func: return apply_func(e.func, eval_rec(*e.kids[0], b));
    }
    throw eval_error("corrupt expression node");
}
}  // namespace detail

inline double evaluate(const ExprPtr& e, const Bindings& b) {
    double v = detail::eval_rec(*e, b);
    if (!std::isfinite(v)) throw eval_error("evaluation overflowed to a non-finite value");
    return v;
}

// ---------------------------------------------------------------------------
// Differentiation. `derive` extends an arbitrary assignment of derivatives to
// variables (a derivation); plain partial differentiation and the total
// derivative operators are both instances.

inline ExprPtr derive(const ExprPtr& e, const std::map<std::string, ExprPtr>& images) {
    switch (e->kind) {
        case NodeKind::Constant: return constant(0.0);
        case NodeKind::Variable: {
            auto it = images.find(e->name);
            return it == images.end() ? constant(0.0) : it->second;
        }
        case NodeKind::Add: {
            std::vector<ExprPtr> parts;
            parts.reserve(e->kids.size());
            for (auto& k : e->kids) parts.push_back(derive(k, images));
            return add(std::move(parts));
        }
        case NodeKind::Mul: {
            std::vector<ExprPtr> terms;
            for (std::size_t i = 0; i < e->kids.size(); ++i) {
                std::vector<ExprPtr> fs;
                for (std::size_t j = 0; j < e->kids.size(); ++j)
                    fs.push_back(i == j ? derive(e->kids[j], images) : e->kids[j]);
                terms.push_back(mul(std::move(fs)));
            }
            return add(std::move(terms));
        }
        case NodeKind::Neg: return neg(derive(e->kids[0], images));
        case NodeKind::Pow: {
            // d(b^n) = n b^(n-1) db
            auto db = derive(e->kids[0], images);
            return mul({constant(static_cast<double>(e->exponent)),
                        pow_int(e->kids[0], e->exponent - 1), std::move(db)});
        }
        case NodeKind::Func: {
            auto darg = derive(e->kids[0], images);
            const ExprPtr& a = e->kids[0];
            ExprPtr outer;
            switch (e->func) {
                case FuncKind::Exp: outer = fcall(FuncKind::Exp, a); break;
                case FuncKind::Ln: outer = inv(a); break;
                case FuncKind::Sin: outer = fcall(FuncKind::Cos, a); break;
                case FuncKind::Cos: outer = neg(fcall(FuncKind::Sin, a)); break;
                case FuncKind::Sqrt:
                    outer = mul(constant(0.5), inv(fcall(FuncKind::Sqrt, a)));
                    break;
            }
            return mul(std::move(outer), std::move(darg));
        }
    }
    throw eval_error("corrupt expression node");
}

inline ExprPtr differentiate(const ExprPtr& e, const std::string& v) {
    return derive(e, {{v, constant(1.0)}});
}

// ---------------------------------------------------------------------------
// Structural queries and substitution

inline void collect_variables(const ExprPtr& e, std::set<std::string>& out) {
    if (e->kind == NodeKind::Variable) out.insert(e->name);
    for (auto& k : e->kids) collect_variables(k, out);
}

inline std::set<std::string> variables(const ExprPtr& e) {
    std::set<std::string> out;
    collect_variables(e, out);
    return out;
}

inline bool contains_any(const ExprPtr& e, const std::set<std::string>& names) {
    if (e->kind == NodeKind::Variable) return names.count(e->name) > 0;
    for (auto& k : e->kids)
        if (contains_any(k, names)) return true;
    return false;
}

inline ExprPtr substitute(const ExprPtr& e, const std::map<std::string, ExprPtr>& repl) {
    switch (e->kind) {
        case NodeKind::Constant: return e;
        case NodeKind::Variable: {
            auto it = repl.find(e->name);
            return it == repl.end() ? e : it->second;
        }
        case NodeKind::Add: {
            std::vector<ExprPtr> parts;
            for (auto& k : e->kids) parts.push_back(substitute(k, repl));
            return add(std::move(parts));
        }
        case NodeKind::Mul: {
            std::vector<ExprPtr> parts;
            for (auto& k : e->kids) parts.push_back(substitute(k, repl));
            return mul(std::move(parts));
        }
        case NodeKind::Neg: return neg(substitute(e->kids[0], repl));
        case NodeKind::Pow: return pow_int(substitute(e->kids[0], repl), e->exponent);
        case NodeKind::Func: return fcall(e->func, substitute(e->kids[0], repl));
    }
    throw eval_error("corrupt expression node");
}

// ---------------------------------------------------------------------------
// Polynomial coefficient collection

/// Multidegree over a fixed list of indeterminates.
using Multidegree = std::vector<int>;
using MonomialMap = std::map<Multidegree, ExprPtr>;

namespace detail {

inline void poly_accum(MonomialMap& into, const Multidegree& deg, const ExprPtr& coeff) {
    auto it = into.find(deg);
    if (it == into.end()) into.emplace(deg, coeff);
    else it->second = add(it->second, coeff);
}

inline MonomialMap poly_mul(const MonomialMap& a, const MonomialMap& b, std::size_t nvars) {
    MonomialMap out;
    Multidegree d(nvars, 0);
    for (auto& [da, ca] : a)
        for (auto& [db, cb] : b) {
            for (std::size_t i = 0; i < nvars; ++i) d[i] = da[i] + db[i];
            poly_accum(out, d, mul(ca, cb));
        }
    return out;
}

inline MonomialMap collect_rec(const ExprPtr& e, const std::vector<std::string>& indets,
                               const std::set<std::string>& indet_set) {
    const std::size_t n = indets.size();
    MonomialMap out;
    switch (e->kind) {
        case NodeKind::Constant:
            out.emplace(Multidegree(n, 0), e);
            return out;
        case NodeKind::Variable: {
            auto it = std::find(indets.begin(), indets.end(), e->name);
            if (it == indets.end()) {
                out.emplace(Multidegree(n, 0), e);
            } else {
                Multidegree d(n, 0);
                d[static_cast<std::size_t>(it - indets.begin())] = 1;
                out.emplace(std::move(d), constant(1.0));
            }
            return out;
        }
        case NodeKind::Add: {
            for (auto& k : e->kids) {
                MonomialMap part = collect_rec(k, indets, indet_set);
                for (auto& [d, c] : part) poly_accum(out, d, c);
            }
            return out;
        }
        case NodeKind::Mul: {
            out.emplace(Multidegree(n, 0), constant(1.0));
            for (auto& k : e->kids)
                out = poly_mul(out, collect_rec(k, indets, indet_set), n);
            return out;
        }
        case NodeKind::Neg: {
            MonomialMap part = collect_rec(e->kids[0], indets, indet_set);
            for (auto& [d, c] : part) out.emplace(d, neg(c));
            return out;
        }
        case NodeKind::Pow: {
            if (!contains_any(e->kids[0], indet_set)) {
                out.emplace(Multidegree(n, 0), e);
                return out;
            }
            if (e->exponent < 0)
                throw nonpoly_error("negative power of an indeterminate-bearing expression");
            MonomialMap base = collect_rec(e->kids[0], indets, indet_set);
            out.emplace(Multidegree(n, 0), constant(1.0));
            for (int i = 0; i < e->exponent; ++i) out = poly_mul(out, base, n);
            return out;
        }
        case NodeKind::Func: {
            if (contains_any(e->kids[0], indet_set))
                throw nonpoly_error("indeterminate inside a transcendental function");
            out.emplace(Multidegree(n, 0), e);
            return out;
        }
    }
    throw eval_error("corrupt expression node");
}

}  // namespace detail

/// Collects e as a polynomial in the listed indeterminates. The returned map
/// sends each multidegree to a coefficient expression free of indeterminates;
/// zero coefficients (after folding) are removed.
inline MonomialMap collect_monomials(const ExprPtr& e, const std::vector<std::string>& indets) {
    std::set<std::string> iset(indets.begin(), indets.end());
    MonomialMap raw = detail::collect_rec(e, indets, iset);
    MonomialMap out;
    for (auto& [d, c] : raw)
        if (!is_const(c, 0.0)) out.emplace(d, c);
    return out;
}

// ---------------------------------------------------------------------------
// Printing (tests and diagnostics)

inline std::string to_string(const ExprPtr& e);

namespace detail {
inline std::string func_name(FuncKind f) {
    switch (f) {
        case FuncKind::Exp: return "exp";
        case FuncKind::Ln: return "ln";
        case FuncKind::Sin: return "sin";
        case FuncKind::Cos: return "cos";
        case FuncKind::Sqrt: return "sqrt";
    }
    return "?";
}
}  // namespace detail

inline std::string to_string(const ExprPtr& e) {
    std::ostringstream os;
    switch (e->kind) {
        case NodeKind::Constant: os << e->value; break;
        case NodeKind::Variable: os << e->name; break;
        case NodeKind::Add: {
            os << "(";
            for (std::size_t i = 0; i < e->kids.size(); ++i) {
                if (i) os << " + ";
                os << to_string(e->kids[i]);
            }
            os << ")";
            break;
        }
        case NodeKind::Mul: {
            os << "(";
            for (std::size_t i = 0; i < e->kids.size(); ++i) {
                if (i) os << "*";
                os << to_string(e->kids[i]);
            }
            os << ")";
            break;
        }
        case NodeKind::Neg: os << "-" << to_string(e->kids[0]); break;
        case NodeKind::Pow: os << to_string(e->kids[0]) << "^" << e->exponent; break;
        case NodeKind::Func: os << detail::func_name(e->func) << "(" << to_string(e->kids[0]) << ")"; break;
    }
    return os.str();
}

// ---------------------------------------------------------------------------
// Parser
//
// expression := term (('+'|'-') term)*
// term       := unary (('*'|'/') unary)*
// unary      := '-' unary | power
// power      := primary ('^' int-exponent)?
// primary    := number | ident | ident '(' args ')' | '(' expression ')'
//
// Functions: exp, ln, sin, cos, sqrt, and (jet grammar only) diff(u,x[,k]),
// which maps to the k-th derivative indeterminate of the dependent variable.

namespace detail {

struct Token {
    enum Kind { Num, Ident, Op, LParen, RParen, Comma, End } kind;
    std::size_t pos = 0;
    std::string text;
    double value = 0.0;
};

class Lexer {
public:
    explicit Lexer(const std::string& s) : s_(s) { advance(); }
    const Token& peek() const { return tok_; }
    Token take() {
        Token t = tok_;
        advance();
        return t;
    }
private:
    void advance() {
        while (i_ < s_.size() && std::isspace(static_cast<unsigned char>(s_[i_]))) ++i_;
        tok_ = Token{Token::End, i_, "", 0.0};
        if (i_ >= s_.size()) return;
        char c = s_[i_];
        if (std::isdigit(static_cast<unsigned char>(c)) ||
            (c == '.' && i_ + 1 < s_.size() && std::isdigit(static_cast<unsigned char>(s_[i_ + 1])))) {
            std::size_t start = i_;
            while (i_ < s_.size() && (std::isdigit(static_cast<unsigned char>(s_[i_])) || s_[i_] == '.')) ++i_;
            if (i_ < s_.size() && (s_[i_] == 'e' || s_[i_] == 'E')) {
                std::size_t save = i_;
                ++i_;
                if (i_ < s_.size() && (s_[i_] == '+' || s_[i_] == '-')) ++i_;
                if (i_ < s_.size() && std::isdigit(static_cast<unsigned char>(s_[i_]))) {
                    while (i_ < s_.size() && std::isdigit(static_cast<unsigned char>(s_[i_]))) ++i_;
                } else {
                    i_ = save;  // 'e' belongs to an identifier, not this literal
                }
            }
            std::string text = s_.substr(start, i_ - start);
            try {
                tok_ = Token{Token::Num, start, text, std::stod(text)};
            } catch (const std::exception&) {
                throw parse_error("malformed numeric literal '" + text + "'", start);
            }
            return;
        }
        if (std::isalpha(static_cast<unsigned char>(c)) || c == '_') {
            std::size_t start = i_;
            while (i_ < s_.size() &&
                   (std::isalnum(static_cast<unsigned char>(s_[i_])) || s_[i_] == '_'))
                ++i_;
            tok_ = Token{Token::Ident, start, s_.substr(start, i_ - start), 0.0};
            return;
        }
        std::size_t start = i_;
        ++i_;
        switch (c) {
            case '(': tok_ = Token{Token::LParen, start, "(", 0.0}; return;
            case ')': tok_ = Token{Token::RParen, start, ")", 0.0}; return;
            case ',': tok_ = Token{Token::Comma, start, ",", 0.0}; return;
            case '+': case '-': case '*': case '/': case '^': case '=':
                tok_ = Token{Token::Op, start, std::string(1, c), 0.0};
                return;
            default:
                throw parse_error(std::string("unexpected character '") + c + "'", start);
        }
    }
    const std::string& s_;
    std::size_t i_ = 0;
    Token tok_;
};

struct ParserConfig {
    std::set<std::string> vars;
    bool allow_diff = false;
    std::string indep = "x";
    std::string dep = "u";
};

}  // namespace detail

/// Name of the k-th derivative indeterminate of `dep` ("u'", "u''", ...).
/// Primes cannot be lexed as identifiers, so these never collide with input.
inline std::string deriv_name(const std::string& dep, int k) {
    std::string s = dep;
    s.append(static_cast<std::size_t>(k), '\'');
    return s;
}

namespace detail {

class Parser {
public:
    Parser(const std::string& text, ParserConfig cfg)
        : lex_(text), cfg_(std::move(cfg)) {}

    ExprPtr parse_expression() {
        ExprPtr e = parse_term();
        while (lex_.peek().kind == Token::Op &&
               (lex_.peek().text == "+" || lex_.peek().text == "-")) {
            Token op = lex_.take();
            ExprPtr rhs = parse_term();
            e = op.text == "+" ? add(std::move(e), std::move(rhs))
                               : sub(std::move(e), std::move(rhs));
        }
        return e;
    }

    ExprPtr parse_full() {
        ExprPtr e = parse_expression();
        if (lex_.peek().kind == Token::Op && lex_.peek().text == "=") {
            lex_.take();
            ExprPtr rhs = parse_expression();
            e = sub(std::move(e), std::move(rhs));
        }
        expect_end();
        return e;
    }

    void expect_end() {
        if (lex_.peek().kind != Token::End)
            throw parse_error("unexpected trailing input '" + lex_.peek().text + "'",
                              lex_.peek().pos);
    }

    int max_order = 0;

private:
    ExprPtr parse_term() {
        ExprPtr e = parse_unary();
        while (lex_.peek().kind == Token::Op &&
               (lex_.peek().text == "*" || lex_.peek().text == "/")) {
            Token op = lex_.take();
            ExprPtr rhs = parse_unary();
            e = op.text == "*" ? mul(std::move(e), std::move(rhs))
                               : div(std::move(e), std::move(rhs));
        }
        return e;
    }

    ExprPtr parse_unary() {
        if (lex_.peek().kind == Token::Op && lex_.peek().text == "-") {
            lex_.take();
            return neg(parse_unary());
        }
        if (lex_.peek().kind == Token::Op && lex_.peek().text == "+") {
            lex_.take();
            return parse_unary();
        }
        return parse_power();
    }

    ExprPtr parse_power() {
        ExprPtr base = parse_primary();
        if (lex_.peek().kind == Token::Op && lex_.peek().text == "^") {
            lex_.take();
            int n = parse_int_exponent();
            return pow_int(std::move(base), n);
        }
        return base;
    }

    int parse_int_exponent() {
        bool negate = false;
        bool parens = false;
        if (lex_.peek().kind == Token::LParen) {
            parens = true;
            lex_.take();
        }
        if (lex_.peek().kind == Token::Op &&
            (lex_.peek().text == "-" || lex_.peek().text == "+")) {
            negate = lex_.take().text == "-";
        }
        Token t = lex_.peek();
        if (t.kind != Token::Num ||
            t.text.find_first_not_of("0123456789") != std::string::npos)
            throw parse_error("integer exponent expected", t.pos);
        lex_.take();
        long long v = std::llround(t.value);
        if (v > 1000000) throw parse_error("exponent too large", t.pos);
        if (parens) {
            if (lex_.peek().kind != Token::RParen)
                throw parse_error("expected ')' after exponent", lex_.peek().pos);
            lex_.take();
        }
        return static_cast<int>(negate ? -v : v);
    }

    ExprPtr parse_primary() {
        Token t = lex_.take();
        switch (t.kind) {
            case Token::Num: return constant(t.value);
            case Token::LParen: {
                ExprPtr e = parse_expression();
                if (lex_.peek().kind != Token::RParen)
                    throw parse_error("expected ')'", lex_.peek().pos);
                lex_.take();
                return e;
            }
            case Token::Ident: {
                if (lex_.peek().kind == Token::LParen) return parse_call(t);
                if (!cfg_.vars.count(t.text))
                    throw parse_error("unknown identifier '" + t.text + "'", t.pos);
                return var(t.text);
            }
            default:
                throw parse_error("unexpected token '" + t.text + "'", t.pos);
        }
    }

    ExprPtr parse_call(const Token& name) {
        lex_.take();  // '('
        if (name.text == "diff") {
            if (!cfg_.allow_diff)
                throw parse_error("diff() is not available in this grammar", name.pos);
            Token dep = lex_.take();
            if (dep.kind != Token::Ident || dep.text != cfg_.dep)
                throw parse_error("diff() expects the dependent variable '" + cfg_.dep + "'",
                                  dep.pos);
            if (lex_.peek().kind != Token::Comma)
                throw parse_error("expected ',' in diff()", lex_.peek().pos);
            lex_.take();
            Token ind = lex_.take();
            if (ind.kind != Token::Ident || ind.text != cfg_.indep)
                throw parse_error("diff() expects the independent variable '" + cfg_.indep + "'",
                                  ind.pos);
            int k = 1;
            if (lex_.peek().kind == Token::Comma) {
                lex_.take();
                Token kt = lex_.take();
                if (kt.kind != Token::Num ||
                    kt.text.find_first_not_of("0123456789") != std::string::npos)
                    throw parse_error("derivative order must be a positive integer", kt.pos);
                k = static_cast<int>(std::llround(kt.value));
                if (k < 1 || k > 20)
                    throw parse_error("derivative order out of range", kt.pos);
            }
            if (lex_.peek().kind != Token::RParen)
                throw parse_error("expected ')' in diff()", lex_.peek().pos);
            lex_.take();
            max_order = std::max(max_order, k);
            return var(deriv_name(cfg_.dep, k));
        }
        static const std::map<std::string, FuncKind> kFuncs = {
            {"exp", FuncKind::Exp}, {"ln", FuncKind::Ln},   {"log", FuncKind::Ln},
            {"sin", FuncKind::Sin}, {"cos", FuncKind::Cos}, {"sqrt", FuncKind::Sqrt}};
        auto it = kFuncs.find(name.text);
        if (it == kFuncs.end())
            throw parse_error("unknown function '" + name.text + "'", name.pos);
        ExprPtr arg = parse_expression();
        if (lex_.peek().kind != Token::RParen)
            throw parse_error("expected ')'", lex_.peek().pos);
        lex_.take();
        return fcall(it->second, std::move(arg));
    }

    Lexer lex_;
    ParserConfig cfg_;
};

}  // namespace detail

/// Parses an expression over the declared variables (no diff()).
inline ExprPtr parse(const std::string& text, const std::vector<std::string>& vars) {
    detail::ParserConfig cfg;
    cfg.vars.insert(vars.begin(), vars.end());
    detail::Parser p(text, cfg);
    return p.parse_full();
}

struct ParsedJetExpr {
    ExprPtr expr;
    int max_order = 0;  // highest diff() order encountered
};

/// Parses with the ODE grammar: variables indep/dep plus diff(dep,indep,k)
/// derivative indeterminates. Accepts an optional "= rhs" (moved to the left).
inline ParsedJetExpr parse_jet(const std::string& text, const std::string& indep = "x",
                               const std::string& dep = "u") {
    detail::ParserConfig cfg;
    cfg.vars = {indep, dep};
    cfg.allow_diff = true;
    cfg.indep = indep;
    cfg.dep = dep;
    detail::Parser p(text, cfg);
    ParsedJetExpr out;
    out.expr = p.parse_full();
    out.max_order = p.max_order;
    return out;
}

}  // namespace liesym
