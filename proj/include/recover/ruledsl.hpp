#pragma once
// Failure-rule language: recursive-descent parser with positioned errors,
// canonical printer, validation, and compilation to conjunctive form.
//
// Surface syntax, one stanza per rule (may span lines, '#' comments):
//
//   rule name:
//     Event(?e) & hasAction(?e, ?a)
//     & (ActionWithHeldObject(?a) | NonInteractiveAction(?a))
//     & !(Nothing(?x))
//     -> DroppingObjFailure(?e)
//
// Operator precedence: ! > & > |. Classes are capitalized, predicates and
// constants lower-case, variables carry a '?' sigil.

#include <cctype>
#include <fstream>
#include <map>
#include <memory>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "recover/core.hpp"
#include "recover/kb.hpp"

namespace recover {

struct RuleTerm {
    bool is_var = false;
    std::string name;  // variable name without sigil, or constant text

    static RuleTerm var(std::string n) { return {true, std::move(n)}; }
    static RuleTerm constant(std::string n) { return {false, std::move(n)}; }
    bool operator==(const RuleTerm&) const = default;
    auto operator<=>(const RuleTerm&) const = default;
};

struct RuleAtom {
    enum class Kind : uint8_t { Class, Relation };
    Kind kind = Kind::Class;
    std::string symbol;          // class name or predicate name
    std::vector<RuleTerm> args;  // 1 for class atoms, 2 for relation atoms
    bool operator==(const RuleAtom&) const = default;
    auto operator<=>(const RuleAtom&) const = default;
};

struct RuleExpr {
    enum class Op : uint8_t { Atom, And, Or, Not };
    Op op = Op::Atom;
    RuleAtom atom;                                  // when op == Atom
    std::vector<std::shared_ptr<RuleExpr>> kids;    // And/Or: 2+, Not: 1
};

struct RuleAst {
    std::string name;
    std::string head_class;
    std::string head_var;
    std::shared_ptr<RuleExpr> body;
};

// One conjunctive alternative of a rule body after distributing disjunctions.
struct ConjunctiveRule {
    std::string name;        // source rule name
    std::string head_class;
    std::string head_var;
    std::vector<RuleAtom> positive;
    std::vector<RuleAtom> negated;
};

class RuleSyntaxError : public Error {
public:
    RuleSyntaxError(size_t line, size_t col, const std::string& msg)
        : Error("rule syntax error at " + std::to_string(line) + ":" + std::to_string(col) + ": " + msg),
          line_(line), col_(col) {}
    size_t line() const { return line_; }
    size_t col() const { return col_; }

private:
    size_t line_, col_;
};

namespace ruledsl_detail {

struct Token {
    enum class Kind : uint8_t { Ident, Var, LParen, RParen, Comma, Colon, And, Or, Not, Arrow, End };
    Kind kind;
    std::string text;
    size_t line, col;
};

class Lexer {
public:
    explicit Lexer(const std::string& src) : src_(src) {}

    Token next() {
        skip_ws_and_comments();
        size_t line = line_, col = col_;
        if (pos_ >= src_.size()) return {Token::Kind::End, "", line, col};
        char c = src_[pos_];
        if (c == '(') return make(Token::Kind::LParen, "(");
        if (c == ')') return make(Token::Kind::RParen, ")");
        if (c == ',') return make(Token::Kind::Comma, ",");
        if (c == ':') return make(Token::Kind::Colon, ":");
        if (c == '&') return make(Token::Kind::And, "&");
        if (c == '|') return make(Token::Kind::Or, "|");
        if (c == '!') return make(Token::Kind::Not, "!");
        if (c == '-' && pos_ + 1 < src_.size() && src_[pos_ + 1] == '>') {
            advance();
            advance();
            return {Token::Kind::Arrow, "->", line, col};
        }
        if (c == '?') {
            advance();
            std::string name = read_ident_tail();
            if (name.empty()) throw RuleSyntaxError(line, col, "expected variable name after '?'");
            return {Token::Kind::Var, name, line, col};
        }
        if (std::isalpha(static_cast<unsigned char>(c)) || c == '_') {
            std::string name = read_ident_tail();
            return {Token::Kind::Ident, name, line, col};
        }
        throw RuleSyntaxError(line, col, std::string("unexpected character '") + c + "'");
    }

private:
    Token make(Token::Kind k, std::string t) {
        Token tok{k, std::move(t), line_, col_};
        advance();
        return tok;
    }

    void advance() {
        if (pos_ < src_.size()) {
            if (src_[pos_] == '\n') {
                ++line_;
                col_ = 1;
            } else {
                ++col_;
            }
            ++pos_;
        }
    }

    void skip_ws_and_comments() {
        while (pos_ < src_.size()) {
            char c = src_[pos_];
            if (c == '#') {
                while (pos_ < src_.size() && src_[pos_] != '\n') advance();
            } else if (std::isspace(static_cast<unsigned char>(c))) {
                advance();
            } else {
                break;
            }
        }
    }

    std::string read_ident_tail() {
        std::string out;
        while (pos_ < src_.size()) {
            char c = src_[pos_];
            bool ident_char = std::isalnum(static_cast<unsigned char>(c)) || c == '_' ||
                              (c == '-' && !(pos_ + 1 < src_.size() && src_[pos_ + 1] == '>'));
            if (!ident_char) break;
            out += c;
            advance();
        }
        return out;
    }

    const std::string& src_;
    size_t pos_ = 0, line_ = 1, col_ = 1;
};

}  // namespace ruledsl_detail

class RuleParser {
public:
    explicit RuleParser(const std::string& source) : lexer_(source) { bump(); }

    // Parses every `rule ...` stanza in the source.
    std::vector<RuleAst> parse_file() {
        std::vector<RuleAst> out;
        while (cur_.kind != Tok::Kind::End) out.push_back(parse_rule_stanza());
        return out;
    }

    RuleAst parse_rule_stanza() {
        expect_keyword("rule");
        RuleAst ast;
        ast.name = expect(Tok::Kind::Ident, "rule name").text;
        expect(Tok::Kind::Colon, "':'");
        ast.body = parse_or();
        expect(Tok::Kind::Arrow, "'->'");
        Tok head = expect(Tok::Kind::Ident, "head class");
        if (!std::isupper(static_cast<unsigned char>(head.text[0])))
            throw RuleSyntaxError(head.line, head.col, "head must be a capitalized failure class");
        ast.head_class = head.text;
        expect(Tok::Kind::LParen, "'('");
        ast.head_var = expect(Tok::Kind::Var, "head variable").text;
        expect(Tok::Kind::RParen, "')'");
        return ast;
    }

private:
    using Tok = ruledsl_detail::Token;

    std::shared_ptr<RuleExpr> parse_or() {
        auto left = parse_and();
        while (cur_.kind == Tok::Kind::Or) {
            bump();
            auto node = std::make_shared<RuleExpr>();
            node->op = RuleExpr::Op::Or;
            node->kids = {left, parse_and()};
            left = node;
        }
        return left;
    }

    std::shared_ptr<RuleExpr> parse_and() {
        auto left = parse_unary();
        while (cur_.kind == Tok::Kind::And) {
            bump();
            auto node = std::make_shared<RuleExpr>();
            node->op = RuleExpr::Op::And;
            node->kids = {left, parse_unary()};
            left = node;
        }
        return left;
    }

    std::shared_ptr<RuleExpr> parse_unary() {
        if (cur_.kind == Tok::Kind::Not) {
            bump();
            auto node = std::make_shared<RuleExpr>();
            node->op = RuleExpr::Op::Not;
            node->kids = {parse_unary()};
            return node;
        }
        if (cur_.kind == Tok::Kind::LParen) {
            bump();
            auto inner = parse_or();
            expect(Tok::Kind::RParen, "')'");
            return inner;
        }
        return parse_atom();
    }

    std::shared_ptr<RuleExpr> parse_atom() {
        Tok sym = expect(Tok::Kind::Ident, "class or predicate name");
        expect(Tok::Kind::LParen, "'('");
        auto node = std::make_shared<RuleExpr>();
        node->op = RuleExpr::Op::Atom;
        node->atom.symbol = sym.text;
        node->atom.args.push_back(parse_term());
        if (cur_.kind == Tok::Kind::Comma) {
            bump();
            node->atom.args.push_back(parse_term());
        }
        expect(Tok::Kind::RParen, "')'");
        bool capitalized = std::isupper(static_cast<unsigned char>(sym.text[0])) != 0;
        if (node->atom.args.size() == 1) {
            if (!capitalized)
                throw RuleSyntaxError(sym.line, sym.col, "unary atom must name a capitalized class: " + sym.text);
            node->atom.kind = RuleAtom::Kind::Class;
        } else {
            if (capitalized)
                throw RuleSyntaxError(sym.line, sym.col, "binary atom must name a lower-case predicate: " + sym.text);
            node->atom.kind = RuleAtom::Kind::Relation;
        }
        return node;
    }

    RuleTerm parse_term() {
        if (cur_.kind == Tok::Kind::Var) {
            RuleTerm t = RuleTerm::var(cur_.text);
            bump();
            return t;
        }
        Tok tok = expect(Tok::Kind::Ident, "term");
        return RuleTerm::constant(tok.text);
    }

    void expect_keyword(const std::string& kw) {
        if (cur_.kind != Tok::Kind::Ident || cur_.text != kw)
            throw RuleSyntaxError(cur_.line, cur_.col, "expected '" + kw + "'");
        bump();
    }

    Tok expect(Tok::Kind k, const std::string& what) {
        if (cur_.kind != k)
            throw RuleSyntaxError(cur_.line, cur_.col, "expected " + what + ", got '" + cur_.text + "'");
        Tok t = cur_;
        bump();
        return t;
    }

    void bump() { cur_ = lexer_.next(); }

    ruledsl_detail::Lexer lexer_;
    Tok cur_{Tok::Kind::End, "", 0, 0};
};

inline std::vector<RuleAst> parse_rules(const std::string& source) {
    return RuleParser(source).parse_file();
}

inline std::vector<RuleAst> load_rules(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw Error("cannot open rule file " + path);
    std::stringstream ss;
    ss << in.rdbuf();
    return parse_rules(ss.str());
}

// ---- canonical printer ----

inline void print_expr(std::ostream& os, const RuleExpr& e) {
    switch (e.op) {
        case RuleExpr::Op::Atom: {
            os << e.atom.symbol << '(';
            for (size_t i = 0; i < e.atom.args.size(); ++i) {
                if (i) os << ", ";
                const auto& t = e.atom.args[i];
                os << (t.is_var ? "?" + t.name : t.name);
            }
            os << ')';
            break;
        }
        case RuleExpr::Op::Not:
            os << "!(";
            print_expr(os, *e.kids[0]);
            os << ')';
            break;
        case RuleExpr::Op::And:
        case RuleExpr::Op::Or: {
            const char* sep = e.op == RuleExpr::Op::And ? " & " : " | ";
            os << '(';
            for (size_t i = 0; i < e.kids.size(); ++i) {
                if (i) os << sep;
                print_expr(os, *e.kids[i]);
            }
            os << ')';
            break;
        }
    }
}

inline std::string print_rule(const RuleAst& r) {
    std::ostringstream os;
    os << "rule " << r.name << ": ";
    print_expr(os, *r.body);
    os << " -> " << r.head_class << "(?" << r.head_var << ")";
    return os.str();
}

// ---- compilation to conjunctive rules ----

namespace ruledsl_detail {

// Negation-normal form: push Not down to atoms (classic De Morgan walk).
struct NnfLiteral {
    bool negated = false;
    RuleAtom atom;
};
using NnfClause = std::vector<NnfLiteral>;  // conjunction

inline std::vector<NnfClause> to_dnf(const RuleExpr& e, bool negated) {
    switch (e.op) {
        case RuleExpr::Op::Atom:
            return {{NnfLiteral{negated, e.atom}}};
        case RuleExpr::Op::Not:
            return to_dnf(*e.kids[0], !negated);
        case RuleExpr::Op::And:
        case RuleExpr::Op::Or: {
            bool is_or = (e.op == RuleExpr::Op::Or) != negated;  // De Morgan under negation
            if (is_or) {
                std::vector<NnfClause> out;
                for (const auto& k : e.kids) {
                    auto sub = to_dnf(*k, negated);
                    out.insert(out.end(), sub.begin(), sub.end());
                }
                return out;
            }
            std::vector<NnfClause> acc{{}};
            for (const auto& k : e.kids) {
                auto sub = to_dnf(*k, negated);
                std::vector<NnfClause> next;
                for (const auto& a : acc)
                    for (const auto& b : sub) {
                        NnfClause merged = a;
                        merged.insert(merged.end(), b.begin(), b.end());
                        next.push_back(std::move(merged));
                    }
                acc = std::move(next);
            }
            return acc;
        }
    }
    return {};
}

}  // namespace ruledsl_detail

// Distributes disjunctions; the evaluator only ever sees conjunctions with
// negated atoms.
inline std::vector<ConjunctiveRule> compile_rule(const RuleAst& ast) {
    std::vector<ConjunctiveRule> out;
    for (const auto& clause : ruledsl_detail::to_dnf(*ast.body, false)) {
        ConjunctiveRule c;
        c.name = ast.name;
        c.head_class = ast.head_class;
        c.head_var = ast.head_var;
        for (const auto& lit : clause)
            (lit.negated ? c.negated : c.positive).push_back(lit.atom);
        out.push_back(std::move(c));
    }
    return out;
}

// ---- validation ----

inline std::set<std::string> atom_vars(const RuleAtom& a) {
    std::set<std::string> out;
    for (const auto& t : a.args)
        if (t.is_var) out.insert(t.name);
    return out;
}

// Throws on: unknown class/predicate, head not under Failure, head variable
// not positively bound, unsafe negation.
inline void validate_rule(const RuleAst& ast, const KnowledgeBase& kb) {
    std::vector<const RuleAtom*> atoms;
    std::vector<std::shared_ptr<RuleExpr>> stack{ast.body};
    while (!stack.empty()) {
        auto e = stack.back();
        stack.pop_back();
        if (e->op == RuleExpr::Op::Atom)
            atoms.push_back(&e->atom);
        else
            for (const auto& k : e->kids) stack.push_back(k);
    }
    for (const auto* a : atoms) {
        if (a->kind == RuleAtom::Kind::Class) {
            if (!kb.taxonomy().has_class(a->symbol))
                throw Error("rule " + ast.name + ": unknown class " + a->symbol);
        } else if (!kb.has_predicate(a->symbol)) {
            throw Error("rule " + ast.name + ": unknown predicate " + a->symbol);
        }
    }
    if (!kb.taxonomy().has_class(ast.head_class) || !kb.taxonomy().subsumes("Failure", ast.head_class))
        throw Error("rule " + ast.name + ": head " + ast.head_class + " is not a Failure subclass");

    for (const auto& conj : compile_rule(ast)) {
        std::set<std::string> positive_vars;
        for (const auto& a : conj.positive) {
            auto vs = atom_vars(a);
            positive_vars.insert(vs.begin(), vs.end());
        }
        if (!positive_vars.count(ast.head_var))
            throw Error("rule " + ast.name + ": head variable ?" + ast.head_var +
                        " does not occur positively in every body alternative");
        for (const auto& a : conj.negated)
            for (const auto& v : atom_vars(a))
                if (!positive_vars.count(v))
                    throw Error("rule " + ast.name + ": unsafe negation, variable ?" + v +
                                " is not bound by a positive atom");
    }
}

// Per-failure-class coverage over the corpus of implemented failure types.
struct CorpusReport {
    std::map<std::string, int> rules_per_class;  // implemented class -> rule count
    std::vector<std::string> uncovered;
    bool ok() const { return uncovered.empty(); }
};

inline const std::vector<std::string>& implemented_failure_classes() {
    static const std::vector<std::string> classes = {
        "EnclosedObjectFailure",
        "DroppingObjFailure",
        "DroppingAndDirtyObjFailure",
        "DroppingAndBreakingObjFailure",
        "DirtyObjFailure",
        "OccupiedPutFailure",
        "PlanningFailure",
        "ActionExecutionFailure",
        "DietaryConstraintsViolationFailure",
        "OccupiedByLiquidFailure",
        "MissingNavigationFailure",
        "SafetyFailure",
    };
    return classes;
}

inline CorpusReport validate_corpus(const std::vector<RuleAst>& rules, const KnowledgeBase& kb) {
    CorpusReport report;
    for (const auto& cls : implemented_failure_classes()) report.rules_per_class[cls] = 0;
    for (const auto& r : rules) {
        validate_rule(r, kb);
        auto it = report.rules_per_class.find(r.head_class);
        if (it != report.rules_per_class.end()) ++it->second;
    }
    for (const auto& [cls, n] : report.rules_per_class)
        if (n == 0) report.uncovered.push_back(cls);
    return report;
}

}  // namespace recover
