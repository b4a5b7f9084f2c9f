#pragma once
// Rule evaluation over the knowledge base: the production path compiles
// rules to conjunctive form and runs index-backed joins scoped to one event;
// the brute-force path walks the raw expression tree scanning the whole
// store, and exists as an independent test oracle.

#include <algorithm>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "recover/kb.hpp"
#include "recover/ruledsl.hpp"

namespace recover {

struct FailureFinding {
    std::string failure_class;
    std::string event;
    std::map<std::string, std::string> bindings;  // variable -> term text
    std::string rule_name;

    auto operator<=>(const FailureFinding&) const = default;
};

struct Verdict {
    std::vector<FailureFinding> findings;  // sorted by (rule_name, bindings)
    bool success() const { return findings.empty(); }
};

namespace reasoner_detail {

using VarBinding = std::map<std::string, Term>;

inline bool term_matches(const RuleTerm& rt, const Term& actual, VarBinding& b) {
    if (!rt.is_var) return actual.text == rt.name && !actual.is_class();
    auto it = b.find(rt.name);
    if (it != b.end()) return it->second == actual;
    b.emplace(rt.name, actual);
    return true;
}

// All extensions of `b` satisfying a positive atom.
inline std::vector<VarBinding> match_atom(const KnowledgeBase& kb, const RuleAtom& atom, const VarBinding& b) {
    std::vector<VarBinding> out;
    if (atom.kind == RuleAtom::Kind::Class) {
        const RuleTerm& t = atom.args[0];
        auto bound = [&]() -> std::optional<Term> {
            if (!t.is_var) return Term::entity(t.name);
            auto it = b.find(t.name);
            if (it != b.end()) return it->second;
            return std::nullopt;
        }();
        if (bound) {
            if (bound->is_entity() && kb.has_entity(bound->text) && kb.is_instance(bound->text, atom.symbol))
                out.push_back(b);
            return out;
        }
        for (const auto& e : kb.instances_of(atom.symbol)) {
            VarBinding nb = b;
            nb.emplace(t.name, Term::entity(e));
            out.push_back(std::move(nb));
        }
        return out;
    }

    TriplePattern p;
    p.predicate_term = PatternTerm::constant(Term::literal(atom.symbol));
    auto to_pattern = [&](const RuleTerm& rt) -> PatternTerm {
        if (rt.is_var) {
            auto it = b.find(rt.name);
            if (it != b.end()) return PatternTerm::constant(it->second);
            return PatternTerm::variable(rt.name);
        }
        // Constants may denote entities or literals; resolve against the kb.
        if (kb.has_entity(rt.name)) return PatternTerm::constant(Term::entity(rt.name));
        return PatternTerm::constant(Term::literal(rt.name));
    };
    p.subject = to_pattern(atom.args[0]);
    p.object = to_pattern(atom.args[1]);
    // A repeated fresh variable (p(?x, ?x)) needs the query-level equality.
    for (const auto& match : kb.query(p)) {
        VarBinding nb = b;
        bool ok = true;
        for (const auto& [var, term] : match) {
            auto [it, inserted] = nb.emplace(var, term);
            if (!inserted && it->second != term) ok = false;
        }
        if (ok) out.push_back(std::move(nb));
    }
    return out;
}

// Rough candidate count used for greedy join ordering.
inline size_t estimate(const KnowledgeBase& kb, const RuleAtom& atom, const std::set<std::string>& bound) {
    if (atom.kind == RuleAtom::Kind::Class) {
        const RuleTerm& t = atom.args[0];
        if (!t.is_var || bound.count(t.name)) return 1;
        return kb.instances_of(atom.symbol).size() + 1;
    }
    size_t anchored = 0;
    for (const auto& a : atom.args)
        if (!a.is_var || bound.count(a.name)) ++anchored;
    TriplePattern p;
    p.subject = PatternTerm::variable("s");
    p.predicate_term = PatternTerm::constant(Term::literal(atom.symbol));
    p.object = PatternTerm::variable("o");
    size_t pred_count = kb.query(p).size() + 1;
    if (anchored == 2) return 1;
    if (anchored == 1) return pred_count / 4 + 1;
    return pred_count;
}

inline bool atom_ground(const RuleAtom& atom, const VarBinding& b) {
    for (const auto& a : atom.args)
        if (a.is_var && !b.count(a.name)) return false;
    return true;
}

inline void solve_conjunct(const KnowledgeBase& kb, std::vector<RuleAtom> positive,
                           const std::vector<RuleAtom>& negated, VarBinding binding,
                           std::vector<VarBinding>& out) {
    if (positive.empty()) {
        for (const auto& n : negated)
            if (!match_atom(kb, n, binding).empty()) return;
        out.push_back(std::move(binding));
        return;
    }
    std::set<std::string> bound;
    for (const auto& [v, _] : binding) bound.insert(v);
    size_t best = 0;
    size_t best_cost = SIZE_MAX;
    for (size_t i = 0; i < positive.size(); ++i) {
        size_t c = estimate(kb, positive[i], bound);
        if (c < best_cost) {
            best_cost = c;
            best = i;
        }
    }
    RuleAtom chosen = positive[best];
    positive.erase(positive.begin() + static_cast<long>(best));
    // Negations whose variables are fully bound prune early.
    for (const auto& n : negated)
        if (atom_ground(n, binding) && !match_atom(kb, n, binding).empty()) return;
    for (auto& nb : match_atom(kb, chosen, binding))
        solve_conjunct(kb, positive, negated, std::move(nb), out);
}

inline FailureFinding to_finding(const ConjunctiveRule& rule, const std::string& event, const VarBinding& b) {
    FailureFinding f;
    f.failure_class = rule.head_class;
    f.event = event;
    f.rule_name = rule.name;
    for (const auto& [var, term] : b) f.bindings[var] = term.text;
    return f;
}

}  // namespace reasoner_detail

// Production evaluator. The rule's event variable is bound to scope_event
// first; negation reads closed-world against the asserted store.
inline Verdict evaluate(const KnowledgeBase& kb, const std::vector<RuleAst>& rules,
                        const std::string& scope_event) {
    Verdict v;
    for (const auto& ast : rules) {
        for (const auto& conj : compile_rule(ast)) {
            reasoner_detail::VarBinding seed;
            seed.emplace(conj.head_var, Term::entity(scope_event));
            std::vector<reasoner_detail::VarBinding> sols;
            reasoner_detail::solve_conjunct(kb, conj.positive, conj.negated, seed, sols);
            for (const auto& s : sols) v.findings.push_back(reasoner_detail::to_finding(conj, scope_event, s));
        }
    }
    std::sort(v.findings.begin(), v.findings.end(), [](const FailureFinding& a, const FailureFinding& b) {
        if (a.rule_name != b.rule_name) return a.rule_name < b.rule_name;
        if (a.bindings != b.bindings) return a.bindings < b.bindings;
        return a.failure_class < b.failure_class;
    });
    v.findings.erase(std::unique(v.findings.begin(), v.findings.end()), v.findings.end());
    return v;
}

// Test oracle: direct tree-walking evaluation, no indexes, no join ordering,
// no disjunction compilation. Only valid on small stores.
inline Verdict evaluate_bruteforce(const KnowledgeBase& kb, const std::vector<RuleAst>& rules,
                                   const std::string& scope_event, size_t max_triples = 200) {
    if (kb.size() > max_triples)
        throw Error("evaluate_bruteforce: store exceeds " + std::to_string(max_triples) + " triples");

    using reasoner_detail::VarBinding;

    // Returns bindings extending `b` that satisfy the expression. Negation is
    // delayed until its variables are ground, mirroring safe evaluation.
    struct Walker {
        const KnowledgeBase& kb;

        std::vector<VarBinding> solve(const RuleExpr& e, const VarBinding& b) const {
            switch (e.op) {
                case RuleExpr::Op::Atom:
                    return match_scan(e.atom, b);
                case RuleExpr::Op::Or: {
                    std::vector<VarBinding> out;
                    for (const auto& k : e.kids) {
                        auto sub = solve(*k, b);
                        out.insert(out.end(), sub.begin(), sub.end());
                    }
                    return out;
                }
                case RuleExpr::Op::And: {
                    std::vector<const RuleExpr*> conj;
                    flatten(e, conj);
                    return solve_conj(conj, b);
                }
                case RuleExpr::Op::Not: {
                    if (solve(*e.kids[0], b).empty()) return {b};
                    return {};
                }
            }
            return {};
        }

        static void flatten(const RuleExpr& e, std::vector<const RuleExpr*>& out) {
            if (e.op == RuleExpr::Op::And) {
                for (const auto& k : e.kids) flatten(*k, out);
            } else {
                out.push_back(&e);
            }
        }

        static bool expr_ground(const RuleExpr& e, const VarBinding& b) {
            if (e.op == RuleExpr::Op::Atom) {
                for (const auto& a : e.atom.args)
                    if (a.is_var && !b.count(a.name)) return false;
                return true;
            }
            for (const auto& k : e.kids)
                if (!expr_ground(*k, b)) return false;
            return true;
        }

        std::vector<VarBinding> solve_conj(std::vector<const RuleExpr*> parts, const VarBinding& b) const {
            if (parts.empty()) return {b};
            // Pick the first part that is not a negation, or a negation that
            // is already ground; safety validation guarantees progress.
            size_t pick = parts.size();
            for (size_t i = 0; i < parts.size(); ++i) {
                if (parts[i]->op != RuleExpr::Op::Not) {
                    pick = i;
                    break;
                }
                if (expr_ground(*parts[i]->kids[0], b)) {
                    pick = i;
                    break;
                }
            }
            if (pick == parts.size()) pick = 0;  // all-negative fallback
            const RuleExpr* chosen = parts[pick];
            parts.erase(parts.begin() + static_cast<long>(pick));
            std::vector<VarBinding> out;
            for (const auto& nb : solve(*chosen, b)) {
                auto sub = solve_conj(parts, nb);
                out.insert(out.end(), sub.begin(), sub.end());
            }
            return out;
        }

        // Plain scan over every triple / every entity.
        std::vector<VarBinding> match_scan(const RuleAtom& atom, const VarBinding& b) const {
            std::vector<VarBinding> out;
            if (atom.kind == RuleAtom::Kind::Class) {
                const RuleTerm& t = atom.args[0];
                if (!t.is_var) {
                    if (kb.has_entity(t.name) && kb.is_instance(t.name, atom.symbol)) out.push_back(b);
                    return out;
                }
                auto it = b.find(t.name);
                if (it != b.end()) {
                    if (it->second.is_entity() && kb.has_entity(it->second.text) &&
                        kb.is_instance(it->second.text, atom.symbol))
                        out.push_back(b);
                    return out;
                }
                for (const auto& e : kb.entities())
                    if (kb.is_instance(e, atom.symbol)) {
                        VarBinding nb = b;
                        nb.emplace(t.name, Term::entity(e));
                        out.push_back(std::move(nb));
                    }
                return out;
            }
            for (const auto& trp : kb.triples()) {
                if (trp.predicate != atom.symbol) continue;
                VarBinding nb = b;
                if (!reasoner_detail::term_matches(atom.args[0], trp.subject, nb)) continue;
                if (!reasoner_detail::term_matches(atom.args[1], trp.object, nb)) continue;
                out.push_back(std::move(nb));
            }
            return out;
        }
    };

    Walker w{kb};
    Verdict v;
    for (const auto& ast : rules) {
        VarBinding seed;
        seed.emplace(ast.head_var, Term::entity(scope_event));
        for (const auto& sol : w.solve(*ast.body, seed)) {
            FailureFinding f;
            f.failure_class = ast.head_class;
            f.event = scope_event;
            f.rule_name = ast.name;
            for (const auto& [var, term] : sol) f.bindings[var] = term.text;
            v.findings.push_back(std::move(f));
        }
    }
    std::sort(v.findings.begin(), v.findings.end(), [](const FailureFinding& a, const FailureFinding& b) {
        if (a.rule_name != b.rule_name) return a.rule_name < b.rule_name;
        if (a.bindings != b.bindings) return a.bindings < b.bindings;
        return a.failure_class < b.failure_class;
    });
    v.findings.erase(std::unique(v.findings.begin(), v.findings.end()), v.findings.end());
    return v;
}

// The object a finding is about: the binding named ?obj when present,
// otherwise the first physical, non-gripper entity among the bindings.
inline std::string salient_object(const FailureFinding& f, const KnowledgeBase& kb) {
    auto physical = [&](const std::string& id) {
        return kb.has_entity(id) && kb.is_instance(id, "PhysicalObject") && !kb.is_instance(id, "RobotGripper") &&
               !kb.is_instance(id, "Robot");
    };
    auto it = f.bindings.find("obj");
    if (it != f.bindings.end() && physical(it->second)) return it->second;
    for (const auto& [var, val] : f.bindings)
        if (physical(val)) return val;
    return "";
}

// Recovery order: most-specific failure class first (deepest below Failure),
// depth ties broken by rule name, then bindings.
inline std::vector<FailureFinding> by_specificity(std::vector<FailureFinding> findings,
                                                  const KnowledgeBase& kb) {
    std::sort(findings.begin(), findings.end(), [&](const FailureFinding& a, const FailureFinding& b) {
        int da = kb.taxonomy().depth_below(a.failure_class, "Failure");
        int db = kb.taxonomy().depth_below(b.failure_class, "Failure");
        if (da != db) return da > db;
        if (a.rule_name != b.rule_name) return a.rule_name < b.rule_name;
        return a.bindings < b.bindings;
    });
    return findings;
}

}  // namespace recover
