#pragma once
// In-memory triple store with a class taxonomy, subsumption-aware pattern
// queries, and the line-oriented OntoThor schema loader.

#include <fstream>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include "recover/core.hpp"
#include "recover/text.hpp"

namespace recover {

// Subclass edges plus unary property axioms (Mug => Fillable). Both edge
// kinds feed the same implication closure; axioms are tracked separately so
// the property vocabulary stays inspectable.
class Taxonomy {
public:
    void add_class(const std::string& name) { parents_.try_emplace(name); }

    bool has_class(const std::string& name) const { return parents_.count(name) > 0; }

    void add_subclass(const std::string& child, const std::string& parent) {
        add_class(child);
        add_class(parent);
        parents_[child].insert(parent);
        closure_.clear();
    }

    void add_axiom(const std::string& cls, const std::string& property) {
        add_class(cls);
        add_class(property);
        parents_[cls].insert(property);
        axioms_.insert({cls, property});
        closure_.clear();
    }

    const std::set<std::pair<std::string, std::string>>& axioms() const { return axioms_; }

    // Reflexive-transitive closure of the implication edges.
    const std::set<std::string>& ancestors(const std::string& cls) const {
        auto it = closure_.find(cls);
        if (it != closure_.end()) return it->second;
        std::set<std::string> acc;
        std::vector<std::string> stack{cls};
        while (!stack.empty()) {
            std::string cur = stack.back();
            stack.pop_back();
            if (!acc.insert(cur).second) continue;
            auto pit = parents_.find(cur);
            if (pit == parents_.end()) continue;
            for (const auto& p : pit->second) stack.push_back(p);
        }
        return closure_.emplace(cls, std::move(acc)).first->second;
    }

    bool subsumes(const std::string& ancestor, const std::string& descendant) const {
        if (!has_class(ancestor) || !has_class(descendant)) return false;
        return ancestors(descendant).count(ancestor) > 0;
    }

    // All classes whose closure reaches `cls` (cls included).
    std::vector<std::string> descendants(const std::string& cls) const {
        std::vector<std::string> out;
        for (const auto& [name, _] : parents_)
            if (ancestors(name).count(cls)) out.push_back(name);
        std::sort(out.begin(), out.end());
        return out;
    }

    // Longest subclass-edge distance below `root`; 0 for root itself,
    // -1 when the class does not reach root at all.
    int depth_below(const std::string& cls, const std::string& root) const {
        if (cls == root) return 0;
        auto pit = parents_.find(cls);
        if (pit == parents_.end()) return -1;
        int best = -1;
        for (const auto& p : pit->second) {
            int d = depth_below(p, root);
            if (d >= 0) best = std::max(best, d + 1);
        }
        return best;
    }

    // Throws naming a class on a cycle, if any.
    void check_acyclic() const {
        std::unordered_map<std::string, int> state;  // 0 new, 1 open, 2 done
        for (const auto& [name, _] : parents_) visit(name, state);
    }

    std::vector<std::string> all_classes() const {
        std::vector<std::string> out;
        out.reserve(parents_.size());
        for (const auto& [name, _] : parents_) out.push_back(name);
        std::sort(out.begin(), out.end());
        return out;
    }

private:
    void visit(const std::string& cls, std::unordered_map<std::string, int>& state) const {
        int& st = state[cls];
        if (st == 2) return;
        if (st == 1) throw Error("taxonomy cycle through class " + cls);
        st = 1;
        auto pit = parents_.find(cls);
        if (pit != parents_.end())
            for (const auto& p : pit->second) visit(p, state);
        st = 2;
    }

    std::map<std::string, std::set<std::string>> parents_;
    std::set<std::pair<std::string, std::string>> axioms_;
    mutable std::map<std::string, std::set<std::string>> closure_;
};

// A schema-declared recovery strategy stanza. Interpretation lives in
// recovery.hpp; the raw declaration is kept on the knowledge base so the
// whole corpus loads from one file.
struct StrategyDecl {
    std::string id;
    std::string failure_class;
    std::vector<std::string> guard_classes;  // all must subsume the salient object
    int priority = 0;
    std::string instruction;  // may contain {object} / {failure} placeholders
};

// A query pattern position: either a constant term or a ?variable.
struct PatternTerm {
    bool is_var = false;
    std::string var;  // without the '?'
    Term term;

    static PatternTerm variable(std::string name) {
        PatternTerm p;
        p.is_var = true;
        p.var = std::move(name);
        return p;
    }
    static PatternTerm constant(Term t) {
        PatternTerm p;
        p.term = std::move(t);
        return p;
    }
};

struct TriplePattern {
    PatternTerm subject, predicate_term, object;
    // Optional class constraints: var name -> required class (subsumption).
    std::map<std::string, std::string> class_constraints;
};

using Binding = std::map<std::string, Term>;

class KnowledgeBase {
public:
    // ---- vocabulary ----

    void declare_predicate(const std::string& name) { predicates_.insert(name); }
    void declare_relation(const std::string& name) {
        relations_.insert(name);
        predicates_.insert(name);
    }
    void declare_sound_class(const std::string& name) { sound_classes_.insert(name); }

    bool has_predicate(const std::string& name) const { return predicates_.count(name) > 0; }
    const std::set<std::string>& relations() const { return relations_; }
    const std::set<std::string>& sound_classes() const { return sound_classes_; }

    Taxonomy& taxonomy() { return taxonomy_; }
    const Taxonomy& taxonomy() const { return taxonomy_; }

    // ---- entities ----

    void declare_entity(const std::string& id, const std::string& cls) {
        if (id.empty()) throw VocabularyError("empty entity id");
        if (!taxonomy_.has_class(cls)) throw VocabularyError("unknown class " + cls + " for entity " + id);
        entity_classes_[id];  // ensure registered even before the type triple lands
        assert_triple({Term::entity(id), "type", Term::cls(cls)});
    }

    bool has_entity(const std::string& id) const { return entity_classes_.count(id) > 0; }

    const std::set<std::string>& types_of(const std::string& entity) const {
        static const std::set<std::string> empty;
        auto it = entity_classes_.find(entity);
        return it == entity_classes_.end() ? empty : it->second;
    }

    std::vector<std::string> entities() const {
        std::vector<std::string> out;
        out.reserve(entity_classes_.size());
        for (const auto& [id, _] : entity_classes_) out.push_back(id);
        return out;
    }

    // All entities whose asserted type closure reaches cls, sorted.
    std::vector<std::string> instances_of(const std::string& cls) const {
        std::vector<std::string> out;
        for (const auto& [id, types] : entity_classes_)
            for (const auto& t : types)
                if (taxonomy_.subsumes(cls, t)) {
                    out.push_back(id);
                    break;
                }
        return out;
    }

    // ---- assertion and lookup ----

    // Idempotent insert; validates vocabulary membership.
    void assert_triple(const Triple& t) {
        if (!has_predicate(t.predicate)) throw VocabularyError("unknown predicate " + t.predicate);
        if (!t.subject.is_entity()) throw VocabularyError("triple subject must be an entity: " + t.subject.text);
        if (t.predicate == "type") {
            if (!t.object.is_class()) throw VocabularyError("type object must be a class: " + t.object.text);
            if (!taxonomy_.has_class(t.object.text)) throw VocabularyError("unknown class " + t.object.text);
        } else if (t.object.is_class()) {
            throw VocabularyError("class term outside type assertion: " + t.object.text);
        }
        if (t.object.is_entity() && !has_entity(t.object.text) && t.object.text != t.subject.text)
            throw VocabularyError("unknown entity in object position: " + t.object.text);
        if (!has_entity(t.subject.text) && t.predicate != "type")
            throw VocabularyError("unknown entity in subject position: " + t.subject.text);

        if (!triple_set_.insert(t).second) return;
        size_t idx = triples_.size();
        triples_.push_back(t);
        by_subject_[t.subject.text].push_back(idx);
        by_predicate_[t.predicate].push_back(idx);
        by_object_[t.object.text].push_back(idx);
        if (t.predicate == "type") entity_classes_[t.subject.text].insert(t.object.text);
    }

    bool contains(const Triple& t) const { return triple_set_.count(t) > 0; }
    size_t size() const { return triples_.size(); }
    const std::vector<Triple>& triples() const { return triples_; }

    bool is_instance(const std::string& entity, const std::string& cls) const {
        auto it = entity_classes_.find(entity);
        if (it == entity_classes_.end()) throw VocabularyError("unknown entity " + entity);
        if (!taxonomy_.has_class(cls)) throw VocabularyError("unknown class " + cls);
        for (const auto& t : it->second)
            if (taxonomy_.subsumes(cls, t)) return true;
        return false;
    }

    // All bindings of the pattern's variables against the store. Results are
    // sorted and duplicate-free, so they do not depend on insertion order.
    std::vector<Binding> query(const TriplePattern& p) const {
        std::vector<Binding> out;
        const std::vector<size_t>* candidates = nullptr;
        if (!p.subject.is_var) {
            auto it = by_subject_.find(p.subject.term.text);
            candidates = it == by_subject_.end() ? &empty_index_ : &it->second;
        } else if (!p.object.is_var) {
            auto it = by_object_.find(p.object.term.text);
            candidates = it == by_object_.end() ? &empty_index_ : &it->second;
        } else if (!p.predicate_term.is_var) {
            auto it = by_predicate_.find(p.predicate_term.term.text);
            candidates = it == by_predicate_.end() ? &empty_index_ : &it->second;
        }

        auto try_match = [&](const Triple& t) {
            Binding b;
            if (!match_pos(p.subject, t.subject, b)) return;
            if (!match_pos(p.predicate_term, Term::literal(t.predicate), b)) return;
            if (!match_pos(p.object, t.object, b)) return;
            for (const auto& [var, cls] : p.class_constraints) {
                auto it = b.find(var);
                if (it == b.end()) continue;
                if (!it->second.is_entity()) return;
                if (!has_entity(it->second.text)) return;
                if (!is_instance(it->second.text, cls)) return;
            }
            out.push_back(std::move(b));
        };

        if (candidates) {
            for (size_t idx : *candidates) try_match(triples_[idx]);
        } else {
            for (const auto& t : triples_) try_match(t);
        }
        std::sort(out.begin(), out.end());
        out.erase(std::unique(out.begin(), out.end()), out.end());
        return out;
    }

    const std::vector<StrategyDecl>& strategies() const { return strategies_; }

    // ---- schema file ----

    // Grammar, one directive per line ('#' comments):
    //   class Name [< Parent [< GrandParent ...]]
    //   axiom Class => Property
    //   predicate name
    //   relation name
    //   sound Name < ParentSound
    //   strategy <id> for <Class> [when <Class> [& <Class>]*] priority <n>: "<text>"
    void load_schema(const std::string& path) {
        std::ifstream in(path);
        if (!in) throw Error("cannot open schema file " + path);
        std::string line;
        size_t lineno = 0;
        while (std::getline(in, line)) {
            ++lineno;
            auto hash = line.find('#');
            if (hash != std::string::npos) line = line.substr(0, hash);
            line = text::trim(line);
            if (line.empty()) continue;
            try {
                parse_schema_line(line);
            } catch (const ParseError&) {
                throw;
            } catch (const std::exception& e) {
                throw ParseError(path, lineno, e.what());
            }
        }
        taxonomy_.check_acyclic();
        for (const auto& s : strategies_) {
            if (!taxonomy_.subsumes("Failure", s.failure_class))
                throw Error("strategy " + s.id + " targets non-failure class " + s.failure_class);
        }
    }

    // ---- snapshot dump/load: one `subject predicate object` per line ----

    void dump_snapshot(std::ostream& os) const {
        std::vector<Triple> sorted = triples_;
        std::sort(sorted.begin(), sorted.end());
        for (const auto& t : sorted) os << t << '\n';
    }

    void load_snapshot(std::istream& is) {
        std::vector<std::vector<std::string>> rows;
        std::string line;
        size_t lineno = 0;
        while (std::getline(is, line)) {
            ++lineno;
            line = text::trim(line);
            if (line.empty() || line[0] == '#') continue;
            auto parts = text::split_ws(line);
            if (parts.size() != 3)
                throw ParseError("<snapshot>", lineno, "expected `subject predicate object`");
            rows.push_back(parts);
        }
        // Register entities from type rows first so object terms resolve.
        for (const auto& r : rows)
            if (r[1] == "type") declare_entity(r[0], r[2]);
        for (const auto& r : rows) {
            if (r[1] == "type") continue;
            Term obj = has_entity(r[2])              ? Term::entity(r[2])
                       : taxonomy_.has_class(r[2])   ? Term::cls(r[2])
                                                     : Term::literal(r[2]);
            assert_triple({Term::entity(r[0]), r[1], obj});
        }
    }

private:
    static bool match_pos(const PatternTerm& p, const Term& actual, Binding& b) {
        if (!p.is_var) return p.term == actual;
        auto it = b.find(p.var);
        if (it != b.end()) return it->second == actual;
        b.emplace(p.var, actual);
        return true;
    }

    void parse_schema_line(const std::string& line) {
        if (text::starts_with(line, "strategy ")) {
            parse_strategy(line);
            return;
        }
        auto parts = text::split_ws(line);
        const std::string& kw = parts[0];
        if (kw == "class" || kw == "sound") {
            // class Child < Parent < GrandParent  (a chain of subclass links)
            std::vector<std::string> names;
            for (size_t i = 1; i < parts.size(); ++i) {
                if (parts[i] == "<") continue;
                names.push_back(parts[i]);
            }
            if (names.empty()) throw Error("missing class name");
            taxonomy_.add_class(names[0]);
            for (size_t i = 0; i + 1 < names.size(); ++i) taxonomy_.add_subclass(names[i], names[i + 1]);
            if (kw == "sound") declare_sound_class(names[0]);
        } else if (kw == "axiom") {
            // axiom Class => Property
            if (parts.size() != 4 || parts[2] != "=>") throw Error("expected `axiom Class => Property`");
            taxonomy_.add_axiom(parts[1], parts[3]);
        } else if (kw == "predicate") {
            if (parts.size() != 2) throw Error("expected `predicate name`");
            declare_predicate(parts[1]);
        } else if (kw == "relation") {
            if (parts.size() != 2) throw Error("expected `relation name`");
            declare_relation(parts[1]);
        } else {
            throw Error("unknown schema directive " + kw);
        }
    }

    void parse_strategy(const std::string& line) {
        // strategy <id> for <Class> [when A & B] priority <n>: "<text>"
        auto colon = line.find(':');
        if (colon == std::string::npos) throw Error("strategy line missing ':'");
        auto head = text::split_ws(line.substr(0, colon));
        StrategyDecl s;
        size_t i = 1;
        if (i >= head.size()) throw Error("strategy missing id");
        s.id = head[i++];
        if (i >= head.size() || head[i] != "for") throw Error("strategy missing `for`");
        ++i;
        if (i >= head.size()) throw Error("strategy missing failure class");
        s.failure_class = head[i++];
        if (i < head.size() && head[i] == "when") {
            ++i;
            while (i < head.size() && head[i] != "priority") {
                if (head[i] != "&") s.guard_classes.push_back(head[i]);
                ++i;
            }
        }
        if (i >= head.size() || head[i] != "priority") throw Error("strategy missing priority");
        ++i;
        if (i >= head.size()) throw Error("strategy missing priority value");
        s.priority = std::stoi(head[i]);
        std::string rest = text::trim(line.substr(colon + 1));
        if (rest.size() < 2 || rest.front() != '"' || rest.back() != '"')
            throw Error("strategy text must be quoted");
        s.instruction = rest.substr(1, rest.size() - 2);
        for (const auto& g : s.guard_classes)
            if (!taxonomy_.has_class(g)) throw Error("strategy guard names unknown class " + g);
        if (!taxonomy_.has_class(s.failure_class))
            throw Error("strategy names unknown failure class " + s.failure_class);
        strategies_.push_back(std::move(s));
    }

    Taxonomy taxonomy_;
    std::set<std::string> predicates_;
    std::set<std::string> relations_;
    std::set<std::string> sound_classes_;
    std::map<std::string, std::set<std::string>> entity_classes_;
    std::vector<Triple> triples_;
    std::set<Triple> triple_set_;
    std::unordered_map<std::string, std::vector<size_t>> by_subject_;
    std::unordered_map<std::string, std::vector<size_t>> by_predicate_;
    std::unordered_map<std::string, std::vector<size_t>> by_object_;
    std::vector<StrategyDecl> strategies_;
    inline static const std::vector<size_t> empty_index_{};
};

}  // namespace recover
