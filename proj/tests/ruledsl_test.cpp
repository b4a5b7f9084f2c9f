#include <catch2/catch_amalgamated.hpp>

#include <fstream>
#include <random>

#include "recover/ruledsl.hpp"

using namespace recover;

namespace {

KnowledgeBase loaded_kb() {
    KnowledgeBase kb;
    kb.load_schema(std::string(RECOVER_DATA_DIR) + "/ontothor.schema");
    return kb;
}

std::vector<RuleAst> shipped_rules() {
    return load_rules(std::string(RECOVER_DATA_DIR) + "/failure_rules.rules");
}

const RuleAst& find_rule(const std::vector<RuleAst>& rules, const std::string& name) {
    for (const auto& r : rules)
        if (r.name == name) return r;
    FAIL("rule not found: " + name);
    throw Error("unreachable");
}

bool expr_contains_or(const RuleExpr& e) {
    if (e.op == RuleExpr::Op::Or) return true;
    for (const auto& k : e.kids)
        if (expr_contains_or(*k)) return true;
    return false;
}

bool expr_contains_negated_atom(const RuleExpr& e, const std::string& symbol) {
    if (e.op == RuleExpr::Op::Not) {
        const RuleExpr* inner = e.kids[0].get();
        if (inner->op == RuleExpr::Op::Atom && inner->atom.symbol == symbol) return true;
    }
    for (const auto& k : e.kids)
        if (expr_contains_negated_atom(*k, symbol)) return true;
    return false;
}

}  // namespace

TEST_CASE("the dropping-object listing parses to the expected shape") {
    auto rules = shipped_rules();
    const RuleAst& r = find_rule(rules, "dropping_obj_core");
    CHECK(r.head_class == "DroppingObjFailure");
    CHECK(r.head_var == "e");
    CHECK(expr_contains_or(*r.body));                       // ActionWithHeldObject | NonInteractiveAction
    CHECK(expr_contains_negated_atom(*r.body, "Nothing"));  // !(Nothing(?held_obj1))
}

TEST_CASE("minimal self-subclass head is accepted") {
    KnowledgeBase kb = loaded_kb();
    auto rules = parse_rules("rule minimal: Event(?e) -> Failure(?e)");
    REQUIRE(rules.size() == 1);
    validate_rule(rules[0], kb);
}

TEST_CASE("range restriction rejects an unbound head variable") {
    KnowledgeBase kb = loaded_kb();
    auto rules = parse_rules("rule broken: RobotGripper(?g) -> Failure(?e)");
    REQUIRE_THROWS_WITH(validate_rule(rules[0], kb),
                        Catch::Matchers::ContainsSubstring("does not occur positively"));
}

TEST_CASE("unsafe negation is rejected") {
    KnowledgeBase kb = loaded_kb();
    auto bad = parse_rules("rule bad: Event(?e) & !(hasTarget(?e, ?x)) -> Failure(?e)");
    REQUIRE_THROWS_WITH(validate_rule(bad[0], kb), Catch::Matchers::ContainsSubstring("unsafe negation"));
    // ?x is also bound by a positive atom here, so negation is safe
    auto ok = parse_rules("rule ok: Event(?e) & Nothing(?x) & !(hasTarget(?e, ?x)) -> Failure(?e)");
    REQUIRE_NOTHROW(validate_rule(ok[0], kb));
}

TEST_CASE("unknown symbols are reported") {
    KnowledgeBase kb = loaded_kb();
    auto r1 = parse_rules("rule u1: Zeppelin(?e) -> Failure(?e)");
    REQUIRE_THROWS_WITH(validate_rule(r1[0], kb), Catch::Matchers::ContainsSubstring("unknown class"));
    auto r2 = parse_rules("rule u2: Event(?e) & wibbles(?e, ?x) -> Failure(?e)");
    REQUIRE_THROWS_WITH(validate_rule(r2[0], kb), Catch::Matchers::ContainsSubstring("unknown predicate"));
}

TEST_CASE("non-failure head is rejected") {
    KnowledgeBase kb = loaded_kb();
    auto rules = parse_rules("rule nf: Event(?e) -> Apple(?e)");
    REQUIRE_THROWS_WITH(validate_rule(rules[0], kb), Catch::Matchers::ContainsSubstring("not a Failure"));
}

TEST_CASE("syntax errors carry a position") {
    try {
        parse_rules("rule broken: Event(?e & -> Failure(?e)");
        FAIL("expected a syntax error");
    } catch (const RuleSyntaxError& e) {
        CHECK(e.line() >= 1);
        CHECK(e.col() >= 1);
    }
}

TEST_CASE("parse of print is identity on the shipped corpus") {
    for (const auto& r : shipped_rules()) {
        std::string printed = print_rule(r);
        auto reparsed = parse_rules(printed);
        REQUIRE(reparsed.size() == 1);
        CHECK(print_rule(reparsed[0]) == printed);
        CHECK(reparsed[0].name == r.name);
        CHECK(reparsed[0].head_class == r.head_class);
        auto a = compile_rule(r);
        auto b = compile_rule(reparsed[0]);
        REQUIRE(a.size() == b.size());
        for (size_t i = 0; i < a.size(); ++i) {
            CHECK(a[i].positive == b[i].positive);
            CHECK(a[i].negated == b[i].negated);
        }
    }
}

TEST_CASE("fuzzed mutations never crash and always position errors") {
    std::ifstream in(std::string(RECOVER_DATA_DIR) + "/failure_rules.rules");
    std::stringstream ss;
    ss << in.rdbuf();
    std::string base = ss.str();
    std::mt19937_64 rng(87431);
    int parsed = 0, rejected = 0;
    for (int i = 0; i < 10000; ++i) {
        std::string s = base;
        int edits = std::uniform_int_distribution<int>(1, 4)(rng);
        for (int k = 0; k < edits; ++k) {
            size_t at = std::uniform_int_distribution<size_t>(0, s.size() - 1)(rng);
            int op = std::uniform_int_distribution<int>(0, 2)(rng);
            const char* garbage = "()?!&|->,.:;#@ABxyz";
            char c = garbage[std::uniform_int_distribution<int>(0, 18)(rng)];
            if (op == 0)
                s[at] = c;
            else if (op == 1)
                s.insert(at, 1, c);
            else
                s.erase(at, 1);
        }
        try {
            auto rules = parse_rules(s);
            ++parsed;  // the mutation kept the string inside the grammar
        } catch (const RuleSyntaxError& e) {
            ++rejected;
            CHECK(e.line() >= 1);
        }
    }
    CHECK(parsed + rejected == 10000);
    CHECK(rejected > 0);
}

TEST_CASE("every shipped head is subsumed by Failure") {
    KnowledgeBase kb = loaded_kb();
    for (const auto& r : shipped_rules()) CHECK(kb.taxonomy().subsumes("Failure", r.head_class));
}

TEST_CASE("the shipped corpus covers all twelve implemented failures") {
    KnowledgeBase kb = loaded_kb();
    auto report = validate_corpus(shipped_rules(), kb);
    CHECK(report.ok());
    CHECK(report.uncovered.empty());
    CHECK(report.rules_per_class.size() == 12);
}

TEST_CASE("an empty corpus reports twelve uncovered classes") {
    KnowledgeBase kb = loaded_kb();
    auto report = validate_corpus({}, kb);
    CHECK(report.uncovered.size() == 12);
}

TEST_CASE("deleting the dirty-object rules uncovers exactly one class") {
    KnowledgeBase kb = loaded_kb();
    std::vector<RuleAst> rules;
    for (const auto& r : shipped_rules())
        if (r.head_class != "DirtyObjFailure") rules.push_back(r);
    auto report = validate_corpus(rules, kb);
    REQUIRE(report.uncovered.size() == 1);
    CHECK(report.uncovered[0] == "DirtyObjFailure");
}

TEST_CASE("disjunction compiles away into conjunctive alternatives") {
    auto rules = parse_rules(
        "rule d: Event(?e) & (RobotGripper(?x) | Nothing(?x)) & hasTarget(?e, ?x) -> Failure(?e)");
    auto compiled = compile_rule(rules[0]);
    REQUIRE(compiled.size() == 2);
    for (const auto& c : compiled) {
        CHECK(c.positive.size() == 3);
        CHECK(c.negated.empty());
    }
}

TEST_CASE("negation over a disjunction distributes by De Morgan") {
    auto rules = parse_rules(
        "rule n: Event(?e) & hasTarget(?e, ?x) & !(RobotGripper(?x) | Nothing(?x)) -> Failure(?e)");
    auto compiled = compile_rule(rules[0]);
    REQUIRE(compiled.size() == 1);
    CHECK(compiled[0].negated.size() == 2);
}
