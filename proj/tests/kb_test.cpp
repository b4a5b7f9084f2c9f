#include <catch2/catch_amalgamated.hpp>

#include <random>
#include <sstream>

#include "recover/kb.hpp"

using namespace recover;

namespace {

std::string schema_path() { return std::string(RECOVER_DATA_DIR) + "/ontothor.schema"; }

KnowledgeBase loaded_kb() {
    KnowledgeBase kb;
    kb.load_schema(schema_path());
    return kb;
}

}  // namespace

TEST_CASE("schema loads the full class tree") {
    KnowledgeBase kb = loaded_kb();
    for (const char* cls : {"Action", "Agent", "PhysicalObject", "PhysicalProperty", "Sound",
                            "SpatialRelation", "State", "Time", "Location", "Event", "Triple",
                            "RecoveryStrategy", "Failure"})
        CHECK(kb.taxonomy().has_class(cls));

    CHECK(kb.taxonomy().subsumes("Event", "Failure"));
    CHECK(kb.taxonomy().subsumes("Sound", "AppliancesSound"));
    CHECK(kb.taxonomy().subsumes("Sound", "DroppingSound"));
    CHECK(kb.taxonomy().subsumes("Sound", "ObjectInteractionSound"));
    CHECK(kb.taxonomy().subsumes("DroppingObjFailure", "DroppingAndBreakingObjFailure"));
}

TEST_CASE("declared chain closure is transitive") {
    KnowledgeBase kb;
    std::string text = "class PhysicalObject\nclass Mug < Cup < PhysicalObject\n";
    std::ofstream("/tmp/chain.schema") << text;
    kb.load_schema("/tmp/chain.schema");
    const auto& anc = kb.taxonomy().ancestors("Mug");
    CHECK(anc.count("Mug"));
    CHECK(anc.count("Cup"));
    CHECK(anc.count("PhysicalObject"));
}

TEST_CASE("cycle detection names the class") {
    std::ofstream("/tmp/cycle.schema") << "class A < B\nclass B < C\nclass C < A\n";
    KnowledgeBase kb;
    REQUIRE_THROWS_WITH(kb.load_schema("/tmp/cycle.schema"), Catch::Matchers::ContainsSubstring("cycle"));
}

TEST_CASE("parse error carries a line number") {
    std::ofstream("/tmp/bad.schema") << "class A\nwibble B\n";
    KnowledgeBase kb;
    REQUIRE_THROWS_AS(kb.load_schema("/tmp/bad.schema"), ParseError);
    try {
        kb.load_schema("/tmp/bad.schema");
    } catch (const ParseError& e) {
        CHECK(e.line() == 2);
    }
}

TEST_CASE("assert and retrieve the paper sound triples") {
    KnowledgeBase kb = loaded_kb();
    kb.declare_entity("event_001", "ActionEvent");
    kb.declare_entity("s", "CloseFridgeSound");
    kb.assert_triple({Term::entity("event_001"), "has_sound", Term::entity("s")});
    CHECK(kb.contains({Term::entity("event_001"), "has_sound", Term::entity("s")}));
    CHECK(kb.is_instance("s", "CloseFridgeSound"));
    CHECK(kb.is_instance("s", "Sound"));
}

TEST_CASE("re-asserting a triple is a no-op") {
    KnowledgeBase kb = loaded_kb();
    kb.declare_entity("apple-1", "Apple");
    size_t n = kb.size();
    kb.assert_triple({Term::entity("apple-1"), "type", Term::cls("Apple")});
    CHECK(kb.size() == n);
}

TEST_CASE("instance typing climbs the taxonomy") {
    KnowledgeBase kb = loaded_kb();
    kb.declare_entity("apple-1", "Apple");
    CHECK(kb.is_instance("apple-1", "Apple"));
    CHECK(kb.is_instance("apple-1", "PhysicalObject"));
    kb.declare_entity("pot-1", "Pot");
    CHECK_FALSE(kb.is_instance("pot-1", "Breakable"));
    CHECK(kb.is_instance("pot-1", "Fillable"));
    CHECK_THROWS_AS(kb.is_instance("ghost-1", "Apple"), VocabularyError);
}

TEST_CASE("unknown predicate and class are rejected") {
    KnowledgeBase kb = loaded_kb();
    kb.declare_entity("apple-1", "Apple");
    CHECK_THROWS_AS(kb.assert_triple({Term::entity("apple-1"), "hasFlavor", Term::literal("sweet")}),
                    VocabularyError);
    CHECK_THROWS_AS(kb.declare_entity("x-1", "Zeppelin"), VocabularyError);
}

TEST_CASE("pattern query with class constraint uses subsumption") {
    KnowledgeBase kb = loaded_kb();
    kb.declare_entity("mug-1", "Mug");
    kb.declare_entity("knife-1", "Knife");
    TriplePattern p;
    p.subject = PatternTerm::variable("x");
    p.predicate_term = PatternTerm::constant(Term::literal("type"));
    p.object = PatternTerm::variable("c");
    p.class_constraints["x"] = "Fillable";
    auto rows = kb.query(p);
    REQUIRE(rows.size() == 1);
    CHECK(rows[0].at("x").text == "mug-1");
}

TEST_CASE("query on an empty store is empty") {
    KnowledgeBase kb = loaded_kb();
    TriplePattern p;
    p.subject = PatternTerm::variable("x");
    p.predicate_term = PatternTerm::constant(Term::literal("inside"));
    p.object = PatternTerm::constant(Term::entity("robot-gripper"));
    CHECK(kb.query(p).empty());
}

TEST_CASE("gripper containment query matches the quoted pattern") {
    KnowledgeBase kb = loaded_kb();
    kb.declare_entity("knife-1", "Knife");
    kb.declare_entity("robot-gripper", "RobotGripper");
    kb.assert_triple({Term::entity("knife-1"), "inside", Term::entity("robot-gripper")});
    TriplePattern p;
    p.subject = PatternTerm::variable("x");
    p.predicate_term = PatternTerm::constant(Term::literal("inside"));
    p.object = PatternTerm::constant(Term::entity("robot-gripper"));
    auto rows = kb.query(p);
    REQUIRE(rows.size() == 1);
    CHECK(rows[0].at("x").text == "knife-1");
}

TEST_CASE("subsumption closure matches a brute-force DFS oracle on random DAGs") {
    std::mt19937_64 rng(20240517);
    for (int round = 0; round < 12; ++round) {
        int n_classes = std::uniform_int_distribution<int>(5, 100)(rng);
        Taxonomy tax;
        std::vector<std::string> names;
        for (int i = 0; i < n_classes; ++i) names.push_back("C" + std::to_string(i));
        for (const auto& c : names) tax.add_class(c);
        // edges only from higher to lower index: guaranteed acyclic
        std::map<std::string, std::vector<std::string>> parents;
        for (int i = 1; i < n_classes; ++i) {
            int n_par = std::uniform_int_distribution<int>(0, 2)(rng);
            for (int k = 0; k < n_par; ++k) {
                int p = std::uniform_int_distribution<int>(0, i - 1)(rng);
                tax.add_subclass(names[i], names[p]);
                parents[names[i]].push_back(names[p]);
            }
        }
        tax.check_acyclic();
        // independent DFS closure
        auto dfs_reaches = [&](const std::string& from, const std::string& to) {
            std::vector<std::string> stack{from};
            std::set<std::string> seen;
            while (!stack.empty()) {
                auto cur = stack.back();
                stack.pop_back();
                if (cur == to) return true;
                if (!seen.insert(cur).second) continue;
                for (const auto& p : parents[cur]) stack.push_back(p);
            }
            return false;
        };
        for (int trial = 0; trial < 200; ++trial) {
            const auto& a = names[std::uniform_int_distribution<size_t>(0, names.size() - 1)(rng)];
            const auto& b = names[std::uniform_int_distribution<size_t>(0, names.size() - 1)(rng)];
            CHECK(tax.subsumes(b, a) == dfs_reaches(a, b));
        }
    }
}

TEST_CASE("query results do not depend on insertion order") {
    KnowledgeBase a = loaded_kb(), b = loaded_kb();
    std::vector<Triple> triples;
    for (int i = 0; i < 20; ++i) {
        std::string id = "apple-" + std::to_string(i);
        a.declare_entity(id, "Apple");
        b.declare_entity(id, "Apple");
    }
    for (int i = 0; i < 19; ++i)
        triples.push_back({Term::entity("apple-" + std::to_string(i)), "near",
                           Term::entity("apple-" + std::to_string(i + 1))});
    for (const auto& t : triples) a.assert_triple(t);
    for (auto it = triples.rbegin(); it != triples.rend(); ++it) b.assert_triple(*it);

    TriplePattern p;
    p.subject = PatternTerm::variable("x");
    p.predicate_term = PatternTerm::constant(Term::literal("near"));
    p.object = PatternTerm::variable("y");
    CHECK(a.query(p) == b.query(p));
}

TEST_CASE("query is monotone under assertion") {
    KnowledgeBase kb = loaded_kb();
    kb.declare_entity("apple-1", "Apple");
    kb.declare_entity("table... ", "DiningTable");  // deliberately odd id is fine
    TriplePattern p;
    p.subject = PatternTerm::variable("x");
    p.predicate_term = PatternTerm::constant(Term::literal("type"));
    p.object = PatternTerm::variable("c");
    auto before = kb.query(p);
    kb.declare_entity("apple-2", "Apple");
    auto after = kb.query(p);
    for (const auto& row : before)
        CHECK(std::find(after.begin(), after.end(), row) != after.end());
}

TEST_CASE("snapshot dump/load round-trips") {
    KnowledgeBase kb = loaded_kb();
    kb.declare_entity("mug-1", "Mug");
    kb.declare_entity("cabinet-1", "Cabinet");
    kb.assert_triple({Term::entity("mug-1"), "inside", Term::entity("cabinet-1")});
    kb.assert_triple({Term::entity("mug-1"), "has_state", Term::literal("dirty")});
    std::ostringstream os;
    kb.dump_snapshot(os);

    KnowledgeBase fresh = loaded_kb();
    std::istringstream is(os.str());
    fresh.load_snapshot(is);
    std::ostringstream os2;
    fresh.dump_snapshot(os2);
    CHECK(os.str() == os2.str());
}

TEST_CASE("strategy stanzas load from the schema") {
    KnowledgeBase kb = loaded_kb();
    CHECK(kb.strategies().size() >= 12);
    bool found_plastic = false;
    for (const auto& s : kb.strategies())
        if (s.id == "break_pick_back_up") {
            found_plastic = true;
            CHECK(s.failure_class == "DroppingAndBreakingObjFailure");
            REQUIRE(s.guard_classes.size() == 1);
            CHECK(s.guard_classes[0] == "Plastic");
            CHECK(s.priority == 2);
        }
    CHECK(found_plastic);
}
