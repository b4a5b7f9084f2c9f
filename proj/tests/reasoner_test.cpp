#include <catch2/catch_amalgamated.hpp>

#include <random>

#include "recover/reasoner.hpp"

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

// The knife-drop encoding: slice with a held knife before, empty gripper
// after. Ten relation triples around event_3 plus the typing facts.
KnowledgeBase knife_drop_kb() {
    KnowledgeBase kb = loaded_kb();
    kb.declare_entity("robot-gripper", "RobotGripper");
    kb.declare_entity("nothing-0", "Nothing");
    kb.declare_entity("knife-1", "Knife");
    kb.declare_entity("event_2", "ObservationEvent");
    kb.declare_entity("event_3", "ActionEvent");
    kb.declare_entity("event_4", "ObservationEvent");
    kb.declare_entity("act_3", "Slice");
    kb.declare_entity("trp-1", "Triple");
    kb.declare_entity("trp-2", "Triple");
    auto t = [&](const char* s, const char* p, const char* o, bool literal = false) {
        kb.assert_triple({Term::entity(s), p, literal ? Term::literal(o) : Term::entity(o)});
    };
    t("event_3", "hasAction", "act_3");
    t("event_3", "hasPreconditions", "event_2");
    t("event_3", "hasPostconditions", "event_4");
    t("event_2", "hasTriple", "trp-1");
    t("trp-1", "hasSubject", "knife-1");
    t("trp-1", "hasPredicate", "inside", true);
    t("trp-1", "hasObject", "robot-gripper");
    t("event_4", "hasTriple", "trp-2");
    t("trp-2", "hasSubject", "nothing-0");
    t("trp-2", "hasPredicate", "inside", true);
    t("trp-2", "hasObject", "robot-gripper");
    return kb;
}

// Nominal slice: the knife is still in the gripper afterwards.
KnowledgeBase nominal_slice_kb() {
    KnowledgeBase kb = loaded_kb();
    kb.declare_entity("robot-gripper", "RobotGripper");
    kb.declare_entity("knife-1", "Knife");
    kb.declare_entity("event_2", "ObservationEvent");
    kb.declare_entity("event_3", "ActionEvent");
    kb.declare_entity("event_4", "ObservationEvent");
    kb.declare_entity("act_3", "Slice");
    kb.declare_entity("trp-1", "Triple");
    kb.declare_entity("trp-2", "Triple");
    auto t = [&](const char* s, const char* p, const char* o, bool literal = false) {
        kb.assert_triple({Term::entity(s), p, literal ? Term::literal(o) : Term::entity(o)});
    };
    t("event_3", "hasAction", "act_3");
    t("event_3", "hasPreconditions", "event_2");
    t("event_3", "hasPostconditions", "event_4");
    t("event_2", "hasTriple", "trp-1");
    t("trp-1", "hasSubject", "knife-1");
    t("trp-1", "hasPredicate", "inside", true);
    t("trp-1", "hasObject", "robot-gripper");
    t("event_4", "hasTriple", "trp-2");
    t("trp-2", "hasSubject", "knife-1");
    t("trp-2", "hasPredicate", "inside", true);
    t("trp-2", "hasObject", "robot-gripper");
    return kb;
}

}  // namespace

TEST_CASE("the dropping rule fires on the knife-drop encoding") {
    KnowledgeBase kb = knife_drop_kb();
    Verdict v = evaluate(kb, shipped_rules(), "event_3");
    REQUIRE_FALSE(v.success());
    bool dropping = false;
    for (const auto& f : v.findings)
        if (f.failure_class == "DroppingObjFailure" && f.event == "event_3") dropping = true;
    CHECK(dropping);
    auto ordered = by_specificity(v.findings, kb);
    CHECK(ordered.front().failure_class == "DroppingObjFailure");
    CHECK(salient_object(ordered.front(), kb) == "knife-1");
}

TEST_CASE("the nominal slice trace stays a success") {
    KnowledgeBase kb = nominal_slice_kb();
    Verdict v = evaluate(kb, shipped_rules(), "event_3");
    CHECK(v.success());
}

TEST_CASE("an empty rule corpus yields success on any store") {
    KnowledgeBase kb = knife_drop_kb();
    Verdict v = evaluate(kb, {}, "event_3");
    CHECK(v.success());
}

TEST_CASE("brute force agrees on the knife-drop store") {
    KnowledgeBase kb = knife_drop_kb();
    auto rules = shipped_rules();
    Verdict a = evaluate(kb, rules, "event_3");
    Verdict b = evaluate_bruteforce(kb, rules, "event_3");
    CHECK(a.findings == b.findings);
}

TEST_CASE("brute force on an empty store is success") {
    KnowledgeBase kb = loaded_kb();
    kb.declare_entity("event_0", "ActionEvent");
    Verdict v = evaluate_bruteforce(kb, shipped_rules(), "event_0");
    CHECK(v.success());
}

TEST_CASE("brute force refuses oversized stores") {
    KnowledgeBase kb = loaded_kb();
    kb.declare_entity("hub-0", "Apple");
    for (int i = 0; i < 260; ++i) {
        std::string id = "apple-" + std::to_string(i);
        kb.declare_entity(id, "Apple");
        kb.assert_triple({Term::entity(id), "near", Term::entity("hub-0")});
    }
    kb.declare_entity("event_1", "ActionEvent");
    CHECK_THROWS_WITH(evaluate_bruteforce(kb, shipped_rules(), "event_1"),
                      Catch::Matchers::ContainsSubstring("exceeds"));
}

TEST_CASE("evaluate matches the brute-force oracle on randomized stores") {
    auto rules = shipped_rules();
    std::mt19937_64 rng(424242);

    const std::vector<std::string> entity_classes = {
        "Knife", "Mug",          "Apple",   "Tomato",  "Pan",    "Shard",  "Slice",
        "Event", "ActionEvent",  "Triple",  "Nothing", "Vegan",  "Egg",    "RobotGripper",
        "Robot", "CounterTop",   "Fridge",  "PlanStep"};
    const std::vector<std::string> predicates = {
        "hasAction",       "hasTarget",     "hasSource",        "has_sound",    "hasPreconditions",
        "hasPostconditions", "hasTriple",   "hasSubject",       "hasPredicate", "hasObject",
        "executesStep",    "expectsTarget", "expectsActionName", "performedActionName", "near"};
    const std::vector<std::string> literals = {"inside",  "on-top-of", "has_state", "dirty",
                                               "broken",  "closed",    "open",      "blocking",
                                               "filled_with_water", "pick_up", "slice"};
    const std::vector<std::string> action_classes = {"Slice", "PickUp", "Put", "NavigateTo", "Pour",
                                                     "ToggleOn", "Observation"};
    const std::vector<std::string> sound_classes = {"DroppingObjSound", "BreakingObjSound",
                                                    "SliceVeggySound", "CloseFridgeSound"};

    for (int round = 0; round < 500; ++round) {
        KnowledgeBase kb = loaded_kb();
        int n_entities = std::uniform_int_distribution<int>(4, 24)(rng);
        std::vector<std::string> ids;
        for (int i = 0; i < n_entities; ++i) {
            std::string id = "n" + std::to_string(i);
            const std::string* cls;
            int pick = std::uniform_int_distribution<int>(0, 9)(rng);
            if (pick < 5)
                cls = &entity_classes[std::uniform_int_distribution<size_t>(0, entity_classes.size() - 1)(rng)];
            else if (pick < 7)
                cls = &action_classes[std::uniform_int_distribution<size_t>(0, action_classes.size() - 1)(rng)];
            else if (pick < 9)
                cls = &sound_classes[std::uniform_int_distribution<size_t>(0, sound_classes.size() - 1)(rng)];
            else
                cls = &entity_classes[0];
            kb.declare_entity(id, *cls);
            ids.push_back(id);
        }
        std::string scope = "ev";
        kb.declare_entity(scope, std::uniform_int_distribution<int>(0, 1)(rng) ? "ActionEvent" : "Event");
        ids.push_back(scope);

        int n_triples = std::uniform_int_distribution<int>(5, 40)(rng);
        for (int i = 0; i < n_triples; ++i) {
            const std::string& s = ids[std::uniform_int_distribution<size_t>(0, ids.size() - 1)(rng)];
            const std::string& p = predicates[std::uniform_int_distribution<size_t>(0, predicates.size() - 1)(rng)];
            Term obj;
            if (std::uniform_int_distribution<int>(0, 2)(rng) == 0)
                obj = Term::literal(literals[std::uniform_int_distribution<size_t>(0, literals.size() - 1)(rng)]);
            else
                obj = Term::entity(ids[std::uniform_int_distribution<size_t>(0, ids.size() - 1)(rng)]);
            kb.assert_triple({Term::entity(s), p, obj});
        }

        Verdict a = evaluate(kb, rules, scope);
        Verdict b = evaluate_bruteforce(kb, rules, scope, 400);
        if (a.findings != b.findings) {
            CAPTURE(round);
            REQUIRE(a.findings == b.findings);
        }
    }
    SUCCEED();
}

TEST_CASE("repeated evaluation is byte-identical") {
    KnowledgeBase kb = knife_drop_kb();
    auto rules = shipped_rules();
    auto render = [&](const Verdict& v) {
        std::ostringstream os;
        for (const auto& f : v.findings) {
            os << f.failure_class << " " << f.event << " " << f.rule_name;
            for (const auto& [var, val] : f.bindings) os << " " << var << "=" << val;
            os << "\n";
        }
        return os.str();
    };
    std::string first = render(evaluate(kb, rules, "event_3"));
    for (int i = 0; i < 5; ++i) CHECK(render(evaluate(kb, rules, "event_3")) == first);
}

TEST_CASE("specificity ordering prefers the deepest failure class") {
    KnowledgeBase kb = loaded_kb();
    FailureFinding generic{"DroppingObjFailure", "event_1", {}, "zz_rule"};
    FailureFinding specific{"DroppingAndBreakingObjFailure", "event_1", {}, "a_rule"};
    FailureFinding safety{"SafetyFailure", "event_1", {}, "a_rule"};
    auto ordered = by_specificity({generic, safety, specific}, kb);
    CHECK(ordered[0].failure_class == "DroppingAndBreakingObjFailure");
    CHECK(ordered[2].failure_class == "SafetyFailure");
}
