#include <catch2/catch_amalgamated.hpp>

#include "recover/events.hpp"
#include "recover/percept.hpp"
#include "recover/worldsim.hpp"

using namespace recover;

namespace {

KnowledgeBase fixture_kb() {
    KnowledgeBase kb;
    kb.load_schema(std::string(RECOVER_DATA_DIR) + "/ontothor.schema");
    kb.declare_entity("robot-gripper", "RobotGripper");
    kb.declare_entity("nothing-0", "Nothing");
    kb.declare_entity("knife-1", "Knife");
    kb.declare_entity("tomato-1", "Tomato");
    kb.declare_entity("counter_top-1", "CounterTop");
    return kb;
}

std::vector<Triple> small_scene(bool knife_held) {
    std::vector<Triple> scene;
    scene.push_back({Term::entity("tomato-1"), "on-top-of", Term::entity("counter_top-1")});
    if (knife_held)
        scene.push_back({Term::entity("knife-1"), "inside", Term::entity("robot-gripper")});
    else
        scene.push_back({Term::entity("nothing-0"), "inside", Term::entity("robot-gripper")});
    return scene;
}

}  // namespace

TEST_CASE("events alternate and carry pre/post links") {
    KnowledgeBase kb = fixture_kb();
    EventLog log;
    std::string e0 = log.record_observation(kb, small_scene(false));
    CHECK(e0 == "event_0");
    std::string e1 = log.record_action(kb, "pick_up", "PickUp", std::nullopt, "knife-1", std::nullopt);
    CHECK(e1 == "event_1");
    std::string e2 = log.record_observation(kb, small_scene(true));
    CHECK(e2 == "event_2");
    std::string e3 = log.record_action(kb, "slice", "Slice", "knife-1", "tomato-1", "SliceVeggySound");
    std::string e4 = log.record_observation(kb, small_scene(true));
    CHECK(e4 == "event_4");
    log.audit(kb);

    CHECK(kb.contains({Term::entity("event_1"), "hasPreconditions", Term::entity("event_0")}));
    CHECK(kb.contains({Term::entity("event_1"), "hasPostconditions", Term::entity("event_2")}));
    CHECK(kb.contains({Term::entity("event_3"), "hasPreconditions", Term::entity("event_2")}));
    CHECK(kb.contains({Term::entity("event_3"), "hasPostconditions", Term::entity("event_4")}));
    CHECK(kb.contains({Term::entity("event_3"), "has_sound", Term::entity("sound_3")}));
    CHECK(kb.is_instance("sound_3", "SliceVeggySound"));
    CHECK(kb.is_instance("sound_3", "ObjectInteractionSound"));
    CHECK(kb.is_instance("event_3", "Event"));
    CHECK(kb.is_instance("act_3", "ActionWithHeldObject"));
}

TEST_CASE("an action with no sound asserts no sound triple") {
    KnowledgeBase kb = fixture_kb();
    EventLog log;
    log.record_observation(kb, small_scene(false));
    log.record_action(kb, "pick_up", "PickUp", std::nullopt, "knife-1", std::nullopt);
    TriplePattern p;
    p.subject = PatternTerm::constant(Term::entity("event_1"));
    p.predicate_term = PatternTerm::constant(Term::literal("has_sound"));
    p.object = PatternTerm::variable("s");
    CHECK(kb.query(p).empty());
}

TEST_CASE("two observations in a row violate the protocol") {
    KnowledgeBase kb = fixture_kb();
    EventLog log;
    log.record_observation(kb, small_scene(false));
    CHECK_THROWS_WITH(log.record_observation(kb, small_scene(false)),
                      Catch::Matchers::ContainsSubstring("alternation"));
}

TEST_CASE("an action on an empty log violates the protocol") {
    KnowledgeBase kb = fixture_kb();
    EventLog log;
    CHECK_THROWS_WITH(log.record_action(kb, "pick_up", "PickUp", std::nullopt, "knife-1", std::nullopt),
                      Catch::Matchers::ContainsSubstring("alternation"));
}

TEST_CASE("reified triple count equals the sum of scene sizes") {
    KnowledgeBase kb = fixture_kb();
    EventLog log;
    log.record_observation(kb, small_scene(false));
    log.record_action(kb, "pick_up", "PickUp", std::nullopt, "knife-1", std::nullopt);
    log.record_observation(kb, small_scene(true));
    size_t expected = small_scene(false).size() + small_scene(true).size();
    CHECK(log.reified_count() == expected);

    TriplePattern p;
    p.subject = PatternTerm::variable("e");
    p.predicate_term = PatternTerm::constant(Term::literal("hasTriple"));
    p.object = PatternTerm::variable("t");
    CHECK(kb.query(p).size() == expected);
}

TEST_CASE("jsonl export round-trips into a fresh store") {
    KnowledgeBase kb = fixture_kb();
    EventLog log;
    log.record_observation(kb, small_scene(false));
    log.record_action(kb, "slice", "Slice", "knife-1", "tomato-1", "SliceVeggySound");
    log.record_observation(kb, small_scene(true));
    std::string jsonl = log.to_jsonl();

    KnowledgeBase kb2 = fixture_kb();
    EventLog replay = EventLog::from_jsonl(jsonl, kb2);
    replay.audit(kb2);
    CHECK(replay.to_jsonl() == jsonl);
    CHECK(replay.events().size() == log.events().size());
}

TEST_CASE("the trace fixture reifies 14 triples on the second observation") {
    KnowledgeBase kb;
    kb.load_schema(std::string(RECOVER_DATA_DIR) + "/ontothor.schema");
    Task task = load_task(std::string(RECOVER_DATA_DIR) + "/tasks/fig_trace_slice.task", kb);
    kb.declare_entity("robot-gripper", "RobotGripper");
    kb.declare_entity("nothing-0", "Nothing");
    for (const auto& [id, o] : task.initial.objects) kb.declare_entity(id, o.cls);
    for (const auto& [id, cls] : task.derived_decls) kb.declare_entity(id, cls);

    EventLog log;
    WorldState w = task.initial;
    SceneGraph g0 = label_scene(kb, w);
    log.record_observation(kb, g0.triples, g0.states);
    for (const auto& step : task.plan) {
        ExecOutcome out = execute(kb, w, step);
        REQUIRE_FALSE(out.rejected);
        for (const auto& id : out.created) kb.declare_entity(id, out.world.obj(id).cls);
        auto [src, tgt] = step_roles(step);
        if (out.instrument) src = out.instrument;
        log.record_action(kb, step.action, find_action(step.action)->cls, src, tgt, out.sound);
        w = out.world;
        SceneGraph g = label_scene(kb, w);
        log.record_observation(kb, g.triples, g.states);
    }
    log.audit(kb);

    const LoggedEvent& e2 = log.events()[2];
    CHECK(e2.id == "event_2");
    CHECK(e2.scene.size() == 14);
    auto has = [&](const char* s, const char* p, const char* o) {
        return std::any_of(e2.scene.begin(), e2.scene.end(), [&](const Triple& t) {
            return t.subject.text == s && t.predicate == p && t.object.text == o;
        });
    };
    CHECK(has("knife-1", "inside", "robot-gripper"));
    CHECK(has("tomato-1", "near", "soap-bottle-1"));
    CHECK(has("dish-sponge-1", "on-top-of", "counter_top-2"));

    // paper-style identities: observation events 0/2/4, actions 1/3 with the
    // slice sound on event_3
    CHECK(log.events()[3].sound_class == std::optional<std::string>("SliceVeggySound"));
    CHECK(log.events()[1].sound_class == std::nullopt);
}
