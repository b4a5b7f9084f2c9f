#include <catch2/catch_amalgamated.hpp>

#include <algorithm>

#include "recover/harness.hpp"
#include "recover/percept.hpp"

using namespace recover;

namespace {

const KnowledgeBase& shared_kb() {
    static KnowledgeBase kb = [] {
        KnowledgeBase k;
        k.load_schema(std::string(RECOVER_DATA_DIR) + "/ontothor.schema");
        return k;
    }();
    return kb;
}

Task fig_task() {
    return load_task(std::string(RECOVER_DATA_DIR) + "/tasks/fig_trace_slice.task", shared_kb());
}

bool has_triple(const SceneGraph& g, const std::string& s, const std::string& p, const std::string& o) {
    for (const auto& t : g.triples)
        if (t.subject.text == s && t.predicate == p && t.object.text == o) return true;
    return false;
}

}  // namespace

TEST_CASE("a held object appears only inside the gripper") {
    Task t = fig_task();
    WorldState w = execute(shared_kb(), t.initial, t.plan[0]).world;  // pick up the knife
    SceneGraph g = label_scene(shared_kb(), w);
    CHECK(has_triple(g, "knife-1", "inside", "robot-gripper"));
    int knife_edges = 0;
    for (const auto& trp : g.triples)
        if (trp.subject.text == "knife-1" || trp.object.text == "knife-1") ++knife_edges;
    CHECK(knife_edges == 1);
}

TEST_CASE("the empty gripper carries the sentinel edge") {
    Task t = fig_task();
    SceneGraph g = label_scene(shared_kb(), t.initial);
    CHECK(has_triple(g, "nothing-0", "inside", "robot-gripper"));
}

TEST_CASE("the trace fixture scene carries exactly 14 triples") {
    Task t = fig_task();
    WorldState w = execute(shared_kb(), t.initial, t.plan[0]).world;
    SceneGraph g = label_scene(shared_kb(), w);
    for (const auto& trp : g.triples) UNSCOPED_INFO(trp.subject.text << " " << trp.predicate << " " << trp.object.text);
    CHECK(g.triples.size() == 14);
    CHECK(has_triple(g, "knife-1", "inside", "robot-gripper"));
    CHECK(has_triple(g, "tomato-1", "near", "soap-bottle-1"));
    CHECK(has_triple(g, "dish-sponge-1", "on-top-of", "counter_top-2"));
}

TEST_CASE("resting on a surface labels on-top-of") {
    SuiteConfig cfg;
    Task t = load_task(cfg.task_path("T9"), shared_kb());
    SceneGraph g = label_scene(shared_kb(), t.initial);
    CHECK(has_triple(g, "plate-1", "on-top-of", "counter_top-2"));
    CHECK(has_triple(g, "mug-1", "on-top-of", "dining_table-1"));
    CHECK(has_triple(g, "plate-1", "has_state", "dirty"));
}

TEST_CASE("distant objects get no edge") {
    SuiteConfig cfg;
    Task t = load_task(cfg.task_path("T9"), shared_kb());
    SceneGraph g = label_scene(shared_kb(), t.initial);
    for (const auto& trp : g.triples) {
        CHECK_FALSE((trp.subject.text == "mug-1" && trp.object.text == "plate-1"));
        CHECK_FALSE((trp.subject.text == "plate-1" && trp.object.text == "mug-1"));
    }
}

TEST_CASE("above and under mirror each other across every scene") {
    SuiteConfig cfg;
    for (const auto& [id, file] : task_files()) {
        Task t = load_task(cfg.data_dir + "/" + file, shared_kb());
        WorldState w = t.initial;
        auto check_scene = [&](const WorldState& ws) {
            SceneGraph g = label_scene(shared_kb(), ws);
            for (const auto& trp : g.triples) {
                if (trp.predicate == "above")
                    CHECK(has_triple(g, trp.object.text, "under", trp.subject.text));
                if (trp.predicate == "under")
                    CHECK(has_triple(g, trp.object.text, "above", trp.subject.text));
                if (trp.predicate == "to-the-left-of")
                    CHECK(has_triple(g, trp.object.text, "to-the-right-of", trp.subject.text));
                if (trp.predicate == "to-the-right-of")
                    CHECK(has_triple(g, trp.object.text, "to-the-left-of", trp.subject.text));
            }
        };
        check_scene(w);
        for (const auto& step : t.plan) {
            w = execute(shared_kb(), w, step).world;
            check_scene(w);
        }
    }
}

TEST_CASE("the faucet hangs above the sink basin") {
    SuiteConfig cfg;
    Task t = load_task(cfg.task_path("T3"), shared_kb());
    SceneGraph g = label_scene(shared_kb(), t.initial);
    CHECK(has_triple(g, "faucet-1", "above", "sink_basin-1"));
    CHECK(has_triple(g, "sink_basin-1", "under", "faucet-1"));
}

TEST_CASE("inside edges are antisymmetric and acyclic") {
    SuiteConfig cfg;
    for (const auto& tid : {"T6", "T8", "T12"}) {
        Task t = load_task(cfg.task_path(tid), shared_kb());
        WorldState w = t.initial;
        for (const auto& step : t.plan) w = execute(shared_kb(), w, step).world;
        SceneGraph g = label_scene(shared_kb(), w);
        std::map<std::string, std::string> parent;
        for (const auto& trp : g.triples) {
            if (trp.predicate != "inside" || trp.object.text == "robot-gripper") continue;
            CHECK_FALSE(has_triple(g, trp.object.text, "inside", trp.subject.text));
            parent[trp.subject.text] = trp.object.text;
        }
        for (const auto& [child, _] : parent) {
            std::set<std::string> seen;
            std::string cur = child;
            while (parent.count(cur)) {
                REQUIRE(seen.insert(cur).second);  // no containment cycle
                cur = parent.at(cur);
            }
        }
    }
}

TEST_CASE("scene labeling is deterministic") {
    Task t = fig_task();
    WorldState w = execute(shared_kb(), t.initial, t.plan[0]).world;
    SceneGraph a = label_scene(shared_kb(), w);
    SceneGraph b = label_scene(shared_kb(), w);
    CHECK(a.triples == b.triples);
}

TEST_CASE("sound classification is a checked pass-through") {
    CHECK(classify_sound(shared_kb(), std::nullopt) == std::nullopt);
    CHECK(classify_sound(shared_kb(), std::optional<std::string>("SliceVeggySound")) ==
          std::optional<std::string>("SliceVeggySound"));
    CHECK_THROWS_AS(classify_sound(shared_kb(), std::optional<std::string>("WhaleSong")), VocabularyError);
}
