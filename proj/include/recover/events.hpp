#pragma once
// Alternating observation/action event log, its triple encoding in the
// knowledge base (reified scene-graph triples, sounds, pre/post links), the
// protocol auditor, and JSON-lines export.

#include <optional>
#include <set>
#include <string>
#include <vector>

#include "json.hpp"
#include "recover/kb.hpp"

namespace recover {

struct LoggedEvent {
    enum class Kind : uint8_t { Observation, Action };
    Kind kind;
    std::string id;  // event_<n>
    int tick = 0;

    // action events
    std::string action;      // action name, e.g. "slice"
    std::string action_cls;  // ontology class, e.g. "Slice"
    std::optional<std::string> source;
    std::optional<std::string> target;
    std::optional<std::string> sound_class;
    std::optional<std::string> plan_step_entity;

    // observation events
    std::vector<Triple> scene;                                   // includes has_state triples
    std::vector<std::pair<std::string, std::string>> states;     // (object, state) convenience copy
};

class EventLog {
public:
    const std::vector<LoggedEvent>& events() const { return events_; }
    bool empty() const { return events_.empty(); }
    const LoggedEvent& back() const { return events_.back(); }

    // Appends an observation, reifies its scene triples into the kb, and
    // closes the preceding action's hasPostconditions link.
    std::string record_observation(KnowledgeBase& kb, const std::vector<Triple>& scene,
                                   const std::vector<std::pair<std::string, std::string>>& states = {}) {
        if (!events_.empty() && events_.back().kind != LoggedEvent::Kind::Action)
            throw Error("event alternation violation: consecutive observation events");
        LoggedEvent ev;
        ev.kind = LoggedEvent::Kind::Observation;
        ev.id = next_event_id();
        ev.tick = static_cast<int>(events_.size());
        ev.scene = scene;
        ev.states = states;

        kb.declare_entity(ev.id, "ObservationEvent");
        std::string act = "act_" + std::to_string(events_.size());
        kb.declare_entity(act, "Observation");
        kb.assert_triple({Term::entity(ev.id), "hasAction", Term::entity(act)});
        assert_time(kb, ev);
        for (const auto& t : scene) {
            std::string trp = "trp-" + std::to_string(reified_count_++);
            kb.declare_entity(trp, "Triple");
            kb.assert_triple({Term::entity(trp), "hasSubject", t.subject});
            kb.assert_triple({Term::entity(trp), "hasPredicate", Term::literal(t.predicate)});
            kb.assert_triple({Term::entity(trp), "hasObject", t.object});
            kb.assert_triple({Term::entity(ev.id), "hasTriple", Term::entity(trp)});
        }
        if (!events_.empty()) {
            const auto& prev = events_.back();
            kb.assert_triple({Term::entity(prev.id), "hasPostconditions", Term::entity(ev.id)});
        }
        events_.push_back(std::move(ev));
        return events_.back().id;
    }

    // Appends an action event linked to the preceding observation.
    std::string record_action(KnowledgeBase& kb, const std::string& action_name,
                              const std::string& action_cls,
                              const std::optional<std::string>& source,
                              const std::optional<std::string>& target,
                              const std::optional<std::string>& sound_class,
                              const std::optional<std::string>& plan_step_entity = std::nullopt) {
        if (events_.empty() || events_.back().kind != LoggedEvent::Kind::Observation)
            throw Error("event alternation violation: action event requires a preceding observation");
        if (!kb.taxonomy().has_class(action_cls) || !kb.taxonomy().subsumes("Action", action_cls))
            throw Error("unknown action class " + action_cls);

        LoggedEvent ev;
        ev.kind = LoggedEvent::Kind::Action;
        ev.id = next_event_id();
        ev.tick = static_cast<int>(events_.size());
        ev.action = action_name;
        ev.action_cls = action_cls;
        ev.source = source;
        ev.target = target;
        ev.sound_class = sound_class;
        ev.plan_step_entity = plan_step_entity;

        kb.declare_entity(ev.id, "ActionEvent");
        std::string act = "act_" + std::to_string(events_.size());
        kb.declare_entity(act, action_cls);
        kb.assert_triple({Term::entity(ev.id), "hasAction", Term::entity(act)});
        kb.assert_triple({Term::entity(ev.id), "performedActionName", Term::literal(action_name)});
        if (source) kb.assert_triple({Term::entity(ev.id), "hasSource", Term::entity(*source)});
        if (target) kb.assert_triple({Term::entity(ev.id), "hasTarget", Term::entity(*target)});
        if (sound_class) {
            if (!kb.sound_classes().count(*sound_class))
                throw VocabularyError("unknown sound class " + *sound_class);
            std::string snd = "sound_" + std::to_string(events_.size());
            kb.declare_entity(snd, *sound_class);
            kb.assert_triple({Term::entity(ev.id), "has_sound", Term::entity(snd)});
        }
        if (plan_step_entity)
            kb.assert_triple({Term::entity(ev.id), "executesStep", Term::entity(*plan_step_entity)});
        kb.assert_triple({Term::entity(ev.id), "hasPreconditions", Term::entity(events_.back().id)});
        assert_time(kb, ev);
        events_.push_back(std::move(ev));
        return events_.back().id;
    }

    // Protocol auditor: strict alternation starting and ending with an
    // observation, and correct pre/post linkage for every action event.
    void audit(const KnowledgeBase& kb) const {
        if (events_.empty()) return;
        if (events_.front().kind != LoggedEvent::Kind::Observation)
            throw Error("audit: log must start with an observation");
        if (events_.back().kind != LoggedEvent::Kind::Observation)
            throw Error("audit: log must end with an observation");
        for (size_t i = 0; i < events_.size(); ++i) {
            bool expect_obs = i % 2 == 0;
            if ((events_[i].kind == LoggedEvent::Kind::Observation) != expect_obs)
                throw Error("audit: alternation broken at " + events_[i].id);
            if (events_[i].kind == LoggedEvent::Kind::Action) {
                Triple pre{Term::entity(events_[i].id), "hasPreconditions", Term::entity(events_[i - 1].id)};
                Triple post{Term::entity(events_[i].id), "hasPostconditions", Term::entity(events_[i + 1].id)};
                if (!kb.contains(pre)) throw Error("audit: missing hasPreconditions for " + events_[i].id);
                if (!kb.contains(post)) throw Error("audit: missing hasPostconditions for " + events_[i].id);
            }
        }
        size_t scene_total = 0;
        for (const auto& e : events_) scene_total += e.scene.size();
        if (scene_total != reified_count_)
            throw Error("audit: reified triple count mismatch");
    }

    size_t reified_count() const { return reified_count_; }

    // One event per line, stable field order.
    std::string to_jsonl() const {
        std::string out;
        for (const auto& e : events_) {
            nlohmann::ordered_json j;
            j["event"] = e.id;
            j["kind"] = e.kind == LoggedEvent::Kind::Observation ? "observation" : "action";
            j["tick"] = e.tick;
            if (e.kind == LoggedEvent::Kind::Action) {
                j["action"] = e.action;
                j["action_class"] = e.action_cls;
                if (e.source) j["source"] = *e.source;
                if (e.target) j["target"] = *e.target;
                if (e.sound_class) j["sound"] = *e.sound_class;
                if (e.plan_step_entity) j["step"] = *e.plan_step_entity;
            } else {
                auto triples = nlohmann::ordered_json::array();
                for (const auto& t : e.scene)
                    triples.push_back({t.subject.text, t.predicate, t.object.text});
                j["triples"] = triples;
            }
            out += j.dump();
            out += '\n';
        }
        return out;
    }

    // Rebuilds a log (and its kb encoding) from to_jsonl output. Scene triple
    // object terms are resolved against the kb like snapshot loading.
    static EventLog from_jsonl(const std::string& text, KnowledgeBase& kb) {
        EventLog log;
        std::istringstream is(text);
        std::string line;
        while (std::getline(is, line)) {
            if (text::trim(line).empty()) continue;
            auto j = nlohmann::json::parse(line);
            if (j.at("kind") == "observation") {
                std::vector<Triple> scene;
                for (const auto& t : j.at("triples")) {
                    std::string s = t.at(0), p = t.at(1), o = t.at(2);
                    Term obj = kb.has_entity(o)              ? Term::entity(o)
                               : kb.taxonomy().has_class(o)  ? Term::cls(o)
                                                             : Term::literal(o);
                    scene.push_back({Term::entity(s), p, obj});
                }
                log.record_observation(kb, scene);
            } else {
                auto opt = [&](const char* k) -> std::optional<std::string> {
                    if (j.contains(k)) return j.at(k).get<std::string>();
                    return std::nullopt;
                };
                log.record_action(kb, j.at("action"), j.at("action_class"), opt("source"), opt("target"),
                                  opt("sound"), std::nullopt);
            }
        }
        return log;
    }

private:
    std::string next_event_id() const { return "event_" + std::to_string(events_.size()); }

    void assert_time(KnowledgeBase& kb, const LoggedEvent& ev) {
        kb.assert_triple({Term::entity(ev.id), "at_tick", Term::literal(std::to_string(ev.tick))});
        kb.assert_triple({Term::entity(ev.id), "at_time", Term::literal(std::to_string(ev.tick) + ".0s")});
    }

    std::vector<LoggedEvent> events_;
    size_t reified_count_ = 0;
};

}  // namespace recover
