#pragma once
// Strategy retrieval (most-specific class, guard satisfaction, priority) and
// deterministic assembly of the re-planning context handed to a planner.

#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "recover/events.hpp"
#include "recover/kb.hpp"
#include "recover/reasoner.hpp"
#include "recover/worldsim.hpp"

namespace recover {

class NoStrategyError : public Error {
public:
    using Error::Error;
};

namespace recovery_detail {

// A guard holds when some bound entity satisfies every guard class.
inline bool guard_satisfied(const KnowledgeBase& kb, const StrategyDecl& s, const FailureFinding& f) {
    if (s.guard_classes.empty()) return true;
    for (const auto& [var, val] : f.bindings) {
        if (!kb.has_entity(val)) continue;
        bool all = true;
        for (const auto& g : s.guard_classes)
            if (!kb.is_instance(val, g)) {
                all = false;
                break;
            }
        if (all) return true;
    }
    return false;
}

}  // namespace recovery_detail

// Most-specific matching strategy: deepest failure class first, then highest
// priority, then lexicographic id.
inline StrategyDecl retrieve(const KnowledgeBase& kb, const FailureFinding& finding) {
    const StrategyDecl* best = nullptr;
    int best_depth = -1;
    for (const auto& s : kb.strategies()) {
        if (!kb.taxonomy().subsumes(s.failure_class, finding.failure_class)) continue;
        if (!recovery_detail::guard_satisfied(kb, s, finding)) continue;
        int depth = kb.taxonomy().depth_below(s.failure_class, "Failure");
        if (!best || depth > best_depth || (depth == best_depth && s.priority > best->priority) ||
            (depth == best_depth && s.priority == best->priority && s.id < best->id)) {
            best = &s;
            best_depth = depth;
        }
    }
    if (!best)
        throw NoStrategyError("no recovery strategy for " + finding.failure_class + " (rule " +
                              finding.rule_name + ")");
    return *best;
}

struct ReplanContext {
    StrategyDecl strategy;
    std::string instantiated_instruction;  // {object}/{failure} filled in
    std::string failure_class;
    std::string failure_object;  // salient entity, may be empty
    int failed_step_index = 0;   // index into intended_plan of the failed step

    std::string goal_text;
    std::string success_condition_text;
    std::vector<PlanStep> intended_plan;    // the plan the run is meant to follow
    std::vector<PlanStep> executed_prefix;  // what actually ran, failed step last

    std::string environment_state_text;  // rendered from the latest observation only
    std::vector<Triple> env_triples;     // the same content, structured
    std::vector<std::pair<std::string, std::string>> available_objects;  // (id, class)
    std::vector<std::string> available_actions;

    // The full prompt a text planner would receive.
    std::string prompt_text() const {
        std::ostringstream os;
        os << "A failure occurred while executing a kitchen task.\n";
        os << "Failure: " << failure_class;
        if (!failure_object.empty()) os << " involving " << failure_object;
        os << " at step " << failed_step_index + 1 << ".\n";
        os << "Recovery strategy: " << instantiated_instruction << "\n";
        os << "Goal: " << goal_text << "\n";
        os << "Success condition: " << success_condition_text << "\n";
        os << "Original plan:\n";
        for (size_t i = 0; i < intended_plan.size(); ++i)
            os << "  " << i + 1 << ". " << canonical_phrase(intended_plan[i]) << "\n";
        os << "Executed so far:\n";
        for (size_t i = 0; i < executed_prefix.size(); ++i)
            os << "  " << i + 1 << ". " << canonical_phrase(executed_prefix[i]) << "\n";
        os << "Environment state:\n" << environment_state_text;
        os << "Available objects:";
        for (const auto& [id, cls] : available_objects) os << " " << id << ":" << cls;
        os << "\nAvailable actions:";
        for (const auto& a : available_actions) os << " " << a;
        os << "\nRespond with one executable step per line.\n";
        return os.str();
    }
};

namespace recovery_detail {

inline std::string render_env(const std::vector<Triple>& scene) {
    // has_state triples become "(state, ...)" annotations on the subject.
    std::map<std::string, std::vector<std::string>> states;
    for (const auto& t : scene)
        if (t.predicate == "has_state") states[t.subject.text].push_back(t.object.text);
    std::ostringstream os;
    auto annotate = [&](const std::string& id) {
        auto it = states.find(id);
        if (it == states.end()) return id;
        std::string out = id + " (";
        for (size_t i = 0; i < it->second.size(); ++i) {
            if (i) out += ", ";
            out += it->second[i];
        }
        return out + ")";
    };
    std::set<std::string> seen;
    for (const auto& t : scene) {
        if (t.predicate == "has_state") continue;
        os << "  " << annotate(t.subject.text) << " " << t.predicate << " " << t.object.text << "\n";
        seen.insert(t.subject.text);
    }
    for (const auto& [id, st] : states)
        if (!seen.count(id)) os << "  " << annotate(id) << "\n";
    return os.str();
}

inline std::string substitute_all(std::string s, const std::string& key, const std::string& value) {
    size_t at;
    while ((at = s.find(key)) != std::string::npos) s.replace(at, key.size(), value);
    return s;
}

}  // namespace recovery_detail

inline std::string render_success_condition(const std::vector<SuccessAtom>& atoms) {
    std::ostringstream os;
    for (size_t i = 0; i < atoms.size(); ++i) {
        if (i) os << " and ";
        if (atoms[i].predicate == "diet_respected")
            os << "dietary preferences respected";
        else
            os << atoms[i].subject << " " << atoms[i].predicate << " " << atoms[i].object;
    }
    return os.str();
}

// Deterministic context assembly; the environment section comes solely from
// the latest observation event in the log.
inline ReplanContext build_context(const KnowledgeBase& kb, const EventLog& log,
                                   const FailureFinding& finding, const StrategyDecl& strategy,
                                   const Task& task, const WorldState& world,
                                   const std::vector<PlanStep>& intended_plan,
                                   const std::vector<PlanStep>& executed_prefix) {
    ReplanContext ctx;
    ctx.strategy = strategy;
    ctx.failure_class = finding.failure_class;
    ctx.failure_object = salient_object(finding, kb);
    ctx.failed_step_index = static_cast<int>(executed_prefix.size()) - 1;
    ctx.goal_text = task.goal;
    ctx.success_condition_text = render_success_condition(task.success);
    ctx.intended_plan = intended_plan;
    ctx.executed_prefix = executed_prefix;

    ctx.instantiated_instruction =
        recovery_detail::substitute_all(strategy.instruction, "{object}",
                                        ctx.failure_object.empty() ? "the object" : ctx.failure_object);
    ctx.instantiated_instruction =
        recovery_detail::substitute_all(ctx.instantiated_instruction, "{failure}", finding.failure_class);

    const LoggedEvent* last_obs = nullptr;
    for (auto it = log.events().rbegin(); it != log.events().rend(); ++it)
        if (it->kind == LoggedEvent::Kind::Observation) {
            last_obs = &*it;
            break;
        }
    if (!last_obs) throw Error("build_context: log has no observation event");
    ctx.env_triples = last_obs->scene;
    ctx.environment_state_text = recovery_detail::render_env(last_obs->scene);

    for (const auto& [id, o] : world.objects) ctx.available_objects.emplace_back(id, o.cls);
    for (const auto& spec : action_specs()) ctx.available_actions.push_back(spec.name);
    return ctx;
}

}  // namespace recover
