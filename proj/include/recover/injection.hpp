#pragma once
// The 12 injectable failure types: per-step eligibility over a nominal
// simulation of the task, the feasibility predicate, plan mutation for the
// planning failures, and the runtime hooks the orchestrator calls.

#include <optional>
#include <string>
#include <vector>

#include "recover/kb.hpp"
#include "recover/worldsim.hpp"

namespace recover {

struct FailureInjection {
    int failure_id = 0;    // 1..12
    int trigger_step = 0;  // index into the executed plan
    std::string diet = "Vegan";  // failure 9 configuration
};

inline const char* failure_class_of(int failure_id) {
    switch (failure_id) {
        case 1: return "EnclosedObjectFailure";
        case 2: return "DroppingObjFailure";
        case 3: return "DroppingAndDirtyObjFailure";
        case 4: return "DroppingAndBreakingObjFailure";
        case 5: return "DirtyObjFailure";
        case 6: return "OccupiedPutFailure";
        case 7: return "PlanningFailure";
        case 8: return "ActionExecutionFailure";
        case 9: return "DietaryConstraintsViolationFailure";
        case 10: return "PlanningFailure";
        case 11: return "OccupiedByLiquidFailure";
        case 12: return "MissingNavigationFailure";
        default: throw Error("unknown failure id " + std::to_string(failure_id));
    }
}

inline const char* failure_label(int failure_id) {
    if (failure_id == 7) return "PlanningFailure(missing-step)";
    if (failure_id == 10) return "PlanningFailure(wrong-step)";
    return failure_class_of(failure_id);
}

namespace injection_detail {

struct StepView {
    PlanStep step;
    WorldState before;  // world right before the step executes
};

// Nominal forward simulation; the task corpus guarantees it succeeds.
inline std::vector<StepView> simulate_nominal(const KnowledgeBase& kb, const Task& task) {
    std::vector<StepView> out;
    WorldState w = task.initial;
    for (const auto& step : task.plan) {
        out.push_back({step, w});
        ExecOutcome r = execute(kb, w, step);
        if (r.rejected)
            throw Error("task " + task.id + ": nominal plan step '" + canonical_phrase(step) +
                        "' rejected: " + r.reject_reason);
        w = std::move(r.world);
    }
    return out;
}

// The vessel receiving food or liquid at this step, when the step is one of
// the receiving forms (faucet filling is excluded: running water rinses).
inline std::optional<std::string> patient_vessel(const KnowledgeBase& kb, const StepView& sv) {
    const PlanStep& s = sv.step;
    const WorldState& w = sv.before;
    if (s.action == "pour") {
        if (w.alive(s.args[1]) && !has_property(kb, w.obj(s.args[1]).cls, "Drain")) return s.args[1];
        return std::nullopt;
    }
    if (s.action == "crack") return s.args[1];
    if (s.action == "put") {
        if (w.alive(s.args[0]) && kb.taxonomy().subsumes("Consumable", w.obj(s.args[0]).cls)) return s.args[1];
        return std::nullopt;
    }
    if (s.action == "toggle_on" && w.alive(s.args[0]) &&
        has_property(kb, w.obj(s.args[0]).cls, "Dispenser")) {
        auto docked = contained_in(w, s.args[0]);
        if (!docked.empty()) return docked.front();
    }
    return std::nullopt;
}

inline bool drop_guard_action(const std::string& action) {
    // The detection rule admits held-object actions and non-interactive ones.
    return action == "slice" || action == "pour" || action == "crack" || action == "fill" ||
           action == "navigate_to";
}

inline bool replacement_exists(const WorldState& w, const std::string& id) {
    if (!w.alive(id)) return false;
    const std::string& cls = w.obj(id).cls;
    for (const auto& [other, o] : w.objects)
        if (other != id && o.cls == cls) return true;
    return false;
}

inline bool occupier_available(const KnowledgeBase& kb, const WorldState& w, const std::string& slot,
                               const std::string& exclude, double radius = 0.8) {
    Vec3 at = w.position_of(slot);
    for (const auto& [id, o] : w.objects) {
        if (id == slot || id == exclude || id == "robot-1" || o.held) continue;
        if (!has_property(kb, o.cls, "Holdable") || kb.taxonomy().subsumes("Shard", o.cls)) continue;
        if (dist2d(w.position_of(id), at) <= radius) return true;
    }
    return false;
}

inline const std::map<std::string, std::string>& diet_conflict_classes() {
    static const std::map<std::string, std::string> m = {{"Vegan", "AnimalProduct"}, {"Celiac", "GlutenFood"}};
    return m;
}

}  // namespace injection_detail

// Steps of the nominal plan at which this failure type can be injected such
// that its structural requirements (including recoverability prerequisites
// like replacements) hold.
inline std::vector<int> eligible_steps(const KnowledgeBase& kb, const Task& task, int failure_id,
                                       const std::string& diet = "Vegan") {
    using namespace injection_detail;
    auto views = simulate_nominal(kb, task);
    std::vector<int> out;
    for (int i = 0; i < static_cast<int>(views.size()); ++i) {
        const StepView& sv = views[i];
        const PlanStep& s = sv.step;
        const WorldState& w = sv.before;
        bool ok = false;
        switch (failure_id) {
            case 1: {  // pick of an object sitting in an openable receptacle
                if (s.action != "pick_up") break;
                const std::string& c = w.obj(s.args[0]).container;
                ok = !c.empty() && has_property(kb, w.obj(c).cls, "Openable");
                break;
            }
            case 2:
            case 3:
            case 4: {
                if (!drop_guard_action(s.action) || w.held_id.empty()) break;
                const WorldObject& held = w.obj(w.held_id);
                bool breakable = has_property(kb, held.cls, "Breakable");
                bool filled = held.states.count("filled_with_liquid") > 0 || s.action == "fill";
                if (failure_id == 4)
                    ok = breakable && replacement_exists(w, w.held_id);
                else if (failure_id == 3)
                    ok = !breakable && filled;
                else
                    ok = !breakable && !filled;
                break;
            }
            case 5: {
                auto v = patient_vessel(kb, sv);
                if (!v || !has_property(kb, w.obj(*v).cls, "DirtyableVessel")) break;
                // a spoiled crack consumes the ingredient: redo needs another
                ok = s.action != "crack" || replacement_exists(w, s.args[0]);
                break;
            }
            case 6:
                ok = s.action == "put" && has_property(kb, w.obj(s.args[1]).cls, "SlotReceptacle") &&
                     occupier_available(kb, w, s.args[1], s.args[0]);
                break;
            case 7:
                ok = s.action == "navigate_to" && i + 1 < static_cast<int>(views.size()) &&
                     dist2d(w.robot_pos(), standing_point(w, s.args[0])) > 1e-6;
                break;
            case 8: {
                if (s.action != "pick_up") break;
                const std::string& c = w.obj(s.args[0]).container;
                ok = c.empty() || w.obj(c).states.count("open") > 0;
                break;
            }
            case 9: {
                if (s.action != "pick_up" || w.humans.empty()) break;
                auto it = diet_conflict_classes().find(diet);
                ok = it != diet_conflict_classes().end() &&
                     kb.taxonomy().subsumes(it->second, w.obj(s.args[0]).cls);
                break;
            }
            case 10:
                ok = true;
                break;
            case 11: {
                auto v = patient_vessel(kb, sv);
                ok = v && has_property(kb, w.obj(*v).cls, "Fillable") &&
                     !w.obj(*v).states.count("filled_with_liquid") && contained_in(w, *v).empty();
                break;
            }
            case 12:
                ok = s.action == "navigate_to" && w.held_id.empty() &&
                     dist2d(w.robot_pos(), standing_point(w, s.args[0])) > 1e-6;
                break;
            default:
                throw Error("unknown failure id " + std::to_string(failure_id));
        }
        if (ok) out.push_back(i);
    }
    return out;
}

inline bool feasible(const KnowledgeBase& kb, const Task& task, int failure_id) {
    return !eligible_steps(kb, task, failure_id).empty();
}

// Resolves the injection for a run: default trigger is the first eligible
// step; an explicit step must be eligible.
inline FailureInjection resolve_injection(const KnowledgeBase& kb, const Task& task, int failure_id,
                                          std::optional<int> at_step = std::nullopt) {
    auto eligible = eligible_steps(kb, task, failure_id);
    if (eligible.empty())
        throw Error("infeasible pair: " + task.id + " / " + failure_label(failure_id));
    FailureInjection inj;
    inj.failure_id = failure_id;
    if (at_step) {
        if (std::find(eligible.begin(), eligible.end(), *at_step) == eligible.end())
            throw Error("step " + std::to_string(*at_step) + " is not eligible for " +
                        failure_label(failure_id) + " on " + task.id);
        inj.trigger_step = *at_step;
    } else {
        inj.trigger_step = eligible.front();
    }
    return inj;
}

// The plan the robot is handed: failure 7 deletes the trigger step, failure
// 10 substitutes a grasp at an unliftable fixture.
inline std::vector<PlanStep> executed_plan(const Task& task, const std::optional<FailureInjection>& inj) {
    std::vector<PlanStep> plan = task.plan;
    if (!inj) return plan;
    if (inj->failure_id == 7) {
        plan.erase(plan.begin() + inj->trigger_step);
    } else if (inj->failure_id == 10) {
        std::string fixture = "counter_top-1";
        for (const auto& [id, o] : task.initial.objects)
            if (o.cls == "CounterTop") {
                fixture = id;
                break;
            }
        plan[inj->trigger_step] = PlanStep{"pick_up", {fixture}};
    }
    return plan;
}

// World/kb-side mutation right before the trigger step executes. Returns a
// description of what was perturbed (for the run record).
inline std::string apply_pre_action_injection(const KnowledgeBase& kb, WorldState& w,
                                              const FailureInjection& inj, const PlanStep& step) {
    using namespace injection_detail;
    switch (inj.failure_id) {
        case 1:
            inject_enclose(kb, w, step.args[0]);
            return "closed the receptacle enclosing " + step.args[0];
        case 5: {
            auto v = patient_vessel(kb, StepView{step, w});
            if (!v) throw Error("dirty injection: step has no patient vessel");
            inject_dirty(w, *v);
            return *v + " became dirty";
        }
        case 6: {
            std::string occ = inject_occupy(kb, w, step.args[1], step.args[0]);
            return occ + " now occupies " + step.args[1];
        }
        case 9: {
            for (auto& h : w.humans) h.diets.insert(inj.diet);
            return "declared diet " + inj.diet;
        }
        case 11: {
            auto v = patient_vessel(kb, StepView{step, w});
            if (!v) throw Error("liquid injection: step has no patient vessel");
            inject_fill_water(w, *v);
            return *v + " filled with water";
        }
        case 12: {
            std::string id = inject_obstruct(kb, w, step.args[0]);
            return id + " blocks the path to " + step.args[0];
        }
        default:
            return "";
    }
}

// Execute-time directive for the trigger step (drops and fumbles).
inline StepDirective trigger_directive(const FailureInjection& inj) {
    StepDirective d;
    switch (inj.failure_id) {
        case 2: d.drop = DropKind::Plain; break;
        case 3: d.drop = DropKind::Dirty; break;
        case 4: d.drop = DropKind::Break; break;
        case 8: d.fumble = true; break;
        default: break;
    }
    return d;
}

}  // namespace recover
