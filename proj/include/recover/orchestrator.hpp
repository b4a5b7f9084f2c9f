#pragma once
// The online monitor-detect-recover loop and the per-step LLM baseline loop
// used for comparison and cost accounting.

#include <memory>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"
#include "recover/events.hpp"
#include "recover/injection.hpp"
#include "recover/kb.hpp"
#include "recover/percept.hpp"
#include "recover/planner.hpp"
#include "recover/reasoner.hpp"
#include "recover/recovery.hpp"
#include "recover/worldsim.hpp"

namespace recover {

enum class Outcome { NoFailure, RecoveredAndCompleted, RecoveredNotCompleted, NotRecovered };

inline const char* outcome_name(Outcome o) {
    switch (o) {
        case Outcome::NoFailure: return "NoFailure";
        case Outcome::RecoveredAndCompleted: return "RecoveredAndCompleted";
        case Outcome::RecoveredNotCompleted: return "RecoveredNotCompleted";
        case Outcome::NotRecovered: return "NotRecovered";
    }
    return "?";
}

struct RunConfig {
    std::vector<FailureInjection> injections;  // empty = nominal run
    int max_replans = 1;                       // single-failure mode; nested mode raises it
    int step_ceiling_mult = 4;
    uint64_t seed = 0;
    PerceptConfig percept;
    double ground_threshold = 0.35;
    CostModel cost;
};

struct PlannerCall {
    size_t prompt_tokens = 0;
    size_t completion_tokens = 0;
    double price = 0.0;
};

struct RunRecord {
    Outcome outcome = Outcome::NoFailure;
    std::string note;
    bool success = false;
    int executed_steps = 0;
    int detection_step = -1;  // executed-action index of the first finding
    std::optional<FailureFinding> finding;
    std::vector<Verdict> verdicts;  // one per executed action
    std::string strategy_id;
    std::vector<std::string> recovery_steps;
    std::vector<PlannerCall> planner_calls;
    int replans = 0;
    size_t verifier_calls = 0;  // baseline mode
    double total_cost = 0.0;
    bool budget_halted = false;
    bool audit_ok = false;
    std::string events_jsonl;
    WorldState final_world;

    double planner_cost() const {
        double c = 0;
        for (const auto& p : planner_calls) c += p.price;
        return c;
    }

    std::string to_json() const {
        nlohmann::ordered_json j;
        j["outcome"] = outcome_name(outcome);
        j["success"] = success;
        j["executed_steps"] = executed_steps;
        j["detection_step"] = detection_step;
        if (finding) {
            j["failure_class"] = finding->failure_class;
            j["failure_event"] = finding->event;
            j["failure_rule"] = finding->rule_name;
        }
        j["strategy"] = strategy_id;
        j["replans"] = replans;
        j["recovery_steps"] = recovery_steps;
        auto calls = nlohmann::ordered_json::array();
        for (const auto& c : planner_calls)
            calls.push_back({{"prompt_tokens", c.prompt_tokens},
                             {"completion_tokens", c.completion_tokens},
                             {"price", c.price}});
        j["planner_calls"] = calls;
        j["verifier_calls"] = verifier_calls;
        j["total_cost"] = total_cost;
        j["budget_halted"] = budget_halted;
        j["audit_ok"] = audit_ok;
        if (!note.empty()) j["note"] = note;
        return j.dump(2);
    }
};

namespace orchestrator_detail {

struct RunSession {
    KnowledgeBase kb;
    EventLog log;
    WorldState world;
    const Task& task;
    const RunConfig& cfg;

    std::vector<PlanStep> intended;           // what the run should do
    std::vector<std::string> intended_entities;  // plan-step entity per position
    int epoch = 0;

    RunSession(const KnowledgeBase& schema, const Task& t, const RunConfig& c)
        : kb(schema), world(t.initial), task(t), cfg(c) {
        kb.declare_entity("robot-gripper", "RobotGripper");
        kb.declare_entity("nothing-0", "Nothing");
        for (const auto& [id, o] : world.objects) kb.declare_entity(id, o.cls);
        for (const auto& h : world.humans) kb.declare_entity(h.id, "Human");
        for (const auto& [id, cls] : t.derived_decls)
            if (!kb.has_entity(id)) kb.declare_entity(id, cls);
        world.rng_seed = c.seed;
    }

    void assert_plan_tail(const std::vector<PlanStep>& plan, size_t from) {
        intended_entities.resize(from);
        for (size_t j = from; j < plan.size(); ++j) {
            std::string id = "plan" + std::to_string(epoch) + "_step_" + std::to_string(j);
            kb.declare_entity(id, "PlanStep");
            const PlanStep& s = plan[j];
            kb.assert_triple({Term::entity(id), "expectsActionName", Term::literal(s.action)});
            auto [src, tgt] = step_roles(s);
            if (src && kb.has_entity(*src))
                kb.assert_triple({Term::entity(id), "expectsSource", Term::entity(*src)});
            if (tgt && kb.has_entity(*tgt))
                kb.assert_triple({Term::entity(id), "expectsTarget", Term::entity(*tgt)});
            intended_entities.push_back(id);
        }
    }

    void observe() {
        SceneGraph g = label_scene(kb, world, cfg.percept);
        log.record_observation(kb, g.triples, g.states);
    }

    // Executes one step, records the action event, observes. Returns the
    // action event id and the execution outcome.
    std::pair<std::string, ExecOutcome> do_step(const PlanStep& step, const StepDirective& directive,
                                                size_t intended_pos) {
        ExecOutcome out = execute(kb, world, step, directive);
        for (const auto& id : out.created)
            if (!kb.has_entity(id)) kb.declare_entity(id, out.world.obj(id).cls);
        auto [src, tgt] = step_roles(step);
        if (out.instrument) src = out.instrument;
        const ActionSpec* spec = find_action(step.action);
        std::optional<std::string> step_entity;
        if (intended_pos < intended_entities.size()) step_entity = intended_entities[intended_pos];
        std::string ev = log.record_action(kb, step.action, spec->cls, src, tgt,
                                           classify_sound(kb, out.sound), step_entity);
        world = out.world;
        observe();
        return {ev, out};
    }
};

}  // namespace orchestrator_detail

// One pass of the RECOVER loop: observe, verify with the rule engine, and on
// a finding retrieve a strategy, re-plan once (more in nested mode), ground,
// splice, and continue.
inline RunRecord run_recover(const KnowledgeBase& schema_kb, const Task& task, const RunConfig& cfg,
                             const std::vector<RuleAst>& rules, PlannerPort& planner) {
    using orchestrator_detail::RunSession;
    RunRecord rec;
    RunSession s(schema_kb, task, cfg);

    std::optional<FailureInjection> primary;
    if (!cfg.injections.empty()) primary = cfg.injections.front();

    std::vector<PlanStep> current = executed_plan(task, primary);
    s.intended = task.plan;
    s.assert_plan_tail(s.intended, 0);
    s.observe();

    std::vector<PlanStep> executed_prefix;
    size_t next_injection = 0;
    int ceiling = static_cast<int>(task.plan.size()) * cfg.step_ceiling_mult + 8;
    bool aborted = false;

    for (size_t i = 0; i < current.size(); ++i) {
        if (rec.executed_steps >= ceiling) {
            rec.outcome = Outcome::NotRecovered;
            rec.note = "step ceiling reached";
            aborted = true;
            break;
        }
        PlanStep step = current[i];
        StepDirective directive;
        if (next_injection < cfg.injections.size() &&
            static_cast<int>(i) == cfg.injections[next_injection].trigger_step) {
            const FailureInjection& inj = cfg.injections[next_injection];
            if (inj.failure_id == 9) {
                for (const auto& h : s.world.humans)
                    s.kb.assert_triple({Term::entity(h.id), "type", Term::cls(inj.diet)});
            }
            std::string what = apply_pre_action_injection(s.kb, s.world, inj, step);
            for (const auto& [id, o] : s.world.objects)
                if (!s.kb.has_entity(id)) s.kb.declare_entity(id, o.cls);
            directive = trigger_directive(inj);
            ++next_injection;
        }

        auto [event_id, out] = s.do_step(step, directive, i);
        executed_prefix.push_back(step);
        ++rec.executed_steps;

        Verdict v = evaluate(s.kb, rules, event_id);
        rec.verdicts.push_back(v);

        if (out.rejected && rec.replans > 0 && v.success()) {
            rec.outcome = Outcome::NotRecovered;
            rec.note = "recovery step rejected: " + out.reject_reason;
            aborted = true;
            break;
        }
        if (v.success()) continue;

        if (rec.replans >= cfg.max_replans) {
            rec.outcome = Outcome::NotRecovered;
            rec.note = "failure detected after the replanning budget was spent";
            aborted = true;
            break;
        }

        FailureFinding finding = by_specificity(v.findings, s.kb).front();
        if (!rec.finding) {
            rec.finding = finding;
            rec.detection_step = static_cast<int>(i);
        }
        try {
            StrategyDecl strategy = retrieve(s.kb, finding);
            rec.strategy_id = strategy.id;
            ReplanContext ctx =
                build_context(s.kb, s.log, finding, strategy, task, s.world, s.intended, executed_prefix);
            PlannerResult pr = planner.replan(ctx);
            PlannerCall call{pr.prompt_tokens, pr.completion_tokens,
                             cfg.cost.price(pr.prompt_tokens, pr.completion_tokens)};
            rec.planner_calls.push_back(call);
            rec.total_cost += call.price;
            for (const auto& st : pr.steps) rec.recovery_steps.push_back(st);

            GroundedPlan gp = ground(pr.steps, s.kb, s.world, cfg.ground_threshold);
            if (!gp.rejected.empty()) {
                rec.outcome = Outcome::NotRecovered;
                rec.note = "ungroundable step: " + gp.rejected.front().first;
                aborted = true;
                break;
            }
            std::vector<PlanStep> next = executed_prefix;
            for (const auto& g : gp.steps) next.push_back(g.step);
            current = next;
            s.intended = current;
            s.epoch += 1;
            s.assert_plan_tail(s.intended, executed_prefix.size());
            ++rec.replans;
        } catch (const BudgetExceededError& e) {
            rec.outcome = Outcome::NotRecovered;
            rec.note = e.what();
            rec.budget_halted = true;
            aborted = true;
            break;
        } catch (const Error& e) {
            rec.outcome = Outcome::NotRecovered;
            rec.note = e.what();
            aborted = true;
            break;
        }
    }

    rec.success = success_check(s.kb, s.world, task.success);
    if (!aborted) {
        if (!rec.finding) {
            if (!primary)
                rec.outcome = Outcome::NoFailure;
            else {
                rec.outcome = Outcome::NotRecovered;
                rec.note = "injected failure was never detected";
            }
        } else {
            rec.outcome = rec.success ? Outcome::RecoveredAndCompleted : Outcome::RecoveredNotCompleted;
        }
    }
    try {
        s.log.audit(s.kb);
        rec.audit_ok = true;
    } catch (const Error& e) {
        rec.audit_ok = false;
        rec.note += std::string(rec.note.empty() ? "" : "; ") + e.what();
    }
    rec.events_jsonl = s.log.to_jsonl();
    rec.final_world = s.world;
    return rec;
}

// ---------------------------------------------------------------------------
// Baseline: an LLM-style verifier queried after every step plus an LLM-style
// re-planner, here served by deterministic stubs or replay text.
// ---------------------------------------------------------------------------

struct BaselineVerifier {
    // nullopt = never detects
    std::optional<int> detect_at_step;
    std::string verdict_text_success = "SUCCESS: the action matched its intended effect.";
    std::string verdict_text_failure = "FAILURE: the last action did not achieve its intended effect.";
};

struct BaselineReplanner {
    // Verbose fixed-form response; its groundability is not asserted.
    std::string response =
        "I inspected the scene carefully and it appears the previous action failed. "
        "The robot should retry the failed action and then continue with the rest of the plan "
        "exactly as originally specified, taking care to avoid the obstacle conditions observed.";
};

inline RunRecord run_baseline(const KnowledgeBase& schema_kb, const Task& task, const RunConfig& cfg,
                              const BaselineVerifier& verifier, const BaselineReplanner& replanner) {
    using orchestrator_detail::RunSession;
    RunRecord rec;
    RunSession s(schema_kb, task, cfg);

    std::optional<FailureInjection> primary;
    if (!cfg.injections.empty()) primary = cfg.injections.front();
    std::vector<PlanStep> current = executed_plan(task, primary);
    s.intended = task.plan;
    s.assert_plan_tail(s.intended, 0);
    s.observe();

    auto scene_text = [&](const LoggedEvent& e) {
        std::ostringstream os;
        for (const auto& t : e.scene) os << t << "\n";
        return os.str();
    };
    auto objects_text = [&] {
        std::ostringstream os;
        for (const auto& [id, o] : s.world.objects) os << id << ":" << o.cls << " ";
        return os.str();
    };

    size_t next_injection = 0;
    bool replanned = false;
    bool detected = false;
    auto charge = [&](size_t ptok, size_t ctok) {
        PlannerCall call{ptok, ctok, cfg.cost.price(ptok, ctok)};
        rec.planner_calls.push_back(call);
        rec.total_cost += call.price;
        return rec.total_cost <= cfg.cost.budget;
    };

    for (size_t i = 0; i < current.size(); ++i) {
        PlanStep step = current[i];
        StepDirective directive;
        if (next_injection < cfg.injections.size() &&
            static_cast<int>(i) == cfg.injections[next_injection].trigger_step) {
            const FailureInjection& inj = cfg.injections[next_injection];
            if (inj.failure_id == 9)
                for (const auto& h : s.world.humans)
                    s.kb.assert_triple({Term::entity(h.id), "type", Term::cls(inj.diet)});
            apply_pre_action_injection(s.kb, s.world, inj, step);
            for (const auto& [id, o] : s.world.objects)
                if (!s.kb.has_entity(id)) s.kb.declare_entity(id, o.cls);
            directive = trigger_directive(inj);
            ++next_injection;
        }
        auto [event_id, out] = s.do_step(step, directive, i);
        (void)event_id;
        ++rec.executed_steps;

        // per-step verifier query: pre/post scene graphs, audio, object list
        const auto& events = s.log.events();
        const LoggedEvent& post = events.back();
        const LoggedEvent& pre = events[events.size() - 3];
        std::string prompt = "Did the last action succeed?\nBefore:\n" + scene_text(pre) + "After:\n" +
                             scene_text(post) + "Audio: " + (out.sound ? *out.sound : "none") +
                             "\nObjects: " + objects_text();
        bool fired = !replanned && verifier.detect_at_step && static_cast<int>(i) == *verifier.detect_at_step;
        ++rec.verifier_calls;
        size_t ptok = cfg.cost.tokens(prompt);
        size_t ctok = cfg.cost.tokens(fired ? verifier.verdict_text_failure : verifier.verdict_text_success);
        if (!charge(ptok, ctok)) {
            rec.outcome = Outcome::NotRecovered;
            rec.budget_halted = true;
            rec.note = "baseline verifier exceeded the budget ceiling";
            rec.success = success_check(s.kb, s.world, task.success);
            rec.events_jsonl = s.log.to_jsonl();
            rec.final_world = s.world;
            try {
                s.log.audit(s.kb);
                rec.audit_ok = true;
            } catch (const Error&) {
            }
            return rec;
        }
        if (fired) {
            detected = true;
            rec.detection_step = static_cast<int>(i);
            std::string rp_prompt = "The plan failed. Scene:\n" + scene_text(post) +
                                    "Objects: " + objects_text() + "\nGoal: " + task.goal +
                                    "\nOriginal plan has " + std::to_string(task.plan.size()) + " steps.";
            size_t rptok = cfg.cost.tokens(rp_prompt);
            size_t rctok = cfg.cost.tokens(replanner.response);
            if (!charge(rptok, rctok)) {
                rec.outcome = Outcome::NotRecovered;
                rec.budget_halted = true;
                rec.note = "baseline replanner exceeded the budget ceiling";
                break;
            }
            GroundedPlan gp = ground({replanner.response}, s.kb, s.world, cfg.ground_threshold);
            replanned = true;
            if (!gp.rejected.empty()) {
                rec.note = "baseline replan did not ground";
                // keep executing the rest of the original plan
            } else {
                std::vector<PlanStep> next(current.begin(), current.begin() + static_cast<long>(i) + 1);
                for (const auto& g : gp.steps) next.push_back(g.step);
                current = next;
                s.intended = current;
                s.epoch += 1;
                s.assert_plan_tail(s.intended, i + 1);
            }
        }
    }

    // An undetected failure keeps the verifier polling until the budget runs
    // out, mirroring the per-step query pattern on a stuck task.
    if (primary && !detected) {
        const auto& events = s.log.events();
        const LoggedEvent& post = events.back();
        std::string prompt = "Did the last action succeed?\nScene:\n" + scene_text(post) +
                             "Objects: " + objects_text();
        for (int guard = 0; guard < 100000; ++guard) {
            ++rec.verifier_calls;
            if (!charge(cfg.cost.tokens(prompt), cfg.cost.tokens(verifier.verdict_text_success))) {
                rec.outcome = Outcome::NotRecovered;
                rec.budget_halted = true;
                rec.note = "baseline verifier exceeded the budget ceiling";
                break;
            }
        }
    }

    rec.success = success_check(s.kb, s.world, task.success);
    if (!rec.budget_halted) {
        if (!primary && !detected)
            rec.outcome = Outcome::NoFailure;
        else if (detected && rec.success)
            rec.outcome = Outcome::RecoveredAndCompleted;
        else if (detected)
            rec.outcome = Outcome::NotRecovered;
        else
            rec.outcome = Outcome::NotRecovered;
    }
    try {
        s.log.audit(s.kb);
        rec.audit_ok = true;
    } catch (const Error&) {
        rec.audit_ok = false;
    }
    rec.events_jsonl = s.log.to_jsonl();
    rec.final_world = s.world;
    return rec;
}

}  // namespace recover
