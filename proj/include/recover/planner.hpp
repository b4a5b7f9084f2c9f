#pragma once
// Pluggable re-planner: a deterministic template planner that expands the
// retrieved strategy against the context, an external text-planner adapter
// with a replay mode, and similarity grounding of free-text steps onto the
// executable action vocabulary.

#include <cmath>
#include <fstream>
#include <functional>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"

#include "recover/kb.hpp"
#include "recover/recovery.hpp"
#include "recover/text.hpp"
#include "recover/worldsim.hpp"

namespace recover {

struct CostModel {
    double tokens_per_word = 1.3;
    double price_per_1k_prompt = 0.03;
    double price_per_1k_completion = 0.06;
    double budget = 5.0;  // currency units

    size_t tokens(const std::string& s) const {
        return static_cast<size_t>(std::ceil(text::word_count(s) * tokens_per_word));
    }
    double price(size_t prompt_tokens, size_t completion_tokens) const {
        return price_per_1k_prompt * static_cast<double>(prompt_tokens) / 1000.0 +
               price_per_1k_completion * static_cast<double>(completion_tokens) / 1000.0;
    }
};

struct PlannerResult {
    std::vector<std::string> steps;
    size_t prompt_tokens = 0;
    size_t completion_tokens = 0;
};

class BudgetExceededError : public Error {
public:
    using Error::Error;
};

class UnexpandableStrategyError : public Error {
public:
    using Error::Error;
};

class PlannerPort {
public:
    virtual ~PlannerPort() = default;
    virtual PlannerResult replan(const ReplanContext& ctx) = 0;
};

// ---------------------------------------------------------------------------
// Template planner
// ---------------------------------------------------------------------------

namespace planner_detail {

// Read-only view over the context used by the strategy expansions.
struct CtxView {
    const ReplanContext& ctx;
    std::map<std::string, std::string> cls;                    // id -> class
    std::map<std::string, std::set<std::string>> state;       // id -> states
    std::map<std::string, std::string> in;                    // id -> container (incl. gripper)
    std::map<std::string, std::string> on;                    // id -> surface under it
    const Taxonomy& tax;

    CtxView(const ReplanContext& c, const Taxonomy& t) : ctx(c), tax(t) {
        for (const auto& [id, k] : c.available_objects) cls[id] = k;
        for (const auto& trp : c.env_triples) {
            if (trp.predicate == "has_state")
                state[trp.subject.text].insert(trp.object.text);
            else if (trp.predicate == "inside")
                in[trp.subject.text] = trp.object.text;
            else if (trp.predicate == "on-top-of")
                on[trp.subject.text] = trp.object.text;
        }
    }

    bool is_a(const std::string& id, const std::string& c) const {
        auto it = cls.find(id);
        return it != cls.end() && tax.subsumes(c, it->second);
    }
    bool has_state(const std::string& id, const std::string& s) const {
        auto it = state.find(id);
        return it != state.end() && it->second.count(s) > 0;
    }
    std::string held() const {
        for (const auto& [id, c] : in)
            if (c == "robot-gripper" && id != "nothing-0") return id;
        return "";
    }
    // First instance of a class, by id order.
    std::string first_of(const std::string& c, const std::string& exclude = "") const {
        for (const auto& [id, k] : cls)
            if (id != exclude && tax.subsumes(c, k)) return id;
        return "";
    }
    std::string surface_under(const std::string& id) const {
        auto it = on.find(id);
        if (it != on.end()) return it->second;
        return first_of("CounterTop");
    }
    std::string container_of(const std::string& id) const {
        auto it = in.find(id);
        if (it != in.end() && it->second != "robot-gripper") return it->second;
        return "";
    }
    std::vector<std::string> contents_of(const std::string& id) const {
        std::vector<std::string> out;
        for (const auto& [x, c] : in)
            if (c == id) out.push_back(x);
        return out;
    }
    std::vector<std::string> all_of(const std::string& c) const {
        std::vector<std::string> out;
        for (const auto& [id, k] : cls)
            if (tax.subsumes(c, k)) out.push_back(id);
        return out;
    }
};

struct StepWriter {
    std::vector<PlanStep> steps;
    void emit(const std::string& action, std::initializer_list<std::string> args) {
        steps.push_back({action, std::vector<std::string>(args)});
    }
};

inline std::string step_anchor(const PlanStep& s) {
    if (s.action == "put" || s.action == "pour" || s.action == "crack" || s.action == "fill")
        return s.args[1];
    return s.args.empty() ? "" : s.args[0];
}

// Prepends a positioning navigation when the continuation starts with a
// non-navigation step.
inline void glue_continuation(StepWriter& w, const std::vector<PlanStep>& continuation) {
    if (!continuation.empty() && continuation.front().action != "navigate_to") {
        std::string anchor = step_anchor(continuation.front());
        if (!anchor.empty()) w.emit("navigate_to", {anchor});
    }
    for (const auto& s : continuation) w.steps.push_back(s);
}

inline std::vector<PlanStep> remaining(const ReplanContext& ctx, int from) {
    std::vector<PlanStep> out;
    for (size_t i = static_cast<size_t>(from); i < ctx.intended_plan.size(); ++i)
        out.push_back(ctx.intended_plan[i]);
    return out;
}

inline std::vector<PlanStep> substitute(std::vector<PlanStep> steps, const std::string& from,
                                        const std::string& to) {
    for (auto& s : steps)
        for (auto& a : s.args)
            if (a == from) a = to;
    return steps;
}

// Shared wash sequence: vessel already held, robot anywhere. Leaves the
// vessel held and clean; restores the faucet if this code toggled it.
inline void wash_held_vessel(StepWriter& w, const CtxView& v, const std::string& vessel,
                             bool leave_faucet_on) {
    std::string basin = v.first_of("SinkBasin");
    std::string faucet = v.first_of("Faucet");
    if (basin.empty() || faucet.empty())
        throw UnexpandableStrategyError("no sink available to wash " + vessel);
    w.emit("navigate_to", {basin});
    w.emit("put", {vessel, basin});
    bool toggled = !v.has_state(faucet, "toggled_on");
    if (toggled) w.emit("toggle_on", {faucet});
    w.emit("clean", {vessel});
    if (toggled && !leave_faucet_on) w.emit("toggle_off", {faucet});
    w.emit("pick_up", {vessel});
}

inline void dispose(StepWriter& w, const CtxView& v, const std::string& id, bool first) {
    std::string garbage = v.first_of("GarbageCan");
    if (garbage.empty()) throw UnexpandableStrategyError("no garbage can for disposal");
    if (!first) w.emit("navigate_to", {id});
    w.emit("pick_up", {id});
    w.emit("navigate_to", {garbage});
    w.emit("put", {id, garbage});
}

// Fetches `target` (possibly from a closed receptacle); leaves it held.
inline void fetch(StepWriter& w, const CtxView& v, const std::string& target) {
    w.emit("navigate_to", {target});
    std::string c = v.container_of(target);
    bool reopen = !c.empty() && v.has_state(c, "closed");
    if (reopen) w.emit("open", {c});
    w.emit("pick_up", {target});
    if (reopen) w.emit("close", {c});
}

// Projects which derived ids the kept steps will create, so steps depending
// on products of removed steps are filtered too.
inline std::vector<PlanStep> filter_conflict_steps(const CtxView& v,
                                                   const std::vector<PlanStep>& steps,
                                                   const std::string& conflict_class) {
    std::set<std::string> available;
    std::map<std::string, int> counters;
    for (const auto& [id, k] : v.cls) {
        available.insert(id);
        // recover per-class counters from existing derived ids
        std::string kebab = kebab_of_class(k);
        if (text::starts_with(id, kebab + "-")) {
            int n = std::atoi(id.substr(kebab.size() + 1).c_str());
            counters[k] = std::max(counters[k], n);
        }
    }
    auto project = [&](const std::string& c) {
        int n = ++counters[c];
        available.insert(kebab_of_class(c) + "-" + std::to_string(n));
    };
    std::vector<PlanStep> kept;
    for (const auto& s : steps) {
        bool drop = false;
        for (const auto& a : s.args) {
            bool conflict = available.count(a) && v.cls.count(a) && v.is_a(a, conflict_class);
            if (conflict || !available.count(a)) {
                drop = true;
                break;
            }
        }
        if (drop) continue;
        kept.push_back(s);
        if (s.action == "slice" && v.cls.count(s.args[0])) {
            std::string product = worldsim_detail::slice_product_class(v.cls.at(s.args[0]));
            if (!product.empty()) {
                project(product);
                project(product);
            }
            available.erase(s.args[0]);
        } else if (s.action == "crack") {
            project("CrackedEgg");
            project("Eggshell");
            available.erase(s.args[0]);
        }
    }
    return kept;
}

}  // namespace planner_detail

// Deterministic expansion of the retrieved strategy into executable steps,
// phrased canonically. Pure in the context; throws UnexpandableStrategyError
// when a required object is missing.
class TemplatePlanner : public PlannerPort {
public:
    explicit TemplatePlanner(const KnowledgeBase& kb, CostModel cost = {}) : kb_(kb), cost_(cost) {}

    PlannerResult replan(const ReplanContext& ctx) override {
        using namespace planner_detail;
        CtxView v(ctx, kb_.taxonomy());
        StepWriter w;
        int d = ctx.failed_step_index;
        auto ref = remaining(ctx, d);
        if (ref.empty() && ctx.strategy.id != "diet_put_away")
            throw UnexpandableStrategyError("nothing to resume");
        const std::string& obj = ctx.failure_object;
        const std::string& sid = ctx.strategy.id;

        if (sid == "drop_pick_back_up" || sid == "break_pick_back_up") {
            w.emit("pick_up", {obj});
            glue_continuation(w, ref);
        } else if (sid == "drop_dirty_wash") {
            w.emit("pick_up", {obj});
            bool refilled_by_plan = !ref.empty() && ref.front().action == "fill" && ref.front().args[0] == obj;
            wash_held_vessel(w, v, obj, /*leave_faucet_on=*/true);
            if (!refilled_by_plan) {
                std::string faucet = v.first_of("Faucet");
                w.emit("fill", {obj, faucet});
                w.emit("toggle_off", {faucet});
            }
            glue_continuation(w, ref);
        } else if (sid == "break_fetch_replacement" || sid == "safety_clear_floor") {
            auto shards = v.all_of("Shard");
            if (shards.empty() && sid == "break_fetch_replacement")
                throw UnexpandableStrategyError("no debris found for " + obj);
            for (size_t i = 0; i < shards.size(); ++i) dispose(w, v, shards[i], i == 0);
            if (sid == "break_fetch_replacement") {
                std::string broken_cls = v.cls.count(obj) ? v.cls.at(obj) : "";
                std::string repl = v.first_of(broken_cls.empty() ? "PhysicalObject" : broken_cls, obj);
                if (repl.empty() || broken_cls.empty())
                    throw UnexpandableStrategyError("no replacement available for " + obj);
                fetch(w, v, repl);
                auto contents = v.contents_of(obj);
                if (!contents.empty()) {
                    std::string staging = v.first_of("CounterTop");
                    w.emit("navigate_to", {staging});
                    w.emit("put", {repl, staging});
                    for (const auto& c : contents) {
                        w.emit("navigate_to", {c});
                        w.emit("pick_up", {c});
                        w.emit("navigate_to", {repl});
                        w.emit("put", {c, repl});
                    }
                    w.emit("pick_up", {repl});
                }
                glue_continuation(w, substitute(ref, obj, repl));
            } else {
                glue_continuation(w, ref);
            }
        } else if (sid == "enclosed_open_retry") {
            std::string c = v.container_of(obj);
            if (c.empty()) throw UnexpandableStrategyError(obj + " has no enclosing receptacle");
            w.emit("open", {c});
            glue_continuation(w, ref);
        } else if (sid == "dirty_wash_redo") {
            expand_dirty(w, v, ctx, obj, ref);
        } else if (sid == "occupied_clear_retry") {
            std::string held = v.held();
            std::string staging = v.first_of("CounterTop");
            if (held.empty() || staging.empty())
                throw UnexpandableStrategyError("cannot stage the held object");
            w.emit("navigate_to", {staging});
            w.emit("put", {held, staging});
            w.emit("navigate_to", {obj});
            w.emit("pick_up", {obj});
            w.emit("navigate_to", {staging});
            w.emit("put", {obj, staging});
            w.emit("pick_up", {held});
            glue_continuation(w, ref);
        } else if (sid == "plan_resync" || sid == "exec_retry") {
            glue_continuation(w, ref);
        } else if (sid == "diet_put_away") {
            std::string held = v.held();
            std::string conflict_cls = v.is_a(obj, "GlutenFood") ? "GlutenFood" : "AnimalProduct";
            if (!held.empty()) {
                std::string storage;
                for (const auto& [id, k] : v.cls)
                    if (v.is_a(id, "StorageReceptacle") && v.has_state(id, "open")) {
                        storage = id;
                        break;
                    }
                if (storage.empty()) storage = v.first_of("CounterTop");
                w.emit("navigate_to", {storage});
                w.emit("put", {held, storage});
            }
            auto continuation = filter_conflict_steps(v, remaining(ctx, d + 1), conflict_cls);
            glue_continuation(w, continuation);
        } else if (sid == "liquid_empty_redo") {
            expand_liquid(w, v, ctx, obj, ref);
        } else if (sid == "blocked_move_aside") {
            std::string staging = v.first_of("CounterTop");
            if (staging.empty()) throw UnexpandableStrategyError("no surface to clear the blocker onto");
            w.emit("navigate_to", {obj});
            w.emit("pick_up", {obj});
            w.emit("navigate_to", {staging});
            w.emit("put", {obj, staging});
            glue_continuation(w, ref);
        } else {
            throw UnexpandableStrategyError("no expansion for strategy " + sid);
        }

        PlannerResult r;
        for (const auto& s : w.steps) r.steps.push_back(canonical_phrase(s));
        std::string completion;
        for (const auto& s : r.steps) completion += s + "\n";
        r.prompt_tokens = cost_.tokens(ctx.prompt_text());
        r.completion_tokens = cost_.tokens(completion);
        return r;
    }

private:
    void expand_dirty(planner_detail::StepWriter& w, const planner_detail::CtxView& v,
                      const ReplanContext& ctx, const std::string& vessel,
                      const std::vector<PlanStep>& ref) {
        using namespace planner_detail;
        if (ref.empty()) throw UnexpandableStrategyError("nothing to redo");
        const PlanStep& spoiled = ref.front();
        std::string held = v.held();
        std::string home_surface = v.surface_under(vessel);
        std::string home_container = v.container_of(vessel);

        if (spoiled.action == "crack") {
            // shell in hand, spoiled yolk in the vessel
            if (!held.empty()) {
                std::string garbage = v.first_of("GarbageCan");
                if (garbage.empty()) throw UnexpandableStrategyError("no garbage can for disposal");
                w.emit("navigate_to", {garbage});
                w.emit("put", {held, garbage});
            }
            for (const auto& c : v.contents_of(vessel)) {
                w.emit("navigate_to", {c});
                w.emit("pick_up", {c});
                std::string garbage = v.first_of("GarbageCan");
                w.emit("navigate_to", {garbage});
                w.emit("put", {c, garbage});
            }
            w.emit("navigate_to", {vessel});
            w.emit("pick_up", {vessel});
            wash_held_vessel(w, v, vessel, false);
            w.emit("navigate_to", {home_surface});
            w.emit("put", {vessel, home_surface});
            // the cracked ingredient is gone; fetch one of the same kind
            std::string repl = v.first_of("Crackable");
            if (repl.empty()) throw UnexpandableStrategyError("no replacement ingredient to crack");
            fetch(w, v, repl);
            glue_continuation(w, substitute(ref, spoiled.args[0], repl));
            return;
        }

        std::vector<PlanStep> cont = ref;
        if (spoiled.action == "pour" || spoiled.action == "fill") {
            if (!held.empty()) {
                if (spoiled.action == "pour") {
                    w.emit("put", {held, home_surface});
                    w.emit("pick_up", {vessel});
                }
                // fill: the dirty vessel itself is in hand already
            } else {
                w.emit("pick_up", {vessel});
            }
            std::string basin = v.first_of("SinkBasin");
            if (v.has_state(vessel, "filled_with_liquid")) {
                w.emit("navigate_to", {basin});
                w.emit("pour", {vessel, basin});
            }
            bool leave_on = spoiled.action == "fill";
            wash_held_vessel(w, v, vessel, leave_on);
            if (spoiled.action == "pour") {
                w.emit("navigate_to", {home_surface});
                w.emit("put", {vessel, home_surface});
                w.emit("pick_up", {held});
            }
            glue_continuation(w, cont);
            return;
        }
        if (spoiled.action == "put") {
            // the food reached the dirty vessel; take everything out first
            auto contents = v.contents_of(vessel);
            for (const auto& c : contents) {
                w.emit("navigate_to", {c});
                w.emit("pick_up", {c});
                w.emit("put", {c, home_surface});
            }
            w.emit("pick_up", {vessel});
            wash_held_vessel(w, v, vessel, false);
            if (!home_container.empty()) {
                w.emit("navigate_to", {home_container});
                w.emit("put", {vessel, home_container});
            } else {
                w.emit("navigate_to", {home_surface});
                w.emit("put", {vessel, home_surface});
            }
            for (const auto& c : contents) {
                if (c == spoiled.args[0]) continue;  // the redo step re-places it
                w.emit("pick_up", {c});
                w.emit("put", {c, vessel});
            }
            if (!contents.empty()) {
                w.emit("pick_up", {spoiled.args[0]});
            }
            glue_continuation(w, cont);
            return;
        }
        if (spoiled.action == "toggle_on") {
            // dispensed into a dirty docked vessel
            std::string machine = spoiled.args[0];
            w.emit("navigate_to", {vessel});
            w.emit("pick_up", {vessel});
            std::string basin = v.first_of("SinkBasin");
            if (v.has_state(vessel, "filled_with_liquid")) {
                w.emit("navigate_to", {basin});
                w.emit("pour", {vessel, basin});
            }
            wash_held_vessel(w, v, vessel, false);
            w.emit("navigate_to", {machine});
            w.emit("put", {vessel, machine});
            glue_continuation(w, cont);
            return;
        }
        throw UnexpandableStrategyError("no dirty-vessel expansion for " + spoiled.action);
    }

    void expand_liquid(planner_detail::StepWriter& w, const planner_detail::CtxView& v,
                       const ReplanContext& ctx, const std::string& vessel,
                       const std::vector<PlanStep>& ref) {
        using namespace planner_detail;
        (void)ctx;
        if (ref.empty()) throw UnexpandableStrategyError("nothing to redo");
        const PlanStep& blocked = ref.front();
        std::string held = v.held();
        std::string basin = v.first_of("SinkBasin");
        if (basin.empty()) throw UnexpandableStrategyError("no sink to empty " + vessel + " into");
        std::string home_surface = v.surface_under(vessel);
        std::string home_container = v.container_of(vessel);

        (void)blocked;
        bool parked_held = !held.empty() && held != vessel;
        if (parked_held) w.emit("put", {held, home_surface});
        if (held != vessel) {
            w.emit("navigate_to", {vessel});
            w.emit("pick_up", {vessel});
        }
        w.emit("navigate_to", {basin});
        w.emit("pour", {vessel, basin});
        if (!home_container.empty()) {
            w.emit("navigate_to", {home_container});
            w.emit("put", {vessel, home_container});
        } else {
            w.emit("navigate_to", {home_surface});
            w.emit("put", {vessel, home_surface});
        }
        if (parked_held) w.emit("pick_up", {held});
        glue_continuation(w, ref);
    }

    const KnowledgeBase& kb_;
    CostModel cost_;
};

// ---------------------------------------------------------------------------
// Replay planner: canned responses with a token-count header.
// ---------------------------------------------------------------------------

// Fixture format: optional leading "# prompt_tokens: N" / "# completion_tokens: M"
// comment lines, then one step per line.
class ReplayPlanner : public PlannerPort {
public:
    explicit ReplayPlanner(const std::string& fixture_path, CostModel cost = {})
        : path_(fixture_path), cost_(cost) {}

    PlannerResult replan(const ReplanContext& ctx) override {
        std::ifstream in(path_);
        if (!in) throw Error("cannot open replay fixture " + path_);
        PlannerResult r;
        bool have_pt = false, have_ct = false;
        std::string line;
        std::string body;
        while (std::getline(in, line)) {
            auto t = text::trim(line);
            if (t.empty()) continue;
            if (t[0] == '#') {
                auto kv = t.substr(1);
                auto colon = kv.find(':');
                if (colon != std::string::npos) {
                    auto key = text::trim(kv.substr(0, colon));
                    auto val = text::trim(kv.substr(colon + 1));
                    if (key == "prompt_tokens") {
                        r.prompt_tokens = std::stoul(val);
                        have_pt = true;
                    } else if (key == "completion_tokens") {
                        r.completion_tokens = std::stoul(val);
                        have_ct = true;
                    }
                }
                continue;
            }
            r.steps.push_back(t);
            body += t + "\n";
        }
        if (!have_pt) r.prompt_tokens = cost_.tokens(ctx.prompt_text());
        if (!have_ct) r.completion_tokens = cost_.tokens(body);
        return r;
    }

private:
    std::string path_;
    CostModel cost_;
};

// ---------------------------------------------------------------------------
// External text-planner adapter
// ---------------------------------------------------------------------------

struct EndpointConfig {
    std::string base_url;        // e.g. http://127.0.0.1:8077
    std::string path = "/complete";
    std::string auth_token_env;  // env var holding a bearer token, optional
    std::string model;
    CostModel cost;
};

// Transport is pluggable so tests can fake the wire; the default
// implementation lives in the CLI where cpp-httplib is linked.
using TransportFn = std::function<std::string(const EndpointConfig&, const std::string& request_json)>;

// POSTs {model, prompt} and reads {text, prompt_tokens?, completion_tokens?}.
// A non-list response body is treated as one step per line.
class ExternalPlanner : public PlannerPort {
public:
    ExternalPlanner(EndpointConfig cfg, TransportFn transport, double* accumulated_cost = nullptr)
        : cfg_(std::move(cfg)), transport_(std::move(transport)), accumulated_cost_(accumulated_cost) {}

    PlannerResult replan(const ReplanContext& ctx) override;

private:
    EndpointConfig cfg_;
    TransportFn transport_;
    double* accumulated_cost_;
};

inline PlannerResult ExternalPlanner::replan(const ReplanContext& ctx) {
    std::string prompt = ctx.prompt_text();
    PlannerResult r;
    r.prompt_tokens = cfg_.cost.tokens(prompt);

    nlohmann::ordered_json req;
    req["model"] = cfg_.model;
    req["prompt"] = prompt;
    std::string body = transport_(cfg_, req.dump());

    std::string response_text;
    try {
        auto j = nlohmann::json::parse(body);
        if (j.contains("text"))
            response_text = j.at("text").get<std::string>();
        else
            response_text = body;
        if (j.contains("prompt_tokens")) r.prompt_tokens = j.at("prompt_tokens").get<size_t>();
        if (j.contains("completion_tokens")) r.completion_tokens = j.at("completion_tokens").get<size_t>();
    } catch (const nlohmann::json::exception&) {
        response_text = body;  // plain text: one step per line
    }
    std::istringstream is(response_text);
    std::string line;
    std::string joined;
    for (; std::getline(is, line);) {
        auto t = text::trim(line);
        if (t.empty()) continue;
        r.steps.push_back(t);
        joined += t + "\n";
    }
    if (r.completion_tokens == 0) r.completion_tokens = cfg_.cost.tokens(joined);

    double call_cost = cfg_.cost.price(r.prompt_tokens, r.completion_tokens);
    double total = call_cost + (accumulated_cost_ ? *accumulated_cost_ : 0.0);
    if (total > cfg_.cost.budget)
        throw BudgetExceededError("planner budget ceiling reached (" + std::to_string(total) + " > " +
                                  std::to_string(cfg_.cost.budget) + ")");
    if (accumulated_cost_) *accumulated_cost_ = total;
    return r;
}

// ---------------------------------------------------------------------------
// Grounding
// ---------------------------------------------------------------------------

struct GroundedStep {
    PlanStep step;
    double score = 0.0;
};

struct GroundedPlan {
    std::vector<GroundedStep> steps;
    std::vector<std::pair<std::string, double>> rejected;  // (text, best score)
};

namespace planner_detail {

inline std::map<std::string, int> token_counts(const std::string& s) {
    std::map<std::string, int> out;
    for (const auto& t : text::word_tokens(s)) ++out[t];
    return out;
}

inline double cosine(const std::map<std::string, int>& a, const std::map<std::string, int>& b) {
    double dot = 0, na = 0, nb = 0;
    for (const auto& [t, n] : a) {
        na += static_cast<double>(n) * n;
        auto it = b.find(t);
        if (it != b.end()) dot += static_cast<double>(n) * it->second;
    }
    for (const auto& [t, n] : b) nb += static_cast<double>(n) * n;
    if (na == 0 || nb == 0) return 0.0;
    return dot / (std::sqrt(na) * std::sqrt(nb));
}

}  // namespace planner_detail

// Every type-correct (action, args) combination over the live objects.
inline std::vector<PlanStep> grounding_candidates(const KnowledgeBase& kb, const WorldState& w) {
    std::vector<PlanStep> out;
    std::vector<std::pair<std::string, std::string>> objs;  // (id, cls)
    for (const auto& [id, o] : w.objects) objs.emplace_back(id, o.cls);
    for (const auto& spec : action_specs()) {
        for (const auto& [id1, c1] : objs) {
            if (!kb.taxonomy().subsumes(spec.arg1_class, c1)) continue;
            if (spec.arity == 1) {
                out.push_back({spec.name, {id1}});
                continue;
            }
            for (const auto& [id2, c2] : objs) {
                if (id2 == id1) continue;
                if (!kb.taxonomy().subsumes(spec.arg2_class, c2)) continue;
                out.push_back({spec.name, {id1, id2}});
            }
        }
    }
    return out;
}

// Maps each free-text step onto the best-scoring candidate by token cosine
// against canonical phrases. Steps under the threshold are rejections, not
// errors. Ties break on action name, then argument ids.
inline GroundedPlan ground(const std::vector<std::string>& steps, const KnowledgeBase& kb,
                           const WorldState& w, double threshold = 0.35) {
    using planner_detail::cosine;
    using planner_detail::token_counts;
    GroundedPlan plan;
    auto candidates = grounding_candidates(kb, w);
    std::vector<std::map<std::string, int>> cand_tokens;
    cand_tokens.reserve(candidates.size());
    for (const auto& c : candidates) cand_tokens.push_back(token_counts(canonical_phrase(c)));

    for (const auto& step_text : steps) {
        auto tokens = token_counts(step_text);
        double best_score = -1.0;
        const PlanStep* best = nullptr;
        for (size_t i = 0; i < candidates.size(); ++i) {
            double s = cosine(tokens, cand_tokens[i]);
            if (s > best_score + 1e-12) {
                best_score = s;
                best = &candidates[i];
            } else if (best && std::abs(s - best_score) <= 1e-12) {
                if (candidates[i].action < best->action ||
                    (candidates[i].action == best->action && candidates[i].args < best->args))
                    best = &candidates[i];
            }
        }
        if (!best || best_score < threshold) {
            plan.rejected.emplace_back(step_text, best_score < 0 ? 0.0 : best_score);
        } else {
            plan.steps.push_back({*best, best_score});
        }
    }
    return plan;
}

// Exhaustive-scan scoring oracle used by the test suite: returns the best
// (score, step) for one text with no shortlist or early exit.
inline std::pair<double, PlanStep> ground_oracle_best(const std::string& step_text,
                                                      const KnowledgeBase& kb, const WorldState& w) {
    using planner_detail::cosine;
    using planner_detail::token_counts;
    auto tokens = token_counts(step_text);
    double best_score = 0.0;
    PlanStep best;
    bool first = true;
    for (const auto& c : grounding_candidates(kb, w)) {
        double s = cosine(tokens, token_counts(canonical_phrase(c)));
        bool better = first || s > best_score + 1e-12 ||
                      (std::abs(s - best_score) <= 1e-12 &&
                       (c.action < best.action || (c.action == best.action && c.args < best.args)));
        if (better) {
            best = c;
            best_score = s;
            first = false;
        }
    }
    return {best_score, best};
}

}  // namespace recover
