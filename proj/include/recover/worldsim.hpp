#pragma once
// Deterministic symbolic kitchen: objects with boxes, states and containment,
// executable actions with effects and rejection reasons, failure injections,
// task files, and the feasibility/eligibility engine over the 12 failure
// types.

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "recover/core.hpp"
#include "recover/kb.hpp"
#include "recover/text.hpp"

namespace recover {

struct Vec3 {
    double x = 0, y = 0, z = 0;
};

inline double dist2d(const Vec3& a, const Vec3& b) {
    return std::hypot(a.x - b.x, a.y - b.y);
}

struct WorldObject {
    std::string id;
    std::string cls;
    Vec3 pos;   // box center; authoritative only when free-standing
    Vec3 half;  // half extents
    std::set<std::string> states;
    std::string container;  // receptacle id, "" when free-standing
    bool held = false;

    double top() const { return pos.z + half.z; }
    double bottom() const { return pos.z - half.z; }
};

struct HumanAgent {
    std::string id;
    std::set<std::string> diets;  // diet class names, e.g. Vegan
};

struct PlanStep {
    std::string action;
    std::vector<std::string> args;

    bool operator==(const PlanStep&) const = default;
};

struct SuccessAtom {
    // subject/object may be an entity id or a capitalized class name
    // (existential over live instances); predicate "diet_respected" stands
    // alone. A diet-waivable atom is dropped when a declared dietary
    // preference conflicts with the subject's class.
    std::string subject;
    std::string predicate;
    std::string object;
    bool diet_waivable = false;
};

struct WorldState {
    std::map<std::string, WorldObject> objects;
    std::vector<HumanAgent> humans;
    std::string held_id;  // "" when the gripper is empty
    int tick = 0;
    uint64_t rng_seed = 0;  // reserved; every effect below is deterministic

    std::map<std::string, std::vector<std::string>> derivations;  // parent -> children
    std::set<std::string> removed;
    std::map<std::string, int> class_counters;  // derived-id allocation per class

    const WorldObject& obj(const std::string& id) const {
        auto it = objects.find(id);
        if (it == objects.end()) throw Error("unknown world object " + id);
        return it->second;
    }
    WorldObject& obj(const std::string& id) {
        auto it = objects.find(id);
        if (it == objects.end()) throw Error("unknown world object " + id);
        return it->second;
    }
    bool alive(const std::string& id) const { return objects.count(id) > 0; }

    Vec3 robot_pos() const { return obj("robot-1").pos; }

    // Resolves through containment and the gripper.
    Vec3 position_of(const std::string& id) const {
        const WorldObject& o = obj(id);
        if (o.held) return robot_pos();
        if (!o.container.empty() && alive(o.container)) return position_of(o.container);
        return o.pos;
    }
};

// ---- action vocabulary ----

struct ActionSpec {
    std::string name;
    std::string cls;
    int arity;
    std::string phrase;      // canonical grounding phrase, %1/%2 placeholders
    std::string arg1_class;  // grounding constraint (class or property)
    std::string arg2_class;
};

inline const std::vector<ActionSpec>& action_specs() {
    static const std::vector<ActionSpec> specs = {
        {"pick_up", "PickUp", 1, "pick up %1", "Holdable", ""},
        {"put", "Put", 2, "put %1 on %2", "Holdable", "Receptacle"},
        {"open", "Open", 1, "open %1", "Openable", ""},
        {"close", "Close", 1, "close %1", "Openable", ""},
        {"toggle_on", "ToggleOn", 1, "toggle on %1", "Toggleable", ""},
        {"toggle_off", "ToggleOff", 1, "toggle off %1", "Toggleable", ""},
        {"slice", "Slice", 1, "slice %1", "Sliceable", ""},
        {"pour", "Pour", 2, "pour %1 into %2", "Fillable", "Receptacle"},
        {"crack", "Crack", 2, "crack %1 into %2", "Crackable", "DirtyableVessel"},
        {"fill", "Fill", 2, "fill %1 from %2", "Fillable", "Faucet"},
        {"clean", "Clean", 1, "clean %1", "DirtyableVessel", ""},
        {"navigate_to", "NavigateTo", 1, "navigate to %1", "PhysicalObject", ""},
    };
    return specs;
}

inline const ActionSpec* find_action(const std::string& name) {
    for (const auto& s : action_specs())
        if (s.name == name) return &s;
    return nullptr;
}

inline std::string canonical_phrase(const PlanStep& step) {
    const ActionSpec* spec = find_action(step.action);
    if (!spec) throw Error("unknown action " + step.action);
    std::string out = spec->phrase;
    for (size_t i = 0; i < step.args.size(); ++i) {
        std::string ph = "%" + std::to_string(i + 1);
        auto at = out.find(ph);
        if (at != std::string::npos) out.replace(at, ph.size(), step.args[i]);
    }
    return out;
}

// (source, target) roles of a step, mirroring how events record them.
inline std::pair<std::optional<std::string>, std::optional<std::string>> step_roles(const PlanStep& s) {
    if (s.action == "put" || s.action == "pour" || s.action == "crack" || s.action == "fill")
        return {s.args[0], s.args.size() > 1 ? std::optional<std::string>(s.args[1]) : std::nullopt};
    return {std::nullopt, s.args.empty() ? std::nullopt : std::optional<std::string>(s.args[0])};
}

// ---- class metadata ----

inline Vec3 default_half_extents(const std::string& cls) {
    static const std::map<std::string, Vec3> table = {
        {"CounterTop", {0.30, 0.20, 0.45}}, {"DiningTable", {0.50, 0.40, 0.40}},
        {"Cabinet", {0.30, 0.20, 0.30}},    {"Fridge", {0.35, 0.30, 0.90}},
        {"Microwave", {0.25, 0.18, 0.18}},  {"Toaster", {0.12, 0.10, 0.12}},
        {"CoffeeMachine", {0.15, 0.15, 0.20}}, {"StoveBurner", {0.12, 0.12, 0.03}},
        {"Faucet", {0.04, 0.04, 0.10}},     {"SinkBasin", {0.25, 0.18, 0.08}},
        {"GarbageCan", {0.15, 0.15, 0.30}}, {"Floor", {2.50, 2.50, 0.03}},
        {"Robot", {0.25, 0.25, 0.90}},      {"Knife", {0.12, 0.03, 0.02}},
        {"Tomato", {0.04, 0.04, 0.04}},     {"Potato", {0.04, 0.04, 0.04}},
        {"Lettuce", {0.07, 0.07, 0.06}},    {"Cucumber", {0.08, 0.03, 0.03}},
        {"Bread", {0.08, 0.05, 0.05}},      {"Egg", {0.03, 0.03, 0.03}},
        {"Cheese", {0.05, 0.04, 0.03}},     {"Apple", {0.04, 0.04, 0.04}},
        {"TomatoSlice", {0.035, 0.035, 0.01}}, {"PotatoSlice", {0.035, 0.035, 0.01}},
        {"LettuceSlice", {0.035, 0.035, 0.01}}, {"CucumberSlice", {0.035, 0.035, 0.01}},
        {"BreadSlice", {0.05, 0.04, 0.01}}, {"CrackedEgg", {0.04, 0.04, 0.01}},
        {"Eggshell", {0.02, 0.02, 0.02}},   {"Mug", {0.045, 0.045, 0.05}},
        {"Cup", {0.045, 0.045, 0.05}},      {"PlasticCup", {0.04, 0.04, 0.05}},
        {"Glass", {0.035, 0.035, 0.06}},    {"Plate", {0.11, 0.11, 0.015}},
        {"Bowl", {0.08, 0.08, 0.05}},       {"Pot", {0.11, 0.11, 0.07}},
        {"Pan", {0.13, 0.10, 0.04}},        {"WineBottle", {0.04, 0.04, 0.16}},
        {"SoapBottle", {0.035, 0.035, 0.09}}, {"DishSponge", {0.05, 0.035, 0.02}},
        {"Shard", {0.02, 0.02, 0.01}},      {"Obstruction", {0.18, 0.18, 0.25}},
    };
    auto it = table.find(cls);
    if (it != table.end()) return it->second;
    return {0.05, 0.05, 0.05};
}

// Base height for fixtures that do not sit on the floor.
inline double default_base_z(const std::string& cls) {
    if (cls == "Cabinet") return 1.20;
    if (cls == "StoveBurner") return 0.90;
    if (cls == "SinkBasin") return 0.75;
    if (cls == "Faucet") return 0.98;
    if (cls == "Floor") return -0.06;  // top face at z = 0
    return 0.0;
}

inline std::string kebab_of_class(const std::string& cls) {
    std::string out;
    for (char c : cls) {
        if (std::isupper(static_cast<unsigned char>(c))) {
            if (!out.empty()) out += '-';
            out += static_cast<char>(std::tolower(c));
        } else {
            out += c;
        }
    }
    return out;
}

inline bool has_property(const KnowledgeBase& kb, const std::string& cls, const std::string& prop) {
    return kb.taxonomy().subsumes(prop, cls);
}

inline bool obj_is(const KnowledgeBase& kb, const WorldState& w, const std::string& id, const std::string& cls) {
    return w.alive(id) && kb.taxonomy().subsumes(cls, w.obj(id).cls);
}

// ---- geometry shared with the percept module ----

constexpr double kReachRadius = 0.9;

inline Vec3 standing_point(const WorldState& w, const std::string& target) {
    Vec3 t = w.position_of(target);
    double dx = 2.5 - t.x, dy = 2.5 - t.y;
    double n = std::hypot(dx, dy);
    if (n < 1e-9) {
        dx = 0;
        dy = 1;
        n = 1;
    }
    return {t.x + 0.35 * dx / n, t.y + 0.35 * dy / n, 0.9};
}

inline bool reachable(const WorldState& w, const std::string& target) {
    Vec3 r = w.robot_pos();
    Vec3 t = w.position_of(target);
    return std::hypot(r.x - t.x, r.y - t.y) <= kReachRadius;
}

inline bool rests_on(const WorldState& w, const WorldObject& a, const WorldObject& b, double eps = 0.011) {
    if (a.held || !a.container.empty()) return false;
    if (std::abs(a.bottom() - b.top()) > eps) return false;
    double ox = std::min(a.pos.x + a.half.x, b.pos.x + b.half.x) - std::max(a.pos.x - a.half.x, b.pos.x - b.half.x);
    double oy = std::min(a.pos.y + a.half.y, b.pos.y + b.half.y) - std::max(a.pos.y - a.half.y, b.pos.y - b.half.y);
    if (ox <= 0 || oy <= 0) return false;
    double overlap = ox * oy;
    double foot_a = 4 * a.half.x * a.half.y;
    double foot_b = 4 * b.half.x * b.half.y;
    return overlap >= 0.5 * std::min(foot_a, foot_b);
}

// Objects resting directly on `surface`, sorted by id.
inline std::vector<std::string> resting_on(const WorldState& w, const std::string& surface) {
    std::vector<std::string> out;
    const WorldObject& s = w.obj(surface);
    for (const auto& [id, o] : w.objects) {
        if (id == surface || o.held || !o.container.empty()) continue;
        if (rests_on(w, o, s)) out.push_back(id);
    }
    return out;
}

inline std::vector<std::string> contained_in(const WorldState& w, const std::string& receptacle) {
    std::vector<std::string> out;
    for (const auto& [id, o] : w.objects)
        if (o.container == receptacle) out.push_back(id);
    return out;
}

// 2D segment/box intersection with the box inflated by the robot radius.
inline bool segment_hits_box(Vec3 a, Vec3 b, const WorldObject& o, double inflate) {
    double minx = o.pos.x - o.half.x - inflate, maxx = o.pos.x + o.half.x + inflate;
    double miny = o.pos.y - o.half.y - inflate, maxy = o.pos.y + o.half.y + inflate;
    // Liang-Barsky clip of the segment against the rectangle.
    double dx = b.x - a.x, dy = b.y - a.y;
    double t0 = 0.0, t1 = 1.0;
    auto clip = [&](double p, double q) {
        if (std::abs(p) < 1e-12) return q >= 0;
        double r = q / p;
        if (p < 0) {
            if (r > t1) return false;
            if (r > t0) t0 = r;
        } else {
            if (r < t0) return false;
            if (r < t1) t1 = r;
        }
        return true;
    };
    return clip(-dx, a.x - minx) && clip(dx, maxx - a.x) && clip(-dy, a.y - miny) && clip(dy, maxy - a.y);
}

// Movable objects obstructing the straight path from the robot to the
// standing point of `target`. Debris at either endpoint is stepped around.
inline std::vector<std::string> path_blockers(const KnowledgeBase& kb, const WorldState& w,
                                              const std::string& target, double endpoint_clearance = 0.5,
                                              double inflate = 0.25) {
    std::vector<std::string> out;
    Vec3 from = w.robot_pos();
    Vec3 to = standing_point(w, target);
    for (const auto& [id, o] : w.objects) {
        if (id == target || id == "robot-1" || o.held || !o.container.empty()) continue;
        if (!has_property(kb, o.cls, "Holdable")) continue;
        if (kb.taxonomy().subsumes("Shard", o.cls)) continue;
        if (o.states.count("broken")) continue;
        if (o.bottom() > 0.1) continue;  // only floor-standing obstacles
        if (dist2d(o.pos, from) < endpoint_clearance || dist2d(o.pos, to) < endpoint_clearance) continue;
        if (segment_hits_box(from, to, o, inflate)) out.push_back(id);
    }
    return out;
}

// ---- task definition ----

struct Task {
    std::string id;    // "T4"
    std::string name;  // "Fry egg in a pan"
    std::string goal;
    WorldState initial;
    std::vector<std::string> task_objects;
    std::vector<std::pair<std::string, std::string>> derived_decls;  // (id, class)
    std::vector<PlanStep> plan;
    std::vector<SuccessAtom> success;
};

inline PlanStep parse_step_text(const std::string& s, const std::string& file, size_t lineno) {
    auto lp = s.find('(');
    auto rp = s.rfind(')');
    if (lp == std::string::npos || rp == std::string::npos || rp < lp)
        throw ParseError(file, lineno, "malformed step: " + s);
    PlanStep step;
    step.action = text::trim(s.substr(0, lp));
    for (auto& part : text::split(s.substr(lp + 1, rp - lp - 1), ',')) {
        auto a = text::trim(part);
        if (!a.empty()) step.args.push_back(a);
    }
    const ActionSpec* spec = find_action(step.action);
    if (!spec) throw ParseError(file, lineno, "unknown action " + step.action);
    if (static_cast<int>(step.args.size()) != spec->arity)
        throw ParseError(file, lineno, "action " + step.action + " expects " + std::to_string(spec->arity) +
                                           " argument(s): " + s);
    return step;
}

inline Task load_task(const std::string& path, const KnowledgeBase& kb) {
    std::ifstream in(path);
    if (!in) throw Error("cannot open task file " + path);
    Task task;
    WorldState& w = task.initial;
    std::string line;
    size_t lineno = 0;
    std::set<std::string> known;  // declared + derived ids referencable by plan/success

    auto note_object = [&](const std::string& id, const std::string& cls, size_t ln) {
        if (!kb.taxonomy().has_class(cls)) throw ParseError(path, ln, "unknown class " + cls);
        if (known.count(id)) throw ParseError(path, ln, "duplicate object id " + id);
        known.insert(id);
    };

    while (std::getline(in, line)) {
        ++lineno;
        auto hash = line.find('#');
        if (hash != std::string::npos) line = line.substr(0, hash);
        line = text::trim(line);
        if (line.empty()) continue;
        auto parts = text::split_ws(line);
        const std::string& kw = parts[0];

        if (kw == "task") {
            task.id = parts.at(1);
            auto q1 = line.find('"'), q2 = line.rfind('"');
            if (q1 != std::string::npos && q2 > q1) task.name = line.substr(q1 + 1, q2 - q1 - 1);
        } else if (kw == "goal") {
            auto q1 = line.find('"'), q2 = line.rfind('"');
            if (q1 == std::string::npos || q2 <= q1) throw ParseError(path, lineno, "goal must be quoted");
            task.goal = line.substr(q1 + 1, q2 - q1 - 1);
        } else if (kw == "object") {
            if (parts.size() < 3) throw ParseError(path, lineno, "object needs id and class");
            WorldObject o;
            o.id = parts[1];
            o.cls = parts[2];
            note_object(o.id, o.cls, lineno);
            o.half = default_half_extents(o.cls);
            bool placed = false;
            std::string on_surface;
            for (size_t i = 3; i < parts.size(); ++i) {
                if (parts[i] == "at" && i + 2 < parts.size()) {
                    o.pos.x = std::stod(parts[i + 1]);
                    o.pos.y = std::stod(parts[i + 2]);
                    i += 2;
                    placed = true;
                } else if (parts[i] == "on" && i + 1 < parts.size()) {
                    on_surface = parts[i + 1];
                    ++i;
                } else if (parts[i] == "in" && i + 1 < parts.size()) {
                    o.container = parts[i + 1];
                    ++i;
                } else if (parts[i] == "state" && i + 1 < parts.size()) {
                    o.states.insert(parts[i + 1]);
                    ++i;
                } else {
                    throw ParseError(path, lineno, "unknown object attribute " + parts[i]);
                }
            }
            if (!o.container.empty()) {
                if (!w.objects.count(o.container))
                    throw ParseError(path, lineno, "unresolved container " + o.container);
                o.pos = w.objects.at(o.container).pos;
            } else if (!on_surface.empty()) {
                if (!w.objects.count(on_surface)) throw ParseError(path, lineno, "unresolved surface " + on_surface);
                const WorldObject& s = w.objects.at(on_surface);
                if (!placed) {
                    o.pos.x = s.pos.x;
                    o.pos.y = s.pos.y;
                }
                o.pos.z = s.top() + o.half.z;
            } else {
                o.pos.z = default_base_z(o.cls) + o.half.z;
            }
            // implicit initial states
            if (has_property(kb, o.cls, "Openable") && !o.states.count("open")) o.states.insert("closed");
            if (has_property(kb, o.cls, "Toggleable") && !o.states.count("toggled_on"))
                o.states.insert("toggled_off");
            if (has_property(kb, o.cls, "AlwaysOpen")) o.states.insert("open");
            if (o.states.count("filled_with_water") || o.states.count("filled_with_wine") ||
                o.states.count("filled_with_coffee"))
                o.states.insert("filled_with_liquid");
            w.objects.emplace(o.id, std::move(o));
        } else if (kw == "robot") {
            WorldObject r;
            r.id = "robot-1";
            r.cls = "Robot";
            r.half = default_half_extents("Robot");
            r.pos = {std::stod(parts.at(2)), std::stod(parts.at(3)), 0.9};
            note_object(r.id, r.cls, lineno);
            w.objects.emplace(r.id, std::move(r));
        } else if (kw == "human") {
            HumanAgent h;
            h.id = parts.at(1);
            w.humans.push_back(h);
            known.insert(h.id);
        } else if (kw == "task_objects") {
            for (size_t i = 1; i < parts.size(); ++i) task.task_objects.push_back(parts[i]);
        } else if (kw == "derived") {
            if (parts.size() != 3) throw ParseError(path, lineno, "derived needs id and class");
            note_object(parts[1], parts[2], lineno);
            task.derived_decls.emplace_back(parts[1], parts[2]);
        } else if (kw == "step") {
            task.plan.push_back(parse_step_text(line.substr(5), path, lineno));
        } else if (kw == "holds" || kw == "holds_unless_dietary") {
            bool waivable = kw == "holds_unless_dietary";
            if (parts.size() == 2 && parts[1] == "diet_respected") {
                task.success.push_back({"", "diet_respected", "", false});
            } else if (parts.size() == 4) {
                task.success.push_back({parts[1], parts[2], parts[3], waivable});
            } else {
                throw ParseError(path, lineno, "malformed success atom");
            }
        } else {
            throw ParseError(path, lineno, "unknown task directive " + kw);
        }
    }

    if (!w.objects.count("robot-1")) throw Error(path + ": task declares no robot");
    for (const auto& s : task.plan)
        for (const auto& a : s.args)
            if (!known.count(a)) throw Error(path + ": plan references undeclared object " + a);
    for (const auto& sa : task.success) {
        if (sa.predicate == "diet_respected") continue;
        if (!known.count(sa.subject) && !kb.taxonomy().has_class(sa.subject))
            throw Error(path + ": success atom references unknown term " + sa.subject);
        // has_state objects are state literals, not declared entities
        if (sa.predicate != "has_state" && !known.count(sa.object) && !kb.taxonomy().has_class(sa.object))
            throw Error(path + ": success atom references unknown term " + sa.object);
    }
    for (const auto& t : task.task_objects)
        if (!known.count(t)) throw Error(path + ": task_objects references undeclared " + t);
    return task;
}

// ---- execution ----

enum class DropKind { None, Plain, Dirty, Break };

struct StepDirective {
    DropKind drop = DropKind::None;
    bool fumble = false;
};

struct ExecOutcome {
    WorldState world;
    std::optional<std::string> sound;  // sound class name
    bool rejected = false;
    std::string reject_reason;
    std::vector<std::string> created;                 // new object ids, creation order
    std::optional<std::string> instrument;            // held tool recorded as event source
};

namespace worldsim_detail {

inline void place_on_surface(WorldState& w, const std::string& id, const std::string& surface) {
    WorldObject& o = w.obj(id);
    const WorldObject& s = w.obj(surface);
    size_t n = resting_on(w, surface).size();
    static const double offsets[][2] = {{0, 0},       {0.12, 0},     {-0.12, 0},   {0, 0.12},
                                        {0.12, 0.12}, {-0.12, 0.12}, {0, -0.12},   {0.12, -0.12},
                                        {-0.12, -0.12}};
    const auto& off = offsets[n % 9];
    o.pos = {s.pos.x + off[0], s.pos.y + off[1], s.top() + o.half.z};
    o.container.clear();
    o.held = false;
}

inline void place_inside(WorldState& w, const std::string& id, const std::string& receptacle) {
    WorldObject& o = w.obj(id);
    o.container = receptacle;
    o.pos = w.obj(receptacle).pos;
    o.held = false;
}

inline void place_on_floor_near_robot(WorldState& w, const std::string& id, double dx, double dy) {
    WorldObject& o = w.obj(id);
    Vec3 r = w.robot_pos();
    o.pos = {r.x + dx, r.y + dy, o.half.z};
    o.container.clear();
    o.held = false;
}

inline std::string new_derived(WorldState& w, const KnowledgeBase& kb, const std::string& cls,
                               const std::string& parent, std::vector<std::string>& created) {
    int n = ++w.class_counters[cls];
    std::string id = kebab_of_class(cls) + "-" + std::to_string(n);
    WorldObject o;
    o.id = id;
    o.cls = cls;
    o.half = default_half_extents(cls);
    (void)kb;
    w.objects.emplace(id, std::move(o));
    if (!parent.empty()) w.derivations[parent].push_back(id);
    created.push_back(id);
    return id;
}

inline void add_fill(WorldObject& o, const std::string& liquid_state) {
    o.states.insert(liquid_state);
    o.states.insert("filled_with_liquid");
}

inline void clear_fill(WorldObject& o) {
    for (auto it = o.states.begin(); it != o.states.end();) {
        if (text::starts_with(*it, "filled_with_"))
            it = o.states.erase(it);
        else
            ++it;
    }
}

inline std::string fill_flavor(const WorldObject& o) {
    for (const auto& s : o.states)
        if (text::starts_with(s, "filled_with_") && s != "filled_with_liquid") return s;
    return o.states.count("filled_with_liquid") ? "filled_with_liquid" : "";
}

inline std::optional<std::string> appliance_sound(const std::string& verb, const std::string& cls) {
    static const std::map<std::pair<std::string, std::string>, std::string> table = {
        {{"open", "Fridge"}, "OpenFridgeSound"},
        {{"close", "Fridge"}, "CloseFridgeSound"},
        {{"open", "Microwave"}, "OpenMicrowaveSound"},
        {{"close", "Microwave"}, "CloseMicrowaveSound"},
        {{"open", "Cabinet"}, "OpenCabinetSound"},
        {{"close", "Cabinet"}, "CloseCabinetSound"},
        {{"toggle_on", "Faucet"}, "ToggleOnFaucetSound"},
        {{"toggle_off", "Faucet"}, "ToggleOffFaucetSound"},
        {{"toggle_on", "Microwave"}, "ToggleOnMicrowaveSound"},
        {{"toggle_off", "Microwave"}, "ToggleOffMicrowaveSound"},
        {{"toggle_on", "Toaster"}, "ToggleOnToasterSound"},
        {{"toggle_off", "Toaster"}, "ToggleOffToasterSound"},
        {{"toggle_on", "CoffeeMachine"}, "ToggleOnCoffeeMachineSound"},
        {{"toggle_off", "CoffeeMachine"}, "ToggleOffCoffeeMachineSound"},
        {{"toggle_on", "StoveBurner"}, "ToggleOnStoveSound"},
        {{"toggle_off", "StoveBurner"}, "ToggleOffStoveSound"},
    };
    auto it = table.find({verb, cls});
    if (it == table.end()) return std::nullopt;
    return it->second;
}

inline std::string slice_product_class(const std::string& cls) {
    static const std::map<std::string, std::string> table = {
        {"Tomato", "TomatoSlice"},   {"Potato", "PotatoSlice"}, {"Lettuce", "LettuceSlice"},
        {"Cucumber", "CucumberSlice"}, {"Bread", "BreadSlice"},
    };
    auto it = table.find(cls);
    if (it == table.end()) return "";
    return it->second;
}

// Cook/heat side effects of a running appliance on its contents.
inline void apply_heat(const KnowledgeBase& kb, WorldState& w, const std::string& appliance) {
    const WorldObject& a = w.obj(appliance);
    if (a.cls == "StoveBurner") {
        for (const auto& id : resting_on(w, appliance)) {
            WorldObject& o = w.obj(id);
            if (o.states.count("filled_with_liquid")) {
                o.states.insert("boiled");
                o.states.insert("hot");
            }
            for (const auto& cid : contained_in(w, id)) {
                WorldObject& c = w.obj(cid);
                if (has_property(kb, c.cls, "Holdable") && kb.taxonomy().subsumes("Consumable", c.cls))
                    c.states.insert("cooked");
            }
        }
    } else if (a.cls == "Microwave") {
        std::vector<std::string> queue = contained_in(w, appliance);
        while (!queue.empty()) {
            std::string id = queue.back();
            queue.pop_back();
            WorldObject& o = w.obj(id);
            if (o.states.count("filled_with_liquid")) o.states.insert("hot");
            if (kb.taxonomy().subsumes("Consumable", o.cls)) o.states.insert("cooked");
            for (const auto& cid : contained_in(w, id)) queue.push_back(cid);
        }
    } else if (a.cls == "Toaster") {
        for (const auto& id : contained_in(w, appliance)) {
            WorldObject& o = w.obj(id);
            if (o.cls == "BreadSlice") o.states.insert("toasted");
        }
    }
}

}  // namespace worldsim_detail

// Executes one plan step. Nominal preconditions are checked first; an
// unsatisfied one yields a world-level rejection, never a crash. A directive
// injects a drop (nominal effects skipped) or a fumble (no effects at all).
inline ExecOutcome execute(const KnowledgeBase& kb, const WorldState& world, const PlanStep& step,
                           const StepDirective& directive = {}) {
    using namespace worldsim_detail;
    ExecOutcome out;
    out.world = world;
    WorldState& w = out.world;
    w.tick += 1;

    auto reject = [&](const std::string& why) {
        out.rejected = true;
        out.reject_reason = why;
        out.world = world;  // rejection leaves the world unchanged
        out.world.tick = world.tick + 1;
        return out;
    };

    const ActionSpec* spec = find_action(step.action);
    if (!spec) return reject("unknown action " + step.action);
    for (const auto& a : step.args)
        if (!w.alive(a)) return reject("no such object " + a);

    const std::string& a1 = step.args.empty() ? std::string() : step.args[0];

    // Injected drop: the held object leaves the gripper before the action
    // can take effect and lands on the floor next to the robot.
    if (directive.drop != DropKind::None) {
        if (w.held_id.empty()) return reject("drop injection without a held object");
        std::string dropped = w.held_id;
        WorldObject& d = w.obj(dropped);
        w.held_id.clear();
        place_on_floor_near_robot(w, dropped, 0.30, 0.15);
        if (directive.drop == DropKind::Plain) {
            out.sound = "DroppingObjSound";
        } else if (directive.drop == DropKind::Dirty) {
            clear_fill(d);
            d.states.erase("clean");
            d.states.insert("dirty");
            out.sound = "DroppingObjSound";
        } else {
            d.states.insert("broken");
            out.sound = "BreakingObjSound";
            new_derived(w, kb, "Shard", dropped, out.created);
            new_derived(w, kb, "Shard", dropped, out.created);
            place_on_floor_near_robot(w, out.created[0], 0.22, -0.08);
            place_on_floor_near_robot(w, out.created[1], 0.38, 0.26);
        }
        return out;
    }

    auto fumble_or = [&](auto&& apply) {
        if (directive.fumble) return;  // action ran but had no effect
        apply();
    };

    if (step.action == "navigate_to") {
        auto blockers = path_blockers(kb, w, a1);
        if (!blockers.empty()) return reject("path to " + a1 + " blocked by " + blockers.front());
        fumble_or([&] {
            WorldObject& r = w.obj("robot-1");
            r.pos = standing_point(w, a1);
        });
        return out;
    }

    if (step.action == "pick_up") {
        if (!w.held_id.empty()) return reject("gripper already holds " + w.held_id);
        if (!has_property(kb, w.obj(a1).cls, "Holdable")) return reject(a1 + " is not holdable");
        if (!reachable(w, a1)) return reject(a1 + " is out of reach");
        const std::string& c = w.obj(a1).container;
        if (!c.empty() && w.obj(c).states.count("closed")) return reject(a1 + " is enclosed in closed " + c);
        fumble_or([&] {
            WorldObject& o = w.obj(a1);
            o.held = true;
            o.container.clear();
            w.held_id = a1;
        });
        return out;
    }

    if (step.action == "put") {
        const std::string& dst = step.args[1];
        if (w.held_id != a1) return reject("not holding " + a1);
        if (!reachable(w, dst)) return reject(dst + " is out of reach");
        const WorldObject& r = w.obj(dst);
        if (!has_property(kb, r.cls, "Receptacle")) return reject(dst + " is not a receptacle");
        if (r.states.count("closed")) return reject(dst + " is closed");
        if (r.states.count("filled_with_liquid") && kb.taxonomy().subsumes("Consumable", w.obj(a1).cls))
            return reject(dst + " already holds liquid");
        if (has_property(kb, r.cls, "SlotReceptacle")) {
            bool occupied = has_property(kb, r.cls, "Surface") ? !resting_on(w, dst).empty()
                                                               : !contained_in(w, dst).empty();
            if (occupied) return reject(dst + " is already occupied");
        }
        fumble_or([&] {
            w.held_id.clear();
            w.obj(a1).held = false;
            if (has_property(kb, r.cls, "Surface"))
                place_on_surface(w, a1, dst);
            else
                place_inside(w, a1, dst);
        });
        return out;
    }

    if (step.action == "open" || step.action == "close") {
        bool opening = step.action == "open";
        WorldObject& o = w.obj(a1);
        if (!has_property(kb, o.cls, "Openable")) return reject(a1 + " is not openable");
        if (!reachable(w, a1)) return reject(a1 + " is out of reach");
        if (opening && o.states.count("open")) return reject(a1 + " is already open");
        if (!opening && o.states.count("closed")) return reject(a1 + " is already closed");
        fumble_or([&] {
            o.states.erase(opening ? "closed" : "open");
            o.states.insert(opening ? "open" : "closed");
        });
        if (!directive.fumble) out.sound = appliance_sound(step.action, o.cls);
        return out;
    }

    if (step.action == "toggle_on" || step.action == "toggle_off") {
        bool on = step.action == "toggle_on";
        WorldObject& o = w.obj(a1);
        if (!has_property(kb, o.cls, "Toggleable")) return reject(a1 + " is not toggleable");
        if (!reachable(w, a1)) return reject(a1 + " is out of reach");
        if (on && o.states.count("toggled_on")) return reject(a1 + " is already on");
        if (!on && o.states.count("toggled_off")) return reject(a1 + " is already off");
        if (on && o.cls == "Microwave" && !o.states.count("closed")) return reject(a1 + " door is open");
        if (on && has_property(kb, o.cls, "Dispenser")) {
            auto docked = contained_in(w, a1);
            if (docked.empty()) return reject("no vessel in " + a1);
            if (w.obj(docked.front()).states.count("filled_with_water"))
                return reject(docked.front() + " is already filled");
        }
        fumble_or([&] {
            o.states.erase(on ? "toggled_off" : "toggled_on");
            o.states.insert(on ? "toggled_on" : "toggled_off");
            if (on) {
                if (o.cls == "Faucet") {
                    // running water fills fillables sitting in any basin
                    for (auto& [id, other] : w.objects) {
                        if (other.container.empty()) continue;
                        if (!obj_is(kb, w, other.container, "SinkBasin")) continue;
                        if (has_property(kb, other.cls, "Fillable") && !other.states.count("filled_with_liquid"))
                            add_fill(other, "filled_with_water");
                    }
                } else if (has_property(kb, o.cls, "Dispenser")) {
                    auto docked = contained_in(w, a1);
                    WorldObject& vessel = w.obj(docked.front());
                    add_fill(vessel, "filled_with_coffee");
                    vessel.states.insert("hot");
                } else {
                    apply_heat(kb, w, a1);
                }
            }
        });
        if (!directive.fumble) out.sound = appliance_sound(step.action, o.cls);
        return out;
    }

    if (step.action == "slice") {
        if (w.held_id.empty() || !obj_is(kb, w, w.held_id, "Knife")) return reject("no knife in gripper");
        out.instrument = w.held_id;
        WorldObject& t = w.obj(a1);
        if (!has_property(kb, t.cls, "Sliceable")) return reject(a1 + " is not sliceable");
        if (!reachable(w, a1)) return reject(a1 + " is out of reach");
        if (t.held) return reject(a1 + " is in the gripper");
        std::string product = slice_product_class(t.cls);
        if (product.empty()) return reject("no slicing rule for " + t.cls);
        fumble_or([&] {
            Vec3 at = t.pos;
            std::string container = t.container;
            w.removed.insert(a1);
            w.objects.erase(a1);
            for (int i = 0; i < 2; ++i) {
                std::string id = new_derived(w, kb, product, a1, out.created);
                WorldObject& s = w.obj(id);
                s.pos = {at.x + (i == 0 ? -0.05 : 0.05), at.y, at.z};
                s.pos.z = at.z - t.half.z + s.half.z;
                s.container = container;
            }
        });
        if (!directive.fumble) out.sound = "SliceVeggySound";
        return out;
    }

    if (step.action == "pour") {
        const std::string& dst = step.args[1];
        if (w.held_id != a1) return reject("not holding " + a1);
        WorldObject& src = w.obj(a1);
        if (fill_flavor(src).empty()) return reject(a1 + " holds no liquid");
        if (!reachable(w, dst)) return reject(dst + " is out of reach");
        WorldObject& d = w.obj(dst);
        bool drain = has_property(kb, d.cls, "Drain");
        if (!drain) {
            if (!has_property(kb, d.cls, "Fillable")) return reject(dst + " cannot hold liquid");
            if (d.states.count("filled_with_liquid")) return reject(dst + " is already filled");
        }
        fumble_or([&] {
            std::string flavor = fill_flavor(src);
            if (!drain) add_fill(d, flavor);
            if (!has_property(kb, src.cls, "MultiServing")) clear_fill(src);
        });
        if (!directive.fumble) out.sound = "PourLiquidSound";
        return out;
    }

    if (step.action == "crack") {
        const std::string& dst = step.args[1];
        if (w.held_id != a1) return reject("not holding " + a1);
        if (!has_property(kb, w.obj(a1).cls, "Crackable")) return reject(a1 + " cannot be cracked");
        if (!reachable(w, dst)) return reject(dst + " is out of reach");
        if (!has_property(kb, w.obj(dst).cls, "Receptacle")) return reject(dst + " is not a receptacle");
        fumble_or([&] {
            bool heat = false;
            // cooked immediately when the vessel sits on a running burner
            for (const auto& [id, o] : w.objects)
                if (o.cls == "StoveBurner" && o.states.count("toggled_on") && rests_on(w, w.obj(dst), o))
                    heat = true;
            w.removed.insert(a1);
            w.objects.erase(a1);
            w.held_id.clear();
            std::string yolk = new_derived(w, kb, "CrackedEgg", a1, out.created);
            place_inside(w, yolk, dst);
            if (heat) w.obj(yolk).states.insert("cooked");
            std::string shell = new_derived(w, kb, "Eggshell", a1, out.created);
            WorldObject& sh = w.obj(shell);
            sh.held = true;
            w.held_id = shell;
        });
        if (!directive.fumble) out.sound = "CrackEggSound";
        return out;
    }

    if (step.action == "fill") {
        const std::string& faucet = step.args[1];
        if (w.held_id != a1) return reject("not holding " + a1);
        if (!obj_is(kb, w, faucet, "Faucet")) return reject(faucet + " is not a faucet");
        if (!reachable(w, faucet)) return reject(faucet + " is out of reach");
        if (!w.obj(faucet).states.count("toggled_on")) return reject(faucet + " is off");
        WorldObject& v = w.obj(a1);
        if (!has_property(kb, v.cls, "Fillable")) return reject(a1 + " cannot hold liquid");
        if (v.states.count("filled_with_liquid")) return reject(a1 + " is already filled");
        fumble_or([&] { worldsim_detail::add_fill(v, "filled_with_water"); });
        if (!directive.fumble) out.sound = "FillLiquidSound";
        return out;
    }

    if (step.action == "clean") {
        WorldObject& o = w.obj(a1);
        if (o.container.empty() || !obj_is(kb, w, o.container, "SinkBasin"))
            return reject(a1 + " is not in a sink basin");
        if (!reachable(w, a1)) return reject(a1 + " is out of reach");
        bool water = false;
        for (const auto& [id, f] : w.objects)
            if (f.cls == "Faucet" && f.states.count("toggled_on") && dist2d(f.pos, w.position_of(a1)) < 0.6)
                water = true;
        if (!water) return reject("no running water at " + a1);
        fumble_or([&] {
            o.states.erase("dirty");
            o.states.insert("clean");
        });
        if (!directive.fumble) out.sound = "CleanObjSound";
        return out;
    }

    return reject("unhandled action " + step.action);
}

// ---- pre-action injection mutations ----

inline void inject_enclose(const KnowledgeBase& kb, WorldState& w, const std::string& target) {
    const std::string& c = w.obj(target).container;
    if (c.empty() || !has_property(kb, w.obj(c).cls, "Openable"))
        throw Error("enclosure injection needs " + target + " inside an openable receptacle");
    WorldObject& r = w.obj(c);
    r.states.erase("open");
    r.states.insert("closed");
}

inline void inject_dirty(WorldState& w, const std::string& vessel) {
    w.obj(vessel).states.erase("clean");
    w.obj(vessel).states.insert("dirty");
}

inline void inject_fill_water(WorldState& w, const std::string& vessel) {
    worldsim_detail::add_fill(w.obj(vessel), "filled_with_water");
}

// Moves the closest movable distractor onto/into the slot target.
inline std::string inject_occupy(const KnowledgeBase& kb, WorldState& w, const std::string& slot,
                                 const std::string& exclude, double radius = 0.8) {
    std::vector<std::pair<double, std::string>> candidates;
    Vec3 at = w.position_of(slot);
    for (const auto& [id, o] : w.objects) {
        if (id == slot || id == exclude || id == "robot-1" || o.held) continue;
        if (!has_property(kb, o.cls, "Holdable") || kb.taxonomy().subsumes("Shard", o.cls)) continue;
        double d = dist2d(w.position_of(id), at);
        if (d <= radius) candidates.emplace_back(d, id);
    }
    std::sort(candidates.begin(), candidates.end());
    if (candidates.empty()) throw Error("no occupier available near " + slot);
    const std::string& occ = candidates.front().second;
    if (has_property(kb, w.obj(slot).cls, "Surface"))
        worldsim_detail::place_on_surface(w, occ, slot);
    else
        worldsim_detail::place_inside(w, occ, slot);
    return occ;
}

inline std::string inject_obstruct(const KnowledgeBase& kb, WorldState& w, const std::string& nav_target) {
    std::vector<std::string> created;
    std::string id = worldsim_detail::new_derived(w, kb, "Obstruction", "", created);
    Vec3 from = w.robot_pos();
    Vec3 to = standing_point(w, nav_target);
    WorldObject& o = w.obj(id);
    o.pos = {(from.x + to.x) / 2, (from.y + to.y) / 2, o.half.z};
    return id;
}

// ---- success conditions ----

// A class term in subject position quantifies existentially, but all atoms
// sharing that subject must be witnessed by one instance.
inline bool success_check(const KnowledgeBase& kb, const WorldState& w,
                          const std::vector<SuccessAtom>& atoms) {
    auto object_instances = [&](const std::string& term) {
        std::vector<std::string> out;
        if (w.alive(term)) {
            out.push_back(term);
        } else if (kb.taxonomy().has_class(term)) {
            for (const auto& [id, o] : w.objects)
                if (kb.taxonomy().subsumes(term, o.cls)) out.push_back(id);
        }
        return out;
    };

    auto atom_holds_of = [&](const std::string& subject_id, const SuccessAtom& atom) {
        if (!w.alive(subject_id)) return false;
        if (atom.predicate == "has_state") return w.obj(subject_id).states.count(atom.object) > 0;
        if (atom.predicate == "inside") {
            for (const auto& o : object_instances(atom.object))
                if (w.obj(subject_id).container == o) return true;
            return false;
        }
        if (atom.predicate == "on-top-of") {
            for (const auto& o : object_instances(atom.object))
                if (rests_on(w, w.obj(subject_id), w.obj(o))) return true;
            return false;
        }
        throw Error("unsupported success predicate " + atom.predicate);
    };

    static const std::map<std::string, std::string> diet_conflicts = {
        {"Vegan", "AnimalProduct"},
        {"Celiac", "GlutenFood"},
    };

    auto diet_waived = [&](const SuccessAtom& atom) {
        if (!atom.diet_waivable) return false;
        std::set<std::string> subject_classes;
        if (kb.taxonomy().has_class(atom.subject)) subject_classes.insert(atom.subject);
        if (w.alive(atom.subject)) subject_classes.insert(w.obj(atom.subject).cls);
        if (kb.has_entity(atom.subject))
            for (const auto& t : kb.types_of(atom.subject)) subject_classes.insert(t);
        for (const auto& h : w.humans)
            for (const auto& diet : h.diets) {
                auto it = diet_conflicts.find(diet);
                if (it == diet_conflicts.end()) continue;
                for (const auto& c : subject_classes)
                    if (kb.taxonomy().subsumes(it->second, c)) return true;
            }
        return false;
    };

    std::map<std::string, std::vector<const SuccessAtom*>> by_subject;
    for (const auto& atom : atoms) {
        if (diet_waived(atom)) continue;
        if (atom.predicate == "diet_respected") {
            for (const auto& h : w.humans)
                for (const auto& diet : h.diets) {
                    auto it = diet_conflicts.find(diet);
                    if (it == diet_conflicts.end()) continue;
                    for (const auto& [id, o] : w.objects) {
                        if (!kb.taxonomy().subsumes(it->second, o.cls)) continue;
                        if (o.held || o.container.empty()) continue;
                        if (!has_property(kb, w.obj(o.container).cls, "StorageReceptacle")) return false;
                    }
                }
            continue;
        }
        by_subject[atom.subject].push_back(&atom);
    }

    for (const auto& [subject, group] : by_subject) {
        std::vector<std::string> witnesses;
        if (w.alive(subject)) {
            witnesses.push_back(subject);
        } else if (kb.taxonomy().has_class(subject)) {
            for (const auto& [id, o] : w.objects)
                if (kb.taxonomy().subsumes(subject, o.cls)) witnesses.push_back(id);
        } else {
            return false;  // named entity no longer exists
        }
        bool found = false;
        for (const auto& wit : witnesses) {
            bool all = true;
            for (const auto* atom : group)
                if (!atom_holds_of(wit, *atom)) {
                    all = false;
                    break;
                }
            if (all) {
                found = true;
                break;
            }
        }
        if (!found) return false;
    }
    return true;
}

}  // namespace recover
