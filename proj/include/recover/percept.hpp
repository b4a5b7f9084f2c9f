#pragma once
// Scene-graph generation from ground-truth world geometry, and the sound
// label pass-through. One strongest relation per ordered pair:
// inside > on-top-of > above/under > blocking > to-the-left/right-of > near.

#include <algorithm>
#include <string>
#include <vector>

#include "recover/kb.hpp"
#include "recover/worldsim.hpp"

namespace recover {

struct PerceptConfig {
    double contact_eps = 0.011;        // on-top-of face contact tolerance (m)
    double min_overlap_frac = 0.5;     // on-top-of footprint overlap
    double gap_min = 0.01;             // above/under minimum vertical gap
    double near_radius = 0.5;          // near: horizontal center distance
    double lr_min_center_dist = 0.5;   // left/right band
    double lr_max_center_dist = 1.0;
    double block_inflate = 0.25;            // robot radius for path tests
    double block_endpoint_clearance = 0.5;  // debris next to either endpoint is stepped around
};

struct SceneNode {
    std::string id;
    std::string cls;
    std::vector<std::string> states;
};

struct SceneGraph {
    std::vector<SceneNode> nodes;
    std::vector<Triple> triples;  // relation edges plus has_state triples
    std::vector<std::pair<std::string, std::string>> states;
};

namespace percept_detail {

inline bool horizontal_overlap(const WorldObject& a, const WorldObject& b) {
    double ox = std::min(a.pos.x + a.half.x, b.pos.x + b.half.x) - std::max(a.pos.x - a.half.x, b.pos.x - b.half.x);
    double oy = std::min(a.pos.y + a.half.y, b.pos.y + b.half.y) - std::max(a.pos.y - a.half.y, b.pos.y - b.half.y);
    return ox > 0 && oy > 0;
}

}  // namespace percept_detail

// Deterministic scene labeling over the full world state.
inline SceneGraph label_scene(const KnowledgeBase& kb, const WorldState& w, const PerceptConfig& cfg = {}) {
    using percept_detail::horizontal_overlap;
    SceneGraph g;

    std::vector<std::string> ids;
    for (const auto& [id, o] : w.objects) ids.push_back(id);
    std::sort(ids.begin(), ids.end());

    g.nodes.push_back({"robot-gripper", "RobotGripper", {}});
    for (const auto& id : ids) {
        const WorldObject& o = w.obj(id);
        g.nodes.push_back({id, o.cls, {o.states.begin(), o.states.end()}});
    }

    auto edge = [&](const std::string& s, const std::string& rel, const std::string& t) {
        g.triples.push_back({Term::entity(s), rel, Term::entity(t)});
    };

    // Gripper containment; an empty gripper is made explicit by the sentinel.
    if (w.held_id.empty()) {
        g.nodes.push_back({"nothing-0", "Nothing", {}});
        edge("nothing-0", "inside", "robot-gripper");
    } else {
        edge(w.held_id, "inside", "robot-gripper");
    }

    for (const auto& sa : ids) {
        const WorldObject& a = w.obj(sa);
        if (a.held) continue;  // held objects contribute only the gripper edge
        if (!a.container.empty()) {
            edge(sa, "inside", a.container);
        }
        for (const auto& sb : ids) {
            if (sa == sb) continue;
            const WorldObject& b = w.obj(sb);
            if (b.held) continue;
            if (!a.container.empty() && a.container == sb) continue;  // already emitted
            if (!a.container.empty() || !b.container.empty()) {
                // contained objects keep only near edges (for reachability cues)
                if (dist2d(w.position_of(sa), w.position_of(sb)) < cfg.near_radius) edge(sa, "near", sb);
                continue;
            }
            if (rests_on(w, a, b, cfg.contact_eps)) {
                edge(sa, "on-top-of", sb);
                continue;
            }
            if (rests_on(w, b, a, cfg.contact_eps)) continue;  // contact already expressed by the inverse pair
            double d = dist2d(a.pos, b.pos);
            bool hover = horizontal_overlap(a, b) && d < cfg.near_radius;
            if (hover && a.bottom() - b.top() > cfg.gap_min) {
                edge(sa, "above", sb);
                continue;
            }
            if (hover && b.bottom() - a.top() > cfg.gap_min) {
                edge(sa, "under", sb);
                continue;
            }
            double dx = a.pos.x - b.pos.x;
            if (d >= cfg.lr_min_center_dist && d < cfg.lr_max_center_dist &&
                std::abs(dx) > a.half.x + b.half.x) {
                edge(sa, dx > 0 ? "to-the-right-of" : "to-the-left-of", sb);
                continue;
            }
            if (d < cfg.near_radius) edge(sa, "near", sb);
        }
    }

    // Path obstructions toward every non-fixture target the robot might seek.
    for (const auto& target : ids) {
        if (target == "robot-1") continue;
        for (const auto& blocker :
             path_blockers(kb, w, target, cfg.block_endpoint_clearance, cfg.block_inflate))
            edge(blocker, "blocking", target);
    }

    for (const auto& id : ids) {
        const WorldObject& o = w.obj(id);
        for (const auto& st : o.states) {
            g.triples.push_back({Term::entity(id), "has_state", Term::literal(st)});
            g.states.emplace_back(id, st);
        }
    }

    std::sort(g.triples.begin(), g.triples.end());
    g.triples.erase(std::unique(g.triples.begin(), g.triples.end()), g.triples.end());
    return g;
}

// Ground-truth sound pass-through; the seam where a learned classifier would
// plug in.
inline std::optional<std::string> classify_sound(const KnowledgeBase& kb,
                                                 const std::optional<std::string>& emitted) {
    if (!emitted) return std::nullopt;
    if (!kb.sound_classes().count(*emitted)) throw VocabularyError("unknown sound label " + *emitted);
    return emitted;
}

}  // namespace recover
