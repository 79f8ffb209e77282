#pragma once

// Collision-free end-effector transit between stations: bidirectional RRT
// (RRT-Connect) in Cartesian position space over axis-aligned obstacles, with
// random-pair shortcut smoothing and a dense re-validation of the result.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <vector>

#include "decake/error.hpp"
#include "decake/geometry.hpp"
#include "decake/random.hpp"

namespace decake {

struct Workspace {
    Aabb3 bounds;
    std::vector<Aabb3> obstacles;
    double clearance = 0.0;  // radius of the swept cup (+ payload) sphere

    void validate() const {
        if (!(clearance >= 0.0)) throw PreconditionViolation("clearance must be >= 0");
        for (const auto& o : obstacles)
            if (!bounds.contains(o)) throw PreconditionViolation("obstacle outside workspace bounds");
    }

    Workspace with_clearance(double c) const {
        Workspace w = *this;
        w.clearance = c;
        return w;
    }
};

// A sphere of radius `clearance` at p collides when it strictly intersects an
// obstacle; touching at exactly the clearance distance is free.
inline bool point_free(const Workspace& ws, Vec3 p) {
    if (!ws.bounds.contains(p)) return false;
    const double c2 = ws.clearance * ws.clearance;
    for (const auto& o : ws.obstacles) {
        if (ws.clearance > 0.0) {
            if (o.distance_sq(p) < c2) return false;
        } else if (o.strictly_contains(p)) {
            return false;
        }
    }
    return true;
}

// Samples every `resolution` mm (both endpoints included).
inline bool segment_free(const Workspace& ws, Vec3 a, Vec3 b, double resolution = 1.0) {
    const double len = (b - a).norm();
    const auto n = static_cast<std::size_t>(std::ceil(len / resolution));
    for (std::size_t i = 0; i <= n; ++i) {
        const double s = n == 0 ? 0.0 : static_cast<double>(i) / static_cast<double>(n);
        if (!point_free(ws, a + s * (b - a))) return false;
    }
    return true;
}

inline double path_length(const std::vector<Vec3>& pts) {
    double len = 0.0;
    for (std::size_t i = 1; i < pts.size(); ++i) len += (pts[i] - pts[i - 1]).norm();
    return len;
}

struct PlannedPath {
    std::vector<Vec3> waypoints;
    double length = 0.0;
    double raw_length = 0.0;  // before shortcutting
    int iterations = 0;
};

struct PlannerParams {
    double step = 10.0;       // mm per extension
    double goal_bias = 0.1;
    int max_iters = 5000;
    int shortcut_iters = 100;
    double check_resolution = 1.0;
};

namespace detail {

struct Tree {
    std::vector<Vec3> nodes;
    std::vector<int> parent;

    int nearest(Vec3 q) const {
        int best = 0;
        double best_d = std::numeric_limits<double>::infinity();
        for (std::size_t i = 0; i < nodes.size(); ++i) {
            const Vec3 d = nodes[i] - q;
            const double d2 = d.x * d.x + d.y * d.y + d.z * d.z;
            if (d2 < best_d) {
                best_d = d2;
                best = static_cast<int>(i);
            }
        }
        return best;
    }

    int add(Vec3 q, int par) {
        nodes.push_back(q);
        parent.push_back(par);
        return static_cast<int>(nodes.size()) - 1;
    }

    std::vector<Vec3> branch(int leaf) const {
        std::vector<Vec3> out;
        for (int i = leaf; i >= 0; i = parent[static_cast<std::size_t>(i)]) out.push_back(nodes[static_cast<std::size_t>(i)]);
        return out;
    }
};

enum class ExtendResult { Trapped, Advanced, Reached };

inline ExtendResult extend(Tree& tree, Vec3 target, const Workspace& ws, const PlannerParams& p, int& new_index) {
    const int near = tree.nearest(target);
    const Vec3 from = tree.nodes[static_cast<std::size_t>(near)];
    const Vec3 d = target - from;
    const double dist = d.norm();
    const bool reaches = dist <= p.step;
    const Vec3 to = reaches ? target : from + (p.step / dist) * d;
    if (!segment_free(ws, from, to, p.check_resolution)) return ExtendResult::Trapped;
    new_index = tree.add(to, near);
    return reaches ? ExtendResult::Reached : ExtendResult::Advanced;
}

inline ExtendResult connect(Tree& tree, Vec3 target, const Workspace& ws, const PlannerParams& p, int& new_index) {
    ExtendResult r = ExtendResult::Advanced;
    while (r == ExtendResult::Advanced) r = extend(tree, target, ws, p, new_index);
    return r;
}

}  // namespace detail

// RRT-Connect from start to goal. Deterministic for a fixed seed.
inline PlannedPath plan(const Workspace& ws, Vec3 start, Vec3 goal, std::uint64_t seed,
                        const PlannerParams& params = {}) {
    ws.validate();
    if (!point_free(ws, start)) throw InvalidQuery("start configuration is in collision");
    if (!point_free(ws, goal)) throw InvalidQuery("goal configuration is in collision");

    Rng rng(seed);
    detail::Tree from_start;
    detail::Tree from_goal;
    from_start.add(start, -1);
    from_goal.add(goal, -1);
    detail::Tree* a = &from_start;
    detail::Tree* b = &from_goal;

    std::vector<Vec3> raw;
    int iter = 0;
    for (; iter < params.max_iters && raw.empty(); ++iter) {
        Vec3 q;
        if (rng.bernoulli(params.goal_bias)) {
            q = b->nodes.front();
        } else {
            q = {rng.uniform(ws.bounds.min.x, ws.bounds.max.x), rng.uniform(ws.bounds.min.y, ws.bounds.max.y),
                 rng.uniform(ws.bounds.min.z, ws.bounds.max.z)};
        }
        int a_new = -1;
        if (detail::extend(*a, q, ws, params, a_new) != detail::ExtendResult::Trapped) {
            const Vec3 target = a->nodes[static_cast<std::size_t>(a_new)];
            int b_new = -1;
            if (detail::connect(*b, target, ws, params, b_new) == detail::ExtendResult::Reached) {
                auto half_a = a->branch(a_new);
                auto half_b = b->branch(b_new);
                std::reverse(half_a.begin(), half_a.end());
                // half_b starts at the shared node; skip the duplicate.
                half_a.insert(half_a.end(), half_b.begin() + 1, half_b.end());
                if (a != &from_start) std::reverse(half_a.begin(), half_a.end());
                raw = std::move(half_a);
            }
        }
        std::swap(a, b);
    }
    if (raw.empty()) throw Unreachable("no path found within the iteration budget");

    PlannedPath out;
    out.iterations = iter;
    out.raw_length = path_length(raw);
    std::vector<Vec3> pts = std::move(raw);
    for (int s = 0; s < params.shortcut_iters && pts.size() > 2; ++s) {
        auto i = static_cast<std::size_t>(rng.uniform_int(0, static_cast<std::int64_t>(pts.size()) - 1));
        auto j = static_cast<std::size_t>(rng.uniform_int(0, static_cast<std::int64_t>(pts.size()) - 1));
        if (i > j) std::swap(i, j);
        if (j <= i + 1) continue;
        if (segment_free(ws, pts[i], pts[j], params.check_resolution))
            pts.erase(pts.begin() + static_cast<std::ptrdiff_t>(i) + 1, pts.begin() + static_cast<std::ptrdiff_t>(j));
    }
    for (std::size_t k = 1; k < pts.size(); ++k)
        if (!segment_free(ws, pts[k - 1], pts[k], params.check_resolution))
            throw Unreachable("smoothed path failed re-validation");
    out.length = path_length(pts);
    out.waypoints = std::move(pts);
    return out;
}

}  // namespace decake
