#pragma once

// Task-level actions of the workcell: top-down suction pick with stop-height
// verification and lift monitoring, brushing one face against the brush rack,
// the passive flip, and placing into the destination bin.

#include <algorithm>
#include <cmath>
#include <numbers>
#include <optional>
#include <vector>

#include "decake/brush_paths.hpp"
#include "decake/error.hpp"
#include "decake/force_control.hpp"
#include "decake/geometry.hpp"
#include "decake/perception.hpp"
#include "decake/scene.hpp"

namespace decake {

struct SuctionModel {
    double cup_radius = 15.0;   // mm
    double vacuum_kpa = 20.0;   // pressure differential
    double safety_factor = 2.0;

    void validate() const {
        if (!(cup_radius > 0.0 && vacuum_kpa > 0.0 && safety_factor > 0.0))
            throw PreconditionViolation("suction parameters must be > 0");
    }

    double cup_area() const { return std::numbers::pi * cup_radius * cup_radius; }

    // Holding force in newtons: seal * dP * cup area (kPa * mm^2 = 1e-3 N).
    double hold_force(double seal) const { return seal * vacuum_kpa * cup_area() * 1e-3; }
};

// Fraction of the ideal seal: porous material leaks, and only the share of
// the cup resting on exposed flat surface seals at all.
inline double seal_quality(double porosity, double exposed_flat_area, double cup_area) {
    return (1.0 - porosity) * std::clamp(exposed_flat_area / cup_area, 0.0, 1.0);
}

inline double weight_newtons(double grams) { return grams * 1e-3 * kGravity; }

enum class PickOutcome { Held, HeightMismatch, SealFail, DropDuringLift };

inline const char* to_string(PickOutcome o) {
    switch (o) {
        case PickOutcome::Held: return "Held";
        case PickOutcome::HeightMismatch: return "HeightMismatch";
        case PickOutcome::SealFail: return "SealFail";
        case PickOutcome::DropDuringLift: return "DropDuringLift";
    }
    return "?";
}

struct PickSettings {
    double height_tol = 5.0;        // mm between stop height and perceived centroid
    double approach_height = 50.0;  // descent starts this far above the centroid
    double f_stop = 5.0;
    double descent_speed = 20.0;
    double control_period = 0.004;
    double stiffness = 10.0;
    double drag_limit = 10.0;  // N beyond payload weight during the lift
    int lift_samples = 50;
};

// Faults injected into a single attempt; all default to "no fault".
struct PickFaults {
    double perceived_z_shift = 0.0;  // stale or shifted point cloud
    bool vacuum_leak = false;        // hose leak: no seal at all
    double lateral_spike = 0.0;      // N, collision while lifting
};

struct PickResult {
    PickOutcome outcome = PickOutcome::SealFail;
    std::optional<int> part_id;  // part under the cup, if any
    Vec2 contact_point;
    double stop_z = 0.0;
    double seal = 0.0;
    double hold_force = 0.0;
    double required_force = 0.0;
    DescentResult descent;
    std::vector<FTReading> lift_trace;
};

// Cells of `part` within `radius` of a world point that no higher part covers.
inline double exposed_area_near(const SceneState& scene, const PartState& part, Vec2 point, double radius) {
    std::vector<const PartState*> above;
    for (const auto& o : scene.parts)
        if (o.id != part.id && same_region(o.status, part.status) && o.pose.z > part.pose.z) above.push_back(&o);
    std::size_t n = 0;
    const Vec2 local_pt = part.pose.to_local(point);
    for (std::size_t k : footprint_cells(part.powder_top, part.spec.footprint)) {
        const Vec2 c = part.powder_top.cell_center(k);
        if ((c - local_pt).norm() > radius) continue;
        const Vec2 w = part.pose.to_world(c);
        if (std::none_of(above.begin(), above.end(), [&](const PartState* o) { return o->covers(w); })) ++n;
    }
    return static_cast<double>(n) * part.powder_top.cell_area();
}

// Three-step suction pick: guarded descent over the centroid, stop-height
// check against the perceived centroid, then seal/hold check and a monitored
// lift. On success the part is Held and the region re-settles.
inline PickResult pick(SceneState& scene, const Detection& detection, const PoseEstimate& estimate, Region region,
                       const SuctionModel& suction, const PickSettings& settings = {}, Vec2 contact_offset = {},
                       const PickFaults& faults = {}) {
    if (!estimate.pickable) throw PreconditionViolation("detection is not pickable");
    suction.validate();

    PickResult res;
    res.contact_point = estimate.centroid.xy() + contact_offset;

    ContactModel contact;
    contact.stiffness = settings.stiffness;
    contact.surface = [&scene, region](double x, double y) {
        return std::optional<double>(surface_height(scene, region, {x, y}));
    };
    EndEffectorState ee;
    ee.pose = Pose(res.contact_point.x, res.contact_point.y, estimate.centroid.z + settings.approach_height, 0.0);
    ee.speed_limit = settings.descent_speed;
    ee.control_period = settings.control_period;
    const double floor_target = -2.0 * settings.height_tol - 1.0;
    res.descent = compliant_descend(ee, floor_target, settings.f_stop, contact);
    res.stop_z = res.descent.stop_z;

    const double expected = detection.centroid.z + faults.perceived_z_shift;
    if (std::abs(res.stop_z - expected) > settings.height_tol) {
        res.outcome = PickOutcome::HeightMismatch;
        return res;
    }

    int owner = kNoOwner;
    surface_height(scene, region, res.contact_point, &owner);
    if (owner == kNoOwner) {
        res.outcome = PickOutcome::SealFail;  // cup on the floor
        return res;
    }
    res.part_id = owner;
    PartState& part = scene.part(owner);

    const double flat = exposed_area_near(scene, part, res.contact_point, suction.cup_radius);
    res.seal = faults.vacuum_leak ? 0.0 : seal_quality(part.spec.porosity, flat, suction.cup_area());
    res.hold_force = suction.hold_force(res.seal);
    const double mass = part_total_mass(part, scene.powder_density);
    const double payload = weight_newtons(mass);
    res.required_force = suction.safety_factor * payload;
    if (!(res.hold_force > 0.0) || res.hold_force < res.required_force) {
        res.outcome = PickOutcome::SealFail;
        return res;
    }

    // Parts resting on this one ride along and load the sensor while lifting.
    double overlying = 0.0;
    for (const auto& o : scene.parts)
        if (o.id != part.id && same_region(o.status, part.status) && o.pose.z > part.pose.z &&
            projected_overlap(o, part))
            overlying += weight_newtons(part_total_mass(o, scene.powder_density));
    for (int k = 0; k < settings.lift_samples; ++k) {
        const double spike = (k == settings.lift_samples / 2) ? faults.lateral_spike : 0.0;
        res.lift_trace.push_back(contact.reading(payload + overlying, spike, 0.0));
    }
    if (!monitor_lift(res.lift_trace, settings.drag_limit, payload)) {
        res.outcome = PickOutcome::DropDuringLift;
        return res;
    }

    part.status = PartStatus::Held;
    settle(scene, region_status(region));
    res.outcome = PickOutcome::Held;
    return res;
}

struct RemovalModel {
    double rho_max = 0.0386;      // fraction removed per pass at full force; fitted to a 42% mean removal
    double f_ref = 5.0;           // N at which a pass reaches rho_max
    double brush_radius = 35.0;   // mm
    double pass_interval = 0.1;   // s, one pass per dwell bucket
    double friction = 0.5;        // tangential drag / normal force

    void validate() const {
        if (!(rho_max > 0.0 && rho_max <= 1.0)) throw PreconditionViolation("rho_max must lie in (0, 1]");
        if (!(f_ref > 0.0)) throw PreconditionViolation("f_ref must be > 0");
        if (!(brush_radius > 0.0 && pass_interval > 0.0)) throw PreconditionViolation("invalid brush geometry");
    }
};

struct BrushRack {
    Vec2 center{950.0, 150.0};
    double half_x = 150.0;
    double half_y = 100.0;
    double height = 150.0;  // brush tips, mm above the table

    bool contains(Vec2 p) const {
        return std::abs(p.x - center.x) <= half_x + 1e-9 && std::abs(p.y - center.y) <= half_y + 1e-9;
    }
};

struct CleanSettings {
    HybridParams hybrid;
    double f_stop = 5.0;
    double band = 1.0;
    double descent_speed = 20.0;
    double approach = 20.0;      // descent starts this far above the brushes
    double hold_force = 1e9;     // suction holding force from the pick
    double powder_density = 0.00055;
    BrushRack rack;
};

struct CleanResult {
    PartState part;
    double dust_removed = 0.0;  // grams
    DescentResult descent;
    TrackResult track;
};

namespace detail {

inline double distance_to_polyline(Vec2 p, const std::vector<Vec2>& pts) {
    double best = std::numeric_limits<double>::infinity();
    if (pts.size() == 1) return (p - pts[0]).norm();
    for (std::size_t i = 0; i + 1 < pts.size(); ++i) {
        const Vec2 a = pts[i];
        const Vec2 ab = pts[i + 1] - a;
        const double len2 = dot(ab, ab);
        const double s = len2 > 0.0 ? std::clamp(dot(p - a, ab) / len2, 0.0, 1.0) : 0.0;
        best = std::min(best, (p - (a + s * ab)).norm());
    }
    return best;
}

}  // namespace detail

// Brush the downward face of a held part along one trajectory. The brush acts
// at the world point under the part centroid at motion start (traj.center);
// in each dwell bucket every downward-face cell within the brush radius of the
// brush's path through the part frame loses rho = rho_max*clamp(f/F_ref,0,1)
// of its depth. Everything removed is returned as captured dust.
inline CleanResult clean(const PartState& part, const BrushTrajectory& traj, const RemovalModel& removal,
                         const ContactModel& contact, const CleanSettings& settings) {
    if (part.status != PartStatus::Held) throw PreconditionViolation("clean needs a held part");
    removal.validate();
    if (traj.samples.empty()) throw PreconditionViolation("empty brush trajectory");
    for (const auto& s : traj.samples)
        if (!settings.rack.contains({s.x, s.y})) throw PreconditionViolation("trajectory leaves the brush rack");

    CleanResult out;
    out.part = part;

    EndEffectorState ee;
    const auto& first = traj.samples.front();
    ee.pose = Pose(first.x, first.y, contact.surface_at(first.x, first.y) + settings.approach, 0.0);
    ee.speed_limit = settings.descent_speed;
    ee.control_period = settings.hybrid.control_period;
    out.descent = compliant_descend(ee, ee.pose.z - 3.0 * settings.approach, settings.f_stop, contact);
    if (!out.descent.contacted) throw ContactLost("no brush contact during approach");

    out.track = hybrid_track(traj.samples, out.descent.stop_z, traj.f_set, settings.band, contact, settings.hybrid);

    double peak = 0.0;
    for (const auto& s : out.track.trace) peak = std::max(peak, s.ft.fz);
    if (settings.hold_force < removal.friction * peak) throw DropDuringClean("brush drag exceeded suction hold");

    GridField& face = out.part.powder_bottom;
    const double yaw = part.pose.yaw;
    const double res = face.resolution();
    const double t0 = out.track.trace.front().t;
    double removed_volume = 0.0;

    const auto& trace = out.track.trace;
    std::size_t begin = 0;
    while (begin < trace.size()) {
        const auto bucket = static_cast<long>(std::floor((trace[begin].t - t0) / removal.pass_interval + 1e-9));
        std::size_t end = begin;
        double force_sum = 0.0;
        while (end < trace.size() &&
               static_cast<long>(std::floor((trace[end].t - t0) / removal.pass_interval + 1e-9)) == bucket) {
            force_sum += trace[end].ft.fz;
            ++end;
        }
        const double mean_force = force_sum / static_cast<double>(end - begin);
        const double rho = removal.rho_max * std::clamp(mean_force / removal.f_ref, 0.0, 1.0);
        if (rho > 0.0) {
            std::vector<Vec2> pts;
            for (std::size_t k = begin; k < end; k += 5) {
                const Vec2 tool{trace[k].pose.x, trace[k].pose.y};
                pts.push_back(rotate(traj.center - tool, -yaw));
            }
            const Vec2 last_tool{trace[end - 1].pose.x, trace[end - 1].pose.y};
            pts.push_back(rotate(traj.center - last_tool, -yaw));

            Vec2 lo = pts.front();
            Vec2 hi = pts.front();
            for (const auto& q : pts) {
                lo = {std::min(lo.x, q.x), std::min(lo.y, q.y)};
                hi = {std::max(hi.x, q.x), std::max(hi.y, q.y)};
            }
            const double r = removal.brush_radius;
            const auto to_index = [res](double v, double origin, std::size_t n) {
                const double f = std::floor((v - origin) / res);
                return static_cast<std::size_t>(std::clamp(f, 0.0, static_cast<double>(n) - 1.0));
            };
            const std::size_t i0 = to_index(lo.x - r, face.origin().x, face.nx());
            const std::size_t i1 = to_index(hi.x + r, face.origin().x, face.nx());
            const std::size_t j0 = to_index(lo.y - r, face.origin().y, face.ny());
            const std::size_t j1 = to_index(hi.y + r, face.origin().y, face.ny());
            for (std::size_t j = j0; j <= j1; ++j) {
                for (std::size_t i = i0; i <= i1; ++i) {
                    const std::size_t k = face.index(i, j);
                    const double depth = face[k];
                    if (depth <= 0.0) continue;
                    if (detail::distance_to_polyline(face.cell_center(i, j), pts) > r) continue;
                    const double kept = depth * (1.0 - rho);
                    removed_volume += depth - kept;
                    face.set(k, kept);
                }
            }
        }
        begin = end;
    }
    out.dust_removed = settings.powder_density * removed_volume * face.cell_area();
    return out;
}

struct FlipSettings {
    double flat_threshold = 0.3;   // max thickness / min footprint extent
    double spill_fraction = 0.0;   // share of the new downward face shed in the chute
};

// Passive flip: the held part drops through the chute and lands upside down
// on the flip collection area. The body frame is reflected across its long
// axis, so the footprint and both powder fields mirror and swap faces.
inline PartState flip(SceneState& scene, int id, const FlipSettings& settings = {}) {
    PartState& part = scene.part(id);
    if (part.status != PartStatus::Held) throw PreconditionViolation("flip needs a held part");
    if (part.spec.flatness_ratio() > settings.flat_threshold)
        throw NotFlippable("part " + std::to_string(id) + " is too thick to flip");
    if (!(settings.spill_fraction >= 0.0 && settings.spill_fraction <= 1.0))
        throw PreconditionViolation("spill fraction must lie in [0, 1]");

    part.face_up = !part.face_up;
    GridField new_top = part.powder_bottom.mirrored_rows();
    GridField new_bottom = part.powder_top.mirrored_rows();
    part.powder_top = std::move(new_top);
    part.powder_bottom = std::move(new_bottom);
    part.spec.footprint = part.spec.footprint.mirrored_y();

    if (settings.spill_fraction > 0.0) {
        double spilled = 0.0;
        GridField& face = part.powder_bottom;
        for (std::size_t k = 0; k < face.size(); ++k) {
            const double d = face[k];
            if (d <= 0.0) continue;
            const double kept = d * (1.0 - settings.spill_fraction);
            spilled += d - kept;
            face.set(k, kept);
        }
        scene.flip_area_spill += scene.powder_density * spilled * face.cell_area();
    }

    const Vec2 c = scene.flip_area.bounds().center();
    part.pose = Pose(c.x, c.y, 1e9, std::numbers::pi - part.pose.yaw);
    part.status = PartStatus::OnFlipArea;
    settle(scene, PartStatus::OnFlipArea);
    return part;
}

// Put a held part down inside `target`, preferring a free slot on a lattice
// over the target; once no free slot is found within `max_tries` candidates
// the part is stacked at the target center.
inline PartState place(SceneState& scene, int id, const Polygon2& target, int max_tries = 64) {
    PartState& part = scene.part(id);
    if (part.status != PartStatus::Held) throw PreconditionViolation("place needs a held part");

    std::vector<const PartState*> occupants;
    for (const auto& o : scene.parts)
        if (o.id != id && (o.status == PartStatus::Done || o.status == PartStatus::Skipped) &&
            point_in_polygon(o.pose.xy(), target))
            occupants.push_back(&o);

    const Aabb2 tb = target.bounds();
    const Aabb2 fb = part.spec.footprint.bounds();
    const double gap = 10.0;
    const double sx = fb.width() + gap;
    const double sy = fb.height() + gap;
    int tries = 0;
    std::optional<Pose> slot;
    for (double y = tb.min.y + gap - fb.min.y; y + fb.max.y <= tb.max.y && !slot && tries < max_tries; y += sy) {
        for (double x = tb.min.x + gap - fb.min.x; x + fb.max.x <= tb.max.x && !slot && tries < max_tries; x += sx) {
            ++tries;
            PartState probe = part;
            probe.pose = Pose(x, y, 0.0, 0.0);
            const Polygon2 fp = probe.world_footprint();
            const bool inside = std::all_of(fp.vertices().begin(), fp.vertices().end(),
                                            [&](Vec2 v) { return point_in_polygon(v, target); });
            if (!inside) continue;
            const bool free = std::none_of(occupants.begin(), occupants.end(), [&](const PartState* o) {
                return polygons_overlap(fp, o->world_footprint());
            });
            if (free) slot = probe.pose;
        }
    }
    if (slot) {
        part.pose = *slot;
    } else {
        const Vec2 c = tb.center();
        part.pose = Pose(c.x, c.y, 0.0, 0.0);
        part.pose.z = support_height(part, occupants);
    }
    part.status = PartStatus::Done;
    return part;
}

}  // namespace decake
