#pragma once

// End-effector contact simulation for a stiff position-controlled arm with a
// wrist force/torque sensor. Compliance is synthesized in software: a guarded
// descent that stops on a force threshold, and an admittance loop that
// regulates normal force while the tangential position follows a path.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <limits>
#include <optional>
#include <span>
#include <vector>

#include "decake/error.hpp"
#include "decake/geometry.hpp"

namespace decake {

struct FTReading {
    double fx = 0.0;  // N
    double fy = 0.0;
    double fz = 0.0;  // compressive contact force, >= 0 while touching
    double tx = 0.0;  // N*mm
    double ty = 0.0;
    double tz = 0.0;
};

// Spring-damper environment. `surface` returns the contact height under a
// point, or nullopt where the surface is undefined (an obstruction the model
// cannot represent).
struct ContactModel {
    std::function<std::optional<double>(double, double)> surface;
    double stiffness = 10.0;  // N/mm
    double damping = 0.0;     // N*s/mm
    Vec2 offset{};            // contact point relative to the cup center, for torques

    static ContactModel flat(double height, double stiffness = 10.0, double damping = 0.0) {
        ContactModel m;
        m.surface = [height](double, double) { return std::optional<double>(height); };
        m.stiffness = stiffness;
        m.damping = damping;
        return m;
    }

    void validate() const {
        if (!surface) throw PreconditionViolation("contact model has no surface");
        if (!(stiffness > 0.0)) throw PreconditionViolation("contact stiffness must be > 0");
        if (!(damping >= 0.0)) throw PreconditionViolation("contact damping must be >= 0");
    }

    double surface_at(double x, double y) const {
        const auto s = surface(x, y);
        if (!s) throw ContactFault("contact surface undefined under the tool");
        return *s;
    }

    // Normal force for a tool at height z whose penetration grows at `rate` mm/s.
    double normal_force(double surface_z, double z, double rate) const {
        const double pen = surface_z - z;
        if (pen <= 0.0) return 0.0;
        return std::max(0.0, stiffness * pen + damping * rate);
    }

    FTReading reading(double fz, double fx = 0.0, double fy = 0.0) const {
        FTReading r{fx, fy, fz, 0.0, 0.0, 0.0};
        // r x F with r = (offset.x, offset.y, 0)
        r.tx = offset.y * fz;
        r.ty = -offset.x * fz;
        r.tz = offset.x * fy - offset.y * fx;
        return r;
    }
};

struct EndEffectorState {
    Pose pose;
    double speed_limit = 20.0;      // mm/s
    double control_period = 0.004;  // s

    void validate() const {
        if (!(speed_limit > 0.0)) throw PreconditionViolation("speed limit must be > 0");
        if (!(control_period > 0.0)) throw PreconditionViolation("control period must be > 0");
    }
};

struct DescentResult {
    double stop_z = 0.0;
    bool contacted = false;
    std::vector<FTReading> trace;
};

// Guarded move straight down from `start` at the speed limit. Stops at the
// first control step whose normal force reaches `f_stop` while touching the
// surface, or at `target_z`.
inline DescentResult compliant_descend(const EndEffectorState& start, double target_z, double f_stop,
                                       const ContactModel& contact) {
    start.validate();
    contact.validate();
    if (!(f_stop >= 0.0)) throw PreconditionViolation("stop force must be >= 0");
    if (!(start.pose.z > target_z)) throw PreconditionViolation("descent must start above the target height");

    const double step = start.speed_limit * start.control_period;
    const double x = start.pose.x;
    const double y = start.pose.y;
    DescentResult out;
    double z = start.pose.z;
    while (true) {
        z = std::max(z - step, target_z);
        const double s = contact.surface_at(x, y);
        const double fz = contact.normal_force(s, z, start.speed_limit);
        out.trace.push_back(contact.reading(fz));
        if (z <= s && fz >= f_stop) {
            out.stop_z = z;
            out.contacted = true;
            return out;
        }
        if (z <= target_z) {
            out.stop_z = target_z;
            out.contacted = false;
            return out;
        }
    }
}

struct TimedPoint {
    double t = 0.0;
    double x = 0.0;
    double y = 0.0;
};

struct HybridParams {
    double gain_dt = 0.3;           // admittance gain times control period, in (0, 1) for convergence
    double control_period = 0.004;  // s
    double contact_lost_dwell = 0.25;  // s without contact before ContactLost
};

struct TrackSample {
    double t = 0.0;
    Pose pose;
    FTReading ft;
};

struct TrackResult {
    std::vector<TrackSample> trace;
    std::size_t settle_steps = 0;
    double in_band_fraction = 1.0;
};

// Linear interpolation of a time-ordered path.
inline Vec2 sample_path(std::span<const TimedPoint> path, double t) {
    if (path.empty()) throw PreconditionViolation("empty path");
    if (t <= path.front().t) return {path.front().x, path.front().y};
    if (t >= path.back().t) return {path.back().x, path.back().y};
    const auto it = std::upper_bound(path.begin(), path.end(), t,
                                     [](double v, const TimedPoint& p) { return v < p.t; });
    const TimedPoint& b = *it;
    const TimedPoint& a = *(it - 1);
    const double s = (b.t > a.t) ? (t - a.t) / (b.t - a.t) : 0.0;
    return {a.x + s * (b.x - a.x), a.y + s * (b.y - a.y)};
}

// Number of steps for an initial force error to decay into the band under
// the geometric recursion e[n+1] = (1 - g*dt) e[n].
inline std::size_t settle_steps_for(double initial_error, double band, double gain_dt) {
    const double e0 = std::abs(initial_error);
    if (e0 <= band) return 0;
    const double factor = std::abs(1.0 - gain_dt);
    if (factor <= 0.0) return 1;
    if (factor >= 1.0) return std::numeric_limits<std::size_t>::max();
    return static_cast<std::size_t>(std::ceil(std::log(band / e0) / std::log(factor) - 1e-12));
}

// Hybrid force/position tracking: x, y follow the path exactly; z is driven by
// the admittance law dz = -(g*dt) (f_set - f_meas) / k each control step.
// Reports the fraction of post-settle samples with |fz - f_set| <= band.
inline TrackResult hybrid_track(std::span<const TimedPoint> path, double start_z, double f_set, double band,
                                const ContactModel& contact, const HybridParams& params = {}) {
    contact.validate();
    if (!(f_set > 0.0)) throw PreconditionViolation("force setpoint must be > 0");
    if (!(band >= 0.0)) throw PreconditionViolation("force band must be >= 0");
    if (!(params.control_period > 0.0)) throw PreconditionViolation("control period must be > 0");
    if (path.empty()) throw PreconditionViolation("empty path");

    const double dt = params.control_period;
    const double t0 = path.front().t;
    const auto steps = static_cast<std::size_t>(std::floor((path.back().t - t0) / dt + 1e-9)) + 1;

    TrackResult out;
    out.trace.reserve(steps);
    double z = start_z;
    double prev_pen = contact.surface_at(path.front().x, path.front().y) - z;
    double lost_for = 0.0;
    for (std::size_t n = 0; n < steps; ++n) {
        const double t = t0 + static_cast<double>(n) * dt;
        const Vec2 p = sample_path(path, t);
        const double s = contact.surface_at(p.x, p.y);
        const double pen = s - z;
        const double rate = n == 0 ? 0.0 : (pen - prev_pen) / dt;
        const double fz = contact.normal_force(s, z, rate);
        prev_pen = pen;
        out.trace.push_back({t, Pose(p.x, p.y, z, 0.0), contact.reading(fz)});
        if (n == 0) out.settle_steps = settle_steps_for(f_set - fz, band, params.gain_dt);

        if (fz <= 0.0) {
            lost_for += dt;
            if (lost_for > params.contact_lost_dwell + 1e-12) throw ContactLost("brush contact lost");
        } else {
            lost_for = 0.0;
        }
        z -= params.gain_dt * (f_set - fz) / contact.stiffness;
    }

    std::size_t counted = 0;
    std::size_t inside = 0;
    for (std::size_t n = out.settle_steps; n < out.trace.size(); ++n) {
        ++counted;
        if (std::abs(out.trace[n].ft.fz - f_set) <= band + 1e-9) ++inside;
    }
    out.in_band_fraction = counted == 0 ? 1.0 : static_cast<double>(inside) / static_cast<double>(counted);
    return out;
}

// Lift check: the part is retained unless some reading exceeds the drag limit
// on any axis beyond the expected payload weight. Exactly at the limit passes.
inline bool monitor_lift(std::span<const FTReading> trace, double drag_limit, double payload_weight = 0.0) {
    return std::none_of(trace.begin(), trace.end(), [&](const FTReading& r) {
        return std::abs(r.fx) > drag_limit || std::abs(r.fy) > drag_limit ||
               std::abs(r.fz - payload_weight) > drag_limit;
    });
}

}  // namespace decake
