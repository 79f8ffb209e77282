#pragma once

// Cleaning trajectories: an Archimedean spiral that keeps circling once it
// reaches its maximum radius, and the "rectircle" stadium loop. Both are
// sampled at a fixed period with constant tangential speed.

#include <cmath>
#include <numbers>
#include <vector>

#include "decake/error.hpp"
#include "decake/force_control.hpp"
#include "decake/geometry.hpp"

namespace decake {

enum class BrushPattern { Spiral, Rectircle };

inline const char* to_string(BrushPattern p) { return p == BrushPattern::Spiral ? "spiral" : "rectircle"; }

struct BrushTrajectory {
    BrushPattern pattern = BrushPattern::Spiral;
    Vec2 center;                     // part centroid when the motion starts
    std::vector<TimedPoint> samples;  // absolute tool positions
    double f_set = 5.0;
    double duration = 0.0;
    double step = 0.0;  // path length between consecutive samples, mm
};

// Angle at which the spiral reaches its maximum radius: 2*pi*r_max/pitch.
inline double spiral_end_angle(double pitch, double r_max) { return 2.0 * std::numbers::pi * r_max / pitch; }

// Stadium perimeter: two straights plus two semicircular caps.
inline double rectircle_loop_length(double width, double height) { return 2.0 * width + std::numbers::pi * height; }

namespace detail {

// Arc length of r = b*theta from 0 to theta.
inline double spiral_arc(double b, double theta) {
    return 0.5 * b * (theta * std::sqrt(1.0 + theta * theta) + std::asinh(theta));
}

inline void check_timing(double speed, double duration, double dt) {
    if (!(speed > 0.0)) throw PreconditionViolation("path speed must be > 0");
    if (!(duration > 0.0)) throw PreconditionViolation("path duration must be > 0");
    if (!(dt > 0.0)) throw PreconditionViolation("sample period must be > 0");
}

inline std::size_t sample_count(double duration, double dt) {
    return static_cast<std::size_t>(std::floor(duration / dt + 1e-9)) + 1;
}

}  // namespace detail

inline BrushTrajectory spiral_path(Vec2 center, double pitch, double r_max, double speed, double duration,
                                   double dt = 0.004, double f_set = 5.0) {
    if (!(pitch > 0.0)) throw PreconditionViolation("spiral pitch must be > 0");
    if (!(r_max > 0.0)) throw PreconditionViolation("spiral radius must be > 0");
    detail::check_timing(speed, duration, dt);

    const double b = pitch / (2.0 * std::numbers::pi);
    const double theta_end = spiral_end_angle(pitch, r_max);
    const double s_end = detail::spiral_arc(b, theta_end);

    BrushTrajectory traj;
    traj.pattern = BrushPattern::Spiral;
    traj.center = center;
    traj.f_set = f_set;
    traj.duration = duration;
    traj.step = speed * dt;
    const std::size_t n = detail::sample_count(duration, dt);
    traj.samples.reserve(n);
    double theta = 0.0;
    for (std::size_t k = 0; k < n; ++k) {
        const double t = static_cast<double>(k) * dt;
        const double s = speed * t;
        double r = 0.0;
        if (s <= s_end) {
            // Newton on arc(theta) = s, warm-started from the previous sample.
            for (int it = 0; it < 50; ++it) {
                const double f = detail::spiral_arc(b, theta) - s;
                const double df = b * std::sqrt(1.0 + theta * theta);
                const double next = std::max(0.0, theta - f / df);
                const bool done = std::abs(next - theta) < 1e-13;
                theta = next;
                if (done) break;
            }
            theta = std::min(theta, theta_end);
            r = b * theta;
        } else {
            theta = theta_end + (s - s_end) / r_max;
            r = r_max;
        }
        traj.samples.push_back({t, center.x + r * std::cos(theta), center.y + r * std::sin(theta)});
    }
    return traj;
}

// Point at arc length s along a stadium centered at the origin, long axis on x,
// starting at the lower-left end of the bottom straight.
inline Vec2 rectircle_point(double width, double height, double s) {
    const double radius = 0.5 * height;
    const double cap = std::numbers::pi * radius;
    const double loop = rectircle_loop_length(width, height);
    s = std::fmod(s, loop);
    if (s < 0.0) s += loop;
    if (s < width) return {-0.5 * width + s, -radius};
    s -= width;
    if (s < cap) {
        const double phi = -0.5 * std::numbers::pi + s / radius;
        return {0.5 * width + radius * std::cos(phi), radius * std::sin(phi)};
    }
    s -= cap;
    if (s < width) return {0.5 * width - s, radius};
    s -= width;
    const double phi = 0.5 * std::numbers::pi + s / radius;
    return {-0.5 * width + radius * std::cos(phi), radius * std::sin(phi)};
}

inline BrushTrajectory rectircle_path(Vec2 center, double width, double height, double direction, double speed,
                                      double duration, double dt = 0.004, double f_set = 5.0) {
    if (!(width >= 0.0)) throw PreconditionViolation("rectircle width must be >= 0");
    if (!(height > 0.0)) throw PreconditionViolation("rectircle height must be > 0");
    detail::check_timing(speed, duration, dt);

    BrushTrajectory traj;
    traj.pattern = BrushPattern::Rectircle;
    traj.center = center;
    traj.f_set = f_set;
    traj.duration = duration;
    traj.step = speed * dt;
    const std::size_t n = detail::sample_count(duration, dt);
    traj.samples.reserve(n);
    for (std::size_t k = 0; k < n; ++k) {
        const double t = static_cast<double>(k) * dt;
        const Vec2 p = center + rotate(rectircle_point(width, height, speed * t), direction);
        traj.samples.push_back({t, p.x, p.y});
    }
    return traj;
}

}  // namespace decake
