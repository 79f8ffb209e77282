#pragma once

// Geometric substrate: planar points and polygons, 3D boxes, nearly-flat rigid
// poses, and scalar grids. Units are millimeters throughout.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <numbers>
#include <optional>
#include <span>
#include <sstream>
#include <vector>

#include "decake/error.hpp"

namespace decake {

struct Vec2 {
    double x = 0.0;
    double y = 0.0;

    friend Vec2 operator+(Vec2 a, Vec2 b) { return {a.x + b.x, a.y + b.y}; }
    friend Vec2 operator-(Vec2 a, Vec2 b) { return {a.x - b.x, a.y - b.y}; }
    friend Vec2 operator*(double s, Vec2 a) { return {s * a.x, s * a.y}; }
    friend bool operator==(Vec2, Vec2) = default;

    double norm() const { return std::hypot(x, y); }
};

inline double dot(Vec2 a, Vec2 b) { return a.x * b.x + a.y * b.y; }
inline double cross(Vec2 a, Vec2 b) { return a.x * b.y - a.y * b.x; }

inline Vec2 rotate(Vec2 p, double angle) {
    const double c = std::cos(angle);
    const double s = std::sin(angle);
    return {c * p.x - s * p.y, s * p.x + c * p.y};
}

struct Vec3 {
    double x = 0.0;
    double y = 0.0;
    double z = 0.0;

    friend Vec3 operator+(Vec3 a, Vec3 b) { return {a.x + b.x, a.y + b.y, a.z + b.z}; }
    friend Vec3 operator-(Vec3 a, Vec3 b) { return {a.x - b.x, a.y - b.y, a.z - b.z}; }
    friend Vec3 operator*(double s, Vec3 a) { return {s * a.x, s * a.y, s * a.z}; }
    friend bool operator==(Vec3, Vec3) = default;

    double norm() const { return std::sqrt(x * x + y * y + z * z); }
    Vec2 xy() const { return {x, y}; }
};

// Wraps an angle into [-pi, pi).
inline double normalize_angle(double a) {
    constexpr double two_pi = 2.0 * std::numbers::pi;
    double r = std::fmod(a + std::numbers::pi, two_pi);
    if (r < 0.0) r += two_pi;
    r -= std::numbers::pi;
    if (r >= std::numbers::pi) r -= two_pi;
    return r;
}

// Position plus rotation about the vertical axis. The parts handled here are
// nearly flat, so the remaining orientation is a face-up flag on the part.
struct Pose {
    double x = 0.0;
    double y = 0.0;
    double z = 0.0;
    double yaw = 0.0;

    Pose() = default;
    Pose(double x_, double y_, double z_, double yaw_) : x(x_), y(y_), z(z_), yaw(normalize_angle(yaw_)) {
        if (!std::isfinite(x) || !std::isfinite(y) || !std::isfinite(z) || !std::isfinite(yaw_))
            throw PreconditionViolation("pose coordinates must be finite");
    }

    Vec2 xy() const { return {x, y}; }
    Vec3 position() const { return {x, y, z}; }

    Vec2 to_world(Vec2 local) const { return rotate(local, yaw) + xy(); }
    Vec2 to_local(Vec2 world) const { return rotate(world - xy(), -yaw); }

    friend bool operator==(const Pose&, const Pose&) = default;
};

struct Aabb2 {
    Vec2 min;
    Vec2 max;

    double width() const { return max.x - min.x; }
    double height() const { return max.y - min.y; }
    Vec2 center() const { return 0.5 * (min + max); }
    bool contains(Vec2 p) const { return p.x >= min.x && p.x <= max.x && p.y >= min.y && p.y <= max.y; }
    bool overlaps(const Aabb2& o) const {
        return min.x <= o.max.x && o.min.x <= max.x && min.y <= o.max.y && o.min.y <= max.y;
    }
};

struct Aabb3 {
    Vec3 min;
    Vec3 max;

    Aabb3() = default;
    Aabb3(Vec3 lo, Vec3 hi) : min(lo), max(hi) {
        if (lo.x > hi.x || lo.y > hi.y || lo.z > hi.z)
            throw PreconditionViolation("box min corner must not exceed max corner");
    }

    Vec3 center() const { return 0.5 * (min + max); }

    bool contains(Vec3 p) const {
        return p.x >= min.x && p.x <= max.x && p.y >= min.y && p.y <= max.y && p.z >= min.z &&
               p.z <= max.z;
    }

    bool contains(const Aabb3& o) const { return contains(o.min) && contains(o.max); }

    bool strictly_contains(Vec3 p) const {
        return p.x > min.x && p.x < max.x && p.y > min.y && p.y < max.y && p.z > min.z && p.z < max.z;
    }

    double distance_sq(Vec3 p) const {
        const double dx = std::max({min.x - p.x, 0.0, p.x - max.x});
        const double dy = std::max({min.y - p.y, 0.0, p.y - max.y});
        const double dz = std::max({min.z - p.z, 0.0, p.z - max.z});
        return dx * dx + dy * dy + dz * dz;
    }

    friend bool operator==(const Aabb3&, const Aabb3&) = default;
};

inline double signed_area(std::span<const Vec2> pts) {
    double twice = 0.0;
    for (std::size_t i = 0, n = pts.size(); i < n; ++i) twice += cross(pts[i], pts[(i + 1) % n]);
    return 0.5 * twice;
}

namespace detail {

inline int orientation(Vec2 a, Vec2 b, Vec2 c) {
    const double v = cross(b - a, c - a);
    const double scale = std::max({std::abs(b.x - a.x), std::abs(b.y - a.y), std::abs(c.x - a.x),
                                   std::abs(c.y - a.y), 1.0});
    if (std::abs(v) <= 1e-12 * scale * scale) return 0;
    return v > 0.0 ? 1 : -1;
}

inline bool on_segment(Vec2 p, Vec2 a, Vec2 b) {
    return orientation(a, b, p) == 0 && p.x >= std::min(a.x, b.x) - 1e-12 &&
           p.x <= std::max(a.x, b.x) + 1e-12 && p.y >= std::min(a.y, b.y) - 1e-12 &&
           p.y <= std::max(a.y, b.y) + 1e-12;
}

inline bool segments_intersect(Vec2 a, Vec2 b, Vec2 c, Vec2 d) {
    const int o1 = orientation(a, b, c);
    const int o2 = orientation(a, b, d);
    const int o3 = orientation(c, d, a);
    const int o4 = orientation(c, d, b);
    if (o1 != o2 && o3 != o4) return true;
    return (o1 == 0 && on_segment(c, a, b)) || (o2 == 0 && on_segment(d, a, b)) ||
           (o3 == 0 && on_segment(a, c, d)) || (o4 == 0 && on_segment(b, c, d));
}

}  // namespace detail

// Simple polygon, stored counter-clockwise. Clockwise input is re-wound;
// degenerate or self-intersecting input throws InvalidPolygon.
class Polygon2 {
public:
    Polygon2() = default;

    explicit Polygon2(std::vector<Vec2> vertices) : vertices_(std::move(vertices)) {
        if (vertices_.size() < 3) throw InvalidPolygon("polygon needs at least 3 vertices");
        for (const auto& v : vertices_)
            if (!std::isfinite(v.x) || !std::isfinite(v.y)) throw InvalidPolygon("non-finite vertex");
        const double a = signed_area(vertices_);
        const Aabb2 box = compute_bounds();
        const double scale = std::max(box.width(), box.height());
        if (!(std::abs(a) > 1e-12 * scale * scale)) throw InvalidPolygon("degenerate polygon (zero area)");
        if (a < 0.0) std::reverse(vertices_.begin(), vertices_.end());
        check_simple();
        bounds_ = compute_bounds();
    }

    static Polygon2 rectangle(double width, double height, Vec2 center = {}) {
        const double hw = 0.5 * width;
        const double hh = 0.5 * height;
        return Polygon2({{center.x - hw, center.y - hh},
                         {center.x + hw, center.y - hh},
                         {center.x + hw, center.y + hh},
                         {center.x - hw, center.y + hh}});
    }

    std::span<const Vec2> vertices() const { return vertices_; }
    std::size_t size() const { return vertices_.size(); }
    const Aabb2& bounds() const { return bounds_; }
    bool empty() const { return vertices_.empty(); }

    Vec2 vertex_centroid() const {
        Vec2 c;
        for (const auto& v : vertices_) c = c + v;
        return (1.0 / static_cast<double>(vertices_.size())) * c;
    }

    Polygon2 transformed(const Pose& pose) const {
        std::vector<Vec2> out;
        out.reserve(vertices_.size());
        for (const auto& v : vertices_) out.push_back(pose.to_world(v));
        return Polygon2(std::move(out));
    }

    // Reflection across the local x axis (v -> -v).
    Polygon2 mirrored_y() const {
        std::vector<Vec2> out;
        out.reserve(vertices_.size());
        for (const auto& v : vertices_) out.push_back({v.x, -v.y});
        return Polygon2(std::move(out));
    }

    friend bool operator==(const Polygon2& a, const Polygon2& b) { return a.vertices_ == b.vertices_; }

private:
    Aabb2 compute_bounds() const {
        Aabb2 b{{std::numeric_limits<double>::infinity(), std::numeric_limits<double>::infinity()},
                {-std::numeric_limits<double>::infinity(), -std::numeric_limits<double>::infinity()}};
        for (const auto& v : vertices_) {
            b.min.x = std::min(b.min.x, v.x);
            b.min.y = std::min(b.min.y, v.y);
            b.max.x = std::max(b.max.x, v.x);
            b.max.y = std::max(b.max.y, v.y);
        }
        return b;
    }

    void check_simple() const {
        const std::size_t n = vertices_.size();
        for (std::size_t i = 0; i < n; ++i) {
            for (std::size_t j = i + 1; j < n; ++j) {
                const bool adjacent = j == i + 1 || (i == 0 && j == n - 1);
                if (adjacent) continue;
                if (detail::segments_intersect(vertices_[i], vertices_[(i + 1) % n], vertices_[j],
                                               vertices_[(j + 1) % n]))
                    throw InvalidPolygon("polygon is self-intersecting");
            }
        }
    }

    std::vector<Vec2> vertices_;
    Aabb2 bounds_{};
};

inline double polygon_area(const Polygon2& p) {
    if (p.size() < 3) throw InvalidPolygon("polygon needs at least 3 vertices");
    return signed_area(p.vertices());
}

// Boundary points count as inside.
inline bool point_in_polygon(Vec2 pt, const Polygon2& poly) {
    if (!poly.bounds().contains(pt)) return false;
    const auto v = poly.vertices();
    const std::size_t n = v.size();
    bool inside = false;
    for (std::size_t i = 0, j = n - 1; i < n; j = i++) {
        if (detail::on_segment(pt, v[j], v[i])) return true;
        if ((v[i].y > pt.y) != (v[j].y > pt.y)) {
            const double x_cross = v[j].x + (pt.y - v[j].y) * (v[i].x - v[j].x) / (v[i].y - v[j].y);
            if (pt.x < x_cross) inside = !inside;
        }
    }
    return inside;
}

// True when the closed regions share at least one point.
inline bool polygons_overlap(const Polygon2& a, const Polygon2& b) {
    if (!a.bounds().overlaps(b.bounds())) return false;
    const auto va = a.vertices();
    const auto vb = b.vertices();
    for (std::size_t i = 0; i < va.size(); ++i)
        for (std::size_t j = 0; j < vb.size(); ++j)
            if (detail::segments_intersect(va[i], va[(i + 1) % va.size()], vb[j], vb[(j + 1) % vb.size()]))
                return true;
    return point_in_polygon(va[0], b) || point_in_polygon(vb[0], a);
}

// Regular grid of non-negative scalars. Cell (i, j) covers
// [origin.x + i*res, origin.x + (i+1)*res) x [origin.y + j*res, ...).
class GridField {
public:
    GridField() = default;

    GridField(Vec2 origin, double resolution, std::size_t nx, std::size_t ny, double fill = 0.0)
        : origin_(origin), resolution_(resolution), nx_(nx), ny_(ny), cells_(nx * ny, fill) {
        if (!(resolution > 0.0) || !std::isfinite(resolution)) throw InvalidGrid("grid resolution must be > 0");
        check_value(fill);
    }

    GridField(Vec2 origin, double resolution, std::size_t nx, std::size_t ny, std::vector<double> cells)
        : origin_(origin), resolution_(resolution), nx_(nx), ny_(ny), cells_(std::move(cells)) {
        if (!(resolution > 0.0) || !std::isfinite(resolution)) throw InvalidGrid("grid resolution must be > 0");
        if (cells_.size() != nx * ny) throw InvalidGrid("grid cell count does not match dimensions");
        for (double c : cells_) check_value(c);
    }

    Vec2 origin() const { return origin_; }
    double resolution() const { return resolution_; }
    std::size_t nx() const { return nx_; }
    std::size_t ny() const { return ny_; }
    std::size_t size() const { return cells_.size(); }
    double cell_area() const { return resolution_ * resolution_; }

    std::span<const double> cells() const { return cells_; }

    std::size_t index(std::size_t i, std::size_t j) const { return j * nx_ + i; }
    double at(std::size_t i, std::size_t j) const { return cells_[index(i, j)]; }
    double operator[](std::size_t k) const { return cells_[k]; }

    void set(std::size_t k, double value) {
        check_value(value);
        cells_[k] = value;
    }
    void set(std::size_t i, std::size_t j, double value) { set(index(i, j), value); }

    Vec2 cell_center(std::size_t i, std::size_t j) const {
        return {origin_.x + (static_cast<double>(i) + 0.5) * resolution_,
                origin_.y + (static_cast<double>(j) + 0.5) * resolution_};
    }
    Vec2 cell_center(std::size_t k) const { return cell_center(k % nx_, k / nx_); }

    std::optional<std::size_t> locate(Vec2 p) const {
        const double fi = std::floor((p.x - origin_.x) / resolution_);
        const double fj = std::floor((p.y - origin_.y) / resolution_);
        if (fi < 0.0 || fj < 0.0 || fi >= static_cast<double>(nx_) || fj >= static_cast<double>(ny_))
            return std::nullopt;
        return index(static_cast<std::size_t>(fi), static_cast<std::size_t>(fj));
    }

    double sum() const {
        double s = 0.0;
        for (double c : cells_) s += c;
        return s;
    }

    double max_value() const { return cells_.empty() ? 0.0 : *std::max_element(cells_.begin(), cells_.end()); }

    // Row reversal (j -> ny-1-j); together with a symmetric origin this is the
    // reflection v -> -v of the field.
    GridField mirrored_rows() const {
        GridField out = *this;
        for (std::size_t j = 0; j < ny_; ++j)
            for (std::size_t i = 0; i < nx_; ++i) out.cells_[index(i, ny_ - 1 - j)] = cells_[index(i, j)];
        return out;
    }

    friend bool operator==(const GridField&, const GridField&) = default;

private:
    static void check_value(double v) {
        if (!(v >= 0.0) || !std::isfinite(v)) {
            std::ostringstream os;
            os << "grid cell value must be finite and >= 0, got " << v;
            throw InvalidGrid(os.str());
        }
    }

    Vec2 origin_{};
    double resolution_ = 1.0;
    std::size_t nx_ = 0;
    std::size_t ny_ = 0;
    std::vector<double> cells_;
};

// Sum of cells times cell area: depth (mm) -> volume (mm^3).
inline double grid_integrate(const GridField& f) { return f.sum() * f.cell_area(); }

}  // namespace decake
