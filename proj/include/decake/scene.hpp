#pragma once

// World model: caked parts with per-face powder depth fields, the origin bin,
// the flip collection area, the destination bin, and mass bookkeeping.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <optional>
#include <string>
#include <vector>

#include "decake/error.hpp"
#include "decake/geometry.hpp"
#include "decake/random.hpp"

namespace decake {

// Standard gravity, m/s^2.
inline constexpr double kGravity = 9.81;

enum class PartStatus { InBin, Held, OnFlipArea, Done, Skipped };

inline const char* to_string(PartStatus s) {
    switch (s) {
        case PartStatus::InBin: return "InBin";
        case PartStatus::Held: return "Held";
        case PartStatus::OnFlipArea: return "OnFlipArea";
        case PartStatus::Done: return "Done";
        case PartStatus::Skipped: return "Skipped";
    }
    return "?";
}

struct PartSpec {
    std::string name = "insole";
    Polygon2 footprint;  // local frame, centered on the part origin
    double thickness = 10.0;
    double clean_mass = 22.4;  // grams
    double porosity = 0.3;

    double min_extent() const { return std::min(footprint.bounds().width(), footprint.bounds().height()); }
    double flatness_ratio() const { return thickness / min_extent(); }

    void validate() const {
        if (!(thickness > 0.0)) throw PreconditionViolation("part thickness must be > 0");
        if (!(clean_mass > 0.0)) throw PreconditionViolation("part clean mass must be > 0");
        if (!(porosity >= 0.0 && porosity <= 1.0)) throw PreconditionViolation("porosity must be in [0, 1]");
        if (!std::isfinite(flatness_ratio())) throw PreconditionViolation("flatness ratio must be finite");
    }
};

// A 250 x 80 mm rectangle standing in for a printed shoe insole.
inline PartSpec insole_spec() {
    PartSpec s;
    s.footprint = Polygon2::rectangle(250.0, 80.0);
    return s;
}

struct PartState {
    int id = 0;
    PartSpec spec;
    Pose pose;            // z is the height of the part's underside
    bool face_up = true;  // true while the originally-up face is exposed
    GridField powder_top;     // currently upward face, depth in mm
    GridField powder_bottom;  // currently downward face
    PartStatus status = PartStatus::InBin;

    double top_z() const { return pose.z + spec.thickness; }

    Polygon2 world_footprint() const { return spec.footprint.transformed(pose); }

    bool covers(Vec2 world) const { return point_in_polygon(pose.to_local(world), spec.footprint); }

    // Powder depth of the upward face under a world point, if the point is on the part.
    std::optional<double> top_powder_at(Vec2 world) const {
        const Vec2 local = pose.to_local(world);
        if (!point_in_polygon(local, spec.footprint)) return std::nullopt;
        // Points on the far footprint edge fall just past the half-open grid.
        const Vec2 o = powder_top.origin();
        const double r = powder_top.resolution();
        const auto clamp_index = [r](double v, std::size_t n) {
            return static_cast<std::size_t>(std::clamp(std::floor(v / r), 0.0, static_cast<double>(n - 1)));
        };
        return powder_top.at(clamp_index(local.x - o.x, powder_top.nx()), clamp_index(local.y - o.y, powder_top.ny()));
    }
};

// Local cell grid shared by both powder fields. The origin is symmetric about
// the part origin so that row mirroring is an exact reflection.
inline GridField make_part_grid(const Polygon2& footprint, double resolution) {
    double hx = 0.0;
    double hy = 0.0;
    for (const auto& v : footprint.vertices()) {
        hx = std::max(hx, std::abs(v.x));
        hy = std::max(hy, std::abs(v.y));
    }
    const auto nx = static_cast<std::size_t>(std::ceil(2.0 * hx / resolution - 1e-9));
    const auto ny = static_cast<std::size_t>(std::ceil(2.0 * hy / resolution - 1e-9));
    const Vec2 origin{-0.5 * static_cast<double>(nx) * resolution, -0.5 * static_cast<double>(ny) * resolution};
    return GridField(origin, resolution, nx, ny, 0.0);
}

// Indices of grid cells whose centers lie on the footprint.
inline std::vector<std::size_t> footprint_cells(const GridField& grid, const Polygon2& footprint) {
    std::vector<std::size_t> out;
    for (std::size_t k = 0; k < grid.size(); ++k)
        if (point_in_polygon(grid.cell_center(k), footprint)) out.push_back(k);
    return out;
}

inline PartState make_part(int id, PartSpec spec, double resolution) {
    spec.validate();
    PartState p;
    p.id = id;
    p.powder_top = make_part_grid(spec.footprint, resolution);
    p.powder_bottom = p.powder_top;
    p.spec = std::move(spec);
    return p;
}

inline double powder_mass(const GridField& field, double density) { return density * grid_integrate(field); }

inline double part_total_mass(const PartState& p, double density) {
    return p.spec.clean_mass + density * (grid_integrate(p.powder_top) + grid_integrate(p.powder_bottom));
}

struct BinGeometry {
    Polygon2 outline;
    double wall_height = 200.0;
};

struct SceneState {
    BinGeometry bin;
    Polygon2 flip_area;
    Polygon2 destination;
    std::vector<PartState> parts;
    double dust_collected = 0.0;   // grams captured by the cleaning station
    double flip_area_spill = 0.0;  // grams shed while flipping
    std::uint64_t rng_seed = 0;
    double powder_density = 0.00055;  // g/mm^3

    PartState& part(int id) {
        for (auto& p : parts)
            if (p.id == id) return p;
        throw NoSuchPart("no part with id " + std::to_string(id));
    }
    const PartState& part(int id) const { return const_cast<SceneState*>(this)->part(id); }

    double total_mass() const {
        double m = dust_collected + flip_area_spill;
        for (const auto& p : parts) m += part_total_mass(p, powder_density);
        return m;
    }
};

// Status shared by parts resting in the same place as `s`.
inline bool same_region(PartStatus a, PartStatus b) {
    return a == b && (a == PartStatus::InBin || a == PartStatus::OnFlipArea);
}

// True when a footprint cell center of either part lies on the other part.
inline bool projected_overlap(const PartState& a, const PartState& b) {
    const Polygon2 fa = a.world_footprint();
    const Polygon2 fb = b.world_footprint();
    if (!polygons_overlap(fa, fb)) return false;
    const auto hits = [](const PartState& p, const PartState& q) {
        for (std::size_t k : footprint_cells(p.powder_top, p.spec.footprint))
            if (q.covers(p.pose.to_world(p.powder_top.cell_center(k)))) return true;
        return false;
    };
    return hits(a, b) || hits(b, a);
}

// Height of the highest part in `below` that `part` overlaps in projection,
// or the floor (0) if none.
inline double support_height(const PartState& part, const std::vector<const PartState*>& below) {
    double support = 0.0;
    for (const PartState* other : below)
        if (other->top_z() > support && projected_overlap(part, *other)) support = other->top_z();
    return support;
}

// Projection-based settling: parts of the given region drop, lowest first,
// onto whatever lies beneath them.
inline void settle(SceneState& scene, PartStatus region) {
    std::vector<PartState*> order;
    for (auto& p : scene.parts)
        if (p.status == region) order.push_back(&p);
    std::stable_sort(order.begin(), order.end(), [](const PartState* a, const PartState* b) {
        return a->pose.z != b->pose.z ? a->pose.z < b->pose.z : a->id < b->id;
    });
    std::vector<const PartState*> settled;
    for (PartState* p : order) {
        p->pose.z = support_height(*p, settled);
        settled.push_back(p);
    }
}

// Footprint area of a resting part not covered, in top-down projection, by any
// part lying above it in the same region.
inline double exposed_top_area(const SceneState& scene, int id) {
    const PartState& part = scene.part(id);
    if (part.status != PartStatus::InBin && part.status != PartStatus::OnFlipArea)
        throw PreconditionViolation("exposed area is defined for resting parts only");
    std::vector<const PartState*> above;
    const Aabb2 box = part.world_footprint().bounds();
    for (const auto& other : scene.parts)
        if (other.id != id && same_region(other.status, part.status) && other.pose.z > part.pose.z &&
            other.world_footprint().bounds().overlaps(box))
            above.push_back(&other);
    std::size_t exposed = 0;
    for (std::size_t k : footprint_cells(part.powder_top, part.spec.footprint)) {
        const Vec2 w = part.pose.to_world(part.powder_top.cell_center(k));
        const bool covered = std::any_of(above.begin(), above.end(), [&](const PartState* o) { return o->covers(w); });
        if (!covered) ++exposed;
    }
    return static_cast<double>(exposed) * part.powder_top.cell_area();
}

struct SceneParams {
    int n_parts = 10;
    double bin_width = 600.0;
    double bin_depth = 400.0;
    double wall_height = 200.0;
    Polygon2 flip_area = Polygon2::rectangle(300.0, 200.0, {950.0, 550.0});
    Polygon2 destination = Polygon2::rectangle(600.0, 400.0, {300.0, -400.0});
    PartSpec part = insole_spec();
    double clean_mass_sd = 0.0;
    double resolution = 2.0;
    double powder_mass_mean = 26.2;
    double powder_mass_sd = 10.9;
    double top_fraction = 0.5;
    double powder_density = 0.00055;
    int placement_tries = 500;
};

namespace detail {

// Smooth positive depth profile over the footprint, scaled to a target mass.
inline void spread_powder(GridField& field, const Polygon2& footprint, double mass, double density, Rng& rng) {
    const auto cells = footprint_cells(field, footprint);
    if (cells.empty() || mass <= 0.0) return;
    const double amp = rng.uniform(0.0, 0.6);
    const double wu = rng.uniform(60.0, 200.0);
    const double wv = rng.uniform(60.0, 200.0);
    const double pu = rng.uniform(0.0, 2.0 * std::numbers::pi);
    const double pv = rng.uniform(0.0, 2.0 * std::numbers::pi);
    std::vector<double> w(cells.size());
    double total = 0.0;
    for (std::size_t n = 0; n < cells.size(); ++n) {
        const Vec2 c = field.cell_center(cells[n]);
        w[n] = 1.0 + amp * std::sin(2.0 * std::numbers::pi * c.x / wu + pu) *
                         std::cos(2.0 * std::numbers::pi * c.y / wv + pv);
        total += w[n];
    }
    const double scale = mass / (density * field.cell_area() * total);
    for (std::size_t n = 0; n < cells.size(); ++n) field.set(cells[n], w[n] * scale);
}

}  // namespace detail

// Seeded scenario: parts dropped at random poses inside the bin walls and
// settled onto each other. Identical parameters and seed give identical scenes.
inline SceneState scene_generate(const SceneParams& params, std::uint64_t seed) {
    if (params.n_parts < 0) throw PreconditionViolation("n_parts must be >= 0");
    if (params.powder_mass_mean < 0.0 || params.powder_mass_sd < 0.0)
        throw PreconditionViolation("powder mass mean and sd must be >= 0");
    if (!(params.top_fraction >= 0.0 && params.top_fraction <= 1.0))
        throw PreconditionViolation("top fraction must be in [0, 1]");
    params.part.validate();

    SceneState scene;
    scene.bin.outline = Polygon2::rectangle(params.bin_width, params.bin_depth,
                                            {0.5 * params.bin_width, 0.5 * params.bin_depth});
    scene.bin.wall_height = params.wall_height;
    scene.flip_area = params.flip_area;
    scene.destination = params.destination;
    scene.rng_seed = seed;
    scene.powder_density = params.powder_density;

    Rng rng(seed);
    std::vector<const PartState*> placed;
    scene.parts.reserve(static_cast<std::size_t>(params.n_parts));
    for (int id = 0; id < params.n_parts; ++id) {
        PartSpec spec = params.part;
        if (params.clean_mass_sd > 0.0)
            spec.clean_mass = std::max(0.5 * params.part.clean_mass, rng.normal(params.part.clean_mass, params.clean_mass_sd));
        PartState p = make_part(id, spec, params.resolution);

        bool found = false;
        const Aabb2 bin_box = scene.bin.outline.bounds();
        for (int attempt = 0; attempt < params.placement_tries && !found; ++attempt) {
            p.pose = Pose(rng.uniform(bin_box.min.x, bin_box.max.x), rng.uniform(bin_box.min.y, bin_box.max.y), 0.0,
                          rng.uniform(-std::numbers::pi, std::numbers::pi));
            const Polygon2 fp = p.world_footprint();
            found = std::all_of(fp.vertices().begin(), fp.vertices().end(),
                                [&](Vec2 v) { return point_in_polygon(v, scene.bin.outline); });
        }
        if (!found) throw SceneOverflow("no pose inside the bin walls for part " + std::to_string(id));

        p.pose.z = support_height(p, placed);
        if (p.top_z() > scene.bin.wall_height)
            throw SceneOverflow("stack of parts exceeds the bin wall height");

        const double mass = std::max(0.0, rng.normal(params.powder_mass_mean, params.powder_mass_sd));
        detail::spread_powder(p.powder_top, p.spec.footprint, mass * params.top_fraction, params.powder_density, rng);
        detail::spread_powder(p.powder_bottom, p.spec.footprint, mass * (1.0 - params.top_fraction),
                              params.powder_density, rng);
        scene.parts.push_back(std::move(p));
        placed.clear();
        for (const auto& q : scene.parts) placed.push_back(&q);
    }
    return scene;
}

inline SceneState scene_generate(std::uint64_t seed, int n_parts, double powder_mass_mean, double powder_mass_sd) {
    SceneParams params;
    params.n_parts = n_parts;
    params.powder_mass_mean = powder_mass_mean;
    params.powder_mass_sd = powder_mass_sd;
    return scene_generate(params, seed);
}

}  // namespace decake
