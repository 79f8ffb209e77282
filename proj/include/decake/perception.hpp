#pragma once

// Simulated perception. An exact top-down z-buffer stands in for the depth
// camera; a statistical instance detector stands in for the segmentation
// network and reproduces its recall/precision by injecting misses and
// spurious instances. Pose estimation and the pickability heuristics run on
// the rendered heights exactly as they would on a real point cloud.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numbers>
#include <optional>
#include <set>
#include <vector>

#include "decake/error.hpp"
#include "decake/geometry.hpp"
#include "decake/random.hpp"
#include "decake/scene.hpp"

namespace decake {

enum class SensorMode { Depth2D_off, Depth2D_on };

enum class Region { Bin, FlipArea };

inline const Polygon2& region_outline(const SceneState& scene, Region region) {
    return region == Region::Bin ? scene.bin.outline : scene.flip_area;
}

inline PartStatus region_status(Region region) {
    return region == Region::Bin ? PartStatus::InBin : PartStatus::OnFlipArea;
}

inline constexpr int kNoOwner = -1;

struct DepthImage {
    GridField heights;       // mm above the floor
    std::vector<int> owner;  // ground-truth id of the part seen in each cell, or kNoOwner
    SensorMode sensor_mode = SensorMode::Depth2D_off;
    Region region = Region::Bin;
};

// Top surface (part top plus powder) of the highest part of `region` above a
// world point; the floor (0) when no part covers it.
inline double surface_height(const SceneState& scene, Region region, Vec2 world, int* owner = nullptr) {
    double best = 0.0;
    int who = kNoOwner;
    const PartStatus status = region_status(region);
    for (const auto& p : scene.parts) {
        if (p.status != status) continue;
        if (const auto depth = p.top_powder_at(world)) {
            const double h = p.top_z() + *depth;
            if (who == kNoOwner || h > best) {
                best = h;
                who = p.id;
            }
        }
    }
    if (owner) *owner = who;
    return best;
}

// Orthographic top-down render of a region at the given resolution. Cells
// whose centers fall outside the region outline stay at the floor.
inline DepthImage render_depth(const SceneState& scene, Region region = Region::Bin, double resolution = 2.0) {
    const Polygon2& outline = region_outline(scene, region);
    const Aabb2 box = outline.bounds();
    const auto nx = static_cast<std::size_t>(std::ceil(box.width() / resolution - 1e-9));
    const auto ny = static_cast<std::size_t>(std::ceil(box.height() / resolution - 1e-9));
    DepthImage img;
    img.heights = GridField(box.min, resolution, nx, ny, 0.0);
    img.owner.assign(nx * ny, kNoOwner);
    img.region = region;

    const PartStatus status = region_status(region);
    std::vector<std::size_t> inside;
    inside.reserve(nx * ny);
    for (std::size_t k = 0; k < img.heights.size(); ++k)
        if (point_in_polygon(img.heights.cell_center(k), outline)) inside.push_back(k);

    for (const auto& p : scene.parts) {
        if (p.status != status) continue;
        const Aabb2 pb = p.world_footprint().bounds();
        for (std::size_t k : inside) {
            const Vec2 c = img.heights.cell_center(k);
            if (!pb.contains(c)) continue;
            const auto depth = p.top_powder_at(c);
            if (!depth) continue;
            const double h = p.top_z() + *depth;
            if (img.owner[k] == kNoOwner || h > img.heights[k]) {
                img.heights.set(k, h);
                img.owner[k] = p.id;
            }
        }
    }
    return img;
}

struct Detection {
    std::optional<int> part_id;      // nullopt for a spurious instance
    std::vector<std::size_t> mask;   // cell indices into the depth image
    double confidence = 0.0;
    Vec3 centroid;
    Aabb3 bbox;
    double exposed_area = 0.0;

    bool spurious() const { return !part_id.has_value(); }
};

struct ConfidenceRange {
    double lo = 0.95;
    double hi = 1.0;

    // Fraction of Uniform(lo, hi) draws at or above a threshold.
    double pass_fraction(double threshold) const {
        if (hi <= lo) return lo >= threshold ? 1.0 : 0.0;
        return std::clamp((hi - std::max(threshold, lo)) / (hi - lo), 0.0, 1.0);
    }
};

struct DetectorModel {
    double recall = 0.967;
    double precision = 0.975;
    double confidence_threshold = 0.95;
    ConfidenceRange true_confidence{0.95, 1.0};
    ConfidenceRange spurious_confidence{0.90, 0.99};
    int spurious_min_cells = 5;
    int spurious_max_cells = 20;
    Rng rng{0};

    static DetectorModel exact(std::uint64_t seed = 0) {
        DetectorModel m;
        m.recall = 1.0;
        m.precision = 1.0;
        m.rng = Rng(seed);
        return m;
    }

    void validate() const {
        for (double v : {recall, precision, confidence_threshold})
            if (!(v > 0.0 && v <= 1.0)) throw PreconditionViolation("detector rates must lie in (0, 1]");
        if (spurious_min_cells < 1 || spurious_max_cells < spurious_min_cells)
            throw PreconditionViolation("invalid spurious mask size range");
    }

    // Probability of emitting a visible part before the confidence filter, so
    // that the filtered recall equals `recall`.
    double emit_probability() const {
        const double pass = true_confidence.pass_fraction(confidence_threshold);
        return pass > 0.0 ? std::min(1.0, recall / pass) : recall;
    }

    // Mean number of raw spurious instances per visible part such that the
    // expected post-filter precision equals `precision`.
    double spurious_rate() const {
        const double pass = spurious_confidence.pass_fraction(confidence_threshold);
        if (precision >= 1.0 || pass <= 0.0) return 0.0;
        const double true_kept = emit_probability() * true_confidence.pass_fraction(confidence_threshold);
        return true_kept * (1.0 - precision) / precision / pass;
    }
};

namespace detail {

inline void fill_geometry(Detection& d, const DepthImage& depth) {
    const GridField& h = depth.heights;
    Vec3 sum;
    Vec3 lo{std::numeric_limits<double>::infinity(), std::numeric_limits<double>::infinity(),
            std::numeric_limits<double>::infinity()};
    Vec3 hi = -1.0 * lo;
    for (std::size_t k : d.mask) {
        const Vec2 c = h.cell_center(k);
        const Vec3 p{c.x, c.y, h[k]};
        sum = sum + p;
        lo = {std::min(lo.x, p.x), std::min(lo.y, p.y), std::min(lo.z, p.z)};
        hi = {std::max(hi.x, p.x), std::max(hi.y, p.y), std::max(hi.z, p.z)};
    }
    d.centroid = (1.0 / static_cast<double>(d.mask.size())) * sum;
    d.bbox = Aabb3(lo, hi);
    d.exposed_area = static_cast<double>(d.mask.size()) * h.cell_area();
}

// Compact random blob of `n` cells inside the region.
inline std::vector<std::size_t> random_blob(const DepthImage& depth, const Polygon2& outline, int n, Rng& rng) {
    const GridField& h = depth.heights;
    std::size_t seed_cell = 0;
    for (int tries = 0; tries < 1000; ++tries) {
        seed_cell = static_cast<std::size_t>(rng.uniform_int(0, static_cast<std::int64_t>(h.size()) - 1));
        if (point_in_polygon(h.cell_center(seed_cell), outline)) break;
    }
    std::vector<std::size_t> blob{seed_cell};
    std::set<std::size_t> members{seed_cell};
    for (int guard = 0; static_cast<int>(blob.size()) < n && guard < 100 * n; ++guard) {
        const std::size_t from = blob[static_cast<std::size_t>(rng.uniform_int(0, static_cast<std::int64_t>(blob.size()) - 1))];
        const std::size_t i = from % h.nx();
        const std::size_t j = from / h.nx();
        const int dir = static_cast<int>(rng.uniform_int(0, 3));
        std::size_t ni = i;
        std::size_t nj = j;
        if (dir == 0 && i + 1 < h.nx()) ++ni;
        else if (dir == 1 && i > 0) --ni;
        else if (dir == 2 && j + 1 < h.ny()) ++nj;
        else if (dir == 3 && j > 0) --nj;
        const std::size_t k = h.index(ni, nj);
        if (members.count(k) || !point_in_polygon(h.cell_center(k), outline)) continue;
        members.insert(k);
        blob.push_back(k);
    }
    return blob;
}

}  // namespace detail

// Instance detection over a depth image. Visible parts are emitted with the
// calibrated probability; spurious instances are injected; detections below
// the confidence threshold are dropped. Output order: true detections by part
// id, then spurious ones.
inline std::vector<Detection> detect(const DepthImage& depth, DetectorModel& model, const Polygon2& outline) {
    if (depth.sensor_mode == SensorMode::Depth2D_on)
        throw SensorBusy("IR strobe is on; 2D capture unavailable");
    model.validate();

    std::vector<int> visible;
    for (int id : depth.owner)
        if (id != kNoOwner) visible.push_back(id);
    std::sort(visible.begin(), visible.end());
    visible.erase(std::unique(visible.begin(), visible.end()), visible.end());

    std::vector<Detection> out;
    const double emit = model.emit_probability();
    for (int id : visible) {
        const bool hit = model.rng.bernoulli(emit);
        const double conf = model.rng.uniform(model.true_confidence.lo, model.true_confidence.hi);
        if (!hit || conf < model.confidence_threshold) continue;
        Detection d;
        d.part_id = id;
        d.confidence = conf;
        for (std::size_t k = 0; k < depth.owner.size(); ++k)
            if (depth.owner[k] == id) d.mask.push_back(k);
        detail::fill_geometry(d, depth);
        out.push_back(std::move(d));
    }

    const double rate = model.spurious_rate();
    for (std::size_t v = 0; v < visible.size(); ++v) {
        const int count = model.rng.poisson(rate);
        for (int s = 0; s < count; ++s) {
            const int cells = static_cast<int>(model.rng.uniform_int(model.spurious_min_cells, model.spurious_max_cells));
            const double conf = model.rng.uniform(model.spurious_confidence.lo, model.spurious_confidence.hi);
            auto blob = detail::random_blob(depth, outline, cells, model.rng);
            if (conf < model.confidence_threshold) continue;
            Detection d;
            d.confidence = conf;
            d.mask = std::move(blob);
            detail::fill_geometry(d, depth);
            out.push_back(std::move(d));
        }
    }
    return out;
}

inline std::vector<Detection> detect(const SceneState& scene, const DepthImage& depth, DetectorModel& model) {
    return detect(depth, model, region_outline(scene, depth.region));
}

struct PickabilityRules {
    double cup_area = std::numbers::pi * 15.0 * 15.0;  // mm^2
    double floating_tolerance = 10.0;                   // mm
};

struct PoseEstimate {
    Vec3 centroid;
    Aabb3 bbox;
    double exposed_area = 0.0;
    bool pickable = false;
};

// Centroid and tight box of the masked points, plus the pickability
// heuristics: enough exposed surface for the cup, inside the region walls,
// and resting on something rather than floating.
inline PoseEstimate estimate_pose(const Detection& d, const DepthImage& depth, const Polygon2& outline,
                                  const PickabilityRules& rules = {}) {
    if (d.mask.empty()) throw PreconditionViolation("detection mask is empty");
    Detection tmp;
    tmp.mask = d.mask;
    detail::fill_geometry(tmp, depth);

    PoseEstimate est;
    est.centroid = tmp.centroid;
    est.bbox = tmp.bbox;
    est.exposed_area = tmp.exposed_area;

    const bool big_enough = est.exposed_area >= rules.cup_area;
    const bool inside = point_in_polygon(est.centroid.xy(), outline);
    bool supported = false;
    if (const auto k = depth.heights.locate(est.centroid.xy()))
        supported = std::abs(d.centroid.z - depth.heights[*k]) <= rules.floating_tolerance;
    est.pickable = big_enough && inside && supported;
    return est;
}

}  // namespace decake
