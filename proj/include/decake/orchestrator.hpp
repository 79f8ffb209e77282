#pragma once

// Workcell state machine: localize, select, pick, brush, flip, re-localize,
// pick, brush, place, repeat. Every action is charged its configured duration
// into a time-ordered log; failures consult the retry/skip policy.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <deque>
#include <future>
#include <map>
#include <numbers>
#include <numeric>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <thread>
#include <vector>

#include "decake/brush_paths.hpp"
#include "decake/config.hpp"
#include "decake/error.hpp"
#include "decake/force_control.hpp"
#include "decake/perception.hpp"
#include "decake/planner.hpp"
#include "decake/primitives.hpp"
#include "decake/random.hpp"
#include "decake/scene.hpp"

namespace decake {

enum class CellState {
    LocalizeBin,
    SelectPart,
    PickFromBin,
    CleanFaceA,
    DropToFlipper,
    RelocalizeAll,
    PickFromFlipArea,
    CleanFaceB,
    PlaceDone,
    NextOrFinish,
    Halt
};

inline constexpr int kCellStateCount = 11;

inline const char* to_string(CellState s) {
    switch (s) {
        case CellState::LocalizeBin: return "LocalizeBin";
        case CellState::SelectPart: return "SelectPart";
        case CellState::PickFromBin: return "PickFromBin";
        case CellState::CleanFaceA: return "CleanFaceA";
        case CellState::DropToFlipper: return "DropToFlipper";
        case CellState::RelocalizeAll: return "RelocalizeAll";
        case CellState::PickFromFlipArea: return "PickFromFlipArea";
        case CellState::CleanFaceB: return "CleanFaceB";
        case CellState::PlaceDone: return "PlaceDone";
        case CellState::NextOrFinish: return "NextOrFinish";
        case CellState::Halt: return "Halt";
    }
    return "?";
}

// Successor states reachable from `s` in one step.
inline std::vector<CellState> allowed_transitions(CellState s) {
    using S = CellState;
    switch (s) {
        case S::LocalizeBin: return {S::SelectPart, S::NextOrFinish};
        case S::SelectPart: return {S::PickFromBin, S::NextOrFinish};
        case S::PickFromBin: return {S::PickFromBin, S::CleanFaceA, S::LocalizeBin, S::NextOrFinish};
        case S::CleanFaceA: return {S::CleanFaceA, S::DropToFlipper, S::NextOrFinish};
        case S::DropToFlipper: return {S::DropToFlipper, S::RelocalizeAll, S::NextOrFinish};
        case S::RelocalizeAll: return {S::RelocalizeAll, S::PickFromFlipArea, S::NextOrFinish};
        case S::PickFromFlipArea: return {S::PickFromFlipArea, S::RelocalizeAll, S::CleanFaceB, S::NextOrFinish};
        case S::CleanFaceB: return {S::CleanFaceB, S::PlaceDone, S::NextOrFinish};
        case S::PlaceDone: return {S::PlaceDone, S::NextOrFinish};
        case S::NextOrFinish: return {S::LocalizeBin, S::SelectPart, S::Halt};
        case S::Halt: return {S::Halt};
    }
    return {};
}

struct ActionRecord {
    std::string action;
    double start = 0.0;
    double end = 0.0;
    std::optional<int> part_id;
    std::string outcome;

    double duration() const { return end - start; }
};

// Append-only, back-to-back action timeline.
class ActionLog {
public:
    void append(std::string action, double duration, std::optional<int> part, std::string outcome) {
        if (!(duration >= 0.0)) throw PreconditionViolation("action duration must be >= 0");
        entries_.push_back({std::move(action), clock_, clock_ + duration, part, std::move(outcome)});
        clock_ += duration;
        if (!part) pending_.push_back(entries_.size() - 1);
    }

    // Attribute earlier unassigned entries (shared localization, attempts on
    // phantom detections) to the part that is worked on next.
    void assign_pending(int part) {
        for (std::size_t k : pending_) entries_[k].part_id = part;
        pending_.clear();
    }

    const std::vector<ActionRecord>& entries() const { return entries_; }
    double now() const { return clock_; }

private:
    std::vector<ActionRecord> entries_;
    std::vector<std::size_t> pending_;
    double clock_ = 0.0;
};

inline bool is_brushing(const std::string& action) { return action.rfind("clean_", 0) == 0; }

// Stations, transit points, and obstacles of the cell.
struct Workcell {
    Workspace workspace;
    Vec3 home;
    Vec3 bin;
    Vec3 cleaner;
    Vec3 flipper;
    Vec3 flip_area;
    Vec3 destination;
    BrushRack rack;
};

inline Workcell default_workcell(const SceneState& scene) {
    Workcell c;
    c.workspace.bounds = Aabb3({-200.0, -800.0, 0.0}, {1300.0, 900.0, 900.0});
    const Aabb2 b = scene.bin.outline.bounds();
    const double h = scene.bin.wall_height;
    const double t = 5.0;
    c.workspace.obstacles = {
        Aabb3({b.min.x - t, b.min.y - t, 0.0}, {b.min.x, b.max.y + t, h}),
        Aabb3({b.max.x, b.min.y - t, 0.0}, {b.max.x + t, b.max.y + t, h}),
        Aabb3({b.min.x, b.min.y - t, 0.0}, {b.max.x, b.min.y, h}),
        Aabb3({b.min.x, b.max.y, 0.0}, {b.max.x, b.max.y + t, h}),
        Aabb3({c.rack.center.x - c.rack.half_x, c.rack.center.y - c.rack.half_y, 0.0},
              {c.rack.center.x + c.rack.half_x, c.rack.center.y + c.rack.half_y, c.rack.height}),
        Aabb3({700.0, 450.0, 0.0}, {760.0, 650.0, 500.0}),  // flipping chute
    };
    const Vec2 bc = b.center();
    const Vec2 fc = scene.flip_area.bounds().center();
    const Vec2 dc = scene.destination.bounds().center();
    c.bin = {bc.x, bc.y, h + 150.0};
    c.cleaner = {c.rack.center.x, c.rack.center.y, c.rack.height + 150.0};
    c.flipper = {730.0, 550.0, 650.0};
    c.flip_area = {fc.x, fc.y, 300.0};
    c.destination = {dc.x, dc.y, 300.0};
    c.home = c.destination;
    return c;
}

// Swept-sphere radius while carrying a part: cup plus the part's bounding circle.
inline double payload_clearance(double cup_radius, const PartSpec& spec) {
    double r = 0.0;
    for (const auto& v : spec.footprint.vertices()) r = std::max(r, v.norm());
    return cup_radius + r;
}

struct Candidate {
    const Detection* detection = nullptr;
    PoseEstimate estimate;
};

// Prefer large exposed tops high in the clutter: 0.5*area/max_area +
// 0.5*z/max_z over pickable candidates; ties go to the lower part id, with
// phantom detections ranked after every real id.
inline std::optional<std::size_t> select_next_part(std::span<const Candidate> candidates) {
    double max_area = 0.0;
    double max_z = 0.0;
    for (const auto& c : candidates) {
        if (!c.estimate.pickable) continue;
        max_area = std::max(max_area, c.estimate.exposed_area);
        max_z = std::max(max_z, c.estimate.centroid.z);
    }
    std::optional<std::size_t> best;
    double best_score = -1.0;
    const auto rank = [&](std::size_t k) {
        const auto& id = candidates[k].detection->part_id;
        return id ? static_cast<long long>(*id) : std::numeric_limits<long long>::max();
    };
    for (std::size_t k = 0; k < candidates.size(); ++k) {
        const auto& e = candidates[k].estimate;
        if (!e.pickable) continue;
        const double score = 0.5 * (max_area > 0.0 ? e.exposed_area / max_area : 0.0) +
                             0.5 * (max_z > 0.0 ? e.centroid.z / max_z : 0.0);
        if (!best || score > best_score || (score == best_score && rank(k) < rank(*best))) {
            best = k;
            best_score = score;
        }
    }
    return best;
}

inline std::optional<std::size_t> select_next_part(std::span<const Detection> detections,
                                                   std::span<const PoseEstimate> estimates) {
    if (detections.size() != estimates.size()) throw PreconditionViolation("one estimate per detection required");
    std::vector<Candidate> c;
    for (std::size_t k = 0; k < detections.size(); ++k) c.push_back({&detections[k], estimates[k]});
    return select_next_part(c);
}

struct Stat {
    double mean = 0.0;
    double sd = 0.0;  // sample standard deviation
};

inline Stat summarize(const std::vector<double>& v) {
    Stat s;
    if (v.empty()) return s;
    s.mean = std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
    if (v.size() > 1) {
        double ss = 0.0;
        for (double x : v) ss += (x - s.mean) * (x - s.mean);
        s.sd = std::sqrt(ss / static_cast<double>(v.size() - 1));
    }
    return s;
}

struct PartRow {
    int id = 0;
    double mass_before = 0.0;
    double mass_after = 0.0;
    double clean_mass = 0.0;
    double removal = 0.0;  // share of the initial excess powder removed, [0, 1]
    double cycle_time = 0.0;
    double brushing_time = 0.0;
    int failures = 0;
    PartStatus outcome = PartStatus::Skipped;
};

struct ActionSummary {
    std::string action;
    int count = 0;
    double total = 0.0;
    double mean_per_done_part = 0.0;
};

struct RunReport {
    std::uint64_t seed = 0;
    std::vector<PartRow> rows;
    Stat mass_before;
    Stat mass_after;
    Stat removal;
    Stat cycle_time;
    Stat brushing_time;
    double brushing_fraction = 0.0;
    double total_time = 0.0;
    double dust_collected = 0.0;
    double flip_area_spill = 0.0;
    int parts_done = 0;
    int parts_skipped = 0;
    std::size_t steps = 0;
    std::vector<ActionRecord> timeline;
    std::vector<ActionSummary> action_summary;
};

inline double removal_fraction(double before, double after, double clean_mass) {
    const double excess = before - clean_mass;
    if (!(excess > 0.0)) return 0.0;
    return std::clamp((before - after) / excess, 0.0, 1.0);
}

// Optional capture of intermediate data for offline inspection.
struct TraceSink {
    std::vector<std::pair<std::string, std::vector<FTReading>>> force;
    std::vector<std::pair<std::string, TrackResult>> tracks;
    std::vector<std::pair<std::string, BrushTrajectory>> brush;
    std::vector<std::pair<std::string, PlannedPath>> paths;
    std::vector<std::pair<std::string, DepthImage>> depth;
};

class CellMachine {
public:
    CellMachine(SceneState scene, Config cfg, std::uint64_t seed)
        : scene_(std::move(scene)), cfg_(std::move(cfg)), seed_(seed), cell_(default_workcell(scene_)) {
        cfg_.validate();
        detector_ = cfg_.detector;
        const Rng root(seed);
        detector_.rng = root.fork(1);
        fault_rng_ = root.fork(2);
        plan_rng_ = root.fork(3);
        robot_ = cell_.home;
        for (const auto& p : scene_.parts) {
            if (p.status != PartStatus::InBin) throw PreconditionViolation("run needs every part in the bin");
            mass_before_[p.id] = part_total_mass(p, scene_.powder_density);
        }
        rules_.cup_area = cfg_.suction.cup_area();
        rules_.floating_tolerance = cfg_.floating_tolerance;
    }

    CellState state() const { return state_; }
    bool halted() const { return state_ == CellState::Halt; }
    std::size_t steps() const { return steps_; }
    const SceneState& scene() const { return scene_; }
    const ActionLog& log() const { return log_; }
    const Workcell& workcell() const { return cell_; }
    const std::vector<std::pair<CellState, CellState>>& transitions() const { return transitions_; }

    // Force the named fault on the next action where it can occur.
    void script_fault(Failure f) { script_.push_back(f); }
    void set_trace_sink(TraceSink* sink) { sink_ = sink; }

    void step() {
        if (halted()) return;
        ++steps_;
        const CellState before = state_;
        switch (state_) {
            case CellState::LocalizeBin: localize_bin(); break;
            case CellState::SelectPart: select_part(); break;
            case CellState::PickFromBin: pick_from_bin(); break;
            case CellState::CleanFaceA: clean_face(CellState::DropToFlipper); break;
            case CellState::DropToFlipper: drop_to_flipper(); break;
            case CellState::RelocalizeAll: relocalize_all(); break;
            case CellState::PickFromFlipArea: pick_from_flip_area(); break;
            case CellState::CleanFaceB: clean_face(CellState::PlaceDone); break;
            case CellState::PlaceDone: place_done(); break;
            case CellState::NextOrFinish: next_or_finish(); break;
            case CellState::Halt: break;
        }
        transitions_.emplace_back(before, state_);
    }

    // Generous ceiling on steps; exceeding it is an internal error.
    std::size_t step_bound() const {
        return static_cast<std::size_t>(kCellStateCount) * (scene_.parts.size() + 1) *
               static_cast<std::size_t>(cfg_.policy.max_retries + 1);
    }

    RunReport report() const {
        RunReport r;
        r.seed = seed_;
        r.steps = steps_;
        r.timeline = log_.entries();
        r.total_time = log_.now();
        r.dust_collected = scene_.dust_collected;
        r.flip_area_spill = scene_.flip_area_spill;

        std::map<int, double> cycle;
        std::map<int, double> brushing;
        double brushing_total = 0.0;
        std::map<std::string, ActionSummary> by_action;
        for (const auto& e : r.timeline) {
            if (e.part_id) cycle[*e.part_id] += e.duration();
            if (is_brushing(e.action)) {
                brushing_total += e.duration();
                if (e.part_id) brushing[*e.part_id] += e.duration();
            }
            auto& s = by_action[e.action];
            s.action = e.action;
            ++s.count;
            s.total += e.duration();
        }
        r.brushing_fraction = r.total_time > 0.0 ? brushing_total / r.total_time : 0.0;

        std::vector<double> before, after, removal, cyc, brush;
        for (const auto& p : scene_.parts) {
            PartRow row;
            row.id = p.id;
            row.mass_before = mass_before_.at(p.id);
            row.mass_after = part_total_mass(p, scene_.powder_density);
            row.clean_mass = p.spec.clean_mass;
            row.removal = removal_fraction(row.mass_before, row.mass_after, row.clean_mass);
            row.cycle_time = cycle.count(p.id) ? cycle.at(p.id) : 0.0;
            row.brushing_time = brushing.count(p.id) ? brushing.at(p.id) : 0.0;
            row.failures = failures_.count(p.id) ? failures_.at(p.id) : 0;
            row.outcome = p.status;
            if (p.status == PartStatus::Done) {
                ++r.parts_done;
                before.push_back(row.mass_before);
                after.push_back(row.mass_after);
                removal.push_back(row.removal);
                cyc.push_back(row.cycle_time);
                brush.push_back(row.brushing_time);
            } else {
                ++r.parts_skipped;
            }
            r.rows.push_back(row);
        }
        r.mass_before = summarize(before);
        r.mass_after = summarize(after);
        r.removal = summarize(removal);
        r.cycle_time = summarize(cyc);
        r.brushing_time = summarize(brush);
        for (auto& [name, s] : by_action) {
            s.mean_per_done_part = r.parts_done > 0 ? s.total / r.parts_done : 0.0;
            r.action_summary.push_back(s);
        }
        return r;
    }

private:
    enum class Where { Bin, FlipArea, Gripper };

    // ---- perception ----

    void localize_bin() {
        log_.append("localize_bin", cfg_.durations.localize, std::nullopt, "ok");
        capture_bin();
        go(active_bin_parts().empty() ? CellState::NextOrFinish : CellState::SelectPart);
    }

    void capture_bin() {
        bin_depth_ = render_depth(scene_, Region::Bin, cfg_.depth_resolution);
        bin_dets_ = detect(scene_, bin_depth_, detector_);
        bin_fresh_ = true;
        if (sink_) sink_->depth.emplace_back("bin_" + std::to_string(log_.entries().size()), bin_depth_);
    }

    void select_part() {
        const Polygon2& outline = region_outline(scene_, Region::Bin);
        std::vector<Candidate> cands;
        for (const auto& d : bin_dets_) {
            if (d.part_id && given_up_.count(*d.part_id)) continue;
            if (!d.part_id && phantom_budget_spent()) continue;
            cands.push_back({&d, estimate_pose(d, bin_depth_, outline, rules_)});
        }
        const auto pickk = select_next_part(cands);
        if (!pickk) {
            // Nothing pickable this round: every remaining part uses up one attempt.
            for (int id : active_bin_parts()) charge(Failure::NotDetected, id);
            bin_fresh_ = false;
            go(CellState::NextOrFinish);
            return;
        }
        target_ = *cands[*pickk].detection;
        target_est_ = cands[*pickk].estimate;
        offset_attempt_ = 0;
        pick_offset_ = {};
        if (target_.part_id) log_.assign_pending(*target_.part_id);
        go(CellState::PickFromBin);
    }

    void relocalize_all() {
        log_.append("relocalize", cfg_.durations.localize, current_, "ok");
        capture_bin();
        flip_depth_ = render_depth(scene_, Region::FlipArea, cfg_.depth_resolution);
        flip_dets_ = detect(scene_, flip_depth_, detector_);
        if (sink_) sink_->depth.emplace_back("flip_" + std::to_string(log_.entries().size()), flip_depth_);

        const Polygon2& outline = region_outline(scene_, Region::FlipArea);
        std::vector<Candidate> cands;
        for (const auto& d : flip_dets_) cands.push_back({&d, estimate_pose(d, flip_depth_, outline, rules_)});
        const auto pickk = select_next_part(cands);
        if (!pickk) {
            fail(Failure::NotDetected, current_, Where::FlipArea);
            return;
        }
        target_ = *cands[*pickk].detection;
        target_est_ = cands[*pickk].estimate;
        offset_attempt_ = 0;
        pick_offset_ = {};
        go(CellState::PickFromFlipArea);
    }

    // ---- picking ----

    PickSettings pick_settings() const {
        PickSettings s;
        s.height_tol = cfg_.height_tol;
        s.approach_height = cfg_.approach_height;
        s.f_stop = cfg_.f_stop;
        s.descent_speed = cfg_.descent_speed;
        s.control_period = cfg_.control_period;
        s.stiffness = cfg_.stiffness;
        s.drag_limit = cfg_.drag_limit;
        return s;
    }

    PickFaults draw_pick_faults() {
        PickFaults f;
        const double u_height = fault_rng_.uniform();
        const double u_seal = fault_rng_.uniform();
        const double u_drag = fault_rng_.uniform();
        if (u_height < cfg_.faults.height_mismatch || take_scripted(Failure::HeightMismatch)) f.perceived_z_shift = 20.0;
        if (u_seal < cfg_.faults.seal_fail || take_scripted(Failure::SealFail)) f.vacuum_leak = true;
        if (u_drag < cfg_.faults.lift_drag || take_scripted(Failure::DropDuringLift)) f.lateral_spike = 30.0;
        return f;
    }

    static Failure failure_of(PickOutcome o) {
        switch (o) {
            case PickOutcome::HeightMismatch: return Failure::HeightMismatch;
            case PickOutcome::SealFail: return Failure::SealFail;
            case PickOutcome::DropDuringLift: return Failure::DropDuringLift;
            case PickOutcome::Held: break;
        }
        throw Error("internal: no failure for a successful pick");
    }

    void pick_from_bin() {
        const std::optional<int> attributed = target_.part_id;
        if (!same_point(robot_, cell_.bin) && !transit(cell_.bin, false, attributed, Where::Bin)) return;
        const PickFaults faults = draw_pick_faults();
        const PickResult res = pick(scene_, target_, target_est_, Region::Bin, cfg_.suction, pick_settings(),
                                    pick_offset_, faults);
        record_pick(res, "pick_bin");
        if (res.outcome != PickOutcome::Held) {
            log_.append("pick_bin", cfg_.durations.pick, attributed ? attributed : res.part_id, to_string(res.outcome));
            fail(failure_of(res.outcome), attributed ? attributed : res.part_id, Where::Bin);
            return;
        }
        current_ = *res.part_id;
        log_.assign_pending(*current_);
        log_.append("pick_bin", cfg_.durations.pick, current_, "Held");
        hold_force_ = res.hold_force;
        bin_fresh_ = false;
        leg_done_ = false;
        go(CellState::CleanFaceA);
    }

    void pick_from_flip_area() {
        robot_ = cell_.flip_area;
        const PickFaults faults = draw_pick_faults();
        const PickResult res = pick(scene_, target_, target_est_, Region::FlipArea, cfg_.suction, pick_settings(),
                                    pick_offset_, faults);
        record_pick(res, "pick_flip");
        log_.append("pick_flip", cfg_.durations.pick, current_, to_string(res.outcome));
        if (res.outcome != PickOutcome::Held) {
            fail(failure_of(res.outcome), current_, Where::FlipArea);
            return;
        }
        if (res.part_id != current_) throw Error("internal: picked an unexpected part from the flip area");
        hold_force_ = res.hold_force;
        leg_done_ = false;
        go(CellState::CleanFaceB);
    }

    void record_pick(const PickResult& res, const std::string& what) {
        if (!sink_) return;
        const std::string tag = what + "_" + std::to_string(log_.entries().size());
        sink_->force.emplace_back(tag + "_descent", res.descent.trace);
        if (!res.lift_trace.empty()) sink_->force.emplace_back(tag + "_lift", res.lift_trace);
    }

    // ---- brushing ----

    void clean_face(CellState next) {
        if (!leg_done_) {
            if (!transit(cell_.cleaner, true, current_, Where::Gripper)) return;
            leg_done_ = true;
        }
        PartState part = scene_.part(*current_);
        const CleaningStrategy& strat = cfg_.strategy_for(part.spec.name);
        const Vec2 c = cell_.rack.center;
        const std::vector<BrushTrajectory> trajs{
            spiral_path(c, strat.pitch, strat.r_max, strat.spiral_speed, strat.spiral_s, cfg_.control_period, cfg_.f_set),
            rectircle_path(c, strat.rect_width, strat.rect_height, part.pose.yaw, strat.rect_speed, strat.rectircle_s,
                           cfg_.control_period, cfg_.f_set)};

        const bool lose_contact = fault_rng_.uniform() < cfg_.faults.contact_loss || take_scripted(Failure::ContactLost);
        ContactModel contact;
        contact.stiffness = cfg_.stiffness;
        contact.damping = cfg_.damping;
        const double rack_h = cell_.rack.height;
        if (lose_contact) {
            // A gap in the brush bed on one side of the rack center.
            contact.surface = [rack_h, c](double, double y) {
                return std::optional<double>(y > c.y + 10.0 ? rack_h - 50.0 : rack_h);
            };
        } else {
            contact.surface = [rack_h](double, double) { return std::optional<double>(rack_h); };
        }

        CleanSettings settings;
        settings.hybrid = {cfg_.gain_dt, cfg_.control_period, cfg_.contact_lost_dwell};
        settings.f_stop = cfg_.f_stop;
        settings.band = cfg_.band;
        settings.descent_speed = cfg_.descent_speed;
        settings.hold_force = hold_force_;
        settings.powder_density = scene_.powder_density;
        settings.rack = cell_.rack;

        double dust = 0.0;
        for (const auto& traj : trajs) {
            const std::string action = std::string("clean_") + to_string(traj.pattern);
            try {
                CleanResult r = clean(part, traj, cfg_.removal, contact, settings);
                part = std::move(r.part);
                dust += r.dust_removed;
                log_.append(action, traj.duration, current_, "ok");
                if (sink_) {
                    const std::string tag = action + "_" + std::to_string(log_.entries().size());
                    sink_->brush.emplace_back(tag, traj);
                    sink_->tracks.emplace_back(tag, std::move(r.track));
                }
            } catch (const ContactLost&) {
                log_.append(action, traj.duration, current_, "contact_lost");
                fail(Failure::ContactLost, current_, Where::Gripper);
                return;
            } catch (const DropDuringClean&) {
                log_.append(action, traj.duration, current_, "drop_during_clean");
                fail(Failure::DropDuringClean, current_, Where::Gripper);
                return;
            }
        }
        scene_.part(*current_) = std::move(part);
        scene_.dust_collected += dust;
        leg_done_ = false;
        go(next);
    }

    // ---- flip and place ----

    void drop_to_flipper() {
        if (!leg_done_) {
            if (!transit(cell_.flipper, true, current_, Where::Gripper)) return;
            leg_done_ = true;
        }
        try {
            flip(scene_, *current_, cfg_.flip);
        } catch (const NotFlippable&) {
            log_.append("flip", 0.0, current_, "not_flippable");
            fail(Failure::NotFlippable, current_, Where::Gripper);
            return;
        }
        log_.append("flip", cfg_.durations.flip, current_, "ok");
        leg_done_ = false;
        go(CellState::RelocalizeAll);
    }

    void place_done() {
        if (!leg_done_) {
            if (!transit(cell_.destination, true, current_, Where::Gripper)) return;
            leg_done_ = true;
        }
        place(scene_, *current_, scene_.destination);
        log_.append("place", cfg_.durations.place, current_, "ok");
        current_.reset();
        leg_done_ = false;
        go(CellState::NextOrFinish);
    }

    void next_or_finish() {
        if (current_) throw Error("internal: finishing a cycle with a part still in process");
        if (!active_bin_parts().empty()) {
            go(bin_fresh_ ? CellState::SelectPart : CellState::LocalizeBin);
            return;
        }
        for (auto& p : scene_.parts) {
            if (p.status == PartStatus::InBin) p.status = PartStatus::Skipped;
            if (p.status == PartStatus::Held || p.status == PartStatus::OnFlipArea)
                throw Error("internal: part " + std::to_string(p.id) + " stranded at halt");
        }
        go(CellState::Halt);
    }

    // ---- transit ----

    bool transit(Vec3 goal, bool loaded, std::optional<int> part, Where where) {
        Workspace ws = cell_.workspace.with_clearance(
            loaded ? payload_clearance(cfg_.suction.cup_radius, scene_.part(*current_).spec) : cfg_.suction.cup_radius);
        const bool blocked = fault_rng_.uniform() < cfg_.faults.unreachable || take_scripted(Failure::Unreachable);
        if (blocked) {
            // Aisle obstruction: a slab that cuts the workspace between start and goal.
            const Vec3 m = 0.5 * (robot_ + goal);
            const Aabb3& b = ws.bounds;
            if (std::abs(goal.x - robot_.x) >= std::abs(goal.y - robot_.y))
                ws.obstacles.emplace_back(Vec3{m.x - 5.0, b.min.y, b.min.z}, Vec3{m.x + 5.0, b.max.y, b.max.z});
            else
                ws.obstacles.emplace_back(Vec3{b.min.x, m.y - 5.0, b.min.z}, Vec3{b.max.x, m.y + 5.0, b.max.z});
        }
        try {
            PlannedPath path = plan(ws, robot_, goal, plan_rng_.next(), cfg_.planner);
            log_.append("transit", cfg_.durations.transit, part, "ok");
            if (sink_) sink_->paths.emplace_back("transit_" + std::to_string(log_.entries().size()), path);
            robot_ = goal;
            return true;
        } catch (const InvalidQuery&) {
        } catch (const Unreachable&) {
        }
        log_.append("transit", cfg_.durations.transit, part, "unreachable");
        fail(Failure::Unreachable, part, where);
        return false;
    }

    // ---- failure policy ----

    // Counts one failed attempt against the part; true once its budget is spent.
    bool charge(Failure, std::optional<int> part) {
        const int budget = cfg_.policy.max_retries + 1;
        if (!part) return ++phantom_failures_ >= budget;
        const int n = ++failures_[*part];
        if (n >= budget) {
            give_up(*part);
            return true;
        }
        return false;
    }

    bool phantom_budget_spent() const { return phantom_failures_ >= cfg_.policy.max_retries + 1; }

    void give_up(int id) {
        PartState& p = scene_.part(id);
        if (p.status == PartStatus::InBin) {
            given_up_.insert(id);
        } else if (p.status == PartStatus::Held || p.status == PartStatus::OnFlipArea) {
            p.status = PartStatus::Skipped;
            if (current_ == id) current_.reset();
        }
    }

    void fail(Failure kind, std::optional<int> part, Where where) {
        const bool exhausted = charge(kind, part);
        FailureAction action = cfg_.policy.action(kind);
        if (exhausted) action = FailureAction::Skip;

        if (action == FailureAction::Skip) {
            if (part && !exhausted) give_up(*part);
            if (current_ && part == current_) {
                give_up(*current_);
                current_.reset();
            }
            leg_done_ = false;
            go(CellState::NextOrFinish);
            return;
        }
        if (action == FailureAction::RelocalizeRetry && where == Where::Bin) {
            go(CellState::LocalizeBin);
            return;
        }
        if (action == FailureAction::RelocalizeRetry && where == Where::FlipArea) {
            go(CellState::RelocalizeAll);
            return;
        }
        if (action == FailureAction::OffsetRetry && where != Where::Gripper) {
            ++offset_attempt_;
            const double a = 0.5 * std::numbers::pi * static_cast<double>(offset_attempt_ - 1);
            pick_offset_ = cfg_.suction.cup_radius * Vec2{std::cos(a), std::sin(a)};
        }
        // Retry: stay in the current state.
    }

    // ---- helpers ----

    bool take_scripted(Failure f) {
        if (!script_.empty() && script_.front() == f) {
            script_.pop_front();
            return true;
        }
        return false;
    }

    std::vector<int> active_bin_parts() const {
        std::vector<int> ids;
        for (const auto& p : scene_.parts)
            if (p.status == PartStatus::InBin && !given_up_.count(p.id)) ids.push_back(p.id);
        return ids;
    }

    static bool same_point(Vec3 a, Vec3 b) { return a.x == b.x && a.y == b.y && a.z == b.z; }

    void go(CellState next) { state_ = next; }

    SceneState scene_;
    Config cfg_;
    std::uint64_t seed_;
    Workcell cell_;
    DetectorModel detector_;
    PickabilityRules rules_;
    Rng fault_rng_;
    Rng plan_rng_;

    CellState state_ = CellState::LocalizeBin;
    std::size_t steps_ = 0;
    ActionLog log_;
    std::vector<std::pair<CellState, CellState>> transitions_;
    std::deque<Failure> script_;
    TraceSink* sink_ = nullptr;

    DepthImage bin_depth_;
    DepthImage flip_depth_;
    std::vector<Detection> bin_dets_;
    std::vector<Detection> flip_dets_;
    bool bin_fresh_ = false;

    Detection target_;
    PoseEstimate target_est_;
    Vec2 pick_offset_;
    int offset_attempt_ = 0;
    std::optional<int> current_;
    double hold_force_ = 0.0;
    bool leg_done_ = false;
    Vec3 robot_;

    std::map<int, double> mass_before_;
    std::map<int, int> failures_;
    int phantom_failures_ = 0;
    std::set<int> given_up_;
};

// Step the machine to Halt.
inline RunReport run(SceneState scene, const Config& cfg, std::uint64_t seed, TraceSink* sink = nullptr) {
    CellMachine m(std::move(scene), cfg, seed);
    m.set_trace_sink(sink);
    const std::size_t bound = m.step_bound();
    while (!m.halted()) {
        if (m.steps() >= bound) throw Error("internal: state machine exceeded its step bound");
        m.step();
    }
    return m.report();
}

inline RunReport run_generated(const Config& cfg, std::uint64_t seed) {
    return run(scene_generate(cfg.scene, seed), cfg, seed);
}

// Independent seeded runs, possibly concurrent; results in ascending seed order.
inline std::vector<RunReport> run_batch(const Config& cfg, std::uint64_t first_seed, int count, unsigned threads = 0) {
    if (count < 0) throw PreconditionViolation("batch size must be >= 0");
    if (threads == 0) threads = std::max(1u, std::thread::hardware_concurrency());
    std::vector<RunReport> out(static_cast<std::size_t>(count));
    std::size_t next = 0;
    while (next < out.size()) {
        std::vector<std::future<RunReport>> wave;
        const std::size_t end = std::min(out.size(), next + threads);
        for (std::size_t k = next; k < end; ++k)
            wave.push_back(std::async(std::launch::async, [&cfg, s = first_seed + k] { return run_generated(cfg, s); }));
        for (std::size_t k = next; k < end; ++k) out[k] = wave[k - next].get();
        next = end;
    }
    return out;
}

// Reference rows measured on the physical cell and with human operators.
struct BaselineRow {
    std::string label;
    Stat mass_before;
    Stat mass_after;
    Stat cycle_time;
    double brushing_time = 0.0;
    Stat removal;  // fraction
};

inline std::vector<BaselineRow> human_baseline() {
    return {
        {"human_no_time_limit", {48.8, 7.8}, {29.8, 3.2}, {41.2, 1.9}, 40.0, {0.720, 0.121}},
        {"human_20s_brushing", {48.9, 8.0}, {34.2, 4.5}, {21.2, 1.1}, 20.0, {0.555, 0.179}},
        {"robot_cell_reference", {48.6, 10.9}, {37.6, 6.4}, {50.1, 2.1}, 20.0, {0.420, 0.244}},
    };
}

}  // namespace decake
