#pragma once

// Run configuration. Every tunable constant of the simulation lives here with
// its default; a TOML-style file (key = value lines under [section] and
// [section.sub] headers) overrides any subset. Unknown keys are errors.

#include <charconv>
#include <cstdint>
#include <fstream>
#include <functional>
#include <iomanip>
#include <map>
#include <sstream>
#include <string>
#include <variant>
#include <vector>

#include "decake/error.hpp"
#include "decake/perception.hpp"
#include "decake/planner.hpp"
#include "decake/primitives.hpp"
#include "decake/scene.hpp"

namespace decake {

struct CleaningStrategy {
    double spiral_s = 5.0;      // per face
    double rectircle_s = 5.0;   // per face
    double pitch = 10.0;        // mm per turn
    double r_max = 40.0;
    double spiral_speed = 40.0;  // mm/s
    double rect_width = 120.0;
    double rect_height = 40.0;
    double rect_speed = 80.0;

    double per_face_seconds() const { return spiral_s + rectircle_s; }
};

enum class Failure { HeightMismatch, SealFail, DropDuringLift, NotFlippable, ContactLost, DropDuringClean, Unreachable, NotDetected };

inline constexpr Failure kAllFailures[] = {Failure::HeightMismatch, Failure::SealFail,        Failure::DropDuringLift,
                                           Failure::NotFlippable,   Failure::ContactLost,     Failure::DropDuringClean,
                                           Failure::Unreachable,    Failure::NotDetected};

inline const char* to_string(Failure f) {
    switch (f) {
        case Failure::HeightMismatch: return "height_mismatch";
        case Failure::SealFail: return "seal_fail";
        case Failure::DropDuringLift: return "drop_during_lift";
        case Failure::NotFlippable: return "not_flippable";
        case Failure::ContactLost: return "contact_lost";
        case Failure::DropDuringClean: return "drop_during_clean";
        case Failure::Unreachable: return "unreachable";
        case Failure::NotDetected: return "not_detected";
    }
    return "?";
}

enum class FailureAction { Retry, RelocalizeRetry, OffsetRetry, Skip };

inline const char* to_string(FailureAction a) {
    switch (a) {
        case FailureAction::Retry: return "retry";
        case FailureAction::RelocalizeRetry: return "relocalize_retry";
        case FailureAction::OffsetRetry: return "offset_retry";
        case FailureAction::Skip: return "skip";
    }
    return "?";
}

inline FailureAction parse_failure_action(const std::string& s) {
    for (auto a : {FailureAction::Retry, FailureAction::RelocalizeRetry, FailureAction::OffsetRetry, FailureAction::Skip})
        if (s == to_string(a)) return a;
    throw ConfigError("unknown failure action '" + s + "'");
}

struct Policy {
    int max_retries = 2;
    std::map<Failure, FailureAction> actions{
        {Failure::HeightMismatch, FailureAction::RelocalizeRetry},
        {Failure::SealFail, FailureAction::OffsetRetry},
        {Failure::DropDuringLift, FailureAction::RelocalizeRetry},
        {Failure::NotFlippable, FailureAction::Skip},
        {Failure::ContactLost, FailureAction::Retry},
        {Failure::DropDuringClean, FailureAction::Skip},
        {Failure::Unreachable, FailureAction::Retry},
        {Failure::NotDetected, FailureAction::RelocalizeRetry},
    };

    FailureAction action(Failure f) const {
        const auto it = actions.find(f);
        if (it == actions.end()) throw ConfigError(std::string("no policy for failure ") + to_string(f));
        return it->second;
    }

    void validate() const {
        if (max_retries < 0) throw ConfigError("policy.max_retries must be >= 0");
        for (Failure f : kAllFailures) action(f);
    }
};

// Seconds charged to the action log. Brushing is charged at the strategy's
// actual trajectory duration.
struct Durations {
    double localize = 2.0;
    double transit = 3.0;  // plan + move, per leg between stations
    double pick = 4.0;     // includes the approach above the part
    double flip = 2.0;
    double place = 3.0;
};

// Per-attempt fault probabilities, for robustness runs.
struct FaultConfig {
    double seal_fail = 0.0;
    double height_mismatch = 0.0;
    double lift_drag = 0.0;
    double contact_loss = 0.0;
    double unreachable = 0.0;
};

struct Config {
    SceneParams scene;
    std::uint64_t seed = 1;

    // perception
    DetectorModel detector;
    double floating_tolerance = 10.0;
    double depth_resolution = 2.0;

    // force control
    double stiffness = 10.0;
    double damping = 0.0;
    double control_period = 0.004;
    double descent_speed = 20.0;
    double f_stop = 5.0;
    double f_set = 5.0;
    double band = 1.0;
    double gain_dt = 0.3;
    double contact_lost_dwell = 0.25;
    double drag_limit = 10.0;

    SuctionModel suction;
    double height_tol = 5.0;
    double approach_height = 50.0;

    RemovalModel removal;
    std::map<std::string, CleaningStrategy> strategies{{"insole", CleaningStrategy{}}};

    FlipSettings flip;
    PlannerParams planner;
    Durations durations;
    Policy policy;
    FaultConfig faults;

    const CleaningStrategy& strategy_for(const std::string& part_name) const {
        const auto it = strategies.find(part_name);
        if (it != strategies.end()) return it->second;
        const auto fallback = strategies.find("insole");
        if (fallback == strategies.end()) throw ConfigError("no cleaning strategy for part type '" + part_name + "'");
        return fallback->second;
    }

    // Per-part brushing budget: both faces, both patterns.
    void set_brushing_budget(double seconds_per_part) {
        for (auto& [name, s] : strategies) {
            s.spiral_s = seconds_per_part / 4.0;
            s.rectircle_s = seconds_per_part / 4.0;
        }
    }

    void validate() const {
        detector.validate();
        suction.validate();
        removal.validate();
        policy.validate();
        if (!(control_period > 0.0 && descent_speed > 0.0 && stiffness > 0.0))
            throw ConfigError("force parameters must be > 0");
        if (!(gain_dt > 0.0 && gain_dt < 2.0)) throw ConfigError("force.gain_dt must lie in (0, 2)");
        if (!(f_set > 0.0 && f_stop >= 0.0 && band >= 0.0)) throw ConfigError("invalid force thresholds");
        if (strategies.empty()) throw ConfigError("at least one cleaning strategy is required");
        for (const auto& [name, s] : strategies)
            if (!(s.spiral_s > 0.0 && s.rectircle_s > 0.0 && s.pitch > 0.0 && s.r_max > 0.0 && s.spiral_speed > 0.0 &&
                  s.rect_width >= 0.0 && s.rect_height > 0.0 && s.rect_speed > 0.0))
                throw ConfigError("invalid cleaning strategy '" + name + "'");
        for (double p : {faults.seal_fail, faults.height_mismatch, faults.lift_drag, faults.contact_loss, faults.unreachable})
            if (!(p >= 0.0 && p <= 1.0)) throw ConfigError("fault probabilities must lie in [0, 1]");
    }
};

namespace detail {

using ConfigSlot = std::variant<double*, int*, bool*, std::uint64_t*, FailureAction*>;

inline std::map<std::string, ConfigSlot> config_slots(Config& c) {
    std::map<std::string, ConfigSlot> m{
        {"run.seed", &c.seed},
        {"scene.n_parts", &c.scene.n_parts},
        {"scene.bin_width", &c.scene.bin_width},
        {"scene.bin_depth", &c.scene.bin_depth},
        {"scene.wall_height", &c.scene.wall_height},
        {"scene.grid_resolution", &c.scene.resolution},
        {"scene.part_thickness", &c.scene.part.thickness},
        {"scene.clean_mass", &c.scene.part.clean_mass},
        {"scene.clean_mass_sd", &c.scene.clean_mass_sd},
        {"scene.porosity", &c.scene.part.porosity},
        {"powder.mass_mean", &c.scene.powder_mass_mean},
        {"powder.mass_sd", &c.scene.powder_mass_sd},
        {"powder.top_fraction", &c.scene.top_fraction},
        {"powder.density", &c.scene.powder_density},
        {"perception.recall", &c.detector.recall},
        {"perception.precision", &c.detector.precision},
        {"perception.confidence_threshold", &c.detector.confidence_threshold},
        {"perception.true_confidence_lo", &c.detector.true_confidence.lo},
        {"perception.true_confidence_hi", &c.detector.true_confidence.hi},
        {"perception.spurious_confidence_lo", &c.detector.spurious_confidence.lo},
        {"perception.spurious_confidence_hi", &c.detector.spurious_confidence.hi},
        {"perception.spurious_min_cells", &c.detector.spurious_min_cells},
        {"perception.spurious_max_cells", &c.detector.spurious_max_cells},
        {"perception.floating_tolerance", &c.floating_tolerance},
        {"perception.depth_resolution", &c.depth_resolution},
        {"force.stiffness", &c.stiffness},
        {"force.damping", &c.damping},
        {"force.control_period", &c.control_period},
        {"force.descent_speed", &c.descent_speed},
        {"force.f_stop", &c.f_stop},
        {"force.f_set", &c.f_set},
        {"force.band", &c.band},
        {"force.gain_dt", &c.gain_dt},
        {"force.contact_lost_dwell", &c.contact_lost_dwell},
        {"force.drag_limit", &c.drag_limit},
        {"suction.cup_radius", &c.suction.cup_radius},
        {"suction.vacuum_kpa", &c.suction.vacuum_kpa},
        {"suction.safety_factor", &c.suction.safety_factor},
        {"suction.height_tol", &c.height_tol},
        {"suction.approach_height", &c.approach_height},
        {"removal.rho_max", &c.removal.rho_max},
        {"removal.f_ref", &c.removal.f_ref},
        {"removal.brush_radius", &c.removal.brush_radius},
        {"removal.pass_interval", &c.removal.pass_interval},
        {"removal.friction", &c.removal.friction},
        {"flip.flat_threshold", &c.flip.flat_threshold},
        {"flip.spill_fraction", &c.flip.spill_fraction},
        {"planner.step", &c.planner.step},
        {"planner.goal_bias", &c.planner.goal_bias},
        {"planner.max_iters", &c.planner.max_iters},
        {"planner.shortcut_iters", &c.planner.shortcut_iters},
        {"durations.localize", &c.durations.localize},
        {"durations.transit", &c.durations.transit},
        {"durations.pick", &c.durations.pick},
        {"durations.flip", &c.durations.flip},
        {"durations.place", &c.durations.place},
        {"policy.max_retries", &c.policy.max_retries},
        {"faults.seal_fail", &c.faults.seal_fail},
        {"faults.height_mismatch", &c.faults.height_mismatch},
        {"faults.lift_drag", &c.faults.lift_drag},
        {"faults.contact_loss", &c.faults.contact_loss},
        {"faults.unreachable", &c.faults.unreachable},
    };
    for (Failure f : kAllFailures) m.emplace(std::string("policy.") + to_string(f), &c.policy.actions[f]);
    for (auto& [name, s] : c.strategies) {
        const std::string p = "cleaning." + name + ".";
        m.emplace(p + "spiral_s", &s.spiral_s);
        m.emplace(p + "rectircle_s", &s.rectircle_s);
        m.emplace(p + "pitch", &s.pitch);
        m.emplace(p + "r_max", &s.r_max);
        m.emplace(p + "spiral_speed", &s.spiral_speed);
        m.emplace(p + "rect_width", &s.rect_width);
        m.emplace(p + "rect_height", &s.rect_height);
        m.emplace(p + "rect_speed", &s.rect_speed);
    }
    return m;
}

inline std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return {};
    const auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

inline std::string strip_comment(const std::string& line) {
    bool quoted = false;
    for (std::size_t i = 0; i < line.size(); ++i) {
        if (line[i] == '"') quoted = !quoted;
        if (line[i] == '#' && !quoted) return line.substr(0, i);
    }
    return line;
}

inline void assign(const ConfigSlot& slot, const std::string& raw, const std::string& key, int line_no) {
    const auto fail = [&](const char* what) {
        throw ConfigError("line " + std::to_string(line_no) + ": " + key + ": " + what + " '" + raw + "'");
    };
    std::visit(
        [&](auto* target) {
            using T = std::remove_pointer_t<decltype(target)>;
            if constexpr (std::is_same_v<T, bool>) {
                if (raw == "true") *target = true;
                else if (raw == "false") *target = false;
                else fail("expected true or false, got");
            } else if constexpr (std::is_same_v<T, FailureAction>) {
                if (raw.size() < 2 || raw.front() != '"' || raw.back() != '"') fail("expected a quoted string, got");
                *target = parse_failure_action(raw.substr(1, raw.size() - 2));
            } else {
                std::istringstream is(raw);
                T v{};
                is >> v;
                if (is.fail() || !is.eof()) fail("expected a number, got");
                *target = v;
            }
        },
        slot);
}

}  // namespace detail

inline Config parse_config(const std::string& text, Config base = {}) {
    std::istringstream in(text);
    std::string line;
    std::string section;
    int line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        line = detail::trim(detail::strip_comment(line));
        if (line.empty()) continue;
        if (line.front() == '[') {
            if (line.back() != ']') throw ConfigError("line " + std::to_string(line_no) + ": malformed table header");
            section = detail::trim(line.substr(1, line.size() - 2));
            if (section.rfind("cleaning.", 0) == 0) base.strategies.try_emplace(section.substr(9));
            continue;
        }
        const auto eq = line.find('=');
        if (eq == std::string::npos) throw ConfigError("line " + std::to_string(line_no) + ": expected key = value");
        const std::string key = detail::trim(line.substr(0, eq));
        const std::string value = detail::trim(line.substr(eq + 1));
        const std::string full = section.empty() ? key : section + "." + key;
        auto slots = detail::config_slots(base);
        const auto it = slots.find(full);
        if (it == slots.end()) throw ConfigError("line " + std::to_string(line_no) + ": unknown key '" + full + "'");
        detail::assign(it->second, value, full, line_no);
    }
    base.validate();
    return base;
}

inline Config load_config(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw ConfigError("cannot open config file " + path);
    std::stringstream ss;
    ss << f.rdbuf();
    return parse_config(ss.str());
}

// Full configuration as a TOML-style document; parse_config accepts it back.
inline std::string to_toml(const Config& cfg) {
    Config copy = cfg;
    const auto slots = detail::config_slots(copy);
    std::map<std::string, std::vector<std::pair<std::string, std::string>>> tables;
    for (const auto& [key, slot] : slots) {
        const auto dot = key.rfind('.');
        std::ostringstream v;
        std::visit(
            [&](auto* p) {
                using T = std::remove_pointer_t<decltype(p)>;
                if constexpr (std::is_same_v<T, bool>) v << (*p ? "true" : "false");
                else if constexpr (std::is_same_v<T, FailureAction>) v << '"' << to_string(*p) << '"';
                else if constexpr (std::is_same_v<T, double>) {
                    // Shortest text that reads back to the same value.
                    char buf[32];
                    const auto res = std::to_chars(buf, buf + sizeof buf, *p);
                    v << std::string_view(buf, static_cast<std::size_t>(res.ptr - buf));
                } else v << *p;
            },
            slot);
        tables[key.substr(0, dot)].emplace_back(key.substr(dot + 1), v.str());
    }
    std::ostringstream os;
    bool first = true;
    for (const auto& [table, entries] : tables) {
        if (!first) os << '\n';
        first = false;
        os << '[' << table << "]\n";
        for (const auto& [k, v] : entries) os << k << " = " << v << '\n';
    }
    return os.str();
}

}  // namespace decake
