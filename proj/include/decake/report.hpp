#pragma once

// Run report rendering: JSON for machines, an aligned table for people, CSV
// for spreadsheets.

#include <cstdio>
#include <iomanip>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "decake/orchestrator.hpp"

namespace decake {

namespace detail {

inline nlohmann::ordered_json stat_json(const Stat& s) { return {{"mean", s.mean}, {"sd", s.sd}}; }

inline std::string fixed(double v, int prec) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.*f", prec, v);
    return buf;
}

inline std::string pm(const Stat& s, int prec = 1) { return fixed(s.mean, prec) + " +- " + fixed(s.sd, prec); }

}  // namespace detail

inline nlohmann::ordered_json to_json(const RunReport& r) {
    nlohmann::ordered_json j;
    j["seed"] = r.seed;
    j["parts_done"] = r.parts_done;
    j["parts_skipped"] = r.parts_skipped;
    j["steps"] = r.steps;
    j["total_time_s"] = r.total_time;
    j["brushing_fraction"] = r.brushing_fraction;
    j["dust_collected_g"] = r.dust_collected;
    j["flip_area_spill_g"] = r.flip_area_spill;
    j["aggregate"] = {{"mass_before_g", detail::stat_json(r.mass_before)},
                      {"mass_after_g", detail::stat_json(r.mass_after)},
                      {"removal", detail::stat_json(r.removal)},
                      {"cycle_time_s", detail::stat_json(r.cycle_time)},
                      {"brushing_time_s", detail::stat_json(r.brushing_time)}};
    auto& rows = j["parts"] = nlohmann::ordered_json::array();
    for (const auto& p : r.rows)
        rows.push_back({{"id", p.id},
                        {"outcome", to_string(p.outcome)},
                        {"mass_before_g", p.mass_before},
                        {"mass_after_g", p.mass_after},
                        {"clean_mass_g", p.clean_mass},
                        {"removal", p.removal},
                        {"cycle_time_s", p.cycle_time},
                        {"brushing_time_s", p.brushing_time},
                        {"failures", p.failures}});
    auto& actions = j["actions"] = nlohmann::ordered_json::array();
    for (const auto& a : r.action_summary)
        actions.push_back({{"action", a.action},
                           {"count", a.count},
                           {"total_s", a.total},
                           {"mean_per_done_part_s", a.mean_per_done_part}});
    auto& tl = j["timeline"] = nlohmann::ordered_json::array();
    for (const auto& e : r.timeline) {
        nlohmann::ordered_json row{{"action", e.action}, {"start_s", e.start}, {"end_s", e.end}};
        row["part"] = e.part_id ? nlohmann::ordered_json(*e.part_id) : nlohmann::ordered_json(nullptr);
        row["outcome"] = e.outcome;
        tl.push_back(std::move(row));
    }
    return j;
}

inline nlohmann::ordered_json batch_json(const std::vector<RunReport>& runs) {
    nlohmann::ordered_json j;
    auto& arr = j["runs"] = nlohmann::ordered_json::array();
    std::vector<double> removal, cycle, frac;
    for (const auto& r : runs) {
        arr.push_back(to_json(r));
        for (const auto& p : r.rows)
            if (p.outcome == PartStatus::Done) {
                removal.push_back(p.removal);
                cycle.push_back(p.cycle_time);
            }
        frac.push_back(r.brushing_fraction);
    }
    j["pooled"] = {{"parts_done", removal.size()},
                   {"removal", detail::stat_json(summarize(removal))},
                   {"cycle_time_s", detail::stat_json(summarize(cycle))},
                   {"brushing_fraction", detail::stat_json(summarize(frac))}};
    return j;
}

inline std::string to_text(const RunReport& r, bool with_baseline = true) {
    std::ostringstream os;
    os << "seed " << r.seed << ": " << r.parts_done << " done, " << r.parts_skipped << " skipped, total "
       << detail::fixed(r.total_time, 1) << " s\n\n";
    os << std::left << std::setw(6) << "part" << std::setw(10) << "outcome" << std::right << std::setw(11)
       << "before g" << std::setw(10) << "after g" << std::setw(10) << "removal" << std::setw(10) << "cycle s"
       << std::setw(11) << "brushing s" << std::setw(10) << "failures" << '\n';
    for (const auto& p : r.rows) {
        os << std::left << std::setw(6) << p.id << std::setw(10) << to_string(p.outcome) << std::right
           << std::setw(11) << detail::fixed(p.mass_before, 1) << std::setw(10) << detail::fixed(p.mass_after, 1)
           << std::setw(9) << detail::fixed(100.0 * p.removal, 1) << '%' << std::setw(10)
           << detail::fixed(p.cycle_time, 1) << std::setw(11) << detail::fixed(p.brushing_time, 1) << std::setw(10)
           << p.failures << '\n';
    }
    os << '\n' << std::left << std::setw(24) << "avg per part" << std::setw(20) << "this run";
    if (with_baseline)
        for (const auto& b : human_baseline()) os << std::setw(22) << b.label;
    os << '\n';
    const auto line = [&](const char* label, const std::string& mine, auto field) {
        os << std::setw(24) << label << std::setw(20) << mine;
        if (with_baseline)
            for (const auto& b : human_baseline()) os << std::setw(22) << field(b);
        os << '\n';
    };
    line("mass before (g)", detail::pm(r.mass_before), [](const BaselineRow& b) { return detail::pm(b.mass_before); });
    line("mass after (g)", detail::pm(r.mass_after), [](const BaselineRow& b) { return detail::pm(b.mass_after); });
    line("removal (%)", detail::pm({100.0 * r.removal.mean, 100.0 * r.removal.sd}),
         [](const BaselineRow& b) { return detail::pm({100.0 * b.removal.mean, 100.0 * b.removal.sd}); });
    line("cycle time (s)", detail::pm(r.cycle_time), [](const BaselineRow& b) { return detail::pm(b.cycle_time); });
    line("brushing time (s)", detail::fixed(r.brushing_time.mean, 1),
         [](const BaselineRow& b) { return detail::fixed(b.brushing_time, 0); });
    os << std::right << "\nbrushing fraction " << detail::fixed(r.brushing_fraction, 3) << ", dust collected "
       << detail::fixed(r.dust_collected, 2) << " g, flip-area spill " << detail::fixed(r.flip_area_spill, 2)
       << " g\n\n";

    os << std::left << std::setw(18) << "action" << std::right << std::setw(7) << "count" << std::setw(10) << "total s"
       << std::setw(14) << "s/done part" << '\n';
    for (const auto& a : r.action_summary)
        os << std::left << std::setw(18) << a.action << std::right << std::setw(7) << a.count << std::setw(10)
           << detail::fixed(a.total, 1) << std::setw(14) << detail::fixed(a.mean_per_done_part, 2) << '\n';
    return os.str();
}

inline std::string to_csv(const std::vector<RunReport>& runs) {
    std::ostringstream os;
    os << "seed,part,outcome,mass_before_g,mass_after_g,removal,cycle_time_s,brushing_time_s,failures\n";
    os << std::setprecision(10);
    for (const auto& r : runs)
        for (const auto& p : r.rows)
            os << r.seed << ',' << p.id << ',' << to_string(p.outcome) << ',' << p.mass_before << ',' << p.mass_after
               << ',' << p.removal << ',' << p.cycle_time << ',' << p.brushing_time << ',' << p.failures << '\n';
    return os.str();
}

inline std::string timeline_csv(const RunReport& r) {
    std::ostringstream os;
    os << "action,start_s,end_s,part,outcome\n";
    for (const auto& e : r.timeline) {
        os << e.action << ',' << e.start << ',' << e.end << ',';
        if (e.part_id) os << *e.part_id;
        os << ',' << e.outcome << '\n';
    }
    return os.str();
}

}  // namespace decake
