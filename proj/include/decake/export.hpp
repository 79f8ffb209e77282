#pragma once

// Debug dumps: force traces, brush trajectories and planned paths as CSV,
// depth images as 16-bit PGM.

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <string>

#include "decake/error.hpp"
#include "decake/orchestrator.hpp"

namespace decake {

inline void write_force_csv(const std::vector<FTReading>& trace, const std::string& path) {
    std::ofstream f(path);
    if (!f) throw FormatError("cannot write " + path);
    f << "sample,fx,fy,fz,tx,ty,tz\n";
    for (std::size_t k = 0; k < trace.size(); ++k) {
        const auto& r = trace[k];
        f << k << ',' << r.fx << ',' << r.fy << ',' << r.fz << ',' << r.tx << ',' << r.ty << ',' << r.tz << '\n';
    }
}

inline void write_track_csv(const TrackResult& track, const std::string& path) {
    std::ofstream f(path);
    if (!f) throw FormatError("cannot write " + path);
    f << "t,x,y,z,fz\n";
    for (const auto& s : track.trace)
        f << s.t << ',' << s.pose.x << ',' << s.pose.y << ',' << s.pose.z << ',' << s.ft.fz << '\n';
}

inline void write_trajectory_csv(const BrushTrajectory& traj, const std::string& path) {
    std::ofstream f(path);
    if (!f) throw FormatError("cannot write " + path);
    f << "t,x,y\n";
    for (const auto& s : traj.samples) f << s.t << ',' << s.x << ',' << s.y << '\n';
}

inline void write_path_csv(const PlannedPath& path, const std::string& file) {
    std::ofstream f(file);
    if (!f) throw FormatError("cannot write " + file);
    f << "x,y,z\n";
    for (const auto& p : path.waypoints) f << p.x << ',' << p.y << ',' << p.z << '\n';
}

// Heights in tenths of a millimetre, row 0 at the far (max y) edge.
inline void write_depth_pgm(const DepthImage& img, const std::string& path) {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw FormatError("cannot write " + path);
    const GridField& h = img.heights;
    f << "P5\n" << h.nx() << ' ' << h.ny() << "\n65535\n";
    for (std::size_t r = 0; r < h.ny(); ++r) {
        const std::size_t j = h.ny() - 1 - r;
        for (std::size_t i = 0; i < h.nx(); ++i) {
            const auto v = static_cast<unsigned>(std::clamp(std::lround(h.at(i, j) * 10.0), 0L, 65535L));
            const char bytes[2] = {static_cast<char>(v >> 8), static_cast<char>(v & 0xFF)};
            f.write(bytes, 2);
        }
    }
}

inline void dump_traces(const TraceSink& sink, const std::string& dir) {
    std::filesystem::create_directories(dir);
    const auto p = [&](const std::string& name) { return (std::filesystem::path(dir) / name).string(); };
    for (const auto& [tag, trace] : sink.force) write_force_csv(trace, p(tag + ".csv"));
    for (const auto& [tag, track] : sink.tracks) write_track_csv(track, p(tag + "_force.csv"));
    for (const auto& [tag, traj] : sink.brush) write_trajectory_csv(traj, p(tag + "_path.csv"));
    for (const auto& [tag, path] : sink.paths) write_path_csv(path, p(tag + ".csv"));
    for (const auto& [tag, img] : sink.depth) write_depth_pgm(img, p(tag + ".pgm"));
}

}  // namespace decake
