#pragma once

// Scene files: JSON with regions, parts, poses and both powder fields.

#include <fstream>
#include <sstream>
#include <string>

#include <json.hpp>

#include "decake/error.hpp"
#include "decake/scene.hpp"

namespace decake {

namespace detail {

inline nlohmann::json polygon_json(const Polygon2& p) {
    nlohmann::json a = nlohmann::json::array();
    for (const auto& v : p.vertices()) a.push_back({v.x, v.y});
    return a;
}

inline Polygon2 polygon_from(const nlohmann::json& j) {
    std::vector<Vec2> pts;
    for (const auto& v : j) pts.push_back({v.at(0).get<double>(), v.at(1).get<double>()});
    return Polygon2(std::move(pts));
}

inline nlohmann::json grid_json(const GridField& g) {
    return {{"origin", {g.origin().x, g.origin().y}},
            {"resolution", g.resolution()},
            {"nx", g.nx()},
            {"ny", g.ny()},
            {"cells", std::vector<double>(g.cells().begin(), g.cells().end())}};
}

inline GridField grid_from(const nlohmann::json& j) {
    return GridField({j.at("origin").at(0).get<double>(), j.at("origin").at(1).get<double>()},
                     j.at("resolution").get<double>(), j.at("nx").get<std::size_t>(), j.at("ny").get<std::size_t>(),
                     j.at("cells").get<std::vector<double>>());
}

inline PartStatus status_from(const std::string& s) {
    for (auto st : {PartStatus::InBin, PartStatus::Held, PartStatus::OnFlipArea, PartStatus::Done, PartStatus::Skipped})
        if (s == to_string(st)) return st;
    throw FormatError("unknown part status '" + s + "'");
}

}  // namespace detail

inline nlohmann::json scene_to_json(const SceneState& s) {
    nlohmann::json j;
    j["rng_seed"] = s.rng_seed;
    j["powder_density"] = s.powder_density;
    j["dust_collected"] = s.dust_collected;
    j["flip_area_spill"] = s.flip_area_spill;
    j["bin"] = {{"outline", detail::polygon_json(s.bin.outline)}, {"wall_height", s.bin.wall_height}};
    j["flip_area"] = detail::polygon_json(s.flip_area);
    j["destination"] = detail::polygon_json(s.destination);
    auto& parts = j["parts"] = nlohmann::json::array();
    for (const auto& p : s.parts)
        parts.push_back({{"id", p.id},
                         {"spec",
                          {{"name", p.spec.name},
                           {"footprint", detail::polygon_json(p.spec.footprint)},
                           {"thickness", p.spec.thickness},
                           {"clean_mass", p.spec.clean_mass},
                           {"porosity", p.spec.porosity}}},
                         {"pose", {p.pose.x, p.pose.y, p.pose.z, p.pose.yaw}},
                         {"face_up", p.face_up},
                         {"status", to_string(p.status)},
                         {"powder_top", detail::grid_json(p.powder_top)},
                         {"powder_bottom", detail::grid_json(p.powder_bottom)}});
    return j;
}

inline SceneState scene_from_json(const nlohmann::json& j) {
    try {
        SceneState s;
        s.rng_seed = j.value("rng_seed", std::uint64_t{0});
        s.powder_density = j.value("powder_density", 0.00055);
        s.dust_collected = j.value("dust_collected", 0.0);
        s.flip_area_spill = j.value("flip_area_spill", 0.0);
        s.bin.outline = detail::polygon_from(j.at("bin").at("outline"));
        s.bin.wall_height = j.at("bin").value("wall_height", 200.0);
        s.flip_area = detail::polygon_from(j.at("flip_area"));
        s.destination = detail::polygon_from(j.at("destination"));
        for (const auto& jp : j.at("parts")) {
            PartState p;
            p.id = jp.at("id").get<int>();
            const auto& js = jp.at("spec");
            p.spec.name = js.value("name", std::string("insole"));
            p.spec.footprint = detail::polygon_from(js.at("footprint"));
            p.spec.thickness = js.at("thickness").get<double>();
            p.spec.clean_mass = js.at("clean_mass").get<double>();
            p.spec.porosity = js.at("porosity").get<double>();
            p.spec.validate();
            const auto& pose = jp.at("pose");
            p.pose = Pose(pose.at(0).get<double>(), pose.at(1).get<double>(), pose.at(2).get<double>(),
                          pose.at(3).get<double>());
            p.face_up = jp.value("face_up", true);
            p.status = detail::status_from(jp.value("status", std::string("InBin")));
            p.powder_top = detail::grid_from(jp.at("powder_top"));
            p.powder_bottom = detail::grid_from(jp.at("powder_bottom"));
            for (const auto& q : s.parts)
                if (q.id == p.id) throw FormatError("duplicate part id " + std::to_string(p.id));
            s.parts.push_back(std::move(p));
        }
        return s;
    } catch (const nlohmann::json::exception& e) {
        throw FormatError(std::string("malformed scene: ") + e.what());
    }
}

inline void save_scene(const SceneState& s, const std::string& path) {
    std::ofstream f(path);
    if (!f) throw FormatError("cannot write " + path);
    f << scene_to_json(s).dump() << '\n';
}

inline SceneState load_scene(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw FormatError("cannot open scene file " + path);
    try {
        return scene_from_json(nlohmann::json::parse(f));
    } catch (const nlohmann::json::parse_error& e) {
        throw FormatError(std::string("scene file is not valid JSON: ") + e.what());
    }
}

}  // namespace decake
