// decake: run the simulated decaking cell from the command line.

#include <cstdio>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <string>

#include <CLI11.hpp>

#include "decake/decake.hpp"

namespace {

struct GenerateSpec {
    std::uint64_t seed = 1;
    int parts = 10;
};

GenerateSpec parse_generate(const std::string& text) {
    GenerateSpec g;
    std::stringstream ss(text);
    std::string item;
    while (std::getline(ss, item, ',')) {
        const auto eq = item.find('=');
        if (eq == std::string::npos) throw decake::ConfigError("--generate expects key=value pairs, got '" + item + "'");
        const std::string key = item.substr(0, eq);
        const std::string value = item.substr(eq + 1);
        try {
            if (key == "seed") g.seed = std::stoull(value);
            else if (key == "parts") g.parts = std::stoi(value);
            else throw decake::ConfigError("unknown --generate key '" + key + "'");
        } catch (const std::logic_error&) {
            throw decake::ConfigError("bad --generate value '" + value + "'");
        }
    }
    return g;
}

void write_file(const std::string& path, const std::string& text) {
    std::ofstream f(path);
    if (!f) throw decake::FormatError("cannot write " + path);
    f << text;
}

int exit_code(const std::vector<decake::RunReport>& runs) {
    for (const auto& r : runs)
        if (r.parts_skipped > 0) return 2;
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Simulated robotic decaking cell"};
    app.require_subcommand(1);

    std::string scene_file;
    std::string generate;
    std::string config_file;
    std::string report_path;
    std::string dump_dir;
    std::string csv_path;
    std::string timeline_path;
    int batch = 0;
    unsigned threads = 0;
    std::optional<std::uint64_t> seed_override;
    bool quiet = false;

    auto* run_cmd = app.add_subcommand("run", "process a bin of caked parts");
    auto* scene_opt = run_cmd->add_option("--scene", scene_file, "scene JSON file")->check(CLI::ExistingFile);
    run_cmd->add_option("--generate", generate, "generate a scene instead, e.g. seed=7,parts=10")->excludes(scene_opt);
    run_cmd->add_option("--config", config_file, "TOML-style configuration")->check(CLI::ExistingFile);
    run_cmd->add_option("--report", report_path, "JSON report output path");
    run_cmd->add_option("--dump-traces", dump_dir, "directory for force/path CSVs and depth PGMs");
    run_cmd->add_option("--batch", batch, "number of consecutive seeds to run")->check(CLI::NonNegativeNumber);
    run_cmd->add_option("--threads", threads, "worker threads for --batch (0 = hardware)");
    run_cmd->add_option("--csv", csv_path, "per-part CSV output path");
    run_cmd->add_option("--timeline", timeline_path, "action timeline CSV (single run)");
    run_cmd->add_option("--seed", seed_override, "run seed for a scene file (default: config run.seed)");
    run_cmd->add_flag("--quiet", quiet, "no table on stdout");

    std::uint64_t gen_seed = 1;
    int gen_parts = 10;
    std::string gen_out;
    std::string gen_config;
    auto* gen_cmd = app.add_subcommand("generate", "write a seeded scene file");
    gen_cmd->add_option("--seed", gen_seed, "scene seed");
    gen_cmd->add_option("--parts", gen_parts, "number of parts");
    gen_cmd->add_option("--config", gen_config, "configuration for scene parameters")->check(CLI::ExistingFile);
    gen_cmd->add_option("--out", gen_out, "output path")->required();

    auto* base_cmd = app.add_subcommand("baseline", "print the human-operator reference rows");
    auto* cfg_cmd = app.add_subcommand("config", "print the default configuration");

    CLI11_PARSE(app, argc, argv);

    try {
        if (*cfg_cmd) {
            std::cout << decake::to_toml(decake::Config{});
            return 0;
        }
        if (*base_cmd) {
            std::cout << std::left;
            for (const auto& b : decake::human_baseline())
                std::printf("%-22s before %.1f+-%.1f g  after %.1f+-%.1f g  cycle %.1f+-%.1f s  brushing %.0f s  removal %.1f+-%.1f%%\n",
                            b.label.c_str(), b.mass_before.mean, b.mass_before.sd, b.mass_after.mean, b.mass_after.sd,
                            b.cycle_time.mean, b.cycle_time.sd, b.brushing_time, 100.0 * b.removal.mean,
                            100.0 * b.removal.sd);
            return 0;
        }
        if (*gen_cmd) {
            decake::Config cfg = gen_config.empty() ? decake::Config{} : decake::load_config(gen_config);
            cfg.scene.n_parts = gen_parts;
            decake::save_scene(decake::scene_generate(cfg.scene, gen_seed), gen_out);
            return 0;
        }

        decake::Config cfg = config_file.empty() ? decake::Config{} : decake::load_config(config_file);
        std::vector<decake::RunReport> runs;
        decake::TraceSink sink;
        decake::TraceSink* sink_ptr = dump_dir.empty() ? nullptr : &sink;

        if (!scene_file.empty()) {
            const decake::SceneState scene = decake::load_scene(scene_file);
            const std::uint64_t first = seed_override.value_or(cfg.seed);
            const int n = std::max(1, batch);
            for (int k = 0; k < n; ++k)
                runs.push_back(decake::run(scene, cfg, first + static_cast<std::uint64_t>(k), k == 0 ? sink_ptr : nullptr));
        } else {
            GenerateSpec g;
            if (!generate.empty()) g = parse_generate(generate);
            else g.seed = seed_override.value_or(cfg.seed);
            cfg.scene.n_parts = g.parts;
            if (batch > 1) {
                runs = decake::run_batch(cfg, g.seed, batch, threads);
            } else {
                runs.push_back(decake::run(decake::scene_generate(cfg.scene, g.seed), cfg, g.seed, sink_ptr));
            }
        }

        if (sink_ptr) decake::dump_traces(sink, dump_dir);
        const bool single = runs.size() == 1;
        if (!report_path.empty())
            write_file(report_path, (single ? decake::to_json(runs.front()) : decake::batch_json(runs)).dump(2) + "\n");
        if (!csv_path.empty()) write_file(csv_path, decake::to_csv(runs));
        if (!timeline_path.empty()) write_file(timeline_path, decake::timeline_csv(runs.front()));
        if (!quiet) {
            if (single) {
                std::cout << decake::to_text(runs.front());
            } else {
                for (const auto& r : runs)
                    std::printf("seed %llu: %d done, %d skipped, removal %.1f%%, cycle %.1f s, brushing fraction %.3f\n",
                                static_cast<unsigned long long>(r.seed), r.parts_done, r.parts_skipped,
                                100.0 * r.removal.mean, r.cycle_time.mean, r.brushing_fraction);
            }
        }
        return exit_code(runs);
    } catch (const std::exception& e) {
        std::cerr << "decake: " << e.what() << '\n';
        return 1;
    }
}
