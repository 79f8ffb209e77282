// Fit the per-pass removal fraction so that the mean removal over a seeded set
// of default runs hits a target.

#include <cstdio>
#include <iostream>

#include <CLI11.hpp>

#include "decake/decake.hpp"

namespace {

double pooled_removal(decake::Config cfg, double rho, std::uint64_t first, int runs) {
    cfg.removal.rho_max = rho;
    double sum = 0.0;
    int n = 0;
    for (const auto& r : decake::run_batch(cfg, first, runs))
        for (const auto& row : r.rows)
            if (row.outcome == decake::PartStatus::Done) {
                sum += row.removal;
                ++n;
            }
    return n > 0 ? sum / n : 0.0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Fit removal.rho_max to a target mean removal"};
    double target = 0.42;
    std::uint64_t first = 42;
    int runs = 20;
    double lo = 1e-4;
    double hi = 1.0;
    int iters = 30;
    std::string config_file;
    app.add_option("--target", target, "target mean removal fraction");
    app.add_option("--first-seed", first, "first scene seed");
    app.add_option("--runs", runs, "number of seeded 10-part runs");
    app.add_option("--lo", lo, "lower bracket");
    app.add_option("--hi", hi, "upper bracket");
    app.add_option("--iters", iters, "bisection steps");
    app.add_option("--config", config_file, "base configuration")->check(CLI::ExistingFile);
    CLI11_PARSE(app, argc, argv);

    try {
        const decake::Config cfg = config_file.empty() ? decake::Config{} : decake::load_config(config_file);
        double f_lo = pooled_removal(cfg, lo, first, runs) - target;
        const double f_hi = pooled_removal(cfg, hi, first, runs) - target;
        if (f_lo * f_hi > 0.0) {
            std::cerr << "target not bracketed: removal " << f_lo + target << " .. " << f_hi + target << '\n';
            return 1;
        }
        for (int k = 0; k < iters; ++k) {
            const double mid = 0.5 * (lo + hi);
            const double f = pooled_removal(cfg, mid, first, runs) - target;
            std::printf("rho_max %.8f -> removal %.5f\n", mid, f + target);
            if ((f < 0.0) == (f_lo < 0.0)) {
                lo = mid;
                f_lo = f;
            } else {
                hi = mid;
            }
        }
        std::printf("fitted rho_max = %.6f\n", 0.5 * (lo + hi));
        return 0;
    } catch (const std::exception& e) {
        std::cerr << "calibrate_removal: " << e.what() << '\n';
        return 1;
    }
}
