#pragma once

#include <string>
#include <vector>

#include <json.hpp>

namespace limclust {

// Tolerances, windows, and numeric knobs. Every report echoes the full
// configuration so results are reproducible from the output alone.
struct Config {
    // tail-window estimation
    double tol = 0.05;             // limit-statement tolerance
    double window_fraction = 0.25; // tail window = last ceil(fraction * count) indices

    // spectrum detection
    double lambda_min = 0.05;       // atoms below this go to residual mass
    double atom_merge_radius = 0.02;
    std::vector<int> d_schedule = {1, 2, 4, 8, 16};

    // Levy inversion
    double inversion_T = 200.0;
    int inversion_W = 40;       // moment series truncation (<= 64)
    int inversion_grid = 32768; // quadrature points on [-T, T]

    // cluster diagnostics
    int dmax = 8;                 // negligible-profile radius cap
    int classify_dmax = 32;       // dispersion radius cap
    double classify_epsilon = 0.05;
    int exact_subset_limit = 16;  // exhaustive subset scans up to this n
    int sample_count = 20000;     // sampled expansion candidates
    unsigned seed = 1;

    // schedule construction
    int schedule_depth = 6; // z-levels attempted past z0

    int parallelism = 0; // 0 = OpenMP default
    std::string battery_file;
    std::string out_dir = ".";

    nlohmann::json echo() const;
    void set(const std::string& key, const std::string& value);
};

// Key-value file: one `key = value` per line, '#' comments. Missing file is
// an input error; unknown keys are too.
Config load_config_file(const std::string& path);

// Reads LIMCLUST_CONFIG when set, else returns defaults.
Config config_from_env();

} // namespace limclust
