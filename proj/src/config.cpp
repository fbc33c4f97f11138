#include "limclust/config.hpp"

#include <cstdlib>
#include <fstream>
#include <sstream>

#include "limclust/error.hpp"

namespace limclust {

nlohmann::json Config::echo() const {
    nlohmann::json j;
    j["tol"] = tol;
    j["window_fraction"] = window_fraction;
    j["lambda_min"] = lambda_min;
    j["atom_merge_radius"] = atom_merge_radius;
    j["d_schedule"] = d_schedule;
    j["inversion_T"] = inversion_T;
    j["inversion_W"] = inversion_W;
    j["inversion_grid"] = inversion_grid;
    j["dmax"] = dmax;
    j["classify_dmax"] = classify_dmax;
    j["classify_epsilon"] = classify_epsilon;
    j["exact_subset_limit"] = exact_subset_limit;
    j["sample_count"] = sample_count;
    j["seed"] = seed;
    j["schedule_depth"] = schedule_depth;
    j["parallelism"] = parallelism;
    j["battery_file"] = battery_file;
    j["out_dir"] = out_dir;
    return j;
}

void Config::set(const std::string& key, const std::string& value) {
    auto as_double = [&] {
        try {
            return std::stod(value);
        } catch (...) {
            throw input_error("config: '" + key + "' expects a number, got '" + value + "'");
        }
    };
    auto as_int = [&] {
        try {
            return std::stoi(value);
        } catch (...) {
            throw input_error("config: '" + key + "' expects an integer, got '" + value + "'");
        }
    };
    if (key == "tol") tol = as_double();
    else if (key == "window_fraction") window_fraction = as_double();
    else if (key == "lambda_min") lambda_min = as_double();
    else if (key == "atom_merge_radius") atom_merge_radius = as_double();
    else if (key == "d_schedule") {
        d_schedule.clear();
        std::stringstream ss(value);
        std::string item;
        while (std::getline(ss, item, ','))
            d_schedule.push_back(std::stoi(item));
        if (d_schedule.empty()) throw input_error("config: empty d_schedule");
    } else if (key == "inversion_T") inversion_T = as_double();
    else if (key == "inversion_W") inversion_W = as_int();
    else if (key == "inversion_grid") inversion_grid = as_int();
    else if (key == "dmax") dmax = as_int();
    else if (key == "classify_dmax") classify_dmax = as_int();
    else if (key == "classify_epsilon") classify_epsilon = as_double();
    else if (key == "exact_subset_limit") exact_subset_limit = as_int();
    else if (key == "sample_count") sample_count = as_int();
    else if (key == "seed") seed = static_cast<unsigned>(as_int());
    else if (key == "schedule_depth") schedule_depth = as_int();
    else if (key == "parallelism") parallelism = as_int();
    else if (key == "battery_file") battery_file = value;
    else if (key == "out_dir") out_dir = value;
    else throw input_error("config: unknown key '" + key + "'");

    if (tol <= 0 || window_fraction <= 0 || lambda_min <= 0 || atom_merge_radius <= 0 ||
        inversion_T <= 0 || inversion_W <= 0 || inversion_grid <= 1)
        throw input_error("config: '" + key + "' must be positive");
    if (inversion_W > 64) throw input_error("config: inversion_W capped at 64");
}

Config load_config_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw input_error("cannot open config file '" + path + "'");
    Config cfg;
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        auto hash = line.find('#');
        if (hash != std::string::npos) line = line.substr(0, hash);
        auto eq = line.find('=');
        if (eq == std::string::npos) {
            bool blank = line.find_first_not_of(" \t\r") == std::string::npos;
            if (!blank)
                throw input_error("config " + path + ":" + std::to_string(lineno) +
                                  ": expected 'key = value'");
            continue;
        }
        auto trim = [](std::string s) {
            auto b = s.find_first_not_of(" \t\r");
            auto e = s.find_last_not_of(" \t\r");
            return b == std::string::npos ? std::string{} : s.substr(b, e - b + 1);
        };
        cfg.set(trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
    }
    return cfg;
}

Config config_from_env() {
    const char* path = std::getenv("LIMCLUST_CONFIG");
    if (path && *path) return load_config_file(path);
    return Config{};
}

} // namespace limclust
