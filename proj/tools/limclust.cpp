#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "limclust/config.hpp"
#include "limclust/evaluate.hpp"
#include "limclust/generators.hpp"
#include "limclust/globular.hpp"
#include "limclust/io.hpp"
#include "limclust/kernels.hpp"
#include "limclust/sequences.hpp"
#include "limclust/spectrum.hpp"

namespace fs = std::filesystem;
using namespace limclust;

namespace {

struct GlobalArgs {
    std::string config_path;
    std::vector<std::string> overrides;
    int parallelism = -1;
    bool json_errors = false;
};

Config make_config(const GlobalArgs& g) {
    Config cfg = g.config_path.empty() ? config_from_env() : load_config_file(g.config_path);
    for (const auto& kv : g.overrides) {
        auto eq = kv.find('=');
        if (eq == std::string::npos)
            throw input_error("--set expects key=value, got '" + kv + "'");
        cfg.set(kv.substr(0, eq), kv.substr(eq + 1));
    }
    if (g.parallelism >= 0) cfg.parallelism = g.parallelism;
    set_parallelism(cfg.parallelism);
    return cfg;
}

std::vector<std::pair<std::string, Formula>> load_formula_lines(const std::string& text) {
    std::vector<std::pair<std::string, Formula>> out;
    std::istringstream in(text);
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        auto hash = line.find('#');
        if (hash != std::string::npos) line = line.substr(0, hash);
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        std::string name;
        std::string body = line;
        auto bind = line.find(":=");
        if (bind != std::string::npos) {
            name = line.substr(0, bind);
            auto b = name.find_first_not_of(" \t");
            auto e = name.find_last_not_of(" \t");
            name = name.substr(b, e - b + 1);
            body = line.substr(bind + 2);
        }
        try {
            Formula f = Formula::parse(body);
            if (name.empty()) name = f.to_string();
            out.emplace_back(name, std::move(f));
        } catch (const Error& err) {
            throw Error(err.kind(),
                        "formula line " + std::to_string(lineno) + ": " + err.what());
        }
    }
    return out;
}

std::vector<Formula> battery_for(const Config& cfg, const Structure& sample) {
    if (!cfg.battery_file.empty()) {
        auto lines = load_formula_lines(read_text_file(cfg.battery_file));
        std::vector<Formula> out;
        for (auto& [name, f] : lines) out.push_back(std::move(f));
        if (out.empty()) throw input_error("battery file has no formulas");
        return out;
    }
    return default_battery(Signature::of(sample), "M");
}

int cmd_generate(const GlobalArgs& g, const std::string& family, const std::string& params_text,
                 int n0, int n1, const std::string& out_dir) {
    make_config(g);
    nlohmann::json params =
        params_text.empty() ? nlohmann::json::object() : nlohmann::json::parse(params_text);
    fs::create_directories(out_dir);
    nlohmann::json manifest;
    manifest["generator"] = family;
    manifest["params"] = params;
    manifest["range"] = {n0, n1};
    std::vector<std::string> files;
    nlohmann::json truths = nlohmann::json::array();
    for (int n = n0; n <= n1; ++n) {
        GeneratedStructure gen = generate(family, params, n);
        std::string path = out_dir + "/structure_" + std::to_string(n) + ".json";
        save_structure_file(gen.structure, path);
        files.push_back(path);
        nlohmann::json t;
        t["n"] = n;
        nlohmann::json atoms = nlohmann::json::array();
        for (const auto& a : gen.truth.atoms)
            atoms.push_back({{"lambda", a.lambda}, {"mass", a.mass}, {"count", a.count}});
        t["atoms"] = atoms;
        t["residual_mass"] = gen.truth.residual_mass;
        t["labels"] = gen.truth.labels;
        truths.push_back(t);
    }
    nlohmann::json file_manifest;
    file_manifest["files"] = files;
    file_manifest["first_index"] = n0;
    write_json_file(out_dir + "/manifest.json", manifest);
    write_json_file(out_dir + "/files.json", file_manifest);
    write_json_file(out_dir + "/truth.json", truths);
    std::cout << "wrote " << files.size() << " structures to " << out_dir << "\n";
    return 0;
}

int cmd_pairing(const GlobalArgs& g, const std::string& formula_text,
                const std::string& formulas_file, const std::string& structure_file,
                const std::string& manifest_file, bool local, bool as_json) {
    Config cfg = make_config(g);
    (void)cfg;
    std::vector<std::pair<std::string, Formula>> formulas;
    if (!formula_text.empty()) formulas.emplace_back(formula_text, Formula::parse(formula_text));
    if (!formulas_file.empty()) {
        auto more = load_formula_lines(read_text_file(formulas_file));
        for (auto& f : more) formulas.push_back(std::move(f));
    }
    if (formulas.empty()) throw input_error("no formulas given (use --formula or --formulas)");

    auto evaluate_on = [&](const Structure& a, const std::string& tag, nlohmann::json& rows) {
        for (const auto& [name, f] : formulas) {
            nlohmann::json row;
            row["structure"] = tag;
            row["formula"] = name;
            if (local) {
                std::vector<double> vals;
                for (std::uint32_t v = 0; v < a.size(); ++v)
                    vals.push_back(local_stone_pairing(a, f, v));
                row["local_pairings"] = vals;
            } else {
                row["pairing"] = stone_pairing(a, f);
            }
            rows.push_back(row);
        }
    };

    nlohmann::json rows = nlohmann::json::array();
    if (!structure_file.empty()) {
        Structure a = load_structure_file(structure_file);
        evaluate_on(a, structure_file, rows);
    } else if (!manifest_file.empty()) {
        StructureSequence s = load_manifest(manifest_file);
        for (int n = s.first(); n <= s.last(); ++n)
            evaluate_on(*s.at(n), "n=" + std::to_string(n), rows);
    } else {
        throw input_error("pairing needs --structure or --manifest");
    }
    if (as_json) {
        std::cout << rows.dump(2) << "\n";
    } else {
        for (const auto& row : rows) {
            std::cout << row.at("structure").get<std::string>() << "\t"
                      << row.at("formula").get<std::string>() << "\t";
            if (row.contains("pairing"))
                std::cout << row.at("pairing").get<double>();
            else
                std::cout << row.at("local_pairings").dump();
            std::cout << "\n";
        }
    }
    return 0;
}

int cmd_spectrum(const GlobalArgs& g, const std::string& manifest_file,
                 const std::string& out_dir) {
    Config cfg = make_config(g);
    StructureSequence s = load_manifest(manifest_file);
    SpectrumReport rep = detect_spectrum(s, cfg);
    fs::create_directories(out_dir);
    write_json_file(out_dir + "/spectrum.json", rep.to_json());
    for (int d : cfg.d_schedule) {
        EmpiricalCDF cdf = ball_measure_distribution(*s.at(s.last()), d);
        write_text_file(out_dir + "/cdf_d" + std::to_string(d) + ".csv", cdf.to_csv());
    }
    std::cout << rep.to_json().dump(2) << "\n";
    return 0;
}

int cmd_cluster(const GlobalArgs& g, const std::string& manifest_file,
                const std::string& out_dir, bool export_marked) {
    Config cfg = make_config(g);
    StructureSequence s = load_manifest(manifest_file);
    SpectrumReport rep = detect_spectrum(s, cfg);
    fs::create_directories(out_dir);
    write_json_file(out_dir + "/spectrum.json", rep.to_json());
    if (rep.atoms.empty()) {
        nlohmann::json j;
        j["status"] = "residual-only";
        j["note"] = "no atoms detected; every vertex belongs to the residual cluster";
        j["config"] = cfg.echo();
        write_json_file(out_dir + "/clustering.json", j);
        std::cout << j.dump(2) << "\n";
        return 0;
    }
    Schedule sched = build_schedule(rep, s, cfg);
    auto battery = battery_for(cfg, *s.at(s.first()));
    ClusteringResult res = assemble_clustering(s, rep, sched, battery, cfg);
    write_json_file(out_dir + "/clustering.json", res.to_json());
    if (export_marked) {
        for (int n = s.first(); n <= s.last(); ++n)
            save_structure_file(marked_structure(res, s, n),
                                out_dir + "/marked_" + std::to_string(n) + ".json");
    }
    std::cout << res.to_json()["status"].dump() << " marks="
              << res.marks.size() << " violations=" << res.violations.size() << "\n";
    return res.status == "ok" ? 0 : 1;
}

int cmd_verify(const GlobalArgs& g, const std::string& manifest_file,
               const std::string& subsets_file, const std::string& out_dir) {
    Config cfg = make_config(g);
    StructureSequence s = load_manifest(manifest_file);
    int failures = 0;
    auto report_line = [&](const std::string& what, bool ok, const std::string& detail) {
        std::cout << (ok ? "[PASS] " : "[FAIL] ") << what;
        if (!detail.empty()) std::cout << ": " << detail;
        std::cout << "\n";
        if (!ok) ++failures;
    };

    SpectrumReport rep = detect_spectrum(s, cfg);
    report_line("spectrum detection", true,
                std::to_string(rep.atoms.size()) + " atoms, lambda0 = " +
                    std::to_string(rep.lambda0));
    for (const auto& a : rep.atoms)
        report_line("integrality at lambda=" + std::to_string(a.lambda), a.residue <= 0.25,
                    "mass/lambda residue " + std::to_string(a.residue));

    auto battery = battery_for(cfg, *s.at(s.first()));
    if (!rep.atoms.empty()) {
        Schedule sched = build_schedule(rep, s, cfg);
        ClusteringResult res = assemble_clustering(s, rep, sched, battery, cfg);
        int held = 0, violated = 0;
        for (const auto& r : res.records) {
            if (!r.applicable) continue;
            if (r.holds) ++held;
            else ++violated;
        }
        report_line("lemma assertions (ZC/disjC/measC/bordC/centers/stable)", violated == 0,
                    std::to_string(held) + " held, " + std::to_string(violated) + " violated");
        for (const auto& v : res.violations) std::cout << "       " << v << "\n";
        if (!out_dir.empty()) {
            fs::create_directories(out_dir);
            write_json_file(out_dir + "/verify_clustering.json", res.to_json());
        }
    }

    if (!subsets_file.empty()) {
        SubsetSequence x = load_subsets(subsets_file, s);
        ClusterCheck check = is_cluster(s, x, battery, cfg.dmax, cfg.tol, cfg.window_fraction);
        report_line("subset cluster check", check.verdict == Verdict::Pass,
                    verdict_name(check.verdict));
        ClassifyResult cls = classify(s, x, cfg);
        report_line("subset classification", cls.cls != ClusterClass::Inconclusive,
                    cluster_class_name(cls.cls));
    }
    return failures == 0 ? 0 : 1;
}

int cmd_report(const GlobalArgs& g, const std::string& in_dir) {
    make_config(g);
    auto spath = in_dir + "/spectrum.json";
    auto cpath = in_dir + "/clustering.json";
    if (fs::exists(spath)) {
        nlohmann::json j = nlohmann::json::parse(read_text_file(spath));
        std::cout << "Spectrum over indices [" << j["n0"] << ", " << j["n1"] << "]\n";
        for (const auto& a : j["atoms"]) {
            std::cout << "  atom lambda=" << a["lambda"] << "  mass=" << a["mass"]
                      << "  count=" << a["count"] << "  (inversion " << a["inversion_mass"]
                      << ")\n";
        }
        std::cout << "  residual mass lambda0=" << j["lambda0"] << "\n";
        for (const auto& w : j["warnings"]) std::cout << "  warning: " << w.get<std::string>() << "\n";
    } else {
        std::cout << "no spectrum.json under " << in_dir << "\n";
    }
    if (fs::exists(cpath)) {
        nlohmann::json j = nlohmann::json::parse(read_text_file(cpath));
        if (j.contains("status")) std::cout << "Clustering status: " << j["status"] << "\n";
        if (j.contains("marks")) {
            std::cout << "Marks:\n";
            for (const auto& m : j["marks"]) {
                std::cout << "  " << m["name"].get<std::string>() << " (" << m["kind"].get<std::string>();
                if (m.contains("lambda")) std::cout << ", lambda=" << m["lambda"];
                std::cout << ")\n";
            }
        }
        if (j.contains("violations"))
            for (const auto& v : j["violations"])
                std::cout << "  violation: " << v.get<std::string>() << "\n";
    }
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"limclust: local statistics, ball-measure spectra, and globular clustering "
                 "of structure sequences"};
    app.require_subcommand(1);
    GlobalArgs g;
    app.add_option("--config", g.config_path, "config file (key = value lines)");
    app.add_option("--set", g.overrides, "config override key=value (repeatable)");
    app.add_option("--parallelism", g.parallelism, "worker threads (0 = OpenMP default)");
    app.add_flag("--json-errors", g.json_errors, "emit machine-readable errors on stderr");

    auto* gen = app.add_subcommand("generate", "write a synthetic family to structure files");
    std::string family, params_text, out_dir = "out";
    int n0 = 4, n1 = 16;
    gen->add_option("--family", family, "generator family (see `report` for the registry)")
        ->required();
    gen->add_option("--params", params_text, "family parameters as JSON");
    gen->add_option("--range", [&n0, &n1](const std::vector<std::string>& vals) {
        if (vals.size() != 2) return false;
        n0 = std::stoi(vals[0]);
        n1 = std::stoi(vals[1]);
        return true;
    }, "index range n0 n1")->expected(2);
    gen->add_option("--out", out_dir, "output directory");

    auto* pair = app.add_subcommand("pairing", "evaluate formulas against structures");
    std::string formula_text, formulas_file, structure_file, manifest_file;
    bool local = false, as_json = false;
    pair->add_option("--formula", formula_text, "formula (DSL)");
    pair->add_option("--formulas", formulas_file, "file with `name := formula` lines");
    pair->add_option("--structure", structure_file, "structure JSON file");
    pair->add_option("--manifest", manifest_file, "sequence manifest");
    pair->add_flag("--local", local, "emit per-vertex local pairings");
    pair->add_flag("--json", as_json, "JSON output instead of TSV");

    auto* spec = app.add_subcommand("spectrum", "estimate the ball-measure spectrum");
    std::string spec_manifest, spec_out = "out";
    spec->add_option("--manifest", spec_manifest, "sequence manifest")->required();
    spec->add_option("--out", spec_out, "output directory");

    auto* clus = app.add_subcommand("cluster", "assemble the globular clustering");
    std::string clus_manifest, clus_out = "out";
    bool export_marked = false;
    clus->add_option("--manifest", clus_manifest, "sequence manifest")->required();
    clus->add_option("--out", clus_out, "output directory");
    clus->add_flag("--export-marked", export_marked, "write marked structure files");

    auto* ver = app.add_subcommand("verify", "run the lemma-assertion suites");
    std::string ver_manifest, ver_subsets, ver_out;
    ver->add_option("--manifest", ver_manifest, "sequence manifest")->required();
    ver->add_option("--subsets", ver_subsets, "subset-sequence file to check as a cluster");
    ver->add_option("--out", ver_out, "directory for evidence JSON");

    auto* repc = app.add_subcommand("report", "human-readable summary of prior outputs");
    std::string rep_in = "out";
    repc->add_option("--in", rep_in, "directory with spectrum.json / clustering.json");

    try {
        app.parse(argc, argv);
        if (gen->parsed()) return cmd_generate(g, family, params_text, n0, n1, out_dir);
        if (pair->parsed())
            return cmd_pairing(g, formula_text, formulas_file, structure_file, manifest_file,
                               local, as_json);
        if (spec->parsed()) return cmd_spectrum(g, spec_manifest, spec_out);
        if (clus->parsed()) return cmd_cluster(g, clus_manifest, clus_out, export_marked);
        if (ver->parsed()) return cmd_verify(g, ver_manifest, ver_subsets, ver_out);
        if (repc->parsed()) return cmd_report(g, rep_in);
        return 2;
    } catch (const CLI::ParseError& e) {
        return app.exit(e);
    } catch (const Error& e) {
        if (g.json_errors) {
            nlohmann::json err;
            err["error"] = e.what();
            err["kind"] = static_cast<int>(e.kind());
            std::cerr << err.dump() << "\n";
        } else {
            std::cerr << "error: " << e.what() << "\n";
        }
        return 2;
    } catch (const std::exception& e) {
        if (g.json_errors) {
            nlohmann::json err;
            err["error"] = e.what();
            std::cerr << err.dump() << "\n";
        } else {
            std::cerr << "error: " << e.what() << "\n";
        }
        return 2;
    }
}
