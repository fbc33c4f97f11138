#include "limclust/io.hpp"

#include <algorithm>
#include <fstream>
#include <set>
#include <sstream>

#include "limclust/generators.hpp"

namespace limclust {

namespace {

double weight_entry(const nlohmann::json& v, const std::string& where) {
    if (v.is_number()) return v.get<double>();
    if (v.is_string()) {
        // rational "p/q"
        std::string s = v.get<std::string>();
        auto slash = s.find('/');
        try {
            if (slash == std::string::npos) return std::stod(s);
            double num = std::stod(s.substr(0, slash));
            double den = std::stod(s.substr(slash + 1));
            if (den == 0.0) throw input_error(where + ": zero denominator");
            return num / den;
        } catch (const Error&) {
            throw;
        } catch (...) {
            throw input_error(where + ": cannot parse weight '" + s + "'");
        }
    }
    throw input_error(where + ": weight must be a number or rational string");
}

} // namespace

Structure structure_from_json(const nlohmann::json& j, const std::string& where) {
    if (!j.is_object()) throw input_error(where + ": expected an object");
    if (!j.contains("n") || !j.at("n").is_number_integer())
        throw input_error(where + ".n: missing or not an integer");
    auto n = j.at("n").get<long long>();
    if (n <= 0) throw input_error(where + ".n: must be positive");

    std::vector<double> weights;
    if (!j.contains("weights") || (j.at("weights").is_string() &&
                                   j.at("weights").get<std::string>() == "uniform")) {
        weights.assign(static_cast<std::size_t>(n), 1.0 / static_cast<double>(n));
    } else if (j.at("weights").is_array()) {
        const auto& arr = j.at("weights");
        if (static_cast<long long>(arr.size()) != n)
            throw input_error(where + ".weights: expected " + std::to_string(n) + " entries, got " +
                              std::to_string(arr.size()));
        for (std::size_t i = 0; i < arr.size(); ++i)
            weights.push_back(
                weight_entry(arr[i], where + ".weights[" + std::to_string(i) + "]"));
    } else {
        throw input_error(where + ".weights: expected an array or \"uniform\"");
    }

    std::set<std::string> marks;
    if (j.contains("marks")) {
        if (!j.at("marks").is_array()) throw input_error(where + ".marks: expected an array");
        for (const auto& m : j.at("marks")) marks.insert(m.get<std::string>());
    }

    std::vector<Relation> rels;
    if (j.contains("relations")) {
        if (!j.at("relations").is_object())
            throw input_error(where + ".relations: expected an object");
        for (const auto& [name, body] : j.at("relations").items()) {
            std::string loc = where + ".relations." + name;
            if (!body.contains("arity") || !body.at("arity").is_number_integer())
                throw input_error(loc + ".arity: missing or not an integer");
            Relation r;
            r.name = name;
            r.arity = body.at("arity").get<int>();
            r.is_mark = marks.count(name) > 0;
            if (r.arity < 1) throw input_error(loc + ".arity: must be positive");
            if (r.is_mark && r.arity != 1)
                throw input_error(loc + ": mark relations must be unary");
            if (body.contains("tuples")) {
                if (!body.at("tuples").is_array())
                    throw input_error(loc + ".tuples: expected an array");
                const auto& ts = body.at("tuples");
                for (std::size_t ti = 0; ti < ts.size(); ++ti) {
                    std::string tloc = loc + ".tuples[" + std::to_string(ti) + "]";
                    if (!ts[ti].is_array() || static_cast<int>(ts[ti].size()) != r.arity)
                        throw input_error(tloc + ": expected an array of length " +
                                          std::to_string(r.arity));
                    std::vector<std::uint32_t> t;
                    for (std::size_t k = 0; k < ts[ti].size(); ++k) {
                        const auto& e = ts[ti][k];
                        if (!e.is_number_integer() || e.get<long long>() < 0)
                            throw input_error(tloc + "[" + std::to_string(k) +
                                              "]: expected a non-negative integer");
                        auto id = e.get<long long>();
                        if (id >= n)
                            throw input_error(tloc + "[" + std::to_string(k) + "] = " +
                                              std::to_string(id) + " out of range (n=" +
                                              std::to_string(n) + ")");
                        t.push_back(static_cast<std::uint32_t>(id));
                    }
                    r.tuples.push_back(std::move(t));
                }
            }
            rels.push_back(std::move(r));
        }
    }
    try {
        return Structure(static_cast<std::size_t>(n), std::move(weights), std::move(rels));
    } catch (const Error& e) {
        throw input_error(where + ": " + e.what());
    }
}

Structure load_structure_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw input_error("cannot open structure file '" + path + "'");
    nlohmann::json j;
    try {
        in >> j;
    } catch (const std::exception& e) {
        throw input_error(path + ": invalid JSON: " + e.what());
    }
    return structure_from_json(j, path);
}

nlohmann::json structure_to_json(const Structure& a) {
    nlohmann::json j;
    j["n"] = a.size();
    j["weights"] = a.weights();
    nlohmann::json rels = nlohmann::json::object();
    nlohmann::json marks = nlohmann::json::array();
    for (const Relation& r : a.relations()) {
        nlohmann::json rj;
        rj["arity"] = r.arity;
        auto tuples = r.tuples;
        std::sort(tuples.begin(), tuples.end());
        rj["tuples"] = tuples;
        rels[r.name] = rj;
        if (r.is_mark) marks.push_back(r.name);
    }
    j["relations"] = rels;
    if (!marks.empty()) j["marks"] = marks;
    return j;
}

void save_structure_file(const Structure& a, const std::string& path) {
    write_json_file(path, structure_to_json(a));
}

StructureSequence load_manifest(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw input_error("cannot open manifest '" + path + "'");
    nlohmann::json j;
    try {
        in >> j;
    } catch (const std::exception& e) {
        throw input_error(path + ": invalid JSON: " + e.what());
    }
    if (j.is_array()) {
        std::vector<std::string> files = j.get<std::vector<std::string>>();
        if (files.empty()) throw input_error(path + ": empty manifest");
        return StructureSequence(1, static_cast<int>(files.size()), [files](int n) {
            return load_structure_file(files[static_cast<std::size_t>(n - 1)]);
        });
    }
    if (!j.is_object()) throw input_error(path + ": expected an array or object");
    if (j.contains("generator")) {
        std::string family = j.at("generator").get<std::string>();
        nlohmann::json params =
            j.contains("params") ? j.at("params") : nlohmann::json::object();
        if (!j.contains("range") || !j.at("range").is_array() || j.at("range").size() != 2)
            throw input_error(path + ": generator manifest needs \"range\": [n0, n1]");
        int n0 = j.at("range")[0].get<int>();
        int n1 = j.at("range")[1].get<int>();
        return generator_sequence(family, params, n0, n1);
    }
    if (j.contains("files")) {
        std::vector<std::string> files = j.at("files").get<std::vector<std::string>>();
        if (files.empty()) throw input_error(path + ": empty manifest");
        int n0 = j.contains("first_index") ? j.at("first_index").get<int>() : 1;
        return StructureSequence(n0, n0 + static_cast<int>(files.size()) - 1, [files, n0](int n) {
            return load_structure_file(files[static_cast<std::size_t>(n - n0)]);
        });
    }
    throw input_error(path + ": manifest needs \"generator\" or \"files\"");
}

SubsetSequence load_subsets(const std::string& path, const StructureSequence& s) {
    std::ifstream in(path);
    if (!in) throw input_error("cannot open subset file '" + path + "'");
    nlohmann::json j;
    try {
        in >> j;
    } catch (const std::exception& e) {
        throw input_error(path + ": invalid JSON: " + e.what());
    }
    if (!j.contains("range") || !j.at("range").is_array() || j.at("range").size() != 2)
        throw input_error(path + ": subset file needs \"range\": [n0, n1]");
    int n0 = j.at("range")[0].get<int>();
    int n1 = j.at("range")[1].get<int>();
    if (n0 != s.first() || n1 != s.last())
        throw input_error(path + ": subset range misaligned with the structure sequence");
    auto sets = j.at("sets").get<std::vector<std::vector<std::uint32_t>>>();
    if (static_cast<int>(sets.size()) != n1 - n0 + 1)
        throw input_error(path + ": expected " + std::to_string(n1 - n0 + 1) + " subsets");
    return SubsetSequence(n0, n1, [sets, s, n0, path](int n) {
        StructurePtr a = s.at(n);
        const auto& ids = sets[static_cast<std::size_t>(n - n0)];
        for (auto id : ids)
            if (id >= a->size())
                throw input_error(path + ": vertex " + std::to_string(id) +
                                  " out of range at index " + std::to_string(n));
        return VertexSet::from_vector(a->size(), ids);
    });
}

void write_text_file(const std::string& path, const std::string& content) {
    std::ofstream out(path);
    if (!out) throw input_error("cannot write '" + path + "'");
    out << content;
}

std::string read_text_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw input_error("cannot read '" + path + "'");
    std::ostringstream os;
    os << in.rdbuf();
    return os.str();
}

void write_json_file(const std::string& path, const nlohmann::json& j) {
    std::ofstream out(path);
    if (!out) throw input_error("cannot write '" + path + "'");
    out << j.dump(2) << "\n";
}

} // namespace limclust
