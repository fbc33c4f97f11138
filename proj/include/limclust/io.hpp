#pragma once

#include <string>

#include <json.hpp>

#include "limclust/sequences.hpp"
#include "limclust/structure.hpp"

namespace limclust {

// Structure file format:
//   { "n": int,
//     "weights": [..] | "uniform",      (entries numeric or rational "p/q")
//     "relations": { name: { "arity": k, "tuples": [[..], ..] } },
//     "marks": [name, ..] }             (optional; unary relations used as marks)
// The loader validates every invariant and reports the first violation with
// its location.
Structure structure_from_json(const nlohmann::json& j, const std::string& where = "structure");
Structure load_structure_file(const std::string& path);
nlohmann::json structure_to_json(const Structure& a);
void save_structure_file(const Structure& a, const std::string& path);

// Sequence manifest: either a JSON array of structure file paths (index n0
// defaults to 1), or { "generator": name, "params": {..}, "range": [n0,n1] },
// or { "files": [..], "first_index": n0 }.
StructureSequence load_manifest(const std::string& path);

// Subset-sequence file: { "range": [n0,n1], "sets": [[vertex ids], ..] }.
SubsetSequence load_subsets(const std::string& path, const StructureSequence& s);

void write_text_file(const std::string& path, const std::string& content);
std::string read_text_file(const std::string& path);
void write_json_file(const std::string& path, const nlohmann::json& j);

} // namespace limclust
