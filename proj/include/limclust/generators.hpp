#pragma once

#include <map>
#include <string>
#include <vector>

#include "limclust/sequences.hpp"
#include "limclust/structure.hpp"

namespace limclust {

// Declared ground truth shipped with every generated structure: the limit
// spectrum and the per-vertex cluster membership.
struct GenAtom {
    double lambda = 0.0;
    double mass = 0.0;
    int count = 0;
};

struct GroundTruth {
    std::vector<GenAtom> atoms; // lambda strictly decreasing
    double residual_mass = 0.0; // spectral mass outside the listed atoms
    std::vector<int> labels;    // per vertex: cluster id >= 0, or -1 for residual
    std::map<std::string, std::vector<std::uint32_t>> named_subsets;
    std::string description;
};

struct GeneratedStructure {
    Structure structure;
    GroundTruth truth;
};

struct FamilyInfo {
    std::string name;
    std::string params_doc;
    std::string truth_doc;
};

// Registry of the deterministic synthetic families.
std::vector<FamilyInfo> families();

// Same (family, params, n) always yields the identical structure.
GeneratedStructure generate(const std::string& family, const nlohmann::json& params, int n);

StructureSequence generator_sequence(const std::string& family, const nlohmann::json& params,
                                     int n0, int n1);

// Per-index vertex set of the true cluster with the given id.
SubsetSequence truth_cluster_subsets(const std::string& family, const nlohmann::json& params,
                                     int n0, int n1, int cluster_id);

// All true-cluster subset sequences at once, sharing one generation pass per
// index (cluster count taken at the final index).
std::vector<SubsetSequence> truth_all_cluster_subsets(const std::string& family,
                                                      const nlohmann::json& params, int n0,
                                                      int n1);

// Per-index named subset (e.g. "path", "path-middle" for linked-cliques).
SubsetSequence truth_named_subsets(const std::string& family, const nlohmann::json& params,
                                   int n0, int n1, const std::string& name);

// Number of true clusters at the final index.
int truth_cluster_count(const std::string& family, const nlohmann::json& params, int n);

// Seeded configuration-model d-regular graph (multi-edges and loops rejected
// by reshuffling); n * degree must be even.
Structure random_regular_graph(int n, int degree, unsigned seed);

} // namespace limclust
