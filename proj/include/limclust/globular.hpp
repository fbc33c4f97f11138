#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "limclust/config.hpp"
#include "limclust/sequences.hpp"
#include "limclust/spectrum.hpp"
#include "limclust/structure.hpp"

namespace limclust {

// Shared per-(index, radius) ball-measure tables.
class BallMeasureCache {
public:
    explicit BallMeasureCache(const StructureSequence& s) : s_(&s) {}
    const std::vector<double>& get(int n, int d);
    const StructureSequence& sequence() const { return *s_; }

private:
    const StructureSequence* s_;
    std::map<std::pair<int, int>, std::vector<double>> cache_;
};

// Per-atom schedule: dyadic tolerances eps_z = 2^-z from z0 = ceil(5 - 2 log2 lambda),
// continuity brackets alpha_z < lambda < beta_z, stabilization radii delta_z
// and index thresholds eta_z.
struct AtomSchedule {
    double lambda = 0.0;
    double mass = 0.0;
    int count = 0;
    int z0 = 0;
    int z_hi = -1;              // deepest feasible level; z_hi < z0 means none
    std::vector<double> alpha;  // indexed z - z0
    std::vector<double> beta;
    std::vector<int> delta;
    std::vector<int> eta;
    int stable_index = 0; // center counts asserted from this index on
    std::vector<std::string> log;

    int level_at(int n) const; // largest z with eta_z <= n, or z0-1
    double eps(int z) const { return std::pow(2.0, -z); }
    nlohmann::json to_json() const;
};

struct Schedule {
    std::vector<AtomSchedule> atoms; // lambda descending, aligned with the report
    std::vector<std::string> warnings;
    nlohmann::json to_json() const;
};

Schedule build_schedule(const SpectrumReport& report, const StructureSequence& s,
                        const Config& cfg);

// z0(lambda) = ceil(5 - 2 log2 lambda).
int schedule_z0(double lambda);

// Vertex filter (Z1): D_{8 delta_z}(v) <= beta_z and (Z2): D_{delta_z'}(v) > alpha_z'
// for all z' in [z0, z]; empty below eta_z.
VertexSet build_Z(BallMeasureCache& cache, int n, const AtomSchedule& atom, int z);

// Greedy maximal subset of Z with pairwise distance >= min_distance,
// scanning vertices in ascending id.
VertexSet build_centers(const Structure& a, const VertexSet& z_set, int min_distance);

// ---- clustering result ------------------------------------------------------------

struct MarkInfo {
    enum class Kind { Globular, Residual, Separator } kind = Kind::Residual;
    int atom = 0;   // i (1-based rank of lambda)
    int group = 0;  // j: interweaving group (battery-relative)
    int member = 0; // k: member within the group
    double lambda = 0.0;
    std::string name() const;
};

struct LemmaRecord {
    std::string lemma; // "ZC", "disjC", "measC", "bordC", "centers", "clip1", "stable"
    int index = 0;
    int atom = -1;
    bool applicable = true;
    bool holds = true;
    std::string detail;
    nlohmann::json to_json() const;
};

struct AtomIndexData {
    int z = -1; // active level, -1 when inactive
    std::vector<std::uint32_t> centers;
    double c_measure = 0.0;
    std::size_t c_size = 0;
};

struct IndexClustering {
    int n = 0;
    std::vector<int> labels; // mark-table id per vertex
    std::vector<AtomIndexData> per_atom;
    double separator_measure = 0.0;
    double residual_measure = 0.0;
};

struct ClusteringResult {
    std::vector<MarkInfo> marks;
    std::vector<IndexClustering> indices;
    Schedule schedule;
    std::vector<LemmaRecord> records;
    std::string status = "ok"; // "diagnostic" when a verified lemma fails
    std::vector<std::string> violations;
    nlohmann::json config_echo;

    // clip-comb extras (empty for assemble_clustering)
    std::vector<int> clip_F, clip_G;
    std::vector<double> clip_lambda;
    double clip_lambda0 = 0.0;

    int mark_id(MarkInfo::Kind kind, int atom = 0, int group = 0, int member = 0) const;
    VertexSet mark_set(int index, int mark) const;
    nlohmann::json to_json() const;
};

// The spectrum-driven construction: Z/S/C sets per atom, separator W,
// residual R, and globular marks split per interweaving group. Every lemma
// check is recorded; failures downgrade the status to "diagnostic".
ClusteringResult assemble_clustering(const StructureSequence& s, const SpectrumReport& report,
                                     const Schedule& sched, const std::vector<Formula>& battery,
                                     const Config& cfg);

// Countably many disjoint clusters combed by a clip: marks cluster i from the
// index where the clip reaches it, keeping the partition stable. Requires
// strongly disjoint clusters; almost-disjoint inputs fall back to the
// Z^i = C^i \ union ball(C^j) reduction.
ClusteringResult clip_comb(const StructureSequence& s, const std::vector<SubsetSequence>& clusters,
                           const Config& cfg);

struct MatchReport {
    bool matched = false;
    int atom = 0, group = 0;
    std::vector<int> member_per_index;
    std::optional<NegligibleProfile> diff_profile;
    std::vector<std::string> notes;
    nlohmann::json to_json() const;
};

// Finds (i, j) and per-index members whose union differs from X by a
// negligible-at-scale sequence.
MatchReport characterize_globular(const StructureSequence& s, const SubsetSequence& x,
                                  const ClusteringResult& result, const Config& cfg);

// Re-export with the clustering marks added as unary relations.
Structure marked_structure(const ClusteringResult& result, const StructureSequence& s, int n);

} // namespace limclust
