#pragma once

#include <functional>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include "limclust/config.hpp"
#include "limclust/formula.hpp"
#include "limclust/structure.hpp"

namespace limclust {

// Lazily indexed family of structures over [n0, n1]; the provider must be
// deterministic per index and safe to call from multiple workers.
class StructureSequence {
public:
    StructureSequence() = default;
    StructureSequence(int n0, int n1, std::function<Structure(int)> provider);

    int first() const { return n0_; }
    int last() const { return n1_; }
    int count() const { return n1_ - n0_ + 1; }
    StructurePtr at(int n) const;

private:
    int n0_ = 0, n1_ = -1;
    std::function<Structure(int)> provider_;
    struct Cache {
        std::mutex mu;
        std::vector<StructurePtr> slots;
    };
    std::shared_ptr<Cache> cache_;
};

// Per-index vertex subsets aligned with a structure sequence.
class SubsetSequence {
public:
    SubsetSequence() = default;
    SubsetSequence(int n0, int n1, std::function<VertexSet(int)> provider);

    int first() const { return n0_; }
    int last() const { return n1_; }
    VertexSet at(int n) const;

    static SubsetSequence empty_like(const StructureSequence& s);
    static SubsetSequence full_like(const StructureSequence& s);
    SubsetSequence complement_in(const StructureSequence& s) const;
    SubsetSequence set_union(const SubsetSequence& o) const;
    SubsetSequence set_difference(const SubsetSequence& o) const;
    SubsetSequence symmetric_difference(const SubsetSequence& o) const;

private:
    int n0_ = 0, n1_ = -1;
    std::function<VertexSet(int)> provider_;
    struct Cache {
        std::mutex mu;
        std::vector<std::optional<VertexSet>> slots;
    };
    std::shared_ptr<Cache> cache_;
};

void require_aligned(const StructureSequence& s, const SubsetSequence& x);

// Indices of the tail window (last ceil(fraction * count) indices).
std::vector<int> tail_indices(int n0, int n1, double fraction);

// ---- negligibility -------------------------------------------------------------

// Table of nu(ball^d(X_n)) over (n, d <= dmax) with tail suprema; the
// sequence is negligible-at-scale when every tail supremum is below tol.
struct NegligibleProfile {
    int n0 = 0, n1 = 0, dmax = 0;
    double tol = 0.0, window_fraction = 0.0;
    std::vector<std::vector<double>> table; // [d][n - n0]
    std::vector<double> tail_sup;           // per d
    bool negligible = false;

    nlohmann::json to_json() const;
    std::string to_csv() const;
};

NegligibleProfile negligible_profile(const StructureSequence& s, const SubsetSequence& x,
                                     int dmax, double tol, double window_fraction);

// Lemma bound |<phi,A> - <phi,A-X>| < 2 p eps for (d,eps)-negligible X and
// r(phi) < d; optionally also the fragmentation sum bound.
struct NegligibleBoundReport {
    bool precondition_ok = false;
    std::string precondition_note;
    double ball_measure = 0.0;
    int d = 0;
    double eps = 0.0;
    int p = 0;
    double pairing_full = 0.0, pairing_removed = 0.0;
    double difference = 0.0, bound = 0.0;
    bool bound_holds = false;
    bool has_fragmentation = false;
    double fragmentation_sum = 0.0, fragmentation_difference = 0.0;
    bool fragmentation_bound_holds = false;
    std::string fragmentation_note;

    nlohmann::json to_json() const;
};

NegligibleBoundReport check_negligible_bound(
    const Structure& a, const VertexSet& x, const Formula& phi, int d, double eps,
    const std::optional<std::vector<VertexSet>>& fragmentation_parts = std::nullopt);

// ---- convergence diagnostics -----------------------------------------------------

// Finite surrogate of local convergence over a formula battery: per-index
// pairings, tail oscillation (max - min over the window), and the
// last-window mean as the limit estimate.
struct ConvergenceDiagnostic {
    std::vector<std::string> formula_names;
    std::vector<std::vector<double>> values; // [formula][n - n0]
    std::vector<double> osc;                 // per formula, over the tail window
    std::vector<double> limit;               // tail mean per formula
    double max_osc = 0.0;
    int n0 = 0, n1 = 0;
    double window_fraction = 0.0;

    bool converged(double tol) const { return max_osc < tol; }
    nlohmann::json to_json() const;
};

ConvergenceDiagnostic convergence_diagnostic(const StructureSequence& s,
                                             const std::vector<Formula>& battery,
                                             double window_fraction);

// Battery of strongly local formulas over the signature plus the mark `M`.
std::vector<Formula> default_battery(const Signature& sig, const std::string& mark = "M");
// Replaces every `mark` atom by the constant.
Formula substitute_mark(const Formula& phi, const std::string& mark, bool value);

// ---- clusters ------------------------------------------------------------------

enum class Verdict { Pass, Fail, Inconclusive };
const char* verdict_name(Verdict v);

struct ClusterCheck {
    Verdict verdict = Verdict::Inconclusive;
    bool negligible_case = false; // X ~ 0 route
    NegligibleProfile boundary;
    ConvergenceDiagnostic lift;
    bool measure_converges = false;
    double measure_limit = 0.0, measure_osc = 0.0;
    std::optional<ConvergenceDiagnostic> induced;
    std::vector<std::string> notes;

    nlohmann::json to_json() const;
};

ClusterCheck is_cluster(const StructureSequence& s, const SubsetSequence& x,
                        const std::vector<Formula>& battery, int dmax, double tol,
                        double window_fraction);

struct InterweavingVerdict {
    bool interweaving = false;
    double measure_diff = 0.0;
    double max_stat_diff = 0.0;
    std::vector<std::string> notes;

    nlohmann::json to_json() const;
};

// Pre: both sequences pass is_cluster (input error otherwise).
InterweavingVerdict interweaving(const StructureSequence& s, const SubsetSequence& x,
                                 const SubsetSequence& y, const std::vector<Formula>& battery,
                                 int dmax, double tol, double window_fraction);

// ---- wrapping -------------------------------------------------------------------

struct WrapResult {
    SubsetSequence wrapped;
    std::vector<int> radius_schedule; // D(n), truncated to the available indices
    nlohmann::json to_json() const;
};

// Grows a pre-cluster into its enclosing cluster with radii
// D(n) = sup{ d : nu(ball^{2d+1}(X_n') \ X_n') < 1/d for all available n' >= n }.
WrapResult wrap(const StructureSequence& s, const SubsetSequence& x,
                const std::vector<Formula>& battery, const Config& cfg);

// ---- expansion ----------------------------------------------------------------------

struct ExpansionReport {
    double delta_hat = 0.0; // inf nu(ball^d(X)\X)/nu(X) over eps < nu(X) < 1-eps
    VertexSet witness;
    bool exact = false;
    std::uint64_t subsets_considered = 0;
    std::optional<double> h_out; // magnification (d=1, nu(X) <= 1/2); exact mode only

    nlohmann::json to_json() const;
};

enum class ScanMode { Exact, Auto };

ExpansionReport expansion_check(const Structure& a, int d, double eps, const Config& cfg,
                                ScanMode mode = ScanMode::Auto);

// Exact magnification h_out = inf |ball(X)\X| / |X| over 0 < |X| <= n/2
// (uniform measure; exact subset enumeration).
double h_out(const Structure& a, const Config& cfg);

// Deletes a small set so the remainder expands at half measure
// (greedy union of violating subsets, verified exhaustively for n <= 16).
VertexSet clean_expander(const Structure& a, int d, double eps, double delta, const Config& cfg);

// ---- dispersion / classification ------------------------------------------------------

struct DispersionProfile {
    int n0 = 0, n1 = 0, dmax = 0;
    std::vector<std::vector<double>> table; // [d-1][n - n0]: max_v nu_{A[X]}(ball^d(v))
    nlohmann::json to_json() const;
    std::string to_csv() const;
};

DispersionProfile dispersion_profile(const StructureSequence& s, const SubsetSequence& x,
                                     int dmax, double window_fraction);

enum class ClusterClass { Globular, Open, Residual, Inconclusive };
const char* cluster_class_name(ClusterClass c);

struct ClassifyResult {
    ClusterClass cls = ClusterClass::Inconclusive;
    DispersionProfile profile;
    std::optional<ExpansionReport> expansion; // consulted for open-vs-residual
    std::vector<std::string> notes;
    nlohmann::json to_json() const;
};

ClassifyResult classify(const StructureSequence& s, const SubsetSequence& x, const Config& cfg);

} // namespace limclust
