#pragma once

#include <complex>
#include <optional>
#include <string>
#include <vector>

#include "limclust/config.hpp"
#include "limclust/formula.hpp"
#include "limclust/sequences.hpp"
#include "limclust/structure.hpp"

namespace limclust {

// Right-continuous step CDF over weighted samples.
class EmpiricalCDF {
public:
    EmpiricalCDF() = default;
    EmpiricalCDF(std::vector<double> values, std::vector<double> weights);

    double operator()(double t) const; // total weight of samples <= t
    double total_weight() const;
    const std::vector<std::pair<double, double>>& points() const { return points_; }

    // Point masses after merging values closer than merge_radius
    // (single-linkage on the sorted values); returns (location, mass) with
    // location the weighted mean of the merged group.
    std::vector<std::pair<double, double>> atoms(double merge_radius) const;

    std::string to_csv() const; // t, F(t) rows at the jump points

private:
    std::vector<std::pair<double, double>> points_; // sorted (value, weight)
    std::vector<double> cum_;
};

// Distribution of D_{d}(v) = nu(ball^d(v)) for v ~ nu.
EmpiricalCDF ball_measure_distribution(const Structure& a, int d);

// m_w = E_v[D_d(v)^w] for w = 0..W; equals the Stone pairing of
// psi_{d,w}(x1..x_{w+1}) = AND_i dist(x1,x_i) <= d.
struct MomentTable {
    int d = 0;
    std::vector<double> m; // index w
    nlohmann::json to_json() const;
};

MomentTable moment_table(const Structure& a, int d, int W);

Formula psi_formula(int d, int w); // the moment formula psi_{d,w}

// Characteristic function tabulated on a symmetric uniform grid.
struct CharacteristicFunction {
    std::vector<double> t;
    std::vector<std::complex<double>> value;
    double T = 0.0;
    enum class Path { Moments, Direct } path = Path::Direct;
    double truncation_bound = 0.0; // moment path only
    bool truncation_ok = true;     // false flags silently-lossy output

    nlohmann::json to_json() const;
};

// Truncated series sum_{w<=W} m_w (it)^w / w!; reports the Taylor tail bound
// T^{W+1}/(W+1)! and flags the result when the bound exceeds tol.
CharacteristicFunction characteristic_function(const MomentTable& m, double T, int points,
                                               double tol = 1e-6);

// Oracle path: exact exponential sum over the empirical distribution.
CharacteristicFunction characteristic_function_direct(const EmpiricalCDF& cdf, double T,
                                                      int points);

// Levy atom mass: trapezoid quadrature of (1/2T) integral e^{-ita} gamma(t) dt.
// The imaginary residue is a numeric diagnostic. Rejects grids coarser than
// pi / (4 * max_support).
double atom_mass(const CharacteristicFunction& gamma, double a, double T,
                 double* imag_residue = nullptr, double max_support = 1.0);

// ---- spectrum detection ------------------------------------------------------

struct SpectrumAtom {
    double lambda = 0.0;  // atom location
    double mass = 0.0;    // p(lambda)
    int count = 0;        // N = round(mass / lambda)
    double residue = 0.0; // |mass/lambda - count|
    double inversion_mass = 0.0; // Levy cross-check
};

struct SpectrumReport {
    std::vector<SpectrumAtom> atoms; // lambda strictly decreasing
    double lambda0 = 1.0;            // residual mass 1 - sum N_i lambda_i
    std::vector<double> continuity_grid;
    std::vector<int> d_schedule;
    int n0 = 0, n1 = 0;
    double window_fraction = 0.0, tol = 0.0, merge_radius = 0.0, lambda_min = 0.0;
    std::vector<std::string> warnings;
    nlohmann::json config_echo;

    nlohmann::json to_json() const;
};

// Estimates the limit atom set from the tail-window empirical CDFs across
// the d-schedule; enforces mass >= lambda - tol, rounds counts to integers,
// and cross-checks each mass by Levy inversion on the direct path.
SpectrumReport detect_spectrum(const StructureSequence& s, const Config& cfg);

// ---- 1-point random lift ---------------------------------------------------------

// Law of the local-pairing vector (<phi_1,A>_v, ..., <phi_k,A>_v) for v ~ nu.
struct LiftDistribution {
    std::vector<std::vector<double>> points;
    std::vector<double> weights;
    nlohmann::json to_json() const;
};

LiftDistribution random_lift_distribution(const Structure& a, const std::vector<Formula>& battery);

// Box metric with per-coordinate 1/eps cutoff: inf over scales m of
// max(1/m, max box-mass difference at side 1/m); identical distributions
// give exactly 0.
double lift_distance(const LiftDistribution& a, const LiftDistribution& b, int max_scale = 256);

} // namespace limclust
