#pragma once

#include <complex>
#include <cstdint>
#include <vector>

#include "limclust/evaluate.hpp"
#include "limclust/structure.hpp"

namespace limclust {

// Worker count for the OpenMP kernels; 0 means the OpenMP default.
int parallelism();
void set_parallelism(int threads);

// Data-parallel inner loops. Each kernel has a serial reference twin under
// kernels::serial, written independently and kept for tests and the
// benchmark. Parallel results are bit-identical to the serial ones: partial
// results land in per-element slots and reductions run serially in fixed
// order.
namespace kernels {

// nu(ball^d(v)) for every vertex v.
std::vector<double> ball_measures(const Structure& a, int d);

// Stone pairing by weighted tuple enumeration, fanned out over the first
// variable.
double pairing_sum(EvalContext& ctx, const Formula& phi);

// Local Stone pairing with x1 pinned to v (serial; the per-vertex fan-out
// happens one level up).
double local_pairing_sum(EvalContext& ctx, const Formula& phi, std::uint32_t v);

// Exponential sum sum_j w_j e^{i t x_j} tabulated on a t-grid.
std::vector<std::complex<double>> char_direct(const std::vector<double>& values,
                                              const std::vector<double>& weights,
                                              const std::vector<double>& tgrid);

// Exhaustive subset scan minimizing nu(ball^d(X) \ X) / nu(X) over subsets
// whose measure lies in the window. Ties break toward the lexicographically
// smallest vertex set. Requires n <= 24.
struct SubsetScan {
    bool found = false;
    double best = 0.0;
    std::uint64_t witness = 0;
    std::uint64_t considered = 0;
};
SubsetScan expansion_scan(const Structure& a, int d, double lo, bool lo_strict, double hi,
                          bool hi_strict);

// True when mask `a` denotes a lexicographically smaller vertex set than `b`.
bool mask_lex_less(std::uint64_t a, std::uint64_t b);

namespace serial {
std::vector<double> ball_measures(const Structure& a, int d);
double pairing_sum(EvalContext& ctx, const Formula& phi);
std::vector<std::complex<double>> char_direct(const std::vector<double>& values,
                                              const std::vector<double>& weights,
                                              const std::vector<double>& tgrid);
SubsetScan expansion_scan(const Structure& a, int d, double lo, bool lo_strict, double hi,
                          bool hi_strict);
} // namespace serial

} // namespace kernels
} // namespace limclust
