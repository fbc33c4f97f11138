// Benchmark of the OpenMP kernels against their serial reference twins.
#include <chrono>
#include <cmath>
#include <cstdio>
#include <omp.h>

#include "limclust/evaluate.hpp"
#include "limclust/formula.hpp"
#include "limclust/generators.hpp"
#include "limclust/kernels.hpp"
#include "limclust/spectrum.hpp"

using namespace limclust;
namespace chrono = std::chrono;

namespace {

template <typename F>
double time_ms(F&& f, int reps) {
    auto t0 = chrono::high_resolution_clock::now();
    for (int r = 0; r < reps; ++r) f();
    auto t1 = chrono::high_resolution_clock::now();
    return chrono::duration<double, std::milli>(t1 - t0).count() / reps;
}

void row(const char* name, double serial_ms, double parallel_ms, const char* agreement) {
    std::printf("%-22s %10.2f ms %10.2f ms %8.2fx   %s\n", name, serial_ms, parallel_ms,
                serial_ms / parallel_ms, agreement);
}

const char* close_enough(double diff, double tol) {
    if (diff == 0.0) return "identical";
    return diff <= tol ? "equal within 1e-12" : "MISMATCH";
}

} // namespace

int main() {
    std::printf("threads: %d\n", omp_get_max_threads());
    std::printf("%-22s %13s %13s %9s\n", "kernel", "serial", "openmp", "speedup");

    // ball measures on a large expander
    {
        Structure g = random_regular_graph(20000, 3, 123);
        std::vector<double> a, b;
        double ts = time_ms([&] { a = kernels::serial::ball_measures(g, 6); }, 3);
        double tp = time_ms([&] { b = kernels::ball_measures(g, 6); }, 3);
        row("ball_measures", ts, tp, a == b ? "identical" : "MISMATCH");
    }

    // stone pairing of a radius-2 formula on a mid-size graph
    {
        Structure g = random_regular_graph(300, 3, 7);
        Formula f = Formula::parse("exists y in B[2](x1): adj(y,x2)");
        EvalContext ctx(g);
        double a = 0, b = 0;
        double ts = time_ms([&] {
            EvalContext c = ctx.fork();
            a = kernels::serial::pairing_sum(c, f);
        }, 3);
        double tp = time_ms([&] {
            EvalContext c = ctx.fork();
            b = kernels::pairing_sum(c, f);
        }, 3);
        row("pairing_sum", ts, tp, close_enough(std::abs(a - b), 1e-12));
    }

    // direct characteristic function on a dense grid
    {
        Structure g = random_regular_graph(2000, 3, 99);
        auto values = kernels::ball_measures(g, 4);
        std::vector<double> weights = g.weights();
        std::vector<double> grid(32768);
        for (std::size_t i = 0; i < grid.size(); ++i)
            grid[i] = -200.0 + 400.0 * static_cast<double>(i) / (grid.size() - 1);
        std::vector<std::complex<double>> a, b;
        double ts = time_ms([&] { a = kernels::serial::char_direct(values, weights, grid); }, 1);
        double tp = time_ms([&] { b = kernels::char_direct(values, weights, grid); }, 1);
        // the serial twin uses std::exp; compare within float tolerance
        double diff = 0.0;
        for (std::size_t i = 0; i < a.size() && i < b.size(); ++i)
            diff = std::max(diff, std::abs(a[i] - b[i]));
        row("char_direct", ts, tp, close_enough(diff, 1e-12));
    }

    // exhaustive subset expansion scan
    {
        Structure g = random_regular_graph(16, 3, 41);
        kernels::SubsetScan a, b;
        double ts = time_ms([&] { a = kernels::serial::expansion_scan(g, 2, 0.1, true, 0.9, true); }, 3);
        double tp = time_ms([&] { b = kernels::expansion_scan(g, 2, 0.1, true, 0.9, true); }, 3);
        bool same = a.best == b.best && a.witness == b.witness && a.found == b.found;
        row("expansion_scan", ts, tp, same ? "identical" : "MISMATCH");
    }
    return 0;
}
