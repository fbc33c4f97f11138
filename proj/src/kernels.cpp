#include "limclust/kernels.hpp"

#include <atomic>
#include <cmath>
#include <omp.h>

namespace limclust {

namespace {
std::atomic<int> g_parallelism{0};

int worker_count() {
    int k = g_parallelism.load();
    return k > 0 ? k : omp_get_max_threads();
}
} // namespace

int parallelism() { return g_parallelism.load(); }
void set_parallelism(int threads) { g_parallelism.store(threads < 0 ? 0 : threads); }

namespace kernels {

// ---- per-vertex ball measures ------------------------------------------------

std::vector<double> ball_measures(const Structure& a, int d) {
    const std::size_t n = a.size();
    std::vector<double> out(n, 0.0);
    const int threads = worker_count();
#pragma omp parallel num_threads(threads)
    {
        std::vector<int> stamp(n, -1);
        std::vector<std::uint32_t> frontier, next;
#pragma omp for schedule(dynamic, 64)
        for (std::int64_t vi = 0; vi < static_cast<std::int64_t>(n); ++vi) {
            auto v = static_cast<std::uint32_t>(vi);
            double sum = a.weight(v);
            stamp[v] = static_cast<int>(vi);
            frontier.assign(1, v);
            for (int step = 0; step < d && !frontier.empty(); ++step) {
                next.clear();
                for (std::uint32_t u : frontier) {
                    for (std::uint32_t w : a.neighbors(u)) {
                        if (stamp[w] != static_cast<int>(vi)) {
                            stamp[w] = static_cast<int>(vi);
                            sum += a.weight(w);
                            next.push_back(w);
                        }
                    }
                }
                frontier.swap(next);
            }
            out[vi] = sum;
        }
    }
    return out;
}

std::vector<double> serial::ball_measures(const Structure& a, int d) {
    std::vector<double> out(a.size());
    for (std::uint32_t v = 0; v < a.size(); ++v) out[v] = a.measure(a.ball(v, d));
    return out;
}

// ---- stone pairing -------------------------------------------------------------

double pairing_sum(EvalContext& ctx, const Formula& phi) {
    const Structure& a = ctx.structure();
    const std::size_t n = a.size();
    const int p = phi.free_count();
    if (p == 0) {
        std::vector<std::uint32_t> asg(assignment_size(phi), 0);
        EvalContext local = ctx.fork();
        return evaluate(phi, local, asg) ? 1.0 : 0.0;
    }
    std::vector<double> partial(n, 0.0);
    const int threads = worker_count();
#pragma omp parallel num_threads(threads)
    {
        EvalContext local = ctx.fork();
        std::vector<std::uint32_t> asg(assignment_size(phi), 0);
        // iterative odometer over slots 1..p-1
#pragma omp for schedule(dynamic, 1)
        for (std::int64_t v1 = 0; v1 < static_cast<std::int64_t>(n); ++v1) {
            double w1 = a.weight(static_cast<std::uint32_t>(v1));
            if (w1 == 0.0) continue;
            asg[0] = static_cast<std::uint32_t>(v1);
            double sum = 0.0;
            if (p == 1) {
                sum = evaluate(phi, local, asg) ? 1.0 : 0.0;
            } else {
                std::vector<std::uint32_t> tuple(p - 1, 0);
                while (true) {
                    double prod = 1.0;
                    for (int i = 0; i < p - 1; ++i) {
                        asg[i + 1] = tuple[i];
                        prod *= a.weight(tuple[i]);
                    }
                    if (prod > 0.0 && evaluate(phi, local, asg)) sum += prod;
                    int i = p - 2;
                    while (i >= 0 && tuple[i] + 1 == n) tuple[i--] = 0;
                    if (i < 0) break;
                    ++tuple[i];
                }
            }
            partial[v1] = w1 * sum;
        }
    }
    double total = 0.0;
    for (double x : partial) total += x;
    return total;
}

double local_pairing_sum(EvalContext& ctx, const Formula& phi, std::uint32_t v) {
    const Structure& a = ctx.structure();
    const std::size_t n = a.size();
    const int p = phi.free_count();
    std::vector<std::uint32_t> asg(assignment_size(phi), 0);
    asg[0] = v;
    if (p == 1) return evaluate(phi, ctx, asg) ? 1.0 : 0.0;
    double sum = 0.0;
    std::vector<std::uint32_t> tuple(p - 1, 0);
    while (true) {
        double prod = 1.0;
        for (int i = 0; i < p - 1; ++i) {
            asg[i + 1] = tuple[i];
            prod *= a.weight(tuple[i]);
        }
        if (prod > 0.0 && evaluate(phi, ctx, asg)) sum += prod;
        int i = p - 2;
        while (i >= 0 && tuple[i] + 1 == n) tuple[i--] = 0;
        if (i < 0) break;
        ++tuple[i];
    }
    return sum;
}

double serial::pairing_sum(EvalContext& ctx, const Formula& phi) {
    const Structure& a = ctx.structure();
    const std::size_t n = a.size();
    const int p = phi.free_count();
    std::vector<std::uint32_t> asg(assignment_size(phi), 0);
    if (p == 0) return evaluate(phi, ctx, asg) ? 1.0 : 0.0;
    std::vector<std::uint32_t> tuple(p, 0);
    double sum = 0.0;
    while (true) {
        double prod = 1.0;
        for (int i = 0; i < p; ++i) {
            asg[i] = tuple[i];
            prod *= a.weight(tuple[i]);
        }
        if (prod > 0.0 && evaluate(phi, ctx, asg)) sum += prod;
        int i = p - 1;
        while (i >= 0 && tuple[i] + 1 == n) tuple[i--] = 0;
        if (i < 0) break;
        ++tuple[i];
    }
    return sum;
}

// ---- direct characteristic function ---------------------------------------------

std::vector<std::complex<double>> char_direct(const std::vector<double>& values,
                                              const std::vector<double>& weights,
                                              const std::vector<double>& tgrid) {
    if (values.size() != weights.size()) throw input_error("value/weight size mismatch");
    std::vector<std::complex<double>> out(tgrid.size());
    const int threads = worker_count();
#pragma omp parallel for schedule(static) num_threads(threads)
    for (std::int64_t ti = 0; ti < static_cast<std::int64_t>(tgrid.size()); ++ti) {
        double re = 0.0, im = 0.0;
        double t = tgrid[ti];
        for (std::size_t j = 0; j < values.size(); ++j) {
            re += weights[j] * std::cos(t * values[j]);
            im += weights[j] * std::sin(t * values[j]);
        }
        out[ti] = {re, im};
    }
    return out;
}

std::vector<std::complex<double>> serial::char_direct(const std::vector<double>& values,
                                                      const std::vector<double>& weights,
                                                      const std::vector<double>& tgrid) {
    if (values.size() != weights.size()) throw input_error("value/weight size mismatch");
    std::vector<std::complex<double>> out(tgrid.size());
    for (std::size_t ti = 0; ti < tgrid.size(); ++ti) {
        std::complex<double> acc{0.0, 0.0};
        for (std::size_t j = 0; j < values.size(); ++j)
            acc += weights[j] * std::exp(std::complex<double>(0.0, tgrid[ti] * values[j]));
        out[ti] = acc;
    }
    return out;
}

// ---- exhaustive subset expansion scan ----------------------------------------------

bool mask_lex_less(std::uint64_t a, std::uint64_t b) {
    // smaller lowest differing vertex wins when it belongs to `a`
    std::uint64_t x = a ^ b;
    if (x == 0) return false;
    std::uint64_t low = x & (~x + 1);
    return (a & low) != 0;
}

namespace {

struct ScanState {
    bool found = false;
    double best = 0.0;
    std::uint64_t witness = 0;
    std::uint64_t considered = 0;

    void offer(double ratio, std::uint64_t mask) {
        ++considered;
        if (!found || ratio < best || (ratio == best && mask_lex_less(mask, witness))) {
            found = true;
            best = ratio;
            witness = mask;
        }
    }
    void merge(const ScanState& o) {
        considered += o.considered;
        if (!o.found) return;
        if (!found || o.best < best || (o.best == best && mask_lex_less(o.witness, witness))) {
            found = true;
            best = o.best;
            witness = o.witness;
        }
    }
};

double mask_ratio(const Structure& a, int d, std::uint64_t mask, double nu_x) {
    VertexSet x(a.size());
    for (std::uint32_t v = 0; v < a.size(); ++v)
        if (mask & (std::uint64_t{1} << v)) x.set(v);
    double grown = a.measure(a.ball(x, d));
    return (grown - nu_x) / nu_x;
}

} // namespace

SubsetScan expansion_scan(const Structure& a, int d, double lo, bool lo_strict, double hi,
                          bool hi_strict) {
    const std::size_t n = a.size();
    if (n > 24) throw input_error("exact subset scan refused for n > 24");
    const std::uint64_t total = (std::uint64_t{1} << n) - 1;
    const int threads = worker_count();
    std::vector<ScanState> states(static_cast<std::size_t>(threads));
#pragma omp parallel num_threads(threads)
    {
        int tid = omp_get_thread_num();
        ScanState st;
#pragma omp for schedule(static)
        for (std::int64_t m = 1; m <= static_cast<std::int64_t>(total); ++m) {
            auto mask = static_cast<std::uint64_t>(m);
            double nu_x = 0.0;
            for (std::uint64_t rest = mask; rest;) {
                std::uint32_t v = static_cast<std::uint32_t>(__builtin_ctzll(rest));
                nu_x += a.weight(v);
                rest &= rest - 1;
            }
            if (nu_x <= 0.0) continue;
            bool lo_ok = lo_strict ? nu_x > lo : nu_x >= lo;
            bool hi_ok = hi_strict ? nu_x < hi : nu_x <= hi;
            if (!lo_ok || !hi_ok) continue;
            st.offer(mask_ratio(a, d, mask, nu_x), mask);
        }
        states[static_cast<std::size_t>(tid)] = st;
    }
    SubsetScan out;
    ScanState acc;
    for (const auto& st : states) acc.merge(st);
    out.found = acc.found;
    out.best = acc.best;
    out.witness = acc.witness;
    out.considered = acc.considered;
    return out;
}

SubsetScan serial::expansion_scan(const Structure& a, int d, double lo, bool lo_strict, double hi,
                                  bool hi_strict) {
    const std::size_t n = a.size();
    if (n > 24) throw input_error("exact subset scan refused for n > 24");
    const std::uint64_t total = (std::uint64_t{1} << n) - 1;
    ScanState st;
    for (std::uint64_t mask = 1; mask <= total; ++mask) {
        double nu_x = 0.0;
        for (std::uint64_t rest = mask; rest;) {
            std::uint32_t v = static_cast<std::uint32_t>(__builtin_ctzll(rest));
            nu_x += a.weight(v);
            rest &= rest - 1;
        }
        if (nu_x <= 0.0) continue;
        bool lo_ok = lo_strict ? nu_x > lo : nu_x >= lo;
        bool hi_ok = hi_strict ? nu_x < hi : nu_x <= hi;
        if (!lo_ok || !hi_ok) continue;
        st.offer(mask_ratio(a, d, mask, nu_x), mask);
    }
    SubsetScan out;
    out.found = st.found;
    out.best = st.best;
    out.witness = st.witness;
    out.considered = st.considered;
    return out;
}

} // namespace kernels
} // namespace limclust
