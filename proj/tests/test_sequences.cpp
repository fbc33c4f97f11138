#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <random>

#include "limclust/evaluate.hpp"
#include "limclust/generators.hpp"
#include "limclust/sequences.hpp"
#include "oracles.hpp"

using namespace limclust;

namespace {

Config test_config() {
    Config cfg;
    return cfg;
}

std::vector<Formula> graph_battery() {
    Signature sig;
    sig.add("adj", 2);
    return default_battery(sig, "M");
}

// exhaustive oracle over all subsets, independent of the kernels
struct OracleScan {
    double best = 1e300;
    bool found = false;
};
OracleScan oracle_expansion(const Structure& a, int d, double lo, bool lo_strict, double hi,
                            bool hi_strict) {
    OracleScan out;
    const std::size_t n = a.size();
    for (std::uint64_t mask = 1; mask + 1 < (std::uint64_t{1} << n) + 1; ++mask) {
        if (mask >= (std::uint64_t{1} << n)) break;
        VertexSet x(n);
        for (std::uint32_t v = 0; v < n; ++v)
            if (mask & (std::uint64_t{1} << v)) x.set(v);
        double nu = a.measure(x);
        if (nu <= 0) continue;
        bool lo_ok = lo_strict ? nu > lo : nu >= lo;
        bool hi_ok = hi_strict ? nu < hi : nu <= hi;
        if (!lo_ok || !hi_ok) continue;
        double ratio = (a.measure(oracles::bfs_ball(a, x, d)) - nu) / nu;
        if (!out.found || ratio < out.best) {
            out.found = true;
            out.best = ratio;
        }
    }
    return out;
}

} // namespace

TEST_CASE("negligible profile extremes") {
    Config cfg = test_config();
    auto s = generator_sequence("cycle", nlohmann::json::object(), 4, 20);
    auto empty = SubsetSequence::empty_like(s);
    auto prof = negligible_profile(s, empty, 4, cfg.tol, cfg.window_fraction);
    CHECK(prof.negligible);
    for (const auto& v : prof.tail_sup) CHECK(v == 0.0);

    auto full = SubsetSequence::full_like(s);
    auto prof_full = negligible_profile(s, full, 4, cfg.tol, cfg.window_fraction);
    CHECK_FALSE(prof_full.negligible);
    CHECK(prof_full.tail_sup[0] == doctest::Approx(1.0));
}

TEST_CASE("negligible profile of the linked-cliques separator") {
    // two cliques of order n joined by a ceil(sqrt(n)) path: the path is a
    // (1, eps)-separator and its middle is negligible at every radius
    Config cfg = test_config();
    auto s = generator_sequence("linked-cliques", nlohmann::json::object(), 60, 200);
    auto path = truth_named_subsets("linked-cliques", nlohmann::json::object(), 60, 200, "path");
    auto prof = negligible_profile(s, path, 1, cfg.tol, cfg.window_fraction);
    // the d = 1 halo stays inside the path plus two clique vertices
    CHECK(prof.tail_sup[1] < cfg.tol);
    // monotone decrease of the d = 1 row
    const auto& row = prof.table[1];
    CHECK(row.front() > row.back());

    auto middle =
        truth_named_subsets("linked-cliques", nlohmann::json::object(), 60, 200, "path-middle");
    auto prof_mid = negligible_profile(s, middle, 2, cfg.tol, cfg.window_fraction);
    CHECK(prof_mid.negligible);
}

TEST_CASE("negligible bound report") {
    // empty X: difference 0 < 2 p eps
    Structure k3 = oracles::clique(3);
    Formula adj = Formula::parse("adj(x1,x2)");
    auto rep0 = check_negligible_bound(k3, VertexSet(3), adj, 2, 0.2);
    CHECK(rep0.precondition_ok);
    CHECK(rep0.difference == doctest::Approx(0.0));
    CHECK(rep0.bound_holds);

    // K_10 + K_2 uniform, X the K_2; the syntactic radius of adj is 1, so the
    // precondition r < d asks for d = 2 (the d = 1 ball values are identical)
    Structure k10 = oracles::clique(10);
    Structure k2 = oracles::clique(2);
    Structure both = Structure::weighted_sum({{10.0 / 12, k10}, {2.0 / 12, k2}});
    VertexSet x(12);
    x.set(10);
    x.set(11);
    auto rep = check_negligible_bound(both, x, adj, 2, 0.2);
    CHECK(rep.precondition_ok);
    CHECK(rep.ball_measure == doctest::Approx(2.0 / 12));
    CHECK(rep.pairing_full == doctest::Approx(92.0 / 144));
    CHECK(rep.pairing_removed == doctest::Approx(0.9));
    CHECK(rep.difference < 0.8);
    CHECK(rep.bound_holds);

    // precondition failure reported, not asserted
    auto repf = check_negligible_bound(both, VertexSet::full(12), adj, 2, 0.2);
    CHECK_FALSE(repf.precondition_ok);
}

TEST_CASE("negligible bound holds on a random sweep") {
    std::mt19937 rng(77);
    std::vector<Formula> battery = {
        Formula::parse("adj(x1,x2)"),
        Formula::parse("exists y in B[1](x1): adj(x1,y)"),
    };
    int done = 0;
    while (done < 100) {
        Structure a = oracles::random_structure(rng, 10);
        std::uniform_real_distribution<double> ud(0, 1);
        VertexSet x(a.size());
        for (std::uint32_t v = 0; v < a.size(); ++v)
            if (ud(rng) < 0.15) x.set(v);
        if (a.measure(x) >= 1.0) continue;
        int d = 2;
        double ball_nu = a.measure(a.ball(x, d));
        if (ball_nu >= 0.45) continue;
        double eps = ball_nu + 0.05 + 0.3 * ud(rng);
        const Formula& phi = battery[static_cast<std::size_t>(done) % battery.size()];
        auto rep = check_negligible_bound(a, x, phi, d, eps);
        REQUIRE(rep.precondition_ok);
        CHECK(rep.bound_holds);
        ++done;
    }
}

TEST_CASE("fragmentation bound") {
    // two cliques fragmented by the empty separator
    Structure k4 = oracles::clique(4);
    Structure k3 = oracles::clique(3);
    Structure both = Structure::weighted_sum({{0.6, k4}, {0.4, k3}});
    Formula adj = Formula::parse("adj(x1,x2)");
    std::vector<VertexSet> parts;
    VertexSet p1(7), p2(7);
    for (std::uint32_t v = 0; v < 4; ++v) p1.set(v);
    for (std::uint32_t v = 4; v < 7; ++v) p2.set(v);
    parts = {p1, p2};
    auto rep = check_negligible_bound(both, VertexSet(7), adj, 2, 0.1, parts);
    CHECK(rep.precondition_ok);
    CHECK(rep.has_fragmentation);
    CHECK(rep.fragmentation_bound_holds);
    // exact decomposition here: no separator at all
    CHECK(rep.fragmentation_difference == doctest::Approx(0.0).epsilon(1e-9));
}

TEST_CASE("is_cluster verdicts") {
    Config cfg = test_config();
    auto battery = graph_battery();
    auto s = generator_sequence("clique-pair", nlohmann::json::object(), 4, 40);

    auto full = SubsetSequence::full_like(s);
    auto cf = is_cluster(s, full, battery, cfg.dmax, cfg.tol, cfg.window_fraction);
    CHECK(cf.verdict == Verdict::Pass);

    auto empty = SubsetSequence::empty_like(s);
    auto ce = is_cluster(s, empty, battery, cfg.dmax, cfg.tol, cfg.window_fraction);
    CHECK(ce.verdict == Verdict::Pass);
    CHECK(ce.negligible_case);

    auto c0 = truth_cluster_subsets("clique-pair", nlohmann::json::object(), 4, 40, 0);
    auto cc = is_cluster(s, c0, battery, cfg.dmax, cfg.tol, cfg.window_fraction);
    CHECK(cc.verdict == Verdict::Pass);
    CHECK(cc.measure_limit == doctest::Approx(0.5));

    // alternating halves with different measures oscillate
    nlohmann::json params = {{"measures", {0.4, 0.6}}};
    auto s2 = generator_sequence("clique-pair", params, 4, 40);
    auto alt0 = truth_cluster_subsets("clique-pair", params, 4, 40, 0);
    auto alt1 = truth_cluster_subsets("clique-pair", params, 4, 40, 1);
    SubsetSequence alternating(4, 40, [alt0, alt1](int n) {
        return n % 2 == 0 ? alt0.at(n) : alt1.at(n);
    });
    auto ca = is_cluster(s2, alternating, battery, cfg.dmax, cfg.tol, cfg.window_fraction);
    CHECK(ca.verdict == Verdict::Fail);
}

TEST_CASE("interweaving verdicts") {
    Config cfg = test_config();
    auto battery = graph_battery();
    auto s = generator_sequence("clique-pair", nlohmann::json::object(), 4, 40);
    auto c0 = truth_cluster_subsets("clique-pair", nlohmann::json::object(), 4, 40, 0);
    auto c1 = truth_cluster_subsets("clique-pair", nlohmann::json::object(), 4, 40, 1);

    auto self = interweaving(s, c0, c0, battery, cfg.dmax, cfg.tol, cfg.window_fraction);
    CHECK(self.interweaving);

    auto twins = interweaving(s, c0, c1, battery, cfg.dmax, cfg.tol, cfg.window_fraction);
    CHECK(twins.interweaving);

    nlohmann::json params = {{"measures", {0.4, 0.6}}};
    auto s2 = generator_sequence("clique-pair", params, 4, 40);
    auto d0 = truth_cluster_subsets("clique-pair", params, 4, 40, 0);
    auto d1 = truth_cluster_subsets("clique-pair", params, 4, 40, 1);
    auto diff = interweaving(s2, d0, d1, battery, cfg.dmax, cfg.tol, cfg.window_fraction);
    CHECK_FALSE(diff.interweaving);
    CHECK(diff.measure_diff == doctest::Approx(0.2).epsilon(0.05));

    // non-clusters rejected
    SubsetSequence alternating(4, 40, [d0, d1](int n) {
        return n % 2 == 0 ? d0.at(n) : d1.at(n);
    });
    CHECK_THROWS_AS(
        interweaving(s2, alternating, d0, battery, cfg.dmax, cfg.tol, cfg.window_fraction),
        Error);
}

TEST_CASE("wrap grows a pre-cluster into its cluster") {
    Config cfg = test_config();
    auto battery = graph_battery();
    auto s = generator_sequence("clique-pair", nlohmann::json::object(), 4, 40);
    auto c0 = truth_cluster_subsets("clique-pair", nlohmann::json::object(), 4, 40, 0);

    // a union of components wraps to itself with D >= 1
    auto res = wrap(s, c0, battery, cfg);
    for (int n = 30; n <= 40; ++n) CHECK(res.wrapped.at(n) == c0.at(n));
    CHECK(res.radius_schedule.back() >= 1);

    // clique minus its outermost vertex recovers the whole clique
    SubsetSequence chipped(4, 40, [c0](int n) {
        VertexSet x = c0.at(n);
        x.reset(x.to_vector().back());
        return x;
    });
    auto rec = wrap(s, chipped, battery, cfg);
    for (int n = 35; n <= 40; ++n) CHECK(rec.wrapped.at(n) == c0.at(n));

    // the zero sequence is rejected (trivial cluster upstream)
    auto empty = SubsetSequence::empty_like(s);
    CHECK_THROWS_AS(wrap(s, empty, battery, cfg), Error);
}

TEST_CASE("expansion brute force matches the exhaustive oracle") {
    Config cfg = test_config();
    // K4: h_out = 1, minimized at |X| = 2
    Structure k4 = oracles::clique(4);
    CHECK(h_out(k4, cfg) == doctest::Approx(1.0));
    auto o_k4 = oracle_expansion(k4, 1, 0.0, true, 0.5, false);
    CHECK(h_out(k4, cfg) == o_k4.best);

    // C8: h_out = 1/2 at four consecutive vertices
    Structure c8 = oracles::cycle(8);
    CHECK(h_out(c8, cfg) == doctest::Approx(0.5));
    auto o_c8 = oracle_expansion(c8, 1, 0.0, true, 0.5, false);
    CHECK(h_out(c8, cfg) == o_c8.best);

    // disconnected union: delta_hat = 0
    Relation adj{"adj", 2, {{0, 1}, {1, 0}, {2, 3}, {3, 2}}, false};
    Structure two_k2 = Structure::uniform(4, {adj});
    auto rep = expansion_check(two_k2, 1, 0.2, cfg, ScanMode::Exact);
    CHECK(rep.exact);
    CHECK(rep.delta_hat == doctest::Approx(0.0));
    CHECK(rep.witness == VertexSet::of(4, {0, 1}));

    // seeded regular graphs agree with the oracle exactly
    for (unsigned seed : {11u, 12u, 13u}) {
        Structure g = random_regular_graph(12, 3, seed);
        auto fast = expansion_check(g, 2, 0.2, cfg, ScanMode::Exact);
        auto slow = oracle_expansion(g, 2, 0.2, true, 0.8, true);
        CHECK(fast.delta_hat == slow.best);
    }

    // exact mode refused beyond the limit
    Structure big = random_regular_graph(20, 3, 9);
    CHECK_THROWS_AS(expansion_check(big, 1, 0.2, cfg, ScanMode::Exact), Error);
}

TEST_CASE("clean expander") {
    Config cfg = test_config();
    // an expander with no small bad set keeps everything
    Structure k8 = oracles::clique(8);
    VertexSet none = clean_expander(k8, 1, 0.1, 0.1, cfg);
    CHECK(none.empty());

    // K8 plus a pendant that outweighs its anchor: the greedy construction
    // removes exactly the pendant
    {
        Relation adj{"adj", 2, {}, false};
        for (std::uint32_t i = 0; i < 8; ++i)
            for (std::uint32_t j = i + 1; j < 8; ++j) {
                adj.tuples.push_back({i, j});
                adj.tuples.push_back({j, i});
            }
        adj.tuples.push_back({0, 8});
        adj.tuples.push_back({8, 0});
        std::vector<double> w(9, (1.0 - 0.1 - 0.005) / 7.0);
        w[0] = 0.005; // light anchor
        w[8] = 0.1;   // pendant carries eps/2
        double sum = 0;
        for (double v : w) sum += v;
        w[1] += 1.0 - sum;
        Structure a(9, w, {adj});
        VertexSet y = clean_expander(a, 1, 0.2, 0.1, cfg);
        CHECK(y == VertexSet::of(9, {8}));
        // conclusion verified exhaustively on A - Y
        Structure rest = a.remove(y);
        for (std::uint64_t mask = 1; mask < (1u << 8); ++mask) {
            VertexSet x(8);
            for (std::uint32_t v = 0; v < 8; ++v)
                if (mask & (1u << v)) x.set(v);
            double nu = rest.measure(x);
            if (nu > 0.5) continue;
            CHECK(rest.measure(oracles::bfs_ball(rest, x, 1)) - nu >= 0.1 * nu - 1e-12);
        }
    }

    // 3-regular graph: the returned set satisfies the half-measure conclusion
    {
        Structure g = random_regular_graph(12, 3, 21);
        auto base = expansion_check(g, 2, 0.2, cfg, ScanMode::Exact);
        double delta = base.delta_hat * 0.9;
        REQUIRE(delta > 0);
        VertexSet y = clean_expander(g, 2, 0.2, delta, cfg);
        Structure rest = g.remove(y);
        REQUIRE(rest.size() <= 16);
        for (std::uint64_t mask = 1; mask < (std::uint64_t{1} << rest.size()); ++mask) {
            VertexSet x(rest.size());
            for (std::uint32_t v = 0; v < rest.size(); ++v)
                if (mask & (std::uint64_t{1} << v)) x.set(v);
            double nu = rest.measure(x);
            if (nu > 0.5) continue;
            CHECK(rest.measure(oracles::bfs_ball(rest, x, 2)) - nu >= delta * nu - 1e-12);
        }
    }
}

TEST_CASE("dispersion and classification") {
    Config cfg = test_config();
    // single growing clique: globular
    nlohmann::json one = {{"measures", {1.0}}};
    auto s1 = generator_sequence("clique-pair", one, 4, 24);
    auto x1 = SubsetSequence::full_like(s1);
    auto r1 = classify(s1, x1, cfg);
    CHECK(r1.cls == ClusterClass::Globular);

    // growing cycles: residual. The radius cap must stay well below the
    // cycle circumference for the vanishing-ball tail to show.
    Config small_d = cfg;
    small_d.classify_dmax = 4;
    auto s2 = generator_sequence("cycle", nlohmann::json::object(), 100, 200);
    auto x2 = SubsetSequence::full_like(s2);
    auto r2 = classify(s2, x2, small_d);
    CHECK(r2.cls == ClusterClass::Residual);

    // bounded-degree expanders: open once the order dwarfs the d-ball size
    nlohmann::json big = {{"size_scale", 30}};
    auto s3 = generator_sequence("regular", big, 30, 44);
    auto x3 = SubsetSequence::full_like(s3);
    auto r3 = classify(s3, x3, small_d);
    CHECK(r3.cls == ClusterClass::Open);
}

TEST_CASE("complement closure for clusters") {
    Config cfg = test_config();
    auto battery = graph_battery();
    nlohmann::json params = {{"measures", {0.5, 0.3}}, {"residual", 0.2}};
    auto s = generator_sequence("clique-pair", params, 4, 40);
    auto c0 = truth_cluster_subsets("clique-pair", params, 4, 40, 0);
    auto cc = is_cluster(s, c0, battery, cfg.dmax, cfg.tol, cfg.window_fraction);
    REQUIRE(cc.verdict == Verdict::Pass);
    auto comp = c0.complement_in(s);
    auto cv = is_cluster(s, comp, battery, cfg.dmax, cfg.tol, cfg.window_fraction);
    CHECK(cv.verdict == Verdict::Pass);
    // boundary profile of the complement is the original shifted by one radius
    for (int d = 0; d + 1 <= cfg.dmax; ++d)
        CHECK(cv.boundary.tail_sup[static_cast<std::size_t>(d)] <=
              cc.boundary.tail_sup[static_cast<std::size_t>(d + 1)] + 1e-12);
}

TEST_CASE("equivalence respects clusters") {
    Config cfg = test_config();
    auto battery = graph_battery();
    nlohmann::json params = {{"measures", {0.5, 0.3}}, {"residual", 0.2}};
    auto s = generator_sequence("clique-pair", params, 4, 40);
    auto c0 = truth_cluster_subsets("clique-pair", params, 4, 40, 0);
    // add one path vertex per index: a negligible symmetric difference
    SubsetSequence bumped(4, 40, [s, c0](int n) {
        VertexSet x = c0.at(n);
        x.set(static_cast<std::uint32_t>(s.at(n)->size() - 1));
        return x;
    });
    auto diff = c0.symmetric_difference(bumped);
    CHECK(negligible_profile(s, diff, cfg.dmax, cfg.tol, cfg.window_fraction).negligible);
    auto cb = is_cluster(s, bumped, battery, cfg.dmax, cfg.tol, cfg.window_fraction);
    CHECK(cb.verdict == Verdict::Pass);
}

TEST_CASE("boolean combinations of clusters stay clusters") {
    Config cfg = test_config();
    auto battery = graph_battery();
    auto s = generator_sequence("clique-pair", nlohmann::json::object(), 4, 40);
    auto c0 = truth_cluster_subsets("clique-pair", nlohmann::json::object(), 4, 40, 0);
    auto c1 = truth_cluster_subsets("clique-pair", nlohmann::json::object(), 4, 40, 1);
    // all finite intersections pass (they are empty), so the generated
    // combinations pass too
    auto inter = is_cluster(s, c0.set_difference(c0.set_difference(c1)),
                            battery, cfg.dmax, cfg.tol, cfg.window_fraction);
    CHECK(inter.verdict == Verdict::Pass); // c0 cap c1 = empty
    for (const auto& combo : {c0.set_union(c1), c0.set_difference(c1), c0.symmetric_difference(c1)}) {
        auto v = is_cluster(s, combo, battery, cfg.dmax, cfg.tol, cfg.window_fraction);
        CHECK(v.verdict == Verdict::Pass);
    }
}

TEST_CASE("expanding-cluster intersection dichotomy") {
    Config cfg = test_config();
    auto s = generator_sequence("expander-union", nlohmann::json::object(), 10, 30);
    auto c0 = truth_cluster_subsets("expander-union", nlohmann::json::object(), 10, 30, 0);
    auto c1 = truth_cluster_subsets("expander-union", nlohmann::json::object(), 10, 30, 1);
    auto tail = tail_indices(10, 30, cfg.window_fraction);
    for (int n : tail) {
        StructurePtr a = s.at(n);
        double same = a->measure(c0.at(n) & c0.at(n)) / a->measure(c0.at(n));
        double cross = a->measure(c0.at(n) & c1.at(n)) / a->measure(c0.at(n));
        CHECK(same == doctest::Approx(1.0));
        CHECK(cross == doctest::Approx(0.0));
    }
}
