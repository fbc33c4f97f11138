#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <random>

#include "limclust/io.hpp"
#include "limclust/structure.hpp"
#include "oracles.hpp"

using namespace limclust;

TEST_CASE("ball on small graphs") {
    Structure p3 = oracles::path(3);
    CHECK(p3.ball(VertexSet::of(3, {1}), 1) == VertexSet::of(3, {0, 1, 2}));
    CHECK(p3.ball(VertexSet::of(3, {0}), 0) == VertexSet::of(3, {0}));

    // two disjoint edges: the ball never crosses components
    Relation adj{"adj", 2, {{0, 1}, {1, 0}, {2, 3}, {3, 2}}, false};
    Structure two_edges = Structure::uniform(4, {adj});
    CHECK(two_edges.ball(VertexSet::of(4, {0}), 5) ==
          oracles::bfs_ball(two_edges, VertexSet::of(4, {0}), 5));
    CHECK(two_edges.ball(VertexSet::of(4, {0}), 5) == VertexSet::of(4, {0, 1}));
}

TEST_CASE("ball rejects bad input") {
    Structure p3 = oracles::path(3);
    CHECK_THROWS_AS(p3.ball(VertexSet::of(3, {1}), -1), Error);
    CHECK_THROWS_AS(VertexSet::of(3, {7}), Error);
}

TEST_CASE("outer boundary") {
    Structure k3 = oracles::clique(3);
    CHECK(k3.outer_boundary(VertexSet::full(3)).empty());
    Structure p3 = oracles::path(3);
    CHECK(p3.outer_boundary(VertexSet::of(3, {0})) == VertexSet::of(3, {1}));

    // union of components has empty boundary
    Relation adj{"adj", 2, {{0, 1}, {1, 0}, {2, 3}, {3, 2}}, false};
    Structure two_k2 = Structure::uniform(4, {adj});
    CHECK(two_k2.outer_boundary(VertexSet::of(4, {0, 1})).empty());
    CHECK_FALSE(two_k2.outer_boundary(VertexSet::of(4, {0})).empty());
}

TEST_CASE("measure") {
    Structure a(4, {0.1, 0.2, 0.3, 0.4}, {});
    CHECK(a.measure(VertexSet::of(4, {1, 3})) == doctest::Approx(0.6));
    CHECK(a.measure(VertexSet(4)) == 0.0);
    Structure u = Structure::uniform(4, {});
    CHECK(u.measure(VertexSet::of(4, {0, 2})) == doctest::Approx(0.5));
}

TEST_CASE("induce renormalizes and reindexes") {
    Relation adj{"adj", 2, {{0, 1}, {1, 0}, {2, 3}, {3, 2}}, false};
    Structure two_k2(4, {0.25, 0.25, 0.25, 0.25}, {adj});
    Structure first = two_k2.induce(VertexSet::of(4, {0, 1}));
    CHECK(first.size() == 2);
    CHECK(first.weight(0) == doctest::Approx(0.5));
    CHECK(first.weight(1) == doctest::Approx(0.5));
    CHECK(first.find_relation("adj")->tuples.size() == 2);

    CHECK_THROWS_AS(two_k2.induce(VertexSet(4)), Error);

    // induce over the full domain is the identity up to reindexing
    Structure same = two_k2.induce(VertexSet::full(4));
    CHECK(same == two_k2);
}

TEST_CASE("induce composes") {
    std::mt19937 rng(11);
    for (int trial = 0; trial < 20; ++trial) {
        Structure a = oracles::random_structure(rng, 8);
        VertexSet x(a.size()), y_in_x(a.size());
        std::uniform_real_distribution<double> ud(0, 1);
        for (std::uint32_t v = 0; v < a.size(); ++v)
            if (ud(rng) < 0.7) x.set(v);
        if (a.measure(x) <= 0) continue;
        Structure ax = a.induce(x);
        auto ids = x.to_vector();
        VertexSet y_local(ax.size());
        VertexSet y_global(a.size());
        for (std::uint32_t i = 0; i < ax.size(); ++i)
            if (ud(rng) < 0.6) {
                y_local.set(i);
                y_global.set(ids[i]);
            }
        if (ax.measure(y_local) <= 0) continue;
        Structure lhs = ax.induce(y_local);
        Structure rhs = a.induce(y_global);
        REQUIRE(lhs.size() == rhs.size());
        for (std::uint32_t v = 0; v < lhs.size(); ++v)
            CHECK(lhs.weight(v) == doctest::Approx(rhs.weight(v)).epsilon(1e-12));
        // relations agree exactly once the weights are ignored
        Structure lhs_u = Structure::uniform(lhs.size(), lhs.relations());
        Structure rhs_u = Structure::uniform(rhs.size(), rhs.relations());
        CHECK(lhs_u == rhs_u);
    }
}

TEST_CASE("weighted sum") {
    Structure k2 = oracles::clique(2);
    Structure one = Structure::weighted_sum({{1.0, k2}});
    CHECK(one == k2);

    Structure both = Structure::weighted_sum({{0.5, k2}, {0.5, k2}});
    CHECK(both.size() == 4);
    for (std::uint32_t v = 0; v < 4; ++v) CHECK(both.weight(v) == doctest::Approx(0.25));
    CHECK(both.find_relation("adj")->tuples.size() == 4);
    CHECK(both.neighbors(0).size() == 1);

    Structure k1 = Structure::uniform(1, {});
    Structure iso = Structure::weighted_sum({{0.3, k1}, {0.7, k1}});
    CHECK(iso.weight(0) == doctest::Approx(0.3));
    CHECK(iso.weight(1) == doctest::Approx(0.7));

    CHECK_THROWS_AS(Structure::weighted_sum({{0.5, k2}, {0.4, k2}}), Error);
}

TEST_CASE("mark and shadow") {
    Structure k3 = oracles::clique(3);
    VertexSet x = VertexSet::of(3, {0, 2});
    Structure lifted = k3.with_mark("M", x);
    CHECK(lifted.mark_set("M") == x);
    CHECK(lifted.without_relation("M") == k3);
    // conservative lift: the Gaifman graph is unchanged
    CHECK(lifted.gaifman_edge_count() == k3.gaifman_edge_count());

    Structure empty_mark = k3.with_mark("M", VertexSet(3));
    CHECK(empty_mark.mark_set("M").empty());

    // double marking commutes
    VertexSet y = VertexSet::of(3, {1});
    CHECK(k3.with_mark("M1", x).with_mark("M2", y) ==
          k3.with_mark("M2", y).with_mark("M1", x));

    // arity clash
    CHECK_THROWS_AS(k3.with_mark("adj", x), Error);
}

TEST_CASE("boundary fact for boolean combinations") {
    // ball^d(boundary(Z)) inside ball^{d+1}(boundary X) + ball^{d+1}(boundary Y)
    std::mt19937 rng(5);
    for (int trial = 0; trial < 40; ++trial) {
        Structure a = oracles::random_structure(rng, 8);
        std::uniform_real_distribution<double> ud(0, 1);
        VertexSet x(a.size()), y(a.size());
        for (std::uint32_t v = 0; v < a.size(); ++v) {
            if (ud(rng) < 0.5) x.set(v);
            if (ud(rng) < 0.5) y.set(v);
        }
        std::vector<VertexSet> combos = {x & y,
                                         x | y,
                                         x - y,
                                         y - x,
                                         x.symmetric_difference(y),
                                         (x & y).complement(),
                                         (x | y).complement()};
        for (int d = 0; d <= 3; ++d) {
            VertexSet rhs = a.ball(a.outer_boundary(x), d + 1) | a.ball(a.outer_boundary(y), d + 1);
            for (const auto& z : combos)
                CHECK(a.ball(a.outer_boundary(z), d).is_subset_of(rhs));
        }
    }
}

TEST_CASE("ball monotone in radius and set") {
    std::mt19937 rng(17);
    for (int trial = 0; trial < 30; ++trial) {
        Structure a = oracles::random_structure(rng, 10);
        VertexSet x(a.size());
        std::uniform_real_distribution<double> ud(0, 1);
        for (std::uint32_t v = 0; v < a.size(); ++v)
            if (ud(rng) < 0.3) x.set(v);
        for (int d = 0; d < 4; ++d) {
            CHECK(a.ball(x, d).is_subset_of(a.ball(x, d + 1)));
            CHECK(a.ball(x, d) == oracles::bfs_ball(a, x, d));
        }
        VertexSet bigger = x;
        bigger.set(0);
        CHECK(a.ball(x, 2).is_subset_of(a.ball(bigger, 2)));
    }
}

TEST_CASE("structure json round trip and validation") {
    std::mt19937 rng(23);
    Structure a = oracles::random_structure(rng, 9);
    nlohmann::json j = structure_to_json(a);
    Structure b = structure_from_json(j);
    CHECK(a == b);

    // uniform keyword
    nlohmann::json ju = {{"n", 3},
                         {"weights", "uniform"},
                         {"relations", {{"adj", {{"arity", 2}, {"tuples", {{0, 1}, {1, 0}}}}}}}};
    Structure u = structure_from_json(ju);
    CHECK(u.weight(2) == doctest::Approx(1.0 / 3));

    // rational weights
    nlohmann::json jr = {{"n", 2}, {"weights", {"1/3", "2/3"}}, {"relations", nlohmann::json::object()}};
    Structure r = structure_from_json(jr);
    CHECK(r.weight(0) == doctest::Approx(1.0 / 3));

    // first violation with location
    nlohmann::json bad = ju;
    bad["relations"]["adj"]["tuples"].push_back({0, 9});
    try {
        structure_from_json(bad, "input");
        FAIL("expected a validation error");
    } catch (const Error& e) {
        std::string msg = e.what();
        CHECK(msg.find("input.relations.adj.tuples[2][1]") != std::string::npos);
    }

    nlohmann::json badw = {{"n", 2}, {"weights", {0.5, 0.6}}};
    CHECK_THROWS_AS(structure_from_json(badw), Error);
}

TEST_CASE("zero-weight vertices stay in the domain") {
    Relation adj{"adj", 2, {{0, 1}, {1, 0}, {1, 2}, {2, 1}}, false};
    Structure a(3, {0.5, 0.0, 0.5}, {adj});
    // the zero-weight middle vertex still carries distance
    CHECK(a.distance(0, 2) == 2);
    CHECK(a.measure(a.ball(VertexSet::of(3, {0}), 1)) == doctest::Approx(0.5));
}
