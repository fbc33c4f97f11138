#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <random>

#include "limclust/evaluate.hpp"
#include "limclust/formula.hpp"
#include "limclust/structure.hpp"
#include "limclust/weak_algebra.hpp"
#include "oracles.hpp"

using namespace limclust;

namespace {

Signature graph_signature() {
    Signature sig;
    sig.add("adj", 2);
    sig.add("red", 1);
    return sig;
}

const std::vector<Structure>& family() {
    static std::vector<Structure> f = precondition_test_family(graph_signature(), 3, 120);
    return f;
}

} // namespace

TEST_CASE("parser basics") {
    Formula adj = Formula::parse("adj(x1,x2)");
    CHECK(adj.free_count() == 2);
    CHECK(adj.radius() == 1);
    CHECK(adj.strongly_local());

    Formula q = Formula::parse("exists y in B[2](x1): adj(x1,y)");
    CHECK(q.free_count() == 1);
    CHECK(q.radius() == 2);

    CHECK_THROWS_AS(Formula::parse("exists y: adj(x1,y)"), Error);
    try {
        Formula::parse("exists y: adj(x1,y)");
    } catch (const Error& e) {
        CHECK(e.kind() == Error::Kind::Locality);
        CHECK(std::string(e.what()).find("line 1") != std::string::npos);
    }

    // syntax error carries line/column
    try {
        Formula::parse("adj(x1,\n  x2");
        FAIL("expected parse error");
    } catch (const Error& e) {
        CHECK(e.kind() == Error::Kind::Parse);
        CHECK(std::string(e.what()).find("line 2") != std::string::npos);
    }

    Formula guard = Formula::parse("dist(x1,x2) <= 3");
    CHECK(guard.radius() == 3);
    CHECK(guard.strongly_local());
    Formula far = Formula::parse("dist(x1,x2) > 3");
    CHECK_FALSE(far.strongly_local());
}

TEST_CASE("satisfaction sets") {
    Structure k3 = oracles::clique(3);
    Formula t = Formula::parse("x1 = x1");
    CHECK(satisfaction_set(k3, t).size() == 3);

    Formula adj = Formula::parse("adj(x1,x2)");
    CHECK(satisfaction_set(k3, adj).size() == 6);

    Formula self = Formula::parse("adj(x1,x2) & x1 = x2");
    CHECK(satisfaction_set(k3, self).empty());

    Formula unknown = Formula::parse("edge(x1,x2)");
    CHECK_THROWS_AS(satisfaction_set(k3, unknown), Error);
}

TEST_CASE("stone pairing") {
    Structure k3 = oracles::clique(3);
    CHECK(stone_pairing(k3, Formula::parse("x1 = x1")) == doctest::Approx(1.0));
    CHECK(stone_pairing(k3, Formula::parse("adj(x1,x2)")) == doctest::Approx(2.0 / 3));

    Relation adj{"adj", 2, {{0, 1}, {1, 0}}, false};
    Structure k2(2, {0.3, 0.7}, {adj});
    CHECK(stone_pairing(k2, Formula::parse("adj(x1,x2)")) == doctest::Approx(0.42));

    // sentence-valued pairings are 0/1
    Formula sentence = Formula::parse("true");
    CHECK(stone_pairing(k3, sentence) == 1.0);
}

TEST_CASE("local stone pairing") {
    // uniform star S_3 at the center: 3/4
    Structure s3 = oracles::star(3);
    Formula adj = Formula::parse("adj(x1,x2)");
    CHECK(local_stone_pairing(s3, adj, 0) == doctest::Approx(3.0 / 4));
    CHECK(local_stone_pairing(s3, adj, 1) == doctest::Approx(1.0 / 4));

    // p = 1: indicator
    Formula deg = Formula::parse("exists y in B[1](x1): adj(x1,y)");
    CHECK(local_stone_pairing(s3, deg, 0) == 1.0);

    // weighted average over v recovers the global pairing
    Structure k3 = oracles::clique(3);
    double avg = 0.0;
    for (std::uint32_t v = 0; v < 3; ++v) avg += k3.weight(v) * local_stone_pairing(k3, adj, v);
    CHECK(avg == doctest::Approx(stone_pairing(k3, adj)));

    CHECK_THROWS_AS(local_stone_pairing(k3, adj, 9), Error);
}

TEST_CASE("weak algebra operations") {
    Formula adj = Formula::parse("adj(x1,x2)");
    Formula nadj = Formula::parse("~adj(x1,x2)");
    Formula t2 = Formula::parse("x1 = x1 & x2 = x2");

    Formula sum = weak_add(adj, nadj, family());
    for (const auto& a : family())
        CHECK(stone_pairing(a, sum) ==
              doctest::Approx(stone_pairing(a, adj) + stone_pairing(a, nadj)));

    // (phi (+) psi) (-) psi = phi in pairing value
    Formula back = weak_sub(sum, nadj, family());
    for (const auto& a : family())
        CHECK(stone_pairing(a, back) == doctest::Approx(stone_pairing(a, adj)));

    // violated precondition names a witness
    CHECK_THROWS_AS(weak_add(adj, adj, family()), Error);
    try {
        weak_add(adj, adj, family());
    } catch (const Error& e) {
        CHECK(e.kind() == Error::Kind::Algebra);
        CHECK(std::string(e.what()).find("family structure #") != std::string::npos);
    }
    CHECK_THROWS_AS(weak_sub(adj, nadj, family()), Error);

    // free product multiplies pairings
    Formula prod = free_product(adj, adj);
    CHECK(prod.free_count() == 4);
    Structure k3 = oracles::clique(3);
    CHECK(stone_pairing(k3, prod) == doctest::Approx(4.0 / 9));
    Formula with_true = free_product(adj, Formula::parse("x1 = x1"));
    CHECK(stone_pairing(k3, with_true) == doctest::Approx(stone_pairing(k3, adj)));

    // injective renaming
    Formula renamed = rename(adj, {1, 0});
    CHECK(stone_pairing(k3, renamed) == doctest::Approx(stone_pairing(k3, adj)));
    CHECK_THROWS_AS(rename(adj, {0, 0}), Error);
    (void)t2;
}

TEST_CASE("decomposition base cases") {
    Formula adj = Formula::parse("adj(x1,x2)");
    PairingPolynomial base = strongly_local_decomposition(adj);
    REQUIRE(base.generators.size() == 1);
    CHECK(base.generators[0].to_string() == adj.to_string());
    CHECK(base.terms.size() == 1);
    CHECK(base.degree() == 1);

    CHECK_THROWS_AS(
        strongly_local_decomposition(Formula::parse(
            "adj(x1,x2)|adj(x3,x4)|adj(x5,x6)|adj(x1,x7)")),
        Error); // p = 7 over budget
}

TEST_CASE("decomposition equals brute force on random structures") {
    std::mt19937 rng(2024);
    Formula phi = Formula::parse("adj(x1,x2) & adj(x3,x4)");
    PairingPolynomial poly = strongly_local_decomposition(phi);
    CHECK(poly.degree() <= phi.free_count());
    for (const auto& g : poly.generators) CHECK(g.strongly_local());
    for (int trial = 0; trial < 50; ++trial) {
        Structure a = oracles::random_structure(rng, 8);
        CHECK(poly.evaluate(a) == doctest::Approx(stone_pairing(a, phi)).epsilon(1e-10));
    }
}

TEST_CASE("decomposition of the far-pair pattern") {
    // dist(x1,x2) > 2r with strongly local eta on each side (r = 1)
    Formula phi = Formula::parse(
        "dist(x1,x2) > 2 & (exists y in B[1](x1): adj(x1,y)) & (exists y in B[1](x2): adj(x2,y))");
    PairingPolynomial poly = strongly_local_decomposition(phi);
    std::mt19937 rng(99);
    for (int trial = 0; trial < 50; ++trial) {
        Structure a = oracles::random_structure(rng, 8);
        CHECK(poly.evaluate(a) == doctest::Approx(stone_pairing(a, phi)).epsilon(1e-10));
    }
}

TEST_CASE("locality soundness") {
    // satisfaction on A equals satisfaction on the induced r-ball
    std::mt19937 rng(7);
    std::vector<Formula> formulas = {
        Formula::parse("adj(x1,x2)"),
        Formula::parse("dist(x1,x2) <= 2"),
        Formula::parse("exists y in B[2](x1): adj(x1,y)"),
        Formula::parse("forall y in B[1](x1): (adj(y,x2) | red(y))"),
        Formula::parse("~adj(x1,x2) & red(x1)"),
        Formula::parse("exists y in B[1](x1): exists z in B[1](y): red(z)"),
    };
    for (const auto& phi : formulas) {
        const int p = phi.free_count();
        const int r = phi.radius();
        for (int trial = 0; trial < 25; ++trial) {
            Structure a = oracles::random_structure(rng, 8, false);
            auto sat = satisfaction_set(a, phi);
            std::vector<std::vector<std::uint32_t>> all;
            std::vector<std::uint32_t> tuple(static_cast<std::size_t>(p), 0);
            while (true) {
                VertexSet ball_set(a.size());
                for (auto v : tuple) ball_set.set(v);
                VertexSet grown = a.ball(ball_set, r);
                Structure local = a.induce(grown);
                auto ids = grown.to_vector();
                std::vector<std::uint32_t> remap(a.size(), 0);
                for (std::uint32_t i = 0; i < ids.size(); ++i) remap[ids[i]] = i;
                std::vector<std::uint32_t> local_tuple;
                for (auto v : tuple) local_tuple.push_back(remap[v]);
                bool on_local = false;
                {
                    auto lsat = satisfaction_set(local, phi);
                    on_local = std::find(lsat.begin(), lsat.end(), local_tuple) != lsat.end();
                }
                bool on_full = std::find(sat.begin(), sat.end(), tuple) != sat.end();
                CHECK(on_full == on_local);
                int i = p - 1;
                while (i >= 0 && tuple[static_cast<std::size_t>(i)] + 1 == a.size())
                    tuple[static_cast<std::size_t>(i--)] = 0;
                if (i < 0) break;
                ++tuple[static_cast<std::size_t>(i)];
            }
            (void)all;
        }
    }
}

TEST_CASE("strong locality certificate") {
    // every satisfying tuple of a strongly local formula sits within radius
    std::mt19937 rng(13);
    std::vector<Formula> formulas = {
        Formula::parse("adj(x1,x2)"),
        Formula::parse("adj(x1,x2) & adj(x2,x3) & dist(x1,x3) <= 2"),
        Formula::parse("dist(x1,x2) <= 3 & dist(x2,x3) <= 3 & dist(x1,x3) <= 3"),
    };
    // a guard chain longer than the radius does not certify strong locality
    CHECK_FALSE(Formula::parse("dist(x1,x2) <= 2 & adj(x2,x3)").strongly_local());
    for (const auto& phi : formulas) {
        REQUIRE(phi.strongly_local());
        for (int trial = 0; trial < 20; ++trial) {
            Structure a = oracles::random_structure(rng, 7, false);
            for (const auto& tuple : satisfaction_set(a, phi)) {
                for (std::size_t i = 0; i < tuple.size(); ++i)
                    for (std::size_t j = i + 1; j < tuple.size(); ++j) {
                        int d = a.distance(tuple[i], tuple[j]);
                        CHECK(d >= 0);
                        CHECK(d <= phi.radius());
                    }
            }
        }
    }
}

TEST_CASE("pairing additivity for a single free variable") {
    std::mt19937 rng(31);
    Formula phi = Formula::parse("exists y in B[1](x1): adj(x1,y)");
    for (int trial = 0; trial < 20; ++trial) {
        Structure a = oracles::random_structure(rng, 6, false);
        Structure b = oracles::random_structure(rng, 6, false);
        double lam = 0.25 + 0.5 * std::uniform_real_distribution<double>(0, 1)(rng);
        Structure sum = Structure::weighted_sum({{lam, a}, {1.0 - lam, b}});
        CHECK(stone_pairing(sum, phi) ==
              doctest::Approx(lam * stone_pairing(a, phi) + (1 - lam) * stone_pairing(b, phi)));
    }
}

TEST_CASE("decomposition exactness across a formula battery") {
    std::mt19937 rng(555);
    std::vector<std::string> battery = {
        "red(x1) & red(x2)",
        "adj(x1,x2) | adj(x1,x3)",
        "exists y in B[1](x1): (adj(y,x2) | red(y))",
        "~adj(x1,x2)",
    };
    for (const auto& text : battery) {
        Formula phi = Formula::parse(text);
        PairingPolynomial poly = strongly_local_decomposition(phi);
        CHECK(poly.degree() <= phi.free_count());
        for (int trial = 0; trial < 25; ++trial) {
            Structure a = oracles::random_structure(rng, 7);
            CHECK(poly.evaluate(a) == doctest::Approx(stone_pairing(a, phi)).epsilon(1e-10));
        }
    }
}
