#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <random>

#include "limclust/evaluate.hpp"
#include "limclust/generators.hpp"
#include "limclust/kernels.hpp"
#include "oracles.hpp"

using namespace limclust;

namespace {

struct ParallelismGuard {
    ~ParallelismGuard() { set_parallelism(0); }
};

} // namespace

TEST_CASE("ball measures match the serial reference and stay thread-invariant") {
    ParallelismGuard guard;
    Structure g = random_regular_graph(200, 3, 5);
    for (int d : {0, 1, 3, 6}) {
        auto reference = kernels::serial::ball_measures(g, d);
        set_parallelism(1);
        auto one = kernels::ball_measures(g, d);
        set_parallelism(8);
        auto eight = kernels::ball_measures(g, d);
        CHECK(one == reference);
        CHECK(one == eight);
    }
}

TEST_CASE("pairing sum is thread-invariant bit for bit") {
    ParallelismGuard guard;
    std::mt19937 rng(3);
    Formula phi = Formula::parse("exists y in B[2](x1): adj(y,x2)");
    for (int trial = 0; trial < 10; ++trial) {
        Structure a = oracles::random_structure(rng, 10);
        EvalContext ctx(a);
        set_parallelism(1);
        EvalContext c1 = ctx.fork();
        double one = kernels::pairing_sum(c1, phi);
        set_parallelism(8);
        EvalContext c8 = ctx.fork();
        double eight = kernels::pairing_sum(c8, phi);
        CHECK(one == eight); // exact: partials land in fixed slots
        EvalContext cs = ctx.fork();
        double serial = kernels::serial::pairing_sum(cs, phi);
        CHECK(one == doctest::Approx(serial).epsilon(1e-12));
    }
}

TEST_CASE("direct characteristic sums agree across paths and threads") {
    ParallelismGuard guard;
    std::vector<double> values = {0.3, 0.7, 0.5};
    std::vector<double> weights = {0.25, 0.5, 0.25};
    std::vector<double> grid;
    for (int i = 0; i <= 1000; ++i) grid.push_back(-50.0 + 0.1 * i);
    set_parallelism(1);
    auto one = kernels::char_direct(values, weights, grid);
    set_parallelism(8);
    auto eight = kernels::char_direct(values, weights, grid);
    CHECK(one == eight);
    auto serial = kernels::serial::char_direct(values, weights, grid);
    for (std::size_t i = 0; i < grid.size(); ++i)
        CHECK(std::abs(one[i] - serial[i]) < 1e-12);
}

TEST_CASE("expansion scan matches the serial reference including the witness") {
    ParallelismGuard guard;
    for (unsigned seed : {1u, 2u, 3u}) {
        Structure g = random_regular_graph(12, 3, seed);
        auto reference = kernels::serial::expansion_scan(g, 1, 0.1, true, 0.9, true);
        set_parallelism(1);
        auto one = kernels::expansion_scan(g, 1, 0.1, true, 0.9, true);
        set_parallelism(8);
        auto eight = kernels::expansion_scan(g, 1, 0.1, true, 0.9, true);
        CHECK(one.found == reference.found);
        CHECK(one.best == reference.best);
        CHECK(one.witness == reference.witness);
        CHECK(one.best == eight.best);
        CHECK(one.witness == eight.witness);
        CHECK(one.considered == reference.considered);
    }
    Structure big = random_regular_graph(30, 3, 4);
    CHECK_THROWS_AS(kernels::expansion_scan(big, 1, 0.1, true, 0.9, true), Error);
}

TEST_CASE("mask order matches lexicographic vertex-set order") {
    // {0,3} before {1,2}; {0,2} before {0,3}
    CHECK(kernels::mask_lex_less(0b1001, 0b0110));
    CHECK(kernels::mask_lex_less(0b0101, 0b1001));
    CHECK_FALSE(kernels::mask_lex_less(0b0110, 0b1001));
    CHECK_FALSE(kernels::mask_lex_less(0b1001, 0b1001));
}
