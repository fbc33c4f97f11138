#pragma once

// Test-only brute-force oracles and deterministic random structures. These
// stay independent of the library code paths they check.

#include <random>
#include <vector>

#include "limclust/structure.hpp"

namespace oracles {

using limclust::Relation;
using limclust::Structure;
using limclust::VertexSet;

// Random graph structure with an `adj` relation (symmetric pairs) and a
// unary `red` relation; optionally random weights.
inline Structure random_structure(std::mt19937& rng, int max_n, bool random_weights = true,
                                  double edge_prob = 0.4) {
    std::uniform_int_distribution<int> nd(2, max_n);
    int n = nd(rng);
    std::uniform_real_distribution<double> ud(0.0, 1.0);
    Relation adj{"adj", 2, {}, false};
    Relation red{"red", 1, {}, false};
    for (int i = 0; i < n; ++i) {
        for (int j = i + 1; j < n; ++j) {
            if (ud(rng) < edge_prob) {
                adj.tuples.push_back({static_cast<std::uint32_t>(i), static_cast<std::uint32_t>(j)});
                adj.tuples.push_back({static_cast<std::uint32_t>(j), static_cast<std::uint32_t>(i)});
            }
        }
        if (ud(rng) < 0.5) red.tuples.push_back({static_cast<std::uint32_t>(i)});
    }
    std::vector<double> w(static_cast<std::size_t>(n), 1.0 / n);
    if (random_weights) {
        double s = 0.0;
        for (auto& x : w) {
            x = 0.05 + ud(rng);
            s += x;
        }
        for (auto& x : w) x /= s;
        double s2 = 0.0;
        for (auto& x : w) s2 += x;
        w[0] += 1.0 - s2;
    }
    return Structure(static_cast<std::size_t>(n), std::move(w), {adj, red});
}

// BFS ball oracle: plain breadth-first search over the Gaifman graph,
// written against the adjacency lists only.
inline VertexSet bfs_ball(const Structure& a, const VertexSet& start, int d) {
    VertexSet seen = start;
    std::vector<std::uint32_t> frontier = start.to_vector();
    for (int step = 0; step < d; ++step) {
        std::vector<std::uint32_t> next;
        for (auto u : frontier)
            for (auto w : a.neighbors(u))
                if (!seen.test(w)) {
                    seen.set(w);
                    next.push_back(w);
                }
        frontier = next;
    }
    return seen;
}

// Uniform clique structure helper.
inline Structure clique(int n) {
    Relation adj{"adj", 2, {}, false};
    for (int i = 0; i < n; ++i)
        for (int j = i + 1; j < n; ++j) {
            adj.tuples.push_back({static_cast<std::uint32_t>(i), static_cast<std::uint32_t>(j)});
            adj.tuples.push_back({static_cast<std::uint32_t>(j), static_cast<std::uint32_t>(i)});
        }
    return Structure::uniform(static_cast<std::size_t>(n), {adj});
}

inline Structure path(int n) {
    Relation adj{"adj", 2, {}, false};
    for (int i = 0; i + 1 < n; ++i) {
        adj.tuples.push_back({static_cast<std::uint32_t>(i), static_cast<std::uint32_t>(i + 1)});
        adj.tuples.push_back({static_cast<std::uint32_t>(i + 1), static_cast<std::uint32_t>(i)});
    }
    return Structure::uniform(static_cast<std::size_t>(n), {adj});
}

inline Structure cycle(int n) {
    Relation adj{"adj", 2, {}, false};
    for (int i = 0; i < n; ++i) {
        int j = (i + 1) % n;
        adj.tuples.push_back({static_cast<std::uint32_t>(i), static_cast<std::uint32_t>(j)});
        adj.tuples.push_back({static_cast<std::uint32_t>(j), static_cast<std::uint32_t>(i)});
    }
    return Structure::uniform(static_cast<std::size_t>(n), {adj});
}

inline Structure star(int leaves) {
    Relation adj{"adj", 2, {}, false};
    for (int l = 1; l <= leaves; ++l) {
        adj.tuples.push_back({0, static_cast<std::uint32_t>(l)});
        adj.tuples.push_back({static_cast<std::uint32_t>(l), 0});
    }
    return Structure::uniform(static_cast<std::size_t>(leaves) + 1, {adj});
}

} // namespace oracles
