#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "limclust/vertex_set.hpp"

namespace limclust {

struct Relation {
    std::string name;
    int arity = 0;
    std::vector<std::vector<std::uint32_t>> tuples;
    bool is_mark = false; // distinguished unary symbols used for lifts
};

class Structure;

// Relation names with arities; the unary mark names form an extensible subset.
class Signature {
public:
    void add(const std::string& name, int arity, bool is_mark = false);
    bool has(const std::string& name) const;
    int arity_of(const std::string& name) const;
    bool is_mark(const std::string& name) const;
    const std::vector<std::string>& names() const { return names_; }

    static Signature of(const Structure& a);

private:
    std::size_t index_of(const std::string& name) const;
    std::vector<std::string> names_;
    std::vector<int> arities_;
    std::vector<bool> marks_;
};

// Finite relational structure over a dense vertex domain 0..n-1, endowed
// with a vertex probability measure and a precomputed Gaifman adjacency.
// Immutable after construction; every operation returns a new structure.
class Structure {
public:
    Structure(std::size_t n, std::vector<double> weights, std::vector<Relation> relations);

    static Structure uniform(std::size_t n, std::vector<Relation> relations);

    // Disjoint union of parts with measure sum(lambda_i * nu_i); the lambdas
    // must sum to 1 within 1e-12.
    static Structure weighted_sum(const std::vector<std::pair<double, Structure>>& parts);

    std::size_t size() const { return n_; }
    double weight(std::uint32_t v) const { return weights_[v]; }
    const std::vector<double>& weights() const { return weights_; }

    const std::vector<Relation>& relations() const { return relations_; }
    const Relation* find_relation(const std::string& name) const;

    const std::vector<std::uint32_t>& neighbors(std::uint32_t v) const { return adj_[v]; }
    std::size_t gaifman_edge_count() const;

    double measure(const VertexSet& X) const;

    // Closed d-neighborhood of X in the Gaifman graph.
    VertexSet ball(const VertexSet& X, int d) const;
    VertexSet ball(std::uint32_t v, int d) const;

    // ball(X,1) minus X.
    VertexSet outer_boundary(const VertexSet& X) const;

    // Gaifman distance, or -1 if unreachable; stops early past `cap` when cap >= 0.
    int distance(std::uint32_t u, std::uint32_t v, int cap = -1) const;

    // Substructure induced by X with measure renormalized by 1/nu(X).
    // Requires nu(X) > 0.
    Structure induce(const VertexSet& X) const;
    // Substructure induced by the complement of X; requires nu(X) < 1.
    Structure remove(const VertexSet& X) const;

    // Conservative lift: adds (or replaces) the unary mark `name` with tuple set X.
    Structure with_mark(const std::string& name, const VertexSet& X) const;
    // Shadow: forget one unary mark.
    Structure without_relation(const std::string& name) const;
    VertexSet mark_set(const std::string& name) const;

    VertexSet connected_component(std::uint32_t v) const;
    std::vector<VertexSet> connected_components() const;

    // Exact labeled equality (domain, weights, relations, tuples).
    bool operator==(const Structure& o) const;

    std::size_t max_degree() const;

private:
    void build_gaifman();
    void validate() const;

    std::size_t n_;
    std::vector<double> weights_;
    std::vector<Relation> relations_; // sorted by name
    std::vector<std::vector<std::uint32_t>> adj_;
};

using StructurePtr = std::shared_ptr<const Structure>;

} // namespace limclust
