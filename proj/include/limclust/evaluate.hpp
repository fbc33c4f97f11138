#pragma once

#include <cstdint>
#include <map>
#include <memory>
#include <vector>

#include "limclust/formula.hpp"
#include "limclust/structure.hpp"

namespace limclust {

// Read-only evaluation tables shared between worker contexts: sorted tuple
// sets for atom lookup and, for small domains, the full Gaifman distance
// matrix.
struct PreparedStructure {
    explicit PreparedStructure(const Structure& a);

    const Structure& structure() const { return *a_; }
    bool tuple_holds(const std::string& rel, const std::vector<std::uint32_t>& t) const;
    bool relation_known(const std::string& rel) const;
    int arity_of(const std::string& rel) const;

    bool has_matrix() const { return has_matrix_; }
    int matrix_distance(std::uint32_t u, std::uint32_t v) const {
        return dist_[static_cast<std::size_t>(u) * n_ + v];
    }

    static constexpr std::size_t kMatrixLimit = 1024;

private:
    const Structure* a_;
    std::size_t n_;
    std::vector<std::pair<std::string, std::vector<std::vector<std::uint32_t>>>> tuples_;
    std::vector<int> arities_;
    bool has_matrix_ = false;
    std::vector<std::int16_t> dist_;
};

// Per-worker evaluation state; forks share the prepared tables but keep
// private ball caches, so contexts can run on separate threads.
class EvalContext {
public:
    explicit EvalContext(const Structure& a)
        : prepared_(std::make_shared<PreparedStructure>(a)) {}
    explicit EvalContext(std::shared_ptr<const PreparedStructure> p)
        : prepared_(std::move(p)) {}

    EvalContext fork() const { return EvalContext(prepared_); }

    const Structure& structure() const { return prepared_->structure(); }
    const PreparedStructure& prepared() const { return *prepared_; }
    std::shared_ptr<const PreparedStructure> prepared_ptr() const { return prepared_; }

    // Gaifman distance, -1 when unreachable (or beyond cap if one is given).
    int distance(std::uint32_t u, std::uint32_t v, int cap);
    // Vertices of the closed radius-r ball, ascending; memoized.
    const std::vector<std::uint32_t>& ball_vertices(std::uint32_t v, int r);

private:
    std::shared_ptr<const PreparedStructure> prepared_;
    std::map<std::pair<std::uint32_t, int>, std::vector<std::uint32_t>> ball_cache_;
};

// Satisfaction of phi under the assignment (slots 0..free_count-1 must be
// filled; the vector must be long enough for bound slots).
bool evaluate(const Formula& phi, EvalContext& ctx, std::vector<std::uint32_t>& assignment);

std::size_t assignment_size(const Formula& phi);

// Exact satisfaction set, tuples in lexicographic order.
std::vector<std::vector<std::uint32_t>> satisfaction_set(const Structure& a, const Formula& phi);

// Stone pairing <phi, A>: probability of satisfaction under independent
// nu-random assignments. For sentences (p = 0) returns 0/1.
double stone_pairing(const Structure& a, const Formula& phi);

// Local Stone pairing <phi, A>_v with x1 pinned to v.
double local_stone_pairing(const Structure& a, const Formula& phi, std::uint32_t v);

} // namespace limclust
