#include "limclust/evaluate.hpp"

#include <algorithm>
#include <deque>

#include "limclust/kernels.hpp"

namespace limclust {

PreparedStructure::PreparedStructure(const Structure& a) : a_(&a), n_(a.size()) {
    for (const Relation& r : a.relations()) {
        auto ts = r.tuples;
        std::sort(ts.begin(), ts.end());
        ts.erase(std::unique(ts.begin(), ts.end()), ts.end());
        tuples_.emplace_back(r.name, std::move(ts));
        arities_.push_back(r.arity);
    }
    if (n_ <= kMatrixLimit) {
        has_matrix_ = true;
        dist_.assign(n_ * n_, -1);
        std::deque<std::uint32_t> q;
        for (std::uint32_t s = 0; s < n_; ++s) {
            auto* row = &dist_[static_cast<std::size_t>(s) * n_];
            row[s] = 0;
            q.clear();
            q.push_back(s);
            while (!q.empty()) {
                std::uint32_t u = q.front();
                q.pop_front();
                for (std::uint32_t w : a.neighbors(u)) {
                    if (row[w] < 0) {
                        row[w] = static_cast<std::int16_t>(row[u] + 1);
                        q.push_back(w);
                    }
                }
            }
        }
    }
}

bool PreparedStructure::relation_known(const std::string& rel) const {
    for (const auto& [name, ts] : tuples_)
        if (name == rel) return true;
    return false;
}

int PreparedStructure::arity_of(const std::string& rel) const {
    for (std::size_t i = 0; i < tuples_.size(); ++i)
        if (tuples_[i].first == rel) return arities_[i];
    throw input_error("unknown relation '" + rel + "' in formula");
}

bool PreparedStructure::tuple_holds(const std::string& rel,
                                    const std::vector<std::uint32_t>& t) const {
    for (const auto& [name, ts] : tuples_) {
        if (name != rel) continue;
        return std::binary_search(ts.begin(), ts.end(), t);
    }
    throw input_error("unknown relation '" + rel + "' in formula");
}

int EvalContext::distance(std::uint32_t u, std::uint32_t v, int cap) {
    if (prepared_->has_matrix()) {
        int d = prepared_->matrix_distance(u, v);
        if (d < 0) return -1;
        if (cap >= 0 && d > cap) return -1;
        return d;
    }
    return structure().distance(u, v, cap);
}

const std::vector<std::uint32_t>& EvalContext::ball_vertices(std::uint32_t v, int r) {
    auto key = std::make_pair(v, r);
    auto it = ball_cache_.find(key);
    if (it != ball_cache_.end()) return it->second;
    std::vector<std::uint32_t> out;
    if (prepared_->has_matrix()) {
        const std::size_t n = structure().size();
        for (std::uint32_t u = 0; u < n; ++u) {
            int d = prepared_->matrix_distance(v, u);
            if (d >= 0 && d <= r) out.push_back(u);
        }
    } else {
        out = structure().ball(v, r).to_vector();
    }
    return ball_cache_.emplace(key, std::move(out)).first->second;
}

namespace {

bool eval_node(const NodePtr& node, EvalContext& ctx, std::vector<std::uint32_t>& asg) {
    switch (node->kind) {
    case NodeKind::True:
        return true;
    case NodeKind::False:
        return false;
    case NodeKind::Rel: {
        std::vector<std::uint32_t> t(node->rel_vars.size());
        for (std::size_t i = 0; i < t.size(); ++i) t[i] = asg[node->rel_vars[i]];
        return ctx.prepared().tuple_holds(node->rel_name, t);
    }
    case NodeKind::Eq:
        return asg[node->var_a] == asg[node->var_b];
    case NodeKind::DistLe: {
        int d = ctx.distance(asg[node->var_a], asg[node->var_b], node->guard_radius);
        return d >= 0 && d <= node->guard_radius;
    }
    case NodeKind::DistGt: {
        int d = ctx.distance(asg[node->var_a], asg[node->var_b], node->guard_radius);
        return !(d >= 0 && d <= node->guard_radius);
    }
    case NodeKind::Not:
        return !eval_node(node->children[0], ctx, asg);
    case NodeKind::And:
        for (const auto& c : node->children)
            if (!eval_node(c, ctx, asg)) return false;
        return true;
    case NodeKind::Or:
        for (const auto& c : node->children)
            if (eval_node(c, ctx, asg)) return true;
        return false;
    case NodeKind::Exists: {
        for (std::uint32_t u : ctx.ball_vertices(asg[node->anchor_var], node->ball_radius)) {
            asg[node->bound_var] = u;
            if (eval_node(node->body, ctx, asg)) return true;
        }
        return false;
    }
    case NodeKind::Forall: {
        for (std::uint32_t u : ctx.ball_vertices(asg[node->anchor_var], node->ball_radius)) {
            asg[node->bound_var] = u;
            if (!eval_node(node->body, ctx, asg)) return false;
        }
        return true;
    }
    }
    return false;
}

int quantifier_depth(const NodePtr& node) {
    switch (node->kind) {
    case NodeKind::Not:
    case NodeKind::And:
    case NodeKind::Or: {
        int d = 0;
        for (const auto& c : node->children) d = std::max(d, quantifier_depth(c));
        return d;
    }
    case NodeKind::Exists:
    case NodeKind::Forall:
        return 1 + quantifier_depth(node->body);
    default:
        return 0;
    }
}

void check_relations(const Formula& phi, const PreparedStructure& prep) {
    for (const auto& name : phi.relation_names()) {
        if (!prep.relation_known(name))
            throw input_error("formula uses unknown relation '" + name + "'");
    }
}

} // namespace

std::size_t assignment_size(const Formula& phi) {
    return static_cast<std::size_t>(phi.free_count()) + quantifier_depth(phi.root());
}

bool evaluate(const Formula& phi, EvalContext& ctx, std::vector<std::uint32_t>& assignment) {
    if (assignment.size() < assignment_size(phi))
        assignment.resize(assignment_size(phi), 0);
    return eval_node(phi.root(), ctx, assignment);
}

std::vector<std::vector<std::uint32_t>> satisfaction_set(const Structure& a, const Formula& phi) {
    EvalContext ctx(a);
    check_relations(phi, ctx.prepared());
    const int p = phi.free_count();
    std::vector<std::vector<std::uint32_t>> out;
    std::vector<std::uint32_t> asg(assignment_size(phi), 0);
    if (p == 0) {
        if (eval_node(phi.root(), ctx, asg)) out.push_back({});
        return out;
    }
    const std::size_t n = a.size();
    std::vector<std::uint32_t> tuple(p, 0);
    while (true) {
        for (int i = 0; i < p; ++i) asg[i] = tuple[i];
        if (eval_node(phi.root(), ctx, asg)) out.push_back(tuple);
        int i = p - 1;
        while (i >= 0 && tuple[i] + 1 == n) tuple[i--] = 0;
        if (i < 0) break;
        ++tuple[i];
    }
    return out;
}

double stone_pairing(const Structure& a, const Formula& phi) {
    EvalContext ctx(a);
    check_relations(phi, ctx.prepared());
    return kernels::pairing_sum(ctx, phi);
}

double local_stone_pairing(const Structure& a, const Formula& phi, std::uint32_t v) {
    if (v >= a.size()) throw input_error("vertex id out of range");
    if (phi.free_count() < 1) throw input_error("local pairing needs at least one free variable");
    EvalContext ctx(a);
    check_relations(phi, ctx.prepared());
    return kernels::local_pairing_sum(ctx, phi, v);
}

} // namespace limclust
