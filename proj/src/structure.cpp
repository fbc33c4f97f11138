#include "limclust/structure.hpp"

#include <algorithm>
#include <cmath>
#include <deque>

namespace limclust {

namespace {
constexpr double kWeightSumTol = 1e-12;
}

void Signature::add(const std::string& name, int arity, bool is_mark) {
    if (arity < 1) throw input_error("relation '" + name + "' has non-positive arity");
    if (has(name)) throw input_error("duplicate relation name '" + name + "'");
    if (is_mark && arity != 1) throw input_error("mark '" + name + "' must be unary");
    names_.push_back(name);
    arities_.push_back(arity);
    marks_.push_back(is_mark);
}

std::size_t Signature::index_of(const std::string& name) const {
    for (std::size_t i = 0; i < names_.size(); ++i)
        if (names_[i] == name) return i;
    throw input_error("unknown relation '" + name + "'");
}

bool Signature::has(const std::string& name) const {
    for (const auto& n : names_)
        if (n == name) return true;
    return false;
}

int Signature::arity_of(const std::string& name) const { return arities_[index_of(name)]; }
bool Signature::is_mark(const std::string& name) const { return marks_[index_of(name)]; }

Signature Signature::of(const Structure& a) {
    Signature s;
    for (const Relation& r : a.relations()) s.add(r.name, r.arity, r.is_mark);
    return s;
}

Structure::Structure(std::size_t n, std::vector<double> weights, std::vector<Relation> relations)
    : n_(n), weights_(std::move(weights)), relations_(std::move(relations)) {
    std::sort(relations_.begin(), relations_.end(),
              [](const Relation& a, const Relation& b) { return a.name < b.name; });
    validate();
    build_gaifman();
}

Structure Structure::uniform(std::size_t n, std::vector<Relation> relations) {
    if (n == 0) throw input_error("empty domain");
    return Structure(n, std::vector<double>(n, 1.0 / static_cast<double>(n)), std::move(relations));
}

void Structure::validate() const {
    if (n_ == 0) throw input_error("empty domain");
    if (weights_.size() != n_) throw input_error("weight vector size mismatch");
    double sum = 0.0;
    for (std::size_t v = 0; v < n_; ++v) {
        if (weights_[v] < 0.0)
            throw input_error("negative weight at vertex " + std::to_string(v));
        sum += weights_[v];
    }
    if (std::abs(sum - 1.0) > kWeightSumTol)
        throw input_error("vertex weights sum to " + std::to_string(sum) + ", expected 1");
    for (std::size_t ri = 0; ri < relations_.size(); ++ri) {
        const Relation& r = relations_[ri];
        if (r.arity < 1)
            throw input_error("relation '" + r.name + "' has non-positive arity");
        if (r.is_mark && r.arity != 1)
            throw input_error("mark '" + r.name + "' must be unary");
        if (ri > 0 && relations_[ri - 1].name == r.name)
            throw input_error("duplicate relation name '" + r.name + "'");
        for (std::size_t ti = 0; ti < r.tuples.size(); ++ti) {
            const auto& t = r.tuples[ti];
            if (static_cast<int>(t.size()) != r.arity)
                throw input_error("relations." + r.name + ".tuples[" + std::to_string(ti) +
                                  "] has wrong arity");
            for (std::size_t k = 0; k < t.size(); ++k) {
                if (t[k] >= n_)
                    throw input_error("relations." + r.name + ".tuples[" + std::to_string(ti) +
                                      "][" + std::to_string(k) + "] = " + std::to_string(t[k]) +
                                      " out of range (n=" + std::to_string(n_) + ")");
            }
        }
    }
}

void Structure::build_gaifman() {
    adj_.assign(n_, {});
    for (const Relation& r : relations_) {
        for (const auto& t : r.tuples) {
            for (std::size_t i = 0; i < t.size(); ++i) {
                for (std::size_t j = i + 1; j < t.size(); ++j) {
                    if (t[i] == t[j]) continue;
                    adj_[t[i]].push_back(t[j]);
                    adj_[t[j]].push_back(t[i]);
                }
            }
        }
    }
    for (auto& nb : adj_) {
        std::sort(nb.begin(), nb.end());
        nb.erase(std::unique(nb.begin(), nb.end()), nb.end());
    }
}

const Relation* Structure::find_relation(const std::string& name) const {
    auto it = std::lower_bound(relations_.begin(), relations_.end(), name,
                               [](const Relation& r, const std::string& n) { return r.name < n; });
    if (it != relations_.end() && it->name == name) return &*it;
    return nullptr;
}

std::size_t Structure::gaifman_edge_count() const {
    std::size_t deg = 0;
    for (const auto& nb : adj_) deg += nb.size();
    return deg / 2;
}

std::size_t Structure::max_degree() const {
    std::size_t m = 0;
    for (const auto& nb : adj_) m = std::max(m, nb.size());
    return m;
}

double Structure::measure(const VertexSet& X) const {
    if (X.domain_size() != n_) throw input_error("vertex set over wrong domain");
    double s = 0.0;
    X.for_each([&](std::uint32_t v) { s += weights_[v]; });
    return s;
}

VertexSet Structure::ball(const VertexSet& X, int d) const {
    if (X.domain_size() != n_) throw input_error("vertex set over wrong domain");
    if (d < 0) throw input_error("negative radius");
    VertexSet visited = X;
    std::vector<std::uint32_t> frontier = X.to_vector();
    for (int step = 0; step < d && !frontier.empty(); ++step) {
        std::vector<std::uint32_t> next;
        for (std::uint32_t u : frontier) {
            for (std::uint32_t w : adj_[u]) {
                if (!visited.test(w)) {
                    visited.set(w);
                    next.push_back(w);
                }
            }
        }
        frontier = std::move(next);
    }
    return visited;
}

VertexSet Structure::ball(std::uint32_t v, int d) const {
    VertexSet x(n_);
    x.set(v);
    return ball(x, d);
}

VertexSet Structure::outer_boundary(const VertexSet& X) const {
    return ball(X, 1) - X;
}

int Structure::distance(std::uint32_t u, std::uint32_t v, int cap) const {
    if (u >= n_ || v >= n_) throw input_error("vertex id out of range");
    if (u == v) return 0;
    std::vector<int> dist(n_, -1);
    dist[u] = 0;
    std::deque<std::uint32_t> q{u};
    while (!q.empty()) {
        std::uint32_t x = q.front();
        q.pop_front();
        if (cap >= 0 && dist[x] >= cap) break;
        for (std::uint32_t w : adj_[x]) {
            if (dist[w] < 0) {
                dist[w] = dist[x] + 1;
                if (w == v) return dist[w];
                q.push_back(w);
            }
        }
    }
    return dist[v];
}

Structure Structure::induce(const VertexSet& X) const {
    double nuX = measure(X);
    if (nuX <= 0.0)
        throw domain_error("induced substructure undefined: subset has zero measure");
    std::vector<std::uint32_t> ids = X.to_vector();
    std::vector<std::uint32_t> remap(n_, UINT32_MAX);
    for (std::size_t i = 0; i < ids.size(); ++i) remap[ids[i]] = static_cast<std::uint32_t>(i);

    std::vector<double> w(ids.size());
    for (std::size_t i = 0; i < ids.size(); ++i) w[i] = weights_[ids[i]] / nuX;
    // renormalization leaves a rounding residue; absorb it to keep the sum exact
    double s = 0.0;
    for (double x : w) s += x;
    if (!w.empty() && s != 0.0)
        for (double& x : w) x /= s;

    std::vector<Relation> rels;
    rels.reserve(relations_.size());
    for (const Relation& r : relations_) {
        Relation nr;
        nr.name = r.name;
        nr.arity = r.arity;
        nr.is_mark = r.is_mark;
        for (const auto& t : r.tuples) {
            bool inside = true;
            for (auto v : t)
                if (!X.test(v)) { inside = false; break; }
            if (!inside) continue;
            std::vector<std::uint32_t> nt(t.size());
            for (std::size_t k = 0; k < t.size(); ++k) nt[k] = remap[t[k]];
            nr.tuples.push_back(std::move(nt));
        }
        rels.push_back(std::move(nr));
    }
    return Structure(ids.size(), std::move(w), std::move(rels));
}

Structure Structure::remove(const VertexSet& X) const {
    if (measure(X) >= 1.0 - kWeightSumTol && X.count() == n_)
        throw domain_error("cannot remove the full domain");
    return induce(X.complement());
}

Structure Structure::with_mark(const std::string& name, const VertexSet& X) const {
    if (X.domain_size() != n_) throw input_error("vertex set over wrong domain");
    const Relation* existing = find_relation(name);
    if (existing && existing->arity != 1)
        throw input_error("mark '" + name + "' clashes with a non-unary relation");
    std::vector<Relation> rels;
    rels.reserve(relations_.size() + 1);
    for (const Relation& r : relations_)
        if (r.name != name) rels.push_back(r);
    Relation m;
    m.name = name;
    m.arity = 1;
    m.is_mark = true;
    X.for_each([&](std::uint32_t v) { m.tuples.push_back({v}); });
    rels.push_back(std::move(m));
    return Structure(n_, weights_, std::move(rels));
}

Structure Structure::without_relation(const std::string& name) const {
    std::vector<Relation> rels;
    for (const Relation& r : relations_)
        if (r.name != name) rels.push_back(r);
    if (rels.size() == relations_.size())
        throw input_error("no relation named '" + name + "'");
    return Structure(n_, weights_, std::move(rels));
}

VertexSet Structure::mark_set(const std::string& name) const {
    const Relation* r = find_relation(name);
    if (!r) throw input_error("no relation named '" + name + "'");
    if (r->arity != 1) throw input_error("relation '" + name + "' is not unary");
    VertexSet s(n_);
    for (const auto& t : r->tuples) s.set(t[0]);
    return s;
}

VertexSet Structure::connected_component(std::uint32_t v) const {
    return ball(v, static_cast<int>(n_));
}

std::vector<VertexSet> Structure::connected_components() const {
    std::vector<VertexSet> comps;
    VertexSet seen(n_);
    for (std::uint32_t v = 0; v < n_; ++v) {
        if (seen.test(v)) continue;
        VertexSet c = connected_component(v);
        seen |= c;
        comps.push_back(std::move(c));
    }
    return comps;
}

bool Structure::operator==(const Structure& o) const {
    if (n_ != o.n_ || weights_ != o.weights_) return false;
    if (relations_.size() != o.relations_.size()) return false;
    for (std::size_t i = 0; i < relations_.size(); ++i) {
        const Relation& a = relations_[i];
        const Relation& b = o.relations_[i];
        if (a.name != b.name || a.arity != b.arity) return false;
        auto ta = a.tuples;
        auto tb = b.tuples;
        std::sort(ta.begin(), ta.end());
        std::sort(tb.begin(), tb.end());
        if (ta != tb) return false;
    }
    return true;
}

Structure Structure::weighted_sum(const std::vector<std::pair<double, Structure>>& parts) {
    if (parts.empty()) throw input_error("weighted sum of zero parts");
    double lsum = 0.0;
    for (const auto& [lambda, part] : parts) {
        if (lambda < 0.0) throw input_error("negative part weight");
        lsum += lambda;
    }
    if (std::abs(lsum - 1.0) > kWeightSumTol)
        throw input_error("part weights sum to " + std::to_string(lsum) + ", expected 1");

    std::size_t total = 0;
    for (const auto& [lambda, part] : parts) total += part.size();

    std::vector<double> weights;
    weights.reserve(total);
    std::vector<Relation> rels;
    std::size_t offset = 0;
    for (const auto& [lambda, part] : parts) {
        for (std::size_t v = 0; v < part.size(); ++v)
            weights.push_back(lambda * part.weight(static_cast<std::uint32_t>(v)));
        for (const Relation& r : part.relations()) {
            Relation* dst = nullptr;
            for (auto& existing : rels) {
                if (existing.name == r.name) {
                    if (existing.arity != r.arity)
                        throw input_error("relation '" + r.name + "' has conflicting arities across parts");
                    dst = &existing;
                    break;
                }
            }
            if (!dst) {
                rels.push_back({r.name, r.arity, {}, r.is_mark});
                dst = &rels.back();
            }
            for (const auto& t : r.tuples) {
                std::vector<std::uint32_t> nt(t.size());
                for (std::size_t k = 0; k < t.size(); ++k)
                    nt[k] = static_cast<std::uint32_t>(t[k] + offset);
                dst->tuples.push_back(std::move(nt));
            }
        }
        offset += part.size();
    }
    return Structure(total, std::move(weights), std::move(rels));
}

} // namespace limclust
