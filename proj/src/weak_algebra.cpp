#include "limclust/weak_algebra.hpp"

#include <algorithm>
#include <map>
#include <random>
#include <set>
#include <sstream>

namespace limclust {

// ---- precondition test family ------------------------------------------------

namespace {

std::vector<std::vector<std::uint32_t>> all_tuples(std::size_t n, int arity) {
    std::vector<std::vector<std::uint32_t>> out;
    std::vector<std::uint32_t> t(arity, 0);
    while (true) {
        out.push_back(t);
        int i = arity - 1;
        while (i >= 0 && t[i] + 1 == n) t[i--] = 0;
        if (i < 0) break;
        ++t[i];
    }
    return out;
}

} // namespace

std::vector<Structure> precondition_test_family(const Signature& sig, int max_n,
                                                std::size_t cap) {
    std::vector<Structure> family;
    std::mt19937 rng(0x5eed);
    for (int n = 1; n <= max_n && family.size() < cap; ++n) {
        std::vector<std::vector<std::vector<std::uint32_t>>> candidates;
        std::size_t total_bits = 0;
        for (const auto& name : sig.names()) {
            candidates.push_back(all_tuples(static_cast<std::size_t>(n), sig.arity_of(name)));
            total_bits += candidates.back().size();
        }
        auto build = [&](const std::vector<std::vector<bool>>& pick) {
            std::vector<Relation> rels;
            for (std::size_t ri = 0; ri < candidates.size(); ++ri) {
                Relation r;
                r.name = sig.names()[ri];
                r.arity = sig.arity_of(r.name);
                r.is_mark = sig.is_mark(r.name);
                for (std::size_t ti = 0; ti < candidates[ri].size(); ++ti)
                    if (pick[ri][ti]) r.tuples.push_back(candidates[ri][ti]);
                rels.push_back(std::move(r));
            }
            family.push_back(Structure::uniform(static_cast<std::size_t>(n), std::move(rels)));
        };
        if (total_bits <= 14) {
            for (std::uint64_t mask = 0; mask < (std::uint64_t{1} << total_bits) && family.size() < cap; ++mask) {
                std::vector<std::vector<bool>> pick;
                std::size_t bit = 0;
                for (const auto& c : candidates) {
                    std::vector<bool> p(c.size());
                    for (std::size_t i = 0; i < c.size(); ++i) p[i] = (mask >> bit++) & 1;
                    pick.push_back(std::move(p));
                }
                build(pick);
            }
        } else {
            std::size_t samples = std::min<std::size_t>(cap - family.size(), cap / 2);
            for (std::size_t s = 0; s < samples; ++s) {
                double density = std::uniform_real_distribution<>(0.1, 0.9)(rng);
                std::vector<std::vector<bool>> pick;
                for (const auto& c : candidates) {
                    std::vector<bool> p(c.size());
                    for (std::size_t i = 0; i < c.size(); ++i)
                        p[i] = std::uniform_real_distribution<>(0.0, 1.0)(rng) < density;
                    pick.push_back(std::move(p));
                }
                build(pick);
            }
        }
    }
    return family;
}

// ---- weak algebra operations ---------------------------------------------------

namespace {

// Syntactic unsatisfiability of a conjunction: complementary children.
bool obviously_disjoint(const Formula& phi, const Formula& psi) {
    NodePtr conj = ast::make_and({phi.root(), psi.root()});
    if (conj->kind == NodeKind::False) return true;
    if (conj->kind != NodeKind::And) return false;
    std::set<std::string> seen;
    std::ostringstream os;
    for (const auto& c : conj->children) {
        Formula tmp = Formula::from_tree(c, std::max(phi.free_count(), psi.free_count()));
        seen.insert(tmp.to_string());
    }
    for (const auto& c : conj->children) {
        Formula neg = Formula::from_tree(ast::make_not(c), std::max(phi.free_count(), psi.free_count()));
        if (seen.count(neg.to_string())) return true;
    }
    return false;
}

std::string witness_description(const Structure& a, std::size_t index) {
    std::ostringstream os;
    os << "family structure #" << index << " (n=" << a.size();
    for (const Relation& r : a.relations()) os << ", |" << r.name << "|=" << r.tuples.size();
    os << ")";
    return os.str();
}

} // namespace

Formula weak_add(const Formula& phi, const Formula& psi, const std::vector<Structure>& family) {
    int p = std::max(phi.free_count(), psi.free_count());
    Formula conj = Formula::from_tree(ast::make_and({phi.root(), psi.root()}), p);
    if (!obviously_disjoint(phi, psi)) {
        for (std::size_t i = 0; i < family.size(); ++i) {
            if (stone_pairing(family[i], conj) > 0.0)
                throw algebra_error("weak_add precondition failed: phi & psi satisfiable on " +
                                    witness_description(family[i], i));
        }
    }
    return Formula::from_tree(ast::make_or({phi.root(), psi.root()}), p);
}

Formula weak_sub(const Formula& phi, const Formula& psi, const std::vector<Structure>& family) {
    int p = std::max(phi.free_count(), psi.free_count());
    Formula escapes =
        Formula::from_tree(ast::make_and({psi.root(), ast::make_not(phi.root())}), p);
    for (std::size_t i = 0; i < family.size(); ++i) {
        if (stone_pairing(family[i], escapes) > 0.0)
            throw algebra_error("weak_sub precondition failed: psi does not entail phi on " +
                                witness_description(family[i], i));
    }
    return Formula::from_tree(ast::make_and({phi.root(), ast::make_not(psi.root())}), p);
}

Formula free_product(const Formula& phi, const Formula& psi) {
    int p = phi.free_count();
    std::vector<int> shift(psi.free_count());
    for (int i = 0; i < psi.free_count(); ++i) shift[i] = i + p;
    NodePtr shifted = ast::rename_vars(psi.root(), shift);
    return Formula::from_tree(ast::make_and({phi.root(), shifted}), p + psi.free_count());
}

Formula rename(const Formula& phi, const std::vector<int>& iota) {
    if (static_cast<int>(iota.size()) < phi.free_count())
        throw input_error("rename mapping shorter than free variable count");
    std::set<int> targets;
    int max_target = -1;
    for (int i = 0; i < phi.free_count(); ++i) {
        if (iota[i] < 0) throw input_error("rename target negative");
        if (!targets.insert(iota[i]).second)
            throw input_error("rename mapping not injective");
        max_target = std::max(max_target, iota[i]);
    }
    return Formula::from_tree(ast::rename_vars(phi.root(), iota), max_target + 1);
}

// ---- pairing polynomial ---------------------------------------------------------

int PairingPolynomial::degree() const {
    int deg = 0;
    for (const auto& t : terms) {
        int d = 0;
        for (const auto& [g, e] : t.monomial) d += e;
        deg = std::max(deg, d);
    }
    return deg;
}

double PairingPolynomial::evaluate(const std::vector<double>& vals) const {
    double sum = 0.0;
    for (const auto& t : terms) {
        double m = static_cast<double>(t.coeff);
        for (const auto& [g, e] : t.monomial)
            for (int k = 0; k < e; ++k) m *= vals[static_cast<std::size_t>(g)];
        sum += m;
    }
    return sum;
}

double PairingPolynomial::evaluate(const Structure& a) const {
    std::vector<double> vals(generators.size());
    for (std::size_t i = 0; i < generators.size(); ++i) vals[i] = stone_pairing(a, generators[i]);
    return evaluate(vals);
}

std::string PairingPolynomial::to_string() const {
    std::ostringstream os;
    bool first = true;
    for (const auto& t : terms) {
        if (!first) os << " + ";
        first = false;
        os << t.coeff;
        for (const auto& [g, e] : t.monomial) {
            os << "*X" << g;
            if (e > 1) os << "^" << e;
        }
    }
    if (first) os << "0";
    os << "  where";
    for (std::size_t i = 0; i < generators.size(); ++i)
        os << "\n  X" << i << " := " << generators[i].to_string();
    return os.str();
}

// ---- strongly local decomposition ------------------------------------------------

namespace {

using Monomial = std::vector<std::pair<int, int>>;
using PolyMap = std::map<Monomial, long long>;

void poly_add(PolyMap& into, const PolyMap& other, long long scale) {
    for (const auto& [m, c] : other) {
        auto it = into.emplace(m, 0).first;
        it->second += c * scale;
        if (it->second == 0) into.erase(it);
    }
}

Monomial monomial_mul(const Monomial& a, int gen) {
    Monomial m = a;
    for (auto& [g, e] : m) {
        if (g == gen) {
            ++e;
            return m;
        }
    }
    m.emplace_back(gen, 1);
    std::sort(m.begin(), m.end());
    return m;
}

struct UnionFind {
    std::vector<int> parent;
    explicit UnionFind(int n) : parent(n) {
        for (int i = 0; i < n; ++i) parent[i] = i;
    }
    int find(int x) { return parent[x] == x ? x : parent[x] = find(parent[x]); }
    void unite(int a, int b) { parent[find(a)] = find(b); }
};

// Boolean tree over component-pure leaf formulas.
struct BoolTree {
    enum Kind { ConstTrue, ConstFalse, Leaf, NotT, AndT, OrT } kind = ConstTrue;
    int leaf = -1;
    std::vector<BoolTree> children;
};

// Structural key over raw slot ids; usable on subtrees that still reference
// enclosing binders.
std::string raw_key(const NodePtr& node) {
    std::ostringstream os;
    switch (node->kind) {
    case NodeKind::True: os << "T"; break;
    case NodeKind::False: os << "F"; break;
    case NodeKind::Rel:
        os << "R:" << node->rel_name << "(";
        for (int v : node->rel_vars) os << v << ",";
        os << ")";
        break;
    case NodeKind::Eq: os << "E:" << node->var_a << "," << node->var_b; break;
    case NodeKind::DistLe:
        os << "L:" << node->var_a << "," << node->var_b << "," << node->guard_radius;
        break;
    case NodeKind::DistGt:
        os << "G:" << node->var_a << "," << node->var_b << "," << node->guard_radius;
        break;
    case NodeKind::Not: os << "!(" << raw_key(node->children[0]) << ")"; break;
    case NodeKind::And:
    case NodeKind::Or:
        os << (node->kind == NodeKind::And ? "&(" : "|(");
        for (const auto& c : node->children) os << raw_key(c) << ";";
        os << ")";
        break;
    case NodeKind::Exists:
    case NodeKind::Forall:
        os << (node->kind == NodeKind::Exists ? "Q" : "A") << node->bound_var << "@"
           << node->anchor_var << "~" << node->ball_radius << "(" << raw_key(node->body) << ")";
        break;
    }
    return os.str();
}

struct LeafTable {
    std::vector<NodePtr> nodes;
    std::vector<int> comps;
    std::vector<std::string> keys;
    int p;

    int intern(const NodePtr& node, int comp) {
        std::string key = raw_key(node);
        for (std::size_t i = 0; i < keys.size(); ++i)
            if (keys[i] == key) return static_cast<int>(i);
        nodes.push_back(node);
        comps.push_back(comp);
        keys.push_back(std::move(key));
        return static_cast<int>(nodes.size()) - 1;
    }
};

class Decomposer {
public:
    explicit Decomposer(const Formula& phi) : phi_(phi), p_(phi.free_count()) {
        if (p_ > 6) throw input_error("decomposition variable budget exceeded (p <= 6)");
        if (phi.radius() > 16) throw input_error("decomposition radius budget exceeded (r <= 16)");
        sep_ = 2 * phi.radius();
        pairs_.clear();
        for (int i = 0; i < p_; ++i)
            for (int j = i + 1; j < p_; ++j) pairs_.emplace_back(i, j);
    }

    PairingPolynomial run() {
        PolyMap poly;
        const std::size_t npat = std::size_t{1} << pairs_.size();
        for (std::size_t pattern = 0; pattern < npat; ++pattern) {
            UnionFind uf(p_);
            for (std::size_t e = 0; e < pairs_.size(); ++e)
                if (pattern & (std::size_t{1} << e)) uf.unite(pairs_[e].first, pairs_[e].second);
            std::vector<int> comp_of(p_);
            std::map<int, int> roots;
            for (int i = 0; i < p_; ++i) {
                int r = uf.find(i);
                auto it = roots.emplace(r, static_cast<int>(roots.size())).first;
                comp_of[i] = it->second;
            }
            int k = static_cast<int>(roots.size());
            if (k == 1) {
                NodePtr g = phi_.root();
                std::vector<NodePtr> cs{g};
                append_pattern_guards(cs, pattern, comp_of, /*within_only=*/false);
                int gen = intern_generator(ast::make_and(std::move(cs)), identity_vars());
                poly_add(poly, PolyMap{{monomial_mul({}, gen), 1}}, 1);
                continue;
            }
            // far-separated components: residualize and expand
            NodePtr resid = residualize(phi_.root(), comp_of);
            LeafTable leaves;
            leaves.p = p_;
            BoolTree tree = normalize(resid, comp_of, leaves);
            std::map<std::set<int>, long long> mlin = multilinear(tree);
            for (const auto& [T, c] : mlin) {
                std::vector<std::vector<NodePtr>> per_comp(static_cast<std::size_t>(k));
                for (int leaf : T)
                    per_comp[static_cast<std::size_t>(leaves.comps[static_cast<std::size_t>(leaf)])]
                        .push_back(leaves.nodes[static_cast<std::size_t>(leaf)]);
                std::vector<Block> blocks;
                for (int z = 0; z < k; ++z) {
                    std::vector<NodePtr> cs = per_comp[static_cast<std::size_t>(z)];
                    append_component_pattern(cs, pattern, comp_of, z);
                    Block b;
                    b.tree = ast::make_and(std::move(cs));
                    for (int i = 0; i < p_; ++i)
                        if (comp_of[i] == z) b.vars.push_back(i);
                    blocks.push_back(std::move(b));
                }
                PolyMap contribution = decomp_far(blocks);
                poly_add(poly, contribution, c);
            }
        }
        PairingPolynomial out;
        out.generators = gens_;
        for (const auto& [m, c] : poly) out.terms.push_back({m, c});
        return out;
    }

private:
    struct Block {
        NodePtr tree;
        std::vector<int> vars; // original slots, ascending
    };

    std::vector<int> identity_vars() const {
        std::vector<int> v(p_);
        for (int i = 0; i < p_; ++i) v[i] = i;
        return v;
    }

    bool pattern_edge(std::size_t pattern, int i, int j) const {
        for (std::size_t e = 0; e < pairs_.size(); ++e)
            if (pairs_[e] == std::make_pair(std::min(i, j), std::max(i, j)))
                return (pattern >> e) & 1;
        return false;
    }

    void append_pattern_guards(std::vector<NodePtr>& cs, std::size_t pattern,
                               const std::vector<int>& comp_of, bool within_only) const {
        for (std::size_t e = 0; e < pairs_.size(); ++e) {
            auto [i, j] = pairs_[e];
            if (within_only && comp_of[i] != comp_of[j]) continue;
            if (pattern & (std::size_t{1} << e))
                cs.push_back(ast::make_dist_le(i, j, sep_));
            else
                cs.push_back(ast::make_dist_gt(i, j, sep_));
        }
    }

    void append_component_pattern(std::vector<NodePtr>& cs, std::size_t pattern,
                                  const std::vector<int>& comp_of, int z) const {
        for (std::size_t e = 0; e < pairs_.size(); ++e) {
            auto [i, j] = pairs_[e];
            if (comp_of[i] != z || comp_of[j] != z) continue;
            if (pattern & (std::size_t{1} << e))
                cs.push_back(ast::make_dist_le(i, j, sep_));
            else
                cs.push_back(ast::make_dist_gt(i, j, sep_));
        }
    }

    // -- cross-component elimination under the far pattern --

    NodePtr residualize(const NodePtr& node, const std::vector<int>& comp_of) {
        std::vector<std::pair<int, int>> bound_comp; // (slot, component)
        return resid_impl(node, comp_of, bound_comp);
    }

    NodePtr resid_impl(const NodePtr& node, const std::vector<int>& comp_of,
                       std::vector<std::pair<int, int>>& bound_comp) {
        auto comp = [&](int v) -> int {
            for (auto it = bound_comp.rbegin(); it != bound_comp.rend(); ++it)
                if (it->first == v) return it->second;
            return comp_of[v];
        };
        switch (node->kind) {
        case NodeKind::True:
        case NodeKind::False:
            return node;
        case NodeKind::Rel: {
            int c0 = comp(node->rel_vars[0]);
            for (int v : node->rel_vars)
                if (comp(v) != c0) return ast::make_false();
            return node;
        }
        case NodeKind::Eq:
            if (comp(node->var_a) != comp(node->var_b)) return ast::make_false();
            return node;
        case NodeKind::DistLe:
            if (comp(node->var_a) != comp(node->var_b)) return ast::make_false();
            return node;
        case NodeKind::DistGt:
            if (comp(node->var_a) != comp(node->var_b)) return ast::make_true();
            return node;
        case NodeKind::Not:
            return ast::make_not(resid_impl(node->children[0], comp_of, bound_comp));
        case NodeKind::And:
        case NodeKind::Or: {
            std::vector<NodePtr> cs;
            for (const auto& c : node->children)
                cs.push_back(resid_impl(c, comp_of, bound_comp));
            return node->kind == NodeKind::And ? ast::make_and(std::move(cs))
                                               : ast::make_or(std::move(cs));
        }
        case NodeKind::Exists:
        case NodeKind::Forall: {
            bound_comp.emplace_back(node->bound_var, comp(node->anchor_var));
            NodePtr body = resid_impl(node->body, comp_of, bound_comp);
            bound_comp.pop_back();
            return node->kind == NodeKind::Exists
                       ? ast::make_exists(node->bound_var, node->anchor_var, node->ball_radius,
                                          std::move(body))
                       : ast::make_forall(node->bound_var, node->anchor_var, node->ball_radius,
                                          std::move(body));
        }
        }
        return node;
    }

    // -- mini-scoping into component-pure leaves --

    std::set<int> free_components(const NodePtr& node, const std::vector<int>& comp_of,
                                  std::vector<std::pair<int, int>>& bound_comp) {
        std::set<int> out;
        auto comp = [&](int v) -> int {
            for (auto it = bound_comp.rbegin(); it != bound_comp.rend(); ++it)
                if (it->first == v) return it->second;
            return comp_of[v];
        };
        switch (node->kind) {
        case NodeKind::True:
        case NodeKind::False:
            return out;
        case NodeKind::Rel:
            for (int v : node->rel_vars) out.insert(comp(v));
            return out;
        case NodeKind::Eq:
        case NodeKind::DistLe:
        case NodeKind::DistGt:
            out.insert(comp(node->var_a));
            out.insert(comp(node->var_b));
            return out;
        case NodeKind::Not:
        case NodeKind::And:
        case NodeKind::Or:
            for (const auto& c : node->children) {
                auto s = free_components(c, comp_of, bound_comp);
                out.insert(s.begin(), s.end());
            }
            return out;
        case NodeKind::Exists:
        case NodeKind::Forall: {
            out.insert(comp(node->anchor_var));
            bound_comp.emplace_back(node->bound_var, comp(node->anchor_var));
            auto s = free_components(node->body, comp_of, bound_comp);
            bound_comp.pop_back();
            out.insert(s.begin(), s.end());
            return out;
        }
        }
        return out;
    }

    bool mentions_var(const NodePtr& node, int slot) {
        switch (node->kind) {
        case NodeKind::True:
        case NodeKind::False:
            return false;
        case NodeKind::Rel:
            return std::find(node->rel_vars.begin(), node->rel_vars.end(), slot) !=
                   node->rel_vars.end();
        case NodeKind::Eq:
        case NodeKind::DistLe:
        case NodeKind::DistGt:
            return node->var_a == slot || node->var_b == slot;
        case NodeKind::Not:
        case NodeKind::And:
        case NodeKind::Or:
            for (const auto& c : node->children)
                if (mentions_var(c, slot)) return true;
            return false;
        case NodeKind::Exists:
        case NodeKind::Forall:
            if (node->anchor_var == slot) return true;
            if (node->bound_var == slot) return false; // shadowed
            return mentions_var(node->body, slot);
        }
        return false;
    }

    BoolTree normalize(const NodePtr& node, const std::vector<int>& comp_of, LeafTable& leaves) {
        std::vector<std::pair<int, int>> bound_comp;
        return norm_impl(node, comp_of, leaves, bound_comp);
    }

    BoolTree norm_impl(const NodePtr& node, const std::vector<int>& comp_of, LeafTable& leaves,
                       std::vector<std::pair<int, int>>& bound_comp) {
        if (node->kind == NodeKind::True) return BoolTree{BoolTree::ConstTrue, -1, {}};
        if (node->kind == NodeKind::False) return BoolTree{BoolTree::ConstFalse, -1, {}};
        auto comps = free_components(node, comp_of, bound_comp);
        if (comps.size() <= 1) {
            int comp = comps.empty() ? 0 : *comps.begin();
            return BoolTree{BoolTree::Leaf, leaves.intern(node, comp), {}};
        }
        switch (node->kind) {
        case NodeKind::Not: {
            BoolTree t{BoolTree::NotT, -1, {}};
            t.children.push_back(norm_impl(node->children[0], comp_of, leaves, bound_comp));
            return t;
        }
        case NodeKind::And:
        case NodeKind::Or: {
            BoolTree t{node->kind == NodeKind::And ? BoolTree::AndT : BoolTree::OrT, -1, {}};
            for (const auto& c : node->children)
                t.children.push_back(norm_impl(c, comp_of, leaves, bound_comp));
            return t;
        }
        case NodeKind::Exists:
        case NodeKind::Forall: {
            // the body mixes components: distribute the quantifier over the
            // parts that do not mention the bound variable
            auto comp = [&](int v) -> int {
                for (auto it = bound_comp.rbegin(); it != bound_comp.rend(); ++it)
                    if (it->first == v) return it->second;
                return comp_of[v];
            };
            int anchor_comp = comp(node->anchor_var);
            bound_comp.emplace_back(node->bound_var, anchor_comp);
            BoolTree body = norm_impl(node->body, comp_of, leaves, bound_comp);
            bound_comp.pop_back();
            bool existential = node->kind == NodeKind::Exists;
            // clause form over leaves: DNF for exists, CNF for forall
            std::vector<std::vector<std::pair<int, bool>>> clauses =
                existential ? to_dnf(body) : to_cnf(body);
            std::vector<BoolTree> outer;
            for (const auto& clause : clauses) {
                std::vector<NodePtr> dependent;
                std::vector<BoolTree> rest;
                for (const auto& [leaf, positive] : clause) {
                    const NodePtr& ln = leaves.nodes[static_cast<std::size_t>(leaf)];
                    if (mentions_var(ln, node->bound_var)) {
                        dependent.push_back(positive ? ln : ast::make_not(ln));
                    } else {
                        BoolTree lt{BoolTree::Leaf, leaf, {}};
                        if (!positive) {
                            BoolTree n{BoolTree::NotT, -1, {}};
                            n.children.push_back(lt);
                            lt = n;
                        }
                        rest.push_back(lt);
                    }
                }
                if (!dependent.empty()) {
                    NodePtr inner = existential ? ast::make_and(std::move(dependent))
                                                : ast::make_or(std::move(dependent));
                    NodePtr quantified =
                        existential
                            ? ast::make_exists(node->bound_var, node->anchor_var,
                                               node->ball_radius, std::move(inner))
                            : ast::make_forall(node->bound_var, node->anchor_var,
                                               node->ball_radius, std::move(inner));
                    if (quantified->kind == NodeKind::True)
                        rest.push_back(BoolTree{BoolTree::ConstTrue, -1, {}});
                    else if (quantified->kind == NodeKind::False)
                        rest.push_back(BoolTree{BoolTree::ConstFalse, -1, {}});
                    else
                        rest.push_back(
                            BoolTree{BoolTree::Leaf, leaves.intern(quantified, anchor_comp), {}});
                }
                // closed ball is never empty, so a clause with no dependent
                // part keeps its plain meaning
                BoolTree combined{existential ? BoolTree::AndT : BoolTree::OrT, -1,
                                  std::move(rest)};
                outer.push_back(std::move(combined));
            }
            return BoolTree{existential ? BoolTree::OrT : BoolTree::AndT, -1, std::move(outer)};
        }
        default:
            throw input_error("unexpected mixed-component atom after residualization");
        }
    }

    // clause conversions over leaf literals
    std::vector<std::vector<std::pair<int, bool>>> to_dnf(const BoolTree& t) {
        return clause_form(t, /*positive=*/true, /*dnf=*/true);
    }
    std::vector<std::vector<std::pair<int, bool>>> to_cnf(const BoolTree& t) {
        return clause_form(t, /*positive=*/true, /*dnf=*/false);
    }

    // Exact clause form; `dnf` selects disjunctive (list of conjunctions) or
    // conjunctive (list of disjunctions) output.
    std::vector<std::vector<std::pair<int, bool>>> clause_form(const BoolTree& t, bool positive,
                                                               bool dnf) {
        using Clause = std::vector<std::pair<int, bool>>;
        using Clauses = std::vector<Clause>;
        auto cross = [](const Clauses& a, const Clauses& b) {
            Clauses out;
            for (const auto& x : a)
                for (const auto& y : b) {
                    Clause c = x;
                    c.insert(c.end(), y.begin(), y.end());
                    std::sort(c.begin(), c.end());
                    c.erase(std::unique(c.begin(), c.end()), c.end());
                    bool contradictory = false;
                    for (std::size_t i = 0; i + 1 < c.size(); ++i)
                        if (c[i].first == c[i + 1].first && c[i].second != c[i + 1].second)
                            contradictory = true;
                    if (!contradictory) out.push_back(std::move(c));
                }
            return out;
        };
        switch (t.kind) {
        case BoolTree::ConstTrue:
            return (positive == dnf) ? Clauses{{}} : Clauses{};
        case BoolTree::ConstFalse:
            return (positive == dnf) ? Clauses{} : Clauses{{}};
        case BoolTree::Leaf:
            return Clauses{{{t.leaf, positive}}};
        case BoolTree::NotT:
            return clause_form(t.children[0], !positive, dnf);
        case BoolTree::AndT:
        case BoolTree::OrT: {
            bool conjunctive = (t.kind == BoolTree::AndT) == positive;
            // conjunctive in DNF mode and disjunctive in CNF mode distribute
            if (conjunctive == dnf) {
                Clauses acc{{}};
                for (const auto& c : t.children) acc = cross(acc, clause_form(c, positive, dnf));
                return acc;
            }
            Clauses acc;
            for (const auto& c : t.children) {
                Clauses cs = clause_form(c, positive, dnf);
                acc.insert(acc.end(), cs.begin(), cs.end());
            }
            return acc;
        }
        }
        return {};
    }

    std::map<std::set<int>, long long> multilinear(const BoolTree& t) {
        using Poly = std::map<std::set<int>, long long>;
        auto add = [](Poly& a, const Poly& b, long long s) {
            for (const auto& [k, v] : b) {
                a[k] += v * s;
                if (a[k] == 0) a.erase(k);
            }
        };
        auto mul = [](const Poly& a, const Poly& b) {
            Poly out;
            for (const auto& [ka, va] : a)
                for (const auto& [kb, vb] : b) {
                    std::set<int> k = ka;
                    k.insert(kb.begin(), kb.end());
                    out[k] += va * vb;
                    if (out[k] == 0) out.erase(k);
                }
            return out;
        };
        switch (t.kind) {
        case BoolTree::ConstTrue:
            return {{{}, 1}};
        case BoolTree::ConstFalse:
            return {};
        case BoolTree::Leaf:
            return {{{t.leaf}, 1}};
        case BoolTree::NotT: {
            Poly one{{{}, 1}};
            add(one, multilinear(t.children[0]), -1);
            return one;
        }
        case BoolTree::AndT: {
            Poly acc{{{}, 1}};
            for (const auto& c : t.children) acc = mul(acc, multilinear(c));
            return acc;
        }
        case BoolTree::OrT: {
            // 1 - prod(1 - x_i)
            Poly acc{{{}, 1}};
            for (const auto& c : t.children) {
                Poly one{{{}, 1}};
                add(one, multilinear(c), -1);
                acc = mul(acc, one);
            }
            Poly out{{{}, 1}};
            add(out, acc, -1);
            return out;
        }
        }
        return {};
    }

    // -- recursion over far-separated blocks --

    PolyMap decomp_far(const std::vector<Block>& blocks) {
        if (blocks.size() == 1) {
            int gen = intern_generator(blocks[0].tree, blocks[0].vars);
            if (gen < 0) return {{Monomial{}, 1}}; // block is constant true
            return {{monomial_mul({}, gen), 1}};
        }
        std::string key = memo_key(blocks);
        auto hit = memo_.find(key);
        if (hit != memo_.end()) return hit->second;

        PolyMap poly;
        {
            Monomial m;
            bool zero = false;
            for (const auto& b : blocks) {
                if (b.tree->kind == NodeKind::False) { zero = true; break; }
                int gen = intern_generator(b.tree, b.vars);
                if (gen >= 0) m = monomial_mul(m, gen);
            }
            if (!zero) poly[m] += 1;
        }

        std::vector<std::pair<int, int>> cross; // (slot, slot) between different blocks
        for (std::size_t a = 0; a < blocks.size(); ++a)
            for (std::size_t b = a + 1; b < blocks.size(); ++b)
                for (int i : blocks[a].vars)
                    for (int j : blocks[b].vars)
                        cross.emplace_back(std::min(i, j), std::max(i, j));
        std::sort(cross.begin(), cross.end());

        const std::size_t ncss = std::size_t{1} << cross.size();
        for (std::size_t css = 1; css < ncss; ++css) {
            // merge blocks joined by near cross pairs
            UnionFind uf(static_cast<int>(blocks.size()));
            auto block_of = [&](int slot) {
                for (std::size_t b = 0; b < blocks.size(); ++b)
                    for (int v : blocks[b].vars)
                        if (v == slot) return static_cast<int>(b);
                throw input_error("slot not in any block");
            };
            for (std::size_t e = 0; e < cross.size(); ++e)
                if (css & (std::size_t{1} << e))
                    uf.unite(block_of(cross[e].first), block_of(cross[e].second));
            std::map<int, std::vector<int>> groups;
            for (std::size_t b = 0; b < blocks.size(); ++b)
                groups[uf.find(static_cast<int>(b))].push_back(static_cast<int>(b));
            std::vector<Block> merged;
            for (const auto& [root, members] : groups) {
                Block nb;
                std::vector<NodePtr> cs;
                for (int b : members) {
                    cs.push_back(blocks[static_cast<std::size_t>(b)].tree);
                    for (int v : blocks[static_cast<std::size_t>(b)].vars) nb.vars.push_back(v);
                }
                std::sort(nb.vars.begin(), nb.vars.end());
                auto inside = [&](int slot) {
                    return std::binary_search(nb.vars.begin(), nb.vars.end(), slot);
                };
                for (std::size_t e = 0; e < cross.size(); ++e) {
                    auto [i, j] = cross[e];
                    if (!inside(i) || !inside(j)) continue;
                    if (css & (std::size_t{1} << e))
                        cs.push_back(ast::make_dist_le(i, j, sep_));
                    else
                        cs.push_back(ast::make_dist_gt(i, j, sep_));
                }
                nb.tree = ast::make_and(std::move(cs));
                merged.push_back(std::move(nb));
            }
            poly_add(poly, decomp_far(merged), -1);
        }
        memo_.emplace(std::move(key), poly);
        return poly;
    }

    std::string memo_key(const std::vector<Block>& blocks) {
        std::vector<std::string> parts;
        for (const auto& b : blocks) parts.push_back(packed_key(b.tree, b.vars));
        std::sort(parts.begin(), parts.end());
        std::string key;
        for (const auto& s : parts) {
            key += s;
            key += '\x1f';
        }
        return key;
    }

    std::string packed_key(const NodePtr& tree, const std::vector<int>& vars) {
        return pack_block(tree, vars).to_string();
    }

    // Renames the block's variables onto 0..k-1 and adds the entailed
    // metric-closure guards so that the packed formula certifies its own
    // strong locality.
    Formula pack_block(const NodePtr& tree, const std::vector<int>& vars) {
        int maxslot = p_;
        std::vector<int> mapping(static_cast<std::size_t>(maxslot), -1);
        for (std::size_t i = 0; i < vars.size(); ++i) mapping[static_cast<std::size_t>(vars[i])] =
            static_cast<int>(i);
        for (int i = 0; i < maxslot; ++i)
            if (mapping[static_cast<std::size_t>(i)] < 0) mapping[static_cast<std::size_t>(i)] = maxslot + i;
        NodePtr renamed = ast::rename_vars(tree, mapping);
        Formula packed = Formula::from_tree(renamed, static_cast<int>(vars.size()));
        return add_closure_guards(packed);
    }

    Formula add_closure_guards(const Formula& f) {
        const int k = f.free_count();
        if (k <= 1) return f;
        auto closure = f.certified_distances();
        std::vector<NodePtr> cs{f.root()};
        for (int i = 0; i < k; ++i)
            for (int j = i + 1; j < k; ++j) {
                int d = closure[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)];
                if (d >= 0) cs.push_back(ast::make_dist_le(i, j, d));
            }
        return Formula::from_tree(ast::make_and(std::move(cs)), k);
    }

    // Returns -1 for constant-true blocks (pairing factor 1).
    int intern_generator(const NodePtr& tree, const std::vector<int>& vars) {
        if (tree->kind == NodeKind::True) return -1;
        Formula packed = pack_block(tree, vars);
        std::string key = packed.to_string();
        auto it = gen_index_.find(key);
        if (it != gen_index_.end()) return it->second;
        gens_.push_back(packed);
        int idx = static_cast<int>(gens_.size()) - 1;
        gen_index_.emplace(std::move(key), idx);
        return idx;
    }

    const Formula& phi_;
    int p_;
    int sep_;
    std::vector<std::pair<int, int>> pairs_;
    std::vector<Formula> gens_;
    std::map<std::string, int> gen_index_;
    std::map<std::string, PolyMap> memo_;
};

} // namespace

PairingPolynomial strongly_local_decomposition(const Formula& phi) {
    if (phi.free_count() <= 1 || phi.strongly_local()) {
        PairingPolynomial out;
        out.generators.push_back(phi);
        out.terms.push_back({{{0, 1}}, 1});
        return out;
    }
    Decomposer d(phi);
    return d.run();
}

} // namespace limclust
