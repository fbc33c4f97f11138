#include "limclust/generators.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <set>
#include <sstream>

namespace limclust {

namespace {

void add_edge(Relation& adj, std::uint32_t u, std::uint32_t v) {
    adj.tuples.push_back({u, v});
    adj.tuples.push_back({v, u});
}

void add_clique(Relation& adj, std::uint32_t base, std::uint32_t size) {
    for (std::uint32_t i = 0; i < size; ++i)
        for (std::uint32_t j = i + 1; j < size; ++j) add_edge(adj, base + i, base + j);
}

void add_path(Relation& adj, std::uint32_t base, std::uint32_t size) {
    for (std::uint32_t i = 0; i + 1 < size; ++i) add_edge(adj, base + i, base + i + 1);
}

double param_or(const nlohmann::json& params, const std::string& key, double def) {
    if (params.contains(key)) return params.at(key).get<double>();
    return def;
}

int iparam_or(const nlohmann::json& params, const std::string& key, int def) {
    if (params.contains(key)) return params.at(key).get<int>();
    return def;
}

std::string sparam_or(const nlohmann::json& params, const std::string& key,
                      const std::string& def) {
    if (params.contains(key)) return params.at(key).get<std::string>();
    return def;
}

void normalize_weights(std::vector<double>& w) {
    double s = 0.0;
    for (double v : w) s += v;
    if (s <= 0.0) throw input_error("generator produced zero total weight");
    for (double& v : w) v /= s;
    double s2 = 0.0;
    for (double v : w) s2 += v;
    w[0] += 1.0 - s2; // absorb the rounding residue
}

// ---- clique-pair: globular cliques plus an optional residual path ---------------

GeneratedStructure make_clique_pair(const nlohmann::json& params, int n) {
    if (n < 2) throw input_error("clique-pair needs index n >= 2");
    std::vector<double> measures = {0.5, 0.5};
    if (params.contains("measures")) measures = params.at("measures").get<std::vector<double>>();
    double residual = param_or(params, "residual", 0.0);
    std::string link = sparam_or(params, "link", "none");
    int path_scale = iparam_or(params, "path_scale", 4);
    double msum = residual;
    for (double m : measures) msum += m;
    if (std::abs(msum - 1.0) > 1e-9)
        throw input_error("clique-pair measures plus residual must sum to 1");
    if (link != "none" && link != "path")
        throw input_error("clique-pair link must be 'none' or 'path'");
    if (link == "path" && (measures.size() != 2 || residual <= 0.0))
        throw input_error("linked clique-pair needs two cliques and a positive residual");

    std::vector<std::uint32_t> sizes;
    std::uint32_t total = 0;
    for (std::size_t i = 0; i < measures.size(); ++i) {
        sizes.push_back(static_cast<std::uint32_t>(n + static_cast<int>(i)));
        total += sizes.back();
    }
    std::uint32_t path_len = 0;
    if (residual > 0.0) {
        path_len = static_cast<std::uint32_t>(std::max(3, path_scale * n));
        total += path_len;
    }

    Relation adj{"adj", 2, {}, false};
    std::vector<double> weights(total, 0.0);
    std::vector<int> labels(total, -1);
    std::uint32_t base = 0;
    std::vector<std::uint32_t> clique_base;
    for (std::size_t i = 0; i < measures.size(); ++i) {
        clique_base.push_back(base);
        add_clique(adj, base, sizes[i]);
        for (std::uint32_t v = 0; v < sizes[i]; ++v) {
            weights[base + v] = measures[i] / sizes[i];
            labels[base + v] = static_cast<int>(i);
        }
        base += sizes[i];
    }
    std::uint32_t path_base = base;
    if (path_len > 0) {
        add_path(adj, base, path_len);
        for (std::uint32_t v = 0; v < path_len; ++v) weights[base + v] = residual / path_len;
    }
    if (link == "path") {
        add_edge(adj, clique_base[0], path_base);
        add_edge(adj, clique_base[1], path_base + path_len - 1);
    }
    normalize_weights(weights);

    GeneratedStructure out{Structure(total, weights, {adj}), {}};
    out.truth.labels = std::move(labels);
    // group equal measures into atoms
    std::vector<double> sorted = measures;
    std::sort(sorted.begin(), sorted.end(), std::greater<>());
    for (std::size_t i = 0; i < sorted.size();) {
        std::size_t j = i;
        while (j < sorted.size() && sorted[j] == sorted[i]) ++j;
        out.truth.atoms.push_back(
            {sorted[i], sorted[i] * static_cast<double>(j - i), static_cast<int>(j - i)});
        i = j;
    }
    out.truth.residual_mass = residual;
    if (path_len > 0) {
        std::vector<std::uint32_t> path_ids;
        for (std::uint32_t v = 0; v < path_len; ++v) path_ids.push_back(path_base + v);
        out.truth.named_subsets["path"] = path_ids;
    }
    out.truth.description = "disjoint cliques with fixed measures; optional residual path";
    return out;
}

// ---- cycle: pure residual -------------------------------------------------------

GeneratedStructure make_cycle(const nlohmann::json& params, int n) {
    if (n < 2) throw input_error("cycle needs index n >= 2");
    int scale = iparam_or(params, "scale", 2);
    auto len = static_cast<std::uint32_t>(scale * n);
    Relation adj{"adj", 2, {}, false};
    for (std::uint32_t i = 0; i < len; ++i) add_edge(adj, i, (i + 1) % len);
    GeneratedStructure out{Structure::uniform(len, {adj}), {}};
    out.truth.residual_mass = 1.0;
    out.truth.labels.assign(len, -1);
    out.truth.description = "growing cycle; every ball measure vanishes";
    return out;
}

// ---- star-forest: the doubly-exponential star example at desk scale ---------------

GeneratedStructure make_star_forest(const nlohmann::json& params, int n) {
    if (n < 1 || n > 16) throw input_error("star-forest index must lie in [1, 16]");
    (void)params;
    const int stars = 1 << n;
    std::vector<std::uint32_t> leaf_counts;
    std::uint32_t total = 0;
    for (int i = 1; i <= stars; ++i) {
        int bits = 0;
        for (int t = i; t > 0; t >>= 1) ++bits;
        auto leaves = static_cast<std::uint32_t>(std::clamp(n + 2 - bits, 2, 40));
        leaf_counts.push_back(leaves);
        total += leaves + 1;
    }
    Relation adj{"adj", 2, {}, false};
    std::vector<double> weights(total, 0.0);
    std::vector<int> labels(total, -1);
    std::uint32_t base = 0;
    for (int i = 1; i <= stars; ++i) {
        std::uint32_t leaves = leaf_counts[static_cast<std::size_t>(i - 1)];
        for (std::uint32_t l = 1; l <= leaves; ++l) add_edge(adj, base, base + l);
        // star i carries weight (2^-i + 2^-n)/2, spread uniformly
        double star_weight = (std::pow(2.0, -i) + std::pow(2.0, -n)) / 2.0;
        for (std::uint32_t v = 0; v <= leaves; ++v) {
            weights[base + v] = star_weight / (leaves + 1);
            labels[base + v] = i - 1;
        }
        base += leaves + 1;
    }
    normalize_weights(weights);
    GeneratedStructure out{Structure(total, weights, {adj}), {}};
    out.truth.labels = std::move(labels);
    for (int i = 1; i <= std::min(stars, 8); ++i)
        out.truth.atoms.push_back({std::pow(2.0, -i - 1), std::pow(2.0, -i - 1), 1});
    double listed = 0.0;
    for (const auto& a : out.truth.atoms) listed += a.mass;
    out.truth.residual_mass = 1.0 - listed;
    out.truth.description =
        "2^n stars, star i of weight (2^-i + 2^-n)/2; atoms below 2^-9 folded into residual";
    return out;
}

// ---- linked-cliques: two cliques joined by a sqrt(n) path, uniform measure ---------

GeneratedStructure make_linked_cliques(const nlohmann::json& params, int n) {
    if (n < 4) throw input_error("linked-cliques needs index n >= 4");
    (void)params;
    auto k = static_cast<std::uint32_t>(n);
    auto path_len = static_cast<std::uint32_t>(std::max<int>(3, static_cast<int>(std::ceil(std::sqrt(n)))));
    std::uint32_t total = 2 * k + path_len;
    Relation adj{"adj", 2, {}, false};
    add_clique(adj, 0, k);
    add_clique(adj, k, k);
    std::uint32_t path_base = 2 * k;
    add_path(adj, path_base, path_len);
    add_edge(adj, 0, path_base);
    add_edge(adj, k, path_base + path_len - 1);
    GeneratedStructure out{Structure::uniform(total, {adj}), {}};
    out.truth.atoms.push_back({0.5, 1.0, 2});
    out.truth.residual_mass = 0.0;
    out.truth.labels.assign(total, -1);
    for (std::uint32_t v = 0; v < k; ++v) out.truth.labels[v] = 0;
    for (std::uint32_t v = k; v < 2 * k; ++v) out.truth.labels[v] = 1;
    std::vector<std::uint32_t> path_ids, middle, c1, c2;
    for (std::uint32_t v = 0; v < path_len; ++v) path_ids.push_back(path_base + v);
    for (std::uint32_t v = path_len / 3; v < path_len - path_len / 3; ++v)
        middle.push_back(path_base + v);
    for (std::uint32_t v = 0; v < k; ++v) c1.push_back(v);
    for (std::uint32_t v = 0; v < k; ++v) c2.push_back(k + v);
    out.truth.named_subsets["path"] = path_ids;
    out.truth.named_subsets["path-middle"] = middle;
    out.truth.named_subsets["clique1"] = c1;
    out.truth.named_subsets["clique2"] = c2;
    out.truth.description = "two cliques of order n joined by a ceil(sqrt(n)) path, uniform";
    return out;
}

} // namespace

// ---- regular / expander-union ------------------------------------------------------

Structure random_regular_graph(int n, int degree, unsigned seed) {
    if (n <= degree) throw input_error("regular graph needs n > degree");
    if ((static_cast<long long>(n) * degree) % 2 != 0)
        throw input_error("n * degree must be even");
    std::mt19937 rng(seed);
    for (int attempt = 0; attempt < 2000; ++attempt) {
        std::vector<std::uint32_t> stubs;
        stubs.reserve(static_cast<std::size_t>(n) * degree);
        for (int v = 0; v < n; ++v)
            for (int k = 0; k < degree; ++k) stubs.push_back(static_cast<std::uint32_t>(v));
        std::shuffle(stubs.begin(), stubs.end(), rng);
        std::set<std::pair<std::uint32_t, std::uint32_t>> seen;
        bool ok = true;
        for (std::size_t i = 0; i < stubs.size() && ok; i += 2) {
            std::uint32_t u = stubs[i], v = stubs[i + 1];
            if (u == v) ok = false;
            else if (!seen.emplace(std::min(u, v), std::max(u, v)).second) ok = false;
        }
        if (!ok) continue;
        Relation adj{"adj", 2, {}, false};
        for (const auto& [u, v] : seen) add_edge(adj, u, v);
        return Structure::uniform(static_cast<std::size_t>(n), {adj});
    }
    throw input_error("configuration model failed to produce a simple graph");
}

namespace {

GeneratedStructure make_regular(const nlohmann::json& params, int n) {
    int degree = iparam_or(params, "degree", 3);
    auto seed = static_cast<unsigned>(iparam_or(params, "seed", 7));
    int size = iparam_or(params, "size_scale", 4) * n;
    if ((size * degree) % 2 != 0) ++size;
    GeneratedStructure out{random_regular_graph(size, degree, seed ^ (0x9e37u * static_cast<unsigned>(n))), {}};
    out.truth.residual_mass = 1.0;
    out.truth.labels.assign(static_cast<std::size_t>(size), 0);
    out.truth.description = "single seeded d-regular graph; expanding, no atoms";
    return out;
}

GeneratedStructure make_expander_union(const nlohmann::json& params, int n) {
    int degree = iparam_or(params, "degree", 3);
    auto seed = static_cast<unsigned>(iparam_or(params, "seed", 11));
    std::vector<double> measures = {0.5, 0.5};
    std::vector<int> scales = {1, 2};
    if (params.contains("measures")) measures = params.at("measures").get<std::vector<double>>();
    if (params.contains("scales")) scales = params.at("scales").get<std::vector<int>>();
    if (measures.size() != scales.size())
        throw input_error("expander-union needs matching measures and scales");
    double msum = 0.0;
    for (double m : measures) msum += m;
    if (std::abs(msum - 1.0) > 1e-9) throw input_error("expander-union measures must sum to 1");

    std::vector<std::pair<double, Structure>> parts;
    for (std::size_t i = 0; i < measures.size(); ++i) {
        int size = scales[i] * (n + 4);
        if ((size * degree) % 2 != 0) ++size;
        parts.emplace_back(measures[i],
                           random_regular_graph(size, degree,
                                                seed ^ (0x51edu * static_cast<unsigned>(n)) ^
                                                    (0x9e37u * static_cast<unsigned>(i + 1))));
    }
    GeneratedStructure out{Structure::weighted_sum(parts), {}};
    out.truth.residual_mass = 1.0;
    std::uint32_t base = 0;
    for (std::size_t i = 0; i < parts.size(); ++i) {
        for (std::size_t v = 0; v < parts[i].second.size(); ++v)
            out.truth.labels.push_back(static_cast<int>(i));
        base += parts[i].second.size();
    }
    out.truth.description =
        "disjoint seeded d-regular components with fixed measures; open clusters, no atoms";
    return out;
}

} // namespace

std::vector<FamilyInfo> families() {
    return {
        {"clique-pair",
         "measures=[..] (default [0.5,0.5]), residual (default 0), link=none|path, path_scale",
         "atoms at the clique measures with multiplicity; residual path mass"},
        {"cycle", "scale (default 2): the index-n structure is C_{scale*n}",
         "pure residual, no atoms"},
        {"star-forest", "none; stage n has 2^n stars, star i of weight (2^-i + 2^-n)/2",
         "atoms 2^-(i+1) per star; tail below 2^-9 counted as residual"},
        {"linked-cliques", "none; two K_n joined by a ceil(sqrt(n)) path, uniform measure",
         "atom 0.5 with multiplicity 2; path mass vanishes"},
        {"regular", "degree (3), seed (7), size_scale (4)",
         "expanding single component; no atoms"},
        {"expander-union", "degree (3), seed (11), measures=[..], scales=[..]",
         "disjoint expanding components (open clusters); no atoms"},
    };
}

GeneratedStructure generate(const std::string& family, const nlohmann::json& params, int n) {
    if (family == "clique-pair") return make_clique_pair(params, n);
    if (family == "cycle") return make_cycle(params, n);
    if (family == "star-forest") return make_star_forest(params, n);
    if (family == "linked-cliques") return make_linked_cliques(params, n);
    if (family == "regular") return make_regular(params, n);
    if (family == "expander-union") return make_expander_union(params, n);
    throw input_error("unknown generator family '" + family + "'");
}

StructureSequence generator_sequence(const std::string& family, const nlohmann::json& params,
                                     int n0, int n1) {
    generate(family, params, n0); // validate family and params eagerly
    return StructureSequence(n0, n1,
                             [family, params](int n) { return generate(family, params, n).structure; });
}

SubsetSequence truth_cluster_subsets(const std::string& family, const nlohmann::json& params,
                                     int n0, int n1, int cluster_id) {
    return SubsetSequence(n0, n1, [family, params, cluster_id](int n) {
        GeneratedStructure g = generate(family, params, n);
        VertexSet out(g.structure.size());
        for (std::uint32_t v = 0; v < g.structure.size(); ++v)
            if (g.truth.labels[v] == cluster_id) out.set(v);
        return out;
    });
}

SubsetSequence truth_named_subsets(const std::string& family, const nlohmann::json& params,
                                   int n0, int n1, const std::string& name) {
    return SubsetSequence(n0, n1, [family, params, name](int n) {
        GeneratedStructure g = generate(family, params, n);
        auto it = g.truth.named_subsets.find(name);
        if (it == g.truth.named_subsets.end())
            throw input_error("generator has no named subset '" + name + "'");
        return VertexSet::from_vector(g.structure.size(), it->second);
    });
}

std::vector<SubsetSequence> truth_all_cluster_subsets(const std::string& family,
                                                      const nlohmann::json& params, int n0,
                                                      int n1) {
    struct LabelCache {
        std::mutex mu;
        std::map<int, std::pair<std::size_t, std::vector<int>>> labels; // n -> (size, labels)
    };
    auto cache = std::make_shared<LabelCache>();
    auto labels_at = [family, params, cache](int n) {
        std::lock_guard<std::mutex> lock(cache->mu);
        auto it = cache->labels.find(n);
        if (it != cache->labels.end()) return it->second;
        GeneratedStructure g = generate(family, params, n);
        auto entry = std::make_pair(g.structure.size(), g.truth.labels);
        return cache->labels.emplace(n, std::move(entry)).first->second;
    };
    int count = truth_cluster_count(family, params, n1);
    std::vector<SubsetSequence> out;
    for (int c = 0; c < count; ++c) {
        out.emplace_back(n0, n1, [labels_at, c](int n) {
            auto [size, labels] = labels_at(n);
            VertexSet set(size);
            for (std::uint32_t v = 0; v < size; ++v)
                if (labels[v] == c) set.set(v);
            return set;
        });
    }
    return out;
}

int truth_cluster_count(const std::string& family, const nlohmann::json& params, int n) {
    GeneratedStructure g = generate(family, params, n);
    int mx = -1;
    for (int l : g.truth.labels) mx = std::max(mx, l);
    return mx + 1;
}

} // namespace limclust
