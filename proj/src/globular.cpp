#include "limclust/globular.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "limclust/evaluate.hpp"
#include "limclust/kernels.hpp"

namespace limclust {

const std::vector<double>& BallMeasureCache::get(int n, int d) {
    auto key = std::make_pair(n, d);
    auto it = cache_.find(key);
    if (it != cache_.end()) return it->second;
    auto measures = kernels::ball_measures(*s_->at(n), d);
    return cache_.emplace(key, std::move(measures)).first->second;
}

namespace {

// F_{d,n}(t) over a ball-measure table.
double cdf_at(const std::vector<double>& measures, const Structure& a, double t) {
    double sum = 0.0;
    for (std::uint32_t v = 0; v < measures.size(); ++v)
        if (measures[v] <= t) sum += a.weight(v);
    return sum;
}

// ceil with a small backlash so estimation noise cannot bump a level
int noise_ceil(double x) { return static_cast<int>(std::ceil(x - 1e-9)); }

} // namespace

int schedule_z0(double lambda) {
    if (lambda <= 0.0 || lambda > 1.0) throw input_error("z0 needs lambda in (0, 1]");
    return noise_ceil(5.0 - 2.0 * std::log2(lambda));
}

// ---- schedule ------------------------------------------------------------------

int AtomSchedule::level_at(int n) const {
    int best = z0 - 1;
    for (int z = z0; z <= z_hi; ++z)
        if (eta[static_cast<std::size_t>(z - z0)] <= n) best = z;
    return best;
}

nlohmann::json AtomSchedule::to_json() const {
    nlohmann::json j;
    j["lambda"] = lambda;
    j["mass"] = mass;
    j["count"] = count;
    j["z0"] = z0;
    j["z_hi"] = z_hi;
    j["alpha"] = alpha;
    j["beta"] = beta;
    j["delta"] = delta;
    j["eta"] = eta;
    j["stable_index"] = stable_index;
    j["log"] = log;
    return j;
}

nlohmann::json Schedule::to_json() const {
    nlohmann::json j;
    nlohmann::json atoms_j = nlohmann::json::array();
    for (const auto& a : atoms) atoms_j.push_back(a.to_json());
    j["atoms"] = atoms_j;
    j["warnings"] = warnings;
    return j;
}

Schedule build_schedule(const SpectrumReport& report, const StructureSequence& s,
                        const Config& cfg) {
    if (report.atoms.empty())
        throw input_error("build_schedule needs a spectrum with at least one atom");
    Schedule sched;
    BallMeasureCache cache(s);
    auto tail = tail_indices(s.first(), s.last(), cfg.window_fraction);
    const int d_top = cfg.d_schedule.back();

    // tail-window mean of F_{d,n}(t); the d_top row doubles as the limit estimate
    auto f_tail = [&](int d, double t) {
        double mean = 0.0;
        for (int n : tail) mean += cdf_at(cache.get(n, d), *s.at(n), t);
        return mean / static_cast<double>(tail.size());
    };

    for (std::size_t ai = 0; ai < report.atoms.size(); ++ai) {
        const auto& atom = report.atoms[ai];
        AtomSchedule as;
        as.lambda = atom.lambda;
        as.mass = atom.mass;
        as.count = atom.count;
        as.z0 = schedule_z0(atom.lambda);
        as.z_hi = as.z0 - 1;

        double gap = 1.0;
        for (std::size_t bi = 0; bi < report.atoms.size(); ++bi)
            if (bi != ai)
                gap = std::min(gap, std::abs(report.atoms[bi].lambda - atom.lambda));

        double prev_alpha = std::max(0.0, atom.lambda - gap / 2.0);
        double prev_beta = std::min(1.0, atom.lambda + gap / 2.0);
        int prev_delta = 0;
        int prev_eta = s.first() - 1;
        for (int z = as.z0; z < as.z0 + cfg.schedule_depth; ++z) {
            double eps = std::pow(2.0, -z);
            // brackets from the continuity grid, bisecting toward lambda
            double want_a = atom.lambda - eps / 3.0;
            double want_b = atom.lambda + eps / 3.0;
            double alpha = -1.0, beta = -1.0;
            for (double g : report.continuity_grid) {
                if (g > prev_alpha && g < atom.lambda &&
                    (alpha < 0 || std::abs(g - want_a) < std::abs(alpha - want_a)))
                    alpha = g;
                if (g < prev_beta && g > atom.lambda &&
                    (beta < 0 || std::abs(g - want_b) < std::abs(beta - want_b)))
                    beta = g;
            }
            if (alpha < 0 || beta < 0 || beta - alpha >= eps) {
                sched.warnings.push_back("atom " + std::to_string(atom.lambda) +
                                         ": no bracket at level z=" + std::to_string(z));
                break;
            }
            // delta_z: smallest schedule radius from which the CDF values at
            // the bracket stabilize within eps
            double fa_lim = f_tail(d_top, alpha);
            double fb_lim = f_tail(d_top, beta);
            int delta = -1;
            for (int di = 0; di < static_cast<int>(cfg.d_schedule.size()); ++di) {
                bool ok = true;
                for (int dj = di; dj < static_cast<int>(cfg.d_schedule.size()) && ok; ++dj) {
                    int d = cfg.d_schedule[static_cast<std::size_t>(dj)];
                    if (std::abs(f_tail(d, alpha) - fa_lim) >= eps ||
                        std::abs(f_tail(d, beta) - fb_lim) >= eps)
                        ok = false;
                }
                if (ok) {
                    delta = cfg.d_schedule[static_cast<std::size_t>(di)];
                    break;
                }
            }
            if (delta < 0) {
                sched.warnings.push_back("atom " + std::to_string(atom.lambda) +
                                         ": no stabilizing radius at level z=" + std::to_string(z));
                break;
            }
            delta = std::max(delta, prev_delta);
            // eta_z: smallest index from which F_{k delta, n} sits within eps of
            // its tail mean for every k in 1..8
            std::vector<double> limits(8);
            for (int k = 1; k <= 8; ++k) {
                limits[static_cast<std::size_t>(k - 1)] = 0.0;
            }
            std::vector<double> lim_a(8), lim_b(8);
            for (int k = 1; k <= 8; ++k) {
                lim_a[static_cast<std::size_t>(k - 1)] = f_tail(k * delta, alpha);
                lim_b[static_cast<std::size_t>(k - 1)] = f_tail(k * delta, beta);
            }
            int eta = -1;
            for (int n0 = std::max(prev_eta + 1, s.first()); n0 <= s.last(); ++n0) {
                bool ok = true;
                for (int n = n0; n <= s.last() && ok; ++n) {
                    for (int k = 1; k <= 8 && ok; ++k) {
                        const auto& meas = cache.get(n, k * delta);
                        double fa = cdf_at(meas, *s.at(n), alpha);
                        double fb = cdf_at(meas, *s.at(n), beta);
                        if (std::abs(fa - lim_a[static_cast<std::size_t>(k - 1)]) >= eps ||
                            std::abs(fb - lim_b[static_cast<std::size_t>(k - 1)]) >= eps)
                            ok = false;
                    }
                }
                if (ok) {
                    eta = n0;
                    break;
                }
            }
            if (eta < 0) {
                sched.warnings.push_back("atom " + std::to_string(atom.lambda) +
                                         ": threshold eta infeasible at level z=" +
                                         std::to_string(z));
                break;
            }
            as.alpha.push_back(alpha);
            as.beta.push_back(beta);
            as.delta.push_back(delta);
            as.eta.push_back(eta);
            as.z_hi = z;
            as.log.push_back("z=" + std::to_string(z) + ": alpha=" + std::to_string(alpha) +
                             " beta=" + std::to_string(beta) + " delta=" + std::to_string(delta) +
                             " eta=" + std::to_string(eta));
            prev_alpha = alpha;
            prev_beta = beta;
            prev_delta = delta;
            prev_eta = eta;
        }
        if (as.z_hi < as.z0)
            throw input_error("schedule infeasible for atom lambda=" + std::to_string(atom.lambda) +
                              ": not enough stable indices");
        if (as.z_hi < as.z0 + cfg.schedule_depth - 1)
            sched.warnings.push_back("atom " + std::to_string(atom.lambda) +
                                     ": maximal feasible depth z=" + std::to_string(as.z_hi) +
                                     " below requested " +
                                     std::to_string(as.z0 + cfg.schedule_depth - 1));
        as.stable_index = as.eta.front();
        sched.atoms.push_back(std::move(as));
    }
    return sched;
}

VertexSet build_Z(BallMeasureCache& cache, int n, const AtomSchedule& atom, int z) {
    StructurePtr a = cache.sequence().at(n);
    VertexSet out(a->size());
    if (z < atom.z0 || z > atom.z_hi) return out;
    if (n < atom.eta[static_cast<std::size_t>(z - atom.z0)]) return out;
    int dz = atom.delta[static_cast<std::size_t>(z - atom.z0)];
    const auto& wide = cache.get(n, 8 * dz);
    double beta = atom.beta[static_cast<std::size_t>(z - atom.z0)];
    for (std::uint32_t v = 0; v < a->size(); ++v) {
        if (wide[v] > beta) continue;
        bool ok = true;
        for (int zp = atom.z0; zp <= z && ok; ++zp) {
            const auto& narrow = cache.get(n, atom.delta[static_cast<std::size_t>(zp - atom.z0)]);
            if (!(narrow[v] > atom.alpha[static_cast<std::size_t>(zp - atom.z0)])) ok = false;
        }
        if (ok) out.set(v);
    }
    return out;
}

VertexSet build_centers(const Structure& a, const VertexSet& z_set, int min_distance) {
    VertexSet centers(a.size());
    if (min_distance < 1) min_distance = 1;
    VertexSet blocked(a.size());
    z_set.for_each([&](std::uint32_t v) {
        if (blocked.test(v)) return;
        centers.set(v);
        blocked |= a.ball(v, min_distance - 1);
    });
    return centers;
}

// ---- clustering result ----------------------------------------------------------

std::string MarkInfo::name() const {
    switch (kind) {
    case Kind::Residual: return "M_R";
    case Kind::Separator: return "M_S";
    case Kind::Globular:
        return "M_" + std::to_string(atom) + "_" + std::to_string(group) + "_" +
               std::to_string(member);
    }
    return "M";
}

nlohmann::json LemmaRecord::to_json() const {
    nlohmann::json j;
    j["lemma"] = lemma;
    j["index"] = index;
    if (atom >= 0) j["atom"] = atom;
    j["applicable"] = applicable;
    j["holds"] = holds;
    j["detail"] = detail;
    return j;
}

int ClusteringResult::mark_id(MarkInfo::Kind kind, int atom, int group, int member) const {
    for (std::size_t i = 0; i < marks.size(); ++i) {
        const auto& m = marks[i];
        if (m.kind == kind && m.atom == atom && m.group == group && m.member == member)
            return static_cast<int>(i);
    }
    return -1;
}

VertexSet ClusteringResult::mark_set(int index, int mark) const {
    const auto& ic = indices[static_cast<std::size_t>(index)];
    VertexSet out(ic.labels.size());
    for (std::uint32_t v = 0; v < ic.labels.size(); ++v)
        if (ic.labels[v] == mark) out.set(v);
    return out;
}

nlohmann::json ClusteringResult::to_json() const {
    nlohmann::json j;
    nlohmann::json marks_j = nlohmann::json::array();
    for (const auto& m : marks) {
        nlohmann::json mj;
        mj["name"] = m.name();
        mj["kind"] = m.kind == MarkInfo::Kind::Globular
                         ? "globular"
                         : (m.kind == MarkInfo::Kind::Residual ? "residual" : "separator");
        if (m.kind == MarkInfo::Kind::Globular) {
            mj["atom"] = m.atom;
            mj["group"] = m.group;
            mj["member"] = m.member;
            mj["lambda"] = m.lambda;
        }
        marks_j.push_back(mj);
    }
    j["marks"] = marks_j;
    nlohmann::json idx_j = nlohmann::json::array();
    for (const auto& ic : indices) {
        nlohmann::json ij;
        ij["n"] = ic.n;
        ij["labels"] = ic.labels;
        ij["separator_measure"] = ic.separator_measure;
        ij["residual_measure"] = ic.residual_measure;
        nlohmann::json atoms_j = nlohmann::json::array();
        for (const auto& ad : ic.per_atom) {
            nlohmann::json aj;
            aj["z"] = ad.z;
            aj["centers"] = ad.centers;
            aj["c_measure"] = ad.c_measure;
            aj["c_size"] = ad.c_size;
            atoms_j.push_back(aj);
        }
        ij["per_atom"] = atoms_j;
        idx_j.push_back(ij);
    }
    j["indices"] = idx_j;
    j["schedule"] = schedule.to_json();
    nlohmann::json rec_j = nlohmann::json::array();
    for (const auto& r : records) rec_j.push_back(r.to_json());
    j["lemma_records"] = rec_j;
    j["status"] = status;
    j["violations"] = violations;
    j["config"] = config_echo;
    if (!clip_F.empty()) {
        j["clip_F"] = clip_F;
        j["clip_G"] = clip_G;
        j["clip_lambda"] = clip_lambda;
        j["clip_lambda0"] = clip_lambda0;
    }
    return j;
}

// ---- assembly -------------------------------------------------------------------

ClusteringResult assemble_clustering(const StructureSequence& s, const SpectrumReport& report,
                                     const Schedule& sched, const std::vector<Formula>& battery,
                                     const Config& cfg) {
    if (sched.atoms.size() != report.atoms.size())
        throw input_error("schedule does not match the spectrum report");
    ClusteringResult res;
    res.schedule = sched;
    res.config_echo = cfg.echo();
    res.marks.push_back({MarkInfo::Kind::Residual, 0, 0, 0, 0.0});
    res.marks.push_back({MarkInfo::Kind::Separator, 0, 0, 0, 0.0});
    const int residual_mark = 0, separator_mark = 1;

    std::vector<Formula> stat_battery;
    for (const auto& f : battery) stat_battery.push_back(substitute_mark(f, "M", true));

    BallMeasureCache cache(s);
    auto record = [&](LemmaRecord r) {
        if (r.applicable && !r.holds) {
            res.status = "diagnostic";
            res.violations.push_back(r.lemma + " failed at n=" + std::to_string(r.index) +
                                     (r.atom >= 0 ? " atom=" + std::to_string(r.atom) : "") + ": " +
                                     r.detail);
        }
        res.records.push_back(std::move(r));
    };

    for (int n = s.first(); n <= s.last(); ++n) {
        StructurePtr a = s.at(n);
        IndexClustering ic;
        ic.n = n;
        ic.labels.assign(a->size(), residual_mark);
        ic.per_atom.resize(sched.atoms.size());

        std::vector<VertexSet> c_sets(sched.atoms.size(), VertexSet(a->size()));
        std::vector<VertexSet> z_sets(sched.atoms.size(), VertexSet(a->size()));
        VertexSet all_c(a->size());

        for (std::size_t ai = 0; ai < sched.atoms.size(); ++ai) {
            const AtomSchedule& atom = sched.atoms[ai];
            int z = atom.level_at(n);
            ic.per_atom[ai].z = z >= atom.z0 ? z : -1;
            if (z < atom.z0) continue;
            int dz = atom.delta[static_cast<std::size_t>(z - atom.z0)];
            VertexSet zset = build_Z(cache, n, atom, z);
            z_sets[ai] = zset;
            VertexSet centers = build_centers(*a, zset, 7 * dz);
            VertexSet c = a->ball(centers, 2 * dz);
            c_sets[ai] = c;
            ic.per_atom[ai].centers = centers.to_vector();
            ic.per_atom[ai].c_measure = a->measure(c);
            ic.per_atom[ai].c_size = c.count();

            // |S| = p(lambda)/lambda past the stable index
            if (n >= atom.stable_index) {
                bool ok = static_cast<int>(centers.count()) == atom.count;
                record({"centers", n, static_cast<int>(ai), true, ok,
                        "|S|=" + std::to_string(centers.count()) + " expected " +
                            std::to_string(atom.count)});
            }
            // Z subseteq C
            record({"ZC", n, static_cast<int>(ai), true, zset.is_subset_of(c),
                    "Z size " + std::to_string(zset.count()) + ", C size " +
                        std::to_string(c.count())});
            // |nu(C) - p| < 2^-z p/lambda
            {
                double err = std::abs(ic.per_atom[ai].c_measure - atom.mass);
                double bound = std::pow(2.0, -z) * atom.mass / atom.lambda;
                record({"measC", n, static_cast<int>(ai), n >= atom.stable_index, err < bound,
                        "|nu(C)-p| = " + std::to_string(err) + ", bound " +
                            std::to_string(bound)});
            }
            // nu(ball^{delta_z}(boundary C)) < 2^{1-z} p/lambda
            {
                VertexSet boundary = a->outer_boundary(c);
                double grown = a->measure(a->ball(boundary, dz));
                double bound = std::pow(2.0, 1 - z) * atom.mass / atom.lambda;
                record({"bordC", n, static_cast<int>(ai), n >= atom.stable_index, grown < bound,
                        "nu(ball^delta(dC)) = " + std::to_string(grown) + ", bound " +
                            std::to_string(bound)});
            }
        }

        // cross-atom disjointness (lambda descending order resolves overlaps)
        for (std::size_t ai = 0; ai < sched.atoms.size(); ++ai) {
            for (std::size_t bi = ai + 1; bi < sched.atoms.size(); ++bi) {
                if (ic.per_atom[ai].z < 0 || ic.per_atom[bi].z < 0) continue;
                double lam_big = sched.atoms[ai].lambda;
                double lam_small = sched.atoms[bi].lambda;
                int z_threshold = std::max(
                    sched.atoms[bi].z0, noise_ceil(1.0 - std::log2(lam_big - lam_small)));
                int z_eff = std::min(ic.per_atom[ai].z, ic.per_atom[bi].z);
                bool disjoint = !c_sets[ai].intersects(c_sets[bi]);
                record({"disjC", n, static_cast<int>(bi), z_eff >= z_threshold, disjoint,
                        "z_eff=" + std::to_string(z_eff) + " threshold=" +
                            std::to_string(z_threshold)});
                if (!disjoint) c_sets[bi] -= c_sets[ai]; // larger atom keeps the overlap
            }
        }
        for (const auto& c : c_sets) all_c |= c;

        // separator: boundaries of the C-sets plus the W zone of the smallest
        // active atom
        VertexSet separator(a->size());
        for (std::size_t ai = 0; ai < sched.atoms.size(); ++ai)
            if (ic.per_atom[ai].z >= 0) separator |= a->outer_boundary(c_sets[ai]);
        int smallest_active = -1;
        for (std::size_t ai = 0; ai < sched.atoms.size(); ++ai)
            if (ic.per_atom[ai].z >= 0) smallest_active = static_cast<int>(ai);
        if (smallest_active >= 0) {
            const AtomSchedule& atom = sched.atoms[static_cast<std::size_t>(smallest_active)];
            int z = ic.per_atom[static_cast<std::size_t>(smallest_active)].z;
            int dz = atom.delta[static_cast<std::size_t>(z - atom.z0)];
            double alpha = atom.alpha[static_cast<std::size_t>(z - atom.z0)];
            const auto& meas = cache.get(n, dz);
            VertexSet w(a->size());
            for (std::uint32_t v = 0; v < a->size(); ++v)
                if (meas[v] > alpha && !all_c.test(v)) w.set(v);
            separator |= w;
        }
        separator -= all_c;

        // globular marks: split each C into interweaving groups by the
        // battery statistics of its connected parts
        for (std::size_t ai = 0; ai < sched.atoms.size(); ++ai) {
            if (ic.per_atom[ai].z < 0 || c_sets[ai].empty()) continue;
            Structure induced = a->induce(c_sets[ai]);
            std::vector<std::uint32_t> ids = c_sets[ai].to_vector();
            std::vector<VertexSet> comps = induced.connected_components();
            struct Comp {
                std::vector<double> stats;
                std::uint32_t min_id;
                VertexSet verts; // in the full structure
            };
            std::vector<Comp> parts;
            for (const auto& comp : comps) {
                Comp c;
                Structure part = induced.induce(comp);
                for (const auto& f : stat_battery) c.stats.push_back(stone_pairing(part, f));
                VertexSet verts(a->size());
                comp.for_each([&](std::uint32_t local) { verts.set(ids[local]); });
                c.verts = verts;
                c.min_id = verts.to_vector().front();
                parts.push_back(std::move(c));
            }
            std::sort(parts.begin(), parts.end(), [](const Comp& x, const Comp& y) {
                if (x.stats != y.stats) return x.stats < y.stats;
                return x.min_id < y.min_id;
            });
            int group = 0;
            std::size_t pi = 0;
            while (pi < parts.size()) {
                std::size_t pj = pi;
                while (pj < parts.size()) {
                    bool close = true;
                    for (std::size_t st = 0; st < parts[pi].stats.size() && close; ++st)
                        if (std::abs(parts[pj].stats[st] - parts[pi].stats[st]) > cfg.tol)
                            close = false;
                    if (!close) break;
                    ++pj;
                }
                ++group;
                // members ordered by smallest vertex id
                std::vector<std::size_t> members;
                for (std::size_t t = pi; t < pj; ++t) members.push_back(t);
                std::sort(members.begin(), members.end(), [&](std::size_t x, std::size_t y) {
                    return parts[x].min_id < parts[y].min_id;
                });
                for (std::size_t mi = 0; mi < members.size(); ++mi) {
                    MarkInfo info{MarkInfo::Kind::Globular, static_cast<int>(ai) + 1, group,
                                  static_cast<int>(mi) + 1, sched.atoms[ai].lambda};
                    int id = res.mark_id(info.kind, info.atom, info.group, info.member);
                    if (id < 0) {
                        res.marks.push_back(info);
                        id = static_cast<int>(res.marks.size()) - 1;
                    }
                    parts[members[mi]].verts.for_each(
                        [&](std::uint32_t v) { ic.labels[v] = id; });
                }
                pi = pj;
            }
        }
        separator.for_each([&](std::uint32_t v) { ic.labels[v] = separator_mark; });
        ic.separator_measure = a->measure(separator);
        double residual_measure = 0.0;
        for (std::uint32_t v = 0; v < a->size(); ++v)
            if (ic.labels[v] == residual_mark) residual_measure += a->weight(v);
        ic.residual_measure = residual_measure;
        res.indices.push_back(std::move(ic));
    }

    // partition stability: marks plus residual carry the full mass, i.e. the
    // separator stays negligible along the tail
    {
        auto tail = tail_indices(s.first(), s.last(), cfg.window_fraction);
        double sep = 0.0;
        for (int n : tail)
            sep += res.indices[static_cast<std::size_t>(n - s.first())].separator_measure;
        sep /= static_cast<double>(tail.size());
        record({"stable", s.last(), -1, true, sep < cfg.tol,
                "mean separator mass over the tail = " + std::to_string(sep)});
    }
    return res;
}

// ---- clip comb -------------------------------------------------------------------

ClusteringResult clip_comb(const StructureSequence& s, const std::vector<SubsetSequence>& clusters,
                           const Config& cfg) {
    if (clusters.empty()) throw input_error("clip_comb needs at least one cluster");
    for (const auto& c : clusters) require_aligned(s, c);
    const int m = static_cast<int>(clusters.size());
    ClusteringResult res;
    res.config_echo = cfg.echo();
    res.marks.push_back({MarkInfo::Kind::Residual, 0, 0, 0, 0.0});
    res.marks.push_back({MarkInfo::Kind::Separator, 0, 0, 0, 0.0});
    const int residual_mark = 0, separator_mark = 1;

    auto tail = tail_indices(s.first(), s.last(), cfg.window_fraction);

    // strong disjointness, checked as ball(C^i) against the union of the
    // other clusters; almost-disjoint inputs reduce to
    // Z^i = C^i \ union_{j<i} ball(C^j)
    auto check_strong = [&](const std::vector<SubsetSequence>& cs, bool throwing) {
        for (int n = s.first(); n <= s.last(); ++n) {
            StructurePtr a = s.at(n);
            VertexSet all(a->size());
            for (int i = 0; i < m; ++i) all |= cs[static_cast<std::size_t>(i)].at(n);
            for (int i = 0; i < m; ++i) {
                VertexSet c = cs[static_cast<std::size_t>(i)].at(n);
                VertexSet others = all - c;
                if (a->ball(c, 1).intersects(others)) {
                    if (throwing)
                        throw input_error(
                            "clip_comb: clusters not strongly disjoint even after the "
                            "almost-disjoint reduction (cluster " +
                            std::to_string(i) + " at n=" + std::to_string(n) + ")");
                    return false;
                }
            }
        }
        return true;
    };
    std::vector<SubsetSequence> work = clusters;
    if (!check_strong(work, false)) {
        std::vector<SubsetSequence> reduced;
        for (int i = 0; i < m; ++i) {
            std::vector<SubsetSequence> prev(reduced.begin(), reduced.end());
            SubsetSequence orig = clusters[static_cast<std::size_t>(i)];
            reduced.emplace_back(s.first(), s.last(), [s, orig, prev](int n) {
                StructurePtr a = s.at(n);
                VertexSet out = orig.at(n);
                for (const auto& p : prev) out -= a->ball(p.at(n), 1);
                return out;
            });
        }
        work = std::move(reduced);
        check_strong(work, true);
        res.violations.push_back("input clusters were only almost disjoint; applied the "
                                 "ball-subtraction reduction");
    }

    // limit measures, clusters ordered by descending lambda
    std::vector<double> lambda(static_cast<std::size_t>(m), 0.0);
    std::vector<std::vector<double>> mu(static_cast<std::size_t>(m),
                                        std::vector<double>(static_cast<std::size_t>(s.count())));
    for (int i = 0; i < m; ++i) {
        for (int n = s.first(); n <= s.last(); ++n)
            mu[static_cast<std::size_t>(i)][static_cast<std::size_t>(n - s.first())] =
                s.at(n)->measure(work[static_cast<std::size_t>(i)].at(n));
        double mean = 0.0;
        for (int n : tail)
            mean += mu[static_cast<std::size_t>(i)][static_cast<std::size_t>(n - s.first())];
        lambda[static_cast<std::size_t>(i)] = mean / static_cast<double>(tail.size());
    }
    std::vector<int> order(static_cast<std::size_t>(m));
    for (int i = 0; i < m; ++i) order[static_cast<std::size_t>(i)] = i;
    std::stable_sort(order.begin(), order.end(),
                     [&](int a, int b) { return lambda[static_cast<std::size_t>(a)] >
                                                lambda[static_cast<std::size_t>(b)]; });

    auto mu_of = [&](int rank, int n) {
        return mu[static_cast<std::size_t>(order[static_cast<std::size_t>(rank)])]
                 [static_cast<std::size_t>(n - s.first())];
    };
    auto lam_of = [&](int rank) { return lambda[static_cast<std::size_t>(order[static_cast<std::size_t>(rank)])]; };

    double lam_total = 0.0;
    for (int i = 0; i < m; ++i) lam_total += lam_of(i);
    res.clip_lambda0 = std::max(0.0, 1.0 - lam_total);
    for (int i = 0; i < m; ++i) res.clip_lambda.push_back(lam_of(i));

    // canonical clip F(n) = min(n, max{t <= n : for all n' >= n,
    //   sum_{i<=t} |mu_{n'}(C^i) - lambda_i| <= sum_{i>t} lambda_i })
    auto tail_lambda = [&](int t) {
        double sum = 0.0;
        for (int i = t; i < m; ++i) sum += lam_of(i);
        return sum;
    };
    res.clip_F.resize(static_cast<std::size_t>(s.count()), 0);
    for (int n = s.first(); n <= s.last(); ++n) {
        int best = 0;
        for (int t = 1; t <= std::min(n, m); ++t) {
            bool ok = true;
            for (int np = n; np <= s.last() && ok; ++np) {
                double dev = 0.0;
                for (int i = 0; i < t; ++i) dev += std::abs(mu_of(i, np) - lam_of(i));
                if (dev > tail_lambda(t)) ok = false;
            }
            if (ok) best = t;
            else break;
        }
        res.clip_F[static_cast<std::size_t>(n - s.first())] = best;
    }

    // T(i,d): index from which nu(ball^d(boundary C^i)) <= 2^-i / d; then
    // M(a) and the refined clip G. G never exceeds F, so only the first
    // max(F) cluster ranks matter.
    int max_f = 0;
    for (int f : res.clip_F) max_f = std::max(max_f, f);
    std::map<std::pair<int, std::pair<int, int>>, double> grown_cache; // (rank,(n,d))
    auto grown_boundary = [&](int rank, int n, int d) {
        auto key = std::make_pair(rank, std::make_pair(n, d));
        auto it = grown_cache.find(key);
        if (it != grown_cache.end()) return it->second;
        StructurePtr a = s.at(n);
        VertexSet boundary = a->outer_boundary(
            work[static_cast<std::size_t>(order[static_cast<std::size_t>(rank)])].at(n));
        double v = a->measure(a->ball(boundary, d));
        grown_cache.emplace(key, v);
        return v;
    };
    auto T_of = [&](int rank, int d) {
        for (int n0 = s.first(); n0 <= s.last(); ++n0) {
            bool ok = true;
            for (int n = n0; n <= s.last() && ok; ++n)
                if (grown_boundary(rank, n, d) > std::pow(2.0, -(rank + 1)) / d) ok = false;
            if (ok) return n0;
        }
        return s.last() + 1;
    };
    const int a_cap = std::min(m, max_f);
    std::vector<int> M_of(static_cast<std::size_t>(a_cap) + 1, s.first() - 1);
    for (int aidx = 1; aidx <= a_cap; ++aidx) {
        int worst = s.first() - 1;
        for (int i = 1; i <= aidx; ++i)
            for (int d = 1; d <= aidx; ++d) worst = std::max(worst, T_of(i - 1, d));
        M_of[static_cast<std::size_t>(aidx)] = worst;
    }
    res.clip_G.resize(static_cast<std::size_t>(s.count()), 0);
    for (int n = s.first(); n <= s.last(); ++n) {
        int reach = 0;
        for (int aidx = 1; aidx <= a_cap; ++aidx)
            if (M_of[static_cast<std::size_t>(aidx)] <= n) reach = aidx;
        res.clip_G[static_cast<std::size_t>(n - s.first())] =
            std::min(res.clip_F[static_cast<std::size_t>(n - s.first())], reach);
    }

    // D^i_n = C^i_n once the clip reaches i; separator = combed boundaries
    for (int n = s.first(); n <= s.last(); ++n) {
        StructurePtr a = s.at(n);
        IndexClustering ic;
        ic.n = n;
        ic.labels.assign(a->size(), residual_mark);
        int g = res.clip_G[static_cast<std::size_t>(n - s.first())];
        VertexSet separator(a->size());
        for (int rank = 0; rank < g; ++rank) {
            VertexSet c = work[static_cast<std::size_t>(order[static_cast<std::size_t>(rank)])].at(n);
            MarkInfo info{MarkInfo::Kind::Globular, rank + 1, 1, 1, lam_of(rank)};
            int id = res.mark_id(info.kind, info.atom, info.group, info.member);
            if (id < 0) {
                res.marks.push_back(info);
                id = static_cast<int>(res.marks.size()) - 1;
            }
            c.for_each([&](std::uint32_t v) { ic.labels[v] = id; });
            separator |= a->outer_boundary(c);
        }
        separator.for_each([&](std::uint32_t v) { ic.labels[v] = separator_mark; });
        ic.separator_measure = a->measure(separator);
        double residual_measure = 0.0;
        for (std::uint32_t v = 0; v < a->size(); ++v)
            if (ic.labels[v] == residual_mark) residual_measure += a->weight(v);
        ic.residual_measure = residual_measure;
        res.indices.push_back(std::move(ic));
    }

    // Lemma clip1: sum_{i <= F(n)} mu_n(C^i) -> 1 - lambda0 along the tail
    {
        double mean = 0.0;
        for (int n : tail) {
            double sum = 0.0;
            for (int i = 0; i < res.clip_F[static_cast<std::size_t>(n - s.first())]; ++i)
                sum += mu_of(i, n);
            mean += sum;
        }
        mean /= static_cast<double>(tail.size());
        bool ok = std::abs(mean - (1.0 - res.clip_lambda0)) < cfg.tol + 0.05;
        LemmaRecord r{"clip1", s.last(), -1, true, ok,
                      "tail mean of clipped mass = " + std::to_string(mean) + ", 1 - lambda0 = " +
                          std::to_string(1.0 - res.clip_lambda0)};
        if (!ok) {
            res.status = "diagnostic";
            res.violations.push_back("clip1 failed: " + r.detail);
        }
        res.records.push_back(std::move(r));
    }
    return res;
}

// ---- characterization -----------------------------------------------------------

nlohmann::json MatchReport::to_json() const {
    nlohmann::json j;
    j["matched"] = matched;
    if (matched) {
        j["atom"] = atom;
        j["group"] = group;
        j["member_per_index"] = member_per_index;
        if (diff_profile) j["diff_profile"] = diff_profile->to_json();
    }
    j["notes"] = notes;
    return j;
}

MatchReport characterize_globular(const StructureSequence& s, const SubsetSequence& x,
                                  const ClusteringResult& result, const Config& cfg) {
    require_aligned(s, x);
    MatchReport rep;
    // collect (atom, group) pairs
    std::vector<std::pair<int, int>> groups;
    for (const auto& m : result.marks)
        if (m.kind == MarkInfo::Kind::Globular) {
            auto key = std::make_pair(m.atom, m.group);
            if (std::find(groups.begin(), groups.end(), key) == groups.end())
                groups.push_back(key);
        }
    for (const auto& [atom, group] : groups) {
        std::vector<int> member_ids;
        for (std::size_t mi = 0; mi < result.marks.size(); ++mi)
            if (result.marks[mi].kind == MarkInfo::Kind::Globular &&
                result.marks[mi].atom == atom && result.marks[mi].group == group)
                member_ids.push_back(static_cast<int>(mi));
        std::vector<int> chosen(static_cast<std::size_t>(s.count()), -1);
        for (int n = s.first(); n <= s.last(); ++n) {
            StructurePtr a = s.at(n);
            double best = 2.0;
            int best_member = -1;
            for (int id : member_ids) {
                VertexSet g = result.mark_set(n - s.first(), id);
                double diff = a->measure(x.at(n).symmetric_difference(g));
                if (diff < best) {
                    best = diff;
                    best_member = result.marks[static_cast<std::size_t>(id)].member;
                }
            }
            chosen[static_cast<std::size_t>(n - s.first())] = best_member;
        }
        // the symmetric difference against the chosen member must be negligible
        auto chosen_copy = chosen;
        auto marks_copy = member_ids;
        const ClusteringResult* resp = &result;
        int n0 = s.first();
        SubsetSequence diff(s.first(), s.last(), [s, x, chosen_copy, marks_copy, resp, n0](int n) {
            int member = chosen_copy[static_cast<std::size_t>(n - n0)];
            VertexSet g(s.at(n)->size());
            for (int id : marks_copy)
                if (resp->marks[static_cast<std::size_t>(id)].member == member)
                    g = resp->mark_set(n - n0, id);
            return x.at(n).symmetric_difference(g);
        });
        NegligibleProfile prof =
            negligible_profile(s, diff, cfg.dmax, cfg.tol, cfg.window_fraction);
        if (prof.negligible) {
            rep.matched = true;
            rep.atom = atom;
            rep.group = group;
            rep.member_per_index = chosen;
            rep.diff_profile = prof;
            return rep;
        }
    }
    rep.notes.push_back("no globular group matches within a negligible symmetric difference");
    return rep;
}

Structure marked_structure(const ClusteringResult& result, const StructureSequence& s, int n) {
    StructurePtr a = s.at(n);
    Structure out = *a;
    const auto& ic = result.indices[static_cast<std::size_t>(n - s.first())];
    for (std::size_t mi = 0; mi < result.marks.size(); ++mi) {
        VertexSet set(a->size());
        for (std::uint32_t v = 0; v < a->size(); ++v)
            if (ic.labels[v] == static_cast<int>(mi)) set.set(v);
        out = out.with_mark(result.marks[mi].name(), set);
    }
    return out;
}

} // namespace limclust
