#include "limclust/spectrum.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <sstream>

#include "limclust/evaluate.hpp"
#include "limclust/kernels.hpp"

namespace limclust {

// ---- empirical CDF ------------------------------------------------------------

EmpiricalCDF::EmpiricalCDF(std::vector<double> values, std::vector<double> weights) {
    if (values.size() != weights.size()) throw input_error("value/weight size mismatch");
    std::vector<std::size_t> order(values.size());
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        return values[a] < values[b] || (values[a] == values[b] && a < b);
    });
    for (std::size_t i : order) {
        if (!points_.empty() && points_.back().first == values[i])
            points_.back().second += weights[i];
        else
            points_.emplace_back(values[i], weights[i]);
    }
    cum_.resize(points_.size());
    double run = 0.0;
    for (std::size_t i = 0; i < points_.size(); ++i) {
        run += points_[i].second;
        cum_[i] = run;
    }
}

double EmpiricalCDF::operator()(double t) const {
    std::size_t lo = 0, hi = points_.size();
    while (lo < hi) {
        std::size_t mid = (lo + hi) / 2;
        if (points_[mid].first <= t)
            lo = mid + 1;
        else
            hi = mid;
    }
    return lo == 0 ? 0.0 : cum_[lo - 1];
}

double EmpiricalCDF::total_weight() const { return cum_.empty() ? 0.0 : cum_.back(); }

std::vector<std::pair<double, double>> EmpiricalCDF::atoms(double merge_radius) const {
    std::vector<std::pair<double, double>> out;
    std::size_t i = 0;
    while (i < points_.size()) {
        std::size_t j = i;
        double mass = 0.0, center = 0.0;
        while (j < points_.size() &&
               (j == i || points_[j].first - points_[j - 1].first <= merge_radius)) {
            mass += points_[j].second;
            center += points_[j].first * points_[j].second;
            ++j;
        }
        if (mass > 0.0) out.emplace_back(center / mass, mass);
        i = j;
    }
    return out;
}

std::string EmpiricalCDF::to_csv() const {
    std::ostringstream os;
    os << "t,F\n";
    os << "0," << operator()(0.0) << "\n";
    for (std::size_t i = 0; i < points_.size(); ++i)
        os << points_[i].first << "," << cum_[i] << "\n";
    return os.str();
}

EmpiricalCDF ball_measure_distribution(const Structure& a, int d) {
    if (d < 0) throw input_error("negative radius");
    return EmpiricalCDF(kernels::ball_measures(a, d), a.weights());
}

// ---- moments -----------------------------------------------------------------

nlohmann::json MomentTable::to_json() const {
    nlohmann::json j;
    j["d"] = d;
    j["m"] = m;
    return j;
}

MomentTable moment_table(const Structure& a, int d, int W) {
    if (W < 0 || W > 64) throw input_error("moment order W must lie in [0, 64]");
    MomentTable mt;
    mt.d = d;
    mt.m.resize(static_cast<std::size_t>(W) + 1, 0.0);
    auto measures = kernels::ball_measures(a, d);
    for (std::uint32_t v = 0; v < a.size(); ++v) {
        double w = a.weight(v);
        if (w == 0.0) continue;
        double pw = 1.0;
        for (int k = 0; k <= W; ++k) {
            mt.m[static_cast<std::size_t>(k)] += w * pw;
            pw *= measures[v];
        }
    }
    return mt;
}

Formula psi_formula(int d, int w) {
    if (w == 0) return Formula::from_tree(ast::make_true(), 1);
    std::vector<NodePtr> guards;
    for (int i = 2; i <= w + 1; ++i) guards.push_back(ast::make_dist_le(0, i - 1, d));
    return Formula::from_tree(ast::make_and(std::move(guards)), w + 1);
}

// ---- characteristic functions ------------------------------------------------------

nlohmann::json CharacteristicFunction::to_json() const {
    nlohmann::json j;
    j["T"] = T;
    j["path"] = path == Path::Moments ? "moments" : "direct";
    j["points"] = t.size();
    j["truncation_bound"] = truncation_bound;
    j["truncation_ok"] = truncation_ok;
    return j;
}

namespace {

std::vector<double> symmetric_grid(double T, int points) {
    if (points < 8) throw input_error("grid too small");
    std::vector<double> t(static_cast<std::size_t>(points));
    for (int i = 0; i < points; ++i)
        t[static_cast<std::size_t>(i)] = -T + 2.0 * T * i / (points - 1);
    return t;
}

} // namespace

CharacteristicFunction characteristic_function(const MomentTable& m, double T, int points,
                                               double tol) {
    CharacteristicFunction cf;
    cf.T = T;
    cf.path = CharacteristicFunction::Path::Moments;
    cf.t = symmetric_grid(T, points);
    const int W = static_cast<int>(m.m.size()) - 1;
    // Taylor tail of e^{itD} with |D| <= 1
    double bound = 1.0;
    for (int k = 1; k <= W + 1; ++k) bound *= T / k;
    cf.truncation_bound = bound;
    cf.truncation_ok = bound <= tol;
    cf.value.resize(cf.t.size());
    for (std::size_t i = 0; i < cf.t.size(); ++i) {
        std::complex<double> acc{0.0, 0.0};
        std::complex<double> it{0.0, cf.t[i]};
        std::complex<double> term{1.0, 0.0}; // (it)^w / w!
        for (int w = 0; w <= W; ++w) {
            acc += m.m[static_cast<std::size_t>(w)] * term;
            term *= it / static_cast<double>(w + 1);
        }
        cf.value[i] = acc;
    }
    return cf;
}

CharacteristicFunction characteristic_function_direct(const EmpiricalCDF& cdf, double T,
                                                      int points) {
    CharacteristicFunction cf;
    cf.T = T;
    cf.path = CharacteristicFunction::Path::Direct;
    cf.t = symmetric_grid(T, points);
    std::vector<double> values, weights;
    for (const auto& [v, w] : cdf.points()) {
        values.push_back(v);
        weights.push_back(w);
    }
    cf.value = kernels::char_direct(values, weights, cf.t);
    return cf;
}

double atom_mass(const CharacteristicFunction& gamma, double a, double T, double* imag_residue,
                 double max_support) {
    if (gamma.t.size() < 2) throw input_error("characteristic function grid too small");
    double step = gamma.t[1] - gamma.t[0];
    if (step > M_PI / (4.0 * std::max(1e-9, max_support)))
        throw input_error("quadrature grid too coarse: step " + std::to_string(step) +
                          " exceeds pi/(4*max|support|)");
    if (std::abs(gamma.T - T) > 1e-9)
        throw input_error("characteristic function tabulated for a different T");
    // trapezoid rule over [-T, T]
    std::complex<double> acc{0.0, 0.0};
    for (std::size_t i = 0; i < gamma.t.size(); ++i) {
        std::complex<double> e = std::exp(std::complex<double>(0.0, -gamma.t[i] * a));
        std::complex<double> f = e * gamma.value[i];
        double w = (i == 0 || i + 1 == gamma.t.size()) ? 0.5 : 1.0;
        acc += w * f;
    }
    acc *= step / (2.0 * T);
    if (imag_residue) *imag_residue = std::abs(acc.imag());
    return acc.real();
}

// ---- spectrum detection --------------------------------------------------------------

nlohmann::json SpectrumReport::to_json() const {
    nlohmann::json j;
    nlohmann::json atom_list = nlohmann::json::array();
    for (const auto& a : atoms) {
        nlohmann::json ja;
        ja["lambda"] = a.lambda;
        ja["mass"] = a.mass;
        ja["count"] = a.count;
        ja["rounding_residue"] = a.residue;
        ja["inversion_mass"] = a.inversion_mass;
        atom_list.push_back(ja);
    }
    j["atoms"] = atom_list;
    j["lambda0"] = lambda0;
    j["continuity_grid"] = continuity_grid;
    j["d_schedule"] = d_schedule;
    j["n0"] = n0;
    j["n1"] = n1;
    j["window_fraction"] = window_fraction;
    j["tol"] = tol;
    j["atom_merge_radius"] = merge_radius;
    j["lambda_min"] = lambda_min;
    j["warnings"] = warnings;
    j["config"] = config_echo;
    return j;
}

SpectrumReport detect_spectrum(const StructureSequence& s, const Config& cfg) {
    if (cfg.d_schedule.size() < 2)
        throw input_error("detect_spectrum needs a d-schedule with at least two radii");
    SpectrumReport rep;
    rep.d_schedule = cfg.d_schedule;
    rep.n0 = s.first();
    rep.n1 = s.last();
    rep.window_fraction = cfg.window_fraction;
    rep.tol = cfg.tol;
    rep.merge_radius = cfg.atom_merge_radius;
    rep.lambda_min = cfg.lambda_min;
    rep.config_echo = cfg.echo();

    auto tail = tail_indices(s.first(), s.last(), cfg.window_fraction);
    const int d_top = cfg.d_schedule.back();
    const int d_prev = cfg.d_schedule[cfg.d_schedule.size() - 2];

    // stable atom candidates per tail index
    struct Candidate {
        double lambda, mass;
    };
    std::vector<std::vector<Candidate>> per_index;
    for (int n : tail) {
        StructurePtr a = s.at(n);
        EmpiricalCDF top = ball_measure_distribution(*a, d_top);
        EmpiricalCDF prev = ball_measure_distribution(*a, d_prev);
        auto top_atoms = top.atoms(cfg.atom_merge_radius);
        auto prev_atoms = prev.atoms(cfg.atom_merge_radius);
        std::vector<Candidate> kept;
        for (const auto& [lambda, mass] : top_atoms) {
            if (lambda < cfg.lambda_min) continue;
            // saturation in d: a matching cluster at the previous radius
            bool stable = false;
            for (const auto& [pl, pm] : prev_atoms) {
                if (std::abs(pl - lambda) <= cfg.atom_merge_radius &&
                    std::abs(pm - mass) <= cfg.tol) {
                    stable = true;
                    break;
                }
            }
            if (stable) kept.push_back({lambda, mass});
        }
        per_index.push_back(std::move(kept));
    }

    // merge across the window: single-linkage clusters over lambda, kept only
    // when present at every tail index
    struct Pooled {
        double lambda, mass;
        std::size_t index;
    };
    std::vector<Pooled> pool;
    for (std::size_t i = 0; i < per_index.size(); ++i)
        for (const auto& c : per_index[i]) pool.push_back({c.lambda, c.mass, i});
    std::sort(pool.begin(), pool.end(),
              [](const Pooled& a, const Pooled& b) { return a.lambda < b.lambda; });
    std::vector<SpectrumAtom> atoms;
    std::size_t i = 0;
    while (i < pool.size()) {
        std::size_t j = i;
        std::vector<Pooled> group;
        while (j < pool.size() &&
               (j == i || pool[j].lambda - pool[j - 1].lambda <= cfg.atom_merge_radius)) {
            group.push_back(pool[j]);
            ++j;
        }
        std::vector<bool> seen(per_index.size(), false);
        double lam = 0.0, mass = 0.0;
        for (const auto& g : group) {
            seen[g.index] = true;
            lam += g.lambda;
            mass += g.mass;
        }
        bool everywhere = std::all_of(seen.begin(), seen.end(), [](bool b) { return b; });
        if (everywhere && group.size() == per_index.size()) {
            SpectrumAtom a;
            a.lambda = lam / static_cast<double>(group.size());
            a.mass = mass / static_cast<double>(group.size());
            if (a.mass >= a.lambda - cfg.tol) {
                atoms.push_back(a);
            } else {
                rep.warnings.push_back("candidate atom at " + std::to_string(a.lambda) +
                                       " violates mass >= lambda - tol; dropped to residual");
            }
        } else if (!group.empty()) {
            rep.warnings.push_back("candidate atom near " +
                                   std::to_string(lam / group.size()) +
                                   " unstable across the window; dropped");
        }
        i = j;
    }
    std::sort(atoms.begin(), atoms.end(),
              [](const SpectrumAtom& a, const SpectrumAtom& b) { return a.lambda > b.lambda; });

    // integral counts and residues
    for (auto& a : atoms) {
        double ratio = a.mass / a.lambda;
        a.count = std::max(1, static_cast<int>(std::lround(ratio)));
        a.residue = std::abs(ratio - a.count);
        if (a.residue > 0.25)
            rep.warnings.push_back("unstable spectrum: mass/lambda = " + std::to_string(ratio) +
                                   " at lambda = " + std::to_string(a.lambda));
    }

    // Levy inversion cross-check on the direct path at the last index
    {
        StructurePtr a = s.at(s.last());
        EmpiricalCDF top = ball_measure_distribution(*a, d_top);
        CharacteristicFunction gamma =
            characteristic_function_direct(top, cfg.inversion_T, cfg.inversion_grid);
        for (auto& atom : atoms)
            atom.inversion_mass = atom_mass(gamma, atom.lambda, cfg.inversion_T);
    }

    rep.atoms = std::move(atoms);
    double covered = 0.0;
    for (const auto& a : rep.atoms) covered += a.count * a.lambda;
    rep.lambda0 = 1.0 - covered;
    if (rep.lambda0 < -cfg.tol)
        rep.warnings.push_back("negative residual mass " + std::to_string(rep.lambda0));

    // continuity grid: coarse points plus dyadic ladders flanking each atom
    {
        std::vector<double> grid;
        for (int k = 1; k < 64; ++k) grid.push_back(k / 64.0);
        for (const auto& a : rep.atoms) {
            for (int z = 1; z <= 40; ++z) {
                double off = std::pow(2.0, -z) / 3.0;
                grid.push_back(a.lambda - off);
                grid.push_back(a.lambda + off);
            }
        }
        std::sort(grid.begin(), grid.end());
        const double guard = 1e-13;
        for (double g : grid) {
            if (g <= 0.0 || g >= 1.0) continue;
            bool clash = false;
            for (const auto& a : rep.atoms)
                if (std::abs(g - a.lambda) < guard) clash = true;
            if (!clash && (rep.continuity_grid.empty() || g > rep.continuity_grid.back()))
                rep.continuity_grid.push_back(g);
        }
    }
    return rep;
}

// ---- 1-point random lift ------------------------------------------------------------

nlohmann::json LiftDistribution::to_json() const {
    nlohmann::json j;
    j["points"] = points;
    j["weights"] = weights;
    return j;
}

LiftDistribution random_lift_distribution(const Structure& a,
                                          const std::vector<Formula>& battery) {
    for (const auto& f : battery)
        if (f.free_count() < 1)
            throw input_error("random lift battery formulas need at least one free variable");
    LiftDistribution out;
    EvalContext ctx(a);
    for (std::uint32_t v = 0; v < a.size(); ++v) {
        std::vector<double> coords;
        coords.reserve(battery.size());
        for (const auto& f : battery) coords.push_back(kernels::local_pairing_sum(ctx, f, v));
        out.points.push_back(std::move(coords));
        out.weights.push_back(a.weight(v));
    }
    return out;
}

namespace {

std::map<std::vector<double>, double> canonical_distribution(const LiftDistribution& d) {
    std::map<std::vector<double>, double> out;
    for (std::size_t i = 0; i < d.points.size(); ++i) {
        if (d.weights[i] == 0.0) continue;
        out[d.points[i]] += d.weights[i];
    }
    return out;
}

} // namespace

double lift_distance(const LiftDistribution& a, const LiftDistribution& b, int max_scale) {
    auto ca = canonical_distribution(a);
    auto cb = canonical_distribution(b);
    if (ca == cb) return 0.0;
    if (a.points.empty() || b.points.empty()) return 1.0;
    std::size_t k = a.points[0].size();
    if (!b.points.empty() && b.points[0].size() != k)
        throw input_error("lift distributions over different batteries");
    double best = 1.0;
    for (int m = 1; m <= max_scale; ++m) {
        std::map<std::vector<int>, double> boxes_a, boxes_b;
        auto box_of = [&](const std::vector<double>& p) {
            std::vector<int> box(k);
            for (std::size_t c = 0; c < k; ++c)
                box[c] = std::min(m - 1, static_cast<int>(std::floor(p[c] * m)));
            return box;
        };
        for (const auto& [p, w] : ca) boxes_a[box_of(p)] += w;
        for (const auto& [p, w] : cb) boxes_b[box_of(p)] += w;
        double dmax = 0.0;
        for (const auto& [box, w] : boxes_a) {
            auto it = boxes_b.find(box);
            dmax = std::max(dmax, std::abs(w - (it == boxes_b.end() ? 0.0 : it->second)));
        }
        for (const auto& [box, w] : boxes_b)
            if (!boxes_a.count(box)) dmax = std::max(dmax, w);
        best = std::min(best, std::max(1.0 / m, dmax));
    }
    return best;
}

} // namespace limclust
