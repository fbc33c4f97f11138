#include "limclust/sequences.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>
#include <sstream>

#include "limclust/evaluate.hpp"
#include "limclust/kernels.hpp"

namespace limclust {

// ---- sequences -------------------------------------------------------------

StructureSequence::StructureSequence(int n0, int n1, std::function<Structure(int)> provider)
    : n0_(n0), n1_(n1), provider_(std::move(provider)), cache_(std::make_shared<Cache>()) {
    if (n1_ < n0_) throw input_error("empty sequence range");
    cache_->slots.resize(static_cast<std::size_t>(count()));
}

StructurePtr StructureSequence::at(int n) const {
    if (n < n0_ || n > n1_)
        throw input_error("sequence index " + std::to_string(n) + " outside [" +
                          std::to_string(n0_) + "," + std::to_string(n1_) + "]");
    auto idx = static_cast<std::size_t>(n - n0_);
    {
        std::lock_guard<std::mutex> lock(cache_->mu);
        if (cache_->slots[idx]) return cache_->slots[idx];
    }
    auto built = std::make_shared<const Structure>(provider_(n));
    std::lock_guard<std::mutex> lock(cache_->mu);
    if (!cache_->slots[idx]) cache_->slots[idx] = built;
    return cache_->slots[idx];
}

SubsetSequence::SubsetSequence(int n0, int n1, std::function<VertexSet(int)> provider)
    : n0_(n0), n1_(n1), provider_(std::move(provider)), cache_(std::make_shared<Cache>()) {
    if (n1_ < n0_) throw input_error("empty sequence range");
    cache_->slots.resize(static_cast<std::size_t>(n1_ - n0_ + 1));
}

VertexSet SubsetSequence::at(int n) const {
    if (n < n0_ || n > n1_)
        throw input_error("subset index " + std::to_string(n) + " outside range");
    auto idx = static_cast<std::size_t>(n - n0_);
    {
        std::lock_guard<std::mutex> lock(cache_->mu);
        if (cache_->slots[idx]) return *cache_->slots[idx];
    }
    VertexSet v = provider_(n);
    std::lock_guard<std::mutex> lock(cache_->mu);
    if (!cache_->slots[idx]) cache_->slots[idx] = v;
    return *cache_->slots[idx];
}

SubsetSequence SubsetSequence::empty_like(const StructureSequence& s) {
    return SubsetSequence(s.first(), s.last(),
                          [s](int n) { return VertexSet(s.at(n)->size()); });
}

SubsetSequence SubsetSequence::full_like(const StructureSequence& s) {
    return SubsetSequence(s.first(), s.last(),
                          [s](int n) { return VertexSet::full(s.at(n)->size()); });
}

SubsetSequence SubsetSequence::complement_in(const StructureSequence& s) const {
    SubsetSequence self = *this;
    return SubsetSequence(n0_, n1_, [self, s](int n) { return self.at(n).complement(); });
}

SubsetSequence SubsetSequence::set_union(const SubsetSequence& o) const {
    SubsetSequence a = *this, b = o;
    return SubsetSequence(n0_, n1_, [a, b](int n) { return a.at(n) | b.at(n); });
}

SubsetSequence SubsetSequence::set_difference(const SubsetSequence& o) const {
    SubsetSequence a = *this, b = o;
    return SubsetSequence(n0_, n1_, [a, b](int n) { return a.at(n) - b.at(n); });
}

SubsetSequence SubsetSequence::symmetric_difference(const SubsetSequence& o) const {
    SubsetSequence a = *this, b = o;
    return SubsetSequence(n0_, n1_, [a, b](int n) { return a.at(n).symmetric_difference(b.at(n)); });
}

void require_aligned(const StructureSequence& s, const SubsetSequence& x) {
    if (s.first() != x.first() || s.last() != x.last())
        throw input_error("structure and subset sequences have misaligned index ranges");
}

std::vector<int> tail_indices(int n0, int n1, double fraction) {
    int count = n1 - n0 + 1;
    int w = std::max(1, static_cast<int>(std::ceil(fraction * count)));
    std::vector<int> out;
    for (int n = n1 - w + 1; n <= n1; ++n) out.push_back(n);
    return out;
}

// ---- negligibility ------------------------------------------------------------

nlohmann::json NegligibleProfile::to_json() const {
    nlohmann::json j;
    j["n0"] = n0;
    j["n1"] = n1;
    j["dmax"] = dmax;
    j["tol"] = tol;
    j["window_fraction"] = window_fraction;
    j["table"] = table;
    j["tail_sup"] = tail_sup;
    j["negligible_at_scale"] = negligible;
    return j;
}

std::string NegligibleProfile::to_csv() const {
    std::ostringstream os;
    os << "n";
    for (int d = 0; d <= dmax; ++d) os << ",d" << d;
    os << "\n";
    for (int n = n0; n <= n1; ++n) {
        os << n;
        for (int d = 0; d <= dmax; ++d)
            os << "," << table[static_cast<std::size_t>(d)][static_cast<std::size_t>(n - n0)];
        os << "\n";
    }
    return os.str();
}

NegligibleProfile negligible_profile(const StructureSequence& s, const SubsetSequence& x,
                                     int dmax, double tol, double window_fraction) {
    require_aligned(s, x);
    if (dmax < 0) throw input_error("negative dmax");
    NegligibleProfile out;
    out.n0 = s.first();
    out.n1 = s.last();
    out.dmax = dmax;
    out.tol = tol;
    out.window_fraction = window_fraction;
    out.table.assign(static_cast<std::size_t>(dmax) + 1,
                     std::vector<double>(static_cast<std::size_t>(s.count()), 0.0));
    for (int n = s.first(); n <= s.last(); ++n) {
        StructurePtr a = s.at(n);
        VertexSet grown = x.at(n);
        for (int d = 0; d <= dmax; ++d) {
            if (d > 0) grown = a->ball(grown, 1);
            out.table[static_cast<std::size_t>(d)][static_cast<std::size_t>(n - s.first())] =
                a->measure(grown);
        }
    }
    auto tail = tail_indices(s.first(), s.last(), window_fraction);
    out.tail_sup.assign(static_cast<std::size_t>(dmax) + 1, 0.0);
    for (int d = 0; d <= dmax; ++d)
        for (int n : tail)
            out.tail_sup[static_cast<std::size_t>(d)] =
                std::max(out.tail_sup[static_cast<std::size_t>(d)],
                         out.table[static_cast<std::size_t>(d)][static_cast<std::size_t>(n - s.first())]);
    out.negligible = true;
    for (double v : out.tail_sup)
        if (v >= tol) out.negligible = false;
    return out;
}

nlohmann::json NegligibleBoundReport::to_json() const {
    nlohmann::json j;
    j["precondition_ok"] = precondition_ok;
    j["precondition_note"] = precondition_note;
    j["ball_measure"] = ball_measure;
    j["d"] = d;
    j["eps"] = eps;
    j["p"] = p;
    j["pairing_full"] = pairing_full;
    j["pairing_removed"] = pairing_removed;
    j["difference"] = difference;
    j["bound"] = bound;
    j["bound_holds"] = bound_holds;
    if (has_fragmentation) {
        j["fragmentation_sum"] = fragmentation_sum;
        j["fragmentation_difference"] = fragmentation_difference;
        j["fragmentation_bound_holds"] = fragmentation_bound_holds;
        j["fragmentation_note"] = fragmentation_note;
    }
    return j;
}

NegligibleBoundReport check_negligible_bound(
    const Structure& a, const VertexSet& x, const Formula& phi, int d, double eps,
    const std::optional<std::vector<VertexSet>>& fragmentation_parts) {
    NegligibleBoundReport rep;
    rep.d = d;
    rep.eps = eps;
    rep.p = phi.free_count();
    rep.ball_measure = a.measure(a.ball(x, d));
    if (rep.ball_measure >= eps) {
        rep.precondition_note = "X is not (d,eps)-negligible: nu(ball^d(X)) = " +
                                std::to_string(rep.ball_measure);
        return rep;
    }
    if (phi.radius() >= d) {
        rep.precondition_note =
            "formula radius " + std::to_string(phi.radius()) + " is not below d";
        return rep;
    }
    if (a.measure(x) >= 1.0) {
        rep.precondition_note = "X carries full measure; A - X undefined";
        return rep;
    }
    rep.precondition_ok = true;
    rep.pairing_full = stone_pairing(a, phi);
    rep.pairing_removed = stone_pairing(a.remove(x), phi);
    rep.difference = std::abs(rep.pairing_full - rep.pairing_removed);
    rep.bound = 2.0 * rep.p * eps;
    rep.bound_holds = rep.difference < rep.bound;

    if (fragmentation_parts) {
        rep.has_fragmentation = true;
        const auto& parts = *fragmentation_parts;
        // validate: parts pairwise disjoint, no cross edges, partition with x
        VertexSet covered = x;
        bool ok = true;
        std::string note;
        for (std::size_t i = 0; i < parts.size() && ok; ++i) {
            if (parts[i].intersects(covered)) {
                ok = false;
                note = "fragmentation parts overlap";
                break;
            }
            covered |= parts[i];
            for (std::size_t j = 0; j < i; ++j) {
                if (a.outer_boundary(parts[i]).intersects(parts[j])) {
                    ok = false;
                    note = "parts " + std::to_string(i) + " and " + std::to_string(j) +
                           " are adjacent";
                    break;
                }
            }
        }
        if (ok && covered.count() != a.size()) {
            ok = false;
            note = "fragmentation does not cover the domain";
        }
        if (!phi.strongly_local()) {
            ok = false;
            note = "fragmentation bound needs a strongly local formula";
        }
        if (!ok) {
            rep.fragmentation_note = note;
            rep.fragmentation_bound_holds = false;
        } else {
            double sum = 0.0;
            for (const auto& part : parts) {
                double nu = a.measure(part);
                if (nu <= 0.0) continue;
                sum += std::pow(nu, rep.p) * stone_pairing(a.induce(part), phi);
            }
            rep.fragmentation_sum = sum;
            rep.fragmentation_difference = std::abs(rep.pairing_full - sum);
            rep.fragmentation_bound_holds = rep.fragmentation_difference < rep.bound;
        }
    }
    return rep;
}

// ---- convergence diagnostics -----------------------------------------------------

nlohmann::json ConvergenceDiagnostic::to_json() const {
    nlohmann::json j;
    j["formulas"] = formula_names;
    j["values"] = values;
    j["osc"] = osc;
    j["limit"] = limit;
    j["max_osc"] = max_osc;
    j["n0"] = n0;
    j["n1"] = n1;
    j["window_fraction"] = window_fraction;
    return j;
}

ConvergenceDiagnostic convergence_diagnostic(const StructureSequence& s,
                                             const std::vector<Formula>& battery,
                                             double window_fraction) {
    ConvergenceDiagnostic diag;
    diag.n0 = s.first();
    diag.n1 = s.last();
    diag.window_fraction = window_fraction;
    diag.values.assign(battery.size(), std::vector<double>(static_cast<std::size_t>(s.count()), 0.0));
    for (std::size_t fi = 0; fi < battery.size(); ++fi)
        diag.formula_names.push_back(battery[fi].to_string());
    for (int n = s.first(); n <= s.last(); ++n) {
        StructurePtr a = s.at(n);
        for (std::size_t fi = 0; fi < battery.size(); ++fi)
            diag.values[fi][static_cast<std::size_t>(n - s.first())] =
                stone_pairing(*a, battery[fi]);
    }
    auto tail = tail_indices(s.first(), s.last(), window_fraction);
    diag.osc.resize(battery.size());
    diag.limit.resize(battery.size());
    for (std::size_t fi = 0; fi < battery.size(); ++fi) {
        double lo = 1e300, hi = -1e300, mean = 0.0;
        for (int n : tail) {
            double v = diag.values[fi][static_cast<std::size_t>(n - s.first())];
            lo = std::min(lo, v);
            hi = std::max(hi, v);
            mean += v;
        }
        diag.osc[fi] = hi - lo;
        diag.limit[fi] = mean / static_cast<double>(tail.size());
        diag.max_osc = std::max(diag.max_osc, diag.osc[fi]);
    }
    return diag;
}

std::vector<Formula> default_battery(const Signature& sig, const std::string& mark) {
    std::vector<Formula> out;
    out.push_back(Formula::parse("x1 = x1"));
    out.push_back(Formula::parse(mark + "(x1)"));
    for (const auto& name : sig.names()) {
        if (name == mark) continue;
        if (sig.is_mark(name)) continue;
        int k = sig.arity_of(name);
        std::ostringstream atom;
        atom << name << "(";
        for (int i = 1; i <= k; ++i) atom << (i > 1 ? "," : "") << "x" << i;
        atom << ")";
        out.push_back(Formula::parse(atom.str()));
        std::ostringstream marked;
        marked << atom.str();
        for (int i = 1; i <= k; ++i) marked << " & " << mark << "(x" << i << ")";
        out.push_back(Formula::parse(marked.str()));
    }
    return out;
}

namespace {

NodePtr substitute_mark_node(const NodePtr& node, const std::string& mark, bool value) {
    switch (node->kind) {
    case NodeKind::Rel:
        if (node->rel_name == mark) return value ? ast::make_true() : ast::make_false();
        return node;
    case NodeKind::Not:
        return ast::make_not(substitute_mark_node(node->children[0], mark, value));
    case NodeKind::And:
    case NodeKind::Or: {
        std::vector<NodePtr> cs;
        for (const auto& c : node->children) cs.push_back(substitute_mark_node(c, mark, value));
        return node->kind == NodeKind::And ? ast::make_and(std::move(cs))
                                           : ast::make_or(std::move(cs));
    }
    case NodeKind::Exists:
    case NodeKind::Forall: {
        NodePtr body = substitute_mark_node(node->body, mark, value);
        return node->kind == NodeKind::Exists
                   ? ast::make_exists(node->bound_var, node->anchor_var, node->ball_radius,
                                      std::move(body))
                   : ast::make_forall(node->bound_var, node->anchor_var, node->ball_radius,
                                      std::move(body));
    }
    default:
        return node;
    }
}

} // namespace

Formula substitute_mark(const Formula& phi, const std::string& mark, bool value) {
    return Formula::from_tree(substitute_mark_node(phi.root(), mark, value), phi.free_count());
}

// ---- clusters ----------------------------------------------------------------

const char* verdict_name(Verdict v) {
    switch (v) {
    case Verdict::Pass: return "pass";
    case Verdict::Fail: return "fail";
    default: return "inconclusive";
    }
}

nlohmann::json ClusterCheck::to_json() const {
    nlohmann::json j;
    j["verdict"] = verdict_name(verdict);
    j["negligible_case"] = negligible_case;
    j["boundary_profile"] = boundary.to_json();
    j["lift_diagnostic"] = lift.to_json();
    j["measure_converges"] = measure_converges;
    j["measure_limit"] = measure_limit;
    j["measure_osc"] = measure_osc;
    if (induced) j["induced_diagnostic"] = induced->to_json();
    j["notes"] = notes;
    return j;
}

ClusterCheck is_cluster(const StructureSequence& s, const SubsetSequence& x,
                        const std::vector<Formula>& battery, int dmax, double tol,
                        double window_fraction) {
    require_aligned(s, x);
    ClusterCheck check;

    // (2): the outer boundary forms a negligible sequence
    SubsetSequence boundary(s.first(), s.last(),
                            [s, x](int n) { return s.at(n)->outer_boundary(x.at(n)); });
    check.boundary = negligible_profile(s, boundary, dmax, tol, window_fraction);

    // (1): the marked lift stays convergent over the battery
    StructureSequence lifted(s.first(), s.last(),
                             [s, x](int n) { return s.at(n)->with_mark("M", x.at(n)); });
    check.lift = convergence_diagnostic(lifted, battery, window_fraction);

    // measure path of the alternative characterization
    {
        auto tail = tail_indices(s.first(), s.last(), window_fraction);
        double lo = 1e300, hi = -1e300, mean = 0.0;
        for (int n : tail) {
            double v = s.at(n)->measure(x.at(n));
            lo = std::min(lo, v);
            hi = std::max(hi, v);
            mean += v;
        }
        check.measure_osc = hi - lo;
        check.measure_limit = mean / static_cast<double>(tail.size());
        check.measure_converges = check.measure_osc < tol;
    }

    // negligible sequences are clusters outright
    NegligibleProfile self = negligible_profile(s, x, dmax, tol, window_fraction);
    if (self.negligible) {
        check.negligible_case = true;
        check.verdict = Verdict::Pass;
        check.notes.push_back("X is negligible-at-scale (equivalent to the empty sequence)");
        return check;
    }

    if (check.measure_limit > tol) {
        // alternative characterization: induced sequence convergent
        std::vector<Formula> induced_battery;
        for (const auto& f : battery) induced_battery.push_back(substitute_mark(f, "M", true));
        StructureSequence induced_seq(s.first(), s.last(), [s, x](int n) {
            return s.at(n)->induce(x.at(n));
        });
        check.induced = convergence_diagnostic(induced_seq, induced_battery, window_fraction);
    }

    bool pass = check.boundary.negligible && check.lift.converged(tol) &&
                check.measure_converges &&
                (!check.induced || check.induced->converged(tol));
    if (pass) {
        check.verdict = Verdict::Pass;
    } else if (!check.boundary.negligible || check.measure_osc > 2 * tol ||
               check.lift.max_osc > 2 * tol) {
        check.verdict = Verdict::Fail;
        if (!check.boundary.negligible) check.notes.push_back("outer boundary not negligible-at-scale");
        if (check.lift.max_osc > 2 * tol)
            check.notes.push_back("lifted battery oscillates: " + std::to_string(check.lift.max_osc));
        if (check.measure_osc > 2 * tol)
            check.notes.push_back("subset measure oscillates: " + std::to_string(check.measure_osc));
    } else {
        check.verdict = Verdict::Inconclusive;
        check.notes.push_back("statistics near tolerance; more indices needed");
    }
    return check;
}

nlohmann::json InterweavingVerdict::to_json() const {
    nlohmann::json j;
    j["interweaving"] = interweaving;
    j["measure_diff"] = measure_diff;
    j["max_stat_diff"] = max_stat_diff;
    j["notes"] = notes;
    return j;
}

InterweavingVerdict interweaving(const StructureSequence& s, const SubsetSequence& x,
                                 const SubsetSequence& y, const std::vector<Formula>& battery,
                                 int dmax, double tol, double window_fraction) {
    ClusterCheck cx = is_cluster(s, x, battery, dmax, tol, window_fraction);
    ClusterCheck cy = is_cluster(s, y, battery, dmax, tol, window_fraction);
    if (cx.verdict != Verdict::Pass || cy.verdict != Verdict::Pass)
        throw input_error("interweaving requires two clusters (got " +
                          std::string(verdict_name(cx.verdict)) + " and " +
                          std::string(verdict_name(cy.verdict)) + ")");
    InterweavingVerdict v;
    if (cx.negligible_case && cy.negligible_case) {
        v.interweaving = true;
        v.notes.push_back("both sequences negligible");
        return v;
    }
    v.measure_diff = std::abs(cx.measure_limit - cy.measure_limit);
    if (cx.induced && cy.induced) {
        for (std::size_t i = 0; i < cx.induced->limit.size(); ++i)
            v.max_stat_diff =
                std::max(v.max_stat_diff, std::abs(cx.induced->limit[i] - cy.induced->limit[i]));
    } else {
        v.notes.push_back("induced statistics unavailable on one side");
    }
    v.interweaving = v.measure_diff < tol && v.max_stat_diff < tol &&
                     cx.negligible_case == cy.negligible_case;
    if (!v.interweaving) {
        if (v.measure_diff >= tol) v.notes.push_back("limit measures differ");
        if (v.max_stat_diff >= tol) v.notes.push_back("induced-limit statistics differ");
    }
    return v;
}

// ---- wrapping --------------------------------------------------------------------

nlohmann::json WrapResult::to_json() const {
    nlohmann::json j;
    j["radius_schedule"] = radius_schedule;
    return j;
}

WrapResult wrap(const StructureSequence& s, const SubsetSequence& x,
                const std::vector<Formula>& battery, const Config& cfg) {
    require_aligned(s, x);
    // pre-cluster checks
    auto tail = tail_indices(s.first(), s.last(), cfg.window_fraction);
    double mean = 0.0;
    for (int n : tail) mean += s.at(n)->measure(x.at(n));
    mean /= static_cast<double>(tail.size());
    if (mean <= cfg.tol)
        throw input_error("wrap: pre-cluster has vanishing limit measure (" +
                          std::to_string(mean) + "); handle as trivial cluster upstream");
    {
        std::vector<Formula> induced_battery;
        for (const auto& f : battery) induced_battery.push_back(substitute_mark(f, "M", true));
        StructureSequence induced_seq(s.first(), s.last(),
                                      [s, x](int n) { return s.at(n)->induce(x.at(n)); });
        auto diag = convergence_diagnostic(induced_seq, induced_battery, cfg.window_fraction);
        if (!diag.converged(cfg.tol))
            throw input_error("wrap: induced statistics oscillate (" +
                              std::to_string(diag.max_osc) + "); not a pre-cluster");
    }
    // halo profile: nu(ball^d(X) \ X) must vanish at scale
    for (int d = 1; d <= cfg.dmax; ++d) {
        double sup = 0.0;
        for (int n : tail) {
            StructurePtr a = s.at(n);
            VertexSet xs = x.at(n);
            sup = std::max(sup, a->measure(a->ball(xs, d) - xs));
        }
        if (sup >= cfg.tol)
            throw input_error("wrap: halo at d=" + std::to_string(d) +
                              " has tail sup " + std::to_string(sup));
    }

    // halo(n, k) = nu(ball^k(X_n) \ X_n)
    const int max_d = cfg.dmax;
    std::vector<std::vector<double>> halo(static_cast<std::size_t>(s.count()));
    for (int n = s.first(); n <= s.last(); ++n) {
        StructurePtr a = s.at(n);
        VertexSet xs = x.at(n);
        VertexSet grown = xs;
        auto& row = halo[static_cast<std::size_t>(n - s.first())];
        row.resize(static_cast<std::size_t>(2 * max_d + 2), 0.0);
        for (int k = 1; k <= 2 * max_d + 1; ++k) {
            grown = a->ball(grown, 1);
            row[static_cast<std::size_t>(k)] = a->measure(grown - xs);
        }
    }
    WrapResult out;
    out.radius_schedule.resize(static_cast<std::size_t>(s.count()), 0);
    for (int n = s.first(); n <= s.last(); ++n) {
        int best = 0;
        for (int d = 1; d <= max_d; ++d) {
            bool ok = true;
            for (int np = n; np <= s.last() && ok; ++np)
                if (halo[static_cast<std::size_t>(np - s.first())][static_cast<std::size_t>(2 * d + 1)] >=
                    1.0 / d)
                    ok = false;
            if (ok) best = d;
            else break;
        }
        out.radius_schedule[static_cast<std::size_t>(n - s.first())] = best;
    }
    // D is non-decreasing by construction (conditions relax as n grows)
    auto ds = out.radius_schedule;
    int n0 = s.first();
    out.wrapped = SubsetSequence(s.first(), s.last(), [s, x, ds, n0](int n) {
        return s.at(n)->ball(x.at(n), ds[static_cast<std::size_t>(n - n0)]);
    });
    return out;
}

// ---- expansion -----------------------------------------------------------------------

nlohmann::json ExpansionReport::to_json() const {
    nlohmann::json j;
    j["delta_hat"] = delta_hat;
    j["witness"] = witness.to_vector();
    j["mode"] = exact ? "exact" : "sampled";
    j["subsets_considered"] = subsets_considered;
    if (h_out) j["h_out"] = *h_out;
    return j;
}

namespace {

VertexSet mask_to_set(std::size_t n, std::uint64_t mask) {
    VertexSet x(n);
    for (std::uint32_t v = 0; v < n; ++v)
        if (mask & (std::uint64_t{1} << v)) x.set(v);
    return x;
}

} // namespace

ExpansionReport expansion_check(const Structure& a, int d, double eps, const Config& cfg,
                                ScanMode mode) {
    ExpansionReport rep;
    rep.witness = VertexSet(a.size());
    if (a.size() <= static_cast<std::size_t>(cfg.exact_subset_limit)) {
        auto scan = kernels::expansion_scan(a, d, eps, true, 1.0 - eps, true);
        rep.exact = true;
        rep.subsets_considered = scan.considered;
        if (scan.found) {
            rep.delta_hat = scan.best;
            rep.witness = mask_to_set(a.size(), scan.witness);
        } else {
            rep.delta_hat = std::numeric_limits<double>::infinity();
        }
        rep.h_out = h_out(a, cfg);
        return rep;
    }
    if (mode == ScanMode::Exact)
        throw input_error("exact expansion mode refused for n > " +
                          std::to_string(cfg.exact_subset_limit));
    // sampled lower-bound search: grown balls around every vertex plus seeded
    // random subsets
    rep.exact = false;
    double best = std::numeric_limits<double>::infinity();
    VertexSet best_set(a.size());
    auto consider = [&](const VertexSet& xset) {
        double nu = a.measure(xset);
        if (!(nu > eps && nu < 1.0 - eps)) return;
        double ratio = (a.measure(a.ball(xset, d)) - nu) / nu;
        ++rep.subsets_considered;
        if (ratio < best) {
            best = ratio;
            best_set = xset;
        }
    };
    for (std::uint32_t v = 0; v < a.size(); ++v) {
        VertexSet ball(a.size());
        ball.set(v);
        while (true) {
            consider(ball);
            if (a.measure(ball) >= 1.0 - eps) break;
            VertexSet next = a.ball(ball, 1);
            if (next == ball) break;
            ball = std::move(next);
        }
    }
    std::mt19937 rng(cfg.seed);
    std::uniform_real_distribution<double> ud(0.0, 1.0);
    for (int t = 0; t < cfg.sample_count; ++t) {
        double density = ud(rng);
        VertexSet xset(a.size());
        for (std::uint32_t v = 0; v < a.size(); ++v)
            if (ud(rng) < density) xset.set(v);
        consider(xset);
    }
    rep.delta_hat = best;
    rep.witness = best_set;
    return rep;
}

double h_out(const Structure& a, const Config& cfg) {
    if (a.size() > static_cast<std::size_t>(cfg.exact_subset_limit))
        throw input_error("exact h_out refused for n > " + std::to_string(cfg.exact_subset_limit));
    auto scan = kernels::expansion_scan(a, 1, 0.0, true, 0.5, false);
    if (!scan.found) return std::numeric_limits<double>::infinity();
    return scan.best;
}

VertexSet clean_expander(const Structure& a, int d, double eps, double delta, const Config& cfg) {
    if (a.size() > static_cast<std::size_t>(cfg.exact_subset_limit))
        throw input_error("clean_expander needs exact mode (n <= " +
                          std::to_string(cfg.exact_subset_limit) + ")");
    auto base = expansion_check(a, d, eps, cfg, ScanMode::Exact);
    if (base.delta_hat <= delta)
        throw input_error("structure is not (d,eps,delta)-expanding: delta_hat = " +
                          std::to_string(base.delta_hat));
    VertexSet y(a.size());
    while (true) {
        VertexSet rest = y.complement();
        if (rest.empty()) break;
        Structure sub = a.induce(rest);
        std::vector<std::uint32_t> ids = rest.to_vector();
        // lexicographically smallest violator of the half-measure conclusion
        auto scan = kernels::expansion_scan(sub, d, 0.0, true, 0.5, false);
        bool found_violation = false;
        std::uint64_t viol_mask = 0;
        if (scan.found && scan.best < delta) {
            found_violation = true;
            viol_mask = scan.witness;
        }
        if (!found_violation) break;
        for (std::uint32_t local = 0; local < sub.size(); ++local)
            if (viol_mask & (std::uint64_t{1} << local)) y.set(ids[local]);
    }
    return y;
}

// ---- dispersion / classification ---------------------------------------------------

nlohmann::json DispersionProfile::to_json() const {
    nlohmann::json j;
    j["n0"] = n0;
    j["n1"] = n1;
    j["dmax"] = dmax;
    j["table"] = table;
    return j;
}

std::string DispersionProfile::to_csv() const {
    std::ostringstream os;
    os << "n";
    for (int d = 1; d <= dmax; ++d) os << ",d" << d;
    os << "\n";
    for (int n = n0; n <= n1; ++n) {
        os << n;
        for (int d = 1; d <= dmax; ++d)
            os << "," << table[static_cast<std::size_t>(d - 1)][static_cast<std::size_t>(n - n0)];
        os << "\n";
    }
    return os.str();
}

DispersionProfile dispersion_profile(const StructureSequence& s, const SubsetSequence& x,
                                     int dmax, double /*window_fraction*/) {
    require_aligned(s, x);
    DispersionProfile out;
    out.n0 = s.first();
    out.n1 = s.last();
    out.dmax = dmax;
    out.table.assign(static_cast<std::size_t>(dmax),
                     std::vector<double>(static_cast<std::size_t>(s.count()), 0.0));
    for (int n = s.first(); n <= s.last(); ++n) {
        VertexSet xs = x.at(n);
        if (xs.empty()) continue;
        Structure sub = s.at(n)->induce(xs);
        for (int d = 1; d <= dmax; ++d) {
            auto measures = kernels::ball_measures(sub, d);
            double mx = 0.0;
            for (double v : measures) mx = std::max(mx, v);
            out.table[static_cast<std::size_t>(d - 1)][static_cast<std::size_t>(n - s.first())] = mx;
        }
    }
    return out;
}

const char* cluster_class_name(ClusterClass c) {
    switch (c) {
    case ClusterClass::Globular: return "globular";
    case ClusterClass::Open: return "open";
    case ClusterClass::Residual: return "residual";
    default: return "inconclusive";
    }
}

nlohmann::json ClassifyResult::to_json() const {
    nlohmann::json j;
    j["class"] = cluster_class_name(cls);
    j["profile"] = profile.to_json();
    if (expansion) j["expansion"] = expansion->to_json();
    j["notes"] = notes;
    return j;
}

ClassifyResult classify(const StructureSequence& s, const SubsetSequence& x, const Config& cfg) {
    ClassifyResult res;
    res.profile = dispersion_profile(s, x, cfg.classify_dmax, cfg.window_fraction);
    auto tail = tail_indices(s.first(), s.last(), cfg.window_fraction);
    const double eps = cfg.classify_epsilon;

    bool globular = false;
    for (int d = 1; d <= cfg.classify_dmax && !globular; ++d) {
        double tail_min = 1e300;
        for (int n : tail)
            tail_min = std::min(tail_min, res.profile.table[static_cast<std::size_t>(d - 1)]
                                                           [static_cast<std::size_t>(n - s.first())]);
        if (tail_min >= 1.0 - eps) {
            globular = true;
            res.notes.push_back("ball radius " + std::to_string(d) + " covers 1-eps of the mass");
        }
    }
    if (globular) {
        res.cls = ClusterClass::Globular;
        return res;
    }
    bool all_small = true;
    for (int d = 1; d <= cfg.classify_dmax && all_small; ++d) {
        double tail_sup = 0.0;
        for (int n : tail)
            tail_sup = std::max(tail_sup, res.profile.table[static_cast<std::size_t>(d - 1)]
                                                           [static_cast<std::size_t>(n - s.first())]);
        if (tail_sup > eps) all_small = false;
    }
    if (!all_small) {
        res.cls = ClusterClass::Inconclusive;
        res.notes.push_back("maximal ball measures sit between eps and 1-eps");
        return res;
    }
    // all balls vanish: expanding induced substructures are open clusters,
    // the rest is residual
    int n_last = s.last();
    VertexSet xs = x.at(n_last);
    if (xs.empty()) {
        res.cls = ClusterClass::Residual;
        res.notes.push_back("empty tail subset");
        return res;
    }
    Structure sub = s.at(n_last)->induce(xs);
    res.expansion = expansion_check(sub, 2, 0.2, cfg, ScanMode::Auto);
    if (res.expansion->delta_hat > cfg.tol * 2) {
        res.cls = ClusterClass::Open;
        res.notes.push_back("induced tail structure expands (delta_hat = " +
                            std::to_string(res.expansion->delta_hat) + ")");
    } else {
        res.cls = ClusterClass::Residual;
        res.notes.push_back("induced tail structure does not expand");
    }
    return res;
}

} // namespace limclust
