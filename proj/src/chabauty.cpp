#include "danzer/chabauty.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <sstream>

#include "danzer/rng.hpp"

namespace danzer {

namespace {

bool lex_less(const Vec& a, const Vec& b) {
    for (int i = 0; i < a.size(); ++i) {
        if (a[i] < b[i]) return true;
        if (a[i] > b[i]) return false;
    }
    return false;
}

double min_dist(const Vec& p, const std::vector<Vec>& pts) {
    double best = std::numeric_limits<double>::infinity();
    for (const Vec& q : pts) best = std::min(best, (p - q).norm());
    return best;
}

bool same_points(const WindowedSet& a, const WindowedSet& b) {
    if (a.points.size() != b.points.size()) return false;
    for (size_t i = 0; i < a.points.size(); ++i)
        if (a.points[i].size() != b.points[i].size() || a.points[i] != b.points[i]) return false;
    return true;
}

} // namespace

WindowedSet WindowedSet::make(std::vector<Vec> pts, double window_radius) {
    if (!(window_radius > 0.0))
        throw std::invalid_argument("WindowedSet: window radius must be positive");
    std::vector<Vec> kept;
    for (Vec& p : pts)
        if (p.norm() <= window_radius) kept.push_back(std::move(p));
    std::sort(kept.begin(), kept.end(), lex_less);
    std::vector<Vec> dedup;
    for (Vec& p : kept) {
        if (!dedup.empty() && (dedup.back() - p).norm() <= 1e-12) continue;
        dedup.push_back(std::move(p));
    }
    WindowedSet w;
    w.points = std::move(dedup);
    w.window_radius = window_radius;
    w.is_empty_set = w.points.empty();
    return w;
}

WindowedSet WindowedSet::empty_set(double window_radius) {
    return make({}, window_radius);
}

std::string WindowedSet::serialize() const {
    std::ostringstream out;
    out.precision(17);
    out << "window " << window_radius << "\n";
    if (is_empty_set && points.empty()) {
        out << "empty\n";
        return out.str();
    }
    for (const Vec& p : points) {
        for (int i = 0; i < p.size(); ++i) out << (i ? " " : "") << p[i];
        out << "\n";
    }
    return out.str();
}

WindowedSet WindowedSet::deserialize(const std::string& text) {
    std::istringstream in(text);
    std::string line;
    double window = 0.0;
    bool have_window = false;
    std::vector<Vec> pts;
    while (std::getline(in, line)) {
        if (line.empty() || line[0] == '#') continue;
        std::istringstream ls(line);
        std::string head;
        if (!have_window) {
            ls >> head >> window;
            if (head != "window")
                throw std::invalid_argument("WindowedSet: missing 'window' header line");
            have_window = true;
            continue;
        }
        if (line == "empty") continue;
        ls.clear();
        ls.str(line);
        std::vector<double> coords;
        double v;
        while (ls >> v) coords.push_back(v);
        if (coords.empty()) continue;
        pts.push_back(Eigen::Map<Vec>(coords.data(), static_cast<int>(coords.size())));
    }
    if (!have_window) throw std::invalid_argument("WindowedSet: missing 'window' header line");
    return make(std::move(pts), window);
}

double cf_distance(const WindowedSet& a, const WindowedSet& b) {
    if (same_points(a, b)) return 0.0;

    const double min_window = std::min(a.window_radius, b.window_radius);

    // Distances to the other set are independent of eps; precompute them.
    std::vector<double> da(a.points.size()), db(b.points.size());
    std::vector<double> na(a.points.size()), nb(b.points.size());
    for (size_t i = 0; i < a.points.size(); ++i) {
        da[i] = min_dist(a.points[i], b.points);
        na[i] = a.points[i].norm();
    }
    for (size_t i = 0; i < b.points.size(); ++i) {
        db[i] = min_dist(b.points[i], a.points);
        nb[i] = b.points[i].norm();
    }

    auto holds = [&](double eps) {
        const double cutoff = 1.0 / eps;
        for (size_t i = 0; i < da.size(); ++i)
            if (na[i] <= cutoff && da[i] > eps) return false;
        for (size_t i = 0; i < db.size(); ++i)
            if (nb[i] <= cutoff && db[i] > eps) return false;
        return true;
    };

    double result;
    if (!holds(1.0)) {
        result = 1.0; // the cap in the definition
    } else {
        double lo = 0.0, hi = 1.0;
        while (hi - lo > 1e-11) {
            const double mid = 0.5 * (lo + hi);
            if (holds(mid))
                hi = mid;
            else
                lo = mid;
        }
        result = hi;
    }

    if (result > 0.0 && 1.0 / result > min_window * (1.0 + 1e-9))
        throw WindowInsufficiencyError(
            "cf_distance: windows smaller than 1/distance; the result cannot be trusted");
    return result;
}

WindowedSet act(const UnimodularAffine& g, const WindowedSet& set) {
    const double inv_norm = operator_norm(g.inverse().linear);
    const double shift = (g.inverse().linear * g.translation).norm();
    double new_window = (set.window_radius - shift) / inv_norm;
    if (!(new_window > 0.0)) new_window = 1e-12; // image faithful nowhere useful

    std::vector<Vec> pts;
    pts.reserve(set.points.size());
    for (const Vec& p : set.points) pts.push_back(g.apply(p));
    WindowedSet out = WindowedSet::make(std::move(pts), new_window);
    out.is_empty_set = set.is_empty_set;
    return out;
}

UnimodularAffine shear(int d, const Vec& a) {
    if (d < 2) throw std::invalid_argument("shear: dimension must be >= 2");
    if (a.size() != d - 1) throw std::invalid_argument("shear: parameter must have d-1 entries");
    Mat lin = Mat::Identity(d, d);
    lin.row(0).tail(d - 1) = a.transpose();
    return {std::move(lin), Vec::Zero(d)};
}

UnimodularAffine diagonal_flow(int d, double t) {
    if (d < 2) throw std::invalid_argument("diagonal_flow: dimension must be >= 2");
    Vec diag = Vec::Constant(d, std::exp(-t));
    diag[0] = std::exp(static_cast<double>(d - 1) * t);
    return {Mat(diag.asDiagonal()), Vec::Zero(d)};
}

Mat axis_projection(int d, int k) {
    if (k < 1 || k > d) throw std::invalid_argument("axis_projection: need 1 <= k <= d");
    Mat p = Mat::Zero(d, d);
    for (int i = 1; i < k; ++i) p(i, i) = 1.0;
    return p;
}

LineBuildResult line_build(const NetOracle& oracle, double r, double eps, int half_count,
                           double eta) {
    const int d = oracle.dim();
    if (d < 2) throw std::invalid_argument("line_build: dimension must be >= 2");
    if (!(r > 0.0) || !(eta > 0.0) || !(eps > 0.0) || half_count < 0)
        throw std::invalid_argument("line_build: parameters must be positive");

    LineBuildResult res;
    std::vector<Vec> achieved;

    for (int j = -half_count; j <= half_count; ++j) {
        // Flatten until the off-axis projection has diameter eta, then nudge
        // the projection off zero so the shear is well defined.
        double t = std::log(2.0 * r / eta);
        Vec center = Vec::Zero(d);
        center[0] = j * eps;
        center[1] = 0.5 * eta;
        UnimodularAffine flow = diagonal_flow(d, t);
        UnimodularAffine placement = UnimodularAffine::pure_translation(center).compose(flow);
        Ellipsoid probe = placement.apply(Ellipsoid::centered_ball(d, r));

        std::optional<Vec> p = oracle.query(probe);
        if (p) {
            Vec off = *p;
            off[0] = 0.0;
            if (off.norm() < 1e-12 * eta) {
                // Degenerate draw exactly on the axis: retry with a smaller probe.
                t = std::log(4.0 * r / eta);
                flow = diagonal_flow(d, t);
                placement = UnimodularAffine::pure_translation(center).compose(flow);
                probe = placement.apply(Ellipsoid::centered_ball(d, r));
                p = oracle.query(probe);
            }
        }
        if (!p) {
            res.failed_targets.push_back(j);
            continue;
        }

        Vec off = p->tail(d - 1);
        const double off_norm2 = off.squaredNorm();
        if (off_norm2 <= 0.0) {
            res.failed_targets.push_back(j);
            continue;
        }
        Vec a = ((j * eps - (*p)[0]) / off_norm2) * off;
        UnimodularAffine u = shear(d, a);
        Vec moved = u.apply(*p);

        Vec target = Vec::Zero(d);
        target[0] = j * eps;
        const double err = (moved - target).norm();
        res.elements.emplace_back(placement, u);
        res.target_errors.push_back(err);
        res.worst_error = std::max(res.worst_error, err);
        achieved.push_back(std::move(moved));
    }

    const double window = half_count * eps + 2.0 * eta + 1.0;
    res.set = WindowedSet::make(std::move(achieved), window);
    return res;
}

namespace {

DanzerCheckResult danzer_check_impl(const std::function<bool(const Ellipsoid&)>& hits, int d,
                                    double window, double r, long long trials,
                                    std::uint64_t seed, const DanzerCheckOptions& opts) {
    const double reach_cap = r * std::exp(2.0 * opts.log_eig_bound * (d - 1) / d);
    if (!(window > reach_cap))
        throw std::invalid_argument("danzer_param_check: window too small for the requested probes");

    Rng rng(sub_seed(seed, "danzer_check"));
    DanzerCheckResult res;
    for (long long trial = 0; trial < trials; ++trial) {
        ++res.trials_run;

        // Rotation from the QR factorization of a Gaussian matrix, sign-fixed.
        Mat g(d, d);
        for (int i = 0; i < d; ++i)
            for (int j = 0; j < d; ++j) g(i, j) = rng.gaussian();
        Eigen::HouseholderQR<Mat> qr(g);
        Mat q = qr.householderQ();
        Mat rm = qr.matrixQR().triangularView<Eigen::Upper>();
        for (int i = 0; i < d; ++i)
            if (rm(i, i) < 0.0) q.col(i) *= -1.0;
        if (q.determinant() < 0.0) q.col(d - 1) *= -1.0;

        // Volume-preserving diagonal with bounded log-eigenvalues.
        Vec e(d);
        for (int i = 0; i < d; ++i)
            e[i] = rng.uniform(-opts.log_eig_bound, opts.log_eig_bound);
        e.array() -= e.mean();

        Mat shape = q * e.array().exp().matrix().asDiagonal();
        shape *= r;
        const double reach = r * std::exp(e.maxCoeff());

        Vec dir(d);
        double norm = 0.0;
        while (norm == 0.0) {
            for (int i = 0; i < d; ++i) dir[i] = rng.gaussian();
            norm = dir.norm();
        }
        const double radius = (window - reach) * std::pow(rng.u01(), 1.0 / d);
        Ellipsoid probe;
        probe.center = (radius / norm) * dir;
        probe.shape = std::move(shape);

        if (!hits(probe)) {
            res.pass = false;
            res.counterexample = probe;
            return res;
        }
    }
    return res;
}

} // namespace

DanzerCheckResult danzer_param_check(const NetOracle& oracle, double r, long long trials,
                                     std::uint64_t seed, DanzerCheckOptions opts) {
    double window;
    if (oracle.window())
        window = *oracle.window();
    else if (opts.probe_window)
        window = *opts.probe_window;
    else
        throw std::invalid_argument(
            "danzer_param_check: oracle declares no window; set probe_window");
    auto hits = [&](const Ellipsoid& probe) { return oracle.query(probe).has_value(); };
    return danzer_check_impl(hits, oracle.dim(), window, r, trials, seed, opts);
}

DanzerCheckResult danzer_param_check(const WindowedSet& set, double r, long long trials,
                                     std::uint64_t seed, DanzerCheckOptions opts) {
    const int d = set.points.empty() ? 2 : set.dim();
    auto hits = [&](const Ellipsoid& probe) {
        Eigen::FullPivLU<Mat> lu(probe.shape);
        for (const Vec& p : set.points)
            if (lu.solve(p - probe.center).norm() <= 1.0 + 1e-12) return true;
        return false;
    };
    return danzer_check_impl(hits, d, set.window_radius, r, trials, seed, opts);
}

} // namespace danzer
