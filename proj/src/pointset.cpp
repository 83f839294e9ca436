#include "danzer/pointset.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
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

constexpr long long kNodeCap = 4000000000LL;
constexpr double kRangeCap = 4e15;

/// Enumerates integer cells z for which some displacement u in [-rho-box]
/// keeps ||R(z - z0) + slack|| within the unit ball, R upper triangular with
/// positive diagonal. Emits a superset of the exact answer; callers re-test.
struct CellEnumerator {
    const Mat& R;
    const Vec& z0;
    const Vec& rho; // per-row interval widening from per-cell displacement
    double guard;
    int d;
    std::vector<long long> z;
    Vec t;
    long long nodes = 0;

    CellEnumerator(const Mat& R_, const Vec& z0_, const Vec& rho_, double guard_)
        : R(R_), z0(z0_), rho(rho_), guard(guard_), d(static_cast<int>(z0_.size())),
          z(static_cast<size_t>(d)), t(Vec::Zero(d)) {}

    template <typename Visit>
    void run(Visit& visit) {
        descend(d - 1, 0.0, visit);
    }

    template <typename Visit>
    void descend(int i, double bound_used, Visit& visit) {
        double ci = 0.0;
        for (int j = i + 1; j < d; ++j) ci += R(i, j) * t[j];
        const double slack = 1.0 + guard - bound_used;
        if (slack < 0.0) return;
        const double rad = std::sqrt(slack) + rho[i];
        const double flo = z0[i] + (-rad - ci) / R(i, i);
        const double fhi = z0[i] + (rad - ci) / R(i, i);
        if (!std::isfinite(flo) || !std::isfinite(fhi) || std::abs(flo) > kRangeCap ||
            std::abs(fhi) > kRangeCap)
            throw std::runtime_error("point-set enumeration: cell range exceeds integer capacity");
        const long long lo = static_cast<long long>(std::ceil(flo - 1e-9));
        const long long hi = static_cast<long long>(std::floor(fhi + 1e-9));
        if ((nodes += (hi >= lo ? hi - lo + 1 : 0)) > kNodeCap)
            throw std::runtime_error("point-set enumeration: node budget exceeded");
        for (long long zi = lo; zi <= hi; ++zi) {
            t[i] = static_cast<double>(zi) - z0[i];
            z[static_cast<size_t>(i)] = zi;
            if (i == 0) {
                visit(z);
            } else {
                const double mi = R(i, i) * t[i] + ci;
                const double over = std::abs(mi) - rho[i];
                descend(i - 1, bound_used + (over > 0.0 ? over * over : 0.0), visit);
            }
        }
    }
};

Mat positive_diagonal_r(const Eigen::HouseholderQR<Mat>& qr, int d) {
    Mat R = qr.matrixQR().topLeftCorner(d, d).triangularView<Eigen::Upper>();
    for (int i = 0; i < d; ++i)
        if (R(i, i) < 0.0) R.row(i) *= -1.0;
    return R;
}

} // namespace

AlignedBox::AlignedBox(Vec lo_, Vec hi_) : lo(std::move(lo_)), hi(std::move(hi_)) {
    if (lo.size() != hi.size()) throw std::invalid_argument("AlignedBox: corner dimensions differ");
    if (((hi - lo).array() <= 0.0).any())
        throw std::invalid_argument("AlignedBox: min corner must be strictly below max corner");
}

double AlignedBox::volume() const {
    return (hi - lo).prod();
}

bool AlignedBox::contains(const Vec& x, double tol) const {
    for (int i = 0; i < dim(); ++i) {
        const double slack = tol * (1.0 + std::max(std::abs(lo[i]), std::abs(hi[i])));
        if (x[i] < lo[i] - slack || x[i] > hi[i] + slack) return false;
    }
    return true;
}

double AlignedBox::reach() const {
    return std::sqrt(lo.cwiseAbs2().cwiseMax(hi.cwiseAbs2()).sum());
}

NetOracle NetOracle::lattice(Mat basis, Vec offset, std::optional<double> window) {
    if (basis.rows() != basis.cols() || basis.rows() != offset.size())
        throw std::invalid_argument("lattice: inconsistent dimensions");
    if (std::abs(basis.fullPivLu().determinant()) < 1e-300)
        throw std::invalid_argument("lattice: singular basis rejected");
    NetOracle o;
    o.kind_ = Kind::Lattice;
    o.d_ = static_cast<int>(offset.size());
    o.basis_ = std::move(basis);
    o.offset_ = std::move(offset);
    o.window_ = window;
    return o;
}

NetOracle NetOracle::ring_lattice_z_sqrt2(std::optional<double> window) {
    const double s2 = std::sqrt(2.0);
    Mat basis(2, 2);
    basis << 1.0, s2, 1.0, -s2; // columns (1,1) and (sqrt2,-sqrt2)
    NetOracle o = lattice(std::move(basis), Vec::Zero(2), window);
    o.kind_ = Kind::RingLattice;
    return o;
}

NetOracle NetOracle::jittered_grid(int d, double spacing, double jitter, std::uint64_t seed,
                                   std::optional<double> window) {
    if (d < 1) throw std::invalid_argument("jittered_grid: dimension must be >= 1");
    if (!(spacing > 0.0)) throw std::invalid_argument("jittered_grid: spacing must be positive");
    if (jitter < 0.0 || jitter > 0.5)
        throw std::invalid_argument("jittered_grid: jitter must lie in [0, 1/2]");
    NetOracle o;
    o.kind_ = Kind::JitteredGrid;
    o.d_ = d;
    o.basis_ = spacing * Mat::Identity(d, d);
    o.offset_ = Vec::Constant(d, 0.5 * spacing);
    o.spacing_ = spacing;
    o.jitter_ = jitter;
    o.seed_ = seed;
    o.window_ = window;
    return o;
}

NetOracle NetOracle::poisson(int d, double intensity, double window_radius, std::uint64_t seed) {
    if (d < 1) throw std::invalid_argument("poisson: dimension must be >= 1");
    if (!(intensity > 0.0) || !(window_radius > 0.0))
        throw std::invalid_argument("poisson: intensity and window must be positive");
    const double mean = intensity * unit_ball_volume(d) * std::pow(window_radius, d);
    if (!(mean <= 5e6))
        throw std::invalid_argument("poisson: expected count too large for a stored sample");

    Rng rng(sub_seed(seed, "poisson"));
    // Knuth's method; the mean here is bounded, so work in log space.
    long long n = 0;
    double acc = 0.0;
    while (true) {
        double u = 0.0;
        while (u == 0.0) u = rng.u01();
        acc += -std::log(u);
        if (acc >= mean) break;
        ++n;
    }
    std::vector<Vec> pts;
    pts.reserve(static_cast<size_t>(n));
    for (long long i = 0; i < n; ++i) {
        Vec dir(d);
        double norm = 0.0;
        while (norm == 0.0) {
            for (int k = 0; k < d; ++k) dir[k] = rng.gaussian();
            norm = dir.norm();
        }
        const double r = window_radius * std::pow(rng.u01(), 1.0 / d);
        pts.push_back((r / norm) * dir);
    }
    NetOracle o = explicit_list(std::move(pts), window_radius);
    o.kind_ = Kind::Poisson;
    o.d_ = d;
    o.intensity_ = intensity;
    o.seed_ = seed;
    return o;
}

NetOracle NetOracle::explicit_list(std::vector<Vec> points, std::optional<double> window,
                                   int dim) {
    NetOracle o;
    o.kind_ = Kind::ExplicitList;
    o.d_ = !points.empty() ? static_cast<int>(points[0].size()) : std::max(dim, 0);
    if (dim > 0 && !points.empty() && dim != o.d_)
        throw std::invalid_argument("explicit_list: declared dimension contradicts the points");
    for (const Vec& p : points)
        if (p.size() != o.d_) throw std::invalid_argument("explicit_list: mixed dimensions");
    std::sort(points.begin(), points.end(), lex_less);
    o.points_ = std::move(points);
    o.window_ = window;
    return o;
}

NetOracle NetOracle::explicit_list_from_file(const std::string& path,
                                             std::optional<double> window) {
    std::ifstream in(path);
    if (!in) throw std::invalid_argument("explicit_list: cannot open '" + path + "'");
    std::vector<Vec> pts;
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty() || line[0] == '#') continue;
        std::istringstream ls(line);
        std::vector<double> coords;
        double v;
        while (ls >> v) coords.push_back(v);
        if (coords.empty()) continue;
        if (!pts.empty() && coords.size() != static_cast<size_t>(pts[0].size()))
            throw std::invalid_argument("explicit_list: inconsistent arity at " + path + ":" +
                                        std::to_string(lineno));
        pts.push_back(Eigen::Map<Vec>(coords.data(), static_cast<int>(coords.size())));
    }
    return explicit_list(std::move(pts), window);
}

void NetOracle::check_window(double region_reach) const {
    if (window_ && region_reach > *window_ * (1.0 + 1e-9))
        throw OutOfWindowError("query region leaves the declared oracle window");
}

Vec NetOracle::cell_point(const std::vector<long long>& z) const {
    Vec zv(d_);
    for (int i = 0; i < d_; ++i) zv[i] = static_cast<double>(z[static_cast<size_t>(i)]);
    Vec p = basis_ * zv + offset_;
    if (kind_ == Kind::JitteredGrid && jitter_ > 0.0) {
        std::uint64_t h = seed_;
        for (int i = 0; i < d_; ++i)
            h = mix64(h ^ static_cast<std::uint64_t>(z[static_cast<size_t>(i)]));
        for (int j = 0; j < d_; ++j) {
            const double u01 = static_cast<double>(mix64(h ^ static_cast<std::uint64_t>(j + 1)) >> 11) * 0x1.0p-53;
            p[j] += spacing_ * jitter_ * (2.0 * u01 - 1.0);
        }
    }
    return p;
}

template <typename Visit>
void NetOracle::for_each_in_ellipsoid(const Ellipsoid& region, Visit&& visit) const {
    if (region.dim() != d_) throw std::invalid_argument("query: dimension mismatch");
    check_window(region.reach());

    if (kind_ == Kind::Poisson || kind_ == Kind::ExplicitList) {
        Eigen::FullPivLU<Mat> lu(region.shape);
        for (const Vec& p : points_)
            if (lu.solve(p - region.center).norm() <= 1.0 + 1e-12) visit(p);
        return;
    }

    Eigen::FullPivLU<Mat> lu(region.shape);
    Mat M = lu.solve(basis_);
    Vec w = lu.solve(offset_ - region.center);
    Eigen::HouseholderQR<Mat> qr(M);
    Mat R = positive_diagonal_r(qr, d_);
    Vec z0 = qr.solve(-w);
    Vec rho = Vec::Zero(d_);
    if (kind_ == Kind::JitteredGrid && jitter_ > 0.0)
        for (int i = 0; i < d_; ++i)
            rho[i] = jitter_ * R.row(i).tail(d_ - i).cwiseAbs().sum();

    CellEnumerator en(R, z0, rho, 1e-9);
    auto test = [&](const std::vector<long long>& z) {
        Vec p = cell_point(z);
        if (lu.solve(p - region.center).norm() <= 1.0 + 1e-12) visit(p);
    };
    en.run(test);
}

template <typename Visit>
void NetOracle::for_each_in_box(const AlignedBox& region, Visit&& visit) const {
    if (region.dim() != d_) throw std::invalid_argument("count_in: dimension mismatch");
    check_window(region.reach());

    if (kind_ == Kind::Poisson || kind_ == Kind::ExplicitList) {
        for (const Vec& p : points_)
            if (region.contains(p)) visit(p);
        return;
    }

    // Cell ranges from the box corners mapped to lattice coordinates.
    Eigen::FullPivLU<Mat> lu(basis_);
    Vec zlo = Vec::Constant(d_, std::numeric_limits<double>::infinity());
    Vec zhi = -zlo;
    for (unsigned corner = 0; corner < (1u << d_); ++corner) {
        Vec c(d_);
        for (int i = 0; i < d_; ++i) c[i] = (corner >> i) & 1u ? region.hi[i] : region.lo[i];
        Vec zc = lu.solve(c - offset_);
        zlo = zlo.cwiseMin(zc);
        zhi = zhi.cwiseMax(zc);
    }
    const double widen = kind_ == Kind::JitteredGrid ? jitter_ : 0.0;
    std::vector<long long> lo(static_cast<size_t>(d_)), hi(static_cast<size_t>(d_));
    long long total = 1;
    for (int i = 0; i < d_; ++i) {
        const double flo = zlo[i] - widen, fhi = zhi[i] + widen;
        if (std::abs(flo) > kRangeCap || std::abs(fhi) > kRangeCap)
            throw std::runtime_error("point-set enumeration: cell range exceeds integer capacity");
        lo[static_cast<size_t>(i)] = static_cast<long long>(std::ceil(flo - 1e-9));
        hi[static_cast<size_t>(i)] = static_cast<long long>(std::floor(fhi + 1e-9));
        const long long extent = hi[static_cast<size_t>(i)] - lo[static_cast<size_t>(i)] + 1;
        if (extent <= 0) return;
        if (total > kNodeCap / extent)
            throw std::runtime_error("point-set enumeration: node budget exceeded");
        total *= extent;
    }

    std::vector<long long> z = lo;
    while (true) {
        Vec p = cell_point(z);
        if (region.contains(p)) visit(p);
        int i = 0;
        while (i < d_ && ++z[static_cast<size_t>(i)] > hi[static_cast<size_t>(i)]) {
            z[static_cast<size_t>(i)] = lo[static_cast<size_t>(i)];
            ++i;
        }
        if (i == d_) break;
    }
}

std::optional<Vec> NetOracle::query(const Ellipsoid& region) const {
    std::optional<Vec> best;
    for_each_in_ellipsoid(region, [&](const Vec& p) {
        if (!best || lex_less(p, *best)) best = p;
    });
    return best;
}

long long NetOracle::count_in(const Ellipsoid& region) const {
    long long n = 0;
    for_each_in_ellipsoid(region, [&](const Vec&) { ++n; });
    return n;
}

long long NetOracle::count_in(const AlignedBox& region) const {
    long long n = 0;
    for_each_in_box(region, [&](const Vec&) { ++n; });
    return n;
}

bool NetOracle::member(const Vec& p, double tol) const {
    if (p.size() != d_) return false;
    switch (kind_) {
    case Kind::Lattice:
    case Kind::RingLattice: {
        Vec z = basis_.fullPivLu().solve(p - offset_);
        for (int i = 0; i < d_; ++i)
            if (std::abs(z[i] - std::round(z[i])) > tol) return false;
        return true;
    }
    case Kind::JitteredGrid: {
        std::vector<long long> base(static_cast<size_t>(d_));
        for (int i = 0; i < d_; ++i) base[static_cast<size_t>(i)] = static_cast<long long>(std::floor(p[i] / spacing_));
        std::vector<long long> z(static_cast<size_t>(d_));
        const int combos = 1;
        (void)combos;
        // The displacement keeps each point inside its own cell, so only the
        // cell of p and its immediate lower neighbors can own it.
        for (unsigned mask = 0; mask < (1u << d_); ++mask) {
            for (int i = 0; i < d_; ++i)
                z[static_cast<size_t>(i)] = base[static_cast<size_t>(i)] - (((mask >> i) & 1u) ? 1 : 0);
            if ((cell_point(z) - p).norm() <= tol) return true;
        }
        return false;
    }
    case Kind::Poisson:
    case Kind::ExplicitList:
        for (const Vec& q : points_)
            if ((q - p).norm() <= tol) return true;
        return false;
    }
    return false;
}

NetOracle NetOracle::scaled(double factor) const {
    if (!(factor > 0.0)) throw std::invalid_argument("scaled: factor must be positive");
    std::optional<double> w = window_ ? std::optional<double>(*window_ * factor) : std::nullopt;
    switch (kind_) {
    case Kind::Lattice:
    case Kind::RingLattice:
        return lattice(basis_ * factor, offset_ * factor, w);
    case Kind::JitteredGrid:
        return jittered_grid(d_, spacing_ * factor, jitter_, seed_, w);
    case Kind::Poisson:
    case Kind::ExplicitList: {
        std::vector<Vec> pts = points_;
        for (Vec& p : pts) p *= factor;
        return explicit_list(std::move(pts), w);
    }
    }
    throw std::logic_error("scaled: unknown kind");
}

nlohmann::ordered_json NetOracle::to_json() const {
    nlohmann::ordered_json j;
    switch (kind_) {
    case Kind::Lattice: {
        j["kind"] = "lattice";
        nlohmann::ordered_json rows = nlohmann::ordered_json::array();
        for (int r = 0; r < d_; ++r) {
            nlohmann::ordered_json row = nlohmann::ordered_json::array();
            for (int c = 0; c < d_; ++c) row.push_back(basis_(r, c));
            rows.push_back(row);
        }
        j["basis"] = rows;
        j["offset"] = std::vector<double>(offset_.data(), offset_.data() + d_);
        break;
    }
    case Kind::RingLattice:
        j["kind"] = "ring_lattice";
        break;
    case Kind::JitteredGrid:
        j["kind"] = "jittered_grid";
        j["d"] = d_;
        j["spacing"] = spacing_;
        j["jitter"] = jitter_;
        j["seed"] = seed_;
        break;
    case Kind::Poisson:
        j["kind"] = "poisson";
        j["d"] = d_;
        j["intensity"] = intensity_;
        j["seed"] = seed_;
        break;
    case Kind::ExplicitList: {
        j["kind"] = "explicit_list";
        j["d"] = d_;
        nlohmann::ordered_json pts = nlohmann::ordered_json::array();
        for (const Vec& p : points_)
            pts.push_back(std::vector<double>(p.data(), p.data() + p.size()));
        j["points"] = pts;
        break;
    }
    }
    if (window_)
        j["window"] = *window_;
    return j;
}

NetOracle NetOracle::from_json(const nlohmann::json& j) {
    if (!j.contains("kind"))
        throw std::invalid_argument("net config: missing field 'kind'");
    const std::string kind = j.at("kind").get<std::string>();
    std::optional<double> window;
    if (j.contains("window") && !j.at("window").is_null())
        window = j.at("window").get<double>();

    auto need = [&](const char* field) -> const nlohmann::json& {
        if (!j.contains(field))
            throw std::invalid_argument(std::string("net config: missing field '") + field +
                                        "' for kind '" + kind + "'");
        return j.at(field);
    };

    if (kind == "lattice") {
        const auto& rows = need("basis");
        const int d = static_cast<int>(rows.size());
        Mat basis(d, d);
        for (int r = 0; r < d; ++r)
            for (int c = 0; c < d; ++c) basis(r, c) = rows.at(r).at(c).get<double>();
        const auto off = need("offset").get<std::vector<double>>();
        if (static_cast<int>(off.size()) != d)
            throw std::invalid_argument("net config: field 'offset' has wrong arity");
        return lattice(basis, Eigen::Map<const Vec>(off.data(), d), window);
    }
    if (kind == "ring_lattice") return ring_lattice_z_sqrt2(window);
    if (kind == "jittered_grid")
        return jittered_grid(need("d").get<int>(), need("spacing").get<double>(),
                             need("jitter").get<double>(), need("seed").get<std::uint64_t>(),
                             window);
    if (kind == "poisson")
        return poisson(need("d").get<int>(), need("intensity").get<double>(),
                       need("window").get<double>(), need("seed").get<std::uint64_t>());
    if (kind == "explicit_list") {
        if (j.contains("path")) return explicit_list_from_file(j.at("path").get<std::string>(), window);
        std::vector<Vec> pts;
        for (const auto& row : need("points")) {
            const auto coords = row.get<std::vector<double>>();
            pts.push_back(Eigen::Map<const Vec>(coords.data(), static_cast<int>(coords.size())));
        }
        const int dim = j.contains("d") ? j.at("d").get<int>() : -1;
        return explicit_list(std::move(pts), window, dim);
    }
    throw std::invalid_argument("net config: unknown kind '" + kind + "'");
}

} // namespace danzer
