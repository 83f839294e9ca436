#include "danzer/geometry.hpp"

#include <algorithm>
#include <cmath>

namespace danzer {

namespace {

constexpr double kPi = 3.14159265358979323846264338327950288;

double det_abs(const Mat& m) {
    return std::abs(m.fullPivLu().determinant());
}

/// Assembles an element without the constructor's drift gate. Composition
/// chains of stiff maps accumulate det drift of order (aspect * eps); the
/// measured determinant is only used for renormalization while it is still
/// a trustworthy measurement.
UnimodularAffine unchecked_affine(Mat lin, Vec trans) {
    const int d = static_cast<int>(lin.rows());
    const double det = lin.determinant();
    if (std::isfinite(det) && det > 0.0 && std::abs(det - 1.0) > 1e-12 &&
        std::abs(det - 1.0) < 0.1)
        lin *= std::pow(det, -1.0 / d);
    UnimodularAffine g;
    g.linear = std::move(lin);
    g.translation = std::move(trans);
    return g;
}

} // namespace

double unit_ball_volume(int d) {
    if (d < 1) throw std::invalid_argument("unit_ball_volume: dimension must be >= 1");
    return std::pow(kPi, 0.5 * d) / std::tgamma(0.5 * d + 1.0);
}

double log2_unit_ball_volume(int d) {
    if (d < 1) throw std::invalid_argument("log2_unit_ball_volume: dimension must be >= 1");
    return (0.5 * d * std::log(kPi) - std::lgamma(0.5 * d + 1.0)) / std::log(2.0);
}

double Ellipsoid::volume() const {
    return unit_ball_volume(dim()) * det_abs(shape);
}

double Ellipsoid::log2_volume() const {
    Eigen::JacobiSVD<Mat> svd(shape);
    double log2_det = 0.0;
    for (int i = 0; i < dim(); ++i) log2_det += std::log2(svd.singularValues()[i]);
    return log2_unit_ball_volume(dim()) + log2_det;
}

bool Ellipsoid::contains(const Vec& x, double tol) const {
    Vec u = shape.fullPivLu().solve(x - center);
    return u.norm() <= 1.0 + tol;
}

double Ellipsoid::reach() const {
    return center.norm() + operator_norm(shape);
}

Ellipsoid Ellipsoid::ball(const Vec& c, double radius) {
    if (!(radius > 0.0)) throw std::invalid_argument("Ellipsoid::ball: radius must be positive");
    Ellipsoid e;
    e.center = c;
    e.shape = radius * Mat::Identity(c.size(), c.size());
    return e;
}

Ellipsoid Ellipsoid::centered_ball(int d, double radius) {
    return ball(Vec::Zero(d), radius);
}

UnimodularAffine::UnimodularAffine(Mat lin, Vec trans)
    : linear(std::move(lin)), translation(std::move(trans)) {
    if (linear.rows() != linear.cols() || linear.rows() != translation.size())
        throw std::invalid_argument("UnimodularAffine: inconsistent dimensions");
    const int d = static_cast<int>(linear.rows());
    double det = linear.fullPivLu().determinant();
    if (!std::isfinite(det) || det <= 0.0)
        throw std::invalid_argument("UnimodularAffine: linear part must have positive determinant");
    // Ill-conditioned products drift by roughly kappa * machine epsilon, so
    // the rejection gate is loose; anything beyond it is a caller bug, not
    // roundoff. Renormalization below keeps the drift from compounding.
    if (std::abs(det - 1.0) > 1e-3)
        throw std::invalid_argument("UnimodularAffine: linear part is not volume preserving");
    if (std::abs(det - 1.0) > 1e-12)
        linear *= std::pow(det, -1.0 / d);
}

UnimodularAffine UnimodularAffine::identity(int d) {
    return {Mat::Identity(d, d), Vec::Zero(d)};
}

UnimodularAffine UnimodularAffine::pure_translation(Vec v) {
    const int d = static_cast<int>(v.size());
    return {Mat::Identity(d, d), std::move(v)};
}

Vec UnimodularAffine::apply(const Vec& x) const {
    return linear * x + translation;
}

Ellipsoid UnimodularAffine::apply(const Ellipsoid& e) const {
    Ellipsoid out;
    out.center = apply(e.center);
    out.shape = linear * e.shape;
    return out;
}

UnimodularAffine UnimodularAffine::compose(const UnimodularAffine& other) const {
    return unchecked_affine(linear * other.linear, linear * other.translation + translation);
}

UnimodularAffine UnimodularAffine::inverse() const {
    // Adjugate route: elimination-based inversion collapses once the
    // anisotropy approaches 1/eps_machine, while cofactors only ever multiply
    // entries, and the determinant of a near-unimodular element is near one.
    const int d = dim();
    Mat adj(d, d);
    if (d == 1) {
        adj(0, 0) = 1.0;
    } else {
        Mat minor(d - 1, d - 1);
        for (int r = 0; r < d; ++r) {
            for (int c = 0; c < d; ++c) {
                for (int i = 0, mi = 0; i < d; ++i) {
                    if (i == r) continue;
                    for (int j = 0, mj = 0; j < d; ++j) {
                        if (j == c) continue;
                        minor(mi, mj) = linear(i, j);
                        ++mj;
                    }
                    ++mi;
                }
                adj(c, r) = ((r + c) % 2 ? -1.0 : 1.0) *
                            (d == 2 ? minor(0, 0) : minor.determinant());
            }
        }
    }
    Mat inv = adj / linear.determinant();
    Vec trans = -(inv * translation);
    return unchecked_affine(std::move(inv), std::move(trans));
}

double operator_norm(const Mat& m) {
    return Eigen::JacobiSVD<Mat>(m).singularValues()[0];
}

double operator_norm(const UnimodularAffine& g) {
    return operator_norm(g.linear);
}

Mat rotation_to_axis(const Vec& v) {
    const int d = static_cast<int>(v.size());
    Mat theta = Mat::Identity(d, d);
    Vec w = Vec::Unit(d, 0) - v;
    double wn = w.norm();
    if (wn > 1e-12) {
        w /= wn;
        theta -= 2.0 * w * w.transpose(); // reflection, det -1
        if (d > 1)
            theta.col(d - 1) *= -1.0; // restore det +1, leaves column 0 alone
    }
    return theta;
}

Ellipsoid stretch_cover(double r, const Vec& x) {
    if (!(r > 0.0)) throw std::invalid_argument("stretch_cover: r must be positive");
    const double t = x.norm();
    if (!(t > r)) throw std::invalid_argument("stretch_cover: point already inside the ball (||x|| <= r)");
    const int d = static_cast<int>(x.size());
    Vec axes = Vec::Constant(d, r);
    axes[0] = t;
    Ellipsoid e;
    e.center = Vec::Zero(d);
    e.shape = rotation_to_axis(x / t) * axes.asDiagonal();
    return e;
}

BallForm normalize_to_ball(const Ellipsoid& e) {
    const int d = e.dim();
    Eigen::JacobiSVD<Mat> svd(e.shape, Eigen::ComputeFullU);
    const Vec& sigma = svd.singularValues();
    if (!(sigma[d - 1] > 1e-14 * sigma[0]) || !std::isfinite(sigma[0]))
        throw DegenerateInputError("normalize_to_ball: singular shape matrix");

    double log_r = 0.0;
    for (int i = 0; i < d; ++i) log_r += std::log(sigma[i]);
    const double radius = std::exp(log_r / d);

    Mat lin = svd.matrixU() * (radius * sigma.cwiseInverse()).asDiagonal() *
              svd.matrixU().transpose();
    UnimodularAffine g(std::move(lin), Vec::Zero(d));
    g.translation = -(g.linear * e.center);

    Mat lin_inv = svd.matrixU() * (sigma / radius).asDiagonal() * svd.matrixU().transpose();
    UnimodularAffine g_inv(std::move(lin_inv), Vec::Zero(d));
    g_inv.translation = e.center;

    return {std::move(g), std::move(g_inv), radius};
}

Ellipsoid mvee(const std::vector<Vec>& points, double tol) {
    if (!(tol > 0.0)) throw std::invalid_argument("mvee: tolerance must be positive");
    const auto m = static_cast<int>(points.size());
    if (m == 0) throw DegenerateInputError("mvee: empty point set");
    const int d = static_cast<int>(points[0].size());
    if (m < d + 1) throw DegenerateInputError("mvee: need at least d+1 points");

    Mat P(d, m);
    for (int i = 0; i < m; ++i) {
        if (points[i].size() != d) throw std::invalid_argument("mvee: mixed dimensions");
        P.col(i) = points[i];
    }

    // Affine-dependence check on the centered data.
    Vec mean = P.rowwise().mean();
    Eigen::JacobiSVD<Mat> rank_svd(P.colwise() - mean);
    if (rank_svd.singularValues()[d - 1] <= 1e-10 * rank_svd.singularValues()[0])
        throw DegenerateInputError("mvee: affinely dependent input points");

    Mat Q(d + 1, m);
    Q.topRows(d) = P;
    Q.row(d).setOnes();

    Vec u = Vec::Constant(m, 1.0 / m);
    const double dd = d + 1.0;
    const double delta = std::min(tol, 1e-9);
    constexpr int kIterationCap = 100000;

    bool converged = false;
    double kappa_max = 0.0;
    for (int it = 0; it < kIterationCap; ++it) {
        Mat X = Q * u.asDiagonal() * Q.transpose();
        Eigen::LDLT<Mat> ldlt(X);
        Mat S = ldlt.solve(Q);
        Vec M = (Q.array() * S.array()).colwise().sum();

        int jp = 0, jm = -1;
        double kp = -1.0, km = std::numeric_limits<double>::infinity();
        for (int i = 0; i < m; ++i) {
            if (M[i] > kp) { kp = M[i]; jp = i; }
            if (u[i] > 1e-12 && M[i] < km) { km = M[i]; jm = i; }
        }
        kappa_max = kp;
        if (kp <= dd * (1.0 + delta) && km >= dd * (1.0 - delta)) {
            converged = true;
            break;
        }

        if (kp - dd >= dd - km || jm < 0) {
            double lam = (kp - dd) / (dd * (kp - 1.0));
            u *= (1.0 - lam);
            u[jp] += lam;
        } else {
            double drop = u[jm] / (1.0 - u[jm]);
            double lam = km > 1.0 ? std::min((dd - km) / (dd * (km - 1.0)), drop) : drop;
            u *= (1.0 + lam);
            u[jm] -= lam;
            if (u[jm] < 0.0) u[jm] = 0.0;
            u /= u.sum();
        }
    }
    if (!converged && kappa_max > dd * (1.0 + tol))
        throw ConvergenceError("mvee: iteration cap reached before requested tolerance");

    Vec center = P * u;
    Mat second = P * u.asDiagonal() * P.transpose() - center * center.transpose();
    Eigen::SelfAdjointEigenSolver<Mat> es(static_cast<double>(d) * second);
    if (es.eigenvalues().minCoeff() <= 0.0)
        throw DegenerateInputError("mvee: degenerate moment matrix");
    Mat A = es.operatorSqrt();

    // Inflate so that every input point satisfies closed membership exactly.
    Eigen::FullPivLU<Mat> lu(A);
    double worst = 0.0;
    for (int i = 0; i < m; ++i)
        worst = std::max(worst, lu.solve(P.col(i) - center).norm());
    if (worst > 1.0) A *= worst;

    Ellipsoid e;
    e.center = std::move(center);
    e.shape = std::move(A);
    return e;
}

} // namespace danzer
