#pragma once

#include <Eigen/Dense>

#include <vector>

#include "danzer/errors.hpp"

namespace danzer {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;

/// Volume of the unit ball in R^d.
double unit_ball_volume(int d);

/// log2 of the unit ball volume; usable where the volume itself would
/// under/overflow a double.
double log2_unit_ball_volume(int d);

/// Closed ellipsoid {center + shape*u : ||u|| <= 1} with nonsingular shape.
/// Balls, the covering ellipsoids produced by stretch_cover, witness sets and
/// gap certificates are all values of this one type.
struct Ellipsoid {
    Vec center;
    Mat shape;

    int dim() const { return static_cast<int>(center.size()); }

    /// beta_d * |det(shape)|.
    double volume() const;
    double log2_volume() const;

    /// Closed membership: ||shape^{-1}(x - center)|| <= 1 + tol.
    bool contains(const Vec& x, double tol = 1e-12) const;

    /// Radius of the smallest origin-centered ball containing the ellipsoid.
    double reach() const;

    static Ellipsoid ball(const Vec& center, double radius);
    static Ellipsoid centered_ball(int d, double radius);
};

/// Volume- and orientation-preserving affine map x -> linear*x + translation.
/// The linear part is kept within 1e-12 of determinant one; compositions
/// renormalize by det^(1/d) when numerical drift exceeds that.
struct UnimodularAffine {
    Mat linear;
    Vec translation;

    UnimodularAffine() = default;
    UnimodularAffine(Mat lin, Vec trans);

    static UnimodularAffine identity(int d);
    static UnimodularAffine pure_translation(Vec v);

    int dim() const { return static_cast<int>(translation.size()); }

    Vec apply(const Vec& x) const;
    Ellipsoid apply(const Ellipsoid& e) const;

    /// Composition acting as (*this) after other.
    UnimodularAffine compose(const UnimodularAffine& other) const;
    UnimodularAffine inverse() const;
};

/// Largest singular value.
double operator_norm(const Mat& m);
double operator_norm(const UnimodularAffine& g);

/// Centered ellipsoid with semi-axis ||x|| along x/||x|| and semi-axes r on
/// the orthogonal complement. Contains B_r and x; its volume is exactly
/// beta_d * r^{d-1} * ||x||. Requires ||x|| > r > 0.
Ellipsoid stretch_cover(double r, const Vec& x);

struct BallForm {
    UnimodularAffine map;         ///< g with g.E a centered ball
    UnimodularAffine inverse_map; ///< g^{-1}, assembled from the same factors
    double radius;                ///< (volume(E)/beta_d)^{1/d}
};

/// Volume-preserving map sending an ellipsoid to the centered ball of equal
/// volume, built from the polar factorization of the shape matrix. The
/// inverse comes from the same factorization rather than from inverting the
/// assembled matrix, so it stays accurate for very anisotropic shapes.
BallForm normalize_to_ball(const Ellipsoid& e);

/// Orthogonal matrix with determinant +1 mapping e_1 to the given unit
/// vector: a Householder reflection with a sign fix on the last column.
Mat rotation_to_axis(const Vec& unit_direction);

/// Minimum-volume enclosing ellipsoid of a finite point set, via a
/// multiplicative-weights iteration with away steps on the lifted moment
/// matrix. All input points end up inside the returned ellipsoid; its volume
/// exceeds the optimum by at most a (1+tol) factor. Throws
/// DegenerateInputError for affinely dependent input and ConvergenceError if
/// the iteration cap (1e5) is reached before the tolerance.
Ellipsoid mvee(const std::vector<Vec>& points, double tol = 1e-7);

} // namespace danzer
