#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "danzer/geometry.hpp"
#include "danzer/pointset.hpp"

namespace danzer {

/// Finite stand-in for a closed subset of R^d: a point list faithful inside
/// the ball of the window radius. The empty set is represented explicitly.
struct WindowedSet {
    std::vector<Vec> points; ///< kept lex-sorted, deduplicated at 1e-12
    double window_radius = 0.0;
    bool is_empty_set = false;

    int dim() const { return points.empty() ? 0 : static_cast<int>(points[0].size()); }

    /// Clips to the window and deduplicates.
    static WindowedSet make(std::vector<Vec> pts, double window_radius);
    static WindowedSet empty_set(double window_radius);

    /// Text form: a "window <radius>" header, then one point per line
    /// (the explicit-list point format). The empty set writes "empty".
    std::string serialize() const;
    static WindowedSet deserialize(const std::string& text);
};

/// Set distance: the infimum over eps in (0,1] such that each set's points
/// inside the ball of radius 1/eps lie in the closed eps-neighborhood of the
/// other, with 1 as a cap. Computed by bisection (absolute tolerance below
/// 1e-9). Identical point lists give exactly 0. Throws
/// WindowInsufficiencyError when the computed distance would require looking
/// beyond either window.
double cf_distance(const WindowedSet& a, const WindowedSet& b);

/// Pointwise image of the set; the window shrinks to the largest radius on
/// which the image is still faithful.
WindowedSet act(const UnimodularAffine& g, const WindowedSet& set);

/// Row-one shear fixing the x1-axis: x -> (x_1 + a . (x_2..x_d), x_2, .., x_d).
UnimodularAffine shear(int d, const Vec& a);

/// diag(e^{(d-1)t}, e^{-t}, ..., e^{-t}): expands the x1-axis, contracts the rest.
UnimodularAffine diagonal_flow(int d, double t);

/// Orthogonal projection onto span(e_2, ..., e_k) as a d x d matrix.
Mat axis_projection(int d, int k);

struct LineBuildResult {
    /// Per achieved target: the probe placement map and the shear applied.
    std::vector<std::pair<UnimodularAffine, UnimodularAffine>> elements;
    WindowedSet set;                  ///< the sheared points, one per achieved target
    std::vector<double> target_errors;///< distance to (j*eps, 0, ..., 0) per achieved target
    std::vector<int> failed_targets;  ///< targets whose probe came back empty
    double worst_error = 0.0;
};

/// Finite line-building procedure: for each target j in {-N..N}, flatten a
/// ball of radius r with the diagonal flow until its projection away from the
/// x1-axis has diameter below eta, translate it near (j*eps, 0, ...), query
/// the oracle inside it, and shear the found point onto x1 = j*eps. Every
/// achieved target ends within eta of its goal.
LineBuildResult line_build(const NetOracle& oracle, double r, double eps, int half_count,
                           double eta);

struct DanzerCheckResult {
    bool pass = true;
    long long trials_run = 0;
    std::optional<Ellipsoid> counterexample; ///< first probe found empty
};

struct DanzerCheckOptions {
    double log_eig_bound = 3.0;  ///< diagonal part has log-eigenvalues centered from [-L, L]
    std::optional<double> probe_window; ///< required when the oracle declares no window
};

/// Monte Carlo check that the set meets every sampled affine image of the
/// closed ball of radius r: random rotation, random volume-preserving
/// diagonal, random translation inside the window.
DanzerCheckResult danzer_param_check(const NetOracle& oracle, double r, long long trials,
                                     std::uint64_t seed, DanzerCheckOptions opts = {});
DanzerCheckResult danzer_param_check(const WindowedSet& set, double r, long long trials,
                                     std::uint64_t seed, DanzerCheckOptions opts = {});

} // namespace danzer
