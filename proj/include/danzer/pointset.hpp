#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "danzer/geometry.hpp"

namespace danzer {

/// Closed axis-parallel box [lo_1,hi_1] x ... x [lo_d,hi_d].
struct AlignedBox {
    Vec lo;
    Vec hi;

    AlignedBox() = default;
    AlignedBox(Vec lo_, Vec hi_);

    int dim() const { return static_cast<int>(lo.size()); }
    double volume() const;
    bool contains(const Vec& x, double tol = 1e-12) const;
    double reach() const; ///< radius of smallest origin-centered ball containing the box
};

/// A point set presented as a region oracle. Lattice-backed kinds (including
/// the jittered grid) are procedurally infinite: queries enumerate only the
/// cells near the query region, so windows of astronomical edge length cost
/// nothing. Oracles are immutable after construction and deterministic in
/// (parameters, seed).
class NetOracle {
public:
    enum class Kind { Lattice, RingLattice, JitteredGrid, Poisson, ExplicitList };

    static NetOracle lattice(Mat basis, Vec offset,
                             std::optional<double> window = std::nullopt);

    /// The planar image of Z[sqrt(2)] under both real embeddings:
    /// {(a + b*sqrt(2), a - b*sqrt(2)) : a, b integers}.
    static NetOracle ring_lattice_z_sqrt2(std::optional<double> window = std::nullopt);

    /// One point per cell of the spacing-grid, displaced from the cell center
    /// by at most jitter*spacing per coordinate; the displacement comes from a
    /// mix64 hash of (cell coordinates, axis, seed).
    static NetOracle jittered_grid(int d, double spacing, double jitter, std::uint64_t seed,
                                   std::optional<double> window = std::nullopt);

    /// Homogeneous Poisson sample on the ball of the given radius, drawn once
    /// at construction. The window is mandatory for this kind.
    static NetOracle poisson(int d, double intensity, double window_radius, std::uint64_t seed);

    /// dim is inferred from the points; pass it explicitly to represent an
    /// empty set of a definite dimension.
    static NetOracle explicit_list(std::vector<Vec> points,
                                   std::optional<double> window = std::nullopt, int dim = -1);

    /// Reads one point per line, whitespace-separated decimal coordinates.
    /// Blank lines and lines starting with '#' are skipped.
    static NetOracle explicit_list_from_file(const std::string& path,
                                             std::optional<double> window = std::nullopt);

    Kind kind() const { return kind_; }
    int dim() const { return d_; }
    std::optional<double> window() const { return window_; }

    /// A point of the set inside the closed ellipsoid, or nullopt certifying
    /// that no point of the set lies there. Ties break to the
    /// lexicographically smallest point. Throws OutOfWindowError when the
    /// region is not covered by a declared window.
    std::optional<Vec> query(const Ellipsoid& region) const;

    /// Exact number of set points in the closed region.
    long long count_in(const Ellipsoid& region) const;
    long long count_in(const AlignedBox& region) const;

    /// Kind-specific membership predicate; every query answer passes it.
    bool member(const Vec& p, double tol = 1e-9) const;

    /// The same point set dilated by the given positive factor.
    NetOracle scaled(double factor) const;

    nlohmann::ordered_json to_json() const;
    static NetOracle from_json(const nlohmann::json& j);

private:
    NetOracle() = default;

    void check_window(double region_reach) const;
    template <typename Visit>
    void for_each_in_ellipsoid(const Ellipsoid& region, Visit&& visit) const;
    template <typename Visit>
    void for_each_in_box(const AlignedBox& region, Visit&& visit) const;
    Vec cell_point(const std::vector<long long>& z) const;

    Kind kind_ = Kind::ExplicitList;
    int d_ = 0;
    Mat basis_;   // lattice-backed kinds
    Vec offset_;
    double spacing_ = 0.0; // jittered grid
    double jitter_ = 0.0;
    double intensity_ = 0.0; // poisson
    std::uint64_t seed_ = 0;
    std::vector<Vec> points_; // poisson / explicit list, kept lex-sorted
    std::optional<double> window_;
};

} // namespace danzer
