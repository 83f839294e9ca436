#pragma once

#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "danzer/geometry.hpp"
#include "danzer/pointset.hpp"

namespace danzer {

/// A positive real carried as its base-2 logarithm, for quantities whose
/// plain value can overflow or underflow a double.
struct Log2Value {
    double log2 = 0.0;
    double value() const;
};

/// The shrink schedule eps_1 < ... < eps_n driving grow_witness:
/// eps_1^{-1} = 4^{(d/(d-1))^{n-1}}, eps_k = eps_{k-1}^{1-1/d}, so that eps_n
/// is exactly 1/4. Everything is computed in log space; the plain eps values
/// are clamped floats (at d=2, eps_1 is denormal by n = 10 and zero beyond).
struct Schedule {
    int d = 0;
    int n = 0;
    std::vector<double> log2_eps; ///< log2(eps_k), k = 1..n at index k-1
    std::vector<double> eps;      ///< exp2(log2_eps), may underflow to 0
    std::vector<double> m;        ///< m_k = d(1 - (1-1/d)^k)
};

/// Throws ScheduleRangeError once (d/(d-1))^{n-1} no longer fits the exactly
/// representable range (n > 40 for d = 2).
Schedule make_schedule(int d, int n);

/// C_{d,s} * 4^{d^n/(d-1)^{n-1}} with C_{d,s} = 2(s/beta_d)^{1/d}, the
/// diameter of a ball of volume s: the guaranteed diameter cap for an
/// n-point witness of volume s.
Log2Value diameter_bound(int d, double s, int n);

/// diameter_bound at s = 1: 2 beta_d^{-1/d} 4^{d^n/(d-1)^{n-1}}.
Log2Value alpha_bound(int d, int n);

struct WitnessStep {
    int k = 0;
    double eps_k = 0.0;      ///< scheduled: eps_k; chained: radius of the normalized ball
    double log2_eps_k = 0.0;
    Vec point;               ///< chosen point, original coordinates
    Vec point_frame;         ///< its image in the normalized frame at selection time
    UnimodularAffine step_map;
    Ellipsoid probe_region;  ///< the region queried, original coordinates
    int attempts = 1;        ///< probe directions consumed at this step
    double acc_inv_opnorm_log2 = 0.0; ///< log2 ||accumulated^{-1}|| after the step
    double containment_residual = 0.0; ///< max ||frame image|| / eps_k over collected points
};

struct GapCertificate {
    Ellipsoid region; ///< volume-s region certified to contain no set point
    int step = 0;
};

struct WitnessOptions {
    int retry_budget = 16;        ///< extra probe directions tried before conceding a Gap
    double direction_phase = 0.0; ///< offset added to the golden-angle direction sequence
};

enum class WitnessOutcome { Concentration, Gap };

/// Full record of a witness-growing run. `collected` and `result` live in the
/// coordinates of the input oracle; the per-step maps act on the internally
/// rescaled frame in which s is the volume of a ball of diameter 1/2.
struct WitnessTrace {
    std::string mode;  ///< "scheduled" or "chained"
    int d = 0;
    int n_target = 0;
    double s = 0.0;
    double prescale = 1.0; ///< lambda with frame = lambda * original
    Schedule schedule;                ///< scheduled mode
    std::vector<double> chain_log2;   ///< chained mode: log2 volume thresholds v_1..v_n
    double chain_eps = 0.0;           ///< chained mode: target volume in the normalized frame
    std::vector<WitnessStep> steps;
    UnimodularAffine accumulated;     ///< final frame map (linear in scheduled mode)
    WitnessOutcome outcome = WitnessOutcome::Gap;
    std::optional<Ellipsoid> result;  ///< K, original coordinates
    std::vector<Vec> collected;       ///< points of the set inside K, original coordinates
    std::optional<GapCertificate> gap;
    /// Volumes are tracked in log space through the construction scalars:
    /// the per-step maps are volume preserving by construction, and the shape
    /// matrix alone cannot pin the volume better than (aspect ratio) * eps
    /// once the maps get stiff.
    double result_log2_volume = 0.0;
    double gap_log2_volume = 0.0;
    double result_log2_diameter = 0.0;

    bool concentration() const { return outcome == WitnessOutcome::Concentration; }
    nlohmann::ordered_json to_json() const;
};

/// Fixed-schedule witness growth: returns either a convex set K of volume s
/// containing the origin and at least n points of the oracle's set, with
/// diam(K) <= diameter_bound(d, s, n), or a Gap certificate of volume exactly
/// s that the set misses. Each step probes a ball of diameter 1/2 disjoint
/// from the current concentration ball, covers it together with that ball by
/// a stretched ellipsoid, and renormalizes the ellipsoid to a ball.
WitnessTrace grow_witness(const NetOracle& oracle, double s, int n, WitnessOptions opts = {});

/// Volume-chained variant realizing the same guarantee by induction on a
/// shrinking volume budget: maintains an ellipsoid with >= k points whose
/// volume stays below a chain of thresholds ending at eps. eps is measured in
/// the normalized frame and must satisfy eps < beta_d / 2^{d-1}.
WitnessTrace grow_witness_chained(const NetOracle& oracle, double s, double eps, int n,
                                  WitnessOptions opts = {});

struct TraceCheck {
    bool ok = true;
    long long recount = 0; ///< independent count_in over the result region
    std::vector<std::string> failures;
};

/// Re-verifies a trace against the oracle without trusting its bookkeeping:
/// membership of the collected points, the recount, volume, diameter bound
/// and pairwise distinctness.
TraceCheck verify_trace(const WitnessTrace& trace, const NetOracle& oracle);

/// The level n selected by bracketing eps^{-1/d}/2 between alpha_{d,n} and
/// alpha_{d,n+1}; n = 0 when even the first bracket is out of reach of the
/// net parameter. Throws ScheduleRangeError if no n >= 0 exists.
int select_stress_level(int d, double eps);

struct StressResult {
    double eps = 0.0;
    int n_theory = 0; ///< level guaranteed by the selection rule
    int n_run = 0;    ///< max(1, n_theory), the count actually grown
    WitnessTrace trace;               ///< run on the dilated net
    std::optional<Ellipsoid> region_back; ///< result or gap region mapped into [-1/2,1/2]^d
    std::vector<Vec> points_back;
    double region_log2_volume = 0.0;
    bool concentration = false;
};

/// Stress test for an eps-net on [-1/2,1/2]^d: dilates the net by eps^{-1/d},
/// grows a witness at volume 1, and maps the outcome back to a convex set of
/// volume eps inside the cube containing at least n_run net points (or a
/// pulled-back gap certificate).
StressResult net_stress(const NetOracle& net, double eps, WitnessOptions opts = {});

} // namespace danzer
