// Acceptance suite: every release gate runs here, one line per criterion.
// Each criterion owns a wall-clock budget; exceeding it is a failure like any
// other. The binary exits with the number of failed criteria.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "danzer/chabauty.hpp"
#include "danzer/harness.hpp"
#include "danzer/pointset.hpp"
#include "danzer/rng.hpp"
#include "danzer/witness.hpp"
#include "test_support.hpp"

using namespace danzer;

namespace {

constexpr double kPi = 3.14159265358979323846264338327950288;

Vec vec2(double x, double y) {
    Vec v(2);
    v << x, y;
    return v;
}

struct Outcome {
    std::vector<std::string> failures;
    void require(bool ok, const std::string& what) {
        if (!ok) failures.push_back(what);
    }
};

// Shared between criteria 3 and 4: one end-to-end witness run.
std::optional<WitnessTrace> g_witness_trace;
NetOracle g_witness_grid = NetOracle::jittered_grid(2, 0.05, 0.5, 20240617);

void criterion1_schedule(Outcome& out) {
    for (int d = 2; d <= 4; ++d) {
        for (int n = 1; n <= 10; ++n) {
            Schedule s = make_schedule(d, n);
            out.require(s.eps[static_cast<size_t>(n - 1)] == 0.25,
                        "eps_n not exactly 1/4 at d=" + std::to_string(d) +
                            ", n=" + std::to_string(n));
            const double log_eps1 = s.log2_eps[0];
            for (int k = 1; k <= n; ++k) {
                const double expect = std::pow(1.0 - 1.0 / d, k - 1) * log_eps1;
                out.require(std::abs(s.log2_eps[static_cast<size_t>(k - 1)] - expect) <=
                                1e-12 * std::abs(log_eps1),
                            "log-space power relation violated");
            }
            for (int k = 2; k <= n; ++k) {
                const double expect = (1.0 - 1.0 / d) * s.log2_eps[static_cast<size_t>(k - 2)];
                out.require(std::abs(s.log2_eps[static_cast<size_t>(k - 1)] - expect) <=
                                1e-12 * std::abs(log_eps1),
                            "successive shrink relation violated");
            }
        }
    }
    Schedule s23 = make_schedule(2, 3);
    out.require(s23.eps[0] == 1.0 / 256.0 && s23.eps[1] == 1.0 / 16.0 && s23.eps[2] == 0.25,
                "d=2, n=3 schedule is not [1/256, 1/16, 1/4]");
}

void criterion2_stretch_cover(Outcome& out) {
    Rng rng(92);
    for (int trial = 0; trial < 1000; ++trial) {
        const int d = 2 + static_cast<int>(rng.u01() * 4); // 2..5
        const double r = std::exp(rng.uniform(std::log(1e-3), 0.0));
        const double len = r * (1.0 + std::exp(rng.uniform(std::log(0.01), std::log(10.0))));
        Vec x = len * testsupport::random_unit(rng, d);
        Ellipsoid e = stretch_cover(r, x);
        const double expect = unit_ball_volume(d) * std::pow(r, d - 1) * len;
        out.require(std::abs(e.volume() - expect) <= 1e-12 * expect,
                    "determinant volume mismatch at trial " + std::to_string(trial));
        out.require(e.contains(x, 1e-12), "apex not inside the cover");
        for (int i = 0; i < 10; ++i)
            out.require(e.contains(r * testsupport::random_unit(rng, d), 1e-12),
                        "ball boundary sample left the cover");
    }
}

void criterion3_witness(Outcome& out) {
    const double s = kPi / 16.0;
    WitnessTrace trace = grow_witness(g_witness_grid, s, 4);
    out.require(trace.concentration(), "run did not concentrate");
    if (!trace.concentration()) return;

    TraceCheck chk = verify_trace(trace, g_witness_grid);
    out.require(chk.recount >= 4, "independent recount below 4");
    const double vol = std::exp2(trace.result_log2_volume);
    out.require(std::abs(vol - s) <= 1e-9 * s, "witness volume off target");
    const Log2Value bound = diameter_bound(2, s, 4);
    out.require(trace.result_log2_diameter <= bound.log2 + 1e-9,
                "diameter exceeds C_{2,s} * 4^16 in log space");
    for (const WitnessStep& st : trace.steps)
        out.require(st.containment_residual <= 1.0 + 1e-9,
                    "containment invariant violated at step " + std::to_string(st.k));
    for (const std::string& msg : chk.failures) out.require(false, msg);
    g_witness_trace = std::move(trace);
}

void criterion4_norms(Outcome& out) {
    if (!g_witness_trace) {
        out.require(false, "no witness trace available (criterion 3 failed)");
        return;
    }
    const WitnessTrace& trace = *g_witness_trace;
    const double log2_eps1 = trace.schedule.log2_eps[0];
    for (const WitnessStep& st : trace.steps) {
        const double cap =
            -trace.schedule.m[static_cast<size_t>(st.k - 1)] * log2_eps1 + std::log2(1.0 + 1e-6);
        out.require(st.acc_inv_opnorm_log2 <= cap,
                    "operator norm exceeds eps_1^{-m_k}(1+1e-6) at step " + std::to_string(st.k));
    }
}

void criterion5_loglog(Outcome& out) {
    const std::vector<double> eps_list{1e-2, 1e-4, 1e-8, 1e-16};
    const std::vector<int> expected_theory{0, 1, 2, 3};
    long long prev_count = -1;
    for (size_t i = 0; i < eps_list.size(); ++i) {
        const double eps = eps_list[i];
        const double spacing = 0.05 * std::sqrt(eps);
        NetOracle net = NetOracle::jittered_grid(2, spacing, 0.5,
                                                 sub_seed(20250810, "sweep-" + std::to_string(i)));
        StressResult res = net_stress(net, eps);
        out.require(res.n_theory == expected_theory[i],
                    "selection rule picked an unexpected level at eps=" + std::to_string(eps));
        out.require(res.concentration, "no concentration at eps=" + std::to_string(eps));
        if (!res.concentration) continue;
        const long long achieved = static_cast<long long>(res.trace.collected.size());
        out.require(achieved >= res.n_theory, "achieved count below the selected level");
        out.require(achieved >= prev_count, "achieved counts are not nondecreasing");
        prev_count = achieved;
        const long long recount = net.count_in(*res.region_back);
        out.require(recount >= achieved, "recount below the achieved count");
        const double vol = std::exp2(res.region_log2_volume);
        out.require(std::abs(vol - eps) <= 1e-9 * eps, "pulled-back region volume off eps");
    }
}

void criterion6_cross_validation(Outcome& out) {
    NetOracle grid = NetOracle::jittered_grid(2, 0.02, 0.5, 515151);
    const double s = kPi / 16.0;
    const double eps = 0.1;
    for (int n : {2, 3}) {
        WitnessTrace scheduled = grow_witness(grid, s, n);
        out.require(scheduled.concentration(),
                    "scheduled run failed at n=" + std::to_string(n));
        if (scheduled.concentration()) {
            out.require(verify_trace(scheduled, grid).recount >= n, "scheduled recount below n");
            const double vol = std::exp2(scheduled.result_log2_volume);
            out.require(std::abs(vol - s) <= 1e-9 * s, "scheduled volume off s");
        }

        WitnessTrace chained = grow_witness_chained(grid, s, eps, n);
        out.require(chained.concentration(), "chained run failed at n=" + std::to_string(n));
        if (chained.concentration()) {
            out.require(verify_trace(chained, grid).recount >= n, "chained recount below n");
            const double frame_vol =
                std::exp2(chained.result_log2_volume + 2.0 * std::log2(chained.prescale));
            out.require(frame_vol < eps, "chained volume not below eps");
            // The whole chain of thresholds holds, not just the last one.
            out.require(verify_trace(chained, grid).ok, "chained trace failed verification");
        }
    }
}

void criterion7_aligned_boxes(Outcome& out) {
    NetOracle ring = NetOracle::ring_lattice_z_sqrt2();
    Rng rng(sub_seed(20250810, "boxes"));
    long long min_count = std::numeric_limits<long long>::max();
    long long max_count = 0;
    for (int i = 0; i < 10000; ++i) {
        const double rho = std::exp(rng.uniform(std::log(1.0 / 16.0), std::log(16.0)));
        const double w = std::sqrt(rho), h = 1.0 / w;
        const double half_diag = 0.5 * std::hypot(w, h);
        Vec dir = testsupport::random_unit(rng, 2);
        Vec center = ((50.0 - half_diag) * std::sqrt(rng.u01())) * dir;
        AlignedBox box(center - 0.5 * vec2(w, h), center + 0.5 * vec2(w, h));
        const long long c = ring.count_in(box);
        min_count = std::min(min_count, c);
        max_count = std::max(max_count, c);
    }
    out.require(min_count >= 1, "ring lattice min count over 10^4 unit boxes is " +
                                    std::to_string(min_count) + " (covolume 2*sqrt(2) > 1)");
    out.require(max_count <= 16,
                "ring lattice max count is " + std::to_string(max_count));

    NetOracle z2 = NetOracle::lattice(Mat::Identity(2, 2), Vec::Zero(2));
    const double s = kPi / 16.0;
    Ellipsoid thin;
    thin.center = Vec::Zero(2);
    thin.shape = vec2(8.0, s / (kPi * 8.0)).asDiagonal();
    out.require(z2.count_in(thin) >= 17,
                "thin ellipsoid along a lattice line holds fewer than 2n+1 points");
}

void criterion8_metric(Outcome& out) {
    const double window = 1000.0;
    Rng rng(sub_seed(20250810, "metric"));
    auto random_set = [&](int max_points) {
        const int n = 1 + static_cast<int>(rng.u01() * max_points);
        std::vector<Vec> pts;
        for (int i = 0; i < n; ++i) pts.push_back(vec2(rng.uniform(-3, 3), rng.uniform(-3, 3)));
        return WindowedSet::make(std::move(pts), window);
    };

    for (int i = 0; i < 50; ++i) {
        WindowedSet f = random_set(20);
        out.require(cf_distance(f, f) == 0.0, "self distance not exactly zero");
    }
    for (int i = 0; i < 100; ++i) {
        WindowedSet a = random_set(20), b = random_set(20), c = random_set(20);
        const double ab = cf_distance(a, b);
        out.require(cf_distance(b, a) == ab, "symmetry not exact");
        out.require(cf_distance(a, c) <= ab + cf_distance(b, c) + 2e-9,
                    "triangle inequality residual above 2e-9");
    }
    WindowedSet f0 = WindowedSet::make({Vec::Zero(2)}, window);
    out.require(cf_distance(f0, WindowedSet::empty_set(window)) == 1.0,
                "distance to the empty set is not the cap 1");
    for (double delta : {0.1, 0.5, 0.9}) {
        const double got = cf_distance(f0, WindowedSet::make({vec2(delta, 0.0)}, window));
        out.require(std::abs(got - delta) <= 1e-9,
                    "single displaced point distance off at delta=" + std::to_string(delta));
    }
}

void criterion9_linebuild(Outcome& out) {
    for (int d : {2, 3}) {
        const double spacing = d == 2 ? 0.0025 : 0.002;
        NetOracle grid = NetOracle::jittered_grid(d, spacing, 0.5, 60301 + d);
        LineBuildResult res = line_build(grid, 0.05, 0.1, 10, 1e-2);
        out.require(res.failed_targets.empty(),
                    "probe came back empty in dimension " + std::to_string(d));
        out.require(res.target_errors.size() == 21,
                    "missing targets in dimension " + std::to_string(d));
        out.require(res.worst_error <= 1e-2,
                    "target error above eta in dimension " + std::to_string(d));
    }
}

void criterion10_mvee(Outcome& out) {
    Rng rng(sub_seed(20250810, "mvee"));
    for (int d : {2, 3}) {
        std::vector<Vec> pts;
        for (int i = 0; i < 20; ++i) {
            Vec p(d);
            for (int k = 0; k < d; ++k) p[k] = rng.gaussian();
            pts.push_back(p);
        }
        Ellipsoid e = mvee(pts);
        for (const Vec& p : pts)
            out.require(e.contains(p, 1e-7), "vertex outside the (1+1e-7)-scaled ellipsoid");
        auto facets = testsupport::hull_facets(pts);
        out.require(!facets.empty(), "hull facet enumeration failed");
        for (int i = 0; i < 200; ++i) {
            Vec sample = e.center + (e.shape / d) * testsupport::random_unit(rng, d);
            out.require(testsupport::in_hull(facets, sample),
                        "d-shrunk boundary sample left the hull (d=" + std::to_string(d) + ")");
        }
    }
}

struct Criterion {
    int id;
    const char* name;
    double budget_seconds;
    std::function<void(Outcome&)> run;
};

} // namespace

int main() {
    const std::vector<Criterion> criteria{
        {1, "schedule exactness", 1.0, criterion1_schedule},
        {2, "covering ellipsoid volume formula", 1.0, criterion2_stretch_cover},
        {3, "witness growth end-to-end", 10.0, criterion3_witness},
        {4, "operator norm bookkeeping", 1.0, criterion4_norms},
        {5, "log log growth sweep", 300.0, criterion5_loglog},
        {6, "cross-validation of both growth routes", 30.0, criterion6_cross_validation},
        {7, "aligned-box dichotomy", 120.0, criterion7_aligned_boxes},
        {8, "set distance properties", 10.0, criterion8_metric},
        {9, "line building", 30.0, criterion9_linebuild},
        {10, "enclosing ellipsoid and John shrink", 30.0, criterion10_mvee},
    };

    int failed = 0;
    for (const Criterion& c : criteria) {
        Outcome out;
        const auto start = std::chrono::steady_clock::now();
        try {
            c.run(out);
        } catch (const std::exception& e) {
            out.require(false, std::string("exception: ") + e.what());
        }
        const double elapsed =
            std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
        if (elapsed > c.budget_seconds)
            out.failures.push_back("runtime " + std::to_string(elapsed) + "s over budget " +
                                   std::to_string(c.budget_seconds) + "s");

        if (out.failures.empty()) {
            std::printf("[PASS] C%-2d %-42s (%.2fs)\n", c.id, c.name, elapsed);
        } else {
            ++failed;
            std::printf("[FAIL] C%-2d %-42s (%.2fs)\n", c.id, c.name, elapsed);
            for (const std::string& msg : out.failures)
                std::printf("        - %s\n", msg.c_str());
        }
    }
    if (failed) std::printf("%d criterion(s) failed\n", failed);
    return failed;
}
