#include <doctest.h>

#include <cmath>

#include "danzer/witness.hpp"
#include "danzer/rng.hpp"

using namespace danzer;

namespace {
constexpr double kPi = 3.14159265358979323846264338327950288;

Vec vec2(double x, double y) {
    Vec v(2);
    v << x, y;
    return v;
}
} // namespace

TEST_CASE("shrink schedule") {
    SUBCASE("d=2, n=3 is exactly [1/256, 1/16, 1/4]") {
        Schedule s = make_schedule(2, 3);
        REQUIRE(s.eps.size() == 3);
        CHECK(s.eps[0] == 1.0 / 256.0);
        CHECK(s.eps[1] == 1.0 / 16.0);
        CHECK(s.eps[2] == 0.25);
    }

    SUBCASE("last entry is exactly 1/4 for every admissible (d, n)") {
        for (int d = 2; d <= 6; ++d)
            for (int n = 1; n <= 12; ++n)
                CHECK(make_schedule(d, n).eps[static_cast<size_t>(n - 1)] == 0.25);
    }

    SUBCASE("log-space exactness of the power relation") {
        for (int d = 2; d <= 6; ++d) {
            for (int n = 1; n <= 20; ++n) {
                Schedule s = make_schedule(d, n);
                const double log_eps1 = s.log2_eps[0];
                for (int k = 1; k <= n; ++k) {
                    const double expect = std::pow(1.0 - 1.0 / d, k - 1) * log_eps1;
                    CHECK(std::abs(s.log2_eps[static_cast<size_t>(k - 1)] - expect) <=
                          1e-12 * std::abs(log_eps1));
                }
            }
        }
    }

    SUBCASE("m_k closed form equals the geometric partial sum") {
        for (int d = 2; d <= 5; ++d) {
            Schedule s = make_schedule(d, 15);
            double partial = 0.0;
            for (int k = 1; k <= 15; ++k) {
                partial += std::pow(1.0 - 1.0 / d, k - 1);
                CHECK(s.m[static_cast<size_t>(k - 1)] == doctest::Approx(partial).epsilon(1e-13));
            }
            // m_k approaches d from below.
            CHECK(s.m.back() < d);
            CHECK(s.m.back() > d - 1.0);
        }
    }

    SUBCASE("range validation") {
        CHECK_NOTHROW(make_schedule(2, 40));
        CHECK_THROWS_AS(make_schedule(2, 41), ScheduleRangeError);
        CHECK_THROWS_AS(make_schedule(1, 3), std::invalid_argument);
        CHECK_THROWS_AS(make_schedule(2, 0), std::invalid_argument);
    }
}

TEST_CASE("diameter bound and alpha") {
    SUBCASE("ball of diameter 1/2 at one step: bound is 8") {
        Log2Value b = diameter_bound(2, kPi / 16.0, 1);
        CHECK(b.value() == doctest::Approx(8.0).epsilon(1e-13));
    }

    SUBCASE("s=1 constant is twice the inverse ball-volume root") {
        for (int d = 2; d <= 6; ++d) {
            const double c_d1 = 2.0 * std::pow(unit_ball_volume(d), -1.0 / d);
            const double log2_c = alpha_bound(d, 1).log2 - 2.0 * d; // strip 4^{d} at n=1
            CHECK(std::exp2(log2_c) == doctest::Approx(c_d1).epsilon(1e-12));
        }
    }

    SUBCASE("alpha at d=2, n=1") {
        CHECK(alpha_bound(2, 1).value() ==
              doctest::Approx(2.0 / std::sqrt(kPi) * 16.0).epsilon(1e-12));
    }

    SUBCASE("alpha equals diameter_bound at s=1 and grows in n") {
        for (int d = 2; d <= 4; ++d) {
            double prev = alpha_bound(d, 0).log2;
            for (int n = 1; n <= 10; ++n) {
                CHECK(alpha_bound(d, n).log2 == diameter_bound(d, 1.0, n).log2);
                CHECK(alpha_bound(d, n).log2 > prev);
                prev = alpha_bound(d, n).log2;
            }
        }
    }
}

TEST_CASE("grow_witness on a dense jittered grid") {
    NetOracle grid = NetOracle::jittered_grid(2, 0.05, 0.5, 20240617);
    const double s = kPi / 16.0;
    WitnessTrace trace = grow_witness(grid, s, 3);

    REQUIRE(trace.concentration());
    CHECK(trace.collected.size() == 3);
    CHECK(trace.steps.size() == 3);

    TraceCheck chk = verify_trace(trace, grid);
    for (const std::string& msg : chk.failures) MESSAGE(msg);
    CHECK(chk.ok);
    CHECK(chk.recount >= 3);

    // The witness contains the origin by construction.
    CHECK(trace.result->contains(Vec::Zero(2), 1e-9));

    SUBCASE("deterministic: identical reruns produce identical traces") {
        WitnessTrace again = grow_witness(grid, s, 3);
        CHECK(trace.to_json().dump() == again.to_json().dump());
    }

    SUBCASE("probe balls sit tangent outside the concentration ball, inside B_1") {
        UnimodularAffine acc = UnimodularAffine::identity(2);
        for (size_t i = 0; i < trace.steps.size(); ++i) {
            const WitnessStep& st = trace.steps[i];
            if (st.k >= 2) {
                // Map the recorded original-frame probe forward through the
                // accumulated map as it stood when the probe was placed.
                Ellipsoid probe = st.probe_region;
                probe.center *= trace.prescale;
                probe.shape *= trace.prescale;
                Ellipsoid frame_probe = acc.apply(probe);
                const double eps_prev = trace.steps[i - 1].eps_k;
                CHECK(frame_probe.center.norm() ==
                      doctest::Approx(eps_prev + 0.25).epsilon(1e-6));
                CHECK(operator_norm(frame_probe.shape) == doctest::Approx(0.25).epsilon(1e-6));
                CHECK(frame_probe.center.norm() + 0.25 < 1.0);
            }
            acc = st.step_map.compose(acc);
        }
    }
}

TEST_CASE("grow_witness gap certificates") {
    const double s = kPi / 16.0;

    SUBCASE("the empty set gaps at step one") {
        NetOracle empty = NetOracle::explicit_list({}, std::nullopt, 2);
        WitnessTrace trace = grow_witness(empty, s, 3);
        REQUIRE(!trace.concentration());
        CHECK(trace.gap->step == 1);
        CHECK(std::abs(std::exp2(trace.gap_log2_volume) - s) <= 1e-9 * s);
        CHECK(verify_trace(trace, empty).ok);
    }

    SUBCASE("a far-away single point fails the first search") {
        NetOracle far = NetOracle::explicit_list({vec2(50.0, 50.0)}, std::nullopt);
        WitnessTrace trace = grow_witness(far, s, 2);
        REQUIRE(!trace.concentration());
        CHECK(trace.gap->step == 1);
        const double vol = std::exp2(trace.gap->region.log2_volume());
        CHECK(std::abs(vol - s) <= 1e-9 * s);
        CHECK(far.count_in(trace.gap->region) == 0);
        CHECK(verify_trace(trace, far).ok);
    }

    SUBCASE("a single point near the origin survives step one, gaps at step two") {
        NetOracle one = NetOracle::explicit_list({vec2(0.01, 0.02)}, std::nullopt);
        WitnessTrace trace = grow_witness(one, s, 2, {.retry_budget = 4});
        REQUIRE(!trace.concentration());
        CHECK(trace.gap->step == 2);
        CHECK(one.count_in(trace.gap->region) == 0);
        CHECK(verify_trace(trace, one).ok);
        const double vol = std::exp2(trace.gap->region.log2_volume());
        CHECK(std::abs(vol - s) <= 1e-9 * s);
    }

    SUBCASE("the integer lattice: any outcome must verify") {
        NetOracle z2 = NetOracle::lattice(Mat::Identity(2, 2), Vec::Zero(2));
        WitnessTrace trace = grow_witness(z2, 0.05, 2, {.retry_budget = 8});
        CHECK(verify_trace(trace, z2).ok);
    }
}

TEST_CASE("volume-chained growth") {
    SUBCASE("parameter validation") {
        NetOracle z2 = NetOracle::lattice(Mat::Identity(2, 2), Vec::Zero(2));
        CHECK_THROWS_AS(grow_witness_chained(z2, 1.0, kPi / 2.0, 2), std::invalid_argument);
        CHECK_NOTHROW(grow_witness_chained(z2, 1.0, 0.1, 1));
    }

    SUBCASE("level one returns the seed ellipsoid at the chained volume") {
        // One step of the chain shrinks eps to eps^{d/(d-1)} / beta^{1/(d-1)}:
        // at d=2, eps=0.1 that is 0.01/pi.
        NetOracle grid = NetOracle::jittered_grid(2, 0.05, 0.5, 7);
        const double s0 = kPi / 16.0;
        WitnessTrace trace = grow_witness_chained(grid, s0, 0.1, 1);
        REQUIRE(trace.concentration());
        const double expect = 0.01 / kPi;
        const double frame_vol =
            std::exp2(trace.result_log2_volume + 2.0 * std::log2(trace.prescale));
        CHECK(frame_vol == doctest::Approx(expect).epsilon(1e-9));
        CHECK(trace.collected.size() == 1);
    }

    SUBCASE("cross-validation with the scheduled algorithm") {
        NetOracle grid = NetOracle::jittered_grid(2, 0.02, 0.5, 515151);
        const double s = kPi / 16.0;
        for (int n : {2, 3}) {
            WitnessTrace scheduled = grow_witness(grid, s, n);
            WitnessTrace chained = grow_witness_chained(grid, s, 0.1, n);
            REQUIRE(scheduled.concentration());
            REQUIRE(chained.concentration());
            CHECK(scheduled.collected.size() >= static_cast<size_t>(n));
            CHECK(chained.collected.size() >= static_cast<size_t>(n));
            CHECK(verify_trace(scheduled, grid).ok);
            CHECK(verify_trace(chained, grid).ok);
            // The chained run keeps its normalized volume under eps.
            const double frame_vol = std::exp2(chained.result_log2_volume +
                                               2.0 * std::log2(chained.prescale));
            CHECK(frame_vol < 0.1);
        }
    }
}

TEST_CASE("grow_witness in three dimensions") {
    NetOracle grid = NetOracle::jittered_grid(3, 0.1, 0.5, 987123);
    const double s = unit_ball_volume(3) / 64.0; // ball of diameter 1/2
    WitnessTrace trace = grow_witness(grid, s, 2);
    REQUIRE(trace.concentration());
    TraceCheck chk = verify_trace(trace, grid);
    for (const std::string& msg : chk.failures) MESSAGE(msg);
    CHECK(chk.ok);
    CHECK(chk.recount >= 2);

    WitnessTrace chained = grow_witness_chained(grid, s, 0.5, 2);
    REQUIRE(chained.concentration());
    CHECK(verify_trace(chained, grid).ok);
}

TEST_CASE("stress level selection brackets eps^{-1/d}/2") {
    CHECK(select_stress_level(2, 1e-2) == 0);
    CHECK(select_stress_level(2, 1e-4) == 1);
    CHECK(select_stress_level(2, 1e-8) == 2);
    CHECK(select_stress_level(2, 1e-16) == 3);
    CHECK_THROWS_AS(select_stress_level(2, 0.5), ScheduleRangeError);
    CHECK_THROWS_AS(select_stress_level(2, 1.5), std::invalid_argument);

    // The bracket property itself, on a sweep of eps values.
    for (double eps : {1e-3, 1e-5, 1e-7, 1e-10, 1e-13}) {
        const int n = select_stress_level(2, eps);
        const double target = -std::log2(eps) / 2.0 - 1.0;
        CHECK(alpha_bound(2, n).log2 <= target);
        CHECK(alpha_bound(2, n + 1).log2 > target);
    }
}

TEST_CASE("net stress maps results back into the cube") {
    SUBCASE("concentration on a tuned grid") {
        const double eps = 1e-4;
        const double spacing = 0.05 * std::sqrt(eps);
        NetOracle net = NetOracle::jittered_grid(2, spacing, 0.5, 808);
        StressResult res = net_stress(net, eps);
        CHECK(res.n_theory == 1);
        CHECK(res.n_run == 1);
        REQUIRE(res.concentration);
        REQUIRE(res.region_back.has_value());

        const double vol = std::exp2(res.region_log2_volume);
        CHECK(std::abs(vol - eps) <= 1e-9 * eps);
        for (int i = 0; i < 2; ++i) {
            CHECK(std::abs(res.region_back->center[i]) +
                      res.region_back->shape.row(i).norm() <=
                  0.5 + 1e-9);
        }
        CHECK(net.count_in(*res.region_back) >= res.n_run);
        for (const Vec& p : res.points_back) {
            CHECK(res.region_back->contains(p, 1e-9));
            CHECK(p.lpNorm<Eigen::Infinity>() <= 0.5 + 1e-9);
        }
    }

    SUBCASE("a net that is no net at all yields a checked gap certificate") {
        NetOracle sparse = NetOracle::explicit_list({vec2(0.4, 0.4)}, std::nullopt);
        StressResult res = net_stress(sparse, 1e-4);
        REQUIRE(!res.concentration);
        REQUIRE(res.region_back.has_value());
        const double vol = std::exp2(res.region_log2_volume);
        CHECK(std::abs(vol - 1e-4) <= 1e-9 * 1e-4);
        CHECK(sparse.count_in(*res.region_back) == 0);
    }
}
