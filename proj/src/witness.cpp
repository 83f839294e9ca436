#include "danzer/witness.hpp"

#include <cmath>

namespace danzer {

namespace {

constexpr double kGoldenAngle = 2.39996322972865332223155550663361; // pi(3 - sqrt 5)

double log2_ratio(int d) {
    return std::log2(static_cast<double>(d)) - std::log2(static_cast<double>(d - 1));
}

void check_range(int d, int n) {
    // (d/(d-1))^{n-1} must stay below 2^39 so log-space products keep full
    // precision; for d = 2 this admits n <= 40.
    if ((n - 1) * log2_ratio(d) > 39.0)
        throw ScheduleRangeError("schedule level too deep for log-space evaluation");
}

Ellipsoid scale_ellipsoid(const Ellipsoid& e, double f) {
    Ellipsoid out;
    out.center = f * e.center;
    out.shape = f * e.shape;
    return out;
}

Vec probe_direction(int d, long long index, double phase) {
    const double theta = phase + static_cast<double>(index) * kGoldenAngle;
    Vec dir = Vec::Zero(d);
    dir[0] = std::cos(theta);
    dir[1] = std::sin(theta);
    return dir;
}

/// Volume-preserving symmetric map scaling the v direction by the given
/// factor and uniformly dilating the orthogonal complement. The inverse is
/// the same construction with the reciprocal factor.
Mat axis_scale(const Vec& v, double factor) {
    const int d = static_cast<int>(v.size());
    const double b = std::pow(factor, -1.0 / (d - 1));
    return b * Mat::Identity(d, d) + (factor - b) / v.squaredNorm() * v * v.transpose();
}

/// First probe: grow centered balls until the set answers, up to the radius
/// cap. An early hit keeps the first rescaling map as tame as the set allows;
/// the lexicographic tie-break would otherwise hand back a boundary point and
/// make the later compositions needlessly stiff.
std::optional<Vec> graded_center_search(const NetOracle& oracle, int d, double inv_lambda,
                                        double radius_cap) {
    for (int j = 20; j >= 0; --j) {
        const double radius = radius_cap * std::exp2(-j);
        std::optional<Vec> y =
            oracle.query(Ellipsoid::centered_ball(d, radius * inv_lambda));
        if (y) return y;
    }
    return std::nullopt;
}

nlohmann::ordered_json vec_json(const Vec& v) {
    return std::vector<double>(v.data(), v.data() + v.size());
}

nlohmann::ordered_json mat_json(const Mat& m) {
    nlohmann::ordered_json rows = nlohmann::ordered_json::array();
    for (int r = 0; r < m.rows(); ++r) {
        nlohmann::ordered_json row = nlohmann::ordered_json::array();
        for (int c = 0; c < m.cols(); ++c) row.push_back(m(r, c));
        rows.push_back(row);
    }
    return rows;
}

nlohmann::ordered_json ellipsoid_json(const Ellipsoid& e) {
    nlohmann::ordered_json j;
    j["center"] = vec_json(e.center);
    j["shape"] = mat_json(e.shape);
    return j;
}

/// Whether the matrix-measured volume agrees with the tracked one, up to the
/// determinant uncertainty inherent at the shape's conditioning.
bool volume_consistent(double tracked_log2, const Ellipsoid& e) {
    Eigen::JacobiSVD<Mat> svd(e.shape);
    const Vec& sv = svd.singularValues();
    double measured = log2_unit_ball_volume(e.dim());
    for (int i = 0; i < e.dim(); ++i) measured += std::log2(sv[i]);
    const double kappa = sv[0] / sv[e.dim() - 1];
    const double tol = 1e-9 + 300.0 * e.dim() * kappa * std::exp2(-52);
    return std::abs(std::exp2(measured - tracked_log2) - 1.0) <= tol;
}

} // namespace

double Log2Value::value() const {
    return std::exp2(log2);
}

Schedule make_schedule(int d, int n) {
    if (d < 2) throw std::invalid_argument("make_schedule: dimension must be >= 2");
    if (n < 1) throw std::invalid_argument("make_schedule: level must be >= 1");
    check_range(d, n);
    const double ratio = static_cast<double>(d) / (d - 1);
    Schedule s;
    s.d = d;
    s.n = n;
    s.log2_eps.resize(static_cast<size_t>(n));
    s.eps.resize(static_cast<size_t>(n));
    s.m.resize(static_cast<size_t>(n));
    for (int k = 1; k <= n; ++k) {
        // log2 eps_k = -2 (d/(d-1))^{n-k}; the last entry is exactly -2.
        s.log2_eps[static_cast<size_t>(k - 1)] = -2.0 * std::pow(ratio, n - k);
        s.eps[static_cast<size_t>(k - 1)] = std::exp2(s.log2_eps[static_cast<size_t>(k - 1)]);
        s.m[static_cast<size_t>(k - 1)] = d * (1.0 - std::pow(1.0 - 1.0 / d, k));
    }
    return s;
}

Log2Value diameter_bound(int d, double s, int n) {
    if (d < 2) throw std::invalid_argument("diameter_bound: dimension must be >= 2");
    if (!(s > 0.0)) throw std::invalid_argument("diameter_bound: volume must be positive");
    if (n < 0) throw std::invalid_argument("diameter_bound: level must be >= 0");
    if (n > 0) check_range(d, n);
    const double ratio = static_cast<double>(d) / (d - 1);
    const double log2_c = 1.0 + (std::log2(s) - log2_unit_ball_volume(d)) / d;
    return {log2_c + 2.0 * d * std::pow(ratio, n - 1)};
}

Log2Value alpha_bound(int d, int n) {
    return diameter_bound(d, 1.0, n);
}

WitnessTrace grow_witness(const NetOracle& oracle, double s, int n, WitnessOptions opts) {
    const int d = oracle.dim();
    if (d < 2) throw std::invalid_argument("grow_witness: dimension must be >= 2");
    if (!(s > 0.0)) throw std::invalid_argument("grow_witness: volume parameter must be positive");

    WitnessTrace trace;
    trace.mode = "scheduled";
    trace.d = d;
    trace.n_target = n;
    trace.s = s;
    trace.schedule = make_schedule(d, n);
    const Schedule& sch = trace.schedule;
    if (sch.eps[0] == 0.0)
        throw ScheduleRangeError("grow_witness: eps_1 underflows; the run is only available in log space");

    // Rescale so that s becomes the volume of the ball of diameter 1/2.
    const double log2_s0 = log2_unit_ball_volume(d) - 2.0 * d;
    const double lambda = std::exp2((log2_s0 - std::log2(s)) / d);
    trace.prescale = lambda;

    if (oracle.window()) {
        const Log2Value need = diameter_bound(d, s, n);
        if (need.log2 - 1.0 > std::log2(*oracle.window()))
            throw OutOfWindowError("grow_witness: oracle window smaller than the growth bound");
    }

    UnimodularAffine acc = UnimodularAffine::identity(d);
    UnimodularAffine acc_inv = UnimodularAffine::identity(d);
    long long dir_index = 0;

    auto frame_to_original = [&](const Ellipsoid& frame_region) {
        return scale_ellipsoid(acc_inv.apply(frame_region), 1.0 / lambda);
    };

    // Step 1: any point of norm <= 1/2 in the rescaled frame.
    {
        Ellipsoid search = scale_ellipsoid(Ellipsoid::centered_ball(d, 0.5), 1.0 / lambda);
        std::optional<Vec> y = graded_center_search(oracle, d, 1.0 / lambda, 0.5);
        if (!y) {
            // The inner ball of diameter 1/2 is then also empty and has volume s.
            trace.gap = GapCertificate{scale_ellipsoid(Ellipsoid::centered_ball(d, 0.25), 1.0 / lambda), 1};
            trace.gap_log2_volume = std::log2(s);
            trace.outcome = WitnessOutcome::Gap;
            trace.accumulated = acc;
            return trace;
        }
        Vec y_frame = lambda * *y;
        const double eps1 = sch.eps[0];
        UnimodularAffine h1 = UnimodularAffine::identity(d);
        if (y_frame.norm() > eps1) {
            const double a = eps1 / y_frame.norm();
            h1 = UnimodularAffine(axis_scale(y_frame, a), Vec::Zero(d));
            acc_inv = UnimodularAffine(axis_scale(y_frame, 1.0 / a), Vec::Zero(d));
        }
        acc = h1;
        trace.collected.push_back(*y);

        WitnessStep st;
        st.k = 1;
        st.eps_k = eps1;
        st.log2_eps_k = sch.log2_eps[0];
        st.point = *y;
        st.point_frame = y_frame;
        st.step_map = h1;
        st.probe_region = search;
        st.acc_inv_opnorm_log2 = std::log2(operator_norm(acc_inv.linear));
        st.containment_residual = acc.apply(y_frame).norm() / eps1;
        trace.steps.push_back(std::move(st));
    }

    for (int k = 2; k <= n; ++k) {
        const double eps_prev = sch.eps[static_cast<size_t>(k - 2)];
        const double eps_k = sch.eps[static_cast<size_t>(k - 1)];
        bool placed = false;
        Ellipsoid last_probe;
        int attempts = 0;

        for (int attempt = 0; attempt <= opts.retry_budget && !placed; ++attempt) {
            ++attempts;
            Vec dir = probe_direction(d, dir_index++, opts.direction_phase);
            Ellipsoid probe_frame = Ellipsoid::ball((eps_prev + 0.25) * dir, 0.25);
            Ellipsoid probe = frame_to_original(probe_frame);
            last_probe = probe;
            std::optional<Vec> y = oracle.query(probe);
            if (!y) continue;

            for (const Vec& p : trace.collected)
                if ((p - *y).norm() <= 1e-9)
                    throw std::runtime_error("grow_witness: oracle returned a duplicate point");

            Vec y_frame = acc.apply(lambda * *y);
            Ellipsoid cover = stretch_cover(eps_prev, y_frame / y_frame.norm());
            BallForm bf = normalize_to_ball(cover);
            if (std::abs(bf.radius - eps_k) > 1e-9 * eps_k)
                throw std::runtime_error("grow_witness: normalized radius does not match the schedule");
            acc = bf.map.compose(acc);
            acc_inv = acc_inv.compose(bf.inverse_map);
            if (!acc.linear.allFinite() || !acc_inv.linear.allFinite())
                throw ScheduleRangeError("grow_witness: accumulated map left double range");
            trace.collected.push_back(*y);

            WitnessStep st;
            st.k = k;
            st.eps_k = eps_k;
            st.log2_eps_k = sch.log2_eps[static_cast<size_t>(k - 1)];
            st.point = *y;
            st.point_frame = y_frame;
            st.step_map = bf.map;
            st.probe_region = probe;
            st.attempts = attempts;
            st.acc_inv_opnorm_log2 = std::log2(operator_norm(acc_inv.linear));
            double worst = 0.0;
            for (const Vec& p : trace.collected)
                worst = std::max(worst, acc.apply(lambda * p).norm());
            st.containment_residual = worst / eps_k;
            trace.steps.push_back(std::move(st));
            placed = true;
        }

        if (!placed) {
            trace.gap = GapCertificate{last_probe, k};
            trace.gap_log2_volume = std::log2(s); // diameter-1/2 probe through unimodular maps
            trace.outcome = WitnessOutcome::Gap;
            trace.accumulated = acc;
            return trace;
        }
    }

    const double eps_n = sch.eps[static_cast<size_t>(n - 1)];
    Ellipsoid result = scale_ellipsoid(acc_inv.apply(Ellipsoid::centered_ball(d, eps_n)), 1.0 / lambda);
    trace.accumulated = acc;
    trace.result = result;
    trace.result_log2_volume =
        log2_unit_ball_volume(d) + d * (sch.log2_eps[static_cast<size_t>(n - 1)] - std::log2(lambda));
    trace.result_log2_diameter =
        1.0 + std::log2(operator_norm(acc_inv.linear)) + std::log2(eps_n) - std::log2(lambda);
    trace.outcome = WitnessOutcome::Concentration;
    return trace;
}

WitnessTrace grow_witness_chained(const NetOracle& oracle, double s, double eps, int n,
                                  WitnessOptions opts) {
    const int d = oracle.dim();
    if (d < 2) throw std::invalid_argument("grow_witness_chained: dimension must be >= 2");
    if (!(s > 0.0)) throw std::invalid_argument("grow_witness_chained: volume parameter must be positive");
    if (n < 1) throw std::invalid_argument("grow_witness_chained: level must be >= 1");
    const double beta = unit_ball_volume(d);
    if (!(eps > 0.0) || !(eps < beta / std::exp2(d - 1)))
        throw std::invalid_argument("grow_witness_chained: eps must satisfy 0 < eps < beta_d / 2^{d-1}");

    WitnessTrace trace;
    trace.mode = "chained";
    trace.d = d;
    trace.n_target = n;
    trace.s = s;
    trace.chain_eps = eps;

    const double ratio = static_cast<double>(d) / (d - 1);
    const double log2_beta = log2_unit_ball_volume(d);
    // Thresholds v_k with v_n = eps and v_k the admissible volume at level k:
    // log2(v_k / beta) = ratio^{n-k} log2(eps / beta).
    trace.chain_log2.resize(static_cast<size_t>(n));
    const double ln_eps = std::log2(eps) - log2_beta;
    for (int k = 1; k <= n; ++k)
        trace.chain_log2[static_cast<size_t>(k - 1)] = ln_eps * std::pow(ratio, n - k) + log2_beta;
    const double log2_v0 = ln_eps * std::pow(ratio, n) + log2_beta;
    const double log2_r0 = (log2_v0 - log2_beta) / d;
    if (log2_r0 < -996.0)
        throw ScheduleRangeError("grow_witness_chained: starting radius underflows double range");

    const double log2_s0 = log2_beta - 2.0 * d;
    const double lambda = std::exp2((log2_s0 - std::log2(s)) / d);
    trace.prescale = lambda;

    long long dir_index = 0;
    UnimodularAffine frame_map = UnimodularAffine::identity(d); // last normalizing map

    Ellipsoid current;                 // grows monotonically, frame coordinates
    double current_log2_vol = log2_v0; // tracked alongside the matrices
    {
        Ellipsoid search = scale_ellipsoid(Ellipsoid::centered_ball(d, 0.25), 1.0 / lambda);
        std::optional<Vec> y = graded_center_search(oracle, d, 1.0 / lambda, 0.25);
        if (!y) {
            trace.gap = GapCertificate{search, 1};
            trace.gap_log2_volume = std::log2(s);
            trace.outcome = WitnessOutcome::Gap;
            return trace;
        }
        current = Ellipsoid::ball(lambda * *y, std::exp2(log2_r0));
        trace.collected.push_back(*y);

        WitnessStep st;
        st.k = 1;
        st.eps_k = std::exp2(log2_r0);
        st.log2_eps_k = log2_r0;
        st.point = *y;
        st.point_frame = lambda * *y;
        st.step_map = UnimodularAffine::identity(d);
        st.probe_region = search;
        trace.steps.push_back(std::move(st));
    }

    for (int k = 1; k < n; ++k) {
        BallForm bf = normalize_to_ball(current);
        const double r = bf.radius;
        // The chain guarantees the normalized ball is small enough to extend.
        if (!((d - 1) * std::log2(r) + log2_beta <=
              trace.chain_log2[static_cast<size_t>(k)] + 1e-9))
            throw std::runtime_error("grow_witness_chained: volume chain violated");
        if (!(r < 0.5))
            throw std::runtime_error("grow_witness_chained: normalized radius reached 1/2");

        bool placed = false;
        Ellipsoid last_probe;
        int attempts = 0;
        for (int attempt = 0; attempt <= opts.retry_budget && !placed; ++attempt) {
            ++attempts;
            Vec dir = probe_direction(d, dir_index++, opts.direction_phase);
            Ellipsoid probe_norm = Ellipsoid::ball((r + 0.25) * dir, 0.25);
            Ellipsoid probe = scale_ellipsoid(bf.inverse_map.apply(probe_norm), 1.0 / lambda);
            last_probe = probe;
            std::optional<Vec> y = oracle.query(probe);
            if (!y) continue;
            Vec p = bf.map.apply(lambda * *y);
            if (p.norm() <= r * (1.0 + 1e-12)) continue; // tangency, not extendable

            for (const Vec& q : trace.collected)
                if ((q - *y).norm() <= 1e-9)
                    throw std::runtime_error("grow_witness_chained: oracle returned a duplicate point");

            Ellipsoid extended = stretch_cover(r, p);
            current = bf.inverse_map.apply(extended);
            current_log2_vol = log2_beta + (d - 1) * std::log2(r) + std::log2(p.norm());
            frame_map = bf.map;
            trace.collected.push_back(*y);

            WitnessStep st;
            st.k = k + 1;
            st.eps_k = r;
            st.log2_eps_k = std::log2(r);
            st.point = *y;
            st.point_frame = p;
            st.step_map = bf.map;
            st.probe_region = probe;
            st.attempts = attempts;
            trace.steps.push_back(std::move(st));
            placed = true;
        }
        if (!placed) {
            trace.gap = GapCertificate{last_probe, k + 1};
            trace.gap_log2_volume = std::log2(s);
            trace.outcome = WitnessOutcome::Gap;
            trace.accumulated = frame_map;
            return trace;
        }
    }

    if (!(current_log2_vol < trace.chain_log2[static_cast<size_t>(n - 1)] + 1e-9))
        throw std::runtime_error("grow_witness_chained: final volume exceeds the target");
    trace.accumulated = frame_map;
    trace.result = scale_ellipsoid(current, 1.0 / lambda);
    trace.result_log2_volume = current_log2_vol - d * std::log2(lambda);
    trace.result_log2_diameter = 1.0 + std::log2(operator_norm(trace.result->shape));
    trace.outcome = WitnessOutcome::Concentration;
    return trace;
}

TraceCheck verify_trace(const WitnessTrace& trace, const NetOracle& oracle) {
    TraceCheck check;
    auto fail = [&](std::string msg) {
        check.ok = false;
        check.failures.push_back(std::move(msg));
    };

    if (trace.concentration()) {
        if (!trace.result) {
            fail("concentration without result region");
            return check;
        }
        for (const Vec& p : trace.collected) {
            if (!oracle.member(p, 1e-9)) fail("collected point is not a member of the set");
            if (!trace.result->contains(p, 1e-9)) fail("collected point lies outside the result");
        }
        for (size_t i = 0; i < trace.collected.size(); ++i)
            for (size_t j = i + 1; j < trace.collected.size(); ++j)
                if ((trace.collected[i] - trace.collected[j]).norm() <= 1e-9)
                    fail("collected points are not pairwise distinct");
        if (static_cast<int>(trace.collected.size()) < trace.n_target)
            fail("fewer collected points than the target");

        check.recount = oracle.count_in(*trace.result);
        if (check.recount < trace.n_target) fail("independent recount below the target");

        if (!volume_consistent(trace.result_log2_volume, *trace.result))
            fail("result shape volume inconsistent with the tracked volume");

        if (trace.mode == "scheduled") {
            const double vol = std::exp2(trace.result_log2_volume);
            if (!(std::abs(vol - trace.s) <= 1e-9 * trace.s))
                fail("result volume differs from the volume parameter");
            const Log2Value bound = diameter_bound(trace.d, trace.s, trace.n_target);
            if (!(trace.result_log2_diameter <= bound.log2 + 1e-9))
                fail("diameter exceeds the growth bound");
            const double log2_eps1 = trace.schedule.log2_eps[0];
            for (const WitnessStep& st : trace.steps) {
                if (!(st.containment_residual <= 1.0 + 1e-9))
                    fail("containment invariant violated at step " + std::to_string(st.k));
                const double cap = -trace.schedule.m[static_cast<size_t>(st.k - 1)] * log2_eps1 +
                                   std::log2(1.0 + 1e-6);
                if (!(st.acc_inv_opnorm_log2 <= cap))
                    fail("operator norm bookkeeping violated at step " + std::to_string(st.k));
            }
        } else {
            const double frame_log2_vol =
                trace.result_log2_volume + trace.d * std::log2(trace.prescale);
            if (!(frame_log2_vol < std::log2(trace.chain_eps) + 1e-9))
                fail("chained volume target missed");
        }
    } else {
        if (!trace.gap) {
            fail("gap outcome without certificate");
            return check;
        }
        check.recount = oracle.count_in(trace.gap->region);
        if (check.recount != 0) fail("gap region is not empty of set points");
        const double vol = std::exp2(trace.gap_log2_volume);
        if (!(std::abs(vol - trace.s) <= 1e-9 * trace.s))
            fail("gap region volume differs from the volume parameter");
        if (!volume_consistent(trace.gap_log2_volume, trace.gap->region))
            fail("gap shape volume inconsistent with the tracked volume");
    }
    return check;
}

int select_stress_level(int d, double eps) {
    if (d < 2) throw std::invalid_argument("select_stress_level: dimension must be >= 2");
    if (!(eps > 0.0) || !(eps < 1.0))
        throw std::invalid_argument("select_stress_level: eps must lie in (0,1)");
    const double target = -std::log2(eps) / d - 1.0; // log2 of eps^{-1/d}/2
    if (alpha_bound(d, 0).log2 > target)
        throw ScheduleRangeError("select_stress_level: eps too large, no admissible level");
    int n = 0;
    while (alpha_bound(d, n + 1).log2 <= target) ++n;
    return n;
}

StressResult net_stress(const NetOracle& net, double eps, WitnessOptions opts) {
    const int d = net.dim();
    StressResult res;
    res.eps = eps;
    res.n_theory = select_stress_level(d, eps);
    res.n_run = std::max(1, res.n_theory);

    const double dilate = std::pow(eps, -1.0 / d);
    NetOracle scaled = net.scaled(dilate);
    res.trace = grow_witness(scaled, 1.0, res.n_run, opts);
    res.concentration = res.trace.concentration();

    const double back = 1.0 / dilate;
    if (res.concentration) {
        res.region_back = scale_ellipsoid(*res.trace.result, back);
        for (const Vec& p : res.trace.collected) res.points_back.push_back(back * p);
        for (int i = 0; i < d; ++i) {
            const double extent = std::abs(res.region_back->center[i]) +
                                  res.region_back->shape.row(i).norm();
            if (extent > 0.5 + 1e-9)
                throw std::runtime_error("net_stress: result region left the unit cube");
        }
    } else {
        res.region_back = scale_ellipsoid(res.trace.gap->region, back);
    }
    res.region_log2_volume =
        (res.concentration ? res.trace.result_log2_volume : res.trace.gap_log2_volume) +
        std::log2(eps);
    return res;
}

nlohmann::ordered_json WitnessTrace::to_json() const {
    nlohmann::ordered_json j;
    j["mode"] = mode;
    j["d"] = d;
    j["n_target"] = n_target;
    j["s"] = s;
    j["prescale"] = prescale;
    if (mode == "scheduled") {
        j["schedule"] = {
            {"log2_eps", schedule.log2_eps}, {"eps", schedule.eps}, {"m", schedule.m}};
    } else {
        j["chain_log2_volumes"] = chain_log2;
        j["chain_eps"] = chain_eps;
    }
    nlohmann::ordered_json steps_json = nlohmann::ordered_json::array();
    for (const WitnessStep& st : steps) {
        nlohmann::ordered_json sj;
        sj["k"] = st.k;
        sj["eps_k"] = st.eps_k;
        sj["log2_eps_k"] = st.log2_eps_k;
        sj["point"] = vec_json(st.point);
        sj["point_frame"] = vec_json(st.point_frame);
        sj["step_linear"] = mat_json(st.step_map.linear);
        sj["step_translation"] = vec_json(st.step_map.translation);
        sj["probe"] = ellipsoid_json(st.probe_region);
        sj["attempts"] = st.attempts;
        sj["acc_inv_opnorm_log2"] = st.acc_inv_opnorm_log2;
        sj["containment_residual"] = st.containment_residual;
        steps_json.push_back(std::move(sj));
    }
    j["steps"] = std::move(steps_json);
    j["accumulated_linear"] = mat_json(accumulated.linear);
    j["outcome"] = concentration() ? "concentration" : "gap";
    if (result) {
        j["result"] = ellipsoid_json(*result);
        j["result_log2_volume"] = result_log2_volume;
        j["result_log2_diameter"] = result_log2_diameter;
        nlohmann::ordered_json pts = nlohmann::ordered_json::array();
        for (const Vec& p : collected) pts.push_back(vec_json(p));
        j["collected"] = std::move(pts);
    }
    if (gap) {
        j["gap"] = {{"region", ellipsoid_json(gap->region)},
                    {"step", gap->step},
                    {"log2_volume", gap_log2_volume}};
    }
    return j;
}

} // namespace danzer
