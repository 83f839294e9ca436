#include "danzer/harness.hpp"

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include "danzer/rng.hpp"

namespace danzer {

namespace {

nlohmann::ordered_json vec_json(const Vec& v) {
    return std::vector<double>(v.data(), v.data() + v.size());
}

nlohmann::ordered_json ellipsoid_json(const Ellipsoid& e) {
    nlohmann::ordered_json j;
    j["center"] = vec_json(e.center);
    nlohmann::ordered_json rows = nlohmann::ordered_json::array();
    for (int r = 0; r < e.dim(); ++r) {
        nlohmann::ordered_json row = nlohmann::ordered_json::array();
        for (int c = 0; c < e.dim(); ++c) row.push_back(e.shape(r, c));
        rows.push_back(row);
    }
    j["shape"] = rows;
    return j;
}

std::string num_str(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

const nlohmann::json& need_field(const nlohmann::json& obj, const char* field,
                                 const char* where) {
    if (!obj.is_object() || !obj.contains(field))
        throw std::invalid_argument(std::string("config: missing field '") + where + "." + field +
                                    "'");
    return obj.at(field);
}

double need_num(const nlohmann::json& params, const char* field) {
    const auto& v = need_field(params, field, "params");
    if (!v.is_number())
        throw std::invalid_argument(std::string("config: field 'params.") + field +
                                    "' must be a number");
    return v.get<double>();
}

long long need_int(const nlohmann::json& params, const char* field) {
    const auto& v = need_field(params, field, "params");
    if (!v.is_number_integer())
        throw std::invalid_argument(std::string("config: field 'params.") + field +
                                    "' must be an integer");
    return v.get<long long>();
}

double opt_num(const nlohmann::json& params, const char* field, double fallback) {
    if (!params.is_object() || !params.contains(field)) return fallback;
    return params.at(field).get<double>();
}

long long opt_int(const nlohmann::json& params, const char* field, long long fallback) {
    if (!params.is_object() || !params.contains(field)) return fallback;
    return params.at(field).get<long long>();
}

WitnessOptions witness_options(const nlohmann::json& params) {
    WitnessOptions opts;
    opts.retry_budget = static_cast<int>(opt_int(params, "retry_budget", 16));
    opts.direction_phase = opt_num(params, "direction_phase", 0.0);
    return opts;
}

NetOracle oracle_from(const ExperimentConfig& cfg) {
    if (cfg.net.is_null())
        throw std::invalid_argument("config: missing field 'net'");
    return NetOracle::from_json(cfg.net);
}

void require_seed(const ExperimentConfig& cfg) {
    if (!cfg.has_seed)
        throw std::invalid_argument("config: missing field 'seed' (required for stochastic runs)");
}

void emit_text(const ExperimentConfig& cfg, const std::string& text) {
    if (cfg.out.empty())
        std::cout << text;
    else
        write_file_atomic(cfg.out, text);
}

void emit_document(const ExperimentConfig& cfg, const nlohmann::ordered_json& doc) {
    emit_text(cfg, doc.dump(2) + "\n");
}

} // namespace

ExperimentConfig ExperimentConfig::from_json(const nlohmann::json& j) {
    if (!j.is_object()) throw std::invalid_argument("config: top level must be an object");
    ExperimentConfig cfg;
    if (j.contains("experiment")) cfg.experiment = j.at("experiment").get<std::string>();
    if (j.contains("seed")) {
        if (!j.at("seed").is_number_integer())
            throw std::invalid_argument("config: field 'seed' must be an integer");
        cfg.seed = j.at("seed").get<std::uint64_t>();
        cfg.has_seed = true;
    }
    if (j.contains("net")) cfg.net = j.at("net");
    if (j.contains("params")) {
        if (!j.at("params").is_object())
            throw std::invalid_argument("config: field 'params' must be an object");
        cfg.params = j.at("params");
    } else {
        cfg.params = nlohmann::json::object();
    }
    if (j.contains("out")) cfg.out = j.at("out").get<std::string>();
    if (j.contains("format")) {
        cfg.format = j.at("format").get<std::string>();
        if (cfg.format != "json" && cfg.format != "csv")
            throw std::invalid_argument("config: field 'format' must be 'json' or 'csv'");
    }
    return cfg;
}

ExperimentConfig ExperimentConfig::from_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::invalid_argument("config: cannot open '" + path + "'");
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::parse_error& e) {
        throw std::invalid_argument(std::string("config parse error: ") + e.what());
    }
    return from_json(j);
}

nlohmann::ordered_json ExperimentConfig::to_json() const {
    nlohmann::ordered_json j;
    j["spec_version"] = kSpecVersion;
    if (!experiment.empty()) j["experiment"] = experiment;
    if (has_seed) j["seed"] = seed;
    if (!net.is_null()) j["net"] = net;
    j["params"] = params;
    if (!out.empty()) j["out"] = out;
    j["format"] = format;
    return j;
}

void write_file_atomic(const std::string& path, const std::string& content) {
    const std::string tmp = path + ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw std::runtime_error("cannot write '" + tmp + "'");
        out << content;
    }
    std::filesystem::rename(tmp, path);
}

std::string csv_escape(const std::string& field) {
    if (field.find_first_of(",\"\r\n") == std::string::npos) return field;
    std::string out = "\"";
    for (char c : field) {
        if (c == '"') out += '"';
        out += c;
    }
    out += '"';
    return out;
}

int run_witness_cmd(const ExperimentConfig& cfg) {
    NetOracle oracle = oracle_from(cfg);
    const double s = need_num(cfg.params, "s");
    const int n = static_cast<int>(need_int(cfg.params, "n"));

    WitnessTrace trace = grow_witness(oracle, s, n, witness_options(cfg.params));
    TraceCheck chk = verify_trace(trace, oracle);
    if (!chk.ok) {
        for (const std::string& msg : chk.failures)
            std::cerr << "verification failure: " << msg << "\n";
        return kExitError;
    }

    nlohmann::ordered_json doc;
    doc["spec_version"] = kSpecVersion;
    doc["experiment"] = "witness";
    if (cfg.has_seed) doc["seed"] = cfg.seed;
    doc["net"] = cfg.net;
    doc["recount"] = chk.recount;
    doc["trace"] = trace.to_json();
    emit_document(cfg, doc);
    return trace.concentration() ? kExitConcentration : kExitGap;
}

int run_chained_cmd(const ExperimentConfig& cfg) {
    NetOracle oracle = oracle_from(cfg);
    const double s = need_num(cfg.params, "s");
    const double eps = need_num(cfg.params, "eps");
    const int n = static_cast<int>(need_int(cfg.params, "n"));

    WitnessTrace trace = grow_witness_chained(oracle, s, eps, n, witness_options(cfg.params));
    TraceCheck chk = verify_trace(trace, oracle);
    if (!chk.ok) {
        for (const std::string& msg : chk.failures)
            std::cerr << "verification failure: " << msg << "\n";
        return kExitError;
    }

    nlohmann::ordered_json doc;
    doc["spec_version"] = kSpecVersion;
    doc["experiment"] = "proof2";
    if (cfg.has_seed) doc["seed"] = cfg.seed;
    doc["net"] = cfg.net;
    doc["recount"] = chk.recount;
    doc["trace"] = trace.to_json();
    emit_document(cfg, doc);
    return trace.concentration() ? kExitConcentration : kExitGap;
}

namespace {

/// Independent post-check of a stress result against the untouched net.
long long stress_recount(const NetOracle& net, const StressResult& res) {
    const long long recount = net.count_in(*res.region_back);
    if (res.concentration) {
        if (recount < res.n_run)
            throw std::runtime_error("stress verification: recount below the grown count");
    } else if (recount != 0) {
        throw std::runtime_error("stress verification: gap region is not empty");
    }
    return recount;
}

nlohmann::ordered_json stress_json(const StressResult& res, long long recount) {
    nlohmann::ordered_json j;
    j["eps"] = res.eps;
    j["n_theory"] = res.n_theory;
    j["n_run"] = res.n_run;
    j["outcome"] = res.concentration ? "concentration" : "gap";
    j["region"] = ellipsoid_json(*res.region_back);
    j["region_log2_volume"] = res.region_log2_volume;
    j["recount"] = recount;
    nlohmann::ordered_json pts = nlohmann::ordered_json::array();
    for (const Vec& p : res.points_back) pts.push_back(vec_json(p));
    j["points"] = pts;
    return j;
}

} // namespace

int run_stress_cmd(const ExperimentConfig& cfg) {
    NetOracle net = oracle_from(cfg);
    const double eps = need_num(cfg.params, "eps");

    StressResult res = net_stress(net, eps, witness_options(cfg.params));
    const long long recount = stress_recount(net, res);

    nlohmann::ordered_json doc;
    doc["spec_version"] = kSpecVersion;
    doc["experiment"] = "stress";
    if (cfg.has_seed) doc["seed"] = cfg.seed;
    doc["net"] = cfg.net;
    doc["result"] = stress_json(res, recount);
    emit_document(cfg, doc);
    return res.concentration ? kExitConcentration : kExitGap;
}

int run_sweep_cmd(const ExperimentConfig& cfg) {
    require_seed(cfg);
    if (!cfg.params.contains("eps_list"))
        throw std::invalid_argument("config: missing field 'params.eps_list'");
    const auto eps_list = cfg.params.at("eps_list").get<std::vector<double>>();
    const int d = static_cast<int>(opt_int(cfg.params, "d", 2));
    const double tune_coeff = opt_num(cfg.params, "tune_coeff", 0.05);
    const double jitter = opt_num(cfg.params, "jitter", 0.5);
    WitnessOptions opts = witness_options(cfg.params);

    struct Row {
        double eps;
        StressResult res;
        long long recount;
        std::string certificate;
    };
    std::vector<Row> rows;
    bool any_gap = false;

    for (size_t idx = 0; idx < eps_list.size(); ++idx) {
        const double eps = eps_list[idx];
        const std::uint64_t entry_seed =
            sub_seed(cfg.seed, "sweep-entry-" + std::to_string(idx));
        const double spacing = tune_coeff * std::pow(eps, 1.0 / d);
        // Default: a per-eps tuned grid. A configured net overrides the
        // tuning and is stressed as-is at every eps.
        NetOracle net = cfg.net.is_null()
                            ? NetOracle::jittered_grid(d, spacing, jitter, entry_seed)
                            : NetOracle::from_json(cfg.net);

        StressResult res = net_stress(net, eps, opts);
        const long long recount = stress_recount(net, res);

        Row row{eps, std::move(res), recount, ""};
        if (!row.res.concentration) {
            any_gap = true;
            if (!cfg.out.empty()) {
                row.certificate = cfg.out + ".gap-" + std::to_string(idx) + ".json";
                nlohmann::ordered_json cert;
                cert["spec_version"] = kSpecVersion;
                cert["eps"] = eps;
                cert["region"] = ellipsoid_json(*row.res.region_back);
                write_file_atomic(row.certificate, cert.dump(2) + "\n");
            }
        }
        rows.push_back(std::move(row));
    }

    if (cfg.format == "csv") {
        std::ostringstream out;
        out << "spec_version,eps,n_theory,n_run,count_collected,recount,diam_log2,bound_log2,"
               "outcome,certificate\r\n";
        for (const Row& row : rows) {
            const double bound = alpha_bound(d, row.res.n_run).log2;
            out << kSpecVersion << ',' << num_str(row.eps) << ',' << row.res.n_theory << ','
                << row.res.n_run << ',' << row.res.trace.collected.size() << ',' << row.recount
                << ','
                << (row.res.concentration ? num_str(row.res.trace.result_log2_diameter) : "")
                << ',' << num_str(bound) << ','
                << (row.res.concentration ? "concentration" : "GAP") << ','
                << csv_escape(row.certificate) << "\r\n";
        }
        emit_text(cfg, out.str());
    } else {
        nlohmann::ordered_json doc;
        doc["spec_version"] = kSpecVersion;
        doc["experiment"] = "sweep";
        doc["seed"] = cfg.seed;
        nlohmann::ordered_json arr = nlohmann::ordered_json::array();
        for (const Row& row : rows) {
            nlohmann::ordered_json rj = stress_json(row.res, row.recount);
            rj["count_collected"] = row.res.trace.collected.size();
            rj["bound_log2"] = alpha_bound(d, row.res.n_run).log2;
            if (!row.certificate.empty()) rj["certificate"] = row.certificate;
            arr.push_back(std::move(rj));
        }
        doc["rows"] = std::move(arr);
        emit_document(cfg, doc);
    }
    return any_gap ? kExitGap : kExitConcentration;
}

int run_boxes_cmd(const ExperimentConfig& cfg) {
    require_seed(cfg);
    NetOracle base = cfg.net.is_null() ? NetOracle::ring_lattice_z_sqrt2() : oracle_from(cfg);
    const double scale = opt_num(cfg.params, "lattice_scale", 1.0);
    NetOracle oracle = scale == 1.0 ? std::move(base) : base.scaled(scale);
    const int d = oracle.dim();

    const long long count = opt_int(cfg.params, "box_count", 10000);
    const double window = opt_num(cfg.params, "window", 50.0);
    const double aspect_min = opt_num(cfg.params, "aspect_min", 1.0 / 16.0);
    const double aspect_max = opt_num(cfg.params, "aspect_max", 16.0);
    const long long c_max = opt_int(cfg.params, "c_max", 16);
    if (!(aspect_min > 0.0) || !(aspect_max >= aspect_min))
        throw std::invalid_argument("config: invalid aspect range");

    Rng rng(sub_seed(cfg.seed, "boxes"));
    long long min_count = std::numeric_limits<long long>::max();
    long long max_count = 0;
    long long empty_boxes = 0, high_boxes = 0;
    double total = 0.0;
    nlohmann::ordered_json first_violations = nlohmann::ordered_json::array();

    for (long long i = 0; i < count; ++i) {
        Vec logside(d);
        if (d == 2) {
            const double lr = rng.uniform(std::log(aspect_min), std::log(aspect_max));
            logside << 0.5 * lr, -0.5 * lr;
        } else {
            for (int k = 0; k < d; ++k)
                logside[k] = rng.uniform(std::log(aspect_min), std::log(aspect_max)) / d;
            logside.array() -= logside.mean();
        }
        Vec sides = logside.array().exp();
        const double half_diag = 0.5 * sides.norm();
        if (half_diag >= window)
            throw std::invalid_argument("config: aspect range does not fit the window");

        Vec dir(d);
        double norm = 0.0;
        while (norm == 0.0) {
            for (int k = 0; k < d; ++k) dir[k] = rng.gaussian();
            norm = dir.norm();
        }
        Vec center = ((window - half_diag) * std::pow(rng.u01(), 1.0 / d) / norm) * dir;
        AlignedBox box(center - 0.5 * sides, center + 0.5 * sides);

        const long long c = oracle.count_in(box);
        min_count = std::min(min_count, c);
        max_count = std::max(max_count, c);
        total += static_cast<double>(c);
        const bool violation = c == 0 || c > c_max;
        if (c == 0) ++empty_boxes;
        if (c > c_max) ++high_boxes;
        if (violation && first_violations.size() < 5) {
            nlohmann::ordered_json v;
            v["lo"] = vec_json(box.lo);
            v["hi"] = vec_json(box.hi);
            v["count"] = c;
            first_violations.push_back(std::move(v));
        }
    }

    nlohmann::ordered_json doc;
    doc["spec_version"] = kSpecVersion;
    doc["experiment"] = "boxes";
    doc["seed"] = cfg.seed;
    doc["net"] = oracle.to_json();
    doc["box_count"] = count;
    doc["window"] = window;
    doc["aspect_range"] = {aspect_min, aspect_max};
    doc["c_max"] = c_max;
    doc["min_count"] = min_count;
    doc["max_count"] = max_count;
    doc["mean_count"] = total / static_cast<double>(count);
    doc["empty_boxes"] = empty_boxes;
    doc["boxes_above_c_max"] = high_boxes;
    doc["first_violations"] = std::move(first_violations);
    emit_document(cfg, doc);
    return (empty_boxes == 0 && high_boxes == 0) ? kExitConcentration : kExitGap;
}

namespace {

WindowedSet random_windowed_set(Rng& rng, int d, int max_points, double spread, double window) {
    const int n = 1 + static_cast<int>(rng.u01() * max_points);
    std::vector<Vec> pts;
    pts.reserve(static_cast<size_t>(n));
    for (int i = 0; i < n; ++i) {
        Vec p(d);
        for (int k = 0; k < d; ++k) p[k] = rng.uniform(-spread, spread);
        pts.push_back(std::move(p));
    }
    return WindowedSet::make(std::move(pts), window);
}

} // namespace

int run_metric_cmd(const ExperimentConfig& cfg) {
    require_seed(cfg);
    const int d = static_cast<int>(opt_int(cfg.params, "d", 2));
    const int sets = static_cast<int>(opt_int(cfg.params, "sets", 50));
    const int triples = static_cast<int>(opt_int(cfg.params, "triples", 100));
    const int max_points = static_cast<int>(opt_int(cfg.params, "max_points", 20));
    const double spread = opt_num(cfg.params, "spread", 3.0);
    const double window = opt_num(cfg.params, "window", 1000.0);
    Rng rng(sub_seed(cfg.seed, "metric"));

    nlohmann::ordered_json props = nlohmann::ordered_json::array();
    bool all_pass = true;
    auto report = [&](const std::string& name, long long trials, double worst, bool pass) {
        nlohmann::ordered_json p;
        p["property"] = name;
        p["trials"] = trials;
        p["worst_residual"] = worst;
        p["pass"] = pass;
        props.push_back(std::move(p));
        all_pass = all_pass && pass;
    };

    {
        double worst = 0.0;
        for (int i = 0; i < sets; ++i) {
            WindowedSet f = random_windowed_set(rng, d, max_points, spread, window);
            worst = std::max(worst, cf_distance(f, f));
        }
        report("identity", sets, worst, worst == 0.0);
    }
    {
        double worst = 0.0;
        for (int i = 0; i < sets; ++i) {
            WindowedSet a = random_windowed_set(rng, d, max_points, spread, window);
            WindowedSet b = random_windowed_set(rng, d, max_points, spread, window);
            worst = std::max(worst, std::abs(cf_distance(a, b) - cf_distance(b, a)));
        }
        report("symmetry", sets, worst, worst == 0.0);
    }
    {
        double worst = 0.0;
        for (int i = 0; i < triples; ++i) {
            WindowedSet a = random_windowed_set(rng, d, max_points, spread, window);
            WindowedSet b = random_windowed_set(rng, d, max_points, spread, window);
            WindowedSet c = random_windowed_set(rng, d, max_points, spread, window);
            const double residual = cf_distance(a, c) - cf_distance(a, b) - cf_distance(b, c);
            worst = std::max(worst, residual);
        }
        report("triangle", triples, worst, worst <= 2e-9);
    }
    {
        // Translation equivariance holds when no point leaves the ball of
        // radius 1/distance, so compare a set against a small perturbation.
        double worst = 0.0;
        for (int i = 0; i < sets; ++i) {
            WindowedSet a = random_windowed_set(rng, d, max_points, spread, window);
            std::vector<Vec> moved;
            for (const Vec& p : a.points) {
                Vec q = p;
                for (int k = 0; k < d; ++k) q[k] += 0.05 * rng.uniform(-1.0, 1.0);
                moved.push_back(std::move(q));
            }
            WindowedSet b = WindowedSet::make(std::move(moved), window);
            Vec v(d);
            for (int k = 0; k < d; ++k) v[k] = rng.uniform(-1.0, 1.0);
            UnimodularAffine g = UnimodularAffine::pure_translation(v);
            worst = std::max(worst,
                             std::abs(cf_distance(act(g, a), act(g, b)) - cf_distance(a, b)));
        }
        report("translation_equivariance", sets, worst, worst <= 1e-9);
    }
    {
        // Pinned values: distance to the empty set caps at 1; a single
        // displaced point realizes its displacement.
        std::vector<Vec> origin{Vec::Zero(d)};
        WindowedSet f0 = WindowedSet::make(origin, window);
        WindowedSet fe = WindowedSet::empty_set(window);
        double worst = std::abs(cf_distance(f0, fe) - 1.0);
        for (double delta : {0.1, 0.5, 0.9}) {
            Vec p = Vec::Zero(d);
            p[0] = delta;
            WindowedSet fd = WindowedSet::make({p}, window);
            worst = std::max(worst, std::abs(cf_distance(f0, fd) - delta));
        }
        report("pinned_values", 4, worst, worst <= 1e-9);
    }

    nlohmann::ordered_json doc;
    doc["spec_version"] = kSpecVersion;
    doc["experiment"] = "metric";
    doc["seed"] = cfg.seed;
    doc["d"] = d;
    doc["properties"] = std::move(props);
    emit_document(cfg, doc);
    return all_pass ? kExitConcentration : kExitGap;
}

int run_linebuild_cmd(const ExperimentConfig& cfg) {
    NetOracle oracle = oracle_from(cfg);
    const double r = opt_num(cfg.params, "r", 0.05);
    const double eps = need_num(cfg.params, "eps");
    const int half_count = static_cast<int>(need_int(cfg.params, "N"));
    const double eta = need_num(cfg.params, "eta");

    LineBuildResult res = line_build(oracle, r, eps, half_count, eta);
    const bool pass = res.failed_targets.empty() && res.worst_error <= eta;

    nlohmann::ordered_json doc;
    doc["spec_version"] = kSpecVersion;
    doc["experiment"] = "linebuild";
    doc["net"] = cfg.net;
    doc["r"] = r;
    doc["eps"] = eps;
    doc["N"] = half_count;
    doc["eta"] = eta;
    doc["target_errors"] = res.target_errors;
    doc["failed_targets"] = res.failed_targets;
    doc["worst_error"] = res.worst_error;
    doc["pass"] = pass;
    doc["set"] = res.set.serialize();
    emit_document(cfg, doc);
    return pass ? kExitConcentration : kExitGap;
}

int run_schedule_cmd(const ExperimentConfig& cfg) {
    const int d = static_cast<int>(need_int(cfg.params, "d"));
    const int n = static_cast<int>(need_int(cfg.params, "n"));
    const double s = opt_num(cfg.params, "s", 1.0);

    Schedule sch = make_schedule(d, n);
    Log2Value bound = diameter_bound(d, s, n);
    Log2Value alpha = alpha_bound(d, n);

    if (cfg.format == "csv") {
        std::ostringstream out;
        out << "spec_version,d,n,k,eps,log2_eps,m_k,log2_diameter_bound,log2_alpha\r\n";
        for (int k = 1; k <= n; ++k) {
            out << kSpecVersion << ',' << d << ',' << n << ',' << k << ','
                << num_str(sch.eps[static_cast<size_t>(k - 1)]) << ','
                << num_str(sch.log2_eps[static_cast<size_t>(k - 1)]) << ','
                << num_str(sch.m[static_cast<size_t>(k - 1)]) << ',' << num_str(bound.log2) << ','
                << num_str(alpha.log2) << "\r\n";
        }
        emit_text(cfg, out.str());
    } else {
        nlohmann::ordered_json doc;
        doc["spec_version"] = kSpecVersion;
        doc["experiment"] = "schedule";
        doc["d"] = d;
        doc["n"] = n;
        doc["s"] = s;
        doc["eps"] = sch.eps;
        doc["log2_eps"] = sch.log2_eps;
        doc["m"] = sch.m;
        doc["log2_diameter_bound"] = bound.log2;
        doc["diameter_bound"] = bound.value();
        doc["log2_alpha"] = alpha.log2;
        doc["alpha"] = alpha.value();
        emit_document(cfg, doc);
    }
    return kExitConcentration;
}

} // namespace danzer
