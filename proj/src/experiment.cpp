#include "rbsde/experiment.hpp"

#include "rbsde/error.hpp"
#include "rbsde/path_engine.hpp"
#include "rbsde/rbsde_solver.hpp"
#include "rbsde/regression.hpp"
#include "rbsde/teugels_basis.hpp"

#include <json.hpp>

#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <set>
#include <sstream>

namespace rbsde {

using nlohmann::json;

namespace {

void reject_unknown(const json& block, const std::string& name, const std::set<std::string>& allowed) {
    if (!block.is_object()) throw ConfigError("block '" + name + "' must be an object");
    for (const auto& [key, _] : block.items()) {
        if (!allowed.count(key)) throw ConfigError("unknown key '" + name + "." + key + "'");
    }
}

template <class T>
T field(const json& block, const std::string& name, const char* key, T fallback) {
    if (!block.contains(key) || block.at(key).is_null()) return fallback;
    try {
        return block.at(key).get<T>();
    } catch (const json::exception&) {
        throw ConfigError("bad value for '" + name + "." + key + "'");
    }
}

double bound(const json& block, const char* key, double fallback) {
    if (!block.contains(key) || block.at(key).is_null()) return fallback;
    const auto& v = block.at(key);
    if (v.is_string()) {
        const auto s = v.get<std::string>();
        if (s == "inf" || s == "+inf") return kInf;
        if (s == "-inf") return -kInf;
        throw ConfigError(std::string("bad bound for 'barrier.") + key + "'");
    }
    if (!v.is_number()) throw ConfigError(std::string("bad bound for 'barrier.") + key + "'");
    return v.get<double>();
}

std::string fmt(double v) {
    if (std::isnan(v)) return "nan";
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

std::string slurp(const std::filesystem::path& file) {
    std::ifstream is(file, std::ios::binary);
    if (!is) throw ConfigError("cannot read " + file.string());
    std::ostringstream ss;
    ss << is.rdbuf();
    return ss.str();
}

void spit(const std::filesystem::path& file, const std::string& text) {
    std::ofstream os(file, std::ios::binary | std::ios::trunc);
    if (!os) throw std::runtime_error("cannot write " + file.string());
    os << text;
}

std::vector<std::string> split(const std::string& line, char sep) {
    std::vector<std::string> out;
    std::string cur;
    std::istringstream ss(line);
    while (std::getline(ss, cur, sep)) out.push_back(cur);
    return out;
}

std::vector<std::vector<std::string>> parse_csv(const std::string& text) {
    std::vector<std::vector<std::string>> rows;
    std::istringstream ss(text);
    std::string line;
    bool header = true;
    while (std::getline(ss, line)) {
        if (line.empty()) continue;
        if (header) {
            header = false;
            continue;
        }
        rows.push_back(split(line, ','));
    }
    return rows;
}

double to_double(const std::string& s) {
    if (s == "nan") return std::nan("");
    if (s == "inf") return kInf;
    return std::stod(s);
}

}  // namespace

ExperimentConfig parse_config(const std::string& text) {
    json root;
    try {
        root = json::parse(text, nullptr, true, true);
    } catch (const json::parse_error& e) {
        throw ConfigError(std::string("parse error: ") + e.what());
    }
    reject_unknown(root, "root",
                   {"model", "barrier", "driver", "grid", "basis", "regression", "ladder", "oracle", "tolerances",
                    "output"});
    ExperimentConfig cfg;

    if (!root.contains("model")) throw ConfigError("missing 'model' block");
    const auto& model = root.at("model");
    reject_unknown(model, "model", {"drift", "sigma", "atoms", "horizon"});
    cfg.drift = field(model, "model", "drift", 0.0);
    cfg.sigma = field(model, "model", "sigma", 0.0);
    cfg.horizon = field(model, "model", "horizon", 1.0);
    if (model.contains("atoms")) {
        if (!model.at("atoms").is_array()) throw ConfigError("'model.atoms' must be a list of [location, rate]");
        for (const auto& a : model.at("atoms")) {
            if (!a.is_array() || a.size() != 2 || !a[0].is_number() || !a[1].is_number()) {
                throw ConfigError("'model.atoms' entries must be [location, rate]");
            }
            cfg.atoms.push_back({a[0].get<double>(), a[1].get<double>()});
        }
    }

    const json barrier = root.value("barrier", json::object());
    reject_unknown(barrier, "barrier", {"kind", "lower", "upper", "kappa", "slope", "level"});
    cfg.barrier_kind = field<std::string>(barrier, "barrier", "kind", "none");
    cfg.barrier_lower = bound(barrier, "lower", -kInf);
    cfg.barrier_upper = bound(barrier, "upper", kInf);
    cfg.kappa = field(barrier, "barrier", "kappa", 1.0);
    cfg.slope = field(barrier, "barrier", "slope", 1.0);
    cfg.level = field(barrier, "barrier", "level", 0.0);

    const json driver = root.value("driver", json::object());
    reject_unknown(driver, "driver", {"preset", "c0", "c1", "offset", "y_coef", "z_coef", "terminal", "strike"});
    cfg.driver_preset = field<std::string>(driver, "driver", "preset", "zero");
    cfg.c0 = field(driver, "driver", "c0", field(driver, "driver", "offset", 0.0));
    cfg.c1 = field(driver, "driver", "c1", 0.0);
    cfg.y_coef = field(driver, "driver", "y_coef", 0.0);
    cfg.z_coef = field(driver, "driver", "z_coef", 0.0);
    cfg.terminal = field<std::string>(driver, "driver", "terminal", "identity");
    cfg.strike = field(driver, "driver", "strike", 0.0);

    if (!root.contains("grid")) throw ConfigError("missing 'grid' block");
    const auto& grid = root.at("grid");
    reject_unknown(grid, "grid", {"steps", "paths", "seed"});
    cfg.steps = field(grid, "grid", "steps", 100);
    cfg.paths = field<std::size_t>(grid, "grid", "paths", 100000);
    if (!grid.contains("seed") || !grid.at("seed").is_number_unsigned()) {
        throw ConfigError("'grid.seed' is required (non-negative integer)");
    }
    cfg.seed = grid.at("seed").get<std::uint64_t>();

    const json basis = root.value("basis", json::object());
    reject_unknown(basis, "basis", {"truncation"});
    cfg.truncation = field(basis, "basis", "truncation", 6);

    const json regression = root.value("regression", json::object());
    reject_unknown(regression, "regression", {"degree", "hinge", "knots"});
    cfg.degree = field(regression, "regression", "degree", 4);
    cfg.hinge = field(regression, "regression", "hinge", true);
    cfg.knots = field(regression, "regression", "knots", 8);

    if (root.contains("ladder")) {
        try {
            cfg.ladder = root.at("ladder").get<std::vector<double>>();
        } catch (const json::exception&) {
            throw ConfigError("'ladder' must be a list of numbers");
        }
    } else {
        for (double n = 2.0; n <= 1024.0; n *= 2.0) cfg.ladder.push_back(n);
    }

    const json oracle = root.value("oracle", json::object());
    reject_unknown(oracle, "oracle",
                   {"enabled", "x_min", "x_max", "dx", "dtau", "time_points", "max_extrapolated_share"});
    cfg.oracle_enabled = field(oracle, "oracle", "enabled", false);
    if (oracle.contains("x_min") && !oracle.at("x_min").is_null()) cfg.oracle_x_min = oracle.at("x_min").get<double>();
    if (oracle.contains("x_max") && !oracle.at("x_max").is_null()) cfg.oracle_x_max = oracle.at("x_max").get<double>();
    cfg.oracle_dx = field(oracle, "oracle", "dx", 0.01);
    cfg.oracle_dtau = field(oracle, "oracle", "dtau", 1e-3);
    cfg.oracle_time_points = field(oracle, "oracle", "time_points", 10);
    cfg.oracle_max_extrapolated_share = field(oracle, "oracle", "max_extrapolated_share", 0.01);

    const json tol = root.value("tolerances", json::object());
    reject_unknown(tol, "tolerances", {"domain_violation", "minimality_se", "fk_y0", "require_cauchy"});
    cfg.tol_domain_violation = field(tol, "tolerances", "domain_violation", 1e-2);
    cfg.tol_minimality_se = field(tol, "tolerances", "minimality_se", 3.0);
    cfg.tol_fk_y0 = field(tol, "tolerances", "fk_y0", 2e-2);
    cfg.require_cauchy = field(tol, "tolerances", "require_cauchy", true);

    const json output = root.value("output", json::object());
    reject_unknown(output, "output", {"dir", "dump"});
    cfg.output_dir = field<std::string>(output, "output", "dir", "out");
    cfg.dump = field(output, "output", "dump", true);

    // Validation that needs the built objects.
    if (cfg.steps < 1) throw ConfigError("'grid.steps' must be >= 1");
    if (cfg.paths < 2) throw ConfigError("'grid.paths' must be >= 2");
    if (cfg.truncation < 1 || cfg.truncation > 8) throw ConfigError("'basis.truncation' must be in 1..8");
    if (cfg.degree < 0 || cfg.degree > 10) throw ConfigError("'regression.degree' must be in 0..10");
    if (cfg.knots < 0 || cfg.degree + 3 + cfg.knots > static_cast<int>(kMaxFeatures)) {
        throw ConfigError("'regression.degree' + 'regression.knots' exceed the feature limit");
    }
    if (cfg.ladder.empty()) throw ConfigError("'ladder' is empty");
    for (std::size_t i = 0; i < cfg.ladder.size(); ++i) {
        if (!(cfg.ladder[i] >= 1.0)) throw ConfigError("ladder entries must be >= 1");
        if (i > 0 && !(cfg.ladder[i] > cfg.ladder[i - 1])) throw ConfigError("ladder must be strictly increasing");
    }
    try {
        (void)config_model(cfg);
        (void)config_barrier(cfg);
    } catch (const ConfigError&) {
        throw;
    } catch (const Error& e) {
        throw ConfigError(e.what());
    }
    const auto drv = config_driver(cfg);
    const double dt = cfg.horizon / cfg.steps;
    if (dt * std::sqrt(drv.lipschitz) >= 1.0) {
        throw ConfigError("dt * sqrt(C_f) = " + fmt(dt * std::sqrt(drv.lipschitz)) + " >= 1; refine grid.steps");
    }
    cfg.text = root.dump(2);
    return cfg;
}

ExperimentConfig load_config(const std::filesystem::path& file) { return parse_config(slurp(file)); }

LevyModel config_model(const ExperimentConfig& cfg) {
    return make_model(cfg.drift, cfg.sigma, cfg.atoms, cfg.horizon);
}

ConvexBarrier config_barrier(const ExperimentConfig& cfg) {
    if (cfg.barrier_kind == "none") return ConvexBarrier::zero();
    if (cfg.barrier_kind == "indicator") return ConvexBarrier::indicator(cfg.barrier_lower, cfg.barrier_upper);
    if (cfg.barrier_kind == "quadratic") return ConvexBarrier::quadratic(cfg.kappa);
    if (cfg.barrier_kind == "hinge") return ConvexBarrier::hinge(cfg.slope, cfg.level);
    throw ConfigError("unknown barrier kind '" + cfg.barrier_kind + "'");
}

DriverSpec config_driver(const ExperimentConfig& cfg) {
    DriverSpec d;
    if (cfg.driver_preset == "zero") {
        d = zero_driver();
    } else if (cfg.driver_preset == "linear_y") {
        d = linear_y_driver(cfg.c0, cfg.c1);
    } else if (cfg.driver_preset == "lipschitz_test") {
        d = lipschitz_test_driver(cfg.c0, cfg.y_coef, cfg.z_coef);
    } else {
        throw ConfigError("unknown driver preset '" + cfg.driver_preset + "'");
    }
    set_terminal(d, cfg.terminal, cfg.strike);
    return d;
}

FdGridParams config_oracle_grid(const ExperimentConfig& cfg, const LevyModel& model) {
    const auto mt = moments(model, 1);
    const double half = 6.0 * std::sqrt(mt.mu(0) * model.horizon()) + std::abs(mt.mean_increment) * model.horizon() +
                        60.0 * model.max_jump();
    FdGridParams g;
    g.x_min = cfg.oracle_x_min.value_or(-half);
    g.x_max = cfg.oracle_x_max.value_or(half);
    g.dx = cfg.oracle_dx;
    g.dtau = cfg.oracle_dtau;
    g.max_extrapolated_share = cfg.oracle_max_extrapolated_share;
    return g;
}

std::filesystem::path resolve_output_dir(const ExperimentConfig& cfg, const RunOptions& options) {
    if (options.out_dir) return *options.out_dir;
    if (const char* env = std::getenv("RBSDE_OUT_DIR"); env && *env) return env;
    return cfg.output_dir;
}

namespace {

std::vector<std::pair<std::string, GraphPair>> contract_pairs(const ConvexBarrier& barrier,
                                                               const std::vector<double>& times) {
    std::vector<std::pair<std::string, GraphPair>> pairs;
    pairs.emplace_back("minimality_interior", graph_test_pair(barrier, times));
    const auto dom = barrier.domain();
    if (barrier.is_indicator()) {
        if (std::isfinite(dom.lo)) pairs.emplace_back("minimality_lower", graph_test_pair(barrier, times, dom.lo, -1.0));
        if (std::isfinite(dom.hi)) pairs.emplace_back("minimality_upper", graph_test_pair(barrier, times, dom.hi, 1.0));
    } else if (const auto* h = std::get_if<barrier::Hinge>(&barrier.kind())) {
        pairs.emplace_back("minimality_kink", graph_test_pair(barrier, times, h->level, -h->slope));
    }
    return pairs;
}

int run_stages(const ExperimentConfig& cfg, const PathBundle& bundle, const std::filesystem::path& out,
               unsigned threads) {
    std::filesystem::create_directories(out);
    const auto barrier = config_barrier(cfg);
    const auto driver = config_driver(cfg);

    {
        std::ostringstream os;
        bundle.basis().write_csv(os);
        spit(out / "basis.csv", os.str());
    }

    RegressionBasis rb = default_regression_basis(barrier, cfg.degree, cfg.knots);
    if (!cfg.hinge) rb.hinge_lower = rb.hinge_upper = std::nullopt;
    const RegressionPlan plan(bundle, rb, threads);
    SolverOptions so;
    so.threads = threads;
    auto [sol, report] = solve_reflected(plan, barrier, driver, cfg.ladder, so);

    std::ostringstream conv;
    conv << "n,g_next,y0,y0_stderr,domain_violation,minimality_stat,energy_A,energy_Z,minimality_stderr,sup_y2,"
            "abs_A\n";
    for (const auto& l : report.levels) {
        conv << fmt(l.n) << ',' << fmt(l.gap_next) << ',' << fmt(l.y0) << ',' << fmt(l.y0_stderr) << ','
             << fmt(l.domain_violation) << ',' << fmt(l.minimality_stat) << ',' << fmt(l.energy_a) << ','
             << fmt(l.energy_z) << ',' << fmt(l.minimality_stderr) << ',' << fmt(l.sup_y2) << ',' << fmt(l.abs_a)
             << '\n';
    }

    const auto times = bundle.grid().times();
    const auto named = contract_pairs(barrier, times);
    std::vector<GraphPair> pairs;
    for (const auto& [_, p] : named) pairs.push_back(p);
    const auto contract = check_solution_contract(sol, bundle, barrier, driver, pairs, threads);

    std::ostringstream checks;
    checks << "check,value,threshold\n";
    checks << "domain_violation," << fmt(contract.domain_violation) << ',' << fmt(cfg.tol_domain_violation) << '\n';
    for (std::size_t i = 0; i < named.size(); ++i) {
        const auto& mres = contract.minimality[i];
        checks << named[i].first << ',' << fmt(mres.mean) << ',' << fmt(cfg.tol_minimality_se * mres.stderr_) << '\n';
    }
    if (cfg.require_cauchy) {
        int increases = 0;
        for (std::size_t i = 1; i + 1 < report.levels.size(); ++i) {
            if (report.levels[i].gap_next > report.levels[i - 1].gap_next) ++increases;
        }
        checks << "cauchy_increases," << increases << ",0\n";
    }
    checks << "residual_rms," << fmt(contract.residual_rms) << ",inf\n";
    checks << "fitted_constant," << fmt(report.fitted_constant) << ",inf\n";

    if (cfg.oracle_enabled) {
        const auto& model = bundle.model();
        const auto surface =
            solve_pdii(model, bundle.basis(), barrier, driver, cfg.ladder.back(), config_oracle_grid(cfg, model));
        const auto fk = feynman_kac_check(sol, surface, bundle, cfg.oracle_time_points, threads);
        checks << "fk_y0_gap," << fmt(fk.y0_gap) << ',' << fmt(cfg.tol_fk_y0) << '\n';
        checks << "fk_y_error," << fmt(fk.y_error) << ",inf\n";
        checks << "fk_z1_error," << fmt(fk.z1_error) << ",inf\n";
        checks << "fk_escape_fraction," << fmt(fk.escape_fraction) << ",0.01\n";
        std::ostringstream sc;
        surface.write_csv(sc);
        spit(out / "surface.csv", sc.str());
    }

    spit(out / "convergence.csv", conv.str());
    spit(out / "checks.csv", checks.str());
    const auto summary = summarize(conv.str(), checks.str());
    std::ostringstream sm;
    for (const auto& line : summary.lines) sm << line << '\n';
    sm << (summary.pass ? "PASS" : "FAIL") << '\n';
    spit(out / "summary.txt", sm.str());
    return summary.pass ? kExitPass : kExitToleranceFailure;
}

}  // namespace

int run_experiment(const std::filesystem::path& config_file, const RunOptions& options) {
    return run_experiment(load_config(config_file), options);
}

int run_experiment(ExperimentConfig cfg, const RunOptions& options) {
    if (options.seed) {
        cfg.seed = *options.seed;
        auto root = json::parse(cfg.text);
        root["grid"]["seed"] = cfg.seed;
        cfg.text = root.dump(2);
    }
    const auto out = resolve_output_dir(cfg, options);
    std::filesystem::create_directories(out);
    const auto model = config_model(cfg);
    const auto basis = build_basis(moments(model, cfg.truncation), cfg.truncation);
    const auto bundle = simulate(model, basis, GridSpec(cfg.steps, cfg.horizon), cfg.paths, cfg.seed, options.threads);
    if (cfg.dump) write_dump(bundle, out / "bundle.bin", cfg.text);
    return run_stages(cfg, bundle, out, options.threads);
}

int replay_experiment(const std::filesystem::path& dump_file, const std::optional<std::filesystem::path>& config_file,
                      const RunOptions& options) {
    auto dump = read_dump(dump_file);
    const auto cfg = config_file ? load_config(*config_file) : parse_config(dump.config_text);
    const auto model = config_model(cfg);
    const auto basis = build_basis(moments(model, cfg.truncation), cfg.truncation);
    const auto bundle = bundle_from_dump(std::move(dump), model, basis);
    return run_stages(cfg, bundle, resolve_output_dir(cfg, options), options.threads);
}

Summary summarize(const std::string& convergence_csv, const std::string& checks_csv) {
    Summary s;
    const auto conv = parse_csv(convergence_csv);
    if (!conv.empty()) {
        const auto& last = conv.back();
        if (last.size() >= 4) {
            s.lines.push_back("levels: " + std::to_string(conv.size()) + ", largest n = " + last[0] + ", Y0 = " +
                              last[2] + " +/- " + last[3]);
        }
        for (const auto& row : conv) {
            if (row.size() > 1 && row[1] != "nan") s.lines.push_back("g(" + row[0] + ", next) = " + row[1]);
        }
    }
    for (const auto& row : parse_csv(checks_csv)) {
        if (row.size() < 3) continue;
        const double value = to_double(row[1]);
        const double threshold = to_double(row[2]);
        const bool ok = !std::isnan(value) && value <= threshold;
        if (std::isfinite(threshold)) s.pass = s.pass && ok;
        s.lines.push_back(std::string(std::isfinite(threshold) ? (ok ? "[pass] " : "[FAIL] ") : "[info] ") + row[0] +
                          " = " + row[1] + (std::isfinite(threshold) ? " (threshold " + row[2] + ")" : ""));
    }
    return s;
}

std::string merge_tables(const std::vector<std::filesystem::path>& files) {
    std::ostringstream os;
    bool header_done = false;
    for (const auto& f : files) {
        const auto text = slurp(f);
        std::istringstream ss(text);
        std::string line;
        bool first = true;
        while (std::getline(ss, line)) {
            if (line.empty()) continue;
            if (first) {
                first = false;
                if (!header_done) {
                    os << "run," << line << '\n';
                    header_done = true;
                }
                continue;
            }
            os << f.string() << ',' << line << '\n';
        }
    }
    return os.str();
}

}  // namespace rbsde
