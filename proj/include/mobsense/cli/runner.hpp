#pragma once
// Experiment runner: scenario construction, planning, filtering, sweeps,
// output files and manifests.

#include "mobsense/cli/config.hpp"
#include "mobsense/errors.hpp"
#include "mobsense/io.hpp"
#include "mobsense/kalman.hpp"
#include "mobsense/model.hpp"
#include "mobsense/observability.hpp"
#include "mobsense/planner.hpp"
#include "mobsense/scenarios/gridded.hpp"
#include "mobsense/scenarios/ks.hpp"
#include "mobsense/scenarios/torus.hpp"

#include <openssl/evp.h>

#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <exception>
#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <random>
#include <string>
#include <thread>
#include <utility>
#include <vector>

#ifndef MOBSENSE_VERSION
#define MOBSENSE_VERSION "0.1.0"
#endif

namespace mobsense::cli {

inline std::string sha256_hex(const std::string& bytes) {
    unsigned char digest[EVP_MAX_MD_SIZE];
    unsigned int len = 0;
    if (EVP_Digest(bytes.data(), bytes.size(), digest, &len, EVP_sha256(), nullptr) != 1)
        throw Error(Error::Category::numerical, "sha256 failed");
    static constexpr char hex[] = "0123456789abcdef";
    std::string out;
    for (unsigned int i = 0; i < len; ++i) {
        out.push_back(hex[digest[i] >> 4]);
        out.push_back(hex[digest[i] & 0xf]);
    }
    return out;
}

/// seed XOR the first 8 bytes (big-endian) of SHA-256(key).
inline std::uint64_t derive_seed(std::uint64_t seed, const std::string& key) {
    const std::string h = sha256_hex(key);
    return seed ^ std::stoull(h.substr(0, 16), nullptr, 16);
}

// ---- sweep expansion -------------------------------------------------------------

struct SweepPoint {
    std::string id;   ///< p000, p001, ...
    std::string key;  ///< canonical axis assignment, e.g. "sensors=2;speed=inf"
    ExperimentConfig cfg;
    std::uint64_t seed = 0;
};

inline std::vector<SweepPoint> expand_sweep(const ExperimentConfig& base) {
    std::vector<SweepPoint> points;
    const SweepAxes axes = base.sweep.value_or(SweepAxes{});
    auto or_base = [](const auto& axis, auto value) {
        using T = decltype(value);
        return axis.empty() ? std::vector<T>{value} : std::vector<T>(axis.begin(), axis.end());
    };
    const auto sensors = or_base(axes.sensors, base.sensors);
    const auto speed = or_base(axes.speed, base.mode.speed);
    const auto period = or_base(axes.period, base.mode.period);
    const auto dts = or_base(axes.sampling_dt, base.sampling_dt);
    const auto qs = or_base(axes.q, base.noise.q);
    const auto rhos = or_base(axes.rho, base.noise.rho);
    for (auto k : sensors)
        for (auto v : speed)
            for (auto l : period)
                for (auto dt : dts)
                    for (auto q : qs)
                        for (auto rho : rhos) {
                            SweepPoint p;
                            p.cfg = base;
                            p.cfg.sweep.reset();
                            p.cfg.sensors = k;
                            p.cfg.mode.speed = v;
                            p.cfg.mode.period = l;
                            p.cfg.sampling_dt = dt;
                            p.cfg.noise = {q, rho};
                            std::string key;
                            auto add = [&](const char* name, bool used, const std::string& value) {
                                if (!used) return;
                                if (!key.empty()) key += ";";
                                key += std::string(name) + "=" + value;
                            };
                            add("sensors", !axes.sensors.empty(), std::to_string(k));
                            add("speed", !axes.speed.empty(), io::fmt(v));
                            add("period", !axes.period.empty(), std::to_string(l));
                            add("sampling_dt", !axes.sampling_dt.empty(), io::fmt(dt));
                            add("q", !axes.q.empty(), io::fmt(q));
                            add("rho", !axes.rho.empty(), io::fmt(rho));
                            if (key.empty()) key = "base";
                            char id[16];
                            std::snprintf(id, sizeof id, "p%03zu", points.size());
                            p.id = id;
                            p.key = key;
                            p.seed = derive_seed(base.seed, key);
                            points.push_back(std::move(p));
                        }
    return points;
}

inline json resolved_config(const ExperimentConfig& cfg) {
    json sc;
    const auto& s = cfg.scenario;
    switch (s.kind) {
        case ScenarioConfig::Kind::torus:
            sc = {{"kind", "torus"},         {"rows", s.torus.rows},
                  {"cols", s.torus.cols},    {"n_fourier", s.torus.n_fourier},
                  {"n_gauss", s.torus.n_gauss}, {"gauss_width", s.torus.gauss_width},
                  {"freq_range", s.torus.freq_range}, {"damp_range", s.torus.damp_range},
                  {"max_wavenumber", s.torus.max_wavenumber}, {"seed", s.torus.seed},
                  {"train_steps", s.train_steps}};
            break;
        case ScenarioConfig::Kind::ks:
            sc = {{"kind", "ks"},
                  {"n_grid", s.ks.n_grid},
                  {"domain_length", s.ks.domain_length},
                  {"dt_solver", s.ks.dt_solver},
                  {"t_final", s.ks.t_final},
                  {"t_discard", s.ks.t_discard},
                  {"seed", s.ks.seed}};
            break;
        case ScenarioConfig::Kind::gridded:
            sc = {{"kind", "gridded"},
                  {"path", s.gridded.path.string()},
                  {"format", s.gridded.format == GridFormat::binary_grid ? "binary_grid" : "csv_grid"},
                  {"wrap_longitude", s.gridded.wrap_longitude}};
            break;
    }
    json mode = cfg.mode.mobile ? json{{"kind", "mobile"},
                                       {"speed", io::number(cfg.mode.speed)},
                                       {"period", cfg.mode.period},
                                       {"enforce_cycle", cfg.mode.enforce_cycle},
                                       {"refine_factor", cfg.mode.refine_factor}}
                                : json{{"kind", "stationary"}};
    json out = {{"name", cfg.name},
                {"scenario", sc},
                {"model", cfg.model.dmd ? json{{"kind", "dmd"}, {"rank", cfg.model.rank}} : json{{"kind", "known"}}},
                {"sensors", cfg.sensors},
                {"mode", mode},
                {"sampling_dt", cfg.sampling_dt},
                {"noise", {{"q", cfg.noise.q}, {"rho", cfg.noise.rho}}},
                {"steps", cfg.steps ? json(*cfg.steps) : json(nullptr)},
                {"seed", cfg.seed},
                {"initial_variance", cfg.initial_variance},
                {"outputs", cfg.outputs.string()},
                {"workers", cfg.workers}};
    if (cfg.sweep) {
        json sw = json::object();
        auto put = [&](const char* name, const auto& axis) {
            if (axis.empty()) return;
            json a = json::array();
            for (auto v : axis) {
                if constexpr (std::is_floating_point_v<std::decay_t<decltype(v)>>) a.push_back(io::number(v));
                else a.push_back(v);
            }
            sw[name] = a;
        };
        put("sensors", cfg.sweep->sensors);
        put("speed", cfg.sweep->speed);
        put("period", cfg.sweep->period);
        put("sampling_dt", cfg.sweep->sampling_dt);
        put("q", cfg.sweep->q);
        put("rho", cfg.sweep->rho);
        out["sweep"] = sw;
    }
    return out;
}

// ---- scenarios ---------------------------------------------------------------------

struct Scenario {
    ReducedModel model;
    RealBlockModel real;
    std::shared_ptr<const Geometry> geometry;
    std::shared_ptr<const SnapshotMatrix> data;  ///< null when truth is simulated from the model
    json grid;                                   ///< layout for plots: rows, cols and optional cell map
    std::optional<TorusSpec> torus;              ///< set for known torus models
};

inline Index integer_ratio(double num, double den, const std::string& what) {
    const double r = num / den;
    const auto k = static_cast<Index>(std::llround(r));
    if (k < 1 || std::abs(r - static_cast<double>(k)) > 1e-9 * std::max(1.0, r))
        throw ConfigError(what + " (" + io::fmt(num) + ") must be a positive integer multiple of " + io::fmt(den));
    return k;
}

inline std::shared_ptr<const SnapshotMatrix> subsample(const SnapshotMatrix& src, Index stride) {
    auto out = std::make_shared<SnapshotMatrix>();
    const Index T = (src.steps() + stride - 1) / stride;
    out->data.resize(src.n(), T);
    for (Index j = 0; j < T; ++j) out->data.col(j) = src.data.col(j * stride);
    out->dt = src.dt * static_cast<double>(stride);
    out->grid = src.grid;
    return out;
}

inline Scenario finish_data_scenario(Scenario sc, Index rank) {
    sc.model = fit_dmd(*sc.data, rank);
    sc.real = to_real_blocks(sc.model);
    return sc;
}

inline Scenario build_scenario(const ExperimentConfig& cfg, double sampling_dt) {
    Scenario sc;
    const auto& s = cfg.scenario;
    switch (s.kind) {
        case ScenarioConfig::Kind::torus: {
            TorusSpec spec = s.torus;
            spec.dt = sampling_dt;
            TorusScenario t = make_torus(spec);
            sc.geometry = std::make_shared<const Geometry>(t.geometry);
            sc.grid = {{"rows", spec.rows}, {"cols", spec.cols}};
            if (!cfg.model.dmd) {
                sc.model = std::move(t.model);
                sc.real = to_real_blocks(sc.model);
                sc.torus = spec;
                return sc;
            }
            const Index train = s.train_steps > 0 ? s.train_steps : cfg.steps.value_or(1);
            std::mt19937_64 rng(spec.seed ^ 0x9e3779b97f4a7c15ULL);
            std::normal_distribution<double> normal(0.0, 1.0);
            VectorXcd z0(t.model.m());
            for (Index j = 0; j < t.model.m(); ++j) {
                const auto tag = t.model.pair_map()[static_cast<std::size_t>(j)];
                if (tag.role == PairRole::follow) continue;
                z0(j) = tag.role == PairRole::real ? Complex(normal(rng), 0.0) : Complex(normal(rng), normal(rng));
                if (tag.role == PairRole::lead) z0(tag.partner) = std::conj(z0(j));
            }
            auto data = std::make_shared<SnapshotMatrix>(simulate(t.model, z0, train, cfg.noise, spec.seed, sampling_dt));
            data->grid = sc.geometry;
            sc.data = data;
            return finish_data_scenario(std::move(sc), cfg.model.rank);
        }
        case ScenarioConfig::Kind::ks: {
            KsSpec spec = s.ks;
            spec.output_every = integer_ratio(sampling_dt, spec.dt_solver, "sampling_dt");
            auto data = std::make_shared<SnapshotMatrix>(solve_ks(spec));
            sc.geometry = data->grid;
            sc.grid = {{"rows", 1}, {"cols", spec.n_grid}};
            sc.data = data;
            return finish_data_scenario(std::move(sc), cfg.model.rank);
        }
        case ScenarioConfig::Kind::gridded: {
            const GriddedDataset ds = load_gridded(s.gridded.path, s.gridded.format);
            const Index stride = integer_ratio(sampling_dt, ds.dt(), "sampling_dt");
            const SnapshotMatrix full = to_snapshots(ds, s.gridded.wrap_longitude);
            sc.data = stride == 1 ? std::make_shared<const SnapshotMatrix>(full) : subsample(full, stride);
            sc.geometry = full.grid;
            std::vector<Index> cells;
            for (Index i = 0; i < ds.n_valid(); ++i) cells.push_back(ds.cell_of_state(i));
            sc.grid = {{"rows", ds.rows()}, {"cols", ds.cols()}, {"cells", cells}};
            return finish_data_scenario(std::move(sc), cfg.model.rank);
        }
    }
    throw ConfigError("unknown scenario kind");
}

/// Model seen at a `factor`-times coarser sampling rate, used for multiscale planning.
inline Scenario coarsen(const Scenario& fine, Index factor, const ExperimentConfig& cfg) {
    Scenario sc;
    sc.geometry = fine.geometry;
    sc.grid = fine.grid;
    if (fine.torus) {
        TorusSpec spec = *fine.torus;
        spec.dt *= static_cast<double>(factor);
        try {
            sc.model = make_torus(spec).model;
        } catch (const ArgumentError& e) {
            throw ConfigError(std::string("refine_factor: ") + e.what());
        }
        sc.real = to_real_blocks(sc.model);
        sc.torus = spec;
        return sc;
    }
    sc.data = subsample(*fine.data, factor);
    return finish_data_scenario(std::move(sc), cfg.model.rank);
}

class ScenarioCache {
public:
    std::shared_ptr<const Scenario> get(const ExperimentConfig& cfg, double sampling_dt) {
        // simulated training data for torus DMD models also depends on q
        const bool q_matters = cfg.scenario.kind == ScenarioConfig::Kind::torus && cfg.model.dmd;
        const std::pair<double, double> key{sampling_dt, q_matters ? cfg.noise.q : 0.0};
        std::shared_ptr<Entry> entry;
        {
            std::lock_guard lock(mutex_);
            auto& slot = entries_[key];
            if (!slot) slot = std::make_shared<Entry>();
            entry = slot;
        }
        std::call_once(entry->once, [&] {
            try {
                entry->value = std::make_shared<const Scenario>(build_scenario(cfg, sampling_dt));
            } catch (...) {
                entry->error = std::current_exception();
            }
        });
        if (entry->error) std::rethrow_exception(entry->error);
        return entry->value;
    }

private:
    struct Entry {
        std::once_flag once;
        std::shared_ptr<const Scenario> value;
        std::exception_ptr error;
    };
    std::mutex mutex_;
    std::map<std::pair<double, double>, std::shared_ptr<Entry>> entries_;
};

// ---- one run -------------------------------------------------------------------------

struct RunOptions {
    bool plan_only = false;
    bool plan_report = false;
    std::optional<Trajectory> trajectory;  ///< use this schedule instead of planning
    std::optional<std::filesystem::path> output_dir;
    std::optional<Index> workers;
};

struct PointResult {
    SweepPoint point;
    bool ok = false;
    Error::Category error_category = Error::Category::numerical;
    std::string error;
    Trajectory trajectory;
    KfRun run;
    double condition = kInfinity;
    double limiting_trace = std::numeric_limits<double>::quiet_NaN();
    double steady_mse = std::numeric_limits<double>::quiet_NaN();
    std::vector<std::filesystem::path> files;  ///< relative to the output root
};

inline PlanResult plan_for(const Scenario& sc, const ExperimentConfig& cfg) {
    if (!cfg.mode.mobile) {
        return plan(sc.real, *sc.geometry, MotionConstraint{kInfinity}, PlanConfig{cfg.sensors, 1, true});
    }
    const Index f = cfg.mode.refine_factor;
    if (f == 1)
        return plan(sc.real, *sc.geometry, MotionConstraint{cfg.mode.speed},
                    PlanConfig{cfg.sensors, cfg.mode.period, cfg.mode.enforce_cycle});
    if (cfg.mode.period % f != 0)
        throw ConfigError("mode: period (" + std::to_string(cfg.mode.period) + ") must be a multiple of refine_factor");
    const Scenario coarse = coarsen(sc, f, cfg);
    const PlanResult coarse_plan =
        plan(coarse.real, *sc.geometry, MotionConstraint{cfg.mode.speed * static_cast<double>(f)},
             PlanConfig{cfg.sensors, cfg.mode.period / f, true});
    return multiscale_refine(sc.real, coarse_plan.trajectory, f, *sc.geometry, MotionConstraint{cfg.mode.speed},
                             PlanConfig{cfg.sensors, cfg.mode.period, true});
}

inline double mean_tail(const std::vector<double>& v, std::size_t from) {
    if (from >= v.size()) return std::numeric_limits<double>::quiet_NaN();
    double s = 0.0;
    for (std::size_t i = from; i < v.size(); ++i) s += v[i];
    return s / static_cast<double>(v.size() - from);
}

inline void run_point(PointResult& res, ScenarioCache& cache, const std::filesystem::path& root,
                      const std::filesystem::path& rel_dir, const RunOptions& opts) {
    const ExperimentConfig& cfg = res.point.cfg;
    auto emit = [&](const std::string& name, const std::string& content) {
        io::write_atomic(root / rel_dir / name, content);
        res.files.push_back(rel_dir / name);
    };

    const auto sc = cache.get(cfg, cfg.sampling_dt);
    json condition = {{"point", res.point.id}, {"key", res.point.key}};
    std::optional<PlanResult> planned;
    if (opts.trajectory) {
        res.trajectory = *opts.trajectory;
        res.trajectory.check_range(sc->real.n());
    } else {
        planned = plan_for(*sc, cfg);
        res.trajectory = planned->trajectory;
        condition["gappy_fallbacks"] = planned->gappy_fallbacks;
        condition["events"] = planned->events;
    }
    if (cfg.mode.mobile && !opts.trajectory) {
        if (auto v = find_motion_violation(res.trajectory, *sc->geometry, MotionConstraint{cfg.mode.speed}))
            throw Error(Error::Category::infeasible, "planned trajectory violates motion constraint: " + *v);
    }

    const auto report = is_observable(sc->real, res.trajectory);
    res.condition = condition_number(assemble(sc->real, res.trajectory));
    condition["model_rank"] = sc->real.m();
    condition["period"] = res.trajectory.period();
    condition["sensors"] = res.trajectory.sensors();
    condition["condition_number"] = io::number(res.condition);
    condition["observable"] = report.observable;
    condition["rank"] = report.rank;
    condition["singular_values"] = std::vector<double>(report.singular_values.begin(), report.singular_values.end());

    json traj_json = io::trajectory_to_json(res.trajectory);
    traj_json["grid"] = sc->grid;
    emit("trajectory.json", traj_json.dump(2) + "\n");
    emit("trajectory.csv", io::trajectory_csv(res.trajectory, *sc->geometry));
    if (opts.plan_report && planned) emit("plan_report.csv", io::plan_report_csv(*planned));

    if (!opts.plan_only) {
        FilterOptions fo;
        fo.initial_variance = cfg.initial_variance;
        fo.seed = res.point.seed;
        fo.dt = cfg.sampling_dt;
        std::variant<SimulatedTruth, DataTruth> truth;
        if (sc->data) {
            const Index available = sc->data->steps();
            fo.steps = cfg.steps.value_or(available);
            if (fo.steps > available)
                throw ConfigError("steps (" + std::to_string(fo.steps) + ") exceeds the " + std::to_string(available) +
                                  " available snapshots");
            truth = DataTruth{sc->data.get(), true};
        } else {
            fo.steps = *cfg.steps;
            std::mt19937_64 rng(res.point.seed ^ 0x5851f42d4c957f2dULL);
            std::normal_distribution<double> normal(0.0, 1.0);
            VectorXd c0(sc->real.m());
            for (Index i = 0; i < c0.size(); ++i) c0(i) = std::sqrt(cfg.initial_variance) * normal(rng);
            truth = SimulatedTruth{c0};
        }
        res.run = run_filter(sc->real, res.trajectory, truth, cfg.noise, fo);
        const auto n = res.run.trace_series.size();
        const auto l = static_cast<std::size_t>(res.trajectory.period());
        res.limiting_trace = mean_tail(res.run.trace_series, n > l ? n - l : 0);
        res.steady_mse = mean_tail(res.run.recon_error_series, n / 2);
        condition["limiting_trace"] = io::number(res.limiting_trace);
        condition["steady_mse"] = io::number(res.steady_mse);

        if (res.trajectory.period() == 1 && report.observable) {
            const MatrixXd C = assemble(sc->real, res.trajectory).matrix;
            const MatrixXd Q = cfg.noise.q * MatrixXd::Identity(sc->real.m(), sc->real.m());
            const MatrixXd R = cfg.noise.rho * MatrixXd::Identity(C.rows(), C.rows());
            try {
                const auto dare = dare_iterate(sc->real.dynamics, C, Q, R);
                condition["dare_trace"] = dare.sigma.trace();
            } catch (const NonConvergenceError&) {
                condition["dare_trace"] = nullptr;
            }
            condition["trace_bounds"] = io::bounds_to_json(dare_trace_bounds(sc->real.dynamics, C, Q, R));
        }
        emit("kf_run.csv", io::kf_run_csv(res.run));
    }
    emit("condition.json", condition.dump(2) + "\n");
    res.ok = true;
}

// ---- experiments -----------------------------------------------------------------------

struct RunManifest {
    json document;
    std::filesystem::path root;
    std::vector<PointResult> points;

    bool all_ok() const {
        for (const auto& p : points)
            if (!p.ok) return false;
        return true;
    }
};

inline Index effective_workers(const ExperimentConfig& cfg, const RunOptions& opts) {
    if (opts.workers) return std::max<Index>(1, *opts.workers);
    if (const char* env = std::getenv("MOBSENSE_WORKERS")) {
        try {
            return std::max<Index>(1, std::stol(env));
        } catch (const std::exception&) {
            throw ConfigError(std::string("MOBSENSE_WORKERS is not an integer: ") + env);
        }
    }
    return cfg.workers;
}

inline std::filesystem::path effective_output(const ExperimentConfig& cfg, const RunOptions& opts) {
    if (opts.output_dir) return *opts.output_dir;
    if (const char* env = std::getenv("MOBSENSE_OUTPUT_DIR"); env && *env) return env;
    return cfg.outputs;
}

inline json file_entry(const std::filesystem::path& root, const std::filesystem::path& rel) {
    const std::string bytes = io::read_text(root / rel);
    return {{"path", rel.generic_string()}, {"sha256", sha256_hex(bytes)}, {"bytes", bytes.size()}};
}

inline std::string category_name(Error::Category c) {
    switch (c) {
        case Error::Category::argument: return "argument";
        case Error::Category::numerical: return "numerical";
        case Error::Category::infeasible: return "infeasible";
        case Error::Category::format: return "format";
        default: return "config";
    }
}

/// Runs every sweep point (a config without a sweep is a single point) and writes the manifest.
inline RunManifest run_experiment(const ExperimentConfig& cfg, const RunOptions& opts = {}) {
    const auto started = std::chrono::steady_clock::now();
    RunManifest manifest;
    manifest.root = effective_output(cfg, opts);
    std::filesystem::create_directories(manifest.root);
    const bool single = !cfg.sweep;

    std::vector<PointResult> results;
    for (auto& p : expand_sweep(cfg)) results.push_back(PointResult{std::move(p)});

    ScenarioCache cache;
    std::atomic<std::size_t> next{0};
    auto worker = [&] {
        for (std::size_t i = next++; i < results.size(); i = next++) {
            auto& res = results[i];
            const std::filesystem::path rel = single ? std::filesystem::path() : std::filesystem::path("points") / res.point.id;
            try {
                run_point(res, cache, manifest.root, rel, opts);
            } catch (const Error& e) {
                res.ok = false;
                res.error_category = e.category();
                res.error = e.what();
            } catch (const std::exception& e) {
                res.ok = false;
                res.error_category = Error::Category::numerical;
                res.error = e.what();
            }
        }
    };
    const Index width = std::min<Index>(effective_workers(cfg, opts), static_cast<Index>(results.size()));
    if (width <= 1) {
        worker();
    } else {
        std::vector<std::thread> pool;
        for (Index w = 0; w < width; ++w) pool.emplace_back(worker);
        for (auto& t : pool) t.join();
    }

    std::vector<std::filesystem::path> files;
    for (const auto& r : results) files.insert(files.end(), r.files.begin(), r.files.end());

    if (!single) {
        std::string summary = "point,key,status,sensors,speed,period,sampling_dt,q,rho,seed,condition_number,limiting_trace,steady_mse\n";
        std::string sweep = "point,sensors,speed,period,sampling_dt,q,rho,step,time,trace_sigma,recon_mse\n";
        for (const auto& r : results) {
            const auto& c = r.point.cfg;
            const std::string axes = std::to_string(c.sensors) + "," + (c.mode.mobile ? io::fmt(c.mode.speed) : "0") +
                                     "," + std::to_string(c.mode.mobile ? c.mode.period : 1) + "," +
                                     io::fmt(c.sampling_dt) + "," + io::fmt(c.noise.q) + "," + io::fmt(c.noise.rho);
            summary += r.point.id + ",\"" + r.point.key + "\"," + (r.ok ? "ok" : "error") + "," + axes + "," +
                       std::to_string(r.point.seed) + "," + io::fmt(r.condition) + "," + io::fmt(r.limiting_trace) +
                       "," + io::fmt(r.steady_mse) + "\n";
            if (!r.ok || opts.plan_only) continue;
            for (Index t = 0; t < r.run.steps(); ++t) {
                const auto i = static_cast<std::size_t>(t);
                sweep += r.point.id + "," + axes + "," + std::to_string(t) + "," +
                         io::fmt(static_cast<double>(t) * r.run.dt) + "," + io::fmt(r.run.trace_series[i]) + "," +
                         io::fmt(r.run.recon_error_series[i]) + "\n";
            }
        }
        io::write_atomic(manifest.root / "sweep_summary.csv", summary);
        files.emplace_back("sweep_summary.csv");
        if (!opts.plan_only) {
            io::write_atomic(manifest.root / "sweep.csv", sweep);
            files.emplace_back("sweep.csv");
        }
    }

    json runs = json::array(), seeds = json::array(), file_list = json::array();
    for (const auto& r : results) {
        json entry = {{"point", r.point.id}, {"key", r.point.key}, {"status", r.ok ? "ok" : "error"}};
        if (!r.ok) entry["error"] = {{"category", category_name(r.error_category)}, {"message", r.error}};
        runs.push_back(entry);
        seeds.push_back({{"point", r.point.id}, {"key", r.point.key}, {"seed", r.point.seed}});
    }
    for (const auto& f : files) file_list.push_back(file_entry(manifest.root, f));

    std::uint64_t scenario_seed = 0;
    switch (cfg.scenario.kind) {
        case ScenarioConfig::Kind::torus: scenario_seed = cfg.scenario.torus.seed; break;
        case ScenarioConfig::Kind::ks: scenario_seed = cfg.scenario.ks.seed; break;
        default: break;
    }
    const double wall = std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
    manifest.document = {{"tool", "mobsense"},
                         {"version", MOBSENSE_VERSION},
                         {"config", resolved_config(cfg)},
                         {"seeds", {{"base", cfg.seed}, {"scenario", scenario_seed}, {"points", seeds}}},
                         {"wall_clock_seconds", wall},
                         {"runs", runs},
                         {"files", file_list}};
    io::write_atomic(manifest.root / "manifest.json", manifest.document.dump(2) + "\n");
    manifest.points = std::move(results);
    return manifest;
}

/// Re-hashes every file listed in `dir`/manifest.json. Returns the mismatches.
inline std::vector<std::string> verify_manifest(const std::filesystem::path& dir) {
    json doc;
    try {
        doc = json::parse(io::read_text(dir / "manifest.json"));
    } catch (const json::exception& e) {
        throw FormatError(std::string("manifest: ") + e.what());
    }
    std::vector<std::string> problems;
    for (const auto& f : doc.at("files")) {
        const auto rel = f.at("path").get<std::string>();
        if (!std::filesystem::exists(dir / rel)) {
            problems.push_back(rel + ": missing");
            continue;
        }
        if (sha256_hex(io::read_text(dir / rel)) != f.at("sha256").get<std::string>())
            problems.push_back(rel + ": hash mismatch");
    }
    return problems;
}

}  // namespace mobsense::cli
