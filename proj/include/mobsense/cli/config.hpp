#pragma once
// Experiment configuration: a JSON tree parsed in strict mode (unknown keys are errors).

#include "mobsense/errors.hpp"
#include "mobsense/io.hpp"
#include "mobsense/scenarios/gridded.hpp"
#include "mobsense/scenarios/ks.hpp"
#include "mobsense/scenarios/torus.hpp"

#include <json.hpp>

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <set>
#include <string>
#include <variant>
#include <vector>

namespace mobsense::cli {

using nlohmann::json;

struct GriddedSource {
    std::filesystem::path path;
    GridFormat format = GridFormat::binary_grid;
    bool wrap_longitude = true;
};

struct ScenarioConfig {
    enum class Kind { torus, ks, gridded } kind = Kind::torus;
    TorusSpec torus;
    KsSpec ks;
    GriddedSource gridded;
    Index train_steps = 0;  ///< torus + dmd: length of the simulated training record (0 = steps)
};

struct ModelConfig {
    bool dmd = false;
    Index rank = 0;
};

struct ModeConfig {
    bool mobile = false;
    double speed = kInfinity;
    Index period = 1;
    bool enforce_cycle = true;
    Index refine_factor = 1;  ///< > 1: plan at sampling_dt * factor and refine to sampling_dt
};

/// Values one sweep point varies. Unset axes keep the base configuration.
struct SweepAxes {
    std::vector<Index> sensors;
    std::vector<double> speed;
    std::vector<Index> period;
    std::vector<double> sampling_dt;
    std::vector<double> q;
    std::vector<double> rho;

    bool empty() const {
        return sensors.empty() && speed.empty() && period.empty() && sampling_dt.empty() && q.empty() && rho.empty();
    }
};

struct ExperimentConfig {
    std::string name = "experiment";
    ScenarioConfig scenario;
    ModelConfig model;
    Index sensors = 1;
    ModeConfig mode;
    double sampling_dt = 0.1;
    NoiseSpec noise{1e-3, 1e-2};
    std::optional<Index> steps;  ///< filter steps; data scenarios default to the full record
    std::uint64_t seed = 0;
    double initial_variance = 10.0;
    std::filesystem::path outputs = "out";
    std::optional<SweepAxes> sweep;
    Index workers = 1;
    json source;  ///< the document as parsed, with defaults resolved
};

namespace detail {

class Reader {
public:
    Reader(const json& node, std::string where) : node_(node), where_(std::move(where)) {
        if (!node_.is_object()) fail("expected an object");
    }

    Reader(const Reader&) = delete;
    Reader& operator=(const Reader&) = delete;

    /// Rejects keys that were never looked up.
    void finish() const {
        for (const auto& [key, _] : node_.items())
            if (!seen_.count(key)) throw ConfigError(where_ + ": unknown key '" + key + "'");
    }

    bool has(const std::string& key) {
        seen_.insert(key);
        return node_.contains(key);
    }

    const json& at(const std::string& key) {
        if (!has(key)) fail("missing key '" + key + "'");
        return node_.at(key);
    }

    template <typename T>
    T get(const std::string& key, T fallback) {
        if (!has(key)) return fallback;
        return convert<T>(node_.at(key), key);
    }

    template <typename T>
    T require(const std::string& key) {
        return convert<T>(at(key), key);
    }

    template <typename T>
    T convert(const json& v, const std::string& key) const {
        if constexpr (std::is_same_v<T, double>) {
            if (v.is_string() && (v == "inf" || v == "infinity")) return kInfinity;
            if (!v.is_number()) fail("'" + key + "' must be a number");
            return v.get<double>();
        } else if constexpr (std::is_same_v<T, bool>) {
            if (!v.is_boolean()) fail("'" + key + "' must be a boolean");
            return v.get<bool>();
        } else if constexpr (std::is_same_v<T, std::string>) {
            if (!v.is_string()) fail("'" + key + "' must be a string");
            return v.get<std::string>();
        } else if constexpr (std::is_same_v<T, std::uint64_t>) {
            if (!v.is_number_unsigned()) fail("'" + key + "' must be a non-negative integer");
            return v.get<std::uint64_t>();
        } else {
            if (!v.is_number_integer()) fail("'" + key + "' must be an integer");
            return static_cast<T>(v.get<long long>());
        }
    }

    [[noreturn]] void fail(const std::string& what) const { throw ConfigError(where_ + ": " + what); }

    const std::string& where() const { return where_; }

private:
    const json& node_;
    std::string where_;
    std::set<std::string> seen_;
};

template <typename T>
std::vector<T> read_axis(Reader& r, const std::string& key) {
    if (!r.has(key)) return {};
    const json& v = r.at(key);
    if (!v.is_array() || v.empty()) r.fail("sweep axis '" + key + "' must be a non-empty array");
    std::vector<T> out;
    for (const auto& e : v) out.push_back(r.convert<T>(e, key));
    return out;
}

inline std::array<double, 2> read_range(Reader& r, const std::string& key, std::array<double, 2> fallback) {
    if (!r.has(key)) return fallback;
    const json& v = r.at(key);
    if (!v.is_array() || v.size() != 2 || !v[0].is_number() || !v[1].is_number())
        r.fail("'" + key + "' must be a [low, high] pair");
    return {v[0].get<double>(), v[1].get<double>()};
}

inline void parse_scenario(const json& node, ExperimentConfig& cfg, const std::filesystem::path& base_dir) {
    Reader r(node, "scenario");
    const auto kind = r.require<std::string>("kind");
    auto& sc = cfg.scenario;
    if (kind == "torus") {
        sc.kind = ScenarioConfig::Kind::torus;
        auto& t = sc.torus;
        t.rows = r.get<Index>("rows", t.rows);
        t.cols = r.get<Index>("cols", t.cols);
        t.n_fourier = r.get<Index>("n_fourier", t.n_fourier);
        t.n_gauss = r.get<Index>("n_gauss", t.n_gauss);
        t.gauss_width = r.get<double>("gauss_width", t.gauss_width);
        t.freq_range = read_range(r, "freq_range", t.freq_range);
        t.damp_range = read_range(r, "damp_range", t.damp_range);
        t.max_wavenumber = r.get<Index>("max_wavenumber", t.max_wavenumber);
        t.seed = r.get<std::uint64_t>("seed", t.seed);
        sc.train_steps = r.get<Index>("train_steps", 0);
    } else if (kind == "ks") {
        sc.kind = ScenarioConfig::Kind::ks;
        auto& k = sc.ks;
        k.n_grid = r.get<Index>("n_grid", k.n_grid);
        k.domain_length = r.get<double>("domain_length", k.domain_length);
        k.dt_solver = r.get<double>("dt_solver", k.dt_solver);
        k.t_final = r.get<double>("t_final", k.t_final);
        k.t_discard = r.get<double>("t_discard", k.t_discard);
        k.seed = r.get<std::uint64_t>("seed", k.seed);
    } else if (kind == "gridded") {
        sc.kind = ScenarioConfig::Kind::gridded;
        auto& g = sc.gridded;
        g.path = r.require<std::string>("path");
        if (g.path.is_relative()) g.path = base_dir / g.path;
        const auto format = r.get<std::string>("format", "binary_grid");
        if (format == "binary_grid") g.format = GridFormat::binary_grid;
        else if (format == "csv_grid") g.format = GridFormat::csv_grid;
        else r.fail("format must be 'binary_grid' or 'csv_grid'");
        g.wrap_longitude = r.get<bool>("wrap_longitude", true);
        if (!std::filesystem::exists(g.path)) r.fail("data file does not exist: " + g.path.string());
    } else {
        r.fail("kind must be 'torus', 'ks' or 'gridded'");
    }
    r.finish();
}

inline std::string to_string(ScenarioConfig::Kind k) {
    switch (k) {
        case ScenarioConfig::Kind::torus: return "torus";
        case ScenarioConfig::Kind::ks: return "ks";
        default: return "gridded";
    }
}

}  // namespace detail

/// Parses and validates a configuration document. Relative data paths resolve against `base_dir`.
inline ExperimentConfig parse_config(const json& doc, const std::filesystem::path& base_dir = ".") {
    ExperimentConfig cfg;
    {
        detail::Reader r(doc, "config");
        cfg.name = r.get<std::string>("name", cfg.name);
        detail::parse_scenario(r.at("scenario"), cfg, base_dir);

        if (r.has("model")) {
            detail::Reader m(r.at("model"), "model");
            const auto kind = m.require<std::string>("kind");
            if (kind == "known") cfg.model.dmd = false;
            else if (kind == "dmd") {
                cfg.model.dmd = true;
                cfg.model.rank = m.require<Index>("rank");
            } else m.fail("kind must be 'known' or 'dmd'");
            m.finish();
        }

        cfg.sensors = r.get<Index>("sensors", cfg.sensors);
        if (r.has("mode")) {
            detail::Reader m(r.at("mode"), "mode");
            const auto kind = m.require<std::string>("kind");
            if (kind == "stationary") {
                cfg.mode.mobile = false;
            } else if (kind == "mobile") {
                cfg.mode.mobile = true;
                cfg.mode.speed = m.require<double>("speed");
                cfg.mode.period = m.require<Index>("period");
                cfg.mode.enforce_cycle = m.get<bool>("enforce_cycle", true);
                cfg.mode.refine_factor = m.get<Index>("refine_factor", 1);
            } else m.fail("kind must be 'stationary' or 'mobile'");
            m.finish();
        }
        cfg.sampling_dt = r.get<double>("sampling_dt", cfg.sampling_dt);
        if (r.has("noise")) {
            detail::Reader n(r.at("noise"), "noise");
            cfg.noise.q = n.get<double>("q", cfg.noise.q);
            cfg.noise.rho = n.get<double>("rho", cfg.noise.rho);
            n.finish();
        }
        if (r.has("steps")) cfg.steps = r.require<Index>("steps");
        cfg.seed = r.get<std::uint64_t>("seed", cfg.seed);
        cfg.initial_variance = r.get<double>("initial_variance", cfg.initial_variance);
        cfg.outputs = r.get<std::string>("outputs", cfg.outputs.string());
        cfg.workers = r.get<Index>("workers", cfg.workers);
        if (r.has("sweep")) {
            detail::Reader s(r.at("sweep"), "sweep");
            SweepAxes axes;
            axes.sensors = detail::read_axis<Index>(s, "sensors");
            axes.speed = detail::read_axis<double>(s, "speed");
            axes.period = detail::read_axis<Index>(s, "period");
            axes.sampling_dt = detail::read_axis<double>(s, "sampling_dt");
            axes.q = detail::read_axis<double>(s, "q");
            axes.rho = detail::read_axis<double>(s, "rho");
            if (axes.empty()) s.fail("at least one sweep axis is required");
            s.finish();
            cfg.sweep = std::move(axes);
        }
        r.finish();
    }

    auto bad = [](const std::string& what) { throw ConfigError(what); };
    const bool data_scenario = cfg.scenario.kind != ScenarioConfig::Kind::torus;
    if (data_scenario && !cfg.model.dmd) bad("model: '" + detail::to_string(cfg.scenario.kind) + "' scenarios need kind 'dmd'");
    if (cfg.model.dmd && cfg.model.rank < 1) bad("model: rank must be >= 1");
    if (cfg.sensors < 1) bad("sensors must be >= 1");
    if (!(cfg.sampling_dt > 0.0)) bad("sampling_dt must be > 0");
    if (!(cfg.noise.q >= 0.0) || !(cfg.noise.rho > 0.0)) bad("noise: need q >= 0 and rho > 0");
    if (cfg.steps && *cfg.steps < 1) bad("steps must be >= 1");
    if (!cfg.steps && !data_scenario) bad("steps is required for torus scenarios");
    if (!(cfg.initial_variance > 0.0)) bad("initial_variance must be > 0");
    if (cfg.workers < 1) bad("workers must be >= 1");
    if (cfg.mode.mobile) {
        if (!(cfg.mode.speed >= 0.0)) bad("mode: speed must be >= 0");
        if (cfg.mode.period < 1) bad("mode: period must be >= 1");
        if (cfg.mode.refine_factor < 1) bad("mode: refine_factor must be >= 1");
    }
    if (cfg.sweep) {
        const auto& s = *cfg.sweep;
        if (!cfg.mode.mobile && (!s.speed.empty() || !s.period.empty()))
            bad("sweep: speed and period axes need a mobile mode");
        for (auto v : s.sensors)
            if (v < 1) bad("sweep: sensors must be >= 1");
        for (auto v : s.period)
            if (v < 1) bad("sweep: period must be >= 1");
        for (auto v : s.speed)
            if (!(v >= 0.0)) bad("sweep: speed must be >= 0");
        for (auto v : s.sampling_dt)
            if (!(v > 0.0)) bad("sweep: sampling_dt must be > 0");
        for (auto v : s.q)
            if (!(v >= 0.0)) bad("sweep: q must be >= 0");
        for (auto v : s.rho)
            if (!(v > 0.0)) bad("sweep: rho must be > 0");
    }
    try {
        if (cfg.scenario.kind == ScenarioConfig::Kind::torus) {
            TorusSpec t = cfg.scenario.torus;
            t.dt = cfg.sampling_dt;
            t.validate();
        } else if (cfg.scenario.kind == ScenarioConfig::Kind::ks) {
            KsSpec k = cfg.scenario.ks;
            k.validate();
        }
    } catch (const ArgumentError& e) {
        bad(std::string("scenario: ") + e.what());
    }
    cfg.source = doc;
    return cfg;
}

inline ExperimentConfig load_config(const std::filesystem::path& path) {
    json doc;
    try {
        doc = json::parse(io::read_text(path));
    } catch (const json::parse_error& e) {
        throw ConfigError(path.string() + ": " + e.what());
    } catch (const Error& e) {
        throw ConfigError(e.what());
    }
    return parse_config(doc, path.has_parent_path() ? path.parent_path() : std::filesystem::path("."));
}

}  // namespace mobsense::cli
