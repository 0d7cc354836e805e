#pragma once
// Serialization: ReducedModel JSON, trajectories, filter runs, plan reports,
// and atomic file writes.

#include "mobsense/errors.hpp"
#include "mobsense/geometry.hpp"
#include "mobsense/kalman.hpp"
#include "mobsense/model.hpp"
#include "mobsense/observability.hpp"
#include "mobsense/planner.hpp"

#include <json.hpp>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

namespace mobsense::io {

using nlohmann::json;

/// Shortest text that reads back to the same double; "inf"/"-inf"/"nan" for non-finite values.
inline std::string fmt(double v) {
    if (std::isnan(v)) return "nan";
    if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
    char buf[32];
    for (int precision = 15; precision <= 17; ++precision) {
        std::snprintf(buf, sizeof buf, "%.*g", precision, v);
        if (std::strtod(buf, nullptr) == v) break;
    }
    return buf;
}

inline double parse_number(const std::string& text) {
    if (text == "inf") return kInfinity;
    if (text == "-inf") return -kInfinity;
    std::size_t used = 0;
    const double v = std::stod(text, &used);
    if (used != text.size()) throw FormatError("not a number: '" + text + "'");
    return v;
}

/// Writes to a sibling temporary file and renames it into place.
inline void write_atomic(const std::filesystem::path& path, const std::string& content) {
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    std::filesystem::path tmp = path;
    tmp += ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw Error(Error::Category::format, "cannot write " + tmp.string());
        out.write(content.data(), static_cast<std::streamsize>(content.size()));
        out.close();
        if (!out) throw Error(Error::Category::format, "write failed: " + tmp.string());
    }
    std::filesystem::rename(tmp, path);
}

inline std::string read_text(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error(Error::Category::format, "cannot open " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

// ---- ReducedModel ------------------------------------------------------------

inline const char* to_string(PairRole role) {
    switch (role) {
        case PairRole::real: return "real";
        case PairRole::lead: return "lead";
        default: return "follow";
    }
}

inline json model_to_json(const ReducedModel& model) {
    json eig = json::array(), modes = json::array(), pairs = json::array();
    for (Index j = 0; j < model.m(); ++j) {
        eig.push_back({model.eigenvalues()(j).real(), model.eigenvalues()(j).imag()});
        const auto tag = model.pair_map()[static_cast<std::size_t>(j)];
        pairs.push_back({{"role", to_string(tag.role)}, {"partner", tag.partner}});
    }
    for (Index i = 0; i < model.n(); ++i)
        for (Index j = 0; j < model.m(); ++j) modes.push_back({model.modes()(i, j).real(), model.modes()(i, j).imag()});
    return {{"format", "mobsense-reduced-model"}, {"version", 1}, {"n", model.n()}, {"m", model.m()},
            {"eigenvalues", eig}, {"modes", modes}, {"pair_map", pairs}};
}

inline ReducedModel model_from_json(const json& j) {
    try {
        if (j.at("format") != "mobsense-reduced-model") throw FormatError("model: unexpected format tag");
        const Index n = j.at("n").get<Index>(), m = j.at("m").get<Index>();
        const auto& eig = j.at("eigenvalues");
        const auto& modes = j.at("modes");
        const auto& pairs = j.at("pair_map");
        if (n < 1 || m < 1 || static_cast<Index>(eig.size()) != m || static_cast<Index>(modes.size()) != n * m ||
            static_cast<Index>(pairs.size()) != m)
            throw FormatError("model: array sizes do not match n and m");
        VectorXcd lambda(m);
        MatrixXcd psi(n, m);
        std::vector<PairTag> tags(static_cast<std::size_t>(m));
        for (Index c = 0; c < m; ++c) {
            lambda(c) = Complex(eig[static_cast<std::size_t>(c)].at(0).get<double>(), eig[static_cast<std::size_t>(c)].at(1).get<double>());
            const auto& p = pairs[static_cast<std::size_t>(c)];
            const std::string role = p.at("role").get<std::string>();
            auto& tag = tags[static_cast<std::size_t>(c)];
            if (role == "real") tag.role = PairRole::real;
            else if (role == "lead") tag.role = PairRole::lead;
            else if (role == "follow") tag.role = PairRole::follow;
            else throw FormatError("model: unknown pair role '" + role + "'");
            tag.partner = p.at("partner").get<Index>();
        }
        for (Index r = 0; r < n; ++r)
            for (Index c = 0; c < m; ++c) {
                const auto& e = modes[static_cast<std::size_t>(r * m + c)];
                psi(r, c) = Complex(e.at(0).get<double>(), e.at(1).get<double>());
            }
        return ReducedModel(std::move(lambda), std::move(psi), std::move(tags));
    } catch (const json::exception& e) {
        throw FormatError(std::string("model: ") + e.what());
    }
}

// ---- Trajectory ----------------------------------------------------------------

inline json trajectory_to_json(const Trajectory& traj) {
    json steps = json::array();
    for (Index t = 0; t < traj.period(); ++t) {
        const auto s = traj.step(t);
        steps.push_back(std::vector<Index>(s.begin(), s.end()));
    }
    return {{"period", traj.period()}, {"sensors", traj.sensors()}, {"locations", steps}};
}

inline Trajectory trajectory_from_json(const json& j) {
    try {
        std::vector<std::vector<Index>> steps = j.at("locations").get<std::vector<std::vector<Index>>>();
        Trajectory traj = Trajectory::from_steps(steps);
        if (j.contains("period") && j.at("period").get<Index>() != traj.period())
            throw FormatError("trajectory: period does not match locations");
        if (j.contains("sensors") && j.at("sensors").get<Index>() != traj.sensors())
            throw FormatError("trajectory: sensors does not match locations");
        return traj;
    } catch (const json::exception& e) {
        throw FormatError(std::string("trajectory: ") + e.what());
    } catch (const ArgumentError& e) {
        throw FormatError(std::string(e.what()));
    }
}

/// Columns: step, sensor, index, row, col (grid coordinates from the geometry).
inline std::string trajectory_csv(const Trajectory& traj, const Geometry& geom) {
    std::string out = "step,sensor,index,row,col\n";
    for (Index t = 0; t < traj.period(); ++t)
        for (Index q = 0; q < traj.sensors(); ++q) {
            const Index loc = traj.location(t, q);
            const auto rc = geom.coords(loc);
            out += std::to_string(t) + "," + std::to_string(q) + "," + std::to_string(loc) + "," + fmt(rc[0]) + "," +
                   fmt(rc[1]) + "\n";
        }
    return out;
}

// ---- Filter runs and reports -----------------------------------------------------

/// Columns: step, time (step * dt), trace_sigma (prior covariance trace), recon_mse (per-cell squared error).
inline std::string kf_run_csv(const KfRun& run) {
    std::string out = "step,time,trace_sigma,recon_mse\n";
    for (Index t = 0; t < run.steps(); ++t) {
        const auto i = static_cast<std::size_t>(t);
        out += std::to_string(t) + "," + fmt(static_cast<double>(t) * run.dt) + "," + fmt(run.trace_series[i]) + "," +
               fmt(run.recon_error_series[i]) + "\n";
    }
    return out;
}

/// Columns: step, sensor, location, score, candidates, running_condition, rule, pinned, relaxed.
inline std::string plan_report_csv(const PlanResult& result) {
    std::string out = "step,sensor,location,score,candidates,running_condition,rule,pinned,relaxed\n";
    for (const auto& r : result.report)
        out += std::to_string(r.step) + "," + std::to_string(r.sensor) + "," + std::to_string(r.location) + "," +
               fmt(r.score) + "," + std::to_string(r.candidates) + "," + fmt(r.running_condition) + "," +
               to_string(r.rule) + "," + (r.pinned ? "1" : "0") + "," + (r.relaxed ? "1" : "0") + "\n";
    return out;
}

inline json bounds_to_json(const DareBounds& b) {
    return {{"lower", b.lower_applicable ? json(b.lower) : json(nullptr)},
            {"upper", b.upper_applicable ? json(b.upper) : json(nullptr)},
            {"a1", b.a1},
            {"a2", b.a2},
            {"lower_applicable", b.lower_applicable},
            {"upper_applicable", b.upper_applicable}};
}

/// JSON cannot hold inf/nan; they are written as strings.
inline json number(double v) { return std::isfinite(v) ? json(v) : json(fmt(v)); }

}  // namespace mobsense::io
