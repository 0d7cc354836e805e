#pragma once
// Standalone SVG line plots and trajectory overlays rendered from run outputs.

#include "mobsense/cli/runner.hpp"
#include "mobsense/errors.hpp"
#include "mobsense/io.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <map>
#include <sstream>
#include <string>
#include <vector>

namespace mobsense::cli {

class CsvTable {
public:
    static CsvTable parse(const std::string& text, const std::string& name) {
        CsvTable t;
        t.name_ = name;
        std::istringstream in(text);
        std::string line;
        if (!std::getline(in, line)) throw FormatError(name + ": empty file");
        t.header_ = split(line);
        while (std::getline(in, line))
            if (!line.empty()) t.rows_.push_back(split(line));
        return t;
    }

    std::size_t column(const std::string& col) const {
        const auto it = std::find(header_.begin(), header_.end(), col);
        if (it == header_.end()) throw FormatError(name_ + ": schema error, missing column '" + col + "'");
        return static_cast<std::size_t>(it - header_.begin());
    }

    std::vector<double> numbers(const std::string& col) const {
        const auto c = column(col);
        std::vector<double> out;
        for (const auto& r : rows_) out.push_back(c < r.size() ? parse(r[c]) : std::numeric_limits<double>::quiet_NaN());
        return out;
    }

    std::vector<std::string> strings(const std::string& col) const {
        const auto c = column(col);
        std::vector<std::string> out;
        for (const auto& r : rows_) out.push_back(c < r.size() ? r[c] : std::string());
        return out;
    }

    std::size_t size() const { return rows_.size(); }

private:
    static std::vector<std::string> split(const std::string& line) {
        std::vector<std::string> out;
        std::string cur;
        bool quoted = false;
        for (char ch : line) {
            if (ch == '"') quoted = !quoted;
            else if (ch == ',' && !quoted) {
                out.push_back(cur);
                cur.clear();
            } else cur.push_back(ch);
        }
        out.push_back(cur);
        return out;
    }

    static double parse(const std::string& s) {
        try {
            return io::parse_number(s);
        } catch (const std::exception&) {
            return std::numeric_limits<double>::quiet_NaN();
        }
    }

    std::string name_;
    std::vector<std::string> header_;
    std::vector<std::vector<std::string>> rows_;
};

struct Series {
    std::string label;
    std::vector<double> x, y;
};

struct Axes {
    std::string title, xlabel, ylabel;
    bool logx = false, logy = false;
};

namespace detail {

inline const char* palette(std::size_t i) {
    static const char* colors[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#17becf", "#8c564b", "#e377c2"};
    return colors[i % 8];
}

inline std::string num(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.2f", v);
    return buf;
}

inline std::string tick_label(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%g", v);
    return buf;
}

inline std::string escape(const std::string& s) {
    std::string out;
    for (char c : s) {
        if (c == '<') out += "&lt;";
        else if (c == '>') out += "&gt;";
        else if (c == '&') out += "&amp;";
        else out.push_back(c);
    }
    return out;
}

inline std::vector<double> ticks(double lo, double hi, bool log) {
    std::vector<double> out;
    if (log) {
        for (double e = std::floor(lo); e <= std::ceil(hi) + 1e-9; e += 1.0)
            if (e >= lo - 1e-9 && e <= hi + 1e-9) out.push_back(e);
        return out;
    }
    const double span = hi - lo;
    const double raw = span / 5.0;
    const double mag = std::pow(10.0, std::floor(std::log10(raw)));
    double step = mag;
    for (double f : {1.0, 2.0, 5.0, 10.0})
        if (raw <= f * mag) {
            step = f * mag;
            break;
        }
    for (double v = std::ceil(lo / step) * step; v <= hi + 1e-9 * span; v += step) out.push_back(v);
    return out;
}

}  // namespace detail

inline std::string line_plot_svg(const Axes& ax, const std::vector<Series>& series) {
    const double W = 640, H = 420, L = 80, R = 150, T = 40, B = 60;
    auto tx = [&](double v) { return ax.logx ? std::log10(v) : v; };
    auto ty = [&](double v) { return ax.logy ? std::log10(v) : v; };
    double x0 = INFINITY, x1 = -INFINITY, y0 = INFINITY, y1 = -INFINITY;
    for (const auto& s : series)
        for (std::size_t i = 0; i < s.x.size(); ++i) {
            const double a = tx(s.x[i]), b = ty(s.y[i]);
            if (!std::isfinite(a) || !std::isfinite(b)) continue;
            x0 = std::min(x0, a), x1 = std::max(x1, a), y0 = std::min(y0, b), y1 = std::max(y1, b);
        }
    if (!std::isfinite(x0)) x0 = 0, x1 = 1, y0 = 0, y1 = 1;
    if (x1 - x0 < 1e-12) x0 -= 0.5, x1 += 0.5;
    if (y1 - y0 < 1e-12) y0 -= 0.5, y1 += 0.5;
    const double pad = 0.05 * (y1 - y0);
    y0 -= pad, y1 += pad;
    auto px = [&](double a) { return L + (a - x0) / (x1 - x0) * (W - L - R); };
    auto py = [&](double b) { return H - B - (b - y0) / (y1 - y0) * (H - T - B); };

    std::ostringstream svg;
    svg << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << W << "\" height=\"" << H
        << "\" font-family=\"sans-serif\" font-size=\"12\">\n";
    svg << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
    svg << "<text x=\"" << W / 2 << "\" y=\"24\" text-anchor=\"middle\" font-size=\"14\">" << detail::escape(ax.title)
        << "</text>\n";
    svg << "<rect x=\"" << L << "\" y=\"" << T << "\" width=\"" << W - L - R << "\" height=\"" << H - T - B
        << "\" fill=\"none\" stroke=\"black\"/>\n";
    for (double t : detail::ticks(x0, x1, ax.logx)) {
        const double p = px(t);
        svg << "<line x1=\"" << detail::num(p) << "\" y1=\"" << H - B << "\" x2=\"" << detail::num(p) << "\" y2=\""
            << H - B + 5 << "\" stroke=\"black\"/>";
        svg << "<text x=\"" << detail::num(p) << "\" y=\"" << H - B + 18 << "\" text-anchor=\"middle\">"
            << detail::tick_label(ax.logx ? std::pow(10.0, t) : t) << "</text>\n";
    }
    for (double t : detail::ticks(y0, y1, ax.logy)) {
        const double p = py(t);
        svg << "<line x1=\"" << L - 5 << "\" y1=\"" << detail::num(p) << "\" x2=\"" << L << "\" y2=\"" << detail::num(p)
            << "\" stroke=\"black\"/>";
        svg << "<text x=\"" << L - 8 << "\" y=\"" << detail::num(p + 4) << "\" text-anchor=\"end\">"
            << detail::tick_label(ax.logy ? std::pow(10.0, t) : t) << "</text>\n";
    }
    svg << "<text x=\"" << (L + W - R) / 2 << "\" y=\"" << H - 15 << "\" text-anchor=\"middle\">"
        << detail::escape(ax.xlabel) << "</text>\n";
    svg << "<text transform=\"translate(18," << (T + H - B) / 2 << ") rotate(-90)\" text-anchor=\"middle\">"
        << detail::escape(ax.ylabel) << "</text>\n";
    for (std::size_t k = 0; k < series.size(); ++k) {
        const auto& s = series[k];
        std::string pts;
        for (std::size_t i = 0; i < s.x.size(); ++i) {
            const double a = tx(s.x[i]), b = ty(s.y[i]);
            if (!std::isfinite(a) || !std::isfinite(b)) continue;
            pts += detail::num(px(a)) + "," + detail::num(py(b)) + " ";
        }
        svg << "<polyline fill=\"none\" stroke=\"" << detail::palette(k) << "\" stroke-width=\"1.5\" points=\"" << pts
            << "\"/>\n";
        if (s.x.size() <= 20)
            for (std::size_t i = 0; i < s.x.size(); ++i) {
                const double a = tx(s.x[i]), b = ty(s.y[i]);
                if (std::isfinite(a) && std::isfinite(b))
                    svg << "<circle cx=\"" << detail::num(px(a)) << "\" cy=\"" << detail::num(py(b))
                        << "\" r=\"3\" fill=\"" << detail::palette(k) << "\"/>\n";
            }
        const double ly = T + 16 * static_cast<double>(k) + 8;
        svg << "<line x1=\"" << W - R + 10 << "\" y1=\"" << ly << "\" x2=\"" << W - R + 30 << "\" y2=\"" << ly
            << "\" stroke=\"" << detail::palette(k) << "\" stroke-width=\"2\"/>";
        svg << "<text x=\"" << W - R + 34 << "\" y=\"" << ly + 4 << "\">" << detail::escape(s.label) << "</text>\n";
    }
    svg << "</svg>\n";
    return svg.str();
}

/// Error-vs-time plot of a kf_run.csv.
inline std::string error_vs_time_svg(const std::string& csv, const std::string& title) {
    const auto t = CsvTable::parse(csv, "kf_run.csv");
    const auto time = t.numbers("time");
    return line_plot_svg({title, "time", "error (log scale)", false, true},
                         {{"recon_mse", time, t.numbers("recon_mse")}, {"trace_sigma", time, t.numbers("trace_sigma")}});
}

/// Steady error against sampling rate (1 / sampling_dt) on log axes, one series per remaining axis setting.
inline std::string error_vs_rate_svg(const std::string& summary_csv, const std::string& title) {
    const auto t = CsvTable::parse(summary_csv, "sweep_summary.csv");
    const auto dt = t.numbers("sampling_dt");
    const auto mse = t.numbers("steady_mse");
    const auto sensors = t.strings("sensors"), speed = t.strings("speed"), period = t.strings("period");
    const auto q = t.strings("q"), rho = t.strings("rho");
    std::map<std::string, Series> groups;
    for (std::size_t i = 0; i < t.size(); ++i) {
        std::string label = "k=" + sensors[i] + (speed[i] == "0" ? " fixed" : " v=" + speed[i] + " l=" + period[i]);
        auto& s = groups[label];
        s.label = label;
        s.x.push_back(1.0 / dt[i]);
        s.y.push_back(mse[i]);
    }
    std::vector<Series> all;
    for (auto& [_, s] : groups) {
        std::vector<std::size_t> order(s.x.size());
        for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
        std::sort(order.begin(), order.end(), [&](auto a, auto b) { return s.x[a] < s.x[b]; });
        Series sorted{s.label, {}, {}};
        for (auto i : order) sorted.x.push_back(s.x[i]), sorted.y.push_back(s.y[i]);
        all.push_back(std::move(sorted));
    }
    return line_plot_svg({title, "sampling rate (1/dt)", "steady reconstruction MSE", true, true}, all);
}

/// Grid (with masked cells shaded) and each sensor's cycle drawn with per-step arrows.
inline std::string trajectory_svg(const json& traj_json, const std::string& title) {
    const Trajectory traj = io::trajectory_from_json(traj_json);
    if (!traj_json.contains("grid")) throw FormatError("trajectory.json: schema error, missing 'grid'");
    const auto& grid = traj_json.at("grid");
    const Index rows = grid.at("rows").get<Index>(), cols = grid.at("cols").get<Index>();
    std::vector<Index> cells;
    if (grid.contains("cells")) cells = grid.at("cells").get<std::vector<Index>>();
    auto cell_of = [&](Index state) { return cells.empty() ? state : cells.at(static_cast<std::size_t>(state)); };

    const double cell = std::max(2.0, std::min(24.0, 560.0 / static_cast<double>(std::max(rows, cols))));
    const double W = cell * static_cast<double>(cols) + 40, H = cell * static_cast<double>(rows) + 70;
    auto cx = [&](Index c) { return 20 + (static_cast<double>(c) + 0.5) * cell; };
    auto cy = [&](Index r) { return 50 + (static_cast<double>(r) + 0.5) * cell; };

    std::ostringstream svg;
    svg << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << detail::num(W) << "\" height=\"" << detail::num(H)
        << "\" font-family=\"sans-serif\" font-size=\"12\">\n";
    svg << "<defs><marker id=\"arrow\" viewBox=\"0 0 10 10\" refX=\"9\" refY=\"5\" markerWidth=\"6\" markerHeight=\"6\" "
           "orient=\"auto-start-reverse\"><path d=\"M 0 0 L 10 5 L 0 10 z\" fill=\"context-stroke\"/></marker></defs>\n";
    svg << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
    svg << "<text x=\"" << detail::num(W / 2) << "\" y=\"24\" text-anchor=\"middle\" font-size=\"14\">"
        << detail::escape(title) << "</text>\n";
    svg << "<rect x=\"20\" y=\"50\" width=\"" << detail::num(cell * static_cast<double>(cols)) << "\" height=\""
        << detail::num(cell * static_cast<double>(rows)) << "\" fill=\"#eef4fb\" stroke=\"#888\"/>\n";
    if (!cells.empty()) {
        std::vector<char> valid(static_cast<std::size_t>(rows * cols), 0);
        for (Index c : cells) valid[static_cast<std::size_t>(c)] = 1;
        for (Index c = 0; c < rows * cols; ++c)
            if (!valid[static_cast<std::size_t>(c)])
                svg << "<rect x=\"" << detail::num(cx(c % cols) - cell / 2) << "\" y=\"" << detail::num(cy(c / cols) - cell / 2)
                    << "\" width=\"" << detail::num(cell) << "\" height=\"" << detail::num(cell) << "\" fill=\"#b5a48b\"/>\n";
    }
    for (Index q = 0; q < traj.sensors(); ++q) {
        const char* color = detail::palette(static_cast<std::size_t>(q));
        for (Index t = 0; t < traj.period(); ++t) {
            const Index a = cell_of(traj.location(t, q)), b = cell_of(traj.location((t + 1) % traj.period(), q));
            svg << "<circle cx=\"" << detail::num(cx(a % cols)) << "\" cy=\"" << detail::num(cy(a / cols)) << "\" r=\""
                << detail::num(std::max(1.5, cell / 4)) << "\" fill=\"" << color << "\"/>\n";
            if (a == b || traj.period() == 1) continue;
            svg << "<line x1=\"" << detail::num(cx(a % cols)) << "\" y1=\"" << detail::num(cy(a / cols)) << "\" x2=\""
                << detail::num(cx(b % cols)) << "\" y2=\"" << detail::num(cy(b / cols)) << "\" stroke=\"" << color
                << "\" stroke-width=\"1.2\" marker-end=\"url(#arrow)\"/>\n";
        }
    }
    svg << "</svg>\n";
    return svg.str();
}

/// Renders every plot the run directory supports; returns the written files.
inline std::vector<std::filesystem::path> emit_plots(const std::filesystem::path& dir) {
    json doc;
    try {
        doc = json::parse(io::read_text(dir / "manifest.json"));
    } catch (const json::exception& e) {
        throw FormatError(std::string("manifest: ") + e.what());
    }
    std::vector<std::filesystem::path> written;
    auto put = [&](const std::filesystem::path& rel, const std::string& svg) {
        io::write_atomic(dir / rel, svg);
        written.push_back(rel);
    };
    for (const auto& f : doc.at("files")) {
        const std::filesystem::path rel = f.at("path").get<std::string>();
        const std::string label = rel.parent_path().empty() ? doc.at("config").value("name", "run")
                                                            : rel.parent_path().filename().string();
        if (rel.filename() == "kf_run.csv")
            put(rel.parent_path() / "error_vs_time.svg", error_vs_time_svg(io::read_text(dir / rel), "Estimation error, " + label));
        else if (rel.filename() == "trajectory.json")
            put(rel.parent_path() / "trajectory.svg", trajectory_svg(json::parse(io::read_text(dir / rel)), "Trajectory, " + label));
        else if (rel == "sweep_summary.csv") {
            const auto t = CsvTable::parse(io::read_text(dir / rel), "sweep_summary.csv");
            auto dts = t.numbers("sampling_dt");
            std::sort(dts.begin(), dts.end());
            if (std::unique(dts.begin(), dts.end()) - dts.begin() > 1)
                put("error_vs_sampling_rate.svg", error_vs_rate_svg(io::read_text(dir / rel), "Steady error vs sampling rate"));
        }
    }
    return written;
}

}  // namespace mobsense::cli
