#include "mobsense/cli/config.hpp"
#include "mobsense/cli/fixtures.hpp"
#include "mobsense/cli/plots.hpp"
#include "mobsense/cli/runner.hpp"

#include <catch_amalgamated.hpp>

#include <cstdlib>
#include <filesystem>
#include <sys/wait.h>

using namespace mobsense;
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

const fs::path kSource = MOBSENSE_SOURCE_DIR;

json torus_doc() {
    return json::parse(R"({
  "name": "tiny_torus",
  "scenario": {"kind": "torus", "rows": 16, "cols": 16, "n_fourier": 1, "n_gauss": 2, "seed": 2},
  "model": {"kind": "known"},
  "sensors": 1,
  "mode": {"kind": "mobile", "speed": 3, "period": 8},
  "sampling_dt": 0.1,
  "noise": {"q": 0.001, "rho": 0.01},
  "steps": 120,
  "seed": 4
})");
}

json ks_doc() {
    return json::parse(R"({
  "name": "tiny_ks",
  "scenario": {"kind": "ks", "n_grid": 64, "domain_length": 22, "dt_solver": 0.02, "t_final": 40, "t_discard": 20},
  "model": {"kind": "dmd", "rank": 6},
  "sensors": 2,
  "mode": {"kind": "mobile", "speed": 4, "period": 4},
  "sampling_dt": 0.2,
  "noise": {"q": 0.1, "rho": 0.1},
  "sweep": {"sampling_dt": [0.2, 0.4]}
})");
}

fs::path scratch(const std::string& name) {
    const fs::path p = fs::temp_directory_path() / ("mobsense_test_cli_" + name);
    fs::remove_all(p);
    fs::create_directories(p);
    return p;
}

int run_tool(const std::string& args) {
    const std::string cmd = std::string("\"") + MOBSENSE_TOOL + "\" " + args + " >/dev/null 2>&1";
    const int status = std::system(cmd.c_str());
    return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

void write_json(const fs::path& path, const json& doc) { io::write_atomic(path, doc.dump(2)); }

}  // namespace

TEST_CASE("config parsing is strict") {
    const auto cfg = cli::parse_config(torus_doc());
    CHECK(cfg.mode.mobile);
    CHECK(cfg.mode.speed == 3.0);
    CHECK(cfg.scenario.torus.rows == 16);
    CHECK(*cfg.steps == 120);

    auto expect_error = [](json doc) { CHECK_THROWS_AS(cli::parse_config(doc), ConfigError); };
    json d = torus_doc();
    d["sensorz"] = 2;
    expect_error(d);
    d = torus_doc();
    d["scenario"]["colz"] = 2;
    expect_error(d);
    d = torus_doc();
    d["mode"]["speed"] = "fast";
    expect_error(d);
    d = torus_doc();
    d.erase("steps");
    expect_error(d);
    d = torus_doc();
    d["sweep"] = {{"speed", json::array()}};
    expect_error(d);
    d = torus_doc();
    d["sweep"] = json::object();
    expect_error(d);
    d = torus_doc();
    d["mode"] = {{"kind", "stationary"}};
    d["sweep"] = {{"speed", {1, 2}}};
    expect_error(d);
    d = torus_doc();
    d["model"] = {{"kind", "dmd"}};
    expect_error(d);
    d = ks_doc();
    d["model"] = {{"kind", "known"}};
    expect_error(d);
    d = ks_doc();
    d["scenario"]["n_grid"] = 100;
    expect_error(d);
    d = torus_doc();
    d["scenario"] = {{"kind", "gridded"}, {"path", "/nonexistent/file.msgrid"}};
    d["model"] = {{"kind", "dmd"}, {"rank", 4}};
    expect_error(d);

    d = torus_doc();
    d["mode"]["speed"] = "inf";
    CHECK(std::isinf(cli::parse_config(d).mode.speed));
    CHECK_THROWS_AS(cli::load_config(kSource / "does-not-exist.json"), Error);
}

TEST_CASE("sweep expansion and seeds") {
    json d = torus_doc();
    d["sweep"] = {{"sensors", {1, 2}}, {"speed", {"inf", 2}}};
    const auto points = cli::expand_sweep(cli::parse_config(d));
    REQUIRE(points.size() == 4);
    CHECK(points[0].id == "p000");
    CHECK(points[0].key == "sensors=1;speed=inf");
    CHECK(points[3].key == "sensors=2;speed=2");
    CHECK(points[3].cfg.sensors == 2);
    CHECK(points[3].cfg.mode.speed == 2.0);
    CHECK_FALSE(points[3].cfg.sweep.has_value());
    for (const auto& p : points) CHECK(p.seed == cli::derive_seed(4, p.key));
    CHECK(points[0].seed != points[1].seed);
    const auto single = cli::expand_sweep(cli::parse_config(torus_doc()));
    REQUIRE(single.size() == 1);
    CHECK(single[0].key == "base");
    // SHA-256 reference value for "abc"
    CHECK(cli::sha256_hex("abc") == "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
    CHECK(cli::derive_seed(0, "abc") == 0xba7816bf8f01cfeaULL);
}

TEST_CASE("runs write the documented files") {
    const fs::path dir = scratch("single");
    cli::RunOptions opts;
    opts.output_dir = dir;
    opts.plan_report = true;
    const auto m = cli::run_experiment(cli::parse_config(torus_doc()), opts);
    REQUIRE(m.all_ok());
    for (const char* f : {"trajectory.json", "trajectory.csv", "plan_report.csv", "kf_run.csv", "condition.json", "manifest.json"})
        CHECK(fs::exists(dir / f));
    CHECK(io::read_text(dir / "kf_run.csv").rfind("step,time,trace_sigma,recon_mse\n", 0) == 0);
    const auto cond = json::parse(io::read_text(dir / "condition.json"));
    CHECK(cond.at("observable").get<bool>());
    CHECK(cond.at("period") == 8);
    const auto traj = io::trajectory_from_json(json::parse(io::read_text(dir / "trajectory.json")));
    CHECK(traj == m.points[0].trajectory);
    CHECK(cli::verify_manifest(dir).empty());

    SECTION("verification catches tampering") {
        io::write_atomic(dir / "kf_run.csv", "step,time,trace_sigma,recon_mse\n");
        const auto problems = cli::verify_manifest(dir);
        REQUIRE(problems.size() == 1);
        CHECK(problems[0].find("kf_run.csv") != std::string::npos);
        fs::remove(dir / "trajectory.csv");
        CHECK(cli::verify_manifest(dir).size() == 2);
    }
    SECTION("plots") {
        const auto files = cli::emit_plots(dir);
        CHECK(files.size() == 2);
        for (const auto& f : files) CHECK(io::read_text(dir / f).rfind("<svg", 0) == 0);
    }
    SECTION("environment overrides") {
        const auto cfg = cli::parse_config(torus_doc());
        setenv("MOBSENSE_OUTPUT_DIR", "/tmp/elsewhere", 1);
        setenv("MOBSENSE_WORKERS", "3", 1);
        CHECK(cli::effective_output(cfg, {}) == fs::path("/tmp/elsewhere"));
        CHECK(cli::effective_workers(cfg, {}) == 3);
        CHECK(cli::effective_output(cfg, opts) == dir);
        setenv("MOBSENSE_WORKERS", "many", 1);
        CHECK_THROWS_AS(cli::effective_workers(cfg, {}), ConfigError);
        unsetenv("MOBSENSE_OUTPUT_DIR");
        unsetenv("MOBSENSE_WORKERS");
        CHECK(cli::effective_output(cfg, {}) == cfg.outputs);
    }
    fs::remove_all(dir);
}

TEST_CASE("sampling-rate sweep") {
    const fs::path dir = scratch("ks");
    cli::RunOptions opts;
    opts.output_dir = dir;
    opts.workers = 2;
    const auto m = cli::run_experiment(cli::parse_config(ks_doc()), opts);
    REQUIRE(m.all_ok());
    const auto table = cli::CsvTable::parse(io::read_text(dir / "sweep.csv"), "sweep.csv");
    // t in [20, 40]: 101 snapshots at dt 0.2, 51 at dt 0.4
    CHECK(table.size() == 101 + 51);
    const auto dts = table.numbers("sampling_dt");
    CHECK(std::count(dts.begin(), dts.end(), 0.2) == 101);
    CHECK(std::count(dts.begin(), dts.end(), 0.4) == 51);
    const auto plots = cli::emit_plots(dir);
    CHECK(std::find(plots.begin(), plots.end(), fs::path("error_vs_sampling_rate.svg")) != plots.end());
    CHECK(fs::exists(dir / "points" / "p001" / "error_vs_time.svg"));

    SECTION("re-running gives identical data files") {
        const fs::path again = scratch("ks_again");
        cli::RunOptions o2;
        o2.output_dir = again;
        o2.workers = 1;
        const auto m2 = cli::run_experiment(cli::parse_config(ks_doc()), o2);
        CHECK(m2.document.at("files") == m.document.at("files"));
        fs::remove_all(again);
    }
    fs::remove_all(dir);
}

TEST_CASE("plot schema errors") {
    CHECK_THROWS_AS(cli::error_vs_time_svg("step,time,trace_sigma\n0,0,1\n", "x"), FormatError);
    CHECK_THROWS_AS(cli::error_vs_rate_svg("point,sampling_dt\np000,0.1\n", "x"), FormatError);
    CHECK_THROWS_AS(cli::trajectory_svg(json{{"locations", {{0}}}}, "x"), FormatError);
    const std::string svg = cli::trajectory_svg(json{{"locations", {{0}, {5}}}, {"grid", {{"rows", 2}, {"cols", 3}}}}, "t");
    CHECK(svg.find("marker-end") != std::string::npos);
}

TEST_CASE("committed fixtures match the generator") {
    for (const auto& [name, text] : cli::fixture_configs()) {
        INFO(name);
        CHECK(io::read_text(kSource / "configs" / name) == text);
        CHECK_NOTHROW(cli::load_config(kSource / "configs" / name));
    }
    CHECK(io::read_text(kSource / "configs" / "data" / "two_basins.msgrid") == encode_binary_grid(cli::fixture_basins()));
    CHECK(load_gridded(kSource / "docs" / "fixtures" / "tiny.msgrid", GridFormat::binary_grid) ==
          load_gridded(kSource / "docs" / "fixtures" / "tiny.csv", GridFormat::csv_grid));
}

TEST_CASE("command-line exit codes") {
    const fs::path dir = scratch("exit");
    CHECK(run_tool("fixtures \"" + (dir / "fx").string() + "\"") == 0);
    CHECK(fs::exists(dir / "fx" / "basins.json"));

    json d = torus_doc();
    write_json(dir / "ok.json", d);
    CHECK(run_tool("filter \"" + (dir / "ok.json").string() + "\" -o \"" + (dir / "ok").string() + "\"") == 0);
    CHECK(run_tool("verify \"" + (dir / "ok").string() + "\"") == 0);
    CHECK(run_tool("plot \"" + (dir / "ok").string() + "\"") == 0);
    io::write_atomic(dir / "ok" / "kf_run.csv", "tampered");
    CHECK(run_tool("verify \"" + (dir / "ok").string() + "\"") == 1);
    // filter refuses sweep configs and sweep needs one
    CHECK(run_tool("sweep \"" + (dir / "ok.json").string() + "\" -o \"" + (dir / "x").string() + "\"") == 2);

    d["bogus"] = 1;
    write_json(dir / "bad.json", d);
    CHECK(run_tool("filter \"" + (dir / "bad.json").string() + "\"") == 2);

    // noise-free training data has rank 6; asking DMD for 12 modes is a numerical failure
    d = torus_doc();
    d["model"] = {{"kind", "dmd"}, {"rank", 12}};
    d["noise"]["q"] = 0.0;
    write_json(dir / "rank.json", d);
    CHECK(run_tool("filter \"" + (dir / "rank.json").string() + "\" -o \"" + (dir / "rank").string() + "\"") == 3);

    // fine speed 0.5 cannot reach waypoints one cell apart
    d = torus_doc();
    d["mode"] = {{"kind", "mobile"}, {"speed", 0.5}, {"period", 8}, {"refine_factor", 2}};
    write_json(dir / "stuck.json", d);
    CHECK(run_tool("filter \"" + (dir / "stuck.json").string() + "\" -o \"" + (dir / "stuck").string() + "\"") == 4);
    const auto manifest = json::parse(io::read_text(dir / "stuck" / "manifest.json"));
    CHECK(manifest.at("runs")[0].at("error").at("category") == "infeasible");
    fs::remove_all(dir);
}
