#include "catch_amalgamated.hpp"

#include <nlohmann/json.hpp>

#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

namespace fs = std::filesystem;

namespace {

/// Fresh scratch directory per test case.
fs::path scratch(const std::string& name) {
    const auto dir = fs::temp_directory_path() / ("hwilab_test_" + name);
    fs::remove_all(dir);
    fs::create_directories(dir);
    return dir;
}

int hwilab(const std::string& args) {
    const std::string cmd = std::string("\"") + HWILAB_EXE + "\" " + args + " > /dev/null 2>&1";
    const int status = std::system(cmd.c_str());
    return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream s;
    s << in.rdbuf();
    return s.str();
}

std::size_t data_rows(const fs::path& csv) {
    std::ifstream in(csv);
    std::string line;
    std::size_t n = 0;
    std::getline(in, line);
    while (std::getline(in, line)) {
        if (!line.empty()) ++n;
    }
    return n;
}

std::string panel_args(const fs::path& dir) {
    return "--prices " + (dir / "prices.csv").string() + " --classification " + (dir / "classification.csv").string() +
           " --calendar " + (dir / "calendar.csv").string();
}

const std::string kSim = "simulate --counts '2;2;2;3' --horizon 1.5 --theta 0.2 --gamma 2 --r 0.03";

} // namespace

TEST_CASE("cli: seeded runs are byte-identical", "[cli]") {
    const auto a = scratch("det_a");
    const auto b = scratch("det_b");
    REQUIRE(hwilab("--seed 7 --out " + a.string() + " " + kSim) == 0);
    REQUIRE(hwilab("--seed 7 --out " + b.string() + " " + kSim) == 0);
    for (const char* f : {"prices.csv", "hwi_sim.csv", "gp_sim.csv", "sim_summary.json"}) {
        INFO(f);
        CHECK(slurp(a / f) == slurp(b / f));
    }
    const auto c = scratch("det_c");
    REQUIRE(hwilab("--seed 8 --out " + c.string() + " " + kSim) == 0);
    CHECK(slurp(a / "prices.csv") != slurp(c / "prices.csv"));
}

TEST_CASE("cli: exit codes", "[cli]") {
    const auto dir = scratch("codes");
    CHECK(hwilab("--version") == 0);
    CHECK(hwilab("no-such-command") == 2);
    CHECK(hwilab("--out " + dir.string() + " simulate --counts '2;2' --horizon 0") == 2);

    const std::string fx = HWI_FIXTURE_DIR "/panel5";
    CHECK(hwilab("--out " + dir.string() + " build-index " + panel_args(fx) + " --policies " + fx +
                 "/policies.csv --schemes") == 2);
    CHECK(hwilab("--out " + dir.string() + " emp-test " + panel_args(fx) + " --benchmark " +
                 (dir / "missing.csv").string()) == 3);
    CHECK(hwilab("--out " + dir.string() + " stats --path " + (dir / "absent.csv").string()) == 3);

    // Singular, inconsistent GP system.
    std::ofstream(dir / "a.csv") << "0.1\n0.2\n";
    std::ofstream(dir / "b.csv") << "0.2,0.0\n0.2,0.0\n";
    CHECK(hwilab("--out " + dir.string() + " solve-gp --a " + (dir / "a.csv").string() + " --b " +
                 (dir / "b.csv").string()) == 4);
}

TEST_CASE("cli: config files", "[cli]") {
    const auto dir = scratch("config");
    std::ofstream(dir / "bad_key.json") << R"({"format_version": 1, "counts": "2;2", "colour": "blue"})";
    std::ofstream(dir / "no_version.json") << R"({"counts": "2;2"})";
    std::ofstream(dir / "good.json") << R"({"format_version": 1, "seed": 5, "counts": "2;3", "horizon": 0.5})";
    CHECK(hwilab("--config " + (dir / "bad_key.json").string() + " --out " + dir.string() + " simulate") == 2);
    CHECK(hwilab("--config " + (dir / "no_version.json").string() + " --out " + dir.string() + " simulate") == 2);
    REQUIRE(hwilab("--config " + (dir / "good.json").string() + " --out " + dir.string() + " simulate") == 0);
    const auto manifest = nlohmann::json::parse(slurp(dir / "manifest.json"));
    CHECK(manifest["config"]["seed"] == 5);
    const auto summary = nlohmann::json::parse(slurp(dir / "sim_summary.json"));
    CHECK(summary["paths"][0]["stocks"] == 6);
}

TEST_CASE("cli: simulate, build, test, summarize", "[cli]") {
    const auto sim = scratch("pipe_sim");
    REQUIRE(hwilab("--seed 3 --out " + sim.string() + " " + kSim) == 0);

    const auto idx = scratch("pipe_idx");
    REQUIRE(hwilab("--out " + idx.string() + " build-index " + panel_args(sim) + " --policies " +
                   (sim / "policies.csv").string() + " --schemes MCI EWI HWI") == 0);
    for (const char* name : {"MCI", "EWI", "HWI"}) {
        const auto f = idx / ("indexpath_" + std::string(name) + ".csv");
        INFO(f);
        REQUIRE(fs::exists(f));
        CHECK(data_rows(f) == data_rows(sim / "calendar.csv"));
    }
    const auto manifest = nlohmann::json::parse(slurp(idx / "manifest.json"));
    CHECK(manifest["command"] == "build-index");
    CHECK(manifest["inputs"].size() == 4);
    CHECK(manifest["outputs"].size() >= 7);
    for (const auto& in : manifest["inputs"]) CHECK(in["sha256"].get<std::string>().size() == 64);

    const auto tc = scratch("pipe_tc");
    REQUIRE(hwilab("--out " + tc.string() + " build-index " + panel_args(sim) + " --policies " +
                   (sim / "policies.csv").string() + " --schemes HWI --tc 40") == 0);
    CHECK(fs::exists(tc / "indexpath_HWI-TC.csv"));

    const auto emp = scratch("pipe_emp");
    REQUIRE(hwilab("--out " + emp.string() + " emp-test " + panel_args(sim) + " --benchmark " +
                   (idx / "indexpath_MCI.csv").string() + " " + (idx / "indexpath_HWI.csv").string() +
                   " --bootstrap --replicates 200 --candidate " + (idx / "indexpath_EWI.csv").string()) == 0);
    CHECK(data_rows(emp / "table_z.csv") == 2);
    CHECK(data_rows(emp / "table_bootstrap.csv") == 2);
    CHECK(data_rows(emp / "table_index_vs_index.csv") == 1);

    const auto st = scratch("pipe_stats");
    REQUIRE(hwilab("--out " + st.string() + " stats --path " + (idx / "indexpath_MCI.csv").string() + " " +
                   (idx / "indexpath_HWI.csv").string() + " --baseline " + (idx / "indexpath_MCI.csv").string()) == 0);
    CHECK(data_rows(st / "stats.csv") == 2);
    CHECK(fs::exists(st / "outperformance.csv"));
    const auto stats = nlohmann::json::parse(slurp(st / "stats.json"));
    CHECK(stats["indexes"].size() == 2);

    const auto gd = scratch("pipe_grdiff");
    REQUIRE(hwilab("--out " + gd.string() + " gr-diff --a " + (idx / "indexpath_HWI.csv").string() + " --b " +
                   (idx / "indexpath_MCI.csv").string() + " --windows 0.5 1") == 0);
    CHECK(data_rows(gd / "gr_diff.csv") == 2);
}

TEST_CASE("cli: diversification scan", "[cli]") {
    const auto dir = scratch("scan");
    REQUIRE(hwilab("--out " + dir.string() + " scan --family EWI --m-list 2 4 8 16") == 0);
    CHECK(data_rows(dir / "scan_result.csv") == 4);
    const auto manifest = nlohmann::json::parse(slurp(dir / "manifest.json"));
    REQUIRE(manifest["details"].contains("fitted_slope"));
    CHECK(manifest["details"]["fitted_slope"].get<double>() < -0.8);
    CHECK(manifest["details"]["all_within_bound"] == true);
    CHECK(hwilab("--out " + dir.string() + " scan --family EWI --xi 0.3") == 2);
}
