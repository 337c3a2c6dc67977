#include <doctest.h>

#include <algorithm>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "cli.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct Run {
    int code;
    std::string out, err;
};

Run cli(std::vector<std::string> args) {
    std::ostringstream out, err;
    const int code = e2efs::cli::run(args, out, err);
    return {code, out.str(), err.str()};
}

fs::path scratch(const std::string& name) {
    const auto p = fs::temp_directory_path() / ("e2efs_cli_" + name);
    fs::remove_all(p);
    fs::create_directories(p);
    return p;
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    REQUIRE(in);
    std::ostringstream s;
    s << in.rdbuf();
    return s.str();
}

json read_json(const fs::path& p) { return json::parse(slurp(p)); }

// Small problem that trains in well under a second.
fs::path small_synth(const fs::path& dir) {
    const auto r = cli({"synth", "--n", "300", "--informative", "3", "--noise", "9", "--seed", "4", "--out", dir.string()});
    REQUIRE(r.code == 0);
    return dir / "synth.csv";
}

} // namespace

TEST_CASE("synth: shape, truth file, determinism") {
    const auto a = scratch("synth_a"), b = scratch("synth_b");
    REQUIRE(cli({"synth", "--seed", "9", "--out", a.string()}).code == 0);
    REQUIRE(cli({"synth", "--seed", "9", "--out", b.string()}).code == 0);
    CHECK(slurp(a / "synth.csv") == slurp(b / "synth.csv"));
    CHECK(slurp(a / "truth.json") == slurp(b / "truth.json"));

    std::ifstream in(a / "synth.csv");
    std::string line;
    std::getline(in, line);
    CHECK(line.rfind("# {", 0) == 0);
    std::getline(in, line);
    CHECK(std::count(line.begin(), line.end(), ',') == 100);
    std::size_t rows = 1;
    while (std::getline(in, line)) ++rows;
    CHECK(rows == 2000);

    const auto truth = read_json(a / "truth.json");
    CHECK(truth["informative"].size() == 10);
    CHECK(truth["tool"] == "e2efs");
    CHECK(truth["seed"] == 9);
    CHECK(truth["config"]["n_noise"] == 90);
}

TEST_CASE("select: ranker truncates to M") {
    const auto dir = scratch("select_fisher");
    const auto data = small_synth(dir);
    const auto r = cli({"select", "--method", "fisher", "--m", "5", "--data", data.string(), "--out", dir.string()});
    REQUIRE(r.code == 0);
    const auto res = read_json(dir / "result.json");
    CHECK(res["result"]["selected_indices"].size() == 5);
    CHECK(res["command"] == "select");
    CHECK(res["config"]["method"] == "fisher");
    CHECK(res["version"].is_string());
    CHECK(slurp(dir / "ranking.csv").rfind("# {", 0) == 0);
}

TEST_CASE("select: mask method end to end") {
    const auto dir = scratch("select_mask");
    const auto data = small_synth(dir);
    const auto r = cli({"select", "--method", "e2efs", "--m", "3", "--data", data.string(), "--out", dir.string()});
    INFO(r.err);
    REQUIRE(r.code == 0);
    const auto res = read_json(dir / "result.json");
    CHECK(res["result"]["converged"] == true);
    CHECK(res["result"]["selected_indices"].size() == 3);
    // Resolved per-variant defaults are echoed, not the "unset" sentinels.
    CHECK(res["config"]["T"] == 300.0);
    CHECK(res["config"]["fs_epochs"] == 300);
    CHECK(fs::exists(dir / "trace.csv"));
}

TEST_CASE("select: non-convergence exits 2 with a diagnostic") {
    const auto dir = scratch("select_nc");
    const auto data = small_synth(dir);
    const auto r = cli({"select", "--m", "3", "--fs-epochs", "1", "--data", data.string(), "--out", dir.string()});
    CHECK(r.code == e2efs::cli::kNotConverged);
    CHECK(r.err.find("nnz") != std::string::npos);
    CHECK(read_json(dir / "result.json")["result"]["converged"] == false);
}

TEST_CASE("input errors exit 1") {
    const auto dir = scratch("errors");
    const auto missing = (dir / "nope.csv").string();
    auto r = cli({"select", "--data", missing, "--out", dir.string()});
    CHECK(r.code == 1);
    CHECK(r.err.find(missing) != std::string::npos);

    const auto data = small_synth(dir).string();
    CHECK(cli({}).code == 1);
    CHECK(cli({"frobnicate"}).code == 1);
    CHECK(cli({"select", "--out", dir.string()}).code == 1);
    CHECK(cli({"select", "--data", data, "--m", "0", "--out", dir.string()}).code == 1);
    CHECK(cli({"select", "--data", data, "--m", "13", "--out", dir.string()}).code == 1);
    CHECK(cli({"select", "--data", data, "--method", "lasso", "--out", dir.string()}).code == 1);
    CHECK(cli({"select", "--data", data, "--rho", "1.5", "--out", dir.string()}).code == 1);
    CHECK(cli({"bench", "--data", data, "--methods", "fisher,nope", "--out", dir.string()}).code == 1);
    CHECK(cli({"bench", "--data", data, "--methods", "fisher", "--grid", "50", "--out", dir.string()}).code == 1);
    CHECK(cli({"eval", "--data", data, "--out", dir.string()}).code == 1);
    CHECK(cli({"eval", "--data", data, "--indices", "12", "--out", dir.string()}).code == 1);
    CHECK(cli({"select", "--help"}).code == 0);

    std::ofstream(dir / "empty_methods.json") << R"({"methods": []})";
    r = cli({"bench", "--data", data, "--config", (dir / "empty_methods.json").string(), "--out", dir.string()});
    CHECK(r.code == 1);
    std::ofstream(dir / "unknown_key.json") << R"({"M": 3, "colour": "red"})";
    r = cli({"select", "--data", data, "--config", (dir / "unknown_key.json").string(), "--out", dir.string()});
    CHECK(r.code == 1);
    CHECK(r.err.find("colour") != std::string::npos);
    std::ofstream(dir / "garbage.csv") << "1,2,x\n";
    CHECK(cli({"select", "--data", (dir / "garbage.csv").string(), "--out", dir.string()}).code == 1);
}

TEST_CASE("--config reruns byte for byte, explicit flags override") {
    const auto a = scratch("config_a"), b = scratch("config_b"), c = scratch("config_c");
    const auto data = small_synth(a).string();
    REQUIRE(cli({"select", "--method", "mim", "--m", "4", "--bins", "5", "--seed", "3", "--data", data, "--out",
                 a.string()})
                .code == 0);
    REQUIRE(cli({"select", "--config", (a / "result.json").string(), "--out", b.string()}).code == 0);
    CHECK(slurp(a / "result.json") == slurp(b / "result.json"));
    CHECK(slurp(a / "ranking.csv") == slurp(b / "ranking.csv"));

    REQUIRE(cli({"select", "--config", (a / "result.json").string(), "--m", "2", "--out", c.string()}).code == 0);
    const auto res = read_json(c / "result.json");
    CHECK(res["config"]["M"] == 2);
    CHECK(res["config"]["bins"] == 5);

    // A select artifact is not a bench config.
    CHECK(cli({"bench", "--config", (a / "result.json").string(), "--out", c.string()}).code == 1);
}

TEST_CASE("output directory from the environment") {
    const auto dir = scratch("env_out");
    ::setenv(e2efs::cli::kOutputDirEnv, dir.string().c_str(), 1);
    const auto r = cli({"synth", "--n", "50", "--informative", "2", "--noise", "2"});
    ::unsetenv(e2efs::cli::kOutputDirEnv);
    CHECK(r.code == 0);
    CHECK(fs::exists(dir / "synth.csv"));
    CHECK(fs::exists(dir / "truth.json"));
}

TEST_CASE("bench: shared splits, outputs, jobs-independent") {
    const auto a = scratch("bench_a"), b = scratch("bench_b");
    const auto data = small_synth(a).string();
    const std::vector<std::string> common{"bench", "--data", data, "--methods", "fisher,mim,e2efs", "--grid", "2,4",
                                          "--folds", "3", "--repeats", "2", "--fs-epochs", "60", "--T", "60",
                                          "--fit-epochs", "20", "--seed", "5"};
    auto args = common;
    args.insert(args.end(), {"--jobs", "1", "--out", a.string()});
    auto r = cli(args);
    INFO(r.err);
    REQUIRE(r.code == 0);
    args = common;
    args.insert(args.end(), {"--jobs", "3", "--out", b.string()});
    REQUIRE(cli(args).code == 0);
    for (const char* f : {"report.json", "table.csv", "curves.csv"}) CHECK(slurp(a / f) == slurp(b / f));

    const auto rep = read_json(a / "report.json");
    CHECK(rep["report"]["splits"].size() == 1);
    CHECK(rep["report"]["splits"]["synth"].size() == 2);
    CHECK_FALSE(rep["config"].contains("jobs"));
    std::size_t mask_rows = 0;
    for (const auto& res : rep["report"]["results"])
        if (res["method"] == "e2efs") ++mask_rows;
    CHECK(mask_rows == 2);   // naive and naive_f
}

TEST_CASE("eval: from a select result") {
    const auto dir = scratch("eval");
    const auto data = small_synth(dir).string();
    REQUIRE(cli({"select", "--method", "fisher", "--m", "3", "--data", data, "--out", dir.string()}).code == 0);
    const auto r = cli({"eval", "--data", data, "--from", (dir / "result.json").string(), "--fit-epochs", "30",
                        "--repeats", "2", "--out", dir.string()});
    INFO(r.err);
    REQUIRE(r.code == 0);
    const auto ev = read_json(dir / "eval.json");
    CHECK(ev["result"]["balanced_accuracy"]["runs"].size() == 6);
    CHECK(ev["result"]["balanced_accuracy"]["mean"].get<double>() > 0.6);
    CHECK(ev["config"]["indices"].size() == 3);
}
