#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <unistd.h>

#include "json.hpp"

#include "subprocess.hpp"

#ifndef NSCAM_CLI_PATH
#error "NSCAM_CLI_PATH must point at the nscam binary"
#endif
#ifndef NSCAM_GENFIXTURE_PATH
#error "NSCAM_GENFIXTURE_PATH must point at the gen_fixture binary"
#endif

namespace fs = std::filesystem;
using nlohmann::json;
using nscam::testsupport::run_cmd;
using nscam::testsupport::RunResult;

namespace {

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    REQUIRE(in.good());
    return std::string(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
}

/// One generated fixture per process; reused across test cases.
const fs::path& fixture_dir() {
    static const fs::path dir = [] {
        const fs::path d =
            fs::temp_directory_path() / ("nscam_cli_fixture_" + std::to_string(::getpid()));
        fs::remove_all(d);
        const RunResult r = run_cmd(std::string(NSCAM_GENFIXTURE_PATH) + " " + d.string());
        if (r.exit_code != 0) {
            throw std::runtime_error("gen_fixture failed: " + r.output);
        }
        return d;
    }();
    return dir;
}

std::string model_arg() { return (fixture_dir() / "model.json").string(); }
std::string image_arg() { return (fixture_dir() / "image.png").string(); }

fs::path fresh_dir(const std::string& tag) {
    static int counter = 0;
    const fs::path d = fs::temp_directory_path() /
                       ("nscam_cli_" + tag + "_" + std::to_string(::getpid()) + "_" +
                        std::to_string(counter++));
    fs::remove_all(d);
    return d;
}

std::string explain_cmd(const fs::path& out, const std::string& extra = "") {
    return std::string(NSCAM_CLI_PATH) + " explain --model " + model_arg() + " --image " +
           image_arg() + " --layer conv1 --seed 42 --out " + out.string() + " " + extra;
}

} // namespace

TEST_CASE("explain writes the artifact set and reports the prediction") {
    const fs::path out = fresh_dir("explain");
    const RunResult r = run_cmd(explain_cmd(out));
    CAPTURE(r.output);
    REQUIRE(r.exit_code == 0);
    CHECK(r.output.find("p_orig") != std::string::npos);
    CHECK(r.output.find("top necessity causes") != std::string::npos);
    CHECK(r.output.find("top sufficiency causes") != std::string::npos);

    for (const char* name : {"n_map.png", "s_map.png", "overlay_n.png", "overlay_s.png",
                             "bivariate.png", "result.json"}) {
        CAPTURE(name);
        CHECK(fs::exists(out / name));
    }

    // --class defaults to the predicted class; the patch image predicts 1.
    const json j = json::parse(slurp(out / "result.json"));
    CHECK(j["class_index"] == 1);
    fs::remove_all(out);
}

TEST_CASE("explain reruns are byte-identical") {
    const fs::path a = fresh_dir("rerun_a");
    const fs::path b = fresh_dir("rerun_b");
    REQUIRE(run_cmd(explain_cmd(a)).exit_code == 0);
    REQUIRE(run_cmd(explain_cmd(b)).exit_code == 0);
    for (const char* name : {"n_map.png", "s_map.png", "overlay_n.png", "overlay_s.png",
                             "bivariate.png", "result.json"}) {
        CAPTURE(name);
        CHECK(slurp(a / name) == slurp(b / name));
    }
    fs::remove_all(a);
    fs::remove_all(b);
}

TEST_CASE("explain rejects an out-of-range class with exit code 2") {
    const fs::path out = fresh_dir("badclass");
    const RunResult r = run_cmd(explain_cmd(out, "--class 7"));
    CHECK(r.exit_code == 2);
    CHECK(r.output.find("out of range [0,2)") != std::string::npos);

    const RunResult garbled = run_cmd(explain_cmd(out, "--class one"));
    CHECK(garbled.exit_code == 2);
}

TEST_CASE("missing required flags and files fail with nonzero exits") {
    const RunResult no_seed =
        run_cmd(std::string(NSCAM_CLI_PATH) + " explain --model " + model_arg() + " --image " +
                image_arg() + " --layer conv1 --out /tmp/nscam_unused");
    CHECK(no_seed.exit_code >= 2);

    const fs::path out = fresh_dir("nomodel");
    const RunResult no_model =
        run_cmd(std::string(NSCAM_CLI_PATH) + " explain --model /nonexistent/model.json" +
                " --image " + image_arg() + " --layer conv1 --seed 1 --out " + out.string());
    CHECK(no_model.exit_code == 2);
}

TEST_CASE("eval scores the dataset against the planted boxes") {
    const fs::path out = fresh_dir("eval");
    const std::string cmd = std::string(NSCAM_CLI_PATH) + " eval --model " + model_arg() +
                            " --dataset " + (fixture_dir() / "dataset").string() +
                            " --layer conv1 --seed 11 --steps 25 --bboxes " +
                            (fixture_dir() / "dataset" / "bboxes.jsonl").string() + " --out " +
                            out.string();
    const RunResult r = run_cmd(cmd);
    CAPTURE(r.output);
    REQUIRE(r.exit_code == 0);

    const json j = json::parse(slurp(out / "eval_report.json"));
    REQUIRE(j["records"].size() == 10);
    for (const auto& rec : j["records"]) {
        CAPTURE(rec.dump());
        REQUIRE(rec.contains("overall"));
        CHECK(rec["overall"].get<double>() ==
              doctest::Approx(rec["insertion_auc"].get<double>() -
                              rec["deletion_auc"].get<double>())
                  .epsilon(1e-12));
        REQUIRE(rec.contains("proportion"));
        CHECK(rec["proportion"].get<double>() > 0.25);
        CHECK_FALSE(rec.contains("error"));
    }
    CHECK(j["aggregates"]["images"] == 10);
    CHECK(j["aggregates"]["failed"] == 0);

    // CSV: header plus one line per image.
    const std::string csv = slurp(out / "eval_report.csv");
    CHECK(std::count(csv.begin(), csv.end(), '\n') == 11);

    // Rerun with the same seed: identical report bytes.
    const fs::path out2 = fresh_dir("eval2");
    const std::string cmd2 = std::string(NSCAM_CLI_PATH) + " eval --model " + model_arg() +
                             " --dataset " + (fixture_dir() / "dataset").string() +
                             " --layer conv1 --seed 11 --steps 25 --bboxes " +
                             (fixture_dir() / "dataset" / "bboxes.jsonl").string() + " --out " +
                             out2.string();
    REQUIRE(run_cmd(cmd2).exit_code == 0);
    CHECK(slurp(out / "eval_report.json") == slurp(out2 / "eval_report.json"));
    CHECK(slurp(out / "eval_report.csv") == slurp(out2 / "eval_report.csv"));

    fs::remove_all(out);
    fs::remove_all(out2);
}

TEST_CASE("eval isolates per-image failures when external maps are missing") {
    const fs::path maps = fresh_dir("maps");
    fs::create_directories(maps);
    {
        // A valid external map for img_00 only.
        json grid = json::array();
        for (int y = 0; y < 32; ++y) {
            json row = json::array();
            for (int x = 0; x < 32; ++x) {
                row.push_back((y >= 4 && y < 12 && x >= 4 && x < 12) ? 1.0 : 0.0);
            }
            grid.push_back(row);
        }
        std::ofstream f(maps / "img_00.json");
        f << grid.dump();
    }

    const fs::path out = fresh_dir("evalmaps");
    const std::string cmd = std::string(NSCAM_CLI_PATH) + " eval --model " + model_arg() +
                            " --dataset " + (fixture_dir() / "dataset").string() +
                            " --layer conv1 --seed 3 --steps 10 --maps " + maps.string() +
                            " --out " + out.string();
    const RunResult r = run_cmd(cmd);
    CAPTURE(r.output);
    REQUIRE(r.exit_code == 0); // one image succeeded, so the run stands

    const json j = json::parse(slurp(out / "eval_report.json"));
    CHECK(j["aggregates"]["failed"] == 9);
    int with_error = 0;
    for (const auto& rec : j["records"]) {
        if (rec.contains("error")) {
            ++with_error;
            CHECK(rec["error"].get<std::string>().find("no external map") != std::string::npos);
        }
    }
    CHECK(with_error == 9);
    fs::remove_all(maps);
    fs::remove_all(out);
}

TEST_CASE("sanity verdict controls the exit code") {
    const fs::path out = fresh_dir("sanity");
    const std::string cmd = std::string(NSCAM_CLI_PATH) + " sanity --model " + model_arg() +
                            " --image " + image_arg() + " --layer conv1 --seed 19 --out " +
                            out.string();
    const RunResult r = run_cmd(cmd);
    CAPTURE(r.output);
    // The planted model's maps track its weights, so the check passes.
    REQUIRE(r.exit_code == 0);
    CHECK(r.output.find("final-stage mean similarity") != std::string::npos);

    const json j = json::parse(slurp(out / "sanity.json"));
    CHECK(j["pass"] == true);
    CHECK(j["final_mean"].get<double>() < 0.5);
    REQUIRE(j["stages"].size() == 3);
    CHECK(j["stages"][0]["layer"] == "none");
    fs::remove_all(out);
}

TEST_CASE("oracle compares sampling budgets against exact enumeration") {
    const std::string cmd = std::string(NSCAM_CLI_PATH) + " oracle --table " +
                            (fixture_dir() / "oracle.json").string() + " --seed 4";
    const RunResult r = run_cmd(cmd);
    CAPTURE(r.output);
    REQUIRE(r.exit_code == 0);
    CHECK(r.output.find("max |sampled - exact|") != std::string::npos);
    CHECK(r.output.find("8 coalitions over 3 causes") != std::string::npos);
}

TEST_CASE("oracle rejects a table with a missing coalition") {
    const fs::path broken = fresh_dir("oracle");
    fs::create_directories(broken);
    json j = json::parse(slurp(fixture_dir() / "oracle.json"));
    j["values"].erase("0,1");
    {
        std::ofstream f(broken / "oracle.json");
        f << j.dump();
    }
    const RunResult r = run_cmd(std::string(NSCAM_CLI_PATH) + " oracle --table " +
                                (broken / "oracle.json").string() + " --seed 4");
    CHECK(r.exit_code == 2);
    CHECK(r.output.find("missing value for coalition {0,1}") != std::string::npos);
    fs::remove_all(broken);
}
