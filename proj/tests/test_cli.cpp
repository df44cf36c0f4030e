// Copyright (c) 2026 the rvs contributors.
// SPDX-License-Identifier: Apache-2.0

#include <doctest.h>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "rvs/cli.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct CliResult {
    int code;
    std::string out;
    std::string err;
};

CliResult run_cli(std::vector<std::string> args) {
    std::vector<const char *> argv{"rvs"};
    for (const auto &a : args) argv.push_back(a.c_str());
    std::ostringstream out, err;
    const int code = rvs::cli::run(static_cast<int>(argv.size()), argv.data(),
                                   out, err);
    return {code, out.str(), err.str()};
}

std::string slurp(const fs::path &p) {
    std::ifstream in(p);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

fs::path temp_path(const std::string &name) {
    return fs::temp_directory_path() / name;
}

std::vector<std::string> lines_of(const std::string &text) {
    std::vector<std::string> lines;
    std::istringstream in(text);
    for (std::string line; std::getline(in, line);) lines.push_back(line);
    return lines;
}

}  // namespace

TEST_SUITE_BEGIN("cli");

TEST_CASE("usage errors exit with code 1") {
    CHECK(run_cli({"bogus"}).code == 1);
    CHECK(run_cli({}).code == 1);
    CHECK(run_cli({"variance", "--field", "/no/such/file.json"}).code == 1);
    CHECK(run_cli({"recon", "--task", "nope", "--steps", "1",
                   "--out", (temp_path("rvs_cli_bad")).string()})
              .code == 1);
}

TEST_CASE("help exits cleanly") {
    const auto r = run_cli({"--help"});
    CHECK(r.code == 0);
    CHECK(r.out.find("variance") != std::string::npos);
}

TEST_CASE("variance: config line, schema and reproducibility") {
    const fs::path path = temp_path("rvs_cli_variance.csv");
    const std::vector<std::string> args{
        "variance", "--field", "wall",  "--k",     "1",  "--k",
        "4",        "--trials", "200",  "--m",     "128", "--seed",
        "7",        "--out",    path.string()};
    const auto r1 = run_cli(args);
    REQUIRE(r1.code == 0);
    CHECK(r1.out.rfind("# config: ", 0) == 0);

    const auto lines = lines_of(slurp(path));
    REQUIRE(lines.size() >= 3);
    CHECK(lines[0].rfind("# config: ", 0) == 0);
    CHECK(lines[1] == "# schema: rvs-variance-v1");
    CHECK(lines[2] == "field,estimator,scheme,k,trials,mean,variance,stderr");
    // 4 estimator rows x 2 k values
    CHECK(lines.size() == 3 + 8);

    const std::string first = slurp(path);
    const auto r2 = run_cli(args);
    REQUIRE(r2.code == 0);
    CHECK(slurp(path) == first);
    CHECK(r2.out == r1.out);
}

TEST_CASE("variance: constant radiance makes reparam_mc exact") {
    const fs::path path = temp_path("rvs_cli_variance_const.csv");
    const auto r = run_cli({"variance", "--field", "foggy", "--radiance",
                            "constant", "--k", "4", "--trials", "64", "--m",
                            "64", "--seed", "3", "--out", path.string()});
    REQUIRE(r.code == 0);
    for (const auto &line : lines_of(slurp(path))) {
        if (line.rfind("foggy,reparam_mc", 0) != 0) continue;
        std::istringstream ss(line);
        std::string cell;
        for (int i = 0; i < 6; ++i) std::getline(ss, cell, ',');
        std::getline(ss, cell, ',');  // variance column
        CHECK(std::abs(std::stod(cell)) < 1e-20);
    }
}

TEST_CASE("gradcheck passes at the default threshold") {
    const fs::path path = temp_path("rvs_cli_gradcheck.json");
    const auto r = run_cli({"gradcheck", "--cases", "12", "--seed", "5",
                            "--out", path.string()});
    CHECK(r.code == 0);
    const json rep = json::parse(slurp(path));
    CHECK(rep.at("schema") == "rvs-gradcheck-v1");
    CHECK(rep.at("pass") == true);
    CHECK(rep.at("ops").size() == 10);
    for (const auto &op : rep.at("ops"))
        CHECK(op.at("max_rel_error").get<double>() <
              op.at("threshold").get<double>());
}

TEST_CASE("gradcheck failure serializes a replayable case") {
    const fs::path path = temp_path("rvs_cli_gradcheck_fail.json");
    const auto r = run_cli({"gradcheck", "--cases", "6", "--seed", "5",
                            "--threshold", "1e-12", "--out", path.string()});
    CHECK(r.code == 2);
    const json rep = json::parse(slurp(path));
    REQUIRE(rep.at("pass") == false);
    REQUIRE(rep.contains("failure"));

    const fs::path case_path = temp_path("rvs_cli_gradcheck_case.json");
    std::ofstream(case_path) << rep.at("failure").dump();

    auto replay = [&] {
        return run_cli({"gradcheck", "--replay", case_path.string(),
                        "--threshold", "1e-12"});
    };
    const auto a = replay();
    const auto b = replay();
    CHECK(a.code == 2);
    CHECK(a.out == b.out);  // identical numbers on replay
    // skip the leading config line, parse the report that follows
    const json rj = json::parse(a.out.substr(a.out.find('\n') + 1));
    CHECK(rj.at("max_rel_error").get<double>() ==
          rep.at("failure").at("max_rel_error").get<double>());
}

TEST_CASE("recon fit: flags are plumbed and outputs are written") {
    const fs::path prefix = temp_path("rvs_cli_fit");
    const auto r = run_cli({"recon", "--task", "fit", "--scene", "bump",
                            "--steps", "30", "--k", "4", "--loss",
                            "two_sample", "--scheme", "iid", "--seed", "2",
                            "--out", prefix.string()});
    REQUIRE(r.code == 0);
    CHECK(r.out.find("\"loss\":\"two_sample\"") != std::string::npos);

    const auto lines = lines_of(slurp(prefix.string() + ".csv"));
    CHECK(lines[1] == "# schema: rvs-recon-v1");
    CHECK(lines[2] == "step,loss");
    CHECK(lines.size() == 3 + 30);

    const json model = json::parse(slurp(prefix.string() + ".json"));
    CHECK(model.at("schema") == "rvs-model-v1");
    CHECK(model.contains("model"));
}

TEST_CASE("recon hierarchical: nerf ablation flag is accepted and logged") {
    const fs::path prefix = temp_path("rvs_cli_hier");
    const auto r = run_cli({"recon", "--task", "hierarchical", "--scene",
                            "wall", "--steps", "8", "--np", "8", "--nf", "12",
                            "--proposal-knots", "12", "--fine-knots", "24",
                            "--rays", "8", "--sampling", "nerf", "--seed",
                            "4", "--out", prefix.string()});
    REQUIRE(r.code == 0);
    CHECK(r.out.find("\"sampling\":\"nerf\"") != std::string::npos);
    const json model = json::parse(slurp(prefix.string() + ".json"));
    CHECK(model.contains("proposal"));
    CHECK(model.contains("fine"));
    CHECK(model.contains("wall_sample_fraction"));
}

TEST_SUITE_END();
