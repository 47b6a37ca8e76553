#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "hamqec/cli.hpp"

using namespace hamqec;
using namespace hamqec::cli;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string &name) {
    fs::path p = fs::temp_directory_path() / "hamqec_test_cli" / name;
    fs::remove_all(p);
    fs::create_directories(p);
    return p;
}

std::string slurp(const fs::path &p) {
    std::ifstream f(p);
    std::stringstream ss;
    ss << f.rdbuf();
    return ss.str();
}

int run_args(std::vector<std::string> args) {
    args.insert(args.begin(), "hamqec_cli");
    std::vector<char *> argv;
    for (auto &a : args) argv.push_back(a.data());
    std::ostringstream log;
    return run(int(argv.size()), argv.data(), log);
}

}  // namespace

TEST(Config, SeedRequired) {
    EXPECT_THROW(parse_config(json::object()), ConfigError);
    EXPECT_EQ(parse_config(json::object(), 7).seed, 7u);
    EXPECT_EQ(parse_config({{"seed", 3}}, 9).seed, 9u);  // flag wins
}

TEST(Config, UnknownKeysRejected) {
    EXPECT_THROW(parse_config({{"seed", 1}, {"sed", 2}}), ConfigError);
    EXPECT_THROW(parse_config({{"seed", 1}, {"qec", {{"shot", 1000}}}}), ConfigError);
    EXPECT_THROW(parse_config({{"seed", 1}, {"device", {{"j_c", 0.01}}}}), ConfigError);
}

TEST(Config, TypeAndRangeErrors) {
    EXPECT_THROW(parse_config({{"seed", 1}, {"qec", {{"d", {4}}}}}), ConfigError);
    EXPECT_THROW(parse_config({{"seed", 1}, {"qec", {{"shots", "many"}}}}), ConfigError);
    EXPECT_THROW(parse_config({{"seed", 1}, {"lcpem", {{"source", "magic"}}}}), ConfigError);
    EXPECT_THROW(parse_config({{"seed", 1}, {"schedules", "table2"}}), ConfigError);
}

TEST(Config, OptimizeBudgetZeroWithoutSection) {
    EXPECT_EQ(parse_config({{"seed", 1}}).optimize.budget, 0);
    auto c = parse_config({{"seed", 1}, {"optimize", {{"budget", 5}, {"lr", 0.01}}}});
    EXPECT_EQ(c.optimize.budget, 5);
    EXPECT_DOUBLE_EQ(c.optimize.lr, 0.01);
}

TEST(Config, RoundTrip) {
    json in = {{"seed", 11},
               {"device", {{"keep_levels", 4}, {"j_l_ghz", -0.002}}},
               {"qec", {{"d", {3, 5}}, {"shots", 2000}, {"r_ghz", {1e-6}}}},
               {"walsh", {{"scan", {{"j_l_ghz", {0.0, 0.002, 5}}}}}},
               {"lcpem", {{"source", "config"}, {"p_measure", 0.02}}}};
    auto a = config_json(parse_config(in));
    auto b = config_json(parse_config(a));
    EXPECT_EQ(a, b);
    EXPECT_EQ(a["device"]["keep_levels"], 4);
    EXPECT_EQ(a["qec"]["d"], json({3, 5}));
    EXPECT_DOUBLE_EQ(a["lcpem"]["p_measure"].get<double>(), 0.02);
}

TEST(Commands, QecWritesCsvAndJson) {
    auto dir = scratch("qec");
    auto c = parse_config(
        {{"seed", 5}, {"out", dir.string()}, {"qec", {{"d", {3}}, {"shots", 2000}, {"r_ghz", {1e-6, 1e-5}}}}});
    json s = cmd_qec(c);
    ASSERT_EQ(s["rows"].size(), 4u);
    std::string csv = slurp(dir / "qec.csv");
    EXPECT_EQ(csv.substr(0, csv.find('\n')), "d,rounds,r_ghz,variant,shots,failures,p_logical,stderr");
    EXPECT_EQ(std::count(csv.begin(), csv.end(), '\n'), 5);
    EXPECT_TRUE(fs::exists(dir / "qec.gp"));
    EXPECT_TRUE(fs::exists(dir / "effective_config.json"));
    for (auto &r : s["rows"]) {
        EXPECT_EQ(r["shots"], 2000);
        EXPECT_EQ(r["params_hash"].get<std::string>().size(), 16u);
    }
    // same seed reproduces the same counts
    json t = cmd_qec(c);
    EXPECT_EQ(s["rows"], t["rows"]);
}

TEST(Commands, ExitCodes) {
    auto dir = scratch("exit");
    EXPECT_EQ(run_args({}), 2);                                   // no subcommand
    EXPECT_EQ(run_args({"qec"}), 2);                              // no seed
    EXPECT_EQ(run_args({"qec", "--config", (dir / "missing.json").string(), "--seed", "1"}), 2);
    std::ofstream(dir / "bad.json") << R"({"seed": 1, "qec": {"d": [2]}})";
    EXPECT_EQ(run_args({"qec", "--config", (dir / "bad.json").string()}), 2);
    std::ofstream(dir / "ok.json") << R"({"seed": 1, "qec": {"d": [3], "shots": 1000, "r_ghz": [1e-6],
                                          "k1_only_variant": false}})";
    EXPECT_EQ(run_args({"qec", "--config", (dir / "ok.json").string(), "--out", (dir / "o").string()}), 0);
    EXPECT_TRUE(fs::exists(dir / "o" / "qec.csv"));
}
