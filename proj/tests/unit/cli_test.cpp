/*
   Copyright 2026 The marcus-averaging Authors

   Licensed under the Apache License, Version 2.0 (the "License");
   you may not use this file except in compliance with the License.
   You may obtain a copy of the License at

       http://www.apache.org/licenses/LICENSE-2.0

   Unless required by applicable law or agreed to in writing, software
   distributed under the License is distributed on an "AS IS" BASIS,
   WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
   See the License for the specific language governing permissions and
   limitations under the License.
*/

#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <gtest/gtest.h>
#include <nlohmann/json.hpp>

#include "marcus/cli.hpp"

namespace marcus::cli {
namespace {

namespace fs = std::filesystem;

class CliTest : public ::testing::Test {
protected:
    void SetUp() override
    {
        const auto* info = ::testing::UnitTest::GetInstance()->current_test_info();
        root_ = fs::temp_directory_path() / (std::string("marcus_cli_") + info->name());
        fs::remove_all(root_);
        fs::create_directories(root_);
        unsetenv(kOutputDirEnv);
    }

    void TearDown() override
    {
        unsetenv(kOutputDirEnv);
        fs::remove_all(root_);
    }

    int run_cli(std::vector<std::string> args)
    {
        out_.str("");
        err_.str("");
        return run(args, out_, err_);
    }

    static std::string slurp(const fs::path& p)
    {
        std::ifstream in(p, std::ios::binary);
        std::stringstream buf;
        buf << in.rdbuf();
        return buf.str();
    }

    static std::vector<std::vector<std::string>> read_csv(const fs::path& p)
    {
        std::vector<std::vector<std::string>> rows;
        std::istringstream in(slurp(p));
        std::string line;
        while (std::getline(in, line)) {
            std::vector<std::string> cells;
            std::stringstream ls(line);
            std::string cell;
            while (std::getline(ls, cell, ',')) {
                cells.push_back(cell);
            }
            rows.push_back(cells);
        }
        return rows;
    }

    fs::path root_;
    std::ostringstream out_;
    std::ostringstream err_;
};

TEST_F(CliTest, CheckPassesWithDefaults)
{
    ASSERT_EQ(run_cli({"check", "-o", root_.string(), "--run-name", "chk", "-s", "check.samples=50"}), kOk)
        << err_.str() << out_.str();
    const auto summary = nlohmann::json::parse(slurp(root_ / "chk" / "summary.json"));
    EXPECT_TRUE(summary.at("all_pass").get<bool>());
    for (const auto& [name, entry] : summary.at("checks").items()) {
        EXPECT_TRUE(entry.at("pass").get<bool>()) << name;
    }
    EXPECT_TRUE(summary.at("checks").contains("tangency"));
    EXPECT_TRUE(fs::exists(root_ / "chk" / "config.json"));
}

TEST_F(CliTest, UnperturbedSimulationKeepsRadius)
{
    ASSERT_EQ(run_cli({"simulate", "-o", root_.string(), "--run-name", "sim", "-s", "simulate.epsilon=0", "-s",
                       "simulate.T=10", "--seed", "5"}),
              kOk)
        << err_.str();
    const auto rows = read_csv(root_ / "sim" / "trajectory.csv");
    ASSERT_GT(rows.size(), 100u);
    EXPECT_EQ(rows[0], (std::vector<std::string>{"t", "x", "y", "z", "r", "theta", "is_jump", "exited"}));
    for (std::size_t k = 1; k < rows.size(); ++k) {
        EXPECT_NEAR(std::stod(rows[k][4]), 1.0, 1e-12);
    }
}

TEST_F(CliTest, CompareWithoutEpsilonsNamesTheKey)
{
    EXPECT_EQ(run_cli({"compare", "-o", root_.string()}), kConfigError);
    EXPECT_NE(err_.str().find("compare.epsilons"), std::string::npos) << err_.str();
    EXPECT_TRUE(fs::is_empty(root_));
}

TEST_F(CliTest, ConfigErrorsExitWithCodeTwo)
{
    EXPECT_EQ(run_cli({"check", "-o", root_.string(), "-s", "preset.bogus=1"}), kConfigError);
    EXPECT_NE(err_.str().find("preset.bogus"), std::string::npos);
    EXPECT_EQ(run_cli({"check", "-o", root_.string(), "-s", "preset.theta=-1"}), kConfigError);
    EXPECT_NE(err_.str().find("theta > 0"), std::string::npos);
    EXPECT_EQ(run_cli({"check", "-c", (root_ / "missing.json").string()}), kConfigError);
    EXPECT_EQ(run_cli({"frobnicate"}), kConfigError);
    EXPECT_EQ(run_cli({}), kConfigError);

    const fs::path bad = root_ / "bad.json";
    std::ofstream(bad) << "{\n  \"seed\": 1,\n  \"preset\": {\n}\n,}";
    EXPECT_EQ(run_cli({"check", "-c", bad.string(), "-o", root_.string()}), kConfigError);
    EXPECT_NE(err_.str().find("bad.json"), std::string::npos) << err_.str();
    EXPECT_NE(err_.str().find("line 5"), std::string::npos) << err_.str();
}

TEST_F(CliTest, CompareOutputsAreByteIdenticalAcrossThreadCounts)
{
    const fs::path cfg = root_ / "cfg.json";
    std::ofstream(cfg) << R"({"compare": {"epsilons": [0.2, 0.1], "T": 0.5, "paths": 100}})";
    for (const char* threads : {"1", "3"}) {
        ASSERT_EQ(run_cli({"compare", "-c", cfg.string(), "-o", root_.string(), "--run-name",
                           std::string("t") + threads, "-j", threads}),
                  kOk)
            << err_.str();
    }
    EXPECT_EQ(slurp(root_ / "t1" / "comparison.csv"), slurp(root_ / "t3" / "comparison.csv"));
    EXPECT_EQ(slurp(root_ / "t1" / "comparison.json"), slurp(root_ / "t3" / "comparison.json"));
    EXPECT_EQ(read_csv(root_ / "t1" / "comparison.csv")[0],
              (std::vector<std::string>{"epsilon", "t", "p", "sup_lp", "std_error", "n_paths"}));
}

TEST_F(CliTest, EffectiveConfigIsWrittenAndReloadable)
{
    ASSERT_EQ(run_cli({"average", "-o", root_.string(), "--run-name", "avg", "--seed", "99"}), kOk) << err_.str();
    const auto written = nlohmann::json::parse(slurp(root_ / "avg" / "config.json"));
    EXPECT_EQ(written.at("seed"), 99);
    EXPECT_EQ(config_to_json(config_from_json(written)), written);
    const auto rows = read_csv(root_ / "avg" / "average.csv");
    ASSERT_GT(rows.size(), 1u);
    for (std::size_t k = 1; k < rows.size(); ++k) {
        EXPECT_NEAR(std::stod(rows[k][2]), std::stod(rows[k][4]), 1e-10);
        EXPECT_NEAR(std::stod(rows[k][3]), std::stod(rows[k][5]), 1e-10);
    }
}

TEST_F(CliTest, OutputRootPrecedence)
{
    const fs::path env_root = root_ / "from_env";
    setenv(kOutputDirEnv, env_root.c_str(), 1);
    ASSERT_EQ(run_cli({"charfn", "--run-name", "a", "-s", "charfn.samples=1000"}), kOk) << err_.str();
    EXPECT_TRUE(fs::exists(env_root / "a" / "charfn.csv"));

    ASSERT_EQ(run_cli({"charfn", "--run-name", "a", "-s", "charfn.samples=1000", "-s",
                       "output_dir=" + (root_ / "from_config").string()}),
              kOk);
    EXPECT_TRUE(fs::exists(root_ / "from_config" / "a"));

    ASSERT_EQ(run_cli({"charfn", "--run-name", "a", "-s", "charfn.samples=1000", "-o", (root_ / "from_flag").string(),
                       "-s", "output_dir=" + (root_ / "from_config").string()}),
              kOk);
    EXPECT_TRUE(fs::exists(root_ / "from_flag" / "a"));
}

TEST_F(CliTest, ExistingRunDirectoryGetsSuffix)
{
    for (int k = 0; k < 3; ++k) {
        ASSERT_EQ(run_cli({"charfn", "-o", root_.string(), "--run-name", "same", "-s", "charfn.samples=1000"}), kOk);
    }
    EXPECT_TRUE(fs::exists(root_ / "same"));
    EXPECT_TRUE(fs::exists(root_ / "same-1"));
    EXPECT_TRUE(fs::exists(root_ / "same-2"));
}

TEST_F(CliTest, StampedRunDirectoryName)
{
    ASSERT_EQ(run_cli({"charfn", "-o", root_.string(), "--seed", "42", "-s", "charfn.samples=1000"}), kOk);
    int count = 0;
    for (const auto& entry : fs::directory_iterator(root_)) {
        const std::string name = entry.path().filename().string();
        EXPECT_EQ(name.rfind("charfn-", 0), 0u) << name;
        EXPECT_EQ(name.substr(name.size() - 4), "-s42") << name;
        ++count;
    }
    EXPECT_EQ(count, 1);
}

TEST_F(CliTest, ExperimentPreconditionFailureIsAConfigError)
{
    // T beyond the time the averaged solution leaves V is rejected by the experiment
    EXPECT_EQ(run_cli({"compare", "-o", root_.string(), "-s", "compare.epsilons=[0.1]", "-s", "compare.T=1",
                       "-s", "preset.r_max=1.2"}),
              kConfigError);
    EXPECT_NE(err_.str().find("T0"), std::string::npos) << err_.str();
}

} // namespace
} // namespace marcus::cli
