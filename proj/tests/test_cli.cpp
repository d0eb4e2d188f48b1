#include "oracles.hpp"
#include "support.hpp"

#include "mvpi/cli.hpp"
#include "mvpi/csv.hpp"
#include "mvpi/error.hpp"

#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

using namespace mvpi;
using namespace testing_support;
namespace fs = std::filesystem;

namespace {

class Cli : public ::testing::Test {
protected:
    void SetUp() override
    {
        const auto* info = ::testing::UnitTest::GetInstance()->current_test_info();
        dir_ = fs::temp_directory_path() / ("mvpi_cli_" + std::string(info->name()));
        fs::remove_all(dir_);
        fs::create_directories(dir_);
    }
    void TearDown() override { fs::remove_all(dir_); }

    int run(std::vector<std::string> args)
    {
        args.insert(args.begin(), "mvpi");
        std::vector<char*> argv;
        for (std::string& a : args) argv.push_back(a.data());
        out_.str("");
        err_.str("");
        return run_cli(static_cast<int>(argv.size()), argv.data(), out_, err_);
    }

    std::string path(const std::string& name) const { return (dir_ / name).string(); }

    std::string write_config(const std::string& body)
    {
        const std::string p = path("config.json");
        std::ofstream(p) << body;
        return p;
    }

    static std::string slurp(const std::string& p)
    {
        std::ifstream in(p);
        std::stringstream ss;
        ss << in.rdbuf();
        return ss.str();
    }

    fs::path dir_;
    std::ostringstream out_, err_;
};

const char* kTiny = R"({
  "model": {"T": 1.0, "r": 0.03, "a": [0.08], "A": [[0.6]], "d": [0.02], "D": [[-1.0]],
            "Lambda": [[0.3, 0.1]], "sigma": [[0.1, 0.25]], "x0": 1.0, "y0": [0.05], "s": [1.0]},
  "grid": {"steps": 100},
  "sim": {"paths": 200, "step": 0.01, "seed": 3, "x_bar": 1.1},
  "frontier": {"targets": [1.05, 1.1]}
})";

}  // namespace

TEST_F(Cli, SolveWritesCoefficientTable)
{
    const std::string cfg = write_config(kTiny);
    ASSERT_EQ(run({"--config", cfg, "--out-dir", dir_.string(), "solve"}), 0) << err_.str();
    EXPECT_NE(out_.str().find("command=solve steps=100"), std::string::npos);
    const CsvTable t = read_csv(path("coefficients.csv"));
    const std::vector<std::string> header{"t", "p", "q_1", "G_1_1", "V_1", "U_1_1", "beta_1_1"};
    EXPECT_EQ(t.header, header);
    ASSERT_EQ(t.rows.size(), 101u);
    EXPECT_EQ(t.rows.back()[1], 0.0);

    const Solved s = solve(shipped("scalar").model, 100);
    EXPECT_EQ(t.rows[37][1], s.coeffs.p[37]);
    EXPECT_EQ(t.rows[37][3], s.coeffs.G[37](0, 0));
}

TEST_F(Cli, CsvUsesSeventeenDigits)
{
    EXPECT_EQ(format_double(0.1), "0.10000000000000001");
    const std::string cfg = write_config(kTiny);
    ASSERT_EQ(run({"--config", cfg, "--out-dir", dir_.string(), "solve"}), 0);
    std::ifstream in(path("coefficients.csv"));
    std::string header, row;
    std::getline(in, header);
    std::getline(in, row);
    std::getline(in, row);
    EXPECT_EQ(row.substr(0, row.find(',')), "0.01");
    std::stringstream cells(row);
    std::string cell;
    std::getline(cells, cell, ',');
    std::getline(cells, cell, ',');
    EXPECT_EQ(std::stod(cell), read_csv(path("coefficients.csv")).rows[1][1]);
}

TEST_F(Cli, NoFactorLoadingGivesZeroCoefficients)
{
    ASSERT_EQ(run({"--config", config_path("classical"), "--out", path("c.csv"), "solve"}), 2)
        << "--out belongs to the subcommand";
    ASSERT_EQ(run({"--config", config_path("classical"), "solve", "--out", path("c.csv")}), 0)
        << err_.str();
    const CsvTable t = read_csv(path("c.csv"));
    for (const auto& row : t.rows) {
        EXPECT_EQ(row[2], 0.0);
        EXPECT_EQ(row[3], 0.0);
    }
}

TEST_F(Cli, FrontierRowsMatchClassicalFormula)
{
    const std::string out = path("f.csv");
    ASSERT_EQ(run({"--config", config_path("classical"), "frontier", "--out", out, "--xbar", "1.1",
                   "1.2"}),
              0)
        << err_.str();
    const RunConfig cfg = shipped("classical");
    const double theta2 = oracle::theta_squared(cfg.model.a, 0.05, cfg.model.sigma.values[0]);
    const CsvTable t = read_csv(out);
    ASSERT_EQ(t.rows.size(), 2u);
    for (const auto& row : t.rows) {
        const double expect = oracle::classical_variance(row[0] - std::exp(0.05), theta2, 1.0);
        EXPECT_NEAR(row[2], expect, 1e-12 * expect);
        EXPECT_DOUBLE_EQ(row[3] * row[3], row[2]);
    }
    EXPECT_NE(out_.str().find("command=frontier points=2"), std::string::npos);
}

TEST_F(Cli, SimulateIsReproducible)
{
    const std::string cfg = write_config(kTiny);
    ASSERT_EQ(run({"--config", cfg, "simulate", "--out", path("a.csv"), "--terminal-out",
                   path("ta.csv")}),
              0)
        << err_.str();
    const std::string line_a = out_.str();
    ASSERT_EQ(run({"--config", cfg, "simulate", "--out", path("b.csv"), "--terminal-out",
                   path("tb.csv")}),
              0);
    EXPECT_EQ(slurp(path("ta.csv")), slurp(path("tb.csv")));
    EXPECT_EQ(read_csv(path("ta.csv")).rows.size(), 200u);
    ASSERT_EQ(run({"--seed", "4", "--config", cfg, "simulate", "--out", path("c.csv"),
                   "--terminal-out", path("tc.csv")}),
              0);
    EXPECT_NE(slurp(path("ta.csv")), slurp(path("tc.csv")));
    EXPECT_NE(line_a.find("mean_X_T="), std::string::npos);
    EXPECT_NE(line_a.find("e2xi_direct_status="), std::string::npos);
}

TEST_F(Cli, FilterRoundTrip)
{
    const std::string cfg = write_config(kTiny);
    ASSERT_EQ(run({"--config", cfg, "simulate", "--paths", "1", "--out", path("s.csv"), "--trace-out",
                   path("trace.csv")}),
              0)
        << err_.str();
    ASSERT_EQ(run({"--config", cfg, "filter", "--prices", path("trace.csv"), "--out", path("f.csv")}), 0)
        << err_.str();
    const CsvTable trace = read_csv(path("trace.csv"));
    const CsvTable filt = read_csv(path("f.csv"));
    ASSERT_EQ(trace.rows.size(), filt.rows.size());
    // trace columns: t, logS_1, y_1, yhat_1, dv_1, X; filter columns: t, yhat_1, dv_1
    for (std::size_t k = 0; k < trace.rows.size(); ++k) {
        EXPECT_EQ(filt.rows[k][1], trace.rows[k][3]);
        EXPECT_EQ(filt.rows[k][2], trace.rows[k][4]);
    }
}

TEST_F(Cli, FilterRejectsWrongLength)
{
    const std::string cfg = write_config(kTiny);
    const std::string prices = path("p.csv");
    std::ofstream(prices) << "t,logS_1\n0,0\n0.01,0.001\n";
    EXPECT_EQ(run({"--config", cfg, "filter", "--prices", prices}), 6);
    std::ofstream(prices, std::ios::trunc) << "t,logS_1\n0,0\n0.01\n";
    EXPECT_EQ(run({"--config", cfg, "filter", "--prices", prices}), 6);
}

TEST_F(Cli, ExitCodes)
{
    EXPECT_EQ(run({"solve"}), 2);
    EXPECT_EQ(run({"--config", path("missing.json"), "solve"}), 2);
    EXPECT_EQ(run({"--config", write_config("{not json"), "solve"}), 2);

    std::string singular = kTiny;
    singular.replace(singular.find("[[0.1, 0.25]]"), 13, "[[0.0, 0.0]]");
    EXPECT_EQ(run({"--config", write_config(singular), "solve"}), 2);

    EXPECT_EQ(run({"--config", write_config(kTiny), "frontier", "--xbar", "0.9"}), 2);

    // No excess return anywhere: E[e^{2 xi}] e^{-2 int r} = 1.
    std::string degenerate = kTiny;
    degenerate.replace(degenerate.find("\"A\": [[0.6]]"), 12, "\"A\": [[0.0]]");
    degenerate.replace(degenerate.find("\"a\": [0.08]"), 11, "\"a\": [0.03]");
    EXPECT_EQ(run({"--config", write_config(degenerate), "frontier", "--xbar", "2.0"}), 4)
        << err_.str();

    // Explosive G: the Riccati solution blows up within the horizon.
    std::string blowup = kTiny;
    blowup.replace(blowup.find("\"T\": 1.0"), 8, "\"T\": 40.0");
    blowup.replace(blowup.find("\"A\": [[0.6]]"), 12, "\"A\": [[9.0]]");
    blowup.replace(blowup.find("\"D\": [[-1.0]]"), 13, "\"D\": [[ 3.0]]");
    const int code = run({"--config", write_config(blowup), "solve"});
    EXPECT_TRUE(code == 3 || code == 5) << code << " " << err_.str();

    EXPECT_EQ(exit_code_for(ErrorCode::NonFinite), 5);
    EXPECT_EQ(exit_code_for(ErrorCode::StepTooCoarse), 3);
    EXPECT_EQ(exit_code_for(ErrorCode::LengthMismatch), 6);
    EXPECT_EQ(exit_code_for(ErrorCode::DimensionMismatch), 2);
}
