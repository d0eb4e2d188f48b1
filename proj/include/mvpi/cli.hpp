#pragma once

#include "mvpi/config.hpp"
#include "mvpi/error.hpp"

#include <iosfwd>
#include <optional>
#include <string>

namespace mvpi {

namespace exit_code {
inline constexpr int ok = 0;
inline constexpr int validation = 2;
inline constexpr int solver = 3;
inline constexpr int degenerate_market = 4;
inline constexpr int non_finite = 5;
inline constexpr int length_mismatch = 6;
}  // namespace exit_code

int exit_code_for(ErrorCode code);

struct SimulateOptions {
    std::optional<double> x_bar;
    std::string out;                 ///< summary CSV; empty means <out-dir>/simulate.csv
    std::string terminal_out;        ///< optional per-path X(T)
    std::string trace_out;           ///< optional series of path 0 (t, logS_1..m, ...)
};

/// Each command writes its CSV, prints a one-line key=value summary to `out`
/// and returns a process exit code. Library errors propagate as mvpi::Error.
int cmd_solve(const RunConfig& cfg, const std::string& csv_path, std::ostream& out);
int cmd_frontier(const RunConfig& cfg, const std::string& csv_path, std::ostream& out);
int cmd_simulate(const RunConfig& cfg, const SimulateOptions& opts, std::ostream& out);
int cmd_filter(const RunConfig& cfg, const std::string& prices_csv, const std::string& csv_path,
               std::ostream& out);

/// Parses argv, runs one subcommand and maps errors to exit codes.
int run_cli(int argc, char** argv, std::ostream& out, std::ostream& err);

}  // namespace mvpi
