#pragma once

#include "mvpi/filter.hpp"
#include "mvpi/model.hpp"
#include "mvpi/policy.hpp"

#include <cstdint>
#include <functional>
#include <optional>
#include <vector>

namespace mvpi {

struct SimRecord {
    bool terminal_wealth = false;  ///< keep X(T) of every path
    bool trace = false;            ///< keep the full series of path 0
};

struct SimConfig {
    std::size_t paths = 10000;
    double step = 0.0;             ///< h_sim; T / h_sim must be an integer
    std::uint64_t seed = 0;
    /// Each Brownian increment is the sum of this many independent N(0, h/R)
    /// draws. Runs at h and h/R with R and 1 share the same underlying noise.
    std::size_t brownian_refinement = 1;
    SimRecord record;
    std::vector<double> checkpoints;  ///< sim nodes at which filter statistics are taken
};

/// Sample mean with its standard error; no SE for a single sample.
struct Estimate {
    double value = 0.0;
    std::optional<double> se;
};

struct CheckpointStats {
    double t = 0.0;
    double dt = 0.0;              ///< step of the innovation increment ending at t
    MatrixXd beta;                ///< filter covariance the filter itself reports
    VectorXd error_mean;          ///< mean of y - y_hat
    VectorXd error_mean_se;
    MatrixXd error_cov;           ///< sample covariance of y - y_hat
    MatrixXd error_cov_se;
    VectorXd innovation_mean;     ///< mean of the last dv
    VectorXd innovation_mean_se;
    MatrixXd innovation_cov;      ///< sample second moment of the last dv
    MatrixXd innovation_cov_se;
};

struct PathTrace {
    std::vector<double> t;
    std::vector<VectorXd> log_prices;
    std::vector<VectorXd> y;
    std::vector<VectorXd> y_hat;
    std::vector<VectorXd> dv;     ///< dv[0] = 0
    std::vector<double> wealth;
};

struct SimResult {
    std::size_t paths = 0;
    std::size_t steps = 0;
    double step = 0.0;
    Estimate wealth_mean;
    Estimate wealth_variance;     ///< unbiased sample variance, SE from the fourth moment
    /// Only under the optimal policy with z(0) != 0.
    std::optional<Estimate> e2xi_direct;  ///< exp(2 xi_T) accumulated along the filter
    std::optional<Estimate> e2xi_wealth;  ///< (z(T) / z(0))^2 from the simulated wealth
    std::vector<CheckpointStats> checkpoints;
    std::vector<double> terminal_wealth;
    std::optional<PathTrace> trace;
};

using PolicyFn = std::function<VectorXd(double t, double X, const VectorXd& y_hat)>;

/// Simulates the true market under the optimal feedback of ctx. Prices, factors and
/// wealth share one Brownian draw per step; the policy sees only the filter.
SimResult simulate_paths(const PolicyContext& ctx, const SimConfig& config);

/// Same, under an arbitrary feedback pi(t, X, y_hat).
SimResult simulate_paths(const MarketModel& model, const FilterSolution& filter,
                         const PolicyFn& policy, const SimConfig& config);

struct E2xiEstimate {
    Estimate direct;
    Estimate wealth;
    std::optional<double> joint_se;  ///< sqrt(SE_direct^2 + SE_wealth^2)
};

/// Both Monte Carlo estimators of E[e^{2 xi_T}]. Throws ZeroInitialZ if z(0) = 0.
E2xiEstimate estimate_e2xi_mc(const PolicyContext& ctx, const SimConfig& config);

struct FilterReport {
    std::vector<CheckpointStats> checkpoints;
    double max_cov_deviation = 0.0;        ///< max |Cov(y - y_hat) - beta| / SE
    double max_mean_deviation = 0.0;       ///< max |E(y - y_hat)| / SE
    double max_innovation_deviation = 0.0; ///< max |Cov(dv) - dt I| / SE
};

/// Runs the filter on simulated prices with the grid step equal to config.step
/// and compares the empirical error statistics with beta.
FilterReport verify_filter_consistency(const MarketModel& model, SimConfig config,
                                       const std::vector<double>& checkpoints);

/// |value - target| in units of se; 0 when both difference and se vanish.
double deviation_in_se(double value, double target, double se);

}  // namespace mvpi
