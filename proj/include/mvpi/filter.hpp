#pragma once

#include "mvpi/model.hpp"

#include <vector>

namespace mvpi {

/// Filter error covariance beta(t) and gain on a grid.
struct FilterSolution {
    TimeGrid grid;
    std::vector<MatrixXd> beta;  ///< n x n per node; beta[0] = 0
    std::vector<MatrixXd> gain;  ///< n x m per node, (Lambda sigma^T + beta A^T) Sigma^{-1}

    /// d beta/dt at both ends of interval k, using that interval's coefficients.
    std::vector<MatrixXd> rate_start;
    std::vector<MatrixXd> rate_end;

    /// beta inside interval k at fraction s in [0, 1] (cubic Hermite, 4th order).
    MatrixXd beta_between(std::size_t k, double s) const;
};

/// Forward RK4 for the covariance Riccati equation from beta(0) = 0, with
/// symmetrization after each step. Throws StepTooCoarse when beta leaves the
/// symmetric PSD class.
FilterSolution solve_beta(const MarketModel& model, const TimeGrid& grid);

/// beta(t) from the linear 2n x 2n Hamiltonian system, beta = L K^{-1} with
/// (K, L)(0) = (I, 0). Constant volatility only. Independent check of solve_beta.
MatrixXd beta_hamiltonian(const MarketModel& model, double t);

struct FilterState {
    double t = 0.0;
    VectorXd y_hat;
    std::vector<VectorXd> innovations;

    static FilterState initial(const MarketModel& model);
};

struct FilterStep {
    FilterState state;
    VectorXd dv;
};

/// One explicit Euler step of the filter driven by an observed log-price increment.
/// t must be a grid node and dt the grid step.
FilterStep filter_step(FilterState state, const MarketModel& model, const FilterSolution& solution,
                       const VectorXd& dY, double dt);

struct FilterRun {
    std::vector<VectorXd> y_hat;  ///< one per node
    std::vector<VectorXd> dv;     ///< one per node; dv[k] is the increment over [t_{k-1}, t_k], dv[0] = 0
};

/// Folds filter_step over a log-price series with one m-vector per grid node.
FilterRun run_filter(const MarketModel& model, const FilterSolution& solution,
                     const std::vector<VectorXd>& log_prices);

namespace detail {

struct FilterWorkspace {
    VectorXd predicted;
    VectorXd residual;
    VectorXd drift;
};

/// dv = Sigma^{-1}[dY - (a + A y_hat - gamma_diag / 2) dt]
/// y_hat += (d + D y_hat) dt + gain dv
void advance_filter(const MarketModel& model, const VolatilityPiece& piece, const MatrixXd& gain,
                    const VectorXd& dY, double dt, VectorXd& y_hat, VectorXd& dv,
                    FilterWorkspace& ws);

/// y += (d + D y) dt; the same drift arithmetic the filter uses.
void advance_factor_drift(const MarketModel& model, double dt, VectorXd& y, VectorXd& drift);

}  // namespace detail

}  // namespace mvpi
