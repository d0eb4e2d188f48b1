#pragma once

#include "mvpi/filter.hpp"
#include "mvpi/hjb.hpp"
#include "mvpi/model.hpp"

#include <vector>

namespace mvpi {

struct FrontierPoint {
    double x_bar = 0.0;
    double gamma_star = 0.0;
    double variance = 0.0;
    double e2xi = 0.0;
};

/// Everything the optimal feedback needs, on the solver grid.
struct PolicyContext {
    MarketModel model;
    FilterSolution filter;
    HJBCoefficients coeffs;
    double alpha = 0.0;             ///< x_bar + gamma*
    std::vector<double> discount;   ///< e^{-int_{t_k}^T r} per node
    std::vector<MatrixXd> gamma_inv;///< Gamma^{-1} per node (right-continuous)
};

PolicyContext make_policy_context(const MarketModel& model, FilterSolution filter,
                                  HJBCoefficients coeffs, double alpha);

/// pi = -Gamma^{-1} [V(t) + U(t) y_hat] (X - alpha e^{-int_t^T r}); t must be a grid node.
VectorXd optimal_pi(const PolicyContext& ctx, double t, double X, const VectorXd& y_hat);

/// E[e^{2 xi_T}] = f(0, y0).
double expected_e2xi(const HJBCoefficients& coeffs, const VectorXd& y0);

/// Lagrangian dual objective
///   J(gamma) = 1/2 [x0 - (x_bar + gamma) e^{-int_0^T r}]^2 e2xi - 1/2 gamma^2.
double lagrangian(double gamma, double x_bar, const MarketModel& model, double e2xi);

/// rho = e^{-2 int_0^T r} e2xi; J is concave in gamma iff rho < 1.
double frontier_rho(const MarketModel& model, double e2xi);

/// Maximizer of lagrangian(): gamma* = Delta rho / (1 - rho), Delta = x_bar - x0 e^{int r}.
/// Throws TargetBelowBond or DegenerateMarket (rho >= 1).
double gamma_star(double x_bar, const MarketModel& model, double e2xi);

/// Variance 2 J(gamma*) = rho Delta^2 / (1 - rho).
FrontierPoint frontier_point(double x_bar, const MarketModel& model, const HJBCoefficients& coeffs);

std::vector<FrontierPoint> frontier_sweep(const std::vector<double>& targets,
                                          const MarketModel& model,
                                          const HJBCoefficients& coeffs);

}  // namespace mvpi
