#pragma once

#include "mvpi/filter.hpp"
#include "mvpi/model.hpp"

#include <vector>

namespace mvpi {

/// Coefficients of f(t, y) = exp{p(t) + q(t)^T y + y^T G(t) y} on the filter grid,
/// plus the policy terms V(t) = a - r 1 + C^T q and U(t) = A + 2 C^T G,
/// where C = Lambda sigma^T + beta A^T.
struct HJBCoefficients {
    TimeGrid grid;
    std::vector<MatrixXd> G;  ///< n x n, symmetric
    std::vector<VectorXd> q;  ///< n
    std::vector<double> p;
    std::vector<VectorXd> V;  ///< m
    std::vector<MatrixXd> U;  ///< m x n
};

/// Backward RK4 from G(T) = 0 for
///   dG/dt = A^T Gamma^{-1} A + 2 G N G + F^T G + G F,
///   N = C Gamma^{-1} C^T,  F = 2 C Gamma^{-1} A - D.
std::vector<MatrixXd> solve_G(const MarketModel& model, const FilterSolution& filter);

/// Same equation in Vec form, d vec(G)/dt = P1 vec(G) + P2 + vec(2 G N G) with
/// P1 = I (x) F^T + F^T (x) I, solved by variation of constants with the
/// fundamental matrix of P1; the quadratic term is resolved by Picard iteration.
std::vector<MatrixXd> solve_G_kron(const MarketModel& model, const FilterSolution& filter);

/// Backward RK4 from q(T) = 0 for
///   dq/dt = F^T q + 2 G N q - 2 G d + 2 A^T Gamma^{-1} e + 4 G C Gamma^{-1} e,  e = a - r 1.
std::vector<VectorXd> solve_q(const MarketModel& model, const FilterSolution& filter,
                              const std::vector<MatrixXd>& G);

/// Backward RK4 from p(T) = 0 for
///   dp/dt = -2r - q^T d + q^T N q / 2 - Tr[N G] + e^T Gamma^{-1} e + 2 e^T Gamma^{-1} C^T q.
std::vector<double> solve_p(const MarketModel& model, const FilterSolution& filter,
                            const std::vector<MatrixXd>& G, const std::vector<VectorXd>& q);

/// Runs solve_G, solve_q, solve_p and assembles V and U.
HJBCoefficients solve_hjb(const MarketModel& model, const FilterSolution& filter);

HJBCoefficients assemble_coefficients(const MarketModel& model, const FilterSolution& filter,
                                      std::vector<MatrixXd> G, std::vector<VectorXd> q,
                                      std::vector<double> p);

/// exp{p(t) + q(t)^T y + y^T G(t) y}; t must be a grid node.
double f_value(const HJBCoefficients& coeffs, double t, const VectorXd& y_hat);

struct SamplePoint {
    double t;
    VectorXd y_hat;
};

/// Max over the sample points of |L f| / f, where L is the f-PDE
///   f_t + 2 r f + f_y^T (d + D y) + Tr[N f_yy] / 2
///     - (b f + C^T f_y)^T Gamma^{-1} (b f + C^T f_y) / f,   b = a + A y - r 1,
/// with f_y, f_yy by central differences of step fd_step and f_t from the grid.
/// Sample times must be interior grid nodes.
double hjb_residual(const MarketModel& model, const FilterSolution& filter,
                    const HJBCoefficients& coeffs, const std::vector<SamplePoint>& points,
                    double fd_step);

}  // namespace mvpi
