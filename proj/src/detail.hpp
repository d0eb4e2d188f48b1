#pragma once

// Shared numerical building blocks for the solvers. Not installed.

#include "mvpi/model.hpp"

#include <cmath>

namespace mvpi::detail {

/// Quantities that appear in every coefficient ODE, evaluated for one
/// volatility piece, rate value and filter covariance.
struct LocalCoefficients {
    MatrixXd C;        ///< n x m, Lambda sigma^T + beta A^T
    MatrixXd C_gi;     ///< n x m, C Gamma^{-1}
    MatrixXd N;        ///< n x n, C Gamma^{-1} C^T
    MatrixXd Q;        ///< n x n, A^T Gamma^{-1} A
    MatrixXd F;        ///< n x n, 2 C Gamma^{-1} A - D  (linear part of the G equation)
    VectorXd excess;   ///< m, a - r 1
    VectorXd gi_excess;///< m, Gamma^{-1}(a - r 1)
};

inline LocalCoefficients local_coefficients(const MarketModel& model, const VolatilityPiece& piece,
                                            double r, const MatrixXd& beta)
{
    LocalCoefficients c;
    c.C = model.Lambda() * piece.sigma.transpose() + beta * model.A().transpose();
    c.C_gi = c.C * piece.gamma_inv;
    c.N = c.C_gi * c.C.transpose();
    c.N = 0.5 * (c.N + c.N.transpose());
    c.Q = model.A().transpose() * piece.gamma_inv * model.A();
    c.Q = 0.5 * (c.Q + c.Q.transpose());
    c.F = 2.0 * c.C_gi * model.A() - model.D();
    c.excess = model.a().array() - r;
    c.gi_excess = piece.gamma_inv * c.excess;
    return c;
}

/// Right-hand side of the filter covariance Riccati equation.
inline MatrixXd beta_rhs(const MarketModel& model, const VolatilityPiece& piece, const MatrixXd& beta)
{
    const MatrixXd C = model.Lambda() * piece.sigma.transpose() + beta * model.A().transpose();
    MatrixXd out = model.D() * beta + beta * model.D().transpose()
                   + model.Lambda() * model.Lambda().transpose()
                   - C * piece.gamma_inv * C.transpose();
    return 0.5 * (out + out.transpose());
}

/// Cubic Hermite interpolation on an interval of length h at fraction s in [0, 1].
template <class T>
T hermite(const T& y0, const T& y1, const T& dy0, const T& dy1, double h, double s)
{
    const double s2 = s * s;
    const double s3 = s2 * s;
    const double h00 = 2 * s3 - 3 * s2 + 1;
    const double h10 = s3 - 2 * s2 + s;
    const double h01 = -2 * s3 + 3 * s2;
    const double h11 = s3 - s2;
    return h00 * y0 + (h10 * h) * dy0 + h01 * y1 + (h11 * h) * dy1;
}

inline double max_asymmetry(const MatrixXd& m)
{
    return (m - m.transpose()).cwiseAbs().maxCoeff();
}

inline MatrixXd symmetrized(const MatrixXd& m) { return 0.5 * (m + m.transpose()); }

/// out = M x for the tiny dense products of the path loops, where Eigen's
/// dynamic-size product dispatch costs more than the arithmetic.
inline void matvec(const MatrixXd& M, const VectorXd& x, VectorXd& out)
{
    const Eigen::Index rows = M.rows();
    const Eigen::Index cols = M.cols();
    const double* a = M.data();
    const double* xv = x.data();
    double* o = out.data();
    for (Eigen::Index i = 0; i < rows; ++i) {
        double acc = 0.0;
        for (Eigen::Index j = 0; j < cols; ++j) acc += a[i + j * rows] * xv[j];
        o[i] = acc;
    }
}

/// out += M x
inline void matvec_add(const MatrixXd& M, const VectorXd& x, VectorXd& out)
{
    const Eigen::Index rows = M.rows();
    const Eigen::Index cols = M.cols();
    const double* a = M.data();
    const double* xv = x.data();
    double* o = out.data();
    for (Eigen::Index i = 0; i < rows; ++i) {
        double acc = 0.0;
        for (Eigen::Index j = 0; j < cols; ++j) acc += a[i + j * rows] * xv[j];
        o[i] += acc;
    }
}

}  // namespace mvpi::detail
