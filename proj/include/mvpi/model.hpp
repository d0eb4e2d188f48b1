#pragma once

#include <Eigen/Dense>

#include <cstddef>
#include <optional>
#include <vector>

namespace mvpi {

using Eigen::MatrixXd;
using Eigen::VectorXd;

/// Right-continuous step function on [knots.front(), knots.back()].
/// values[i] holds on [knots[i], knots[i+1]); the final knot maps to the last piece.
template <class T>
struct PiecewiseConstant {
    std::vector<double> knots;
    std::vector<T> values;

    static PiecewiseConstant constant(double horizon, T value)
    {
        return {{0.0, horizon}, {std::move(value)}};
    }

    std::size_t piece_count() const { return values.size(); }

    std::size_t piece_index(double t) const
    {
        std::size_t i = 0;
        while (i + 1 < values.size() && t >= knots[i + 1]) ++i;
        return i;
    }

    const T& at(double t) const { return values[piece_index(t)]; }
};

/// Volatility on one constant interval, with the derived Gram-matrix quantities
/// every solver needs.
struct VolatilityPiece {
    MatrixXd sigma;      ///< m x (n+m)
    MatrixXd gamma;      ///< sigma sigma^T
    MatrixXd gamma_inv;
    MatrixXd sqrt;       ///< principal square root of gamma (symmetric)
    MatrixXd sqrt_inv;
    VectorXd gamma_diag; ///< diagonal of gamma, the Ito correction of log-prices
};

/// Unvalidated parameter bundle, as parsed from a config document.
struct RawModel {
    PiecewiseConstant<double> rate;
    VectorXd a;
    MatrixXd A;
    VectorXd d;
    MatrixXd D;
    MatrixXd Lambda;
    PiecewiseConstant<MatrixXd> sigma;
    double x0 = 1.0;
    VectorXd y0;
    double s0 = 1.0;
    VectorXd s;
    double horizon = 1.0;
};

/// Validated market/factor model. Immutable; only validate_model() builds one.
class MarketModel {
public:
    int m() const { return static_cast<int>(raw_.a.size()); }
    int n() const { return static_cast<int>(raw_.d.size()); }
    double horizon() const { return raw_.horizon; }
    double x0() const { return raw_.x0; }
    const VectorXd& y0() const { return raw_.y0; }
    double s0() const { return raw_.s0; }
    const VectorXd& s() const { return raw_.s; }
    const VectorXd& a() const { return raw_.a; }
    const MatrixXd& A() const { return raw_.A; }
    const VectorXd& d() const { return raw_.d; }
    const MatrixXd& D() const { return raw_.D; }
    const MatrixXd& Lambda() const { return raw_.Lambda; }
    const PiecewiseConstant<double>& rate() const { return raw_.rate; }
    const PiecewiseConstant<MatrixXd>& sigma() const { return raw_.sigma; }

    const std::vector<VolatilityPiece>& pieces() const { return pieces_; }
    const VolatilityPiece& piece_at(double t) const { return pieces_[raw_.sigma.piece_index(t)]; }
    double r(double t) const { return raw_.rate.at(t); }

    /// Every time at which r or sigma may jump, including 0 and T.
    const std::vector<double>& breakpoints() const { return breakpoints_; }

    /// True when sigma has a single piece over [0, T].
    bool constant_volatility() const { return pieces_.size() == 1; }

    const RawModel& raw() const { return raw_; }

private:
    friend MarketModel validate_model(const RawModel&, double);
    RawModel raw_;
    std::vector<VolatilityPiece> pieces_;
    std::vector<double> breakpoints_;
};

inline constexpr double kDefaultPdTolerance = 1e-10;

/// Checks shapes, positivity and that sigma sigma^T is positive definite on
/// every interval (smallest eigenvalue > tol * largest).
MarketModel validate_model(const RawModel& raw, double pd_tolerance = kDefaultPdTolerance);

/// Principal (SPD) square root of an SPD matrix.
MatrixXd gamma_sqrt(const MatrixXd& gamma, double pd_tolerance = kDefaultPdTolerance);

/// Exact integral of the piecewise-constant rate over [t0, t1].
double rate_integral(const MarketModel& model, double t0, double t1);

/// e^{-int_t^T r(s) ds}
double discount(double t, const MarketModel& model);

/// e^{int_0^t r(s) ds}
double bond_growth(double t, const MarketModel& model);

/// Uniform grid t_k = k T / N on [0, T].
class TimeGrid {
public:
    TimeGrid() = default;
    TimeGrid(double horizon, std::size_t steps);

    std::size_t steps() const { return steps_; }
    std::size_t size() const { return steps_ + 1; }
    double step() const { return step_; }
    double horizon() const { return horizon_; }
    double node(std::size_t k) const;

    /// Index of the node equal to t (relative tolerance 1e-9 of a step).
    std::optional<std::size_t> find(double t) const;
    /// As find(), but throws GridMismatch.
    std::size_t index_of(double t) const;

    /// Midpoint of interval k, used to pick the coefficient piece of that interval.
    double interval_mid(std::size_t k) const { return 0.5 * (node(k) + node(k + 1)); }

private:
    double horizon_ = 0.0;
    std::size_t steps_ = 0;
    double step_ = 0.0;
};

/// Grid whose nodes include every breakpoint of the model; throws GridMismatch otherwise.
TimeGrid make_grid(const MarketModel& model, std::size_t steps);

/// Piece index governing grid interval k (k < steps), i.e. [t_k, t_{k+1}).
std::size_t interval_piece(const MarketModel& model, const TimeGrid& grid, std::size_t k);

/// Piece index used for quantities evaluated at node k (right-continuous; the
/// final node uses the last interval).
std::size_t node_piece(const MarketModel& model, const TimeGrid& grid, std::size_t k);

}  // namespace mvpi
