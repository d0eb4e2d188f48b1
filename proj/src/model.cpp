#include "mvpi/model.hpp"

#include "mvpi/error.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace mvpi {

std::string_view to_string(ErrorCode code)
{
    switch (code) {
    case ErrorCode::DimensionMismatch: return "DimensionMismatch";
    case ErrorCode::NotPositiveDefinite: return "NotPositiveDefinite";
    case ErrorCode::NonPositiveScalar: return "NonPositiveScalar";
    case ErrorCode::InvalidConfig: return "InvalidConfig";
    case ErrorCode::OutOfHorizon: return "OutOfHorizon";
    case ErrorCode::GridMismatch: return "GridMismatch";
    case ErrorCode::LengthMismatch: return "LengthMismatch";
    case ErrorCode::StepTooCoarse: return "StepTooCoarse";
    case ErrorCode::SingularBlock: return "SingularBlock";
    case ErrorCode::Unsupported: return "Unsupported";
    case ErrorCode::TargetBelowBond: return "TargetBelowBond";
    case ErrorCode::DegenerateMarket: return "DegenerateMarket";
    case ErrorCode::NonFinite: return "NonFinite";
    case ErrorCode::ZeroInitialZ: return "ZeroInitialZ";
    }
    return "Unknown";
}

namespace {

void require_shape(const MatrixXd& mat, Eigen::Index rows, Eigen::Index cols, const char* name)
{
    if (mat.rows() != rows || mat.cols() != cols) {
        std::ostringstream os;
        os << name << " is " << mat.rows() << "x" << mat.cols() << ", expected " << rows << "x"
           << cols;
        throw Error(ErrorCode::DimensionMismatch, os.str());
    }
}

void require_size(const VectorXd& vec, Eigen::Index size, const char* name)
{
    if (vec.size() != size) {
        std::ostringstream os;
        os << name << " has length " << vec.size() << ", expected " << size;
        throw Error(ErrorCode::DimensionMismatch, os.str());
    }
}

void require_positive(double value, const char* name)
{
    if (!(value > 0.0) || !std::isfinite(value))
        throw Error(ErrorCode::NonPositiveScalar, std::string(name) + " must be positive and finite");
}

template <class Derived>
void require_finite(const Eigen::DenseBase<Derived>& x, const char* name)
{
    if (!x.allFinite())
        throw Error(ErrorCode::InvalidConfig, std::string(name) + " contains non-finite entries");
}

template <class T>
void check_knots(const PiecewiseConstant<T>& pc, double horizon, const char* name)
{
    const auto& k = pc.knots;
    if (pc.values.empty() || k.size() != pc.values.size() + 1)
        throw Error(ErrorCode::DimensionMismatch,
                    std::string(name) + ": need one more knot than values");
    if (k.front() != 0.0 || std::abs(k.back() - horizon) > 1e-12 * horizon)
        throw Error(ErrorCode::DimensionMismatch,
                    std::string(name) + ": knots must start at 0 and end at T");
    for (std::size_t i = 1; i < k.size(); ++i)
        if (!(k[i] > k[i - 1]))
            throw Error(ErrorCode::DimensionMismatch,
                        std::string(name) + ": knots must be strictly increasing");
}

}  // namespace

MatrixXd gamma_sqrt(const MatrixXd& gamma, double pd_tolerance)
{
    if (gamma.rows() != gamma.cols())
        throw Error(ErrorCode::DimensionMismatch, "gamma must be square");
    const MatrixXd sym = 0.5 * (gamma + gamma.transpose());
    Eigen::SelfAdjointEigenSolver<MatrixXd> eig(sym);
    const VectorXd& lambda = eig.eigenvalues();
    const double largest = lambda.maxCoeff();
    const double smallest = lambda.minCoeff();
    if (!(largest > 0.0) || !(smallest > pd_tolerance * largest)) {
        std::ostringstream os;
        os << "smallest eigenvalue " << smallest << " vs largest " << largest;
        throw Error(ErrorCode::NotPositiveDefinite, os.str());
    }
    const MatrixXd& vecs = eig.eigenvectors();
    MatrixXd root = vecs * lambda.cwiseSqrt().asDiagonal() * vecs.transpose();
    return 0.5 * (root + root.transpose());
}

MarketModel validate_model(const RawModel& raw, double pd_tolerance)
{
    require_positive(raw.horizon, "T");
    require_positive(raw.x0, "x0");
    require_positive(raw.s0, "s0");

    const Eigen::Index m = raw.a.size();
    const Eigen::Index n = raw.d.size();
    if (m < 1 || n < 1)
        throw Error(ErrorCode::DimensionMismatch, "need at least one stock and one factor");

    require_shape(raw.A, m, n, "A");
    require_shape(raw.D, n, n, "D");
    require_shape(raw.Lambda, n, n + m, "Lambda");
    require_size(raw.y0, n, "y0");
    require_size(raw.s, m, "s");
    for (Eigen::Index i = 0; i < m; ++i) require_positive(raw.s(i), "s_i");

    require_finite(raw.a, "a");
    require_finite(raw.A, "A");
    require_finite(raw.d, "d");
    require_finite(raw.D, "D");
    require_finite(raw.Lambda, "Lambda");
    require_finite(raw.y0, "y0");

    check_knots(raw.rate, raw.horizon, "r");
    check_knots(raw.sigma, raw.horizon, "sigma");
    for (double v : raw.rate.values)
        if (!std::isfinite(v)) throw Error(ErrorCode::InvalidConfig, "r contains non-finite values");

    MarketModel model;
    model.raw_ = raw;
    // Pin the last knots to exactly T so that lookups at T are unambiguous.
    model.raw_.rate.knots.back() = raw.horizon;
    model.raw_.sigma.knots.back() = raw.horizon;

    for (const MatrixXd& sigma : raw.sigma.values) {
        require_shape(sigma, m, n + m, "sigma");
        require_finite(sigma, "sigma");
        VolatilityPiece piece;
        piece.sigma = sigma;
        piece.gamma = sigma * sigma.transpose();
        piece.sqrt = gamma_sqrt(piece.gamma, pd_tolerance);
        piece.gamma_inv = piece.gamma.ldlt().solve(MatrixXd::Identity(m, m));
        piece.gamma_inv = 0.5 * (piece.gamma_inv + piece.gamma_inv.transpose());
        piece.sqrt_inv = piece.sqrt.ldlt().solve(MatrixXd::Identity(m, m));
        piece.sqrt_inv = 0.5 * (piece.sqrt_inv + piece.sqrt_inv.transpose());
        piece.gamma_diag = piece.gamma.diagonal();
        model.pieces_.push_back(std::move(piece));
    }

    auto& bp = model.breakpoints_;
    bp = model.raw_.rate.knots;
    bp.insert(bp.end(), model.raw_.sigma.knots.begin(), model.raw_.sigma.knots.end());
    std::sort(bp.begin(), bp.end());
    bp.erase(std::unique(bp.begin(), bp.end()), bp.end());
    return model;
}

double rate_integral(const MarketModel& model, double t0, double t1)
{
    const double T = model.horizon();
    if (t0 < 0.0 || t1 > T || t0 > t1)
        throw Error(ErrorCode::OutOfHorizon, "integration bounds outside [0, T]");
    const auto& rate = model.rate();
    double sum = 0.0;
    for (std::size_t i = 0; i < rate.piece_count(); ++i) {
        const double lo = std::max(t0, rate.knots[i]);
        const double hi = std::min(t1, rate.knots[i + 1]);
        if (hi > lo) sum += rate.values[i] * (hi - lo);
    }
    return sum;
}

double discount(double t, const MarketModel& model)
{
    if (t < 0.0 || t > model.horizon())
        throw Error(ErrorCode::OutOfHorizon, "t outside [0, T]");
    return std::exp(-rate_integral(model, t, model.horizon()));
}

double bond_growth(double t, const MarketModel& model)
{
    if (t < 0.0 || t > model.horizon())
        throw Error(ErrorCode::OutOfHorizon, "t outside [0, T]");
    return std::exp(rate_integral(model, 0.0, t));
}

TimeGrid::TimeGrid(double horizon, std::size_t steps)
    : horizon_(horizon), steps_(steps), step_(horizon / static_cast<double>(steps))
{
    if (steps == 0 || !(horizon > 0.0))
        throw Error(ErrorCode::InvalidConfig, "grid needs a positive horizon and at least one step");
}

double TimeGrid::node(std::size_t k) const
{
    if (k >= steps_) return horizon_;
    return horizon_ * static_cast<double>(k) / static_cast<double>(steps_);
}

std::optional<std::size_t> TimeGrid::find(double t) const
{
    if (t < -1e-9 * step_ || t > horizon_ + 1e-9 * step_) return std::nullopt;
    const double x = t / step_;
    const double k = std::round(x);
    if (std::abs(x - k) > 1e-9) return std::nullopt;
    return static_cast<std::size_t>(k);
}

std::size_t TimeGrid::index_of(double t) const
{
    if (auto k = find(t)) return *k;
    std::ostringstream os;
    os << "t = " << t << " is not a node of the grid with step " << step_;
    throw Error(ErrorCode::GridMismatch, os.str());
}

TimeGrid make_grid(const MarketModel& model, std::size_t steps)
{
    TimeGrid grid(model.horizon(), steps);
    for (double t : model.breakpoints()) {
        if (!grid.find(t)) {
            std::ostringstream os;
            os << "breakpoint " << t << " does not coincide with a node of a " << steps
               << "-step grid";
            throw Error(ErrorCode::GridMismatch, os.str());
        }
    }
    return grid;
}

std::size_t interval_piece(const MarketModel& model, const TimeGrid& grid, std::size_t k)
{
    return model.sigma().piece_index(grid.interval_mid(std::min(k, grid.steps() - 1)));
}

std::size_t node_piece(const MarketModel& model, const TimeGrid& grid, std::size_t k)
{
    return interval_piece(model, grid, k);
}

}  // namespace mvpi
