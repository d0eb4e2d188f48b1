#include "mvpi/filter.hpp"

#include "detail.hpp"
#include "mvpi/error.hpp"

#include <unsupported/Eigen/MatrixFunctions>

#include <cmath>
#include <sstream>

namespace mvpi {

namespace {

constexpr double kPsdTolerance = 1e-10;

void check_covariance(const MatrixXd& beta, std::size_t k)
{
    if (!beta.allFinite()) {
        std::ostringstream os;
        os << "beta became non-finite at node " << k;
        throw Error(ErrorCode::StepTooCoarse, os.str());
    }
    const double scale = std::max(1.0, beta.cwiseAbs().maxCoeff());
    if (detail::max_asymmetry(beta) > 1e-10 * scale) {
        std::ostringstream os;
        os << "beta lost symmetry at node " << k;
        throw Error(ErrorCode::StepTooCoarse, os.str());
    }
    Eigen::SelfAdjointEigenSolver<MatrixXd> eig(detail::symmetrized(beta), Eigen::EigenvaluesOnly);
    if (eig.eigenvalues().minCoeff() < -kPsdTolerance * scale) {
        std::ostringstream os;
        os << "beta lost positive semidefiniteness at node " << k << " (min eigenvalue "
           << eig.eigenvalues().minCoeff() << ")";
        throw Error(ErrorCode::StepTooCoarse, os.str());
    }
}

}  // namespace

MatrixXd FilterSolution::beta_between(std::size_t k, double s) const
{
    return detail::hermite(beta[k], beta[k + 1], rate_start[k], rate_end[k], grid.step(), s);
}

FilterSolution solve_beta(const MarketModel& model, const TimeGrid& grid)
{
    const int n = model.n();
    const std::size_t steps = grid.steps();
    const double h = grid.step();

    FilterSolution sol;
    sol.grid = grid;
    sol.beta.reserve(steps + 1);
    sol.rate_start.reserve(steps);
    sol.rate_end.reserve(steps);
    sol.beta.push_back(MatrixXd::Zero(n, n));

    for (std::size_t k = 0; k < steps; ++k) {
        const VolatilityPiece& piece = model.pieces()[interval_piece(model, grid, k)];
        const MatrixXd& b = sol.beta.back();
        const MatrixXd k1 = detail::beta_rhs(model, piece, b);
        const MatrixXd k2 = detail::beta_rhs(model, piece, b + 0.5 * h * k1);
        const MatrixXd k3 = detail::beta_rhs(model, piece, b + 0.5 * h * k2);
        const MatrixXd k4 = detail::beta_rhs(model, piece, b + h * k3);
        MatrixXd next = b + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
        check_covariance(next, k + 1);
        next = detail::symmetrized(next);
        sol.rate_start.push_back(k1);
        sol.rate_end.push_back(detail::beta_rhs(model, piece, next));
        sol.beta.push_back(std::move(next));
    }

    sol.gain.reserve(steps + 1);
    for (std::size_t k = 0; k <= steps; ++k) {
        const VolatilityPiece& piece = model.pieces()[node_piece(model, grid, k)];
        const MatrixXd C =
            model.Lambda() * piece.sigma.transpose() + sol.beta[k] * model.A().transpose();
        sol.gain.push_back(C * piece.sqrt_inv);
    }
    return sol;
}

MatrixXd beta_hamiltonian(const MarketModel& model, double t)
{
    if (!model.constant_volatility())
        throw Error(ErrorCode::Unsupported, "Hamiltonian representation needs constant volatility");
    if (t < 0.0 || t > model.horizon()) throw Error(ErrorCode::OutOfHorizon, "t outside [0, T]");

    const int n = model.n();
    const VolatilityPiece& piece = model.pieces().front();
    const MatrixXd& A = model.A();
    const MatrixXd& L = model.Lambda();
    const MatrixXd cross = L * piece.sigma.transpose() * piece.gamma_inv;  // Lambda sigma^T Gamma^{-1}

    const MatrixXd F = model.D() - cross * A;
    const MatrixXd M = A.transpose() * piece.gamma_inv * A;
    const MatrixXd Q = L * L.transpose() - cross * piece.sigma * L.transpose();

    MatrixXd H(2 * n, 2 * n);
    H.topLeftCorner(n, n) = -F.transpose();
    H.topRightCorner(n, n) = M;
    H.bottomLeftCorner(n, n) = Q;
    H.bottomRightCorner(n, n) = F;

    const MatrixXd flow = (H * t).exp();
    const MatrixXd K = flow.topLeftCorner(n, n);
    const MatrixXd Lb = flow.bottomLeftCorner(n, n);

    // beta = L K^{-1}  <=>  K^T beta^T = L^T
    Eigen::PartialPivLU<MatrixXd> lu(K.transpose());
    if (!(lu.rcond() > 1e-13)) throw Error(ErrorCode::SingularBlock, "K block is singular");
    MatrixXd beta = lu.solve(Lb.transpose()).transpose();
    return detail::symmetrized(beta);
}

FilterState FilterState::initial(const MarketModel& model)
{
    return FilterState{0.0, model.y0(), {}};
}

namespace detail {

void advance_filter(const MarketModel& model, const VolatilityPiece& piece, const MatrixXd& gain,
                    const VectorXd& dY, double dt, VectorXd& y_hat, VectorXd& dv,
                    FilterWorkspace& ws)
{
    const Eigen::Index m = dY.size();
    ws.predicted.resize(m);
    ws.residual.resize(m);
    matvec(model.A(), y_hat, ws.predicted);
    for (Eigen::Index i = 0; i < m; ++i)
        ws.residual(i) = dY(i) - dt * (ws.predicted(i) + model.a()(i) - 0.5 * piece.gamma_diag(i));
    matvec(piece.sqrt_inv, ws.residual, dv);
    advance_factor_drift(model, dt, y_hat, ws.drift);
    matvec_add(gain, dv, y_hat);
}

void advance_factor_drift(const MarketModel& model, double dt, VectorXd& y, VectorXd& drift)
{
    drift.resize(y.size());
    matvec(model.D(), y, drift);
    for (Eigen::Index i = 0; i < y.size(); ++i) y(i) += dt * (drift(i) + model.d()(i));
}

}  // namespace detail

FilterStep filter_step(FilterState state, const MarketModel& model, const FilterSolution& solution,
                       const VectorXd& dY, double dt)
{
    const TimeGrid& grid = solution.grid;
    const std::size_t k = grid.index_of(state.t);
    if (k >= grid.steps()) throw Error(ErrorCode::GridMismatch, "no filter step beyond T");
    if (std::abs(dt - grid.step()) > 1e-12 * grid.step())
        throw Error(ErrorCode::GridMismatch, "dt must equal the grid step");
    if (dY.size() != model.m())
        throw Error(ErrorCode::DimensionMismatch, "observation increment must have length m");

    const VolatilityPiece& piece = model.pieces()[interval_piece(model, grid, k)];
    detail::FilterWorkspace ws;
    VectorXd dv(model.m());
    detail::advance_filter(model, piece, solution.gain[k], dY, grid.step(), state.y_hat, dv, ws);
    state.t = grid.node(k + 1);
    state.innovations.push_back(dv);
    return FilterStep{std::move(state), std::move(dv)};
}

FilterRun run_filter(const MarketModel& model, const FilterSolution& solution,
                     const std::vector<VectorXd>& log_prices)
{
    const TimeGrid& grid = solution.grid;
    if (log_prices.size() != grid.size()) {
        std::ostringstream os;
        os << "expected " << grid.size() << " log-price rows, got " << log_prices.size();
        throw Error(ErrorCode::LengthMismatch, os.str());
    }
    for (const VectorXd& row : log_prices)
        if (row.size() != model.m())
            throw Error(ErrorCode::LengthMismatch, "every log-price row must have m entries");

    FilterRun run;
    run.y_hat.reserve(grid.size());
    run.dv.reserve(grid.size());
    run.y_hat.push_back(model.y0());
    run.dv.push_back(VectorXd::Zero(model.m()));

    FilterState state = FilterState::initial(model);
    for (std::size_t k = 0; k < grid.steps(); ++k) {
        const VectorXd dY = log_prices[k + 1] - log_prices[k];
        FilterStep step = filter_step(std::move(state), model, solution, dY, grid.step());
        state = std::move(step.state);
        run.y_hat.push_back(state.y_hat);
        run.dv.push_back(std::move(step.dv));
    }
    return run;
}

}  // namespace mvpi
