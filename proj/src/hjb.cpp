#include "mvpi/hjb.hpp"

#include "detail.hpp"
#include "mvpi/error.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace mvpi {

namespace {

using detail::LocalCoefficients;

/// Coefficients at the three RK4 stage times of grid interval k, taken with the
/// interval's own volatility and rate (left limits at the right end).
struct IntervalCoefficients {
    LocalCoefficients start;  ///< at t_k
    LocalCoefficients mid;
    LocalCoefficients end;    ///< at t_{k+1}
};

std::vector<IntervalCoefficients> interval_coefficients(const MarketModel& model,
                                                        const FilterSolution& filter)
{
    const TimeGrid& grid = filter.grid;
    std::vector<IntervalCoefficients> out;
    out.reserve(grid.steps());
    for (std::size_t k = 0; k < grid.steps(); ++k) {
        const VolatilityPiece& piece = model.pieces()[interval_piece(model, grid, k)];
        const double r = model.r(grid.interval_mid(k));
        out.push_back({detail::local_coefficients(model, piece, r, filter.beta[k]),
                       detail::local_coefficients(model, piece, r, filter.beta_between(k, 0.5)),
                       detail::local_coefficients(model, piece, r, filter.beta[k + 1])});
    }
    return out;
}

MatrixXd G_rhs(const LocalCoefficients& c, const MatrixXd& G)
{
    MatrixXd out = c.Q + 2.0 * G * c.N * G + c.F.transpose() * G + G * c.F;
    return detail::symmetrized(out);
}

VectorXd q_rhs(const MarketModel& model, const LocalCoefficients& c, const MatrixXd& G,
               const VectorXd& q)
{
    return c.F.transpose() * q + 2.0 * G * (c.N * q) - 2.0 * G * model.d()
           + 2.0 * model.A().transpose() * c.gi_excess + 4.0 * G * (c.C_gi * c.excess);
}

double p_rhs(const MarketModel& model, const LocalCoefficients& c, double r, const MatrixXd& G,
             const VectorXd& q)
{
    return -2.0 * r - q.dot(model.d()) + 0.5 * q.dot(c.N * q) - (c.N * G).trace()
           + c.excess.dot(c.gi_excess) + 2.0 * (c.C_gi * c.excess).dot(q);
}

void check_symmetric_finite(const MatrixXd& G, std::size_t k)
{
    const double scale = std::max(1.0, G.cwiseAbs().maxCoeff());
    if (!G.allFinite() || detail::max_asymmetry(G) > 1e-10 * scale) {
        std::ostringstream os;
        os << "G left the symmetric class or overflowed at node " << k;
        throw Error(ErrorCode::StepTooCoarse, os.str());
    }
}

/// Column-major vec and its inverse.
VectorXd vec(const MatrixXd& m) { return Eigen::Map<const VectorXd>(m.data(), m.size()); }

MatrixXd unvec(const VectorXd& v, int n) { return Eigen::Map<const MatrixXd>(v.data(), n, n); }

MatrixXd kron(const MatrixXd& a, const MatrixXd& b)
{
    MatrixXd out(a.rows() * b.rows(), a.cols() * b.cols());
    for (Eigen::Index i = 0; i < a.rows(); ++i)
        for (Eigen::Index j = 0; j < a.cols(); ++j)
            out.block(i * b.rows(), j * b.cols(), b.rows(), b.cols()) = a(i, j) * b;
    return out;
}

/// Linear part of the vectorized G equation: vec(F^T G + G F) = P1 vec(G).
MatrixXd kron_generator(const LocalCoefficients& c)
{
    const Eigen::Index n = c.F.rows();
    const MatrixXd I = MatrixXd::Identity(n, n);
    const MatrixXd Ft = c.F.transpose();
    return kron(I, Ft) + kron(Ft, I);
}

}  // namespace

std::vector<MatrixXd> solve_G(const MarketModel& model, const FilterSolution& filter)
{
    const TimeGrid& grid = filter.grid;
    const std::size_t steps = grid.steps();
    const double h = grid.step();
    const int n = model.n();
    const auto coeffs = interval_coefficients(model, filter);

    std::vector<MatrixXd> G(steps + 1);
    G[steps] = MatrixXd::Zero(n, n);
    for (std::size_t k = steps; k-- > 0;) {
        const IntervalCoefficients& c = coeffs[k];
        const MatrixXd& g1 = G[k + 1];
        const MatrixXd k1 = G_rhs(c.end, g1);
        const MatrixXd k2 = G_rhs(c.mid, g1 - 0.5 * h * k1);
        const MatrixXd k3 = G_rhs(c.mid, g1 - 0.5 * h * k2);
        const MatrixXd k4 = G_rhs(c.start, g1 - h * k3);
        MatrixXd next = g1 - (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
        check_symmetric_finite(next, k);
        G[k] = detail::symmetrized(next);
    }
    return G;
}

std::vector<MatrixXd> solve_G_kron(const MarketModel& model, const FilterSolution& filter)
{
    const TimeGrid& grid = filter.grid;
    const std::size_t steps = grid.steps();
    const double h = grid.step();
    const int n = model.n();
    const Eigen::Index nn = static_cast<Eigen::Index>(n) * n;
    const auto coeffs = interval_coefficients(model, filter);

    // Reversed time s = T - t; s-node j is t-node steps - j, s-interval j is t-interval steps-1-j.
    auto t_interval = [steps](std::size_t j) { return steps - 1 - j; };

    // Fundamental matrix of d vec/ds = -P1 vec, Phi(0) = I.
    std::vector<MatrixXd> phi_at(steps + 1);
    std::vector<MatrixXd> phi_inv(steps + 1);
    {
        MatrixXd phi = MatrixXd::Identity(nn, nn);
        phi_at[0] = phi;
        phi_inv[0] = phi;
        for (std::size_t j = 0; j < steps; ++j) {
            const IntervalCoefficients& c = coeffs[t_interval(j)];
            const MatrixXd P_first = -kron_generator(c.end);
            const MatrixXd P_mid = -kron_generator(c.mid);
            const MatrixXd P_last = -kron_generator(c.start);
            const MatrixXd k1 = P_first * phi;
            const MatrixXd k2 = P_mid * (phi + 0.5 * h * k1);
            const MatrixXd k3 = P_mid * (phi + 0.5 * h * k2);
            const MatrixXd k4 = P_last * (phi + h * k3);
            phi += (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
            if (!phi.allFinite())
                throw Error(ErrorCode::StepTooCoarse, "fundamental matrix overflowed");
            phi_at[j + 1] = phi;
            phi_inv[j + 1] = phi.partialPivLu().inverse();
        }
    }

    // Group s-intervals by coefficient piece; quadrature stencils stay inside a piece.
    std::vector<std::size_t> piece_of(steps);
    for (std::size_t j = 0; j < steps; ++j)
        piece_of[j] = interval_piece(model, grid, t_interval(j));

    // First and last s-node of the piece containing each s-interval.
    std::vector<std::size_t> span_lo(steps), span_hi(steps);
    for (std::size_t j = 0; j < steps; ++j)
        span_lo[j] = (j > 0 && piece_of[j - 1] == piece_of[j]) ? span_lo[j - 1] : j;
    for (std::size_t j = steps; j-- > 0;)
        span_hi[j] = (j + 1 < steps && piece_of[j + 1] == piece_of[j]) ? span_hi[j + 1] : j + 1;

    // Forcing at s-node i evaluated with the coefficients of the piece of s-interval j.
    std::vector<MatrixXd> G(steps + 1, MatrixXd::Zero(n, n));
    auto forcing = [&](std::size_t i, std::size_t j) -> VectorXd {
        const VolatilityPiece& piece = model.pieces()[piece_of[j]];
        const std::size_t k = steps - i;
        const LocalCoefficients c =
            detail::local_coefficients(model, piece, 0.0, filter.beta[k]);
        const MatrixXd quad = 2.0 * G[k] * c.N * G[k];
        return phi_inv[i] * (vec(c.Q) + vec(quad));
    };

    constexpr int kMaxIterations = 200;
    for (int iter = 0;; ++iter) {
        if (iter == kMaxIterations)
            throw Error(ErrorCode::StepTooCoarse, "Picard iteration for G did not converge");

        std::vector<MatrixXd> next(steps + 1);
        VectorXd integral = VectorXd::Zero(nn);
        next[steps] = MatrixXd::Zero(n, n);  // s = 0 is t = T
        for (std::size_t j = 0; j < steps; ++j) {
            const std::size_t lo = span_lo[j];
            const std::size_t hi = span_hi[j];

            VectorXd increment;
            if (j >= lo + 1 && j + 2 <= hi) {
                increment = -forcing(j - 1, j) + 13.0 * forcing(j, j) + 13.0 * forcing(j + 1, j)
                            - forcing(j + 2, j);
            } else if (j + 3 <= hi) {
                increment = 9.0 * forcing(j, j) + 19.0 * forcing(j + 1, j)
                            - 5.0 * forcing(j + 2, j) + forcing(j + 3, j);
            } else if (j >= lo + 2) {
                increment = forcing(j - 2, j) - 5.0 * forcing(j - 1, j) + 19.0 * forcing(j, j)
                            + 9.0 * forcing(j + 1, j);
            } else {
                throw Error(ErrorCode::StepTooCoarse,
                            "each coefficient piece needs at least three grid intervals");
            }
            integral += (h / 24.0) * increment;
            next[steps - j - 1] = detail::symmetrized(unvec(-(phi_at[j + 1] * integral), n));
        }

        double change = 0.0;
        double scale = 1.0;
        for (std::size_t k = 0; k <= steps; ++k) {
            change = std::max(change, (next[k] - G[k]).cwiseAbs().maxCoeff());
            scale = std::max(scale, next[k].cwiseAbs().maxCoeff());
        }
        G = std::move(next);
        for (std::size_t k = 0; k <= steps; ++k) check_symmetric_finite(G[k], k);
        if (change <= 1e-14 * scale) break;
    }
    return G;
}

std::vector<VectorXd> solve_q(const MarketModel& model, const FilterSolution& filter,
                              const std::vector<MatrixXd>& G)
{
    const TimeGrid& grid = filter.grid;
    const std::size_t steps = grid.steps();
    if (G.size() != grid.size()) throw Error(ErrorCode::LengthMismatch, "G path has wrong length");
    const double h = grid.step();
    const auto coeffs = interval_coefficients(model, filter);

    std::vector<VectorXd> q(steps + 1);
    q[steps] = VectorXd::Zero(model.n());
    for (std::size_t k = steps; k-- > 0;) {
        const IntervalCoefficients& c = coeffs[k];
        const MatrixXd G_mid = detail::hermite(G[k], G[k + 1], G_rhs(c.start, G[k]),
                                               G_rhs(c.end, G[k + 1]), h, 0.5);
        const VectorXd& q1 = q[k + 1];
        const VectorXd k1 = q_rhs(model, c.end, G[k + 1], q1);
        const VectorXd k2 = q_rhs(model, c.mid, G_mid, q1 - 0.5 * h * k1);
        const VectorXd k3 = q_rhs(model, c.mid, G_mid, q1 - 0.5 * h * k2);
        const VectorXd k4 = q_rhs(model, c.start, G[k], q1 - h * k3);
        q[k] = q1 - (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
        if (!q[k].allFinite()) throw Error(ErrorCode::StepTooCoarse, "q overflowed");
    }
    return q;
}

std::vector<double> solve_p(const MarketModel& model, const FilterSolution& filter,
                            const std::vector<MatrixXd>& G, const std::vector<VectorXd>& q)
{
    const TimeGrid& grid = filter.grid;
    const std::size_t steps = grid.steps();
    if (G.size() != grid.size() || q.size() != grid.size())
        throw Error(ErrorCode::LengthMismatch, "G or q path has wrong length");
    const double h = grid.step();
    const auto coeffs = interval_coefficients(model, filter);

    std::vector<double> p(steps + 1);
    p[steps] = 0.0;
    for (std::size_t k = steps; k-- > 0;) {
        const IntervalCoefficients& c = coeffs[k];
        const double r = model.r(grid.interval_mid(k));
        const MatrixXd G_mid = detail::hermite(G[k], G[k + 1], G_rhs(c.start, G[k]),
                                               G_rhs(c.end, G[k + 1]), h, 0.5);
        const VectorXd q_mid =
            detail::hermite(q[k], q[k + 1], q_rhs(model, c.start, G[k], q[k]),
                            q_rhs(model, c.end, G[k + 1], q[k + 1]), h, 0.5);
        // p does not appear on its own right-hand side, so RK4 reduces to Simpson's rule.
        const double k1 = p_rhs(model, c.end, r, G[k + 1], q[k + 1]);
        const double k23 = p_rhs(model, c.mid, r, G_mid, q_mid);
        const double k4 = p_rhs(model, c.start, r, G[k], q[k]);
        p[k] = p[k + 1] - (h / 6.0) * (k1 + 4.0 * k23 + k4);
        if (!std::isfinite(p[k])) throw Error(ErrorCode::StepTooCoarse, "p overflowed");
    }
    return p;
}

HJBCoefficients assemble_coefficients(const MarketModel& model, const FilterSolution& filter,
                                      std::vector<MatrixXd> G, std::vector<VectorXd> q,
                                      std::vector<double> p)
{
    const TimeGrid& grid = filter.grid;
    HJBCoefficients out;
    out.grid = grid;
    out.V.reserve(grid.size());
    out.U.reserve(grid.size());
    for (std::size_t k = 0; k < grid.size(); ++k) {
        const VolatilityPiece& piece = model.pieces()[node_piece(model, grid, k)];
        const double r = model.r(grid.interval_mid(std::min(k, grid.steps() - 1)));
        const MatrixXd C =
            model.Lambda() * piece.sigma.transpose() + filter.beta[k] * model.A().transpose();
        VectorXd V = model.a().array() - r;
        V += C.transpose() * q[k];
        out.V.push_back(std::move(V));
        out.U.push_back(model.A() + 2.0 * C.transpose() * G[k]);
    }
    out.G = std::move(G);
    out.q = std::move(q);
    out.p = std::move(p);
    return out;
}

HJBCoefficients solve_hjb(const MarketModel& model, const FilterSolution& filter)
{
    auto G = solve_G(model, filter);
    auto q = solve_q(model, filter, G);
    auto p = solve_p(model, filter, G, q);
    return assemble_coefficients(model, filter, std::move(G), std::move(q), std::move(p));
}

namespace {

double f_at(const HJBCoefficients& c, std::size_t k, const VectorXd& y)
{
    return std::exp(c.p[k] + c.q[k].dot(y) + y.dot(c.G[k] * y));
}

}  // namespace

double f_value(const HJBCoefficients& coeffs, double t, const VectorXd& y_hat)
{
    const std::size_t k = coeffs.grid.index_of(t);
    if (y_hat.size() != static_cast<Eigen::Index>(coeffs.q[k].size()))
        throw Error(ErrorCode::DimensionMismatch, "y_hat must have length n");
    return f_at(coeffs, k, y_hat);
}

double hjb_residual(const MarketModel& model, const FilterSolution& filter,
                    const HJBCoefficients& coeffs, const std::vector<SamplePoint>& points,
                    double fd_step)
{
    const TimeGrid& grid = coeffs.grid;
    const std::size_t steps = grid.steps();
    const double h = grid.step();
    const int n = model.n();

    std::vector<std::size_t> breaks;
    for (double t : model.breakpoints()) breaks.push_back(grid.index_of(t));

    double worst = 0.0;
    for (const SamplePoint& pt : points) {
        const std::size_t k = grid.index_of(pt.t);
        if (k == 0 || k >= steps)
            throw Error(ErrorCode::GridMismatch, "residual sample times must be interior nodes");
        const VectorXd& y = pt.y_hat;

        // Smooth span [lo, hi] around k: no coefficient jump strictly inside.
        std::size_t lo = 0;
        std::size_t hi = steps;
        for (std::size_t b : breaks) {
            if (b <= k) lo = std::max(lo, b);
            if (b > k) hi = std::min(hi, b);
        }

        auto f_t_node = [&](std::size_t j) { return f_at(coeffs, j, y); };
        double f_t;
        std::size_t interval;
        if (lo == k) {
            // k sits on a jump: differentiate forward inside the next piece.
            interval = k;
            if (k + 4 <= hi)
                f_t = (-25 * f_t_node(k) + 48 * f_t_node(k + 1) - 36 * f_t_node(k + 2)
                       + 16 * f_t_node(k + 3) - 3 * f_t_node(k + 4))
                      / (12 * h);
            else
                f_t = (-3 * f_t_node(k) + 4 * f_t_node(k + 1) - f_t_node(k + 2)) / (2 * h);
        } else {
            interval = k;
            if (k >= lo + 2 && k + 2 <= hi)
                f_t = (-f_t_node(k + 2) + 8 * f_t_node(k + 1) - 8 * f_t_node(k - 1)
                       + f_t_node(k - 2))
                      / (12 * h);
            else
                f_t = (f_t_node(k + 1) - f_t_node(k - 1)) / (2 * h);
        }

        const VolatilityPiece& piece = model.pieces()[interval_piece(model, grid, interval)];
        const double r = model.r(grid.interval_mid(interval));
        const LocalCoefficients c = detail::local_coefficients(model, piece, r, filter.beta[k]);

        const double f = f_at(coeffs, k, y);
        VectorXd grad(n);
        MatrixXd hess(n, n);
        for (int i = 0; i < n; ++i) {
            VectorXd yp = y, ym = y;
            yp(i) += fd_step;
            ym(i) -= fd_step;
            const double fp = f_at(coeffs, k, yp);
            const double fm = f_at(coeffs, k, ym);
            grad(i) = (fp - fm) / (2 * fd_step);
            hess(i, i) = (fp - 2 * f + fm) / (fd_step * fd_step);
            for (int j = 0; j < i; ++j) {
                VectorXd ypp = y, ypm = y, ymp = y, ymm = y;
                ypp(i) += fd_step; ypp(j) += fd_step;
                ypm(i) += fd_step; ypm(j) -= fd_step;
                ymp(i) -= fd_step; ymp(j) += fd_step;
                ymm(i) -= fd_step; ymm(j) -= fd_step;
                hess(i, j) = (f_at(coeffs, k, ypp) - f_at(coeffs, k, ypm) - f_at(coeffs, k, ymp)
                              + f_at(coeffs, k, ymm))
                             / (4 * fd_step * fd_step);
                hess(j, i) = hess(i, j);
            }
        }

        const VectorXd b = c.excess + model.A() * y;
        const VectorXd drive = b * f + c.C.transpose() * grad;
        const double residual = f_t + 2 * r * f + grad.dot(model.d() + model.D() * y)
                                + 0.5 * (c.N * hess).trace()
                                - drive.dot(piece.gamma_inv * drive) / f;
        worst = std::max(worst, std::abs(residual) / f);
    }
    return worst;
}

}  // namespace mvpi
