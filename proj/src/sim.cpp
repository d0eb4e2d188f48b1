#include "mvpi/sim.hpp"

#include "detail.hpp"
#include "mvpi/error.hpp"

#include <cmath>
#include <limits>
#include <boost/random/normal_distribution.hpp>

#include <random>
#include <sstream>

namespace mvpi {

namespace {

/// Maps simulation steps onto the solver grid: the solver node at or left of each sim node.
struct GridMap {
    TimeGrid sim;
    std::size_t per_solver = 1;  ///< sim steps per solver step (sim finer)
    std::size_t per_sim = 1;     ///< solver steps per sim step (sim coarser)

    std::size_t solver_node(std::size_t j) const { return j / per_solver * per_sim; }
};

GridMap map_grids(const MarketModel& model, const TimeGrid& solver, double step)
{
    if (!(step > 0.0) || !std::isfinite(step))
        throw Error(ErrorCode::NonPositiveScalar, "simulation step must be positive");
    const double ratio = model.horizon() / step;
    const double rounded = std::round(ratio);
    if (rounded < 1.0 || std::abs(ratio - rounded) > 1e-9 * rounded)
        throw Error(ErrorCode::GridMismatch, "simulation step must divide the horizon");
    const auto steps = static_cast<std::size_t>(rounded);

    GridMap map{make_grid(model, steps)};
    const std::size_t solver_steps = solver.steps();
    if (steps % solver_steps == 0) {
        map.per_solver = steps / solver_steps;
    } else if (solver_steps % steps == 0) {
        map.per_sim = solver_steps / steps;
    } else {
        std::ostringstream os;
        os << "simulation steps " << steps << " and solver steps " << solver_steps
           << " must divide one another";
        throw Error(ErrorCode::GridMismatch, os.str());
    }
    return map;
}

/// Per-path seeding keyed by (master seed, path index); independent of the path count.
std::mt19937_64 path_engine(std::uint64_t seed, std::size_t path)
{
    std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                      static_cast<std::uint32_t>(path),
                      static_cast<std::uint32_t>(static_cast<std::uint64_t>(path) >> 32)};
    return std::mt19937_64(seq);
}

Estimate sample_mean(const std::vector<double>& x)
{
    const double n = static_cast<double>(x.size());
    double sum = 0.0;
    for (double v : x) sum += v;
    const double mean = sum / n;
    if (x.size() < 2) return {mean, std::nullopt};
    double ss = 0.0;
    for (double v : x) ss += (v - mean) * (v - mean);
    return {mean, std::sqrt(ss / (n - 1.0) / n)};
}

Estimate sample_variance(const std::vector<double>& x)
{
    const double n = static_cast<double>(x.size());
    if (x.size() < 2) return {0.0, std::nullopt};
    // Centre on the first sample so identical samples give exactly zero.
    const double shift = x.front();
    double mean = 0.0;
    for (double v : x) mean += v - shift;
    mean /= n;
    double m2 = 0.0;
    double m4 = 0.0;
    for (double v : x) {
        const double c = (v - shift - mean) * (v - shift - mean);
        m2 += c;
        m4 += c * c;
    }
    const double var = m2 / (n - 1.0);
    m2 /= n;
    m4 /= n;
    return {var, std::sqrt(std::max(0.0, m4 - m2 * m2) / n)};
}

/// Column statistics of per-path vectors: mean, centered covariance, and their SEs.
void vector_stats(const std::vector<VectorXd>& x, VectorXd& mean, VectorXd& mean_se,
                  MatrixXd& cov, MatrixXd& cov_se)
{
    const auto dim = x.front().size();
    const double n = static_cast<double>(x.size());
    mean = VectorXd::Zero(dim);
    for (const VectorXd& v : x) mean += v;
    mean /= n;

    cov = MatrixXd::Zero(dim, dim);
    MatrixXd sq = MatrixXd::Zero(dim, dim);
    for (const VectorXd& v : x) {
        const VectorXd c = v - mean;
        const MatrixXd outer = c * c.transpose();
        cov += outer;
        sq += outer.cwiseProduct(outer);
    }
    cov /= n;
    sq /= n;
    const double inf = std::numeric_limits<double>::infinity();
    if (x.size() < 2) {
        mean_se = VectorXd::Constant(dim, inf);
        cov_se = MatrixXd::Constant(dim, dim, inf);
        return;
    }
    mean_se = (cov.diagonal() * n / (n - 1.0) / n).cwiseSqrt();
    cov_se = ((sq - cov.cwiseProduct(cov)).cwiseMax(0.0) / (n - 1.0)).cwiseSqrt();
    cov *= n / (n - 1.0);
}

struct Policy {
    const PolicyContext* optimal = nullptr;
    const PolicyFn* external = nullptr;
};

SimResult run(const MarketModel& model, const FilterSolution& filter, const Policy& policy,
              const SimConfig& config)
{
    if (config.paths < 1) throw Error(ErrorCode::NonPositiveScalar, "need at least one path");
    if (config.brownian_refinement < 1)
        throw Error(ErrorCode::NonPositiveScalar, "brownian_refinement must be at least 1");

    const GridMap map = map_grids(model, filter.grid, config.step);
    const TimeGrid& grid = map.sim;
    const std::size_t steps = grid.steps();
    const double h = grid.step();
    const int n = model.n();
    const int m = model.m();
    const int k_dim = n + m;

    // Time tables shared by every path.
    std::vector<double> growth(grid.size());
    for (std::size_t j = 0; j < grid.size(); ++j) growth[j] = bond_growth(grid.node(j), model);
    const double growth_T = growth.back();
    std::vector<double> rate(steps);
    std::vector<const VolatilityPiece*> piece(steps);
    for (std::size_t j = 0; j < steps; ++j) {
        rate[j] = model.r(grid.interval_mid(j));
        piece[j] = &model.pieces()[interval_piece(model, grid, j)];
    }

    std::vector<std::size_t> checkpoint_nodes;
    for (double t : config.checkpoints) {
        const std::size_t j = grid.index_of(t);
        if (j == 0) throw Error(ErrorCode::GridMismatch, "checkpoints must lie after t = 0");
        checkpoint_nodes.push_back(j);
    }

    const double alpha = policy.optimal ? policy.optimal->alpha : 0.0;
    // Discounted distance to target, w = z / g(t); z(0) = e^{-int_0^T r}(x0 g(T) - alpha).
    const double w0 = policy.optimal ? (model.x0() * growth_T - alpha) / growth_T : model.x0();
    const bool track_xi = policy.optimal != nullptr && w0 != 0.0;

    std::vector<double> terminal(config.paths);
    std::vector<double> e2xi_direct(track_xi ? config.paths : 0);
    std::vector<double> e2xi_wealth(track_xi ? config.paths : 0);
    std::vector<std::vector<VectorXd>> cp_error(checkpoint_nodes.size());
    std::vector<std::vector<VectorXd>> cp_innov(checkpoint_nodes.size());
    for (std::size_t c = 0; c < checkpoint_nodes.size(); ++c) {
        cp_error[c].reserve(config.paths);
        cp_innov[c].reserve(config.paths);
    }

    SimResult result;
    result.paths = config.paths;
    result.steps = steps;
    result.step = h;

    const double fine_scale = std::sqrt(h / static_cast<double>(config.brownian_refinement));
    VectorXd dW(k_dim), y(n), y_hat(n), log_s(m), log_s_next(m), dY(m), dv(m), mu(m), excess(m);
    VectorXd drift(n), w_vec(m), gw(m), pi(m), sw(m);
    detail::FilterWorkspace ws;
    VectorXd log_s0 = model.s().array().log();

    for (std::size_t path = 0; path < config.paths; ++path) {
        std::mt19937_64 engine = path_engine(config.seed, path);
        boost::random::normal_distribution<double> normal;
        y = model.y0();
        y_hat = model.y0();
        log_s = log_s0;
        double w = w0;
        double xi = 0.0;
        std::size_t next_cp = 0;

        const bool tracing = config.record.trace && path == 0;
        PathTrace trace;
        auto record = [&](std::size_t j, const VectorXd& dv_j) {
            trace.t.push_back(grid.node(j));
            trace.log_prices.push_back(log_s);
            trace.y.push_back(y);
            trace.y_hat.push_back(y_hat);
            trace.dv.push_back(dv_j);
            trace.wealth.push_back(growth[j] * w + alpha * growth[j] / growth_T);
        };
        if (tracing) record(0, VectorXd::Zero(m));

        for (std::size_t j = 0; j < steps; ++j) {
            const VolatilityPiece& vp = *piece[j];
            const double r = rate[j];
            const std::size_t ks = map.solver_node(j);

            dW.setZero();
            for (std::size_t rep = 0; rep < config.brownian_refinement; ++rep)
                for (int i = 0; i < k_dim; ++i) dW(i) += normal(engine);
            dW *= fine_scale;

            // Portfolio from information at t_j.
            if (policy.optimal) {
                const PolicyContext& ctx = *policy.optimal;
                detail::matvec(ctx.coeffs.U[ks], y_hat, w_vec);
                w_vec += ctx.coeffs.V[ks];
                detail::matvec(ctx.gamma_inv[ks], w_vec, gw);
                const double z = growth[j] * w;
                for (int i = 0; i < m; ++i) pi(i) = -z * gw(i);
            } else {
                pi = (*policy.external)(grid.node(j), growth[j] * w, y_hat);
                if (pi.size() != m)
                    throw Error(ErrorCode::DimensionMismatch, "policy must return an m-vector");
            }

            // True price dynamics driven by the hidden factor.
            detail::matvec(model.A(), y, mu);
            detail::matvec(vp.sigma, dW, sw);
            double gain_w = 0.0;
            for (int i = 0; i < m; ++i) {
                mu(i) += model.a()(i);
                log_s_next(i) = log_s(i) + (mu(i) - 0.5 * vp.gamma_diag(i)) * h + sw(i);
                dY(i) = log_s_next(i) - log_s(i);
                gain_w += pi(i) * ((mu(i) - r) * h + sw(i));
            }
            log_s.swap(log_s_next);
            w += gain_w / growth[j];

            if (track_xi) {
                // Filter-side excess return a + A y_hat - r, before the filter update.
                detail::matvec(model.A(), y_hat, excess);
                double drift_term = 0.0;
                double quad = 0.0;
                for (int i = 0; i < m; ++i) {
                    drift_term += gw(i) * (excess(i) + model.a()(i) - r);
                    quad += w_vec(i) * gw(i);
                }
                detail::matvec(vp.sqrt_inv, w_vec, sw);
                detail::advance_filter(model, vp, filter.gain[ks], dY, h, y_hat, dv, ws);
                xi += (r - drift_term) * h - sw.dot(dv) - 0.5 * quad * h;
            } else {
                detail::advance_filter(model, vp, filter.gain[ks], dY, h, y_hat, dv, ws);
            }

            detail::advance_factor_drift(model, h, y, drift);
            detail::matvec_add(model.Lambda(), dW, y);

            if (next_cp < checkpoint_nodes.size() && checkpoint_nodes[next_cp] == j + 1) {
                cp_error[next_cp].push_back(y - y_hat);
                cp_innov[next_cp].push_back(dv);
                ++next_cp;
            }
            if (tracing) record(j + 1, dv);
        }

        const double z_T = growth_T * w;
        const double x_T = z_T + alpha;
        if (!std::isfinite(x_T)) {
            std::ostringstream os;
            os << "terminal wealth of path " << path << " is not finite";
            throw Error(ErrorCode::NonFinite, os.str());
        }
        terminal[path] = x_T;
        if (track_xi) {
            e2xi_direct[path] = std::exp(2.0 * xi);
            const double ratio = z_T / w0;
            e2xi_wealth[path] = ratio * ratio;
        }
        if (tracing) result.trace = std::move(trace);
    }

    result.wealth_mean = sample_mean(terminal);
    result.wealth_variance = sample_variance(terminal);
    if (track_xi) {
        result.e2xi_direct = sample_mean(e2xi_direct);
        result.e2xi_wealth = sample_mean(e2xi_wealth);
    }
    for (std::size_t c = 0; c < checkpoint_nodes.size(); ++c) {
        CheckpointStats stats;
        const std::size_t j = checkpoint_nodes[c];
        stats.t = grid.node(j);
        stats.dt = h;
        stats.beta = filter.beta[map.solver_node(j)];
        vector_stats(cp_error[c], stats.error_mean, stats.error_mean_se, stats.error_cov,
                     stats.error_cov_se);
        vector_stats(cp_innov[c], stats.innovation_mean, stats.innovation_mean_se,
                     stats.innovation_cov, stats.innovation_cov_se);
        result.checkpoints.push_back(std::move(stats));
    }
    if (config.record.terminal_wealth) result.terminal_wealth = std::move(terminal);
    return result;
}

}  // namespace

double deviation_in_se(double value, double target, double se)
{
    const double diff = std::abs(value - target);
    if (diff == 0.0) return 0.0;
    if (!(se > 0.0)) return std::numeric_limits<double>::infinity();
    return diff / se;
}

SimResult simulate_paths(const PolicyContext& ctx, const SimConfig& config)
{
    return run(ctx.model, ctx.filter, Policy{&ctx, nullptr}, config);
}

SimResult simulate_paths(const MarketModel& model, const FilterSolution& filter,
                         const PolicyFn& policy, const SimConfig& config)
{
    if (!policy) throw Error(ErrorCode::InvalidConfig, "empty policy function");
    return run(model, filter, Policy{nullptr, &policy}, config);
}

E2xiEstimate estimate_e2xi_mc(const PolicyContext& ctx, const SimConfig& config)
{
    const MarketModel& model = ctx.model;
    const double growth_T = bond_growth(model.horizon(), model);
    if (model.x0() * growth_T - ctx.alpha == 0.0)
        throw Error(ErrorCode::ZeroInitialZ, "z(0) = 0; choose a target above the bond value");
    const SimResult sim = simulate_paths(ctx, config);
    E2xiEstimate out{*sim.e2xi_direct, *sim.e2xi_wealth, std::nullopt};
    if (out.direct.se && out.wealth.se)
        out.joint_se = std::hypot(*out.direct.se, *out.wealth.se);
    return out;
}

FilterReport verify_filter_consistency(const MarketModel& model, SimConfig config,
                                       const std::vector<double>& checkpoints)
{
    const double ratio = std::round(model.horizon() / config.step);
    const TimeGrid grid = make_grid(model, static_cast<std::size_t>(std::max(1.0, ratio)));
    const FilterSolution filter = solve_beta(model, grid);
    config.checkpoints = checkpoints;
    const PolicyFn bond_only = [m = model.m()](double, double, const VectorXd&) {
        return VectorXd::Zero(m).eval();
    };
    const SimResult sim = simulate_paths(model, filter, bond_only, config);

    FilterReport report;
    for (const CheckpointStats& cp : sim.checkpoints) {
        for (Eigen::Index i = 0; i < cp.error_cov.rows(); ++i) {
            report.max_mean_deviation = std::max(
                report.max_mean_deviation,
                deviation_in_se(cp.error_mean(i), 0.0, cp.error_mean_se(i)));
            for (Eigen::Index k = 0; k < cp.error_cov.cols(); ++k)
                report.max_cov_deviation = std::max(
                    report.max_cov_deviation,
                    deviation_in_se(cp.error_cov(i, k), cp.beta(i, k), cp.error_cov_se(i, k)));
        }
        for (Eigen::Index i = 0; i < cp.innovation_cov.rows(); ++i)
            for (Eigen::Index k = 0; k < cp.innovation_cov.cols(); ++k)
                report.max_innovation_deviation = std::max(
                    report.max_innovation_deviation,
                    deviation_in_se(cp.innovation_cov(i, k), i == k ? cp.dt : 0.0,
                                    cp.innovation_cov_se(i, k)));
    }
    report.checkpoints = sim.checkpoints;
    return report;
}

}  // namespace mvpi
