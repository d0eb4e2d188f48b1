#include "mvpi/policy.hpp"

#include "mvpi/error.hpp"

#include <cmath>
#include <sstream>

namespace mvpi {

PolicyContext make_policy_context(const MarketModel& model, FilterSolution filter,
                                  HJBCoefficients coeffs, double alpha)
{
    if (!std::isfinite(alpha)) throw Error(ErrorCode::NonFinite, "alpha must be finite");
    if (filter.grid.steps() != coeffs.grid.steps() || filter.grid.horizon() != coeffs.grid.horizon())
        throw Error(ErrorCode::GridMismatch, "filter and HJB coefficients use different grids");

    PolicyContext ctx{model, std::move(filter), std::move(coeffs), alpha, {}, {}};
    const TimeGrid& grid = ctx.coeffs.grid;
    ctx.discount.reserve(grid.size());
    ctx.gamma_inv.reserve(grid.size());
    for (std::size_t k = 0; k < grid.size(); ++k) {
        ctx.discount.push_back(discount(grid.node(k), model));
        ctx.gamma_inv.push_back(model.pieces()[node_piece(model, grid, k)].gamma_inv);
    }
    return ctx;
}

VectorXd optimal_pi(const PolicyContext& ctx, double t, double X, const VectorXd& y_hat)
{
    const std::size_t k = ctx.coeffs.grid.index_of(t);
    if (y_hat.size() != ctx.model.n())
        throw Error(ErrorCode::DimensionMismatch, "y_hat must have length n");
    const double z = X - ctx.alpha * ctx.discount[k];
    const VectorXd w = ctx.coeffs.V[k] + ctx.coeffs.U[k] * y_hat;
    return -(ctx.gamma_inv[k] * w) * z;
}

double expected_e2xi(const HJBCoefficients& coeffs, const VectorXd& y0)
{
    return f_value(coeffs, 0.0, y0);
}

double lagrangian(double gamma, double x_bar, const MarketModel& model, double e2xi)
{
    const double gap = model.x0() - (x_bar + gamma) * discount(0.0, model);
    return 0.5 * gap * gap * e2xi - 0.5 * gamma * gamma;
}

double frontier_rho(const MarketModel& model, double e2xi)
{
    return std::exp(-2.0 * rate_integral(model, 0.0, model.horizon())) * e2xi;
}

double gamma_star(double x_bar, const MarketModel& model, double e2xi)
{
    if (!(e2xi > 0.0) || !std::isfinite(e2xi))
        throw Error(ErrorCode::NonFinite, "E[e^{2 xi}] must be positive and finite");
    const double bond = model.x0() * bond_growth(model.horizon(), model);
    if (!(x_bar >= bond)) {
        std::ostringstream os;
        os.precision(17);
        os << "target " << x_bar << " is below the bond value " << bond;
        throw Error(ErrorCode::TargetBelowBond, os.str());
    }
    const double rho = frontier_rho(model, e2xi);
    if (!(rho < 1.0)) {
        std::ostringstream os;
        os.precision(17);
        os << "rho = " << rho << " >= 1, the dual objective has no maximum";
        throw Error(ErrorCode::DegenerateMarket, os.str());
    }
    return (x_bar - bond) * rho / (1.0 - rho);
}

FrontierPoint frontier_point(double x_bar, const MarketModel& model, const HJBCoefficients& coeffs)
{
    const double e2xi = expected_e2xi(coeffs, model.y0());
    const double gamma = gamma_star(x_bar, model, e2xi);
    const double rho = frontier_rho(model, e2xi);
    const double delta = x_bar - model.x0() * bond_growth(model.horizon(), model);
    return FrontierPoint{x_bar, gamma, rho * delta * delta / (1.0 - rho), e2xi};
}

std::vector<FrontierPoint> frontier_sweep(const std::vector<double>& targets,
                                          const MarketModel& model,
                                          const HJBCoefficients& coeffs)
{
    std::vector<FrontierPoint> out;
    out.reserve(targets.size());
    for (double x_bar : targets) out.push_back(frontier_point(x_bar, model, coeffs));
    return out;
}

}  // namespace mvpi
