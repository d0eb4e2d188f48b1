#pragma once

#include "mvpi/config.hpp"
#include "mvpi/filter.hpp"
#include "mvpi/hjb.hpp"
#include "mvpi/model.hpp"
#include "mvpi/policy.hpp"

#include <random>
#include <string>
#include <vector>

namespace testing_support {

using namespace mvpi;

inline std::string config_path(const std::string& name)
{
    return std::string(MVPI_CONFIG_DIR) + "/" + name + ".json";
}

inline RunConfig shipped(const std::string& name) { return load_run_config(config_path(name)); }

inline const std::vector<std::string>& shipped_names()
{
    static const std::vector<std::string> names{"classical", "scalar", "generic", "piecewise"};
    return names;
}

inline MatrixXd mat(std::initializer_list<std::initializer_list<double>> rows)
{
    MatrixXd out(static_cast<Eigen::Index>(rows.size()),
                 static_cast<Eigen::Index>(rows.begin()->size()));
    Eigen::Index i = 0;
    for (const auto& row : rows) {
        Eigen::Index j = 0;
        for (double v : row) out(i, j++) = v;
        ++i;
    }
    return out;
}

inline VectorXd vec(std::initializer_list<double> values)
{
    VectorXd out(static_cast<Eigen::Index>(values.size()));
    Eigen::Index i = 0;
    for (double v : values) out(i++) = v;
    return out;
}

/// n = m = 1, A = 0, D = -1/2, Lambda = [0.3, 0.4], sigma = [1, 0]: beta = 0.16 (1 - e^{-t}).
inline RawModel scalar_filter_raw(double T = 1.0)
{
    RawModel raw;
    raw.horizon = T;
    raw.rate = PiecewiseConstant<double>::constant(T, 0.03);
    raw.a = vec({0.08});
    raw.A = mat({{0.0}});
    raw.d = vec({0.0});
    raw.D = mat({{-0.5}});
    raw.Lambda = mat({{0.3, 0.4}});
    raw.sigma = PiecewiseConstant<MatrixXd>::constant(T, mat({{1.0, 0.0}}));
    raw.x0 = 1.0;
    raw.y0 = vec({0.0});
    raw.s = vec({1.0});
    return raw;
}

/// Classical market with theta^2 = 2: Gamma = diag(0.04, 0.0625), a - r = (0.2, 0.25).
inline RawModel high_theta_raw()
{
    RawModel raw;
    raw.horizon = 1.0;
    raw.rate = PiecewiseConstant<double>::constant(1.0, 0.05);
    raw.a = vec({0.25, 0.30});
    raw.A = mat({{0.0}, {0.0}});
    raw.d = vec({0.0});
    raw.D = mat({{-0.5}});
    raw.Lambda = mat({{0.0, 0.0, 0.0}});
    raw.sigma = PiecewiseConstant<MatrixXd>::constant(1.0, mat({{0.0, 0.2, 0.0}, {0.0, 0.0, 0.25}}));
    raw.x0 = 1.0;
    raw.y0 = vec({0.0});
    raw.s = vec({1.0, 1.0});
    return raw;
}

struct Solved {
    MarketModel model;
    FilterSolution filter;
    HJBCoefficients coeffs;
};

inline Solved solve(const RawModel& raw, std::size_t steps)
{
    MarketModel model = validate_model(raw);
    FilterSolution filter = solve_beta(model, make_grid(model, steps));
    HJBCoefficients coeffs = solve_hjb(model, filter);
    return {std::move(model), std::move(filter), std::move(coeffs)};
}

/// 100 random interior (t, y_hat) points, y_hat uniform in [-width, width]^n.
inline std::vector<SamplePoint> random_points(const TimeGrid& grid, int n, double width,
                                              std::uint64_t seed, std::size_t count = 100)
{
    std::mt19937_64 rng(seed);
    std::uniform_int_distribution<std::size_t> node(1, grid.steps() - 1);
    std::uniform_real_distribution<double> u(-width, width);
    std::vector<SamplePoint> out;
    for (std::size_t i = 0; i < count; ++i) {
        VectorXd y(n);
        for (int j = 0; j < n; ++j) y(j) = u(rng);
        out.push_back({grid.node(node(rng)), y});
    }
    return out;
}

}  // namespace testing_support
