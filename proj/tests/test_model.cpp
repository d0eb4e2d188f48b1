#include "support.hpp"

#include "mvpi/error.hpp"

#include <gtest/gtest.h>

using namespace mvpi;
using namespace testing_support;

namespace {

ErrorCode code_of(const RawModel& raw)
{
    try {
        validate_model(raw);
    } catch (const Error& e) {
        return e.code();
    }
    ADD_FAILURE() << "expected validation error";
    return ErrorCode::Unsupported;
}

}  // namespace

TEST(Model, AcceptsShippedConfigs)
{
    for (const std::string& name : shipped_names()) {
        const RunConfig cfg = shipped(name);
        EXPECT_NO_THROW(validate_model(cfg.model)) << name;
    }
}

TEST(Model, RejectsBadShapes)
{
    RawModel raw = scalar_filter_raw();
    raw.A = mat({{1.0, 2.0}});
    EXPECT_EQ(code_of(raw), ErrorCode::DimensionMismatch);

    raw = scalar_filter_raw();
    raw.Lambda = mat({{0.3}});
    EXPECT_EQ(code_of(raw), ErrorCode::DimensionMismatch);

    raw = scalar_filter_raw();
    raw.sigma.values[0] = mat({{1.0}});
    EXPECT_EQ(code_of(raw), ErrorCode::DimensionMismatch);
}

TEST(Model, RejectsNonPositiveScalars)
{
    RawModel raw = scalar_filter_raw();
    raw.x0 = 0.0;
    EXPECT_EQ(code_of(raw), ErrorCode::NonPositiveScalar);
    raw = scalar_filter_raw();
    raw.horizon = -1.0;
    EXPECT_EQ(code_of(raw), ErrorCode::NonPositiveScalar);
    raw = scalar_filter_raw();
    raw.s(0) = -2.0;
    EXPECT_EQ(code_of(raw), ErrorCode::NonPositiveScalar);
}

TEST(Model, RejectsSingularVolatility)
{
    RawModel raw = high_theta_raw();
    raw.sigma.values[0] = mat({{0.0, 0.2, 0.1}, {0.0, 0.4, 0.2}});
    EXPECT_EQ(code_of(raw), ErrorCode::NotPositiveDefinite);
}

TEST(Model, RejectsNonFiniteEntries)
{
    RawModel raw = scalar_filter_raw();
    raw.a(0) = std::nan("");
    EXPECT_EQ(code_of(raw), ErrorCode::InvalidConfig);
}

TEST(Model, VolatilityPieceQuantities)
{
    const MarketModel model = validate_model(shipped("generic").model);
    for (const VolatilityPiece& p : model.pieces()) {
        EXPECT_LT((p.sqrt * p.sqrt - p.gamma).norm(), 1e-14);
        EXPECT_LT((p.gamma * p.gamma_inv - MatrixXd::Identity(2, 2)).norm(), 1e-13);
        EXPECT_LT((p.sqrt * p.sqrt_inv - MatrixXd::Identity(2, 2)).norm(), 1e-13);
        EXPECT_LT((p.sqrt - p.sqrt.transpose()).norm(), 1e-16);
    }
}

TEST(Model, RateIntegralPiecewise)
{
    const MarketModel model = validate_model(shipped("piecewise").model);
    // r = 0.02 on [0, 0.5), 0.06 on [0.5, 1].
    EXPECT_NEAR(rate_integral(model, 0.0, 1.0), 0.04, 1e-16);
    EXPECT_NEAR(rate_integral(model, 0.25, 0.75), 0.005 + 0.015, 1e-16);
    EXPECT_NEAR(discount(0.25, model), std::exp(-(0.005 + 0.03)), 1e-15);
    EXPECT_NEAR(bond_growth(1.0, model), std::exp(0.04), 1e-15);
    EXPECT_THROW(discount(1.5, model), Error);
    EXPECT_DOUBLE_EQ(model.r(0.5), 0.06);
    EXPECT_DOUBLE_EQ(model.r(1.0), 0.06);
}

TEST(Model, DiscountMatchesQuadrature)
{
    const MarketModel model = validate_model(shipped("piecewise").model);
    // Midpoint rule on cells whose edges include the jump at 0.5.
    const int N = 1800;
    double sum = 0.0;
    const double t0 = 0.1;
    const double h = (1.0 - t0) / N;
    for (int i = 0; i < N; ++i) sum += h * model.r(t0 + (i + 0.5) * h);
    EXPECT_NEAR(std::exp(-sum), discount(t0, model), 1e-14);
}

TEST(Grid, NodesAndLookup)
{
    const TimeGrid grid(2.0, 8);
    EXPECT_EQ(grid.size(), 9u);
    EXPECT_DOUBLE_EQ(grid.step(), 0.25);
    EXPECT_EQ(grid.node(8), 2.0);
    EXPECT_EQ(grid.index_of(0.75), 3u);
    EXPECT_FALSE(grid.find(0.1).has_value());
    EXPECT_THROW(grid.index_of(0.1), Error);
    EXPECT_THROW(TimeGrid(1.0, 0), Error);
}

TEST(Grid, BreakpointsMustBeNodes)
{
    const MarketModel model = validate_model(shipped("piecewise").model);
    EXPECT_NO_THROW(make_grid(model, 10));
    try {
        make_grid(model, 7);
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), ErrorCode::GridMismatch);
    }
}

TEST(Grid, PieceSelectionIsRightContinuous)
{
    const MarketModel model = validate_model(shipped("piecewise").model);
    const TimeGrid grid = make_grid(model, 10);
    EXPECT_EQ(interval_piece(model, grid, 4), 0u);
    EXPECT_EQ(interval_piece(model, grid, 5), 1u);
    EXPECT_EQ(node_piece(model, grid, 5), 1u);
    EXPECT_EQ(node_piece(model, grid, 10), 1u);
}
