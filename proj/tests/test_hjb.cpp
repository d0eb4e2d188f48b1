#include "oracles.hpp"
#include "support.hpp"

#include "mvpi/error.hpp"

#include <gtest/gtest.h>

using namespace mvpi;
using namespace testing_support;

namespace {

RawModel scalar_no_noise(double A, double d)
{
    RawModel raw = scalar_filter_raw();
    raw.A = mat({{A}});
    raw.d = vec({d});
    raw.D = mat({{0.0}});
    raw.Lambda = mat({{0.0, 0.0}});
    raw.sigma.values[0] = mat({{0.1, 0.25}});
    raw.rate = PiecewiseConstant<double>::constant(1.0, 0.03);
    raw.a = vec({0.08});
    return raw;
}

}  // namespace

TEST(HJB, TerminalConditions)
{
    for (const std::string& name : shipped_names()) {
        const Solved s = solve(shipped(name).model, 200);
        EXPECT_TRUE(s.coeffs.G.back().isZero(0.0)) << name;
        EXPECT_TRUE(s.coeffs.q.back().isZero(0.0)) << name;
        EXPECT_EQ(s.coeffs.p.back(), 0.0) << name;
        const double T = s.model.horizon();
        EXPECT_EQ(f_value(s.coeffs, T, VectorXd::Constant(s.model.n(), 0.7)), 1.0) << name;
    }
}

TEST(HJB, ClassicalReduction)
{
    const RunConfig cfg = shipped("classical");
    const Solved s = solve(cfg.model, 400);
    const double r = 0.05;
    const double theta2 = oracle::theta_squared(cfg.model.a, r, cfg.model.sigma.values[0]);
    for (std::size_t k = 0; k < s.coeffs.grid.size(); ++k) {
        EXPECT_TRUE(s.coeffs.G[k].isZero(0.0));
        EXPECT_TRUE(s.coeffs.q[k].isZero(0.0));
        const double tau = 1.0 - s.coeffs.grid.node(k);
        EXPECT_NEAR(s.coeffs.p[k], (2 * r - theta2) * tau, 1e-14);
    }
    EXPECT_NEAR(expected_e2xi(s.coeffs, s.model.y0()), oracle::classical_e2xi(r, theta2, 1.0), 1e-14);
}

TEST(HJB, ScalarNoNoiseClosedForms)
{
    const double A = 0.6, d = 0.05;
    const Solved s = solve(scalar_no_noise(A, d), 500);
    const oracle::ScalarNoNoise ref{0.08, A, d, 0.03, 0.01 + 0.0625};
    for (std::size_t k = 0; k < s.coeffs.grid.size(); k += 25) {
        const double tau = 1.0 - s.coeffs.grid.node(k);
        EXPECT_NEAR(s.coeffs.G[k](0, 0), ref.G(tau), 1e-8);
        EXPECT_NEAR(s.coeffs.q[k](0), ref.q(tau), 1e-8);
        EXPECT_NEAR(s.coeffs.p[k], ref.p(tau), 1e-8);
    }
}

TEST(HJB, PolicyTermsMatchDefinition)
{
    const Solved s = solve(shipped("generic").model, 100);
    const VolatilityPiece& p = s.model.pieces()[0];
    const VectorXd e = s.model.a().array() - 0.03;
    for (std::size_t k : {0ul, 50ul, 100ul}) {
        const MatrixXd C = s.model.Lambda() * p.sigma.transpose() + s.filter.beta[k] * s.model.A().transpose();
        EXPECT_LT((s.coeffs.V[k] - (e + C.transpose() * s.coeffs.q[k])).norm(), 1e-14);
        EXPECT_LT((s.coeffs.U[k] - (s.model.A() + 2 * C.transpose() * s.coeffs.G[k])).norm(), 1e-14);
    }
}

TEST(HJB, KroneckerScalarLinear)
{
    // Lambda = 0 and A != 0 makes N = 0, so the Riccati equation is linear with F = -D.
    RawModel raw = scalar_no_noise(0.6, 0.0);
    raw.D = mat({{-0.7}});
    const Solved s = solve(raw, 400);
    const auto kron = solve_G_kron(s.model, s.filter);
    const double Q = 0.36 / (0.01 + 0.0625);
    for (std::size_t k = 0; k < s.coeffs.grid.size(); k += 20) {
        const double tau = 1.0 - s.coeffs.grid.node(k);
        EXPECT_NEAR(kron[k](0, 0), oracle::scalar_linear_G(Q, 0.7, tau), 1e-10);
        EXPECT_NEAR(s.coeffs.G[k](0, 0), oracle::scalar_linear_G(Q, 0.7, tau), 1e-10);
    }
}

TEST(HJB, KroneckerAgreesOnGeneric)
{
    const Solved s = solve(shipped("generic").model, 500);
    const auto kron = solve_G_kron(s.model, s.filter);
    for (std::size_t k = 0; k < kron.size(); ++k) EXPECT_LT((kron[k] - s.coeffs.G[k]).norm(), 1e-8);
}

TEST(HJB, GSymmetric)
{
    const Solved s = solve(shipped("generic").model, 300);
    for (const MatrixXd& G : s.coeffs.G) EXPECT_EQ((G - G.transpose()).norm(), 0.0);
}

TEST(HJB, ClassicalResidualSmall)
{
    const Solved s = solve(shipped("classical").model, 1000);
    const auto pts = random_points(s.coeffs.grid, 1, 0.5, 3);
    EXPECT_LT(hjb_residual(s.model, s.filter, s.coeffs, pts, 1e-2), 1e-6);
}

TEST(HJB, ResidualSmallOnShippedConfigs)
{
    for (const std::string& name : shipped_names()) {
        const RunConfig cfg = shipped(name);
        const Solved s = solve(cfg.model, cfg.grid_steps);
        auto pts = random_points(s.coeffs.grid, s.model.n(), 0.3, 5);
        for (double t : s.model.breakpoints())
            if (t > 0.0 && t < s.model.horizon()) pts.push_back({t, VectorXd::Constant(s.model.n(), 0.1)});
        EXPECT_LT(hjb_residual(s.model, s.filter, s.coeffs, pts, 1e-4), 1e-4) << name;
    }
}

TEST(HJB, ResidualRejectsEndpoints)
{
    const Solved s = solve(shipped("scalar").model, 100);
    try {
        hjb_residual(s.model, s.filter, s.coeffs, {{0.0, vec({0.0})}}, 1e-2);
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), ErrorCode::GridMismatch);
    }
    EXPECT_THROW(hjb_residual(s.model, s.filter, s.coeffs, {{1.0, vec({0.0})}}, 1e-2), Error);
    EXPECT_THROW(hjb_residual(s.model, s.filter, s.coeffs, {{0.105, vec({0.0})}}, 1e-2), Error);
}

TEST(HJB, FValueNeedsGridNode)
{
    const Solved s = solve(shipped("scalar").model, 100);
    EXPECT_THROW(f_value(s.coeffs, 0.123, vec({0.0})), Error);
    EXPECT_THROW(f_value(s.coeffs, 0.5, vec({0.0, 1.0})), Error);
    const double f = f_value(s.coeffs, 0.5, vec({0.2}));
    const std::size_t k = 50;
    EXPECT_DOUBLE_EQ(f, std::exp(s.coeffs.p[k] + 0.2 * s.coeffs.q[k](0) + 0.04 * s.coeffs.G[k](0, 0)));
}
