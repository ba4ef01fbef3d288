#include <gtest/gtest.h>

#include "test_support.hpp"

namespace incentive_forge {
namespace {

using testing::Random;

double rel_error(const Matrix& a, const Matrix& b) { return (a - b).norm() / std::max(1.0, a.norm()); }

TEST(Adjoints, SingleStageHasOnlyTerminalEntries) {
    Random rnd(41);
    const GameInstance g = rnd.game(3, 2, 1);
    const IncentiveMatrix theta = rnd.theta(3, 2);
    const auto adj = adjoints(g, theta, propagate_moments(g, theta));
    ASSERT_EQ(adj.lambda.size(), 2u);
    EXPECT_EQ(adj.lambda[1], Vector::Zero(3));
    EXPECT_EQ(adj.Lambda[1], Matrix::Zero(3, 3));
}

TEST(Adjoints, ZeroMeanGivesZeroVectorAdjoint) {
    GameInstance g = testing::design_2d();
    g.mu0.setZero();
    g.Sigma0 = Matrix::Identity(2, 2);
    const IncentiveMatrix theta{Matrix::Constant(2, 1, -0.4)};
    const auto adj = adjoints(g, theta, propagate_moments(g, theta));
    for (const auto& l : adj.lambda) EXPECT_EQ(l, Vector::Zero(2));
}

TEST(Adjoints, MatrixAdjointApproachesLyapunovFixedPoint) {
    GameInstance g = testing::design_2d(200);
    g.A << 0.6, 0.3, -0.2, 0.5;
    g = validate(g);
    ASSERT_LT(spectral_radius(g.A), 1.0);
    // Fixed-point iteration on L = Q + A^T L A.
    Matrix fixed = Matrix::Zero(2, 2);
    for (int it = 0; it < 5000; ++it) fixed = g.Q + g.A.transpose() * fixed * g.A;
    const IncentiveMatrix zero = IncentiveMatrix::zeros(2, 1);
    const auto adj = adjoints(g, zero, propagate_moments(g, zero));
    EXPECT_LE((adj.Lambda[0] - fixed).norm(), 1e-10);
    EXPECT_GT((adj.Lambda[195] - fixed).norm(), 1e-3); // still far from the fixed point near the terminal stage
    for (const auto& L : adj.Lambda) {
        EXPECT_EQ(L, L.transpose());
        Eigen::SelfAdjointEigenSolver<Matrix> es(L);
        EXPECT_GE(es.eigenvalues().minCoeff(), -1e-12);
    }
}

TEST(AnalyticGradient, ConstantObjectiveHasZeroGradient) {
    Random rnd(42);
    const GameInstance g = testing::zero_cost_game();
    for (int t = 0; t < 5; ++t) EXPECT_EQ(analytic_gradient(g, rnd.theta(2, 2, 3.0)), Matrix::Zero(2, 2));
}

TEST(AnalyticGradient, DesignFixtureMatchesFiniteDifferences) {
    Random rnd(43);
    const GameInstance g = testing::design_2d();
    int checked = 0;
    while (checked < 10) {
        const IncentiveMatrix theta = rnd.theta(2, 1, 2.5);
        if (!build_closed_loop(g, theta).is_schur) continue;
        EXPECT_LE(rel_error(analytic_gradient(g, theta), finite_difference_gradient(g, theta, 1e-5)), 1e-6);
        ++checked;
    }
}

TEST(AnalyticGradient, ScalarMatchesClosedFormDerivative) {
    auto s = testing::scalar_fixture();
    s.var0 = 0.0;
    const GameInstance g = validate(scalar::to_game(s));
    for (double theta : {-2.5, -1.6667, -1.0, -0.3, 0.0, 0.7, 1.1}) {
        const double h = 1e-5;
        const double numeric =
            (scalar::closed_form_cost(s, theta + h) - scalar::closed_form_cost(s, theta - h)) / (2.0 * h);
        const double analytic = analytic_gradient(g, IncentiveMatrix::scalar(theta))(0, 0);
        EXPECT_LE(std::abs(analytic - numeric), 1e-6 * std::max(1.0, std::abs(analytic))) << "theta " << theta;
    }
}

TEST(FiniteDifference, ZeroInConstantRegime) {
    EXPECT_EQ(finite_difference_gradient(testing::zero_cost_game(), IncentiveMatrix{Matrix::Ones(2, 2)}),
              Matrix::Zero(2, 2));
}

TEST(FiniteDifference, AgreesWithAnalyticOnRandomInstances) {
    Random rnd(44);
    for (int trial = 0; trial < 100; ++trial) {
        const auto n = rnd.integer(1, 3), m = rnd.integer(1, 3);
        const GameInstance g = rnd.game(n, m, rnd.integer(1, 20));
        const IncentiveMatrix theta = rnd.theta(n, m);
        EXPECT_LE(rel_error(analytic_gradient(g, theta), finite_difference_gradient(g, theta)), 1e-5)
            << "trial " << trial;
    }
}

TEST(FiniteDifference, CentralDifferenceIsSecondOrder) {
    Random rnd(45);
    const GameInstance g = rnd.game(2, 2, 10);
    const IncentiveMatrix theta = rnd.theta(2, 2, 0.5);
    const Matrix exact = analytic_gradient(g, theta);
    const double err_coarse = (finite_difference_gradient(g, theta, 1e-2) - exact).norm();
    const double err_fine = (finite_difference_gradient(g, theta, 5e-3) - exact).norm();
    // Halving h divides the truncation error by about four.
    EXPECT_NEAR(err_coarse / err_fine, 4.0, 0.5);
    const double change = (finite_difference_gradient(g, theta, 1e-4) - finite_difference_gradient(g, theta, 1e-5)).norm();
    EXPECT_LE(change, 1e-6 * std::max(1.0, exact.norm()));
}

TEST(FiniteDifference, RejectsNonPositiveStep) {
    EXPECT_THROW((void)finite_difference_gradient(testing::scalar_game(), IncentiveMatrix::scalar(0.0), 0.0), Error);
}

TEST(GradientProperty, DirectionalDerivativeConsistency) {
    Random rnd(46);
    for (int trial = 0; trial < 20; ++trial) {
        const auto n = rnd.integer(1, 4), m = rnd.integer(1, 4);
        const GameInstance g = rnd.game(n, m, rnd.integer(2, 25));
        const IncentiveMatrix theta = rnd.theta(n, m);
        Matrix dir = rnd.matrix(n, m);
        dir /= dir.norm();
        const double predicted = (analytic_gradient(g, theta).array() * dir.array()).sum();
        const double base = expected_cost(g, theta).total;
        double prev_err = std::numeric_limits<double>::infinity();
        for (double eps : {1e-3, 1e-4, 1e-5}) {
            const double fd = (expected_cost(g, IncentiveMatrix{theta.theta + eps * dir}).total - base) / eps;
            const double err = std::abs(fd - predicted);
            EXPECT_LE(err, prev_err * 1.01 + 1e-6 * std::max(1.0, std::abs(predicted)));
            prev_err = err;
        }
        EXPECT_LE(prev_err, 1e-3 * std::max(1.0, std::abs(predicted)));
    }
}

// Summation by parts: sum_k [(2 S mu_k)^T dmu_k + Tr(S dSigma_k)] equals
// sum_k [lambda_{k+1}^T dA mu_k + Tr(Lambda_{k+1} (dA Sigma_k A^T + A Sigma_k dA^T))]
// for tangents propagated forward through the moment recursions.
TEST(GradientProperty, AdjointIdentityHoldsForRandomPerturbations) {
    Random rnd(47);
    for (int trial = 0; trial < 30; ++trial) {
        const auto n = rnd.integer(1, 4), m = rnd.integer(1, 4);
        const GameInstance g = rnd.game(n, m, rnd.integer(1, 20));
        const IncentiveMatrix theta = rnd.theta(n, m);
        const Matrix dtheta = rnd.matrix(n, m);
        const ClosedLoop cl = build_closed_loop(g, theta);
        const auto mt = propagate_moments(g, cl);
        const auto adj = adjoints(cl, mt);
        const Matrix dA = 0.5 * g.B * g.R.inverse() * dtheta.transpose();

        Vector dmu = Vector::Zero(n);
        Matrix dsigma = Matrix::Zero(n, n);
        double lhs = 0.0, rhs = 0.0;
        for (std::size_t k = 0; k < mt.mu.size(); ++k) {
            lhs += (2.0 * cl.S * mt.mu[k]).dot(dmu) + (cl.S * dsigma).trace();
            const Matrix forced = dA * mt.sigma[k] * cl.A_theta.transpose() + cl.A_theta * mt.sigma[k] * dA.transpose();
            rhs += adj.lambda[k + 1].dot(dA * mt.mu[k]) + (adj.Lambda[k + 1] * forced).trace();
            dmu = cl.A_theta * dmu + dA * mt.mu[k];
            dsigma = cl.A_theta * dsigma * cl.A_theta.transpose() + forced;
        }
        EXPECT_NEAR(lhs, rhs, 1e-9 * std::max(1.0, std::abs(lhs))) << "trial " << trial;
    }
}

// Negative control: placing the coupling factor as (1/2 lambda mu^T + Lambda A Sigma) B R^-1,
// the transpose of the implemented n x n factor, does not match finite differences.
TEST(GradientProperty, TransposedCouplingDisagreesWithFiniteDifferences) {
    Random rnd(48);
    const GameInstance g = rnd.game(3, 2, 8);
    const IncentiveMatrix theta = rnd.theta(3, 2);
    const ClosedLoop cl = build_closed_loop(g, theta);
    const auto mt = propagate_moments(g, cl);
    const auto adj = adjoints(cl, mt);
    Matrix transposed = Matrix::Zero(3, 2);
    for (std::size_t k = 0; k < mt.mu.size(); ++k)
        transposed += ((mt.sigma[k] + mt.mu[k] * mt.mu[k].transpose()) * theta.theta +
                       (0.5 * adj.lambda[k + 1] * mt.mu[k].transpose() + adj.Lambda[k + 1] * cl.A_theta * mt.sigma[k]) *
                           g.B) *
                      g.R.inverse();
    const Matrix fd = finite_difference_gradient(g, theta);
    EXPECT_GT(rel_error(transposed, fd), 1e-2);
    EXPECT_LE(rel_error(analytic_gradient(g, theta), fd), 1e-6);
}

} // namespace
} // namespace incentive_forge
