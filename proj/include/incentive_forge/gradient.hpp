#pragma once

#include <vector>

#include "cost.hpp"
#include "parallel.hpp"

namespace incentive_forge {

inline constexpr double kDefaultFdStep = 1e-5;

// Backward adjoints of the mean and covariance recursions. Entry k holds
// lambda_k / Lambda_k for k = 0..N; the terminal entries are zero.
struct AdjointState {
    std::vector<Vector> lambda;
    std::vector<Matrix> Lambda;
};

[[nodiscard]] inline AdjointState adjoints(const ClosedLoop& cl, const MomentTrajectory& mt) {
    const auto N = mt.mu.size();
    const auto n = cl.A_theta.rows();
    AdjointState adj;
    adj.lambda.assign(N + 1, Vector::Zero(n));
    adj.Lambda.assign(N + 1, Matrix::Zero(n, n));
    const Matrix At_T = cl.A_theta.transpose();
    for (std::size_t k = N; k-- > 0;) {
        // 2Q + theta R^-1 theta^T == 2S
        adj.lambda[k] = 2.0 * cl.S * mt.mu[k] + At_T * adj.lambda[k + 1];
        Matrix next = cl.S + At_T * adj.Lambda[k + 1] * cl.A_theta;
        adj.Lambda[k] = 0.5 * (next + next.transpose());
    }
    return adj;
}

[[nodiscard]] inline AdjointState adjoints(const GameInstance& g, const IncentiveMatrix& theta,
                                           const MomentTrajectory& mt) {
    return adjoints(build_closed_loop(g, theta), mt);
}

// dJ/dtheta. Per stage the contribution is
//   [(Sigma_k + mu_k mu_k^T) theta + (1/2 mu_k lambda_{k+1}^T + Sigma_k A_theta^T Lambda_{k+1}) B] R^-1.
[[nodiscard]] inline Matrix analytic_gradient(const GameInstance& g, const IncentiveMatrix& theta) {
    const ClosedLoop cl = build_closed_loop(g, theta);
    const MomentTrajectory mt = propagate_moments(g, cl);
    const AdjointState adj = adjoints(cl, mt);

    const Matrix At_T = cl.A_theta.transpose();
    Matrix second_moment_sum = Matrix::Zero(g.n(), g.n());
    Matrix coupling_sum = Matrix::Zero(g.n(), g.n());
    for (std::size_t k = 0; k < mt.mu.size(); ++k) {
        second_moment_sum += mt.sigma[k] + mt.mu[k] * mt.mu[k].transpose();
        coupling_sum += 0.5 * mt.mu[k] * adj.lambda[k + 1].transpose() + mt.sigma[k] * At_T * adj.Lambda[k + 1];
    }
    const Matrix unscaled = second_moment_sum * theta.theta + coupling_sum * g.B; // n x m
    // X R^-1 == (R^-1 X^T)^T with R symmetric
    return Eigen::LLT<Matrix>(g.R).solve(unscaled.transpose()).transpose();
}

// Central differences of expected_cost, one entry of theta at a time.
[[nodiscard]] inline Matrix finite_difference_gradient(const GameInstance& g, const IncentiveMatrix& theta,
                                                       double step = kDefaultFdStep,
                                                       unsigned workers = worker_count()) {
    detail::require(step > 0.0, ErrorKind::InvalidArgument, "finite-difference step must be positive");
    check_theta(g, theta);
    const auto rows = theta.rows();
    const auto cols = theta.cols();
    Matrix grad(rows, cols);
    parallel_for(
        static_cast<std::size_t>(rows * cols),
        [&](std::size_t idx) {
            const auto i = static_cast<Eigen::Index>(idx) / cols;
            const auto j = static_cast<Eigen::Index>(idx) % cols;
            IncentiveMatrix plus = theta;
            IncentiveMatrix minus = theta;
            plus.theta(i, j) += step;
            minus.theta(i, j) -= step;
            grad(i, j) = (expected_cost(g, plus).total - expected_cost(g, minus).total) / (2.0 * step);
        },
        workers);
    return grad;
}

} // namespace incentive_forge
