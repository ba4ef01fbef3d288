#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "model.hpp"

namespace incentive_forge {

// Roll-outs abort once any state component exceeds this magnitude.
inline constexpr double kDivergenceGuard = 1e12;

struct MomentTrajectory {
    std::vector<Vector> mu;    // error mean, stages 0..N-1
    std::vector<Matrix> sigma; // error covariance, stages 0..N-1
};

struct Trajectory {
    std::vector<Vector> x;
    std::vector<Vector> u;
    std::vector<double> payment;             // (x_k - xref)^T theta u_k
    std::vector<double> leader_stage_cost;   // e_k^T Q e_k
    std::vector<double> follower_stage_cost; // u_k^T R u_k
};

// Myopic best response u = 1/2 R^-1 theta^T e, the unique minimizer of
// v^T R v - e^T theta v.
[[nodiscard]] inline Vector follower_response(const ClosedLoop& cl, const Vector& error) {
    detail::require(error.size() == cl.gain.cols(), ErrorKind::DimensionMismatch,
                    "error vector has " + std::to_string(error.size()) + " entries, expected " +
                        std::to_string(cl.gain.cols()));
    return cl.gain * error;
}

[[nodiscard]] inline MomentTrajectory propagate_moments(const GameInstance& g, const ClosedLoop& cl) {
    MomentTrajectory mt;
    mt.mu.reserve(static_cast<std::size_t>(g.N));
    mt.sigma.reserve(static_cast<std::size_t>(g.N));
    Vector mu = g.mu0;
    Matrix sigma = g.Sigma0;
    for (int k = 0; k < g.N; ++k) {
        mt.mu.push_back(mu);
        mt.sigma.push_back(sigma);
        mu = cl.A_theta * mu + cl.g;
        Matrix next = cl.A_theta * sigma * cl.A_theta.transpose();
        sigma = 0.5 * (next + next.transpose());
    }
    return mt;
}

[[nodiscard]] inline MomentTrajectory propagate_moments(const GameInstance& g, const IncentiveMatrix& theta) {
    return propagate_moments(g, build_closed_loop(g, theta));
}

[[nodiscard]] inline Trajectory simulate(const GameInstance& g, const IncentiveMatrix& theta, const Vector& x0) {
    detail::require(x0.size() == g.n(), ErrorKind::DimensionMismatch, "x0 must have n entries");
    const ClosedLoop cl = build_closed_loop(g, theta);
    const auto N = static_cast<std::size_t>(g.N);
    Trajectory tr;
    tr.x.reserve(N);
    tr.u.reserve(N);
    tr.payment.reserve(N);
    tr.leader_stage_cost.reserve(N);
    tr.follower_stage_cost.reserve(N);

    Vector x = x0;
    for (std::size_t k = 0; k < N; ++k) {
        if (!x.allFinite() || x.cwiseAbs().maxCoeff() > kDivergenceGuard)
            throw Error(ErrorKind::NonFinite, "state left the finite range at stage " + std::to_string(k), k);
        const Vector e = x - g.xref;
        const Vector u = follower_response(cl, e);
        tr.x.push_back(x);
        tr.u.push_back(u);
        tr.payment.push_back(e.dot(theta.theta * u));
        tr.leader_stage_cost.push_back(e.dot(g.Q * e));
        tr.follower_stage_cost.push_back(u.dot(g.R * u));
        x = g.A * x + g.B * u;
    }
    return tr;
}

[[nodiscard]] inline Vector steady_state_error(const GameInstance& g, const ClosedLoop& cl) {
    if (!cl.is_schur)
        throw Error(ErrorKind::Unstable,
                    "closed loop has spectral radius " + std::to_string(cl.spectral_radius) + ", no steady state");
    const auto n = g.n();
    return (Matrix::Identity(n, n) - cl.A_theta).partialPivLu().solve(cl.g);
}

[[nodiscard]] inline Vector steady_state_error(const GameInstance& g, const IncentiveMatrix& theta) {
    return steady_state_error(g, build_closed_loop(g, theta));
}

// splitmix64 finalizer.
[[nodiscard]] constexpr std::uint64_t mix_seed(std::uint64_t z) noexcept {
    z += 0x9e3779b97f4a7c15ULL;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

// Seed of sample i. Mixing the base first keeps nearby base seeds from
// producing the same set of per-sample seeds.
[[nodiscard]] constexpr std::uint64_t sample_seed(std::uint64_t base_seed, std::uint64_t index) noexcept {
    return mix_seed(base_seed) ^ index;
}

// Draws x0 = xref + mu0 + L z with L the symmetric PSD square root of Sigma0
// and z standard Gaussian. Each sample is seeded from (base_seed, index) only,
// so any partition of the sample indices across workers gives the same draws.
class InitialStateSampler {
public:
    explicit InitialStateSampler(const GameInstance& g) : mean_(g.xref + g.mu0) {
        Eigen::SelfAdjointEigenSolver<Matrix> es(g.Sigma0);
        const Vector root = es.eigenvalues().cwiseMax(0.0).cwiseSqrt();
        sqrt_ = es.eigenvectors() * root.asDiagonal() * es.eigenvectors().transpose();
        deterministic_ = root.maxCoeff() == 0.0;
    }

    [[nodiscard]] Vector sample(std::uint64_t base_seed, std::uint64_t index) const {
        if (deterministic_) return mean_;
        std::mt19937_64 rng(sample_seed(base_seed, index));
        std::normal_distribution<double> normal(0.0, 1.0);
        Vector z(mean_.size());
        for (Eigen::Index i = 0; i < z.size(); ++i) z(i) = normal(rng);
        return mean_ + sqrt_ * z;
    }

    [[nodiscard]] bool deterministic() const noexcept { return deterministic_; }
    [[nodiscard]] const Matrix& sqrt_covariance() const noexcept { return sqrt_; }

private:
    Vector mean_;
    Matrix sqrt_;
    bool deterministic_ = false;
};

} // namespace incentive_forge
