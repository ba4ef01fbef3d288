#pragma once

#include <Eigen/Cholesky>
#include <Eigen/Dense>
#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>
#include <string>

#include "error.hpp"

namespace incentive_forge {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

inline constexpr double kSymmetryTolerance = 1e-10;
inline constexpr double kPsdTolerance = 1e-10;

// LQ-bilinear incentive game. Sigma0 is a covariance everywhere in this
// library, including the scalar entry points.
struct GameInstance {
    Matrix A;      // n x n
    Matrix B;      // n x m
    Matrix Q;      // n x n, leader tracking weight
    Matrix R;      // m x m, follower input weight
    Vector xref;   // n
    int N = 1;     // horizon, stages 0..N-1
    Vector mu0;    // E[x0 - xref]
    Matrix Sigma0; // Cov(x0 - xref)

    [[nodiscard]] Eigen::Index n() const noexcept { return A.rows(); }
    [[nodiscard]] Eigen::Index m() const noexcept { return B.cols(); }
};

// The leader's decision: payment p(x, u) = (x - xref)^T theta u.
struct IncentiveMatrix {
    Matrix theta;

    IncentiveMatrix() = default;
    explicit IncentiveMatrix(Matrix t) : theta(std::move(t)) {}

    [[nodiscard]] static IncentiveMatrix zeros(Eigen::Index n, Eigen::Index m) {
        return IncentiveMatrix{Matrix::Zero(n, m)};
    }
    [[nodiscard]] static IncentiveMatrix scalar(double t) { return IncentiveMatrix{Matrix::Constant(1, 1, t)}; }

    [[nodiscard]] Eigen::Index rows() const noexcept { return theta.rows(); }
    [[nodiscard]] Eigen::Index cols() const noexcept { return theta.cols(); }
};

struct ClosedLoop {
    Matrix A_theta;          // A + 1/2 B R^-1 theta^T
    Vector g;                // (A - I) xref
    Matrix S;                // Q + 1/2 theta R^-1 theta^T
    Matrix gain;             // 1/2 R^-1 theta^T, the follower's feedback on the error
    double spectral_radius = 0.0;
    bool is_schur = false;
};

namespace detail {

inline void require(bool ok, ErrorKind kind, const std::string& what) {
    if (!ok) throw Error(kind, what);
}

inline bool all_finite(const Matrix& M) { return M.allFinite(); }

inline std::string shape(const Matrix& M) {
    return std::to_string(M.rows()) + "x" + std::to_string(M.cols());
}

// Returns (M + M^T)/2 after checking the asymmetry is within tolerance.
inline Matrix symmetrized(const Matrix& M, ErrorKind kind, const char* name) {
    const double asym = M.size() == 0 ? 0.0 : (M - M.transpose()).cwiseAbs().maxCoeff();
    require(asym <= kSymmetryTolerance, kind, std::string(name) + " is not symmetric");
    return 0.5 * (M + M.transpose());
}

} // namespace detail

[[nodiscard]] inline double spectral_radius(const Matrix& M) {
    if (M.size() == 0) return 0.0;
    Eigen::EigenSolver<Matrix> es(M, /*computeEigenvectors=*/false);
    return es.eigenvalues().cwiseAbs().maxCoeff();
}

[[nodiscard]] inline bool is_positive_definite(const Matrix& M) {
    Eigen::LLT<Matrix> llt(M);
    return llt.info() == Eigen::Success;
}

[[nodiscard]] inline GameInstance validate(GameInstance g) {
    using detail::require;
    using detail::shape;
    const auto n = g.A.rows();
    const auto m = g.B.cols();

    require(g.N >= 1, ErrorKind::BadHorizon, "horizon N must be >= 1, got " + std::to_string(g.N));
    require(n >= 1 && m >= 1, ErrorKind::DimensionMismatch, "n and m must be >= 1");
    require(g.A.cols() == n, ErrorKind::DimensionMismatch, "A must be square, got " + shape(g.A));
    require(g.B.rows() == n, ErrorKind::DimensionMismatch,
            "B has " + std::to_string(g.B.rows()) + " rows, A is " + shape(g.A));
    require(g.Q.rows() == n && g.Q.cols() == n, ErrorKind::DimensionMismatch, "Q must be n x n, got " + shape(g.Q));
    require(g.R.rows() == m && g.R.cols() == m, ErrorKind::DimensionMismatch, "R must be m x m, got " + shape(g.R));
    require(g.xref.size() == n, ErrorKind::DimensionMismatch, "xref must have n entries");
    require(g.mu0.size() == n, ErrorKind::DimensionMismatch, "mu0 must have n entries");
    require(g.Sigma0.rows() == n && g.Sigma0.cols() == n, ErrorKind::DimensionMismatch,
            "Sigma0 must be n x n, got " + shape(g.Sigma0));

    for (const Matrix* M : {&g.A, &g.B, &g.Q, &g.R, &g.Sigma0})
        require(detail::all_finite(*M), ErrorKind::InvalidArgument, "non-finite matrix entry");
    require(g.xref.allFinite() && g.mu0.allFinite(), ErrorKind::InvalidArgument, "non-finite vector entry");

    g.Q = detail::symmetrized(g.Q, ErrorKind::NotPositiveDefinite, "Q");
    g.R = detail::symmetrized(g.R, ErrorKind::NotPositiveDefinite, "R");
    g.Sigma0 = detail::symmetrized(g.Sigma0, ErrorKind::NotPSD, "Sigma0");

    require(is_positive_definite(g.Q), ErrorKind::NotPositiveDefinite, "Q is not positive definite");
    require(is_positive_definite(g.R), ErrorKind::NotPositiveDefinite, "R is not positive definite");

    Eigen::SelfAdjointEigenSolver<Matrix> es(g.Sigma0, Eigen::EigenvaluesOnly);
    require(es.eigenvalues().minCoeff() >= -kPsdTolerance, ErrorKind::NotPSD,
            "Sigma0 has a negative eigenvalue");
    return g;
}

inline void check_theta(const GameInstance& g, const IncentiveMatrix& theta) {
    detail::require(theta.rows() == g.n() && theta.cols() == g.m(), ErrorKind::DimensionMismatch,
                    "theta must be " + std::to_string(g.n()) + "x" + std::to_string(g.m()) + ", got " +
                        detail::shape(theta.theta));
}

[[nodiscard]] inline ClosedLoop build_closed_loop(const GameInstance& g, const IncentiveMatrix& theta) {
    check_theta(g, theta);
    const auto n = g.n();
    ClosedLoop cl;
    // R is SPD after validation; solve instead of forming R^-1 explicitly.
    const Eigen::LLT<Matrix> r_llt(g.R);
    cl.gain = 0.5 * r_llt.solve(theta.theta.transpose());
    cl.A_theta = g.A + g.B * cl.gain;
    cl.g = (g.A - Matrix::Identity(n, n)) * g.xref;
    Matrix added = theta.theta * cl.gain;
    cl.S = g.Q + 0.5 * (added + added.transpose());
    cl.spectral_radius = spectral_radius(cl.A_theta);
    cl.is_schur = cl.spectral_radius < 1.0;
    return cl;
}

} // namespace incentive_forge
