#pragma once

#include <cmath>
#include <limits>
#include <string>
#include <utility>

#include "model.hpp"

namespace incentive_forge::scalar {

// Closed-form geometric sums switch to direct summation when 1 - a or
// 1 - a^2 drops below this magnitude.
inline constexpr double kSingularTolerance = 1e-6;
// Derivative closed forms divide by (1 - a)^2 and (1 - a^2)^2.
inline constexpr double kDerivativeSingularTolerance = 1e-3;
// The scalar cost divides by (1 - A_theta) and (1 - A_theta)^2; below this
// gap the bracket is summed term by term.
inline constexpr double kCostSingularTolerance = 1e-2;
inline constexpr double kGammaFloor = 1e-14;

struct ScalarInstance {
    double A = 0.0;
    double B = 1.0;
    double Q = 1.0;
    double R = 1.0;
    double xref = 0.0;
    int N = 1;
    double mu0 = 0.0;
    double var0 = 0.0; // variance of the initial error
};

inline void validate(const ScalarInstance& s) {
    using detail::require;
    require(s.N >= 1, ErrorKind::BadHorizon, "horizon N must be >= 1");
    require(std::isfinite(s.A) && std::isfinite(s.B) && std::isfinite(s.Q) && std::isfinite(s.R) &&
                std::isfinite(s.xref) && std::isfinite(s.mu0) && std::isfinite(s.var0),
            ErrorKind::InvalidArgument, "non-finite scalar parameter");
    require(s.Q > 0.0, ErrorKind::NotPositiveDefinite, "Q must be positive");
    require(s.R > 0.0, ErrorKind::NotPositiveDefinite, "R must be positive");
    require(s.var0 >= 0.0, ErrorKind::NotPSD, "var0 must be nonnegative");
    require(s.B > 0.0, ErrorKind::InvalidArgument, "scalar analysis requires B > 0");
}

[[nodiscard]] inline GameInstance to_game(const ScalarInstance& s) {
    GameInstance g;
    g.A = Matrix::Constant(1, 1, s.A);
    g.B = Matrix::Constant(1, 1, s.B);
    g.Q = Matrix::Constant(1, 1, s.Q);
    g.R = Matrix::Constant(1, 1, s.R);
    g.xref = Vector::Constant(1, s.xref);
    g.N = s.N;
    g.mu0 = Vector::Constant(1, s.mu0);
    g.Sigma0 = Matrix::Constant(1, 1, s.var0);
    return g;
}

[[nodiscard]] inline ScalarInstance from_game(const GameInstance& g) {
    detail::require(g.n() == 1 && g.m() == 1, ErrorKind::DimensionMismatch,
                    "scalar analysis needs n = m = 1, got n = " + std::to_string(g.n()) +
                        ", m = " + std::to_string(g.m()));
    ScalarInstance s{g.A(0, 0), g.B(0, 0), g.Q(0, 0), g.R(0, 0), g.xref(0), g.N, g.mu0(0), g.Sigma0(0, 0)};
    validate(s);
    return s;
}

[[nodiscard]] inline double closed_loop_coefficient(const ScalarInstance& s, double theta) {
    return s.A + s.B * theta / (2.0 * s.R);
}

// Sums of powers of one base value a over k = 0..N-1.
struct PowerSums {
    double alpha1 = 0.0;   // sum a^k
    double alpha2 = 0.0;   // sum a^(2k)
    double d_alpha1 = 0.0; // d alpha1 / da
    double d_alpha2 = 0.0; // d alpha2 / da
};

[[nodiscard]] inline PowerSums geometric_sums(double a, int N) {
    detail::require(N >= 1, ErrorKind::BadHorizon, "N must be >= 1");
    const double n = static_cast<double>(N);
    const double one_minus_a = 1.0 - a;
    const double one_minus_a2 = 1.0 - a * a;
    const bool singular = std::abs(one_minus_a) < kSingularTolerance || std::abs(one_minus_a2) < kSingularTolerance;
    const bool d_singular = std::abs(one_minus_a) < kDerivativeSingularTolerance ||
                            std::abs(one_minus_a2) < kDerivativeSingularTolerance;

    PowerSums p;
    if (singular || d_singular) {
        double direct1 = 0.0, direct2 = 0.0, dd1 = 0.0, dd2 = 0.0;
        double ak = 1.0;      // a^k
        double akm1 = 0.0;    // a^(k-1), 0 for k = 0
        double a2km1 = 0.0;   // a^(2k-1)
        for (int k = 0; k < N; ++k) {
            direct1 += ak;
            direct2 += ak * ak;
            dd1 += k * akm1;
            dd2 += 2.0 * k * a2km1;
            akm1 = ak;
            a2km1 = ak * ak * a;
            ak *= a;
        }
        if (singular) {
            p.alpha1 = direct1;
            p.alpha2 = direct2;
        }
        p.d_alpha1 = dd1;
        p.d_alpha2 = dd2;
    }
    if (!singular) {
        p.alpha1 = (1.0 - std::pow(a, N)) / one_minus_a;
        p.alpha2 = (1.0 - std::pow(a, 2 * N)) / one_minus_a2;
    }
    if (!d_singular) {
        const double aN = std::pow(a, N);
        const double aNm1 = std::pow(a, N - 1);
        const double a2N = std::pow(a, 2 * N);
        const double a2Nm1 = std::pow(a, 2 * N - 1);
        p.d_alpha1 = ((1.0 - aN) - n * aNm1 * one_minus_a) / (one_minus_a * one_minus_a);
        p.d_alpha2 = (2.0 * a * (1.0 - a2N) - 2.0 * n * a2Nm1 * one_minus_a2) / (one_minus_a2 * one_minus_a2);
    }
    return p;
}

struct GeometricSums {
    double alpha1 = 0.0;
    double alpha2 = 0.0;
    double alpha_theta1 = 0.0;
    double alpha_theta2 = 0.0;
    double d_alpha1_dA = 0.0;
    double d_alpha2_dA = 0.0;
};

[[nodiscard]] inline GeometricSums geometric_sums(const ScalarInstance& s, double theta) {
    const PowerSums open = geometric_sums(s.A, s.N);
    const PowerSums closed = geometric_sums(closed_loop_coefficient(s, theta), s.N);
    return {open.alpha1, open.alpha2, closed.alpha1, closed.alpha2, open.d_alpha1, open.d_alpha2};
}

namespace series {

// With s_k = sum_{j<k} a^j, returns
//   T1 = sum_k a^k s_k        == (alpha1 - alpha2) / (1 - a)
//   T2 = sum_k s_k^2          == (N - 2 alpha1 + alpha2) / (1 - a)^2
// without dividing by 1 - a.
struct TransientSums {
    double cross = 0.0;
    double square = 0.0;
};

[[nodiscard]] inline TransientSums transient_sums(double a, int N) {
    TransientSums t;
    double ak = 1.0;
    double sk = 0.0;
    for (int k = 0; k < N; ++k) {
        t.cross += ak * sk;
        t.square += sk * sk;
        sk += ak;
        ak *= a;
    }
    return t;
}

} // namespace series

// Expected leader cost for n = m = 1:
//   (Q + theta^2 / 2R) [ E[e0^2] a2 + 2 g mu0 (a1 - a2)/(1 - a) + (g/(1 - a))^2 (N - 2 a1 + a2) ]
// with a = A_theta, g = (A - 1) xref and a1, a2 the closed-loop geometric sums.
[[nodiscard]] inline double closed_form_cost(const ScalarInstance& s, double theta) {
    const double a = closed_loop_coefficient(s, theta);
    const double weight = s.Q + theta * theta / (2.0 * s.R);
    const double g = (s.A - 1.0) * s.xref;
    const double second_moment = s.var0 + s.mu0 * s.mu0;
    const PowerSums p = geometric_sums(a, s.N);

    double cross = 0.0;
    double square = 0.0;
    if (std::abs(1.0 - a) < kCostSingularTolerance) {
        const auto t = series::transient_sums(a, s.N);
        cross = t.cross;
        square = t.square;
    } else {
        const double inv = 1.0 / (1.0 - a);
        cross = (p.alpha1 - p.alpha2) * inv;
        square = (static_cast<double>(s.N) - 2.0 * p.alpha1 + p.alpha2) * inv * inv;
    }
    return weight * (second_moment * p.alpha2 + 2.0 * g * s.mu0 * cross + g * g * square);
}

[[nodiscard]] inline std::pair<double, double> stability_interval(const ScalarInstance& s) {
    detail::require(s.B > 0.0, ErrorKind::InvalidArgument, "stability interval requires B > 0");
    return {-2.0 * s.R * (1.0 + s.A) / s.B, 2.0 * s.R * (1.0 - s.A) / s.B};
}

// Limit of J / N for N -> infinity when the loop is stable and A != 1.
[[nodiscard]] inline double steady_state_avg_cost(const ScalarInstance& s, double theta) {
    const double a = closed_loop_coefficient(s, theta);
    if (!(std::abs(a) < 1.0))
        throw Error(ErrorKind::Unstable, "|A_theta| = " + std::to_string(std::abs(a)) + " >= 1");
    detail::require(s.A != 1.0, ErrorKind::InvalidArgument, "steady-state average cost needs A != 1");
    const double offset = (s.A - 1.0) * s.xref / (1.0 - a);
    return (s.Q + theta * theta / (2.0 * s.R)) * offset * offset;
}

enum class Regime { Interior, Boundary, AEqualsOne, RLimit };

[[nodiscard]] constexpr const char* to_string(Regime r) noexcept {
    switch (r) {
    case Regime::Interior: return "interior";
    case Regime::Boundary: return "boundary";
    case Regime::AEqualsOne: return "A_equals_one";
    case Regime::RLimit: return "R_limit";
    }
    return "unknown";
}

struct AsymptoticResult {
    double theta_star = 0.0;
    Regime regime = Regime::Interior;
    std::pair<double, double> stability_interval{};
};

inline constexpr double kUnitTolerance = 1e-12;

[[nodiscard]] inline AsymptoticResult theta_opt_infinite_horizon(const ScalarInstance& s) {
    validate(s);
    const auto interval = stability_interval(s);
    if (std::abs(s.A - 1.0) <= kUnitTolerance) {
        // Negative root of theta^2 - BQ theta - 2QR = 0.
        const double half_bq = 0.5 * s.B * s.Q;
        return {half_bq - std::sqrt(half_bq * half_bq + 2.0 * s.Q * s.R), Regime::AEqualsOne, interval};
    }
    if (s.xref == 0.0)
        throw Error(ErrorKind::DegenerateReference, "xref = 0 with A != 1 makes the steady-state cost vanish");

    // Unique critical point of J_ss: theta (1 - A) + BQ = 0.
    const double critical = s.B * s.Q / (s.A - 1.0);
    const double a = closed_loop_coefficient(s, critical);
    if (a > -1.0 && a < 1.0) return {critical, Regime::Interior, interval};
    return {interval.first, Regime::Boundary, interval};
}

struct GammaTerms {
    double gamma = 0.0;       // horizon cost at theta = 0 divided by Q
    double gamma_prime = 0.0; // derivative in the closed-loop coefficient at a = A
};

[[nodiscard]] inline GammaTerms gamma_terms(const ScalarInstance& s) {
    validate(s);
    const double n = static_cast<double>(s.N);
    const double x0 = s.mu0 + s.xref;
    const double second = s.var0 + x0 * x0;
    const PowerSums p = geometric_sums(s.A, s.N);

    GammaTerms t;
    t.gamma = second * p.alpha2 - 2.0 * s.xref * x0 * p.alpha1 + n * s.xref * s.xref;

    // xref (N - alpha1) - x0 (alpha1 - alpha2), divided by 1 - A.
    double transient = 0.0;
    if (std::abs(1.0 - s.A) < kCostSingularTolerance) {
        const auto ts = series::transient_sums(s.A, s.N);
        double tail = 0.0; // sum_k s_k == (N - alpha1) / (1 - A)
        double sk = 0.0, ak = 1.0;
        for (int k = 0; k < s.N; ++k) {
            tail += sk;
            sk += ak;
            ak *= s.A;
        }
        transient = s.xref * tail - x0 * ts.cross;
    } else {
        transient = (s.xref * (n - p.alpha1) - x0 * (p.alpha1 - p.alpha2)) / (1.0 - s.A);
    }
    t.gamma_prime = second * p.d_alpha2 - 2.0 * s.xref * x0 * p.d_alpha1 + 2.0 * s.xref * transient;
    return t;
}

// lim_{R -> inf} argmin_theta J(theta) = -(QB/2) Gamma'(A) / Gamma(A).
[[nodiscard]] inline AsymptoticResult theta_opt_R_infinity(const ScalarInstance& s) {
    const GammaTerms t = gamma_terms(s);
    if (!(t.gamma > kGammaFloor))
        throw Error(ErrorKind::DegenerateGamma, "Gamma(A) = " + std::to_string(t.gamma) + " leaves J flat");
    constexpr double inf = std::numeric_limits<double>::infinity();
    return {-0.5 * s.Q * s.B * t.gamma_prime / t.gamma, Regime::RLimit, {-inf, inf}};
}

} // namespace incentive_forge::scalar
