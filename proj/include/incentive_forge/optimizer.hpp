#pragma once

#include <cmath>
#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "dynamics.hpp"
#include "gradient.hpp"
#include "parallel.hpp"

namespace incentive_forge {

inline constexpr double kMinStep = 1e-14;

struct OptimizerConfig {
    int max_iters = 10000;
    double grad_tol = 1e-8;
    double initial_step = 1.0;
    double backtrack_factor = 0.5;
    double armijo_c = 1e-4;
    std::optional<IncentiveMatrix> theta_init; // zero when absent
};

inline void validate(const OptimizerConfig& c) {
    using detail::require;
    require(c.max_iters >= 1, ErrorKind::InvalidArgument, "max_iters must be positive");
    require(c.grad_tol > 0.0, ErrorKind::InvalidArgument, "grad_tol must be positive");
    require(c.initial_step > 0.0, ErrorKind::InvalidArgument, "initial_step must be positive");
    require(c.backtrack_factor > 0.0 && c.backtrack_factor < 1.0, ErrorKind::InvalidArgument,
            "backtrack_factor must lie in (0, 1)");
    require(c.armijo_c > 0.0 && c.armijo_c < 1.0, ErrorKind::InvalidArgument, "armijo_c must lie in (0, 1)");
}

enum class StopReason { GradientTolerance, MaxIterations, StepUnderflow };

[[nodiscard]] constexpr const char* to_string(StopReason r) noexcept {
    switch (r) {
    case StopReason::GradientTolerance: return "grad_tol";
    case StopReason::MaxIterations: return "max_iters";
    case StopReason::StepUnderflow: return "step_underflow";
    }
    return "unknown";
}

struct StabilitySummary {
    double spectral_radius = 0.0;
    bool is_schur = false;
};

struct DesignReport {
    IncentiveMatrix theta_final;
    std::vector<double> cost_trace;     // J at each iterate, starting with theta_init
    std::vector<double> grad_norm_trace;
    std::vector<Matrix> theta_trace;
    std::vector<double> step_trace;     // accepted step length leading to iterate t (0 for t = 0)
    bool converged = false;
    StopReason stop_reason = StopReason::MaxIterations;
    StabilitySummary final_stability;
    std::optional<double> steady_state_error_norm;
};

// Gradient descent on expected_cost with Armijo backtracking. Only accepted
// steps enter the trace, so cost_trace is non-increasing.
[[nodiscard]] inline DesignReport optimize(const GameInstance& g, const OptimizerConfig& config) {
    validate(config);
    IncentiveMatrix theta = config.theta_init.value_or(IncentiveMatrix::zeros(g.n(), g.m()));
    check_theta(g, theta);

    auto cost_at = [&](const IncentiveMatrix& t) { return expected_cost(g, t).total; };

    DesignReport rep;
    double cost = cost_at(theta);
    double last_step = 0.0;
    for (int iter = 0;; ++iter) {
        if (!std::isfinite(cost))
            throw Error(ErrorKind::NonFinite, "leader cost overflowed at iteration " + std::to_string(iter) +
                                                  " (theta max |entry| " +
                                                  std::to_string(theta.theta.cwiseAbs().maxCoeff()) + ")");
        const Matrix grad = analytic_gradient(g, theta);
        const double grad_norm = grad.norm();
        rep.cost_trace.push_back(cost);
        rep.grad_norm_trace.push_back(grad_norm);
        rep.theta_trace.push_back(theta.theta);
        rep.step_trace.push_back(last_step);

        if (grad_norm <= config.grad_tol) {
            rep.converged = true;
            rep.stop_reason = StopReason::GradientTolerance;
            break;
        }
        if (iter >= config.max_iters) {
            rep.stop_reason = StopReason::MaxIterations;
            break;
        }

        double step = config.initial_step;
        const double decrease = config.armijo_c * grad_norm * grad_norm;
        std::optional<std::pair<IncentiveMatrix, double>> accepted;
        while (step >= kMinStep) {
            IncentiveMatrix trial{theta.theta - step * grad};
            const double trial_cost = cost_at(trial);
            if (std::isfinite(trial_cost) && trial_cost <= cost - step * decrease) {
                accepted.emplace(std::move(trial), trial_cost);
                break;
            }
            step *= config.backtrack_factor;
        }
        if (!accepted) {
            rep.stop_reason = StopReason::StepUnderflow;
            break;
        }
        theta = std::move(accepted->first);
        cost = accepted->second;
        last_step = step;
    }

    rep.theta_final = theta;
    const ClosedLoop cl = build_closed_loop(g, theta);
    rep.final_stability = {cl.spectral_radius, cl.is_schur};
    if (cl.is_schur) rep.steady_state_error_norm = steady_state_error(g, cl).norm();
    return rep;
}

// Evenly spaced grid start, start + step, ... up to stop (inclusive within
// half a step). Points are computed as start + i * step, not accumulated.
[[nodiscard]] inline std::vector<double> make_grid(double start, double stop, double step) {
    detail::require(step > 0.0 && std::isfinite(step), ErrorKind::InvalidArgument, "grid step must be positive");
    detail::require(stop >= start, ErrorKind::InvalidArgument, "grid stop must not precede start");
    const auto count = static_cast<std::size_t>(std::floor((stop - start) / step + 0.5)) + 1;
    std::vector<double> grid(count);
    for (std::size_t i = 0; i < count; ++i) grid[i] = start + static_cast<double>(i) * step;
    return grid;
}

[[nodiscard]] inline std::vector<std::pair<IncentiveMatrix, double>>
sweep_cost(const GameInstance& g, std::span<const IncentiveMatrix> grid, unsigned workers = worker_count()) {
    detail::require(!grid.empty(), ErrorKind::InvalidArgument, "sweep grid is empty");
    std::vector<std::pair<IncentiveMatrix, double>> out(grid.size());
    parallel_for(
        grid.size(), [&](std::size_t i) { out[i] = {grid[i], expected_cost(g, grid[i]).total}; }, workers);
    return out;
}

// Scalar-theta convenience for 1x1 games.
[[nodiscard]] inline std::vector<std::pair<double, double>> sweep_cost(const GameInstance& g,
                                                                       std::span<const double> grid,
                                                                       unsigned workers = worker_count()) {
    detail::require(!grid.empty(), ErrorKind::InvalidArgument, "sweep grid is empty");
    detail::require(g.n() == 1 && g.m() == 1, ErrorKind::DimensionMismatch, "scalar sweep needs a 1x1 game");
    std::vector<std::pair<double, double>> out(grid.size());
    parallel_for(
        grid.size(),
        [&](std::size_t i) { out[i] = {grid[i], expected_cost(g, IncentiveMatrix::scalar(grid[i])).total}; },
        workers);
    return out;
}

struct GridMinimum {
    std::size_t index = 0;
    double argmin = 0.0;
    double value = 0.0;
    bool interior = false; // not at either end of the grid
    bool unique = false;   // no other grid point attains the same value
};

template <class F>
[[nodiscard]] GridMinimum grid_argmin(F&& f, std::span<const double> grid, unsigned workers = worker_count()) {
    detail::require(!grid.empty(), ErrorKind::InvalidArgument, "grid is empty");
    std::vector<double> values(grid.size());
    parallel_for(grid.size(), [&](std::size_t i) { values[i] = f(grid[i]); }, workers);

    GridMinimum best;
    best.value = values[0];
    std::size_t ties = 1;
    for (std::size_t i = 1; i < values.size(); ++i) {
        if (values[i] < best.value) {
            best.value = values[i];
            best.index = i;
            ties = 1;
        } else if (values[i] == best.value) {
            ++ties;
        }
    }
    best.argmin = grid[best.index];
    best.interior = best.index > 0 && best.index + 1 < grid.size();
    best.unique = ties == 1;
    return best;
}

// Bisection on the sign of a derivative bracketing a minimum: df(lo) <= 0 <= df(hi).
template <class DF>
[[nodiscard]] double bisect_stationary(DF&& df, double lo, double hi, int iters = 200) {
    for (int i = 0; i < iters && hi - lo > 0.0; ++i) {
        const double mid = 0.5 * (lo + hi);
        if (mid <= lo || mid >= hi) break;
        if (df(mid) > 0.0)
            hi = mid;
        else
            lo = mid;
    }
    return 0.5 * (lo + hi);
}

} // namespace incentive_forge
