#pragma once

#include <cmath>
#include <cstdint>
#include <vector>

#include "dynamics.hpp"
#include "parallel.hpp"

namespace incentive_forge {

struct CostBreakdown {
    double total = 0.0;    // leader objective J
    double tracking = 0.0; // sum of E[e^T Q e]
    double payment = 0.0;  // sum of expected incentive payments
    std::vector<double> per_stage;
};

[[nodiscard]] inline CostBreakdown expected_cost(const GameInstance& g, const ClosedLoop& cl,
                                                 const MomentTrajectory& mt) {
    CostBreakdown c;
    c.per_stage.reserve(mt.mu.size());
    for (std::size_t k = 0; k < mt.mu.size(); ++k) {
        const Vector& mu = mt.mu[k];
        const Matrix& sigma = mt.sigma[k];
        const double stage = (cl.S * sigma).trace() + mu.dot(cl.S * mu);
        c.tracking += (g.Q * sigma).trace() + mu.dot(g.Q * mu);
        c.per_stage.push_back(stage);
        c.total += stage;
    }
    c.payment = c.total - c.tracking;
    return c;
}

[[nodiscard]] inline CostBreakdown expected_cost(const GameInstance& g, const IncentiveMatrix& theta) {
    const ClosedLoop cl = build_closed_loop(g, theta);
    return expected_cost(g, cl, propagate_moments(g, cl));
}

// Social cost sum_k [e^T Q e + u^T R u], recomputed from the recorded states
// and inputs. Payments appear with opposite signs in the two parties'
// objectives and do not enter.
[[nodiscard]] inline double social_cost(const Trajectory& tr, const GameInstance& g) {
    double total = 0.0;
    for (std::size_t k = 0; k < tr.x.size(); ++k) {
        const Vector e = tr.x[k] - g.xref;
        total += e.dot(g.Q * e) + tr.u[k].dot(g.R * tr.u[k]);
    }
    return total;
}

// Realized leader cost sum_k [e^T Q e + p_k].
[[nodiscard]] inline double leader_realized_cost(const Trajectory& tr) {
    double total = 0.0;
    for (std::size_t k = 0; k < tr.payment.size(); ++k) total += tr.leader_stage_cost[k] + tr.payment[k];
    return total;
}

// Realized follower net cost sum_k [u^T R u - p_k].
[[nodiscard]] inline double follower_net_cost(const Trajectory& tr) {
    double total = 0.0;
    for (std::size_t k = 0; k < tr.payment.size(); ++k) total += tr.follower_stage_cost[k] - tr.payment[k];
    return total;
}

struct MonteCarloEstimate {
    double estimate = 0.0;
    double std_error = 0.0;
    std::vector<double> samples;
};

[[nodiscard]] inline MonteCarloEstimate monte_carlo_cost(const GameInstance& g, const IncentiveMatrix& theta,
                                                         std::size_t samples, std::uint64_t seed,
                                                         unsigned workers = worker_count()) {
    detail::require(samples >= 2, ErrorKind::InvalidArgument, "monte carlo needs at least 2 samples");
    check_theta(g, theta);
    const InitialStateSampler sampler(g);
    MonteCarloEstimate mc;
    mc.samples.assign(samples, 0.0);
    parallel_for(
        samples,
        [&](std::size_t i) { mc.samples[i] = leader_realized_cost(simulate(g, theta, sampler.sample(seed, i))); },
        workers);

    // Two-pass moments shifted by the first sample; identical samples give
    // exactly zero spread.
    const double n = static_cast<double>(samples);
    const double shift = mc.samples.front();
    double sum = 0.0;
    for (double v : mc.samples) sum += v - shift;
    const double mean_shifted = sum / n;
    double ss = 0.0;
    for (double v : mc.samples) ss += (v - shift - mean_shifted) * (v - shift - mean_shifted);
    mc.estimate = shift + mean_shifted;
    mc.std_error = std::sqrt(ss / (n - 1.0) / n);
    return mc;
}

} // namespace incentive_forge
