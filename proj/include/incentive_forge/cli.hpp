#pragma once

#include <charconv>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <limits>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "cost.hpp"
#include "dynamics.hpp"
#include "gradient.hpp"
#include "optimizer.hpp"
#include "scalar.hpp"
#include "scenario.hpp"

namespace incentive_forge::cli {

enum ExitCode : int {
    kSuccess = 0,
    kInvalidScenario = 2,
    kUnstable = 3,
    kSelfCheckFailed = 4,
};

inline constexpr double kGradcheckTolerance = 1e-5;
inline constexpr double kDefaultArgminStep = 1e-3;

struct Options {
    std::string scenario_path;
    std::optional<std::string> out_dir;
    std::optional<std::uint64_t> seed;
    bool corrupt_gradient = false; // gradcheck negative control
};

// Shortest decimal that round-trips to the same double.
[[nodiscard]] inline std::string format_number(double v) {
    if (std::isnan(v)) return "nan";
    if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
    char buf[64];
    const auto res = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, res.ptr);
}

class CsvWriter {
public:
    explicit CsvWriter(const std::filesystem::path& path) : out_(path, std::ios::binary) {
        if (!out_) throw std::runtime_error("cannot write " + path.string());
    }

    void header(const std::vector<std::string>& cols) { row_strings(cols); }

    void row(const std::vector<double>& values) {
        std::vector<std::string> cells;
        cells.reserve(values.size());
        for (double v : values) cells.push_back(format_number(v));
        row_strings(cells);
    }

private:
    void row_strings(const std::vector<std::string>& cells) {
        for (std::size_t i = 0; i < cells.size(); ++i) {
            if (i) out_ << ',';
            out_ << cells[i];
        }
        out_ << '\n';
    }
    std::ofstream out_;
};

namespace detail {

using nlohmann::ordered_json;

inline ordered_json number_or_null(double v) {
    if (!std::isfinite(v)) return nullptr;
    return v;
}

inline ordered_json to_json(const Matrix& M) {
    ordered_json arr = ordered_json::array();
    for (Eigen::Index i = 0; i < M.rows(); ++i)
        for (Eigen::Index j = 0; j < M.cols(); ++j) arr.push_back(number_or_null(M(i, j)));
    return arr;
}

inline ordered_json to_json(const Vector& v) { return to_json(Matrix(v)); }

inline void write_json(const std::filesystem::path& path, const ordered_json& doc) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write " + path.string());
    out << doc.dump(2) << '\n';
}

inline std::vector<std::string> theta_columns(Eigen::Index n, Eigen::Index m) {
    std::vector<std::string> cols;
    for (Eigen::Index i = 0; i < n; ++i)
        for (Eigen::Index j = 0; j < m; ++j) cols.push_back("theta_" + std::to_string(i) + "_" + std::to_string(j));
    return cols;
}

inline void append_theta(std::vector<double>& row, const Matrix& theta) {
    for (Eigen::Index i = 0; i < theta.rows(); ++i)
        for (Eigen::Index j = 0; j < theta.cols(); ++j) row.push_back(theta(i, j));
}

inline const IncentiveMatrix& require_theta(const Scenario& sc, const char* command) {
    if (!sc.theta) throw ScenarioError(std::string(command) + " requires field 'theta'");
    return *sc.theta;
}

inline ordered_json stability_json(const ClosedLoop& cl) {
    return {{"spectral_radius", cl.spectral_radius}, {"is_schur", cl.is_schur}};
}

inline ordered_json cost_json(const CostBreakdown& c) {
    return {{"total", c.total}, {"tracking", c.tracking}, {"payment", c.payment}};
}

inline std::filesystem::path output_dir(const Scenario& sc, const Options& opt) {
    std::filesystem::path dir = opt.out_dir ? *opt.out_dir : sc.output_dir.value_or(".");
    std::filesystem::create_directories(dir);
    return dir;
}

// Grid argmin of J over theta for a 1x1 game, refined by bisection on the
// analytic derivative when the grid minimum is interior.
inline double scalar_argmin(const GameInstance& g, const std::vector<double>& grid) {
    const auto cost = [&](double t) { return expected_cost(g, IncentiveMatrix::scalar(t)).total; };
    const GridMinimum best = grid_argmin(cost, grid, 1);
    if (!best.interior) return best.argmin;
    const auto slope = [&](double t) { return analytic_gradient(g, IncentiveMatrix::scalar(t))(0, 0); };
    return bisect_stationary(slope, grid[best.index - 1], grid[best.index + 1]);
}

inline std::vector<double> default_theta_search(const GameInstance& g, const SweepSettings& s) {
    if (s.theta_search) return make_grid(s.theta_search->start, s.theta_search->stop, s.theta_search->step);
    const auto [lo, hi] = scalar::stability_interval(scalar::from_game(g));
    std::vector<double> grid = make_grid(lo, hi, kDefaultArgminStep);
    // open interval
    grid.erase(grid.begin());
    if (!grid.empty() && grid.back() >= hi - 0.5 * kDefaultArgminStep) grid.pop_back();
    return grid;
}

} // namespace detail

inline int cmd_evaluate(const Scenario& sc, const Options& opt) {
    using detail::ordered_json;
    const GameInstance& g = sc.game;
    const IncentiveMatrix& theta = detail::require_theta(sc, "evaluate");
    const ClosedLoop cl = build_closed_loop(g, theta);
    const CostBreakdown c = expected_cost(g, cl, propagate_moments(g, cl));

    ordered_json doc;
    doc["command"] = "evaluate";
    doc["theta"] = detail::to_json(theta.theta);
    doc["cost"] = detail::cost_json(c);
    doc["per_stage"] = c.per_stage;
    doc["stability"] = detail::stability_json(cl);
    doc["steady_state_error"] = cl.is_schur ? detail::to_json(steady_state_error(g, cl)) : ordered_json(nullptr);
    doc["scenario"] = sc.source;
    detail::write_json(detail::output_dir(sc, opt) / "result.json", doc);
    return kSuccess;
}

inline int cmd_gradcheck(const Scenario& sc, const Options& opt) {
    using detail::ordered_json;
    const GameInstance& g = sc.game;
    const IncentiveMatrix& theta = detail::require_theta(sc, "gradcheck");
    Matrix analytic = analytic_gradient(g, theta);
    if (opt.corrupt_gradient) analytic.array() += 1.0;
    const Matrix numeric = finite_difference_gradient(g, theta, kDefaultFdStep);
    const double scale = std::max(1.0, analytic.norm());
    const double discrepancy = (analytic - numeric).cwiseAbs().maxCoeff() / scale;
    const bool passed = discrepancy <= kGradcheckTolerance;

    ordered_json doc;
    doc["command"] = "gradcheck";
    doc["theta"] = detail::to_json(theta.theta);
    doc["analytic_gradient"] = detail::to_json(analytic);
    doc["finite_difference_gradient"] = detail::to_json(numeric);
    doc["step"] = kDefaultFdStep;
    doc["max_relative_discrepancy"] = discrepancy;
    doc["tolerance"] = kGradcheckTolerance;
    doc["passed"] = passed;
    doc["scenario"] = sc.source;
    detail::write_json(detail::output_dir(sc, opt) / "gradcheck.json", doc);
    if (!passed) {
        std::cerr << "gradcheck failed: max relative discrepancy " << format_number(discrepancy) << " > "
                  << format_number(kGradcheckTolerance) << '\n';
        return kSelfCheckFailed;
    }
    return kSuccess;
}

inline int cmd_optimize(const Scenario& sc, const Options& opt) {
    using detail::ordered_json;
    const GameInstance& g = sc.game;
    const DesignReport rep = optimize(g, sc.optimizer);
    const auto dir = detail::output_dir(sc, opt);

    CsvWriter csv(dir / "trace.csv");
    std::vector<std::string> cols{"iter", "cost", "grad_norm"};
    for (auto& c : detail::theta_columns(g.n(), g.m())) cols.push_back(c);
    csv.header(cols);
    for (std::size_t t = 0; t < rep.cost_trace.size(); ++t) {
        std::vector<double> row{static_cast<double>(t), rep.cost_trace[t], rep.grad_norm_trace[t]};
        detail::append_theta(row, rep.theta_trace[t]);
        csv.row(row);
    }

    const ClosedLoop cl = build_closed_loop(g, rep.theta_final);
    ordered_json doc;
    doc["command"] = "optimize";
    doc["theta_final"] = detail::to_json(rep.theta_final.theta);
    doc["converged"] = rep.converged;
    doc["stop_reason"] = to_string(rep.stop_reason);
    doc["iterations"] = rep.cost_trace.size() - 1;
    doc["cost"] = detail::cost_json(expected_cost(g, rep.theta_final));
    doc["final_grad_norm"] = rep.grad_norm_trace.back();
    doc["stability"] = detail::stability_json(cl);
    doc["steady_state_error"] = cl.is_schur ? detail::to_json(steady_state_error(g, cl)) : ordered_json(nullptr);
    doc["steady_state_error_norm"] =
        rep.steady_state_error_norm ? ordered_json(*rep.steady_state_error_norm) : ordered_json(nullptr);
    doc["scenario"] = sc.source;
    detail::write_json(dir / "result.json", doc);
    return kSuccess;
}

inline int cmd_simulate(const Scenario& sc, const Options& opt) {
    const GameInstance& g = sc.game;
    const IncentiveMatrix& theta = detail::require_theta(sc, "simulate");
    const std::size_t samples = sc.monte_carlo ? sc.monte_carlo->samples : 1;
    const std::uint64_t seed = opt.seed.value_or(sc.monte_carlo ? sc.monte_carlo->seed : 0);
    const InitialStateSampler sampler(g);
    const auto dir = detail::output_dir(sc, opt);

    std::vector<Trajectory> runs(samples);
    if (samples == 1) {
        runs[0] = simulate(g, theta, g.xref + g.mu0);
    } else {
        parallel_for(samples, [&](std::size_t i) { runs[i] = simulate(g, theta, sampler.sample(seed, i)); });
    }

    std::vector<std::string> cols{"k"};
    for (Eigen::Index i = 0; i < g.n(); ++i) cols.push_back("x_" + std::to_string(i));
    for (Eigen::Index j = 0; j < g.m(); ++j) cols.push_back("u_" + std::to_string(j));
    for (const char* c : {"payment", "leader_stage_cost", "follower_stage_cost"}) cols.emplace_back(c);

    auto write_run = [&](const Trajectory& tr, const std::filesystem::path& path) {
        CsvWriter csv(path);
        csv.header(cols);
        for (std::size_t k = 0; k < tr.x.size(); ++k) {
            std::vector<double> row{static_cast<double>(k)};
            for (Eigen::Index i = 0; i < g.n(); ++i) row.push_back(tr.x[k](i));
            for (Eigen::Index j = 0; j < g.m(); ++j) row.push_back(tr.u[k](j));
            row.push_back(tr.payment[k]);
            row.push_back(tr.leader_stage_cost[k]);
            row.push_back(tr.follower_stage_cost[k]);
            csv.row(row);
        }
    };

    if (samples == 1) {
        write_run(runs[0], dir / "trajectory.csv");
        return kSuccess;
    }
    for (std::size_t s = 0; s < samples; ++s) {
        char name[40];
        std::snprintf(name, sizeof(name), "trajectory_%05zu.csv", s);
        write_run(runs[s], dir / name);
    }

    // Per-stage sample mean and unbiased variance of every recorded column.
    CsvWriter summary(dir / "summary.csv");
    std::vector<std::string> scols{"k"};
    for (std::size_t c = 1; c < cols.size(); ++c) {
        scols.push_back("mean_" + cols[c]);
        scols.push_back("var_" + cols[c]);
    }
    summary.header(scols);
    const double count = static_cast<double>(samples);
    for (std::size_t k = 0; k < static_cast<std::size_t>(g.N); ++k) {
        std::vector<std::vector<double>> columns;
        for (const auto& tr : runs) {
            std::vector<double> v;
            for (Eigen::Index i = 0; i < g.n(); ++i) v.push_back(tr.x[k](i));
            for (Eigen::Index j = 0; j < g.m(); ++j) v.push_back(tr.u[k](j));
            v.push_back(tr.payment[k]);
            v.push_back(tr.leader_stage_cost[k]);
            v.push_back(tr.follower_stage_cost[k]);
            columns.push_back(std::move(v));
        }
        std::vector<double> row{static_cast<double>(k)};
        for (std::size_t c = 0; c + 1 < cols.size(); ++c) {
            double mean = 0.0;
            for (const auto& v : columns) mean += v[c];
            mean /= count;
            double ss = 0.0;
            for (const auto& v : columns) ss += (v[c] - mean) * (v[c] - mean);
            row.push_back(mean);
            row.push_back(ss / (count - 1.0));
        }
        summary.row(row);
    }
    return kSuccess;
}

inline int cmd_scalar(const Scenario& sc, const Options& opt) {
    using detail::ordered_json;
    const scalar::ScalarInstance s = [&] {
        try {
            return scalar::from_game(sc.game);
        } catch (const Error& e) {
            throw ScenarioError(std::string("scalar command: ") + e.what());
        }
    }();

    ordered_json doc;
    doc["command"] = "scalar";
    const auto [lo, hi] = scalar::stability_interval(s);
    doc["stability_interval"] = {lo, hi};
    if (sc.theta) {
        const double t = sc.theta->theta(0, 0);
        doc["theta"] = t;
        doc["closed_form_cost"] = detail::number_or_null(scalar::closed_form_cost(s, t));
        doc["closed_loop_coefficient"] = scalar::closed_loop_coefficient(s, t);
    }

    const scalar::GeometricSums sums = scalar::geometric_sums(s, sc.theta ? sc.theta->theta(0, 0) : 0.0);
    doc["geometric_sums"] = {{"alpha1", sums.alpha1},
                             {"alpha2", sums.alpha2},
                             {"alpha_theta1", sums.alpha_theta1},
                             {"alpha_theta2", sums.alpha_theta2},
                             {"d_alpha1_dA", sums.d_alpha1_dA},
                             {"d_alpha2_dA", sums.d_alpha2_dA}};

    try {
        const auto r = scalar::theta_opt_infinite_horizon(s);
        doc["theta_opt_infinite_horizon"] = {{"theta_star", r.theta_star}, {"regime", scalar::to_string(r.regime)}};
        doc["regime"] = scalar::to_string(r.regime);
    } catch (const Error& e) {
        doc["theta_opt_infinite_horizon"] = {{"theta_star", nullptr}, {"error", std::string(to_string(e.kind()))}};
        doc["regime"] = nullptr;
    }

    const scalar::GammaTerms gt = scalar::gamma_terms(s);
    doc["gamma"] = gt.gamma;
    doc["gamma_prime"] = gt.gamma_prime;
    try {
        const auto r = scalar::theta_opt_R_infinity(s);
        doc["theta_opt_R_infinity"] = {{"theta_star", r.theta_star}, {"regime", scalar::to_string(r.regime)}};
    } catch (const Error& e) {
        doc["theta_opt_R_infinity"] = {{"theta_star", nullptr}, {"error", std::string(to_string(e.kind()))}};
    }
    doc["scenario"] = sc.source;
    detail::write_json(detail::output_dir(sc, opt) / "scalar.json", doc);
    return kSuccess;
}

inline int cmd_sweep(const Scenario& sc, const Options& opt) {
    if (!sc.sweep) throw ScenarioError("sweep requires field 'sweep'");
    const SweepSettings& sw = *sc.sweep;
    const GameInstance& g = sc.game;
    CsvWriter csv(detail::output_dir(sc, opt) / "sweep.csv");

    switch (sw.variable) {
    case SweepVariable::Theta: {
        if (!sw.matrices.empty()) {
            auto cols = detail::theta_columns(g.n(), g.m());
            cols.push_back("cost");
            csv.header(cols);
            for (const auto& [t, cost] : sweep_cost(g, std::span<const IncentiveMatrix>(sw.matrices))) {
                std::vector<double> row;
                detail::append_theta(row, t.theta);
                row.push_back(cost);
                csv.row(row);
            }
        } else {
            csv.header({"theta", "cost"});
            for (const auto& [t, cost] : sweep_cost(g, std::span<const double>(sw.values))) csv.row({t, cost});
        }
        break;
    }
    case SweepVariable::Horizon:
    case SweepVariable::FollowerWeight: {
        const bool horizon = sw.variable == SweepVariable::Horizon;
        const std::vector<double> search = detail::default_theta_search(g, sw);
        std::vector<double> argmins(sw.values.size());
        parallel_for(sw.values.size(), [&](std::size_t i) {
            GameInstance gi = g;
            if (horizon)
                gi.N = static_cast<int>(sw.values[i]);
            else
                gi.R(0, 0) = sw.values[i];
            argmins[i] = detail::scalar_argmin(gi, search);
        });
        csv.header({horizon ? "N" : "R", "argmin_theta"});
        for (std::size_t i = 0; i < sw.values.size(); ++i) csv.row({sw.values[i], argmins[i]});
        break;
    }
    }
    return kSuccess;
}

// Parses argv, dispatches, and maps failures onto the exit-code contract:
// 0 success, 2 invalid scenario, 3 instability or overflow, 4 failed self-check.
inline int run(int argc, const char* const* argv) {
    CLI::App app{"Incentive design for a myopic follower controlling a linear system", "incentive-forge"};
    app.require_subcommand(1, 1);

    Options opt;
    std::string out_dir;
    std::uint64_t seed = 0;
    auto add_common = [&](CLI::App* sub) {
        sub->add_option("--scenario", opt.scenario_path, "Scenario JSON file")->required();
        sub->add_option("--out", out_dir, "Output directory (overrides output_dir)");
        sub->add_option("--seed", seed, "Base seed for sampled initial states");
    };

    struct Entry {
        const char* name;
        const char* help;
        int (*fn)(const Scenario&, const Options&);
    };
    const Entry entries[] = {
        {"evaluate", "Expected leader cost, stability and steady-state error at theta", cmd_evaluate},
        {"gradcheck", "Compare the analytic gradient with central finite differences", cmd_gradcheck},
        {"optimize", "Gradient descent on the expected leader cost", cmd_optimize},
        {"simulate", "Closed-loop roll-outs with follower best responses", cmd_simulate},
        {"scalar", "Closed-form and asymptotic analysis for n = m = 1", cmd_scalar},
        {"sweep", "Cost over a theta grid, or argmin theta over N or R", cmd_sweep},
    };
    std::vector<CLI::App*> subs;
    for (const auto& e : entries) {
        auto* sub = app.add_subcommand(e.name, e.help);
        add_common(sub);
        if (std::string_view(e.name) == "gradcheck")
            sub->add_flag("--corrupt-gradient", opt.corrupt_gradient, "Perturb the analytic gradient (test hook)")
                ->group("");
        subs.push_back(sub);
    }

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return kInvalidScenario;
    }

    if (!out_dir.empty()) opt.out_dir = out_dir;
    for (std::size_t i = 0; i < subs.size(); ++i) {
        if (!subs[i]->parsed()) continue;
        if (subs[i]->count("--seed") > 0) opt.seed = seed;
        try {
            const Scenario sc = load_scenario(opt.scenario_path);
            return entries[i].fn(sc, opt);
        } catch (const ScenarioError& e) {
            std::cerr << "invalid scenario: " << e.what() << '\n';
            return kInvalidScenario;
        } catch (const Error& e) {
            std::cerr << e.what() << '\n';
            switch (e.kind()) {
            case ErrorKind::NonFinite:
            case ErrorKind::Unstable: return kUnstable;
            default: return kInvalidScenario;
            }
        } catch (const std::exception& e) {
            std::cerr << "error: " << e.what() << '\n';
            return 1;
        }
    }
    return kInvalidScenario;
}

} // namespace incentive_forge::cli
