#pragma once

#include <cstdint>
#include <fstream>
#include <optional>
#include <set>
#include <sstream>
#include <stdexcept>
#include <string>
#include <variant>
#include <vector>

#include <json.hpp>

#include "model.hpp"
#include "optimizer.hpp"

namespace incentive_forge {

// Malformed or invalid scenario file. Maps to CLI exit code 2.
class ScenarioError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

struct MonteCarloSettings {
    std::size_t samples = 1;
    std::uint64_t seed = 0;
};

struct GridRange {
    double start = 0.0;
    double stop = 0.0;
    double step = 1.0;
};

enum class SweepVariable { Theta, Horizon, FollowerWeight };

struct SweepSettings {
    SweepVariable variable = SweepVariable::Theta;
    std::vector<double> values;             // theta, N or R values
    std::vector<IncentiveMatrix> matrices;  // explicit matrix grid for theta sweeps on n x m > 1
    std::optional<GridRange> theta_search;  // argmin search grid for N / R sweeps
};

struct Scenario {
    GameInstance game;
    std::optional<IncentiveMatrix> theta;
    OptimizerConfig optimizer;
    std::optional<MonteCarloSettings> monte_carlo;
    std::optional<SweepSettings> sweep;
    std::optional<std::string> output_dir;
    std::string description;
    nlohmann::json source; // the parsed document, echoed into results
};

namespace detail {

using nlohmann::json;

inline void reject_unknown_keys(const json& obj, const std::set<std::string>& allowed, const std::string& where) {
    for (const auto& [key, _] : obj.items())
        if (!allowed.contains(key)) throw ScenarioError("unknown key '" + key + "' in " + where);
}

inline const json& field(const json& obj, const std::string& key, const std::string& where) {
    const auto it = obj.find(key);
    if (it == obj.end()) throw ScenarioError("missing required field '" + key + "' in " + where);
    return *it;
}

inline double number(const json& v, const std::string& name) {
    if (!v.is_number()) throw ScenarioError("field '" + name + "' must be a number");
    return v.get<double>();
}

inline long long integer(const json& v, const std::string& name) {
    if (!v.is_number_integer()) throw ScenarioError("field '" + name + "' must be an integer");
    return v.get<long long>();
}

inline Matrix matrix(const json& v, Eigen::Index rows, Eigen::Index cols, const std::string& name) {
    if (!v.is_array()) throw ScenarioError("field '" + name + "' must be a row-major array");
    if (static_cast<Eigen::Index>(v.size()) != rows * cols)
        throw ScenarioError("field '" + name + "' has " + std::to_string(v.size()) + " entries, expected " +
                            std::to_string(rows * cols) + " (" + std::to_string(rows) + "x" + std::to_string(cols) +
                            ")");
    Matrix M(rows, cols);
    for (Eigen::Index i = 0; i < rows; ++i)
        for (Eigen::Index j = 0; j < cols; ++j)
            M(i, j) = number(v[static_cast<std::size_t>(i * cols + j)], name);
    return M;
}

inline Vector vector(const json& v, Eigen::Index size, const std::string& name) {
    return matrix(v, size, 1, name).col(0);
}

inline GridRange grid_range(const json& v, const std::string& where) {
    if (!v.is_object()) throw ScenarioError(where + " must be an object {start, stop, step}");
    reject_unknown_keys(v, {"start", "stop", "step"}, where);
    GridRange g{number(field(v, "start", where), "start"), number(field(v, "stop", where), "stop"),
                number(field(v, "step", where), "step")};
    if (!(g.step > 0.0)) throw ScenarioError(where + ".step must be positive");
    if (g.stop < g.start) throw ScenarioError(where + ".stop must not precede start");
    return g;
}

} // namespace detail

[[nodiscard]] inline Scenario parse_scenario(const nlohmann::json& doc) {
    using namespace detail;
    if (!doc.is_object()) throw ScenarioError("scenario must be a JSON object");
    reject_unknown_keys(doc,
                        {"description", "n", "m", "N", "A", "B", "Q", "R", "xref", "mu0", "x0", "Sigma0",
                         "Sigma0_factor", "theta", "optimizer", "monte_carlo", "sweep", "output_dir"},
                        "scenario");

    Scenario sc;
    sc.source = doc;
    if (auto it = doc.find("description"); it != doc.end()) {
        if (!it->is_string()) throw ScenarioError("field 'description' must be a string");
        sc.description = it->get<std::string>();
    }

    const long long n = integer(field(doc, "n", "scenario"), "n");
    const long long m = integer(field(doc, "m", "scenario"), "m");
    if (n < 1 || m < 1) throw ScenarioError("n and m must be >= 1");
    const long long N = integer(field(doc, "N", "scenario"), "N");
    if (N < 1 || N > 100000000) throw ScenarioError("N must be in [1, 1e8]");

    GameInstance& g = sc.game;
    g.N = static_cast<int>(N);
    g.A = matrix(field(doc, "A", "scenario"), n, n, "A");
    g.B = matrix(field(doc, "B", "scenario"), n, m, "B");
    g.Q = matrix(field(doc, "Q", "scenario"), n, n, "Q");
    g.R = matrix(field(doc, "R", "scenario"), m, m, "R");
    g.xref = vector(field(doc, "xref", "scenario"), n, "xref");

    const bool has_mu0 = doc.contains("mu0");
    const bool has_x0 = doc.contains("x0");
    if (has_mu0 == has_x0) throw ScenarioError("exactly one of 'mu0' or 'x0' (mean initial state) is required");
    g.mu0 = has_mu0 ? vector(doc["mu0"], n, "mu0") : Vector(vector(doc["x0"], n, "x0") - g.xref);

    const bool has_cov = doc.contains("Sigma0");
    const bool has_factor = doc.contains("Sigma0_factor");
    if (has_cov && has_factor) throw ScenarioError("give either 'Sigma0' or 'Sigma0_factor', not both");
    if (has_cov) {
        g.Sigma0 = matrix(doc["Sigma0"], n, n, "Sigma0");
    } else if (has_factor) {
        // Sigma0 = L L^T; a scalar standard deviation 0.3 gives variance 0.09.
        const Matrix L = matrix(doc["Sigma0_factor"], n, n, "Sigma0_factor");
        g.Sigma0 = L * L.transpose();
    } else {
        g.Sigma0 = Matrix::Zero(n, n);
    }

    try {
        g = validate(std::move(g));
    } catch (const Error& e) {
        throw ScenarioError(e.what());
    }

    if (auto it = doc.find("theta"); it != doc.end()) sc.theta = IncentiveMatrix{matrix(*it, n, m, "theta")};

    if (auto it = doc.find("optimizer"); it != doc.end()) {
        const json& o = *it;
        if (!o.is_object()) throw ScenarioError("'optimizer' must be an object");
        reject_unknown_keys(o, {"max_iters", "grad_tol", "initial_step", "backtrack_factor", "armijo_c"}, "optimizer");
        if (o.contains("max_iters")) sc.optimizer.max_iters = static_cast<int>(integer(o["max_iters"], "max_iters"));
        if (o.contains("grad_tol")) sc.optimizer.grad_tol = number(o["grad_tol"], "grad_tol");
        if (o.contains("initial_step")) sc.optimizer.initial_step = number(o["initial_step"], "initial_step");
        if (o.contains("backtrack_factor"))
            sc.optimizer.backtrack_factor = number(o["backtrack_factor"], "backtrack_factor");
        if (o.contains("armijo_c")) sc.optimizer.armijo_c = number(o["armijo_c"], "armijo_c");
    }
    sc.optimizer.theta_init = sc.theta;
    try {
        validate(sc.optimizer);
    } catch (const Error& e) {
        throw ScenarioError(e.what());
    }

    if (auto it = doc.find("monte_carlo"); it != doc.end()) {
        const json& mc = *it;
        if (!mc.is_object()) throw ScenarioError("'monte_carlo' must be an object");
        reject_unknown_keys(mc, {"samples", "seed"}, "monte_carlo");
        MonteCarloSettings s;
        const long long samples = integer(field(mc, "samples", "monte_carlo"), "samples");
        if (samples < 1) throw ScenarioError("monte_carlo.samples must be >= 1");
        s.samples = static_cast<std::size_t>(samples);
        if (mc.contains("seed")) {
            if (!mc["seed"].is_number_unsigned() && !(mc["seed"].is_number_integer() && mc["seed"].get<long long>() >= 0))
                throw ScenarioError("monte_carlo.seed must be a nonnegative integer");
            s.seed = mc["seed"].get<std::uint64_t>();
        }
        sc.monte_carlo = s;
    }

    if (auto it = doc.find("sweep"); it != doc.end()) {
        const json& sw = *it;
        if (!sw.is_object()) throw ScenarioError("'sweep' must be an object");
        reject_unknown_keys(sw, {"variable", "grid", "theta_search"}, "sweep");
        SweepSettings s;
        const json& var = field(sw, "variable", "sweep");
        if (!var.is_string()) throw ScenarioError("sweep.variable must be a string");
        const auto name = var.get<std::string>();
        if (name == "theta")
            s.variable = SweepVariable::Theta;
        else if (name == "N")
            s.variable = SweepVariable::Horizon;
        else if (name == "R")
            s.variable = SweepVariable::FollowerWeight;
        else
            throw ScenarioError("sweep.variable must be one of theta, N, R; got '" + name + "'");

        const json& grid = field(sw, "grid", "sweep");
        if (grid.is_object()) {
            const GridRange r = grid_range(grid, "sweep.grid");
            s.values = make_grid(r.start, r.stop, r.step);
        } else if (grid.is_array()) {
            if (grid.empty()) throw ScenarioError("sweep.grid is empty");
            for (const auto& v : grid) {
                if (v.is_array()) {
                    if (s.variable != SweepVariable::Theta)
                        throw ScenarioError("matrix grid entries are only valid for theta sweeps");
                    s.matrices.emplace_back(matrix(v, n, m, "sweep.grid entry"));
                } else {
                    s.values.push_back(number(v, "sweep.grid entry"));
                }
            }
            if (!s.values.empty() && !s.matrices.empty())
                throw ScenarioError("sweep.grid mixes scalar and matrix entries");
        } else {
            throw ScenarioError("sweep.grid must be {start, stop, step} or an array");
        }

        if (s.variable == SweepVariable::Horizon) {
            for (double v : s.values)
                if (v < 1.0 || v != std::floor(v)) throw ScenarioError("N sweep values must be positive integers");
        }
        if (s.variable == SweepVariable::FollowerWeight) {
            for (double v : s.values)
                if (!(v > 0.0)) throw ScenarioError("R sweep values must be positive");
        }
        if (s.variable != SweepVariable::Theta || s.matrices.empty()) {
            if (n != 1 || m != 1)
                throw ScenarioError("scalar sweep grids need n = m = 1; use matrix grid entries for theta sweeps");
        }
        if (auto ts = sw.find("theta_search"); ts != sw.end()) s.theta_search = grid_range(*ts, "sweep.theta_search");
        sc.sweep = std::move(s);
    }

    if (auto it = doc.find("output_dir"); it != doc.end()) {
        if (!it->is_string()) throw ScenarioError("field 'output_dir' must be a string");
        sc.output_dir = it->get<std::string>();
    }
    return sc;
}

[[nodiscard]] inline Scenario load_scenario(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ScenarioError("cannot open scenario file '" + path + "'");
    nlohmann::json doc;
    try {
        doc = nlohmann::json::parse(in);
    } catch (const nlohmann::json::parse_error& e) {
        throw ScenarioError(std::string("scenario is not valid JSON: ") + e.what());
    }
    return parse_scenario(doc);
}

} // namespace incentive_forge
