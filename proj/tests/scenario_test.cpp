#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>

#include <incentive_forge/scenario.hpp>

#include "test_support.hpp"

namespace incentive_forge {
namespace {

using nlohmann::json;

std::string scenario_path(const std::string& name) { return std::string(INCENTIVE_FORGE_SCENARIO_DIR) + "/" + name; }

json base_doc() {
    return json::parse(R"({"n": 1, "m": 1, "N": 10, "A": [0.4], "B": [1.0], "Q": [1.0], "R": [1.0],
                           "xref": [1.0], "mu0": [-1.0], "Sigma0": [0.09]})");
}

void expect_rejected(const json& doc, const std::string& fragment) {
    try {
        (void)parse_scenario(doc);
        ADD_FAILURE() << "accepted: " << doc.dump();
    } catch (const ScenarioError& e) {
        EXPECT_NE(std::string(e.what()).find(fragment), std::string::npos) << e.what();
    }
}

TEST(Scenario, FixtureFilesLoad) {
    for (const auto& entry : std::filesystem::directory_iterator(INCENTIVE_FORGE_SCENARIO_DIR)) {
        if (entry.path().extension() != ".json") continue;
        EXPECT_NO_THROW((void)load_scenario(entry.path().string())) << entry.path();
    }
}

TEST(Scenario, ScalarFixtureMatchesTestInstance) {
    const Scenario sc = load_scenario(scenario_path("scalar.json"));
    const GameInstance expect = testing::scalar_game();
    EXPECT_EQ(sc.game.A, expect.A);
    EXPECT_EQ(sc.game.mu0, expect.mu0);
    EXPECT_EQ(sc.game.Sigma0, expect.Sigma0);
    EXPECT_EQ(sc.game.N, expect.N);
    ASSERT_TRUE(sc.theta);
    EXPECT_EQ(sc.theta->theta(0, 0), 0.0);
    ASSERT_TRUE(sc.monte_carlo);
    EXPECT_EQ(sc.monte_carlo->samples, 100u);
    EXPECT_EQ(sc.monte_carlo->seed, 7u);
    EXPECT_EQ(sc.source["N"], 10);
}

TEST(Scenario, DesignFixtureIsRowMajor) {
    const Scenario sc = load_scenario(scenario_path("design_2d.json"));
    EXPECT_EQ(sc.game.A, testing::design_2d().A);
    EXPECT_EQ(sc.game.mu0, testing::design_2d().mu0);
    EXPECT_EQ(sc.theta->theta(0, 0), -0.7);
    EXPECT_EQ(sc.theta->theta(1, 0), 0.4);
    EXPECT_EQ(sc.optimizer.grad_tol, 1e-8);
}

TEST(Scenario, RejectsUnknownAndMissingKeys) {
    auto doc = base_doc();
    doc["Rr"] = 1;
    expect_rejected(doc, "unknown key 'Rr'");
    doc = base_doc();
    doc.erase("Q");
    expect_rejected(doc, "missing required field 'Q'");
    doc = base_doc();
    doc["optimizer"] = {{"step", 1.0}};
    expect_rejected(doc, "unknown key 'step' in optimizer");
}

TEST(Scenario, RejectsWrongShapesAndTypes) {
    auto doc = base_doc();
    doc["A"] = {0.4, 0.1};
    expect_rejected(doc, "'A' has 2 entries, expected 1");
    doc = base_doc();
    doc["theta"] = {1.0, 2.0};
    expect_rejected(doc, "'theta'");
    doc = base_doc();
    doc["N"] = 2.5;
    expect_rejected(doc, "'N' must be an integer");
    doc = base_doc();
    doc["N"] = 0;
    expect_rejected(doc, "N must be");
    doc = base_doc();
    doc["B"] = "one";
    expect_rejected(doc, "'B'");
}

TEST(Scenario, RejectsInvalidModel) {
    auto doc = base_doc();
    doc["R"] = {-1.0};
    expect_rejected(doc, "");
    doc = base_doc();
    doc["Sigma0"] = {-0.5};
    expect_rejected(doc, "");
    doc = base_doc();
    doc["optimizer"] = {{"backtrack_factor", 1.5}};
    expect_rejected(doc, "backtrack_factor");
}

TEST(Scenario, InitialStateAlternatives) {
    auto doc = base_doc();
    doc.erase("mu0");
    doc["x0"] = {0.0};
    EXPECT_EQ(parse_scenario(doc).game.mu0(0), -1.0);
    doc["mu0"] = {-1.0};
    expect_rejected(doc, "exactly one of 'mu0' or 'x0'");
    doc = base_doc();
    doc.erase("Sigma0");
    doc["Sigma0_factor"] = {0.3};
    EXPECT_NEAR(parse_scenario(doc).game.Sigma0(0, 0), 0.09, 1e-17);
    doc["Sigma0"] = {0.09};
    expect_rejected(doc, "not both");
    doc = base_doc();
    doc.erase("Sigma0");
    EXPECT_EQ(parse_scenario(doc).game.Sigma0(0, 0), 0.0);
}

TEST(Scenario, MonteCarloBlock) {
    auto doc = base_doc();
    doc["monte_carlo"] = {{"samples", 5}};
    const auto sc = parse_scenario(doc);
    EXPECT_EQ(sc.monte_carlo->samples, 5u);
    EXPECT_EQ(sc.monte_carlo->seed, 0u);
    doc["monte_carlo"] = {{"samples", 0}};
    expect_rejected(doc, "samples");
    doc["monte_carlo"] = {{"samples", 2}, {"seed", -3}};
    expect_rejected(doc, "seed");
}

TEST(Scenario, SweepGrids) {
    auto doc = base_doc();
    doc["sweep"] = {{"variable", "theta"}, {"grid", {{"start", -1.0}, {"stop", 1.0}, {"step", 0.5}}}};
    auto sc = parse_scenario(doc);
    EXPECT_EQ(sc.sweep->variable, SweepVariable::Theta);
    EXPECT_EQ(sc.sweep->values, (std::vector<double>{-1.0, -0.5, 0.0, 0.5, 1.0}));

    doc["sweep"] = {{"variable", "N"}, {"grid", {10, 50}}, {"theta_search", {{"start", -2.0}, {"stop", 1.0}, {"step", 0.01}}}};
    sc = parse_scenario(doc);
    EXPECT_EQ(sc.sweep->variable, SweepVariable::Horizon);
    ASSERT_TRUE(sc.sweep->theta_search);
    EXPECT_EQ(sc.sweep->theta_search->step, 0.01);

    doc["sweep"] = {{"variable", "N"}, {"grid", {10.5}}};
    expect_rejected(doc, "positive integers");
    doc["sweep"] = {{"variable", "R"}, {"grid", {0.0}}};
    expect_rejected(doc, "positive");
    doc["sweep"] = {{"variable", "Q"}, {"grid", {1.0}}};
    expect_rejected(doc, "one of theta, N, R");
    doc["sweep"] = {{"variable", "theta"}, {"grid", json::array()}};
    expect_rejected(doc, "empty");
    doc["sweep"] = {{"variable", "theta"}, {"grid", {{"start", 1.0}, {"stop", 0.0}, {"step", 0.5}}}};
    expect_rejected(doc, "precede");
}

TEST(Scenario, MatrixSweepNeedsThetaShape) {
    const Scenario base = load_scenario(scenario_path("design_2d.json"));
    json doc = base.source;
    doc["sweep"] = {{"variable", "theta"}, {"grid", {{-0.5, 0.1}, {-0.6, 0.2}}}};
    const auto sc = parse_scenario(doc);
    ASSERT_EQ(sc.sweep->matrices.size(), 2u);
    EXPECT_EQ(sc.sweep->matrices[1].theta(1, 0), 0.2);
    doc["sweep"] = {{"variable", "theta"}, {"grid", {-0.5, 0.1}}};
    expect_rejected(doc, "n = m = 1");
    doc["sweep"] = {{"variable", "theta"}, {"grid", {{-0.5, 0.1}, 0.3}}};
    expect_rejected(doc, "");
}

TEST(Scenario, FileErrors) {
    EXPECT_THROW((void)load_scenario(scenario_path("does_not_exist.json")), ScenarioError);
    const auto tmp = std::filesystem::temp_directory_path() / "incentive_forge_bad.json";
    std::ofstream(tmp) << "{\"n\": 1,";
    EXPECT_THROW((void)load_scenario(tmp.string()), ScenarioError);
    std::ofstream(tmp) << "[1, 2]";
    EXPECT_THROW((void)load_scenario(tmp.string()), ScenarioError);
    std::filesystem::remove(tmp);
}

} // namespace
} // namespace incentive_forge
