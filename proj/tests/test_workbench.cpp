#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <set>

#include "espvfm/workbench.hpp"
#include "fixtures.hpp"

using namespace espvfm;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
    const auto p = fs::temp_directory_path() / ("espvfm_test_" + name);
    fs::remove_all(p);
    fs::create_directories(p);
    return p;
}

TimeSeries raw_experiment(int n, bool with_optional) {
    const auto p = preset_investigation(1);
    const auto op = operating_point_at_speed(p, 272.27);
    TimeSeries ts;
    for (int i = 0; i < n; ++i) ts.t.push_back(100.0 + i / 250.0);
    auto c = [&](double v) { return std::vector<double>(static_cast<std::size_t>(n), v); };
    ts.add("P1_Pa", c(op.state.P1));
    ts.add("P2_Pa", c(op.state.P2));
    ts.add("Q1_m3s", c(op.state.Q1));
    ts.add("omega_rads", c(op.state.omega));
    ts.add("torque_Nm", c(op.torque));
    if (with_optional) ts.add("Qp_m3s", c(op.state.Qp));
    return ts;
}

}  // namespace

TEST_SUITE("workbench") {

TEST_CASE("state MAPE examples") {
    TimeSeries a, b;
    a.t = b.t = {0.0, 0.5};
    a.add("Qp_m3s", {100, 200});
    b.add("Qp_m3s", {110, 190});
    const auto m = mape_states(a, b);
    CHECK(m.at("Qp_m3s").mape == doctest::Approx(7.5));
    CHECK(m.at("Qp_m3s").used == 2);
    TimeSeries z = a, zp = b;
    z["Qp_m3s"][0] = 0;
    const auto mz = mape_states(z, zp);
    CHECK(mz.at("Qp_m3s").excluded == 1);
    CHECK(mz.at("Qp_m3s").mape == doctest::Approx(5.0));
    b.t[1] = 0.6;
    CHECK_THROWS_AS(mape_states(a, b), ValidationError);
}

TEST_CASE("parameter MAPE and spread") {
    const double L = 1.31e9;
    const auto m = mape_params(L, {L, 1.2 * L});
    CHECK(m.mape == doctest::Approx(10.0));
    CHECK(m.std == doctest::Approx(10.0));
    CHECK(mape_params(L, {L, L, L}).mape == 0.0);
}

TEST_CASE("experiment matrix has 18 distinct cells") {
    for (auto method : {Method::Pinn, Method::Pf}) {
        const auto cells = experiment_matrix(method);
        CHECK(cells.size() == 18);
        std::set<std::string> names;
        for (const auto& c : cells) names.insert(c.cell_name());
        CHECK(names.size() == 18);
    }
    ExperimentSpec s;
    CHECK(s.cell_name() == "inv1_sim_case1_pinn");
    s.realizations = 0;
    CHECK_THROWS_AS(s.check(), ValidationError);
    CHECK(parse_method("pf") == Method::Pf);
    CHECK_THROWS_AS(parse_method("ekf"), ValidationError);
}

TEST_CASE("grid sizes") {
    CHECK(grid_points(1, Scenario::Simulated) == 30);
    CHECK(grid_points(2, Scenario::Noisy) == 37);
    CHECK(grid_points(1, Scenario::Experimental) == 48);
    CHECK(grid_points(2, Scenario::Experimental) == 55);
}

TEST_CASE("synthetic scenarios") {
    const auto& sc = testing::inv1_simulated();
    CHECK(sc.measurements.size() == 30);
    CHECK(sc.measurements.t[1] - sc.measurements.t[0] == doctest::Approx(kDataDt));
    CHECK(sc.truth_states.has("Qp_m3s"));
    CHECK(sc.measurements["P1_Pa"] == sc.truth_states["P1_Pa"]);
    CHECK(sc.truth_states["omega_rads"].front() == doctest::Approx(272.27).epsilon(1e-6));
    CHECK(sc.truth_states["omega_rads"].back() == doctest::Approx(314.16).epsilon(1e-3));
    const auto truth = preset_investigation(1);
    const auto n1 = build_synthetic_scenario(1, Scenario::Noisy, truth, 5);
    const auto n2 = build_synthetic_scenario(1, Scenario::Noisy, truth, 5);
    const auto n3 = build_synthetic_scenario(1, Scenario::Noisy, truth, 6);
    CHECK(n1.measurements.size() == 37);
    CHECK(n1.measurements["P1_Pa"] == n2.measurements["P1_Pa"]);
    CHECK(n1.measurements["P1_Pa"] != n3.measurements["P1_Pa"]);
    CHECK(noise_seed(3, 1) != init_seed(3, 1));
    CHECK(noise_seed(3, 1) != noise_seed(3, 2));
}

TEST_CASE("experimental schema") {
    auto ok = raw_experiment(20, false);
    CHECK_NOTHROW(check_experimental_schema(ok));
    auto missing = ok;
    missing.names.erase(missing.names.begin() + 2);
    missing.data.erase(missing.data.begin() + 2);
    CHECK_THROWS_WITH_AS(check_experimental_schema(missing), doctest::Contains("Q1_m3s"), ValidationError);
    auto extra = ok;
    extra.add("T_C", std::vector<double>(20, 30.0));
    CHECK_THROWS_WITH_AS(check_experimental_schema(extra), doctest::Contains("T_C"), ValidationError);
}

TEST_CASE("experimental ingestion") {
    const auto dir = scratch("ingest");
    const auto path = dir / "acq.csv";
    write_csv(raw_experiment(20, false), path);
    const auto ts = ingest_experimental_csv(path);
    CHECK(ts.flags.count("partial-observability") == 1);
    write_csv(raw_experiment(20, true), path);
    CHECK(ingest_experimental_csv(path).flags.count("partial-observability") == 1);

    std::ofstream(dir / "dup.csv") << "t_s,P1_Pa,P2_Pa,Q1_m3s,omega_rads,torque_Nm\n"
                                    << "0,1,2,3,4,5\n0,1,2,3,4,5\n";
    CHECK_THROWS_WITH_AS(ingest_experimental_csv(dir / "dup.csv"), doctest::Contains("3"), ValidationError);
    fs::remove_all(dir);
}

TEST_CASE("experimental pipeline on a steady acquisition") {
    const auto raw = raw_experiment(250 * 30, false);
    const auto sc = build_experimental_scenario(1, preset_investigation(1), raw);
    CHECK(sc.measurements.size() == 48);
    CHECK(sc.measurements.t.front() == 0.0);
    CHECK(sc.measurements.t[1] == doctest::Approx(0.5));
    CHECK(sc.measurements["P1_Pa"].back() == doctest::Approx(raw["P1_Pa"].front()).epsilon(1e-6));
    CHECK(sc.x0.omega == doctest::Approx(raw["omega_rads"].front()).epsilon(1e-9));
}

TEST_CASE("missing experimental data gives a skipped cell") {
    const auto dir = scratch("skip");
    ExperimentSpec s;
    s.scenario = Scenario::Experimental;
    s.realizations = 1;
    const auto rep = run_experiment(s, dir);
    CHECK(rep.status == "skipped");
    CHECK_FALSE(rep.reason.empty());
    CHECK(fs::exists(dir / s.cell_name() / "report.json"));
    s.experimental_csv = dir / "nope.csv";
    CHECK(run_experiment(s, dir).status == "skipped");
    fs::remove_all(dir);
}

TEST_CASE("cell runs are deterministic and replayable") {
    const auto dir = scratch("cell");
    ExperimentSpec s;
    s.method = Method::Pf;
    s.realizations = 2;
    s.master_seed = 17;
    s.pf.n_particles = 16;
    s.pf.ess_threshold = 8;
    s.workers = 2;
    const auto a = run_experiment(s, dir / "a");
    const auto b = run_experiment(s, dir / "b");
    REQUIRE(a.status == "ok");
    CHECK(report_to_json(a) == report_to_json(b));
    CHECK(a.realizations.size() == 2);
    CHECK(a.realizations[0].estimates != a.realizations[1].estimates);
    const auto cell = dir / "a" / s.cell_name();
    for (const char* f : {"truth_states.csv", "spec.json", "plot_states.csv", "report.json",
                          "realization_000/states.csv", "realization_000/estimates.json"})
        CHECK(fs::exists(cell / f));
    const auto replay = evaluate_cell(cell);
    for (const auto& [k, v] : a.states) CHECK(replay.states.at(k).mape == doctest::Approx(v.mape).epsilon(1e-9));
    for (std::size_t i = 0; i < a.params.size(); ++i)
        CHECK(replay.params[i].mape == doctest::Approx(a.params[i].mape).epsilon(1e-9));
    fs::remove_all(dir);
}

TEST_CASE("short PINN cell writes its artifacts") {
    const auto dir = scratch("pinn");
    ExperimentSpec s;
    s.realizations = 1;
    s.epoch_scale = 0.002;
    const auto rep = run_experiment(s, dir);
    CHECK(rep.status == "ok");
    const auto r0 = dir / s.cell_name() / "realization_000";
    CHECK(fs::exists(r0 / "loss_log.csv"));
    CHECK(fs::exists(r0 / "mlp.json"));
    CHECK(rep.params.size() == 3);
    fs::remove_all(dir);
}

}  // TEST_SUITE
