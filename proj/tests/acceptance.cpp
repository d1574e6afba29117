// Acceptance checks. Usage: acceptance <1..10|all> [--work DIR] [--realizations N]
#include <algorithm>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <functional>
#include <iostream>
#include <random>
#include <sstream>
#include <string>
#include <thread>

#include <CLI11.hpp>

#include "espvfm/dsp.hpp"
#include "espvfm/identifiability.hpp"
#include "espvfm/particle_filter.hpp"
#include "espvfm/pinn.hpp"
#include "espvfm/workbench.hpp"
#include "fixtures.hpp"
#include "tone.hpp"

using namespace espvfm;
namespace fs = std::filesystem;

namespace {

struct Outcome {
    bool pass = false;
    std::string detail;
};

struct Context {
    fs::path work = "acceptance_work";
    int realizations = 30;
    int workers = static_cast<int>(std::max(1u, std::thread::hardware_concurrency()));
};

std::string fmt(double v, int prec = 4) {
    std::ostringstream os;
    os.precision(prec);
    os << v;
    return os.str();
}

double elapsed_s(std::chrono::steady_clock::time_point t0) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

/// Runs a cell once and replays it from its artifacts afterwards.
MetricReport cached_cell(const Context& ctx, ExperimentSpec spec) {
    spec.workers = ctx.workers;
    const fs::path root = ctx.work / ("n" + std::to_string(spec.realizations));
    const fs::path cell = root / spec.cell_name();
    if (fs::exists(cell / "report.json")) {
        const Json j = read_json_file(cell / "report.json");
        if (j.value("status", "") == "ok") return evaluate_cell(cell);
    }
    return run_experiment(spec, root);
}

double param_mape(const MetricReport& r, Param p) {
    for (std::size_t i = 0; i < r.unknowns.size(); ++i)
        if (r.unknowns[i] == p) return r.params[i].mape;
    throw ValidationError("parameter not in report: " + std::string(param_name(p)));
}

Outcome c1_forward(const Context&) {
    const auto t0 = std::chrono::steady_clock::now();
    const auto p = preset_investigation(1);
    const auto& sc = testing::inv1_simulated();
    const double t_end = 14.5;
    const auto ad = integrate_terminal(p, sc.x0, sc.torque, 0.0, t_end, {1e-8, 1e-8}).to_array();
    const auto rk = integrate_rk4(p, sc.x0, sc.torque, 0.0, t_end, 1e-5).to_array();
    double worst = 0;
    for (int i = 0; i < 6; ++i) worst = std::max(worst, std::abs(ad[i] - rk[i]) / std::abs(rk[i]));
    const double secs = elapsed_s(t0);
    return {worst <= 1e-6 && secs < 5.0,
            "max relative terminal deviation " + fmt(worst) + " (<= 1e-6), " + fmt(secs, 3) + " s (< 5 s)"};
}

Outcome c2_gradients(const Context&) {
    const auto t0 = std::chrono::steady_clock::now();
    double worst = 0;
    int checks = 0;
    for (int case_id : {1, 3}) {
        const auto prob = testing::inv1_problem(case_id);
        PinnLoss loss(prob);
        const auto sched = default_schedule(case_id, Scenario::Simulated);
        for (std::uint64_t seed = 1; seed <= 10; ++seed) {
            auto tr = init_trainables(prob, sched, seed);
            std::mt19937_64 rng(seed);
            std::normal_distribution<double> nd(0.0, 0.3);
            for (Eigen::Index k = 0; k < tr.raw_params.size(); ++k) tr.raw_params[k] = nd(rng);
            for (auto g : {testing::Group::Nn, testing::Group::Ps, testing::Group::Sa})
                for (std::uint64_t dir = 0; dir < 5; ++dir) {
                    worst = std::max(worst, testing::directional_fd_error(loss, tr, g, seed * 100 + dir, 1e-4));
                    ++checks;
                }
        }
    }
    const double secs = elapsed_s(t0);
    return {worst <= 1e-5 && secs < 60.0, std::to_string(checks) + " directional checks, worst relative error " +
                                              fmt(worst) + " (<= 1e-5), " + fmt(secs, 3) + " s (< 60 s)"};
}

ExperimentSpec pinn_spec(Scenario s, int case_id, int n) {
    ExperimentSpec e;
    e.scenario = s;
    e.case_id = case_id;
    e.realizations = n;
    e.master_seed = 2024;
    return e;
}

Outcome c3_case1_params(const Context& ctx) {
    const auto r = cached_cell(ctx, pinn_spec(Scenario::Simulated, 1, ctx.realizations));
    if (r.status != "ok") return {false, "cell status " + r.status + ": " + r.reason};
    const double b = param_mape(r, Param::B), m = param_mape(r, Param::mu), rho = param_mape(r, Param::rho);
    return {b <= 2 && m <= 2 && rho <= 2, "MAPE B " + fmt(b) + "%, mu " + fmt(m) + "%, rho " + fmt(rho) +
                                               "% (each <= 2%, " + std::to_string(ctx.realizations) + " runs)"};
}

Outcome c4_case1_states(const Context& ctx) {
    const auto r = cached_cell(ctx, pinn_spec(Scenario::Simulated, 1, ctx.realizations));
    if (r.status != "ok") return {false, "cell status " + r.status + ": " + r.reason};
    const double q = r.states.at("Qp_m3s").mape, w = r.states.at("omega_rads").mape;
    return {q <= 0.5 && w <= 0.5, "state MAPE Qp " + fmt(q) + "%, omega " + fmt(w) + "% (each <= 0.5%)"};
}

Outcome c5_case1_noisy(const Context& ctx) {
    const auto r = cached_cell(ctx, pinn_spec(Scenario::Noisy, 1, ctx.realizations));
    if (r.status != "ok") return {false, "cell status " + r.status + ": " + r.reason};
    const double b = param_mape(r, Param::B), m = param_mape(r, Param::mu), rho = param_mape(r, Param::rho);
    return {b <= 3 && m <= 3 && rho <= 3, "noisy MAPE B " + fmt(b) + "%, mu " + fmt(m) + "%, rho " + fmt(rho) +
                                               "% (each <= 3%)"};
}

Outcome c6_case3_pinning(const Context& ctx) {
    const int n = std::min(ctx.realizations, 3);
    const auto r = cached_cell(ctx, pinn_spec(Scenario::Simulated, 3, n));
    if (r.status != "ok") return {false, "cell status " + r.status + ": " + r.reason};
    bool pass = true;
    std::string dev;
    for (const auto& run : r.realizations) {
        if (run.status != "ok") {
            pass = false;
            continue;
        }
        const double d = std::abs(run.estimates[0] / r.truth[0] - 1.0);
        pass = pass && d >= 0.14 && d <= 0.15;
        dev += (dev.empty() ? "" : ", ") + fmt(100 * d, 6) + "%";
    }
    return {pass, "|B/B_true - 1| per run: " + dev + " (each in [14%, 15%], " + std::to_string(n) + " runs)"};
}

Outcome c7_pf(const Context& ctx) {
    ExperimentSpec e;
    e.method = Method::Pf;
    e.realizations = ctx.realizations;
    e.master_seed = 2024;
    const auto r = cached_cell(ctx, e);
    if (r.status != "ok") return {false, "cell status " + r.status + ": " + r.reason};
    const double w = r.states.at("omega_rads").mape, p1 = r.states.at("P1_Pa").mape;
    const double mu = param_mape(r, Param::mu);
    return {w <= 3 && p1 <= 5 && mu <= 8, "PF omega MAPE " + fmt(w) + "% (<= 3%), P1 " + fmt(p1) +
                                              "% (<= 5%), mu MAPE " + fmt(mu) + "% (<= 8%)"};
}

double correlation_of(int set_size, Param a, Param b, int workers) {
    const auto p = preset_investigation(1);
    SensitivityScenario sc;
    for (int i = 0; i < grid_points(1, Scenario::Simulated); ++i) sc.grid.push_back(kDataDt * i);
    sc.torque = synthetic_torque(p, 1, sc.grid.back());
    sc.x0 = steady_state(p, sc.torque(0.0), operating_point_at_speed(p, investigation_speeds(1).first).state);
    const auto subset = identifiability_set(set_size);
    const auto s = output_sensitivities(p, subset, sc, {4, 5}, workers, {1e-12, 1e-14});
    const auto rep = correlation_matrix(fisher_information(s.S, relative_noise(s)));
    const auto ia = std::find(subset.begin(), subset.end(), a) - subset.begin();
    const auto ib = std::find(subset.begin(), subset.end(), b) - subset.begin();
    return std::abs(rep.R(ia, ib));
}

Outcome c8_identifiability(const Context& ctx) {
    const double r12 = correlation_of(12, Param::rho, Param::ku, ctx.workers);
    const double r8 = correlation_of(8, Param::mu, Param::k4p, ctx.workers);
    return {r12 >= 0.99 && r8 >= 0.95 && r8 <= 1.0,
            "12-set |r(rho,ku)| = " + fmt(r12, 6) + " (>= 0.99), 8-set |r(mu,k4p)| = " + fmt(r8, 6) +
                " (in [0.95, 1])"};
}

Outcome c9_dsp(const Context&) {
    const auto d = design_butterworth(8, 10.0, 250.0);
    const double at_fc = testing::db(testing::tone_gain(d, 10.0));
    const double at_50 = testing::db(testing::tone_gain(d, 50.0));
    return {std::abs(at_fc + 3.01) <= 0.1 && at_50 <= -100.0,
            "gain at 10 Hz " + fmt(at_fc, 5) + " dB (-3.01 +- 0.1), at 50 Hz " + fmt(at_50, 5) + " dB (<= -100)"};
}

Outcome c10_properties(const Context&) {
    std::vector<std::string> failed;
    auto expect = [&](bool ok, const std::string& what) {
        if (!ok) failed.push_back(what);
    };
    std::mt19937_64 rng(10);
    std::normal_distribution<double> nd;
    std::exponential_distribution<double> ed;

    for (int k = 0; k < 200; ++k) {
        Eigen::VectorXd lw(200);
        for (int i = 0; i < 200; ++i) lw[i] = 500 * nd(rng);
        const Eigen::VectorXd w = normalize_log_weights(lw);
        expect(std::abs(w.sum() - 1.0) < 1e-12 && w.minCoeff() >= 0, "weight normalization");
        const double e = effective_sample_size(w);
        expect(e >= 1.0 - 1e-12 && e <= 200.0 + 1e-9, "ESS bounds");
        Eigen::VectorXd r(200);
        for (int i = 0; i < 200; ++i) r[i] = ed(rng);
        r /= r.sum();
        const double er = effective_sample_size(r);
        expect(er >= 1.0 - 1e-12 && er <= 200.0 + 1e-9, "ESS bounds");
    }

    const ParameterTransform xf{TransformKind::Bounded, 1, 1.31e9, 0.15};
    const auto [lo, hi] = transform_range(xf);
    bool in_range = true;
    for (int i = 0; i < 1000000; ++i) {
        const double v = transform_parameter(3.0 * nd(rng), xf);
        in_range = in_range && v > lo && v < hi;
    }
    expect(in_range, "bounded transform range");

    const auto& sc = testing::inv1_simulated();
    const auto guess = bounds_guess_params(sc.truth);
    const auto est = estimate_state_bounds(sc.measurements, sc.torque, guess);
    for (double gain : {0.5, 2.0, 3.0}) {
        TimeSeries m = sc.measurements;
        const double c1 = m["P1_Pa"].front(), c2 = m["P2_Pa"].front();
        for (auto& v : m["P1_Pa"]) v = c1 + gain * (v - c1);
        for (auto& v : m["P2_Pa"]) v = c2 + gain * (v - c2);
        const auto e2 = estimate_state_bounds(m, sc.torque, guess);
        expect(e2.t1 == est.t1 && e2.t2 == est.t2, "argmin/argmax invariance");
    }

    const auto prob = testing::inv1_problem(1);
    auto sched = default_schedule(1, Scenario::Simulated).scaled(0.004);
    const auto a = train(prob, sched, 9);
    const auto b = train(prob, sched, 9);
    expect(a.estimates == b.estimates, "PINN determinism");

    PfProblem pp;
    pp.known = sc.truth;
    pp.unknowns = {Param::B, Param::mu, Param::rho};
    pp.x0 = sc.x0;
    pp.torque = sc.torque;
    pp.measurements = sc.measurements.select({"P1_Pa", "P2_Pa"});
    pp.measurements.t.resize(7);
    for (auto& ch : pp.measurements.data) ch.resize(7);
    PfConfig cfg;
    cfg.n_particles = 20;
    cfg.ess_threshold = 10;
    const auto pa = pf_run(cfg, pp, 4);
    cfg.workers = 2;
    const auto pb = pf_run(cfg, pp, 4);
    expect(pa.estimates == pb.estimates, "PF determinism");

    std::string detail = "weight normalization, ESS bounds, transform range, argmin/argmax invariance, determinism";
    if (!failed.empty()) {
        detail = "failed:";
        for (const auto& f : failed) detail += " " + f + ";";
    }
    return {failed.empty(), detail};
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"acceptance checks"};
    std::string which = "all";
    Context ctx;
    std::string work = ctx.work.string();
    app.add_option("criterion", which, "1..10 or all");
    app.add_option("--work", work, "Directory for cached experiment cells");
    app.add_option("--realizations", ctx.realizations, "Realizations per statistical criterion");
    CLI11_PARSE(app, argc, argv);
    ctx.work = work;

    const std::vector<std::pair<std::string, std::function<Outcome(const Context&)>>> all{
        {"forward-model fidelity", c1_forward},
        {"gradient correctness", c2_gradients},
        {"case 1 simulated parameter recovery", c3_case1_params},
        {"case 1 simulated state estimation", c4_case1_states},
        {"case 1 noisy parameter recovery", c5_case1_noisy},
        {"case 3 bound pinning", c6_case3_pinning},
        {"particle filter case 1", c7_pf},
        {"identifiability correlations", c8_identifiability},
        {"dsp properties", c9_dsp},
        {"property suites", c10_properties},
    };
    std::vector<int> sel;
    if (which == "all") {
        for (int i = 1; i <= 10; ++i) sel.push_back(i);
    } else {
        const int i = std::stoi(which);
        if (i < 1 || i > 10) {
            std::cerr << "criterion must be 1..10 or all\n";
            return 2;
        }
        sel.push_back(i);
    }
    bool ok = true;
    for (int i : sel) {
        const auto& [name, fn] = all[static_cast<std::size_t>(i - 1)];
        Outcome o;
        try {
            o = fn(ctx);
        } catch (const std::exception& e) {
            o = {false, std::string("error: ") + e.what()};
        }
        std::cout << "criterion " << i << " [" << name << "]: " << (o.pass ? "PASS" : "FAIL") << " - " << o.detail
                  << std::endl;
        ok = ok && o.pass;
    }
    return ok ? 0 : 1;
}
