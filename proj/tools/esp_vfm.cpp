#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "espvfm/dsp.hpp"
#include "espvfm/identifiability.hpp"
#include "espvfm/params_io.hpp"
#include "espvfm/sim.hpp"
#include "espvfm/workbench.hpp"

namespace fs = std::filesystem;
using namespace espvfm;

namespace {

struct Globals {
    std::string config;
    std::string out = "out";
    std::uint64_t seed = 0;
    int workers = 1;
};

struct CellFlags {
    int investigation = 1;
    std::string scenario = "sim";
    int case_id = 1;
    int realizations = 1;
    double epoch_scale = 1.0;
    std::string schedule;
    std::string data;
    int particles = 200;
    double ess_threshold = 50;
    double jitter = 0.03;
};

void add_cell_flags(CLI::App* app, CellFlags& f, bool pf) {
    app->add_option("--investigation,-i", f.investigation, "Investigation 1 or 2")->check(CLI::IsMember({1, 2}));
    app->add_option("--scenario", f.scenario, "sim | noisy | exp");
    app->add_option("--case,-c", f.case_id, "Case 1, 2 or 3")->check(CLI::IsMember({1, 2, 3}));
    app->add_option("--realizations,-n", f.realizations, "Independent runs");
    app->add_option("--data", f.data, "Experimental CSV (exp scenario)");
    if (pf) {
        app->add_option("--particles", f.particles, "Particle count");
        app->add_option("--ess-threshold", f.ess_threshold, "Resampling threshold");
        app->add_option("--jitter", f.jitter, "Relative resampling jitter std");
    } else {
        app->add_option("--epoch-scale", f.epoch_scale, "Multiply every schedule epoch boundary");
        app->add_option("--schedule", f.schedule, "Schedule JSON (stages and initial weights)");
    }
}

ExperimentSpec make_spec(const CellFlags& f, const Globals& g, Method m) {
    ExperimentSpec s;
    s.investigation = f.investigation;
    s.scenario = parse_scenario(f.scenario);
    s.case_id = f.case_id;
    s.method = m;
    s.realizations = f.realizations;
    s.master_seed = g.seed;
    s.epoch_scale = f.epoch_scale;
    s.workers = g.workers;
    if (!f.data.empty()) s.experimental_csv = f.data;
    if (!f.schedule.empty()) s.schedule = schedule_from_json(read_json_file(f.schedule));
    s.pf.n_particles = f.particles;
    s.pf.ess_threshold = f.ess_threshold;
    s.pf.jitter_std = f.jitter;
    return s;
}

void print_report(const MetricReport& r) {
    std::cout << r.cell << ": " << r.status;
    if (!r.reason.empty()) std::cout << " (" << r.reason << ")";
    std::cout << "\n";
    for (std::size_t k = 0; k < r.params.size(); ++k)
        std::cout << "  " << param_name(r.unknowns[k]) << " MAPE " << r.params[k].mape << "% std "
                  << r.params[k].std << "%\n";
    for (const auto& [name, m] : r.states) std::cout << "  " << name << " MAPE " << m.mape << "%\n";
}

int cmd_simulate(const Globals& g, const std::string& preset, int inv, double t_end, double dt,
                 const std::string& torque_csv, bool noisy) {
    const EspParams p = load_preset(preset);
    const TorqueSignal torque = torque_csv.empty() ? synthetic_torque(p, inv, t_end)
                                                   : TorqueSignal::from_series(read_csv(fs::path(torque_csv)));
    const auto [wi, wf] = investigation_speeds(inv);
    (void)wf;
    const double t0 = torque.t_begin();
    const StateVector x0 = steady_state(p, torque(t0), operating_point_at_speed(p, wi).state);
    const Trajectory tr = integrate(p, x0, torque, t0, t_end);
    fs::create_directories(g.out);
    write_csv(resample_fixed(tr, dt), fs::path(g.out) / "trajectory.csv");
    std::vector<double> grid;
    for (double t = t0; t <= t_end + 1e-12; t += kDataDt) grid.push_back(t);
    const auto xs = integrate_on_grid(p, x0, torque, grid);
    TimeSeries gs;
    gs.t = grid;
    for (int j = 0; j < 6; ++j) {
        std::vector<double> c;
        for (const auto& x : xs) c.push_back(x[j]);
        gs.add(std::string(kStateChannels[j]), c);
    }
    write_csv(gs, fs::path(g.out) / "grid.csv");
    TimeSeries meas = gs.select({"P1_Pa", "P2_Pa"});
    if (noisy) {
        NoiseSpec ns;
        ns.sigma = {{"P1_Pa", kPressureSigmaPa}, {"P2_Pa", kPressureSigmaPa}};
        ns.seed = g.seed;
        meas = add_gaussian_noise(meas, ns);
    }
    write_csv(meas, fs::path(g.out) / "measurements.csv");
    write_csv(torque.to_series(), fs::path(g.out) / "torque.csv");
    std::cout << "steps " << tr.stats.accepted << " accepted, " << tr.stats.rejected << " rejected\n";
    std::cout << "terminal omega " << tr.back().omega << " rad/s, Qp " << tr.back().Qp << " m3/s\n";
    return 0;
}

int cmd_filter(const Globals& g, const std::string& in, const std::string& out_file, int order, double fc,
               double fs_hz, int factor, const std::vector<std::string>& channels) {
    const TimeSeries ts = read_csv(fs::path(in));
    TimeSeries f = butterworth_lowpass(ts, design_butterworth(order, fc, fs_hz), true, channels);
    f = downsample(f, factor);
    const fs::path dst = out_file.empty() ? fs::path(g.out) / "filtered.csv" : fs::path(out_file);
    if (dst.has_parent_path()) fs::create_directories(dst.parent_path());
    write_csv(f, dst);
    std::cout << "wrote " << f.size() << " samples to " << dst.string() << "\n";
    return 0;
}

int cmd_identify(const Globals& g, const std::string& preset, int inv, int set_size, double threshold,
                 bool steady_initial, int n_points) {
    const EspParams p = load_preset(preset);
    SensitivityScenario sc;
    std::vector<double> grid;
    for (int i = 0; i < n_points; ++i) grid.push_back(kDataDt * i);
    sc.grid = grid;
    sc.torque = synthetic_torque(p, inv, grid.back());
    sc.x0 = steady_state(p, sc.torque(0.0), operating_point_at_speed(p, investigation_speeds(inv).first).state);
    sc.steady_initial = steady_initial;
    IntegrateOptions io;
    io.rtol = 1e-12;
    io.atol = 1e-14;
    const auto subset = identifiability_set(set_size);
    const SensitivityMatrix s = output_sensitivities(p, subset, sc, {4, 5}, g.workers, io);
    const Eigen::MatrixXd fim = fisher_information(s.S, relative_noise(s));
    const CorrelationReport rep = correlation_matrix(fim);
    const Partition part = identifiable_partition(rep.R, subset, threshold);

    auto mat = [](const Eigen::MatrixXd& m) {
        Json rows = Json::array();
        for (Eigen::Index i = 0; i < m.rows(); ++i) {
            Json row = Json::array();
            for (Eigen::Index j = 0; j < m.cols(); ++j) row.push_back(m(i, j));
            rows.push_back(row);
        }
        return rows;
    };
    Json j;
    j["format"] = "esp-vfm.identifiability/1";
    Json names = Json::array();
    for (Param q : subset) names.push_back(std::string(param_name(q)));
    j["parameters"] = names;
    j["fim"] = mat(fim);
    j["covariance"] = mat(rep.covariance);
    j["correlation"] = mat(rep.R);
    j["rank"] = rep.rank;
    j["full_rank"] = rep.full_rank;
    j["condition_number"] = rep.condition_number;
    j["one_sided_mismatch"] = s.one_sided_mismatch;
    Json flags = Json::array();
    for (const auto& fp : part.pairs)
        flags.push_back({{"a", std::string(param_name(subset[fp.i]))}, {"b", std::string(param_name(subset[fp.j]))}, {"r", fp.r}});
    j["flagged_pairs"] = flags;
    Json order = Json::array();
    for (int c : part.fix_order) order.push_back(std::string(param_name(subset[c])));
    j["suggested_fix_order"] = order;
    fs::create_directories(g.out);
    write_json_file(j, fs::path(g.out) / "identifiability.json");

    std::ofstream csv(fs::path(g.out) / "correlation_abs.csv");
    csv << "param";
    for (Param q : subset) csv << "," << param_name(q);
    csv << "\n";
    for (Eigen::Index i = 0; i < rep.R.rows(); ++i) {
        csv << param_name(subset[static_cast<std::size_t>(i)]);
        for (Eigen::Index k = 0; k < rep.R.cols(); ++k) csv << "," << std::abs(rep.R(i, k));
        csv << "\n";
    }
    std::cout << "rank " << rep.rank << "/" << subset.size() << ", condition " << rep.condition_number << "\n";
    for (const auto& fp : part.pairs)
        std::cout << "  " << param_name(subset[fp.i]) << " ~ " << param_name(subset[fp.j]) << "  r = " << fp.r << "\n";
    return 0;
}

int cmd_cell(const Globals& g, const CellFlags& f, Method m) {
    const MetricReport r = run_experiment(make_spec(f, g, m), g.out);
    print_report(r);
    return 0;
}

int cmd_evaluate(const std::vector<std::string>& cells) {
    for (const auto& c : cells) {
        const MetricReport r = evaluate_cell(c);
        write_json_file(report_to_json(r), fs::path(c) / "report_replay.json");
        print_report(r);
    }
    return 0;
}

int cmd_sweep(const Globals& g, const std::string& method, const std::vector<int>& invs,
              const std::vector<std::string>& scenarios, const std::vector<int>& cases, int realizations,
              double epoch_scale, const std::string& data1, const std::string& data2) {
    std::vector<Method> methods;
    if (method == "both") methods = {Method::Pinn, Method::Pf};
    else methods = {parse_method(method)};
    Json summary = Json::array();
    for (Method m : methods) {
        for (ExperimentSpec s : experiment_matrix(m)) {
            if (!invs.empty() && std::find(invs.begin(), invs.end(), s.investigation) == invs.end()) continue;
            if (!cases.empty() && std::find(cases.begin(), cases.end(), s.case_id) == cases.end()) continue;
            if (!scenarios.empty()) {
                bool keep = false;
                for (const auto& sc : scenarios) keep |= parse_scenario(sc) == s.scenario;
                if (!keep) continue;
            }
            s.realizations = realizations;
            s.master_seed = derive_seed(g.seed, static_cast<std::uint64_t>(s.investigation),
                                        static_cast<std::uint64_t>(s.scenario) * 10 + static_cast<std::uint64_t>(s.case_id),
                                        static_cast<std::uint64_t>(m));
            s.epoch_scale = epoch_scale;
            s.workers = g.workers;
            const std::string& d = s.investigation == 1 ? data1 : data2;
            if (!d.empty()) s.experimental_csv = d;
            MetricReport r;
            try {
                r = run_experiment(s, g.out);
            } catch (const std::exception& e) {
                r.cell = s.cell_name();
                r.status = "failed";
                r.reason = e.what();
            }
            print_report(r);
            summary.push_back({{"cell", r.cell}, {"status", r.status}, {"reason", r.reason}, {"master_seed", s.master_seed}});
        }
    }
    fs::create_directories(g.out);
    write_json_file(summary, fs::path(g.out) / "sweep_summary.json");
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"ESP virtual flow meter workbench"};
    app.require_subcommand(1);
    Globals g;
    app.add_option("--config", g.config, "Directory with parameter presets, schedules and transforms");
    app.add_option("--out", g.out, "Output directory");
    app.add_option("--seed", g.seed, "Master seed");
    app.add_option("--workers", g.workers, "Worker threads")->check(CLI::PositiveNumber);

    std::string preset = "inv1";
    int inv = 1;
    double t_end = 14.5, dt = 1e-4;
    std::string torque_csv;
    bool noisy = false;
    auto* sim = app.add_subcommand("simulate", "Integrate the model and write trajectories");
    sim->add_option("--preset", preset, "inv1 | inv2 | params JSON path");
    sim->add_option("--investigation,-i", inv, "Speed step of investigation 1 or 2")->check(CLI::IsMember({1, 2}));
    sim->add_option("--t-end", t_end, "End time (s)");
    sim->add_option("--dt", dt, "Resampling step of trajectory.csv (s)");
    sim->add_option("--torque-csv", torque_csv, "CSV with t_s,torque_Nm");
    sim->add_flag("--noisy", noisy, "Add pressure-transmitter noise to measurements.csv");

    std::string in, out_file;
    int order = 8, factor = 1;
    double fc = 10, fs_hz = 250;
    std::vector<std::string> channels;
    auto* flt = app.add_subcommand("filter", "Butterworth low-pass and downsample a CSV");
    flt->add_option("--in", in, "Input CSV")->required();
    flt->add_option("--out-file", out_file, "Output CSV (default <out>/filtered.csv)");
    flt->add_option("--order", order, "Filter order");
    flt->add_option("--cutoff-hz", fc, "Cutoff frequency");
    flt->add_option("--fs-hz", fs_hz, "Sample rate");
    flt->add_option("--factor", factor, "Downsampling factor");
    flt->add_option("--channels", channels, "Channels to filter (default all)");

    int set_size = 12, n_points = 30;
    double threshold = 0.95;
    bool steady_initial = false;
    auto* idf = app.add_subcommand("identify", "Sensitivity-based correlation analysis");
    idf->add_option("--preset", preset, "inv1 | inv2 | params JSON path");
    idf->add_option("--investigation,-i", inv, "Speed step of investigation 1 or 2")->check(CLI::IsMember({1, 2}));
    idf->add_option("--set", set_size, "Parameter set size")->check(CLI::IsMember({8, 12, 15}));
    idf->add_option("--threshold", threshold, "Flag |r| at or above this value");
    idf->add_option("--points", n_points, "Observation points at 0.5 s");
    idf->add_flag("--steady-initial", steady_initial, "Re-solve the initial steady state per perturbation");

    CellFlags pinn_f, pf_f;
    auto* tp = app.add_subcommand("train-pinn", "Train the PINN estimator on one experiment cell");
    add_cell_flags(tp, pinn_f, false);
    auto* rp = app.add_subcommand("run-pf", "Run the particle filter on one experiment cell");
    add_cell_flags(rp, pf_f, true);

    std::vector<std::string> cells;
    auto* ev = app.add_subcommand("evaluate", "Recompute reports from persisted artifacts");
    ev->add_option("cells", cells, "Cell directories")->required();

    std::string method = "pinn", data1, data2;
    std::vector<int> sw_inv, sw_case;
    std::vector<std::string> sw_sc;
    int sw_n = 30;
    double sw_scale = 1.0;
    auto* sw = app.add_subcommand("sweep", "Run the investigation x scenario x case matrix");
    sw->add_option("--method", method, "pinn | pf | both");
    sw->add_option("--investigation,-i", sw_inv, "Restrict investigations");
    sw->add_option("--scenario", sw_sc, "Restrict scenarios");
    sw->add_option("--case,-c", sw_case, "Restrict cases");
    sw->add_option("--realizations,-n", sw_n, "Runs per cell");
    sw->add_option("--epoch-scale", sw_scale, "Multiply every schedule epoch boundary");
    sw->add_option("--data-inv1", data1, "Experimental CSV for investigation 1");
    sw->add_option("--data-inv2", data2, "Experimental CSV for investigation 2");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? 0 : 2;
    }

    try {
        if (!g.config.empty()) {
            if (!fs::is_directory(g.config)) throw ValidationError("--config is not a directory: " + g.config);
            setenv("ESPVFM_CONFIG_DIR", g.config.c_str(), 1);
        }
        if (*sim) return cmd_simulate(g, preset, inv, t_end, dt, torque_csv, noisy);
        if (*flt) return cmd_filter(g, in, out_file, order, fc, fs_hz, factor, channels);
        if (*idf) return cmd_identify(g, preset, inv, set_size, threshold, steady_initial, n_points);
        if (*tp) return cmd_cell(g, pinn_f, Method::Pinn);
        if (*rp) return cmd_cell(g, pf_f, Method::Pf);
        if (*ev) return cmd_evaluate(cells);
        if (*sw) return cmd_sweep(g, method, sw_inv, sw_sc, sw_case, sw_n, sw_scale, data1, data2);
    } catch (const ValidationError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const NumericalError& e) {
        std::cerr << "numerical failure: " << e.what() << "\n";
        return 3;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 3;
    }
    return 0;
}
