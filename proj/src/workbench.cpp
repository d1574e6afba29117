#include "espvfm/workbench.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <mutex>
#include <set>
#include <sstream>
#include <thread>

#include "espvfm/dsp.hpp"

namespace espvfm {

namespace fs = std::filesystem;

std::map<std::string, StateMape> mape_states(const TimeSeries& truth, const TimeSeries& predicted) {
    if (truth.size() != predicted.size())
        throw ValidationError("mape_states: series lengths differ (" + std::to_string(truth.size()) + " vs " +
                              std::to_string(predicted.size()) + ")");
    for (std::size_t i = 0; i < truth.size(); ++i)
        if (std::abs(truth.t[i] - predicted.t[i]) > 1e-9 * std::max(1.0, std::abs(truth.t[i])))
            throw ValidationError("mape_states: time grids differ at sample " + std::to_string(i));
    std::map<std::string, StateMape> out;
    for (const auto& name : truth.names) {
        if (!predicted.has(name)) continue;
        const auto& y = truth[name];
        const auto& yh = predicted[name];
        StateMape m;
        double acc = 0;
        for (std::size_t i = 0; i < y.size(); ++i) {
            if (y[i] == 0.0) {
                ++m.excluded;
                continue;
            }
            acc += std::abs((y[i] - yh[i]) / y[i]);
            ++m.used;
        }
        m.mape = m.used > 0 ? 100.0 * acc / m.used : 0.0;
        out[name] = m;
    }
    return out;
}

ParamMape mape_params(double truth, const std::vector<double>& estimates) {
    if (truth == 0.0) throw ValidationError("mape_params: true value is zero");
    if (estimates.empty()) throw ValidationError("mape_params: no estimates");
    std::vector<double> e;
    for (double v : estimates) e.push_back(std::abs(1.0 - v / truth));
    double mean = 0;
    for (double v : e) mean += v;
    mean /= static_cast<double>(e.size());
    double var = 0;
    for (double v : e) var += (v - mean) * (v - mean);
    var /= static_cast<double>(e.size());
    return {100.0 * mean, 100.0 * std::sqrt(var)};
}

Method parse_method(std::string_view s) {
    if (s == "pinn") return Method::Pinn;
    if (s == "pf") return Method::Pf;
    throw ValidationError("unknown method '" + std::string(s) + "'; expected pinn or pf");
}

std::string_view method_name(Method m) { return m == Method::Pinn ? "pinn" : "pf"; }

void ExperimentSpec::check() const {
    if (investigation != 1 && investigation != 2) throw ValidationError("investigation must be 1 or 2");
    case_unknowns(case_id);
    if (realizations < 1) throw ValidationError("realizations must be positive");
    if (!(epoch_scale > 0)) throw ValidationError("epoch scale must be positive");
    if (workers < 1) throw ValidationError("workers must be positive");
    if (schedule) schedule->check();
    pf.check();
}

std::string ExperimentSpec::cell_name() const {
    return "inv" + std::to_string(investigation) + "_" + std::string(scenario_name(scenario)) + "_case" +
           std::to_string(case_id) + "_" + std::string(method_name(method));
}

std::vector<ExperimentSpec> experiment_matrix(Method method) {
    std::vector<ExperimentSpec> out;
    for (int inv : {1, 2})
        for (Scenario sc : {Scenario::Simulated, Scenario::Noisy, Scenario::Experimental})
            for (int c : {1, 2, 3}) {
                ExperimentSpec s;
                s.investigation = inv;
                s.scenario = sc;
                s.case_id = c;
                s.method = method;
                out.push_back(s);
            }
    return out;
}

int grid_points(int investigation, Scenario scenario) {
    switch (scenario) {
    case Scenario::Simulated: return 30;
    case Scenario::Noisy: return 37;
    case Scenario::Experimental: return investigation == 1 ? 48 : 55;
    }
    return 30;
}

std::pair<double, double> investigation_speeds(int investigation) {
    if (investigation == 1) return {272.27, 314.16};
    if (investigation == 2) return {251.32, 314.16};
    throw ValidationError("investigation must be 1 or 2");
}

TorqueSignal synthetic_torque(const EspParams& p, int investigation, double t_end) {
    const auto [wi, wf] = investigation_speeds(investigation);
    const double gi = operating_point_at_speed(p, wi).torque;
    const double gf = operating_point_at_speed(p, wf).torque;
    TimeSeries ts;
    std::vector<double> g;
    const int n = static_cast<int>(std::ceil((t_end + 1.0) * kTorqueRateHz));
    for (int i = 0; i <= n; ++i) {
        ts.t.push_back(i / kTorqueRateHz);
        g.push_back(ts.t.back() < kStepTime ? gi : gf);
    }
    ts.add("torque_Nm", std::move(g));
    return TorqueSignal::from_series(butterworth_lowpass(ts, design_butterworth(8, 2.0, kTorqueRateHz), true));
}

namespace {

TimeSeries states_to_series(const std::vector<double>& grid, const std::vector<State6>& xs) {
    TimeSeries ts;
    ts.t = grid;
    for (int j = 0; j < 6; ++j) {
        std::vector<double> c;
        for (const auto& x : xs) c.push_back(x[j]);
        ts.add(std::string(kStateChannels[j]), std::move(c));
    }
    return ts;
}

TimeSeries matrix_to_series(const std::vector<double>& t, const Eigen::MatrixXd& m) {
    TimeSeries ts;
    ts.t = t;
    for (int j = 0; j < 6; ++j) {
        std::vector<double> c(t.size());
        for (std::size_t i = 0; i < t.size(); ++i) c[i] = m(static_cast<Eigen::Index>(i), j);
        ts.add(std::string(kStateChannels[j]), std::move(c));
    }
    return ts;
}

}  // namespace

ScenarioData build_synthetic_scenario(int investigation, Scenario scenario, const EspParams& truth,
                                      std::uint64_t noise_seed) {
    if (scenario == Scenario::Experimental)
        throw ValidationError("build_synthetic_scenario: experimental data must be ingested");
    validate(truth);
    ScenarioData sc;
    sc.investigation = investigation;
    sc.scenario = scenario;
    sc.truth = truth;
    const int n = grid_points(investigation, scenario);
    std::vector<double> grid;
    for (int i = 0; i < n; ++i) grid.push_back(kDataDt * i);
    sc.torque = synthetic_torque(truth, investigation, grid.back());
    const auto [wi, wf] = investigation_speeds(investigation);
    (void)wf;
    const auto op = operating_point_at_speed(truth, wi);
    sc.x0 = steady_state(truth, sc.torque(0.0), op.state);
    sc.truth_states = states_to_series(grid, integrate_on_grid(truth, sc.x0, sc.torque, grid));
    sc.measurements = sc.truth_states.select({"P1_Pa", "P2_Pa"});
    if (scenario == Scenario::Noisy) {
        NoiseSpec ns;
        ns.sigma = {{"P1_Pa", kPressureSigmaPa}, {"P2_Pa", kPressureSigmaPa}};
        ns.seed = noise_seed;
        sc.measurements = add_gaussian_noise(sc.measurements, ns);
    }
    return sc;
}

void check_experimental_schema(const TimeSeries& ts) {
    static const std::vector<std::string> required{"P1_Pa", "P2_Pa", "Q1_m3s", "omega_rads", "torque_Nm"};
    static const std::set<std::string> optional{"Qp_m3s", "Q2_m3s"};
    std::vector<std::string> missing, extra;
    for (const auto& r : required)
        if (!ts.has(r)) missing.push_back(r);
    for (const auto& n : ts.names)
        if (std::find(required.begin(), required.end(), n) == required.end() && !optional.count(n))
            extra.push_back(n);
    if (!missing.empty() || !extra.empty()) {
        std::string msg = "experimental CSV schema mismatch;";
        if (!missing.empty()) {
            msg += " missing:";
            for (const auto& m : missing) msg += " " + m;
        }
        if (!extra.empty()) {
            msg += (missing.empty() ? " extra:" : "; extra:");
            for (const auto& e : extra) msg += " " + e;
        }
        throw ValidationError(msg);
    }
}

TimeSeries ingest_experimental_csv(const fs::path& path) {
    if (!fs::exists(path)) throw ValidationError("experimental CSV not found: " + path.string());
    TimeSeries ts = read_csv(path);
    check_experimental_schema(ts);
    ts.validate();
    if (!ts.has("Qp_m3s") || !ts.has("Q2_m3s")) ts.flags.insert("partial-observability");
    return ts;
}

ScenarioData build_experimental_scenario(int investigation, const EspParams& truth, const TimeSeries& raw) {
    check_experimental_schema(raw);
    raw.validate();
    if (raw.size() < 2) throw ValidationError("experimental series needs at least two samples");
    const double dt = raw.t[1] - raw.t[0];
    if (!is_uniform(raw.t, dt, 1e-9)) throw ValidationError("experimental series is not uniformly sampled");
    const int factor = static_cast<int>(std::lround(kDataDt / dt));
    if (factor < 1 || std::abs(factor * dt - kDataDt) > 1e-9)
        throw ValidationError("experimental sampling interval does not divide " + std::to_string(kDataDt) + " s");

    TimeSeries conditioned = raw;
    TorqueSignal torque;
    if (std::abs(dt * kTorqueRateHz - 1.0) < 1e-9) {
        conditioned = butterworth_lowpass(raw, design_butterworth(8, 10.0, kTorqueRateHz), true);
        const TimeSeries tq =
            butterworth_lowpass(conditioned.select({"torque_Nm"}), design_butterworth(8, 2.0, kTorqueRateHz), true);
        torque = TorqueSignal::from_series(tq);
    } else {
        torque = TorqueSignal::from_series(raw.select({"torque_Nm"}));
    }
    TimeSeries grid = downsample(conditioned, factor);
    const auto n = static_cast<std::size_t>(grid_points(investigation, Scenario::Experimental));
    if (grid.size() > n) {
        grid.t.resize(n);
        for (auto& c : grid.data) c.resize(n);
    }
    const double t0 = grid.t.front();
    for (auto& t : grid.t) t -= t0;
    std::vector<double> tt = torque.times();
    for (auto& t : tt) t -= t0;
    torque = TorqueSignal(tt, torque.values());

    ScenarioData sc;
    sc.investigation = investigation;
    sc.scenario = Scenario::Experimental;
    sc.truth = truth;
    sc.torque = torque;
    const auto [wi, wf] = investigation_speeds(investigation);
    (void)wf;
    sc.x0 = steady_state(truth, torque(0.0), operating_point_at_speed(truth, wi).state);
    sc.x0.P1 = grid["P1_Pa"][0];
    sc.x0.P2 = grid["P2_Pa"][0];
    sc.x0.Q1 = grid["Q1_m3s"][0];
    sc.x0.omega = grid["omega_rads"][0];
    std::vector<std::string> known;
    for (const auto& ch : kStateChannels)
        if (grid.has(ch)) known.emplace_back(ch);
    sc.truth_states = grid.select(known);
    sc.truth_states.flags = raw.flags;
    sc.measurements = grid.select({"P1_Pa", "P2_Pa"});
    return sc;
}

std::uint64_t noise_seed(std::uint64_t master, int realization) {
    return derive_seed(master, 1, static_cast<std::uint64_t>(realization));
}

std::uint64_t init_seed(std::uint64_t master, int realization) {
    return derive_seed(master, 2, static_cast<std::uint64_t>(realization));
}

PinnProblem pinn_problem(const ScenarioData& sc, int case_id) {
    PinnProblem prob;
    prob.case_id = case_id;
    prob.known = sc.truth;
    prob.unknowns = case_unknowns(case_id);
    prob.transforms = case_transforms(case_id, sc.truth);
    prob.t_data = sc.measurements.t;
    prob.p1_data = sc.measurements["P1_Pa"];
    prob.p2_data = sc.measurements["P2_Pa"];
    prob.ic = sc.x0;
    prob.torque = sc.torque;
    prob.bounds = estimate_state_bounds(sc.measurements, sc.torque, bounds_guess_params(sc.truth)).bounds;
    prob.check();
    return prob;
}

namespace {

Json estimates_json(const std::vector<Param>& unknowns, const RealizationResult& r) {
    Json j;
    j["realization"] = r.index;
    j["seed"] = r.seed;
    j["status"] = r.status;
    if (!r.message.empty()) j["message"] = r.message;
    Json e = Json::object();
    for (std::size_t k = 0; k < r.estimates.size() && k < unknowns.size(); ++k)
        e[std::string(param_name(unknowns[k]))] = r.estimates[k];
    j["estimates"] = e;
    return j;
}

std::string realization_dir(int r) {
    std::ostringstream s;
    s << "realization_" << std::setw(3) << std::setfill('0') << r;
    return s.str();
}

}  // namespace

RealizationResult run_pinn_realization(const ScenarioData& sc, const ExperimentSpec& spec, int realization,
                                       const fs::path& dir) {
    RealizationResult res;
    res.index = realization;
    res.seed = init_seed(spec.master_seed, realization);
    const PinnProblem prob = pinn_problem(sc, spec.case_id);
    TrainingSchedule sched = spec.schedule ? *spec.schedule : default_schedule(spec.case_id, spec.scenario);
    if (spec.epoch_scale != 1.0) sched = sched.scaled(spec.epoch_scale);
    fs::create_directories(dir);
    std::ofstream log(dir / "loss_log.csv");
    log << "epoch,total,physics,data,ic";
    for (Param p : prob.unknowns) log << "," << param_name(p);
    log << "\n";
    TrainOptions opts;
    opts.log_every = std::max<long>(1, sched.total_epochs() / 200);
    opts.on_log = [&](const EpochRecord& r) {
        log << r.epoch << "," << r.loss.total << "," << r.loss.physics << "," << r.loss.data << "," << r.loss.ic;
        for (double v : r.params) log << "," << v;
        log << "\n";
    };
    log << std::setprecision(10);
    try {
        const TrainResult tr = train(prob, sched, res.seed, opts);
        res.estimates = tr.estimates;
        res.states = matrix_to_series(sc.measurements.t, predict_states(prob, tr.trained.net, sc.measurements.t));
        save_mlp(tr.trained.net, dir / "mlp.json");
    } catch (const TrainingDiverged& e) {
        res.status = "failed";
        res.message = e.what();
    }
    return res;
}

RealizationResult run_pf_realization(const ScenarioData& sc, const ExperimentSpec& spec, int realization,
                                     const fs::path& dir) {
    RealizationResult res;
    res.index = realization;
    res.seed = init_seed(spec.master_seed, realization);
    PfProblem prob;
    prob.known = sc.truth;
    prob.unknowns = case_unknowns(spec.case_id);
    prob.x0 = sc.x0;
    prob.torque = sc.torque;
    prob.measurements = sc.measurements;
    PfConfig cfg = spec.pf;
    if (spec.scenario == Scenario::Experimental)
        for (double& s : cfg.sigma) s *= 10.0;
    fs::create_directories(dir);
    try {
        const PfResult pr = pf_run(cfg, prob, res.seed);
        res.estimates = pr.estimates;
        res.states = pr.state_series();
        TimeSeries ess;
        ess.t = pr.t;
        ess.add("ess", pr.ess);
        ess.add("resampled", std::vector<double>(pr.resampled.begin(), pr.resampled.end()));
        ess.add("failures", std::vector<double>(pr.failures.begin(), pr.failures.end()));
        write_csv(ess, dir / "ess.csv");
        TimeSeries trace;
        trace.t = pr.t;
        for (Eigen::Index k = 0; k < pr.param_mean.cols(); ++k) {
            std::vector<double> c(pr.t.size());
            for (std::size_t i = 0; i < c.size(); ++i) c[i] = pr.param_mean(static_cast<Eigen::Index>(i), k);
            trace.add(std::string(param_name(prob.unknowns[static_cast<std::size_t>(k)])), std::move(c));
        }
        write_csv(trace, dir / "param_trace.csv");
    } catch (const NumericalError& e) {
        res.status = "failed";
        res.message = e.what();
    }
    return res;
}

TimeSeries mean_prediction(const std::vector<RealizationResult>& runs) {
    TimeSeries mean;
    int n = 0;
    for (const auto& r : runs) {
        if (r.status != "ok") continue;
        if (n == 0) {
            mean = r.states;
        } else {
            for (std::size_t c = 0; c < mean.data.size(); ++c)
                for (std::size_t i = 0; i < mean.t.size(); ++i) mean.data[c][i] += r.states.data[c][i];
        }
        ++n;
    }
    if (n > 1)
        for (auto& c : mean.data)
            for (auto& v : c) v /= n;
    return mean;
}

void aggregate(MetricReport& rep, const TimeSeries& truth_states) {
    std::vector<std::vector<double>> est(rep.unknowns.size());
    for (const auto& r : rep.realizations) {
        if (r.status != "ok") continue;
        for (std::size_t k = 0; k < est.size(); ++k) est[k].push_back(r.estimates[k]);
    }
    rep.params.clear();
    rep.states.clear();
    if (est.empty() || est[0].empty()) {
        rep.status = "failed";
        if (rep.reason.empty()) rep.reason = "no successful realization";
        return;
    }
    for (std::size_t k = 0; k < est.size(); ++k) rep.params.push_back(mape_params(rep.truth[k], est[k]));
    rep.states = mape_states(truth_states, mean_prediction(rep.realizations));
}

Json report_to_json(const MetricReport& r) {
    Json j;
    j["format"] = "esp-vfm.report/1";
    j["cell"] = r.cell;
    j["status"] = r.status;
    if (!r.reason.empty()) j["reason"] = r.reason;
    Json st = Json::object();
    for (const auto& [name, m] : r.states)
        st[name] = {{"mape_percent", m.mape}, {"used", m.used}, {"excluded_zero_truth", m.excluded}};
    j["state_mape"] = st;
    Json pm = Json::object();
    for (std::size_t k = 0; k < r.params.size(); ++k) {
        std::vector<double> e;
        for (const auto& run : r.realizations)
            if (run.status == "ok") e.push_back(run.estimates[k]);
        pm[std::string(param_name(r.unknowns[k]))] = {{"truth", r.truth[k]},
                                                      {"mape_percent", r.params[k].mape},
                                                      {"std_percent", r.params[k].std},
                                                      {"estimates", e}};
    }
    j["parameters"] = pm;
    Json runs = Json::array();
    for (const auto& run : r.realizations) {
        Json x = {{"realization", run.index}, {"seed", run.seed}, {"status", run.status}};
        if (!run.message.empty()) x["message"] = run.message;
        runs.push_back(x);
    }
    j["realizations"] = runs;
    return j;
}

namespace {

void write_plot_data(const fs::path& path, const TimeSeries& truth, const TimeSeries& mean) {
    TimeSeries plot;
    plot.t = truth.t;
    for (const auto& name : truth.names) {
        plot.add(name + "_truth", truth[name]);
        if (mean.has(name)) plot.add(name + "_mean", mean[name]);
    }
    write_csv(plot, path);
}

Json spec_json(const ExperimentSpec& spec, const MetricReport& rep) {
    Json j;
    j["cell"] = rep.cell;
    j["investigation"] = spec.investigation;
    j["scenario"] = std::string(scenario_name(spec.scenario));
    j["case"] = spec.case_id;
    j["method"] = std::string(method_name(spec.method));
    j["realizations"] = spec.realizations;
    j["master_seed"] = spec.master_seed;
    j["seed_rule"] = "noise = splitmix-chain(master, 1, r); init = splitmix-chain(master, 2, r)";
    j["epoch_scale"] = spec.epoch_scale;
    Json u = Json::object();
    for (std::size_t k = 0; k < rep.unknowns.size(); ++k) u[std::string(param_name(rep.unknowns[k]))] = rep.truth[k];
    j["truth"] = u;
    if (spec.method == Method::Pf) {
        j["pf"] = {{"n_particles", spec.pf.n_particles},
                   {"ess_threshold", spec.pf.ess_threshold},
                   {"jitter_std", spec.pf.jitter_std},
                   {"jitter_kind", "relative (multiplicative N(1, std))"},
                   {"init_span", spec.pf.init_span},
                   {"sigma_pa", spec.pf.sigma}};
    } else {
        TrainingSchedule s = spec.schedule ? *spec.schedule : default_schedule(spec.case_id, spec.scenario);
        if (spec.epoch_scale != 1.0) s = s.scaled(spec.epoch_scale);
        j["schedule"] = schedule_to_json(s);
        j["raw_parameter_init"] = 0.0;
    }
    return j;
}

}  // namespace

MetricReport run_experiment(const ExperimentSpec& spec, const fs::path& out) {
    spec.check();
    MetricReport rep;
    rep.cell = spec.cell_name();
    rep.unknowns = case_unknowns(spec.case_id);
    const EspParams truth = load_preset("inv" + std::to_string(spec.investigation));
    for (Param p : rep.unknowns) rep.truth.push_back(truth[p]);
    const fs::path cell = out / rep.cell;
    fs::create_directories(cell);

    std::optional<ScenarioData> shared;
    if (spec.scenario == Scenario::Experimental) {
        if (!spec.experimental_csv || !fs::exists(*spec.experimental_csv)) {
            rep.status = "skipped";
            rep.reason = spec.experimental_csv ? "experimental CSV not found: " + spec.experimental_csv->string()
                                               : "no experimental CSV supplied";
            write_json_file(report_to_json(rep), cell / "report.json");
            return rep;
        }
        shared = build_experimental_scenario(spec.investigation, truth, ingest_experimental_csv(*spec.experimental_csv));
    } else {
        shared = build_synthetic_scenario(spec.investigation, spec.scenario, truth, 0);
    }
    write_csv(shared->truth_states, cell / "truth_states.csv");
    write_json_file(spec_json(spec, rep), cell / "spec.json");

    rep.realizations.resize(static_cast<std::size_t>(spec.realizations));
    std::atomic<int> next{0};
    std::mutex mu;
    auto work = [&] {
        for (;;) {
            const int r = next.fetch_add(1);
            if (r >= spec.realizations) return;
            const fs::path dir = cell / realization_dir(r);
            fs::create_directories(dir);
            RealizationResult res;
            try {
                ScenarioData sc = *shared;
                if (spec.scenario == Scenario::Noisy)
                    sc = build_synthetic_scenario(spec.investigation, spec.scenario, truth,
                                                  noise_seed(spec.master_seed, r));
                write_csv(sc.measurements, dir / "measurements.csv");
                res = spec.method == Method::Pinn ? run_pinn_realization(sc, spec, r, dir)
                                                  : run_pf_realization(sc, spec, r, dir);
            } catch (const std::exception& e) {
                res.index = r;
                res.seed = init_seed(spec.master_seed, r);
                res.status = "failed";
                res.message = e.what();
            }
            if (res.status == "ok") write_csv(res.states, dir / "states.csv");
            write_json_file(estimates_json(rep.unknowns, res), dir / "estimates.json");
            std::lock_guard lock(mu);
            rep.realizations[static_cast<std::size_t>(r)] = std::move(res);
        }
    };
    const int nw = std::clamp(spec.workers, 1, spec.realizations);
    if (nw == 1) {
        work();
    } else {
        std::vector<std::jthread> pool;
        for (int w = 0; w < nw; ++w) pool.emplace_back(work);
    }
    aggregate(rep, shared->truth_states);
    if (rep.status == "ok") write_plot_data(cell / "plot_states.csv", shared->truth_states, mean_prediction(rep.realizations));
    write_json_file(report_to_json(rep), cell / "report.json");
    return rep;
}

MetricReport evaluate_cell(const fs::path& cell_dir) {
    const fs::path spec_path = cell_dir / "spec.json";
    if (!fs::exists(spec_path)) {
        const fs::path rp = cell_dir / "report.json";
        if (fs::exists(rp)) {
            const Json j = read_json_file(rp);
            MetricReport rep;
            rep.cell = j.value("cell", cell_dir.filename().string());
            rep.status = j.value("status", "skipped");
            rep.reason = j.value("reason", "");
            return rep;
        }
        throw ValidationError("not a cell directory (no spec.json): " + cell_dir.string());
    }
    const Json spec = read_json_file(spec_path);
    MetricReport rep;
    rep.cell = spec.at("cell").get<std::string>();
    for (const auto& [name, v] : spec.at("truth").items()) {
        rep.unknowns.push_back(parse_param(name));
        rep.truth.push_back(v.get<double>());
    }
    const TimeSeries truth = read_csv(cell_dir / "truth_states.csv");
    std::vector<fs::path> dirs;
    for (const auto& e : fs::directory_iterator(cell_dir))
        if (e.is_directory() && e.path().filename().string().rfind("realization_", 0) == 0) dirs.push_back(e.path());
    std::sort(dirs.begin(), dirs.end());
    for (const auto& d : dirs) {
        const Json j = read_json_file(d / "estimates.json");
        RealizationResult r;
        r.index = j.at("realization").get<int>();
        r.seed = j.at("seed").get<std::uint64_t>();
        r.status = j.at("status").get<std::string>();
        r.message = j.value("message", "");
        if (r.status == "ok") {
            for (Param p : rep.unknowns) r.estimates.push_back(j.at("estimates").at(std::string(param_name(p))).get<double>());
            r.states = read_csv(d / "states.csv");
        }
        rep.realizations.push_back(std::move(r));
    }
    aggregate(rep, truth);
    return rep;
}

}  // namespace espvfm
