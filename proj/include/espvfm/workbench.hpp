#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "espvfm/model.hpp"
#include "espvfm/params_io.hpp"
#include "espvfm/particle_filter.hpp"
#include "espvfm/pinn.hpp"
#include "espvfm/sim.hpp"
#include "espvfm/timeseries.hpp"

namespace espvfm {

struct StateMape {
    double mape = 0;   // percent
    int excluded = 0;  // samples with zero truth
    int used = 0;
};

/// Percent MAPE per channel present in both series; the time grids must match.
std::map<std::string, StateMape> mape_states(const TimeSeries& truth, const TimeSeries& predicted);

struct ParamMape {
    double mape = 0;  // percent
    double std = 0;   // percent, population
};

ParamMape mape_params(double truth, const std::vector<double>& estimates);

enum class Method { Pinn, Pf };
Method parse_method(std::string_view s);
std::string_view method_name(Method m);

struct ExperimentSpec {
    int investigation = 1;
    Scenario scenario = Scenario::Simulated;
    int case_id = 1;
    Method method = Method::Pinn;
    int realizations = 30;
    std::uint64_t master_seed = 0;
    /// Multiplies every epoch boundary of the training schedule.
    double epoch_scale = 1.0;
    std::optional<std::filesystem::path> experimental_csv;
    std::optional<TrainingSchedule> schedule;
    PfConfig pf;
    int workers = 1;

    void check() const;
    std::string cell_name() const;
};

/// The 2 x 3 x 3 investigation/scenario/case matrix for one method.
std::vector<ExperimentSpec> experiment_matrix(Method method);

int grid_points(int investigation, Scenario scenario);
inline constexpr double kDataDt = 0.5;
inline constexpr double kStepTime = 5.0;
inline constexpr double kTorqueRateHz = 250.0;

/// Initial and final shaft speeds of an investigation (rad/s).
std::pair<double, double> investigation_speeds(int investigation);

struct ScenarioData {
    int investigation = 1;
    Scenario scenario = Scenario::Simulated;
    EspParams truth;
    TorqueSignal torque;
    StateVector x0;
    TimeSeries truth_states;  // states known on the data grid
    TimeSeries measurements;  // P1_Pa, P2_Pa on the data grid
};

/// Step torque between the two steady operating points at kStepTime, sampled
/// at 250 Hz and smoothed by an order-8 2 Hz Butterworth.
TorqueSignal synthetic_torque(const EspParams& p, int investigation, double t_end);

/// Simulated or noisy scenario; noise_seed is ignored for simulated data.
ScenarioData build_synthetic_scenario(int investigation, Scenario scenario, const EspParams& truth,
                                      std::uint64_t noise_seed);

/// Schema check of an experimental acquisition. Required: t_s, P1_Pa,
/// P2_Pa, Q1_m3s, omega_rads, torque_Nm. Optional: Qp_m3s, Q2_m3s.
TimeSeries ingest_experimental_csv(const std::filesystem::path& path);
void check_experimental_schema(const TimeSeries& ts);

/// 250 Hz series: order-8 10 Hz anti-aliasing filter, 2 Hz torque filter,
/// then downsampling to the 0.5 s grid. Coarser uniform series are only
/// downsampled.
ScenarioData build_experimental_scenario(int investigation, const EspParams& truth,
                                         const TimeSeries& raw);

struct RealizationResult {
    int index = 0;
    std::uint64_t seed = 0;
    std::vector<double> estimates;
    TimeSeries states;  // predicted states on the data grid
    std::string status = "ok";
    std::string message;
};

struct MetricReport {
    std::string cell;
    std::string status = "ok";  // ok | skipped | failed
    std::string reason;
    std::map<std::string, StateMape> states;
    std::vector<Param> unknowns;
    std::vector<double> truth;
    std::vector<ParamMape> params;
    std::vector<RealizationResult> realizations;
};

Json report_to_json(const MetricReport& r);

/// Cross-realization mean of the predicted states (failed runs excluded).
TimeSeries mean_prediction(const std::vector<RealizationResult>& runs);

/// Fills states and params of a report from its successful realizations.
void aggregate(MetricReport& rep, const TimeSeries& truth_states);

/// Seeds: noise = derive_seed(master, 1, r), init = derive_seed(master, 2, r).
std::uint64_t noise_seed(std::uint64_t master, int realization);
std::uint64_t init_seed(std::uint64_t master, int realization);

PinnProblem pinn_problem(const ScenarioData& sc, int case_id);

RealizationResult run_pinn_realization(const ScenarioData& sc, const ExperimentSpec& spec,
                                       int realization, const std::filesystem::path& dir);
RealizationResult run_pf_realization(const ScenarioData& sc, const ExperimentSpec& spec,
                                     int realization, const std::filesystem::path& dir);

/// Runs all realizations of one cell and writes artifacts under
/// out/<cell>/. Never throws for a missing experimental file: the report
/// carries status "skipped" instead.
MetricReport run_experiment(const ExperimentSpec& spec, const std::filesystem::path& out);

/// Recomputes a report from the artifacts of a finished cell directory.
MetricReport evaluate_cell(const std::filesystem::path& cell_dir);

}  // namespace espvfm
