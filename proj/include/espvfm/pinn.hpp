#pragma once

#include <array>
#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "espvfm/ad.hpp"
#include "espvfm/model.hpp"
#include "espvfm/nn.hpp"
#include "espvfm/params_io.hpp"
#include "espvfm/sim.hpp"
#include "espvfm/timeseries.hpp"

namespace espvfm {

enum class Scenario { Simulated, Noisy, Experimental };
Scenario parse_scenario(std::string_view s);
std::string_view scenario_name(Scenario s);

/// Unknown parameters of each case: 1 -> B, mu, rho; 2 adds ku, kd, k3p, k4p;
/// 3 -> B, mu, rho, ku, kd, k4p, k1s, k5s.
std::vector<Param> case_unknowns(int case_id);

/// Engineering units used inside the loss: m^3/h, rad/s, MWC.
StateVector::Array si_to_engineering(const StateVector::Array& x);
StateVector::Array engineering_to_si(const StateVector::Array& x);
inline const StateVector::Array kEngPerSi{kSecondsPerHour, 1.0, kSecondsPerHour, kSecondsPerHour,
                                          1.0 / kPaPerMwc, 1.0 / kPaPerMwc};

/// Physical (SI) range of every state used by the output map.
struct ScalingBounds {
    StateVector::Array min = StateVector::Array::Zero();
    StateVector::Array max = StateVector::Array::Ones();
    void check() const;
};

/// (raw + 1)(max - min)/2 + min per state.
StateVector output_scale(const StateVector::Array& raw, const ScalingBounds& b);

/// Pump and shaft steady balance at one instant, unknowns (omega, Qp):
///   k1p rho w Q + k2p rho w^2 + k4p rho Q^2 - dP = 0
///   k1s rho Q^2 - k2s rho w Q + gamma = 0
struct BoundsRoot {
    double omega = 0;
    double Qp = 0;
    double residual = 0;
};
BoundsRoot solve_bounds_system(const EspParams& p, double dP, double gamma);

/// Parameters used for bounds estimation: pump/shaft coefficients +15% and
/// rho = 931.51.
EspParams bounds_guess_params(const EspParams& truth);

struct BoundsEstimate {
    ScalingBounds bounds;
    double t1 = 0, t2 = 0;
    BoundsRoot at_t1, at_t2;
};

/// P1/P2 are read from channels P1_Pa and P2_Pa.
BoundsEstimate estimate_state_bounds(const TimeSeries& pressures, const TorqueSignal& torque,
                                     const EspParams& guess);

enum class TransformKind { SoftplusShift, Linear, Softminus, Bounded };

struct ParameterTransform {
    TransformKind kind = TransformKind::Linear;
    double scale = 1;   // Lambda
    double anchor = 1;  // Lambda_true for the bounded scheme
    double alpha = 0.5;
    void check() const;
};

double transform_parameter(double raw, const ParameterTransform& xf);
ad::Var transform_parameter(ad::Tape& tape, ad::Var raw, const ParameterTransform& xf);
/// Open interval reachable by the transform.
std::pair<double, double> transform_range(const ParameterTransform& xf);

/// Transforms of a case from configs/transforms.json; bounded anchors come
/// from `truth`.
std::vector<ParameterTransform> case_transforms(int case_id, const EspParams& truth);
std::vector<ParameterTransform> case_transforms(int case_id, const EspParams& truth,
                                                const Json& config);

struct LrRamp {
    std::string group;  // nn | ps | sa
    double from = 0, to = 0;
    long begin = 0, end = 0;
};

struct TrainingStage {
    long begin = 0, end = 0;
    double lr_nn = 0, lr_ps = 0, lr_sa = 0;
    long max_sa = 0;
    std::vector<LrRamp> ramps;
};

struct TrainingSchedule {
    std::vector<TrainingStage> stages;
    double w_data = 1;
    std::array<double, 6> w_physics{};
    double w_ic = 1;

    long total_epochs() const { return stages.empty() ? 0 : stages.back().end; }
    void check() const;
    const TrainingStage& stage_at(long epoch) const;
    /// Learning rate of a group at an epoch, ramps applied.
    double lr(const std::string& group, long epoch) const;
    bool sa_active(long epoch) const;
    /// Keeps the stage structure but rescales every epoch boundary.
    TrainingSchedule scaled(double factor) const;
};

TrainingSchedule schedule_from_json(const Json& j);
Json schedule_to_json(const TrainingSchedule& s);
/// Appendix-style schedule from configs/schedules.json. Noisy data uses the
/// simulated settings.
TrainingSchedule default_schedule(int case_id, Scenario scenario);

struct PinnProblem {
    int case_id = 1;
    EspParams known;                    // values of the non-estimated parameters
    std::vector<Param> unknowns;
    std::vector<ParameterTransform> transforms;
    std::vector<double> t_data;         // s
    std::vector<double> p1_data, p2_data;  // Pa
    StateVector ic;                     // state at t_data.front()
    TorqueSignal torque;
    ScalingBounds bounds;
    int n_collocation = 100;
    std::vector<int> arch{1, 20, 20, 20, 6};
    Activation activation = Activation::Tanh;

    double t0() const { return t_data.front(); }
    double t1() const { return t_data.back(); }
    double to_scaled(double t) const { return 2.0 * (t - t0()) / (t1() - t0()) - 1.0; }
    void check() const;
};

/// Raw self-adaptive weights are ordered physics[6], data[2], ic[6].
inline constexpr int kSaCount = 14;

struct PinnTrainables {
    MlpParams net;
    Eigen::VectorXd raw_params;
    Eigen::VectorXd raw_sa;
};

PinnTrainables init_trainables(const PinnProblem& prob, const TrainingSchedule& sched,
                               std::uint64_t seed);
/// Raw values for effective weights (softplus inverse).
Eigen::VectorXd raw_weights(const TrainingSchedule& sched);

struct LossBreakdown {
    double total = 0, physics = 0, data = 0, ic = 0;
    std::array<double, 6> physics_mse{};  // unweighted mean squared residuals
    std::array<double, 2> data_mse{};
    std::array<double, 6> ic_sq{};
};

struct LossGradients {
    Eigen::VectorXd nn, ps, sa;
};

/// Precomputes the collocation grid, torque samples, and targets in
/// engineering units; evaluates the total loss on a private tape.
class PinnLoss {
public:
    explicit PinnLoss(const PinnProblem& prob);

    LossBreakdown evaluate(const PinnTrainables& tr, LossGradients* grads = nullptr);

    /// Same loss, with the network replaced by given SI states and time
    /// derivatives at the collocation points and states at the data points.
    LossBreakdown evaluate_states(const Eigen::MatrixXd& x_colloc, const Eigen::MatrixXd& dx_colloc,
                                  const Eigen::MatrixXd& x_data, const Eigen::VectorXd& raw_params,
                                  const Eigen::VectorXd& raw_sa);

    const std::vector<double>& collocation_times() const { return t_colloc_; }
    const PinnProblem& problem() const { return prob_; }

private:
    struct Pieces {
        ad::Var x_colloc, dx_colloc, x_data;  // engineering units
    };
    LossBreakdown assemble(const Pieces& s, const std::vector<ad::Var>& raw_params,
                           const std::vector<ad::Var>& raw_sa, ad::Var* total);

    PinnProblem prob_;
    ad::Tape tape_;
    std::vector<double> t_colloc_;
    Eigen::VectorXd s_colloc_, s_data_;
    ad::Array torque_colloc_;
    ad::Array p_data_eng_;  // n_data x 2
    StateVector::Array ic_eng_;
    StateVector::Array eng_min_, eng_half_;
};

/// SI states (n x 6) predicted at physical times.
Eigen::MatrixXd predict_states(const PinnProblem& prob, const MlpParams& net,
                               const std::vector<double>& times);
std::vector<double> estimated_parameters(const PinnProblem& prob, const PinnTrainables& tr);

struct EpochRecord {
    long epoch = 0;
    LossBreakdown loss;
    std::vector<double> params;
};

struct TrainOptions {
    long log_every = 1000;
    std::function<void(const EpochRecord&)> on_log;
};

struct TrainResult {
    PinnTrainables trained;
    std::vector<double> estimates;
    LossBreakdown final_loss;
    std::vector<EpochRecord> log;
    long epochs = 0;
};

/// Thrown on a non-finite loss; keeps the last finite trainables.
class TrainingDiverged : public NumericalError {
public:
    TrainingDiverged(const std::string& what, PinnTrainables last)
        : NumericalError(what), last_finite(std::move(last)) {}
    PinnTrainables last_finite;
};

/// Staged Adam: network and parameters descend, self-adaptive weights ascend
/// until the Max-SA epoch and are frozen afterwards.
TrainResult train(const PinnProblem& prob, const TrainingSchedule& sched, std::uint64_t seed,
                  const TrainOptions& opts = {});
TrainResult train(const PinnProblem& prob, const TrainingSchedule& sched, PinnTrainables init,
                  const TrainOptions& opts = {});

}  // namespace espvfm
