#pragma once

#include <string>
#include <utility>
#include <vector>

#include <Eigen/Core>

#include "espvfm/model.hpp"
#include "espvfm/sim.hpp"

namespace espvfm {

/// Parameter sets used by the correlation study.
std::vector<Param> identifiability_set(int size);  // 8, 12 or 15

struct SensitivityScenario {
    StateVector x0;
    TorqueSignal torque;
    std::vector<double> grid;  // observation times, grid.front() is the start
    /// Re-solve the initial steady state at every perturbed parameter set
    /// instead of keeping x0 fixed.
    bool steady_initial = false;
};

/// Rows are (time, channel) pairs in time-major order; columns follow
/// `subset`.
struct SensitivityMatrix {
    Eigen::MatrixXd S;
    Eigen::MatrixXd y;  // nominal outputs, n_times x n_channels
    std::vector<Param> subset;
    std::vector<int> channels;  // state indices
    /// Worst relative disagreement between central and one-sided columns.
    std::vector<double> one_sided_mismatch;
};

SensitivityMatrix output_sensitivities(const EspParams& p, const std::vector<Param>& subset,
                                       const SensitivityScenario& sc,
                                       const std::vector<int>& channels = {4, 5},
                                       int workers = 0, const IntegrateOptions& opts = {});

/// Sigma per row of S: `relative` times |y|.
Eigen::VectorXd relative_noise(const SensitivityMatrix& s, double relative = 0.01);

/// sum over rows of s^T s / sigma^2, accumulated in long double.
Eigen::MatrixXd fisher_information(const Eigen::MatrixXd& S, const Eigen::VectorXd& sigma);

struct CorrelationReport {
    Eigen::MatrixXd covariance;
    Eigen::MatrixXd R;
    int rank = 0;
    double condition_number = 0;
    bool full_rank = true;
};

/// Covariance by eigen-decomposition with cutoff 1e-12 lambda_max, computed
/// on the unit-diagonal scaled FIM; rank and condition number refer to it.
CorrelationReport correlation_matrix(const Eigen::MatrixXd& fim);

struct FlaggedPair {
    int i = 0, j = 0;
    double r = 0;
};

struct Partition {
    std::vector<FlaggedPair> pairs;  // |r| descending
    std::vector<int> fix_order;      // column indices
};

/// `pump_shaft` marks columns preferred for fixing.
Partition identifiable_partition(const Eigen::MatrixXd& R, const std::vector<bool>& pump_shaft,
                                 double threshold = 0.95);
Partition identifiable_partition(const Eigen::MatrixXd& R, const std::vector<Param>& subset,
                                 double threshold = 0.95);

}  // namespace espvfm
