#pragma once

#include <array>
#include <cstdint>
#include <random>
#include <vector>

#include <Eigen/Core>

#include "espvfm/model.hpp"
#include "espvfm/sim.hpp"
#include "espvfm/timeseries.hpp"

namespace espvfm {

struct PfConfig {
    int n_particles = 200;
    double ess_threshold = 50;
    double jitter_std = 0.03;  // relative, per component
    double init_span = 0.5;    // parameters drawn uniformly in nominal*(1 +- span)
    std::array<double, 2> sigma{kPressureSigmaPa, kPressureSigmaPa};  // P1, P2 likelihood std (Pa)
    double max_failure_fraction = 0.5;
    int workers = 1;
    IntegrateOptions integrate{1e-6, 1e-6};
    void check() const;
};

/// Augmented particle: six states followed by the unknown parameters.
using Particle = Eigen::VectorXd;

struct PfProblem {
    EspParams known;               // also supplies the nominal of every unknown
    std::vector<Param> unknowns;
    StateVector x0;
    TorqueSignal torque;
    TimeSeries measurements;       // channels P1_Pa and P2_Pa on a uniform grid
    void check() const;
};

struct PfResult {
    std::vector<double> t;
    Eigen::MatrixXd state_mean;  // n_t x 6
    Eigen::MatrixXd param_mean;  // n_t x n_unknowns
    std::vector<double> ess;     // after each weight update
    std::vector<int> resampled;  // 1 where resampling happened
    std::vector<int> failures;   // failed propagations per step
    std::vector<double> estimates;

    TimeSeries state_series() const;
};

double effective_sample_size(const Eigen::VectorXd& w);

/// Normalizes log-weights in place and returns linear weights summing to 1.
Eigen::VectorXd normalize_log_weights(Eigen::VectorXd& logw);

/// Offspring counts of systematic resampling for a given offset u in [0, 1).
std::vector<int> systematic_counts(const Eigen::VectorXd& w, double u);

/// Systematic resampling followed by multiplicative N(1, jitter_std) noise
/// on every component. Weights are reset to uniform by the caller.
std::vector<Particle> resample(const std::vector<Particle>& particles, const Eigen::VectorXd& w,
                               double jitter_std, std::uint64_t seed, long step);

/// Gaussian log-likelihood of one P1/P2 observation.
double log_likelihood(const Particle& x, double p1, double p2, const std::array<double, 2>& sigma);

PfResult pf_run(const PfConfig& cfg, const PfProblem& prob, std::uint64_t seed);

/// Stateless stream derivation used by the filter and the workbench.
std::uint64_t splitmix64(std::uint64_t x);
std::uint64_t derive_seed(std::uint64_t master, std::uint64_t a, std::uint64_t b = 0,
                          std::uint64_t c = 0);

}  // namespace espvfm
