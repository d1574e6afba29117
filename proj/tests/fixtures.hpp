#pragma once

#include <algorithm>
#include <cmath>
#include <random>
#include <string>

#include <Eigen/Core>

#include "espvfm/pinn.hpp"
#include "espvfm/workbench.hpp"

namespace espvfm::testing {

inline const ScenarioData& inv1_simulated() {
    static const ScenarioData sc = build_synthetic_scenario(1, Scenario::Simulated, preset_investigation(1), 0);
    return sc;
}

inline PinnProblem inv1_problem(int case_id) { return pinn_problem(inv1_simulated(), case_id); }

enum class Group { Nn, Ps, Sa };

inline Eigen::VectorXd get_group(const PinnTrainables& tr, Group g) {
    switch (g) {
    case Group::Nn: return tr.net.flatten();
    case Group::Ps: return tr.raw_params;
    default: return tr.raw_sa;
    }
}

inline void set_group(PinnTrainables& tr, Group g, const Eigen::VectorXd& v) {
    switch (g) {
    case Group::Nn: tr.net.unflatten(v); break;
    case Group::Ps: tr.raw_params = v; break;
    default: tr.raw_sa = v; break;
    }
}

/// Relative mismatch between the reverse-mode directional derivative along a
/// random unit direction and a Richardson-extrapolated central difference.
inline double directional_fd_error(PinnLoss& loss, const PinnTrainables& tr, Group g, std::uint64_t seed,
                                   double h) {
    LossGradients grads;
    loss.evaluate(tr, &grads);
    const Eigen::VectorXd& gv = g == Group::Nn ? grads.nn : (g == Group::Ps ? grads.ps : grads.sa);
    const Eigen::VectorXd base = get_group(tr, g);
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> nd;
    Eigen::VectorXd v(base.size());
    for (Eigen::Index i = 0; i < v.size(); ++i) v[i] = nd(rng);
    v.normalize();
    auto at = [&](double s) {
        PinnTrainables t = tr;
        set_group(t, g, base + s * v);
        return loss.evaluate(t).total;
    };
    auto central = [&](double step) { return (at(step) - at(-step)) / (2 * step); };
    const double fd = (4 * central(h / 2) - central(h)) / 3;
    const double ad = gv.dot(v);
    return std::abs(ad - fd) / std::max(std::abs(ad), 1e-300);
}

}  // namespace espvfm::testing
