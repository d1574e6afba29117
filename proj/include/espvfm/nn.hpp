#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Core>

#include "espvfm/ad.hpp"

namespace espvfm {

enum class Activation { Tanh, Identity };

/// Only activations with a tape primitive are accepted.
Activation parse_activation(std::string_view tag);
std::string_view activation_name(Activation a);

/// Fully connected network y_i = act(y_{i-1} W_i + b_i) with a linear last
/// layer. W_i is n_in x n_out, b_i is 1 x n_out.
struct MlpParams {
    std::vector<int> arch;
    Activation activation = Activation::Tanh;
    std::vector<Eigen::MatrixXd> W;
    std::vector<Eigen::RowVectorXd> b;

    int layers() const { return static_cast<int>(W.size()); }
    Eigen::Index size() const;
    Eigen::VectorXd flatten() const;
    void unflatten(const Eigen::VectorXd& flat);
    void check() const;
};

MlpParams zero_mlp(const std::vector<int>& arch, Activation act = Activation::Tanh);
MlpParams glorot_init(const std::vector<int>& arch, std::uint64_t seed,
                      Activation act = Activation::Tanh);

/// Batched forward pass: t is n x 1, result is n x n_out.
Eigen::MatrixXd mlp_forward(const MlpParams& p, const Eigen::VectorXd& t);
Eigen::VectorXd mlp_forward(const MlpParams& p, double t);

/// Exact d(output)/dt by a single forward tangent pass.
Eigen::MatrixXd mlp_time_derivative(const MlpParams& p, const Eigen::VectorXd& t);
Eigen::VectorXd mlp_time_derivative(const MlpParams& p, double t);

/// Network outputs and their time derivative as tape nodes.
struct MlpTapeOutput {
    ad::Var y;
    ad::Var dy;
};

/// Leaves for the network parameters, in flatten() order.
struct MlpLeaves {
    std::vector<ad::Var> W, b;
};
MlpLeaves mlp_leaves(ad::Tape& tape, const MlpParams& p, bool requires_grad = true);
Eigen::VectorXd mlp_leaf_gradient(const MlpLeaves& leaves);

MlpTapeOutput mlp_tape_forward(ad::Tape& tape, const MlpLeaves& leaves, Activation act,
                               const Eigen::VectorXd& t, bool with_derivative = true);

struct AdamState {
    Eigen::VectorXd m, v;
    long step = 0;
    double beta1 = 0.9, beta2 = 0.999, eps = 1e-8;

    explicit AdamState(Eigen::Index n = 0) : m(Eigen::VectorXd::Zero(n)), v(Eigen::VectorXd::Zero(n)) {}
};

/// theta <- theta - lr * mhat / (sqrt(vhat) + eps).
void adam_step(AdamState& s, Eigen::VectorXd& theta, const Eigen::VectorXd& grad, double lr);

/// Checkpoint as JSON: architecture header plus named tensors.
void save_mlp(const MlpParams& p, const std::filesystem::path& path);
MlpParams load_mlp(const std::filesystem::path& path);

}  // namespace espvfm
