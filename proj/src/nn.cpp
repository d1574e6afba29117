#include "espvfm/nn.hpp"

#include <cmath>
#include <random>

#include "espvfm/params_io.hpp"

namespace espvfm {

Activation parse_activation(std::string_view tag) {
    if (tag == "tanh") return Activation::Tanh;
    if (tag == "identity" || tag == "linear") return Activation::Identity;
    throw ValidationError("unsupported activation '" + std::string(tag) +
                          "'; supported: tanh, identity");
}

std::string_view activation_name(Activation a) {
    return a == Activation::Tanh ? "tanh" : "identity";
}

void MlpParams::check() const {
    if (arch.size() < 2) throw ValidationError("architecture needs at least two layers");
    if (W.size() != arch.size() - 1 || b.size() != W.size())
        throw ValidationError("layer count does not match architecture");
    for (std::size_t i = 0; i < W.size(); ++i) {
        if (W[i].rows() != arch[i] || W[i].cols() != arch[i + 1] || b[i].size() != arch[i + 1])
            throw ValidationError("layer " + std::to_string(i) + " is not conformable");
        if (!W[i].allFinite() || !b[i].allFinite())
            throw ValidationError("layer " + std::to_string(i) + " has non-finite entries");
    }
}

Eigen::Index MlpParams::size() const {
    Eigen::Index n = 0;
    for (std::size_t i = 0; i < W.size(); ++i) n += W[i].size() + b[i].size();
    return n;
}

Eigen::VectorXd MlpParams::flatten() const {
    Eigen::VectorXd flat(size());
    Eigen::Index k = 0;
    for (std::size_t i = 0; i < W.size(); ++i) {
        flat.segment(k, W[i].size()) = W[i].reshaped();
        k += W[i].size();
        flat.segment(k, b[i].size()) = b[i].transpose();
        k += b[i].size();
    }
    return flat;
}

void MlpParams::unflatten(const Eigen::VectorXd& flat) {
    if (flat.size() != size()) throw ValidationError("flat parameter size mismatch");
    Eigen::Index k = 0;
    for (std::size_t i = 0; i < W.size(); ++i) {
        W[i].reshaped() = flat.segment(k, W[i].size());
        k += W[i].size();
        b[i] = flat.segment(k, b[i].size()).transpose();
        k += b[i].size();
    }
}

MlpParams zero_mlp(const std::vector<int>& arch, Activation act) {
    MlpParams p;
    p.arch = arch;
    p.activation = act;
    for (std::size_t i = 0; i + 1 < arch.size(); ++i) {
        if (arch[i] < 1 || arch[i + 1] < 1) throw ValidationError("layer sizes must be >= 1");
        p.W.push_back(Eigen::MatrixXd::Zero(arch[i], arch[i + 1]));
        p.b.push_back(Eigen::RowVectorXd::Zero(arch[i + 1]));
    }
    p.check();
    return p;
}

MlpParams glorot_init(const std::vector<int>& arch, std::uint64_t seed, Activation act) {
    MlpParams p = zero_mlp(arch, act);
    std::mt19937_64 rng(seed);
    for (auto& w : p.W) {
        const double lim = std::sqrt(6.0 / static_cast<double>(w.rows() + w.cols()));
        std::uniform_real_distribution<double> u(-lim, lim);
        for (Eigen::Index j = 0; j < w.cols(); ++j)
            for (Eigen::Index i = 0; i < w.rows(); ++i) w(i, j) = u(rng);
    }
    return p;
}

namespace {

void activate(Activation a, Eigen::MatrixXd& z) {
    if (a == Activation::Tanh) z = z.array().tanh().matrix();
}

}  // namespace

Eigen::MatrixXd mlp_forward(const MlpParams& p, const Eigen::VectorXd& t) {
    Eigen::MatrixXd y = t;
    for (int i = 0; i < p.layers(); ++i) {
        Eigen::MatrixXd z = (y * p.W[i]).rowwise() + p.b[i];
        if (i + 1 < p.layers()) activate(p.activation, z);
        y = std::move(z);
    }
    return y;
}

Eigen::VectorXd mlp_forward(const MlpParams& p, double t) {
    return mlp_forward(p, Eigen::VectorXd::Constant(1, t)).row(0).transpose();
}

Eigen::MatrixXd mlp_time_derivative(const MlpParams& p, const Eigen::VectorXd& t) {
    Eigen::MatrixXd y = t;
    Eigen::MatrixXd dy = Eigen::MatrixXd::Ones(t.size(), 1);
    for (int i = 0; i < p.layers(); ++i) {
        Eigen::MatrixXd z = (y * p.W[i]).rowwise() + p.b[i];
        Eigen::MatrixXd dz = dy * p.W[i];
        if (i + 1 < p.layers() && p.activation == Activation::Tanh) {
            z = z.array().tanh().matrix();
            dz = (dz.array() * (1.0 - z.array().square())).matrix();
        }
        y = std::move(z);
        dy = std::move(dz);
    }
    return dy;
}

Eigen::VectorXd mlp_time_derivative(const MlpParams& p, double t) {
    return mlp_time_derivative(p, Eigen::VectorXd::Constant(1, t)).row(0).transpose();
}

MlpLeaves mlp_leaves(ad::Tape& tape, const MlpParams& p, bool requires_grad) {
    MlpLeaves l;
    for (int i = 0; i < p.layers(); ++i) {
        l.W.push_back(tape.leaf(p.W[i].array(), requires_grad));
        l.b.push_back(tape.leaf(p.b[i].array(), requires_grad));
    }
    return l;
}

Eigen::VectorXd mlp_leaf_gradient(const MlpLeaves& leaves) {
    Eigen::Index n = 0;
    for (std::size_t i = 0; i < leaves.W.size(); ++i)
        n += leaves.W[i].value().size() + leaves.b[i].value().size();
    Eigen::VectorXd g(n);
    Eigen::Index k = 0;
    for (std::size_t i = 0; i < leaves.W.size(); ++i) {
        const auto& gw = leaves.W[i].grad();
        g.segment(k, gw.size()) = gw.reshaped();
        k += gw.size();
        const auto& gb = leaves.b[i].grad();
        g.segment(k, gb.size()) = gb.reshaped();
        k += gb.size();
    }
    return g;
}

MlpTapeOutput mlp_tape_forward(ad::Tape& tape, const MlpLeaves& leaves, Activation act,
                               const Eigen::VectorXd& t, bool with_derivative) {
    ad::Var y = tape.constant(t.array());
    ad::Var dy;
    const int layers = static_cast<int>(leaves.W.size());
    for (int i = 0; i < layers; ++i) {
        ad::Var z = tape.add_row(tape.matmul(y, leaves.W[i]), leaves.b[i]);
        ad::Var dz;
        if (with_derivative) {
            // the first layer's tangent is the broadcast input row
            dz = i == 0 ? tape.matmul(tape.constant(ad::Array::Ones(t.size(), 1)), leaves.W[0])
                        : tape.matmul(dy, leaves.W[i]);
        }
        if (i + 1 < layers && act == Activation::Tanh) {
            z = tape.tanh(z);
            if (with_derivative) dz = tape.mul(dz, 1.0 - tape.square(z));
        }
        y = z;
        dy = dz;
    }
    return {y, dy};
}

void adam_step(AdamState& s, Eigen::VectorXd& theta, const Eigen::VectorXd& grad, double lr) {
    if (grad.size() != theta.size() || s.m.size() != theta.size() || s.v.size() != theta.size())
        throw ValidationError("adam_step: shape mismatch");
    ++s.step;
    s.m = s.beta1 * s.m + (1 - s.beta1) * grad;
    s.v = s.beta2 * s.v + (1 - s.beta2) * grad.cwiseAbs2();
    const double c1 = 1 - std::pow(s.beta1, static_cast<double>(s.step));
    const double c2 = 1 - std::pow(s.beta2, static_cast<double>(s.step));
    theta.array() -= lr * (s.m.array() / c1) / ((s.v.array() / c2).sqrt() + s.eps);
}

void save_mlp(const MlpParams& p, const std::filesystem::path& path) {
    p.check();
    Json j;
    j["format"] = "esp-vfm.mlp/1";
    j["arch"] = p.arch;
    j["activation"] = activation_name(p.activation);
    Json tensors = Json::object();
    for (int i = 0; i < p.layers(); ++i) {
        std::vector<double> w(p.W[i].data(), p.W[i].data() + p.W[i].size());
        std::vector<double> b(p.b[i].data(), p.b[i].data() + p.b[i].size());
        tensors["W" + std::to_string(i + 1)] = {{"shape", {p.W[i].rows(), p.W[i].cols()}},
                                                {"order", "col-major"},
                                                {"data", w}};
        tensors["b" + std::to_string(i + 1)] = {{"shape", {1, p.b[i].size()}}, {"data", b}};
    }
    j["tensors"] = tensors;
    write_json_file(j, path);
}

MlpParams load_mlp(const std::filesystem::path& path) {
    const Json j = read_json_file(path);
    try {
        MlpParams p = zero_mlp(j.at("arch").get<std::vector<int>>(),
                               parse_activation(j.at("activation").get<std::string>()));
        for (int i = 0; i < p.layers(); ++i) {
            const auto w = j.at("tensors").at("W" + std::to_string(i + 1)).at("data").get<std::vector<double>>();
            const auto b = j.at("tensors").at("b" + std::to_string(i + 1)).at("data").get<std::vector<double>>();
            if (static_cast<Eigen::Index>(w.size()) != p.W[i].size() ||
                static_cast<Eigen::Index>(b.size()) != p.b[i].size())
                throw ValidationError("checkpoint tensor size mismatch in layer " + std::to_string(i + 1));
            p.W[i] = Eigen::Map<const Eigen::MatrixXd>(w.data(), p.W[i].rows(), p.W[i].cols());
            p.b[i] = Eigen::Map<const Eigen::RowVectorXd>(b.data(), p.b[i].size());
        }
        p.check();
        return p;
    } catch (const nlohmann::json::exception& e) {
        throw ValidationError(path.string() + ": " + e.what());
    }
}

}  // namespace espvfm
