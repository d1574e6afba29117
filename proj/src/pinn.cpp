#include "espvfm/pinn.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include <Eigen/LU>

namespace espvfm {

Scenario parse_scenario(std::string_view s) {
    if (s == "sim" || s == "simulated") return Scenario::Simulated;
    if (s == "noisy") return Scenario::Noisy;
    if (s == "exp" || s == "experimental") return Scenario::Experimental;
    throw ValidationError("unknown scenario '" + std::string(s) + "'; expected sim, noisy or exp");
}

std::string_view scenario_name(Scenario s) {
    switch (s) {
    case Scenario::Simulated: return "sim";
    case Scenario::Noisy: return "noisy";
    case Scenario::Experimental: return "exp";
    }
    return "sim";
}

std::vector<Param> case_unknowns(int case_id) {
    switch (case_id) {
    case 1: return {Param::B, Param::mu, Param::rho};
    case 2: return {Param::B, Param::mu, Param::rho, Param::ku, Param::kd, Param::k3p, Param::k4p};
    case 3:
        return {Param::B, Param::mu, Param::rho, Param::ku, Param::kd, Param::k4p, Param::k1s,
                Param::k5s};
    default: throw ValidationError("case must be 1, 2 or 3, got " + std::to_string(case_id));
    }
}

StateVector::Array si_to_engineering(const StateVector::Array& x) {
    return x.cwiseProduct(kEngPerSi);
}

StateVector::Array engineering_to_si(const StateVector::Array& x) {
    return x.cwiseQuotient(kEngPerSi);
}

void ScalingBounds::check() const {
    for (int i = 0; i < 6; ++i)
        if (!(min[i] < max[i]) || !std::isfinite(min[i]) || !std::isfinite(max[i]))
            throw ValidationError("scaling bounds for " + std::string(kStateNames[i]) +
                                  " need finite min < max");
}

StateVector output_scale(const StateVector::Array& raw, const ScalingBounds& b) {
    const StateVector::Array x =
        (raw.array() + 1.0) * (b.max - b.min).array() / 2.0 + b.min.array();
    return StateVector::from_array(x);
}

BoundsRoot solve_bounds_system(const EspParams& p, double dP, double gamma) {
    const double rho = p.rho;
    auto residual = [&](double w, double q) {
        return Eigen::Vector2d(rho * (p.k1p * w * q + p.k2p * w * w + p.k4p * q * q) - dP,
                               rho * (p.k1s * q * q - p.k2s * w * q) + gamma);
    };
    const Eigen::Vector2d scale(std::max(std::abs(dP), 1.0), std::max(std::abs(gamma), 1e-6));

    double w = dP > 0 && p.k2p * rho > 0 ? std::sqrt(dP / (p.k2p * rho)) : 100.0;
    double q = 0.01;
    {
        const double a = p.k1s * rho, b = -p.k2s * rho * w, c = gamma;
        const double disc = b * b - 4 * a * c;
        if (a != 0 && disc >= 0) {
            const double r1 = (-b + std::sqrt(disc)) / (2 * a);
            const double r2 = (-b - std::sqrt(disc)) / (2 * a);
            q = r1 > 0 ? r1 : r2;
        }
    }
    Eigen::Vector2d F = residual(w, q).cwiseQuotient(scale);
    for (int it = 0; it < 200 && F.norm() > 1e-15; ++it) {
        Eigen::Matrix2d J;
        J << rho * (p.k1p * q + 2 * p.k2p * w), rho * (p.k1p * w + 2 * p.k4p * q),
            -rho * p.k2s * q, rho * (2 * p.k1s * q - p.k2s * w);
        J.row(0) /= scale[0];
        J.row(1) /= scale[1];
        const Eigen::Vector2d d = J.fullPivLu().solve(-F);
        double lam = 1.0;
        bool moved = false;
        for (int ls = 0; ls < 40; ++ls) {
            const Eigen::Vector2d Ft = residual(w + lam * d[0], q + lam * d[1]).cwiseQuotient(scale);
            if (Ft.allFinite() && Ft.norm() < F.norm()) {
                w += lam * d[0];
                q += lam * d[1];
                F = Ft;
                moved = true;
                break;
            }
            lam *= 0.5;
        }
        if (!moved) break;
    }
    if (!(F.norm() < 1e-9))
        throw NumericalError("bounds system did not converge; scaled residual " +
                             std::to_string(F.norm()));
    return {w, q, F.norm()};
}

EspParams bounds_guess_params(const EspParams& truth) {
    EspParams g = truth;
    for (Param id : {Param::k1p, Param::k2p, Param::k4p, Param::k1s, Param::k2s}) g[id] *= 1.15;
    g.rho = 931.51;
    return g;
}

BoundsEstimate estimate_state_bounds(const TimeSeries& pressures, const TorqueSignal& torque,
                                     const EspParams& guess) {
    const auto& p1 = pressures["P1_Pa"];
    const auto& p2 = pressures["P2_Pa"];
    if (pressures.size() < 2) throw ValidationError("bounds estimation needs at least two samples");
    std::size_t i1 = 0, i2 = 0;
    for (std::size_t i = 1; i < pressures.size(); ++i) {
        const double d = p2[i] - p1[i];
        if (d < p2[i1] - p1[i1]) i1 = i;
        if (d > p2[i2] - p1[i2]) i2 = i;
    }
    if (i1 == i2 || p2[i1] - p1[i1] == p2[i2] - p1[i2])
        throw ValidationError(
            "P2 - P1 is flat; bounds estimation needs a window with dynamic excitation");
    BoundsEstimate est;
    est.t1 = pressures.t[i1];
    est.t2 = pressures.t[i2];
    est.at_t1 = solve_bounds_system(guess, p2[i1] - p1[i1], torque(est.t1));
    est.at_t2 = solve_bounds_system(guess, p2[i2] - p1[i2], torque(est.t2));
    auto& b = est.bounds;
    const double wlo = std::min(est.at_t1.omega, est.at_t2.omega);
    const double whi = std::max(est.at_t1.omega, est.at_t2.omega);
    const double qlo = std::min(est.at_t1.Qp, est.at_t2.Qp);
    const double qhi = std::max(est.at_t1.Qp, est.at_t2.Qp);
    b.min << qlo, wlo, qlo, qlo, *std::min_element(p1.begin(), p1.end()),
        *std::min_element(p2.begin(), p2.end());
    b.max << qhi, whi, qhi, qhi, *std::max_element(p1.begin(), p1.end()),
        *std::max_element(p2.begin(), p2.end());
    b.check();
    return est;
}

void ParameterTransform::check() const {
    if (scale == 0) throw ValidationError("transform scale must be nonzero");
    if (kind == TransformKind::Bounded && !(alpha > 0 && alpha <= 1))
        throw ValidationError("bounded transform span must lie in (0, 1]");
    if (kind == TransformKind::Bounded && anchor == 0)
        throw ValidationError("bounded transform anchor must be nonzero");
}

double transform_parameter(double raw, const ParameterTransform& xf) {
    switch (xf.kind) {
    case TransformKind::SoftplusShift: return (ad::softplus(raw) + 0.9) * xf.scale;
    case TransformKind::Linear: return raw * xf.scale;
    case TransformKind::Softminus: return (raw - ad::softplus(raw) + 1.0) * xf.scale;
    case TransformKind::Bounded: return xf.anchor * (std::tanh(raw) * xf.alpha + 1.0);
    }
    return raw;
}

ad::Var transform_parameter(ad::Tape& tape, ad::Var raw, const ParameterTransform& xf) {
    switch (xf.kind) {
    case TransformKind::SoftplusShift: return tape.scale(tape.shift(tape.softplus(raw), 0.9), xf.scale);
    case TransformKind::Linear: return tape.scale(raw, xf.scale);
    case TransformKind::Softminus:
        return tape.scale(tape.shift(tape.sub(raw, tape.softplus(raw)), 1.0), xf.scale);
    case TransformKind::Bounded:
        return tape.scale(tape.shift(tape.scale(tape.tanh(raw), xf.alpha), 1.0), xf.anchor);
    }
    return raw;
}

std::pair<double, double> transform_range(const ParameterTransform& xf) {
    constexpr double inf = std::numeric_limits<double>::infinity();
    switch (xf.kind) {
    case TransformKind::SoftplusShift:
        return xf.scale > 0 ? std::pair{0.9 * xf.scale, inf} : std::pair{-inf, 0.9 * xf.scale};
    case TransformKind::Linear: return {-inf, inf};
    case TransformKind::Softminus:
        return xf.scale > 0 ? std::pair{-inf, xf.scale} : std::pair{xf.scale, inf};
    case TransformKind::Bounded: {
        const double a = xf.anchor * (1 - xf.alpha), b = xf.anchor * (1 + xf.alpha);
        return {std::min(a, b), std::max(a, b)};
    }
    }
    return {-inf, inf};
}

namespace {

TransformKind parse_kind(const std::string& s) {
    if (s == "softplus-shift") return TransformKind::SoftplusShift;
    if (s == "linear") return TransformKind::Linear;
    if (s == "softminus") return TransformKind::Softminus;
    if (s == "bounded") return TransformKind::Bounded;
    throw ValidationError("unknown transform scheme '" + s + "'");
}

}  // namespace

std::vector<ParameterTransform> case_transforms(int case_id, const EspParams& truth,
                                                const Json& config) {
    const std::string key = "case" + std::to_string(case_id);
    if (!config.contains("transforms") || !config["transforms"].contains(key))
        throw ValidationError("transform config has no entry for " + key);
    const Json& table = config["transforms"][key];
    std::vector<ParameterTransform> out;
    for (Param id : case_unknowns(case_id)) {
        const std::string name(param_name(id));
        if (!table.contains(name))
            throw ValidationError("transform config " + key + " misses '" + name + "'");
        const Json& e = table[name];
        ParameterTransform xf;
        xf.kind = parse_kind(e.at("scheme").get<std::string>());
        xf.scale = e.value("scale", 1.0);
        xf.alpha = e.value("alpha", 0.5);
        xf.anchor = e.value("anchor", truth[id]);
        xf.check();
        out.push_back(xf);
    }
    return out;
}

std::vector<ParameterTransform> case_transforms(int case_id, const EspParams& truth) {
    return case_transforms(case_id, truth, read_json_file(config_dir() / "transforms.json"));
}

void TrainingSchedule::check() const {
    if (stages.empty()) throw ValidationError("schedule has no stages");
    long prev = 0;
    for (std::size_t i = 0; i < stages.size(); ++i) {
        const auto& s = stages[i];
        if (s.begin != prev || !(s.end > s.begin))
            throw ValidationError("schedule stage " + std::to_string(i) +
                                  " is not contiguous with the previous one");
        prev = s.end;
        for (const auto& r : s.ramps) {
            if (r.group != "nn" && r.group != "ps" && r.group != "sa")
                throw ValidationError("ramp group must be nn, ps or sa");
            if (!(r.end > r.begin)) throw ValidationError("ramp needs end > begin");
        }
    }
    for (double w : w_physics)
        if (!(w > 0)) throw ValidationError("initial weights must be positive");
    if (!(w_data > 0 && w_ic > 0)) throw ValidationError("initial weights must be positive");
}

const TrainingStage& TrainingSchedule::stage_at(long epoch) const {
    for (const auto& s : stages)
        if (epoch < s.end) return s;
    return stages.back();
}

double TrainingSchedule::lr(const std::string& group, long epoch) const {
    const auto& s = stage_at(epoch);
    double base = group == "nn" ? s.lr_nn : group == "ps" ? s.lr_ps : s.lr_sa;
    for (const auto& r : s.ramps) {
        if (r.group != group) continue;
        if (epoch <= r.begin) return r.from;
        if (epoch >= r.end) return r.to;
        const double w = static_cast<double>(epoch - r.begin) / static_cast<double>(r.end - r.begin);
        return r.from + w * (r.to - r.from);
    }
    return base;
}

bool TrainingSchedule::sa_active(long epoch) const { return epoch < stage_at(epoch).max_sa; }

TrainingSchedule TrainingSchedule::scaled(double factor) const {
    auto sc = [factor](long e) { return static_cast<long>(std::llround(static_cast<double>(e) * factor)); };
    TrainingSchedule out = *this;
    for (auto& s : out.stages) {
        s.begin = sc(s.begin);
        s.end = sc(s.end);
        s.max_sa = sc(s.max_sa);
        for (auto& r : s.ramps) {
            r.begin = sc(r.begin);
            r.end = sc(r.end);
        }
    }
    return out;
}

TrainingSchedule schedule_from_json(const Json& j) {
    try {
        TrainingSchedule s;
        for (const auto& st : j.at("stages")) {
            TrainingStage t;
            t.begin = st.at("epochs").at(0).get<long>();
            t.end = st.at("epochs").at(1).get<long>();
            t.lr_nn = st.at("lr").at("nn").get<double>();
            t.lr_ps = st.at("lr").at("ps").get<double>();
            t.lr_sa = st.at("lr").at("sa").get<double>();
            t.max_sa = st.at("max_sa").get<long>();
            if (st.contains("ramps")) {
                for (const auto& r : st["ramps"]) {
                    t.ramps.push_back({r.at("group").get<std::string>(), r.at("from").get<double>(),
                                       r.at("to").get<double>(), r.at("epochs").at(0).get<long>(),
                                       r.at("epochs").at(1).get<long>()});
                }
            }
            s.stages.push_back(t);
        }
        const Json& w = j.at("initial_weights");
        s.w_data = w.at("data").get<double>();
        const auto phys = w.at("physics").get<std::vector<double>>();
        if (phys.size() != 6) throw ValidationError("initial_weights.physics needs 6 entries");
        std::copy(phys.begin(), phys.end(), s.w_physics.begin());
        s.w_ic = w.at("ic").get<double>();
        s.check();
        return s;
    } catch (const nlohmann::json::exception& e) {
        throw ValidationError(std::string("schedule config: ") + e.what());
    }
}

Json schedule_to_json(const TrainingSchedule& s) {
    Json j;
    Json stages = Json::array();
    for (const auto& t : s.stages) {
        Json st;
        st["epochs"] = {t.begin, t.end};
        st["lr"] = {{"nn", t.lr_nn}, {"ps", t.lr_ps}, {"sa", t.lr_sa}};
        st["max_sa"] = t.max_sa;
        if (!t.ramps.empty()) {
            Json ramps = Json::array();
            for (const auto& r : t.ramps)
                ramps.push_back({{"group", r.group}, {"from", r.from}, {"to", r.to},
                                 {"epochs", {r.begin, r.end}}});
            st["ramps"] = ramps;
        }
        stages.push_back(st);
    }
    j["stages"] = stages;
    j["initial_weights"] = {{"data", s.w_data},
                            {"physics", std::vector<double>(s.w_physics.begin(), s.w_physics.end())},
                            {"ic", s.w_ic}};
    return j;
}

TrainingSchedule default_schedule(int case_id, Scenario scenario) {
    case_unknowns(case_id);
    const Json cfg = read_json_file(config_dir() / "schedules.json");
    const std::string key = "case" + std::to_string(case_id);
    const std::string sc = scenario == Scenario::Experimental ? "exp" : "sim";
    if (!cfg.contains("schedules") || !cfg["schedules"].contains(key) ||
        !cfg["schedules"][key].contains(sc))
        throw ValidationError("schedules.json has no " + key + "/" + sc);
    return schedule_from_json(cfg["schedules"][key][sc]);
}

void PinnProblem::check() const {
    const auto expected = case_unknowns(case_id);
    if (unknowns != expected) throw ValidationError("unknown parameter set does not match the case");
    if (transforms.size() != unknowns.size())
        throw ValidationError("one transform per unknown parameter is required");
    for (const auto& xf : transforms) xf.check();
    if (t_data.size() < 2) throw ValidationError("PINN needs at least two data points");
    if (p1_data.size() != t_data.size() || p2_data.size() != t_data.size())
        throw ValidationError("P1/P2 data length must match the data grid");
    for (std::size_t i = 1; i < t_data.size(); ++i)
        if (!(t_data[i] > t_data[i - 1])) throw ValidationError("data times must increase");
    if (!torque.covers(t0(), t1())) throw ValidationError("torque does not cover the data span");
    if (n_collocation < 2) throw ValidationError("need at least two collocation points");
    if (arch.size() < 2 || arch.front() != 1 || arch.back() != 6)
        throw ValidationError("network must map 1 input to 6 outputs");
    bounds.check();
    validate(known);
}

Eigen::VectorXd raw_weights(const TrainingSchedule& sched) {
    Eigen::VectorXd raw(kSaCount);
    for (int i = 0; i < 6; ++i) raw[i] = ad::softplus_inverse(sched.w_physics[i]);
    raw[6] = raw[7] = ad::softplus_inverse(sched.w_data);
    for (int i = 8; i < 14; ++i) raw[i] = ad::softplus_inverse(sched.w_ic);
    return raw;
}

PinnTrainables init_trainables(const PinnProblem& prob, const TrainingSchedule& sched,
                               std::uint64_t seed) {
    PinnTrainables tr;
    tr.net = glorot_init(prob.arch, seed, prob.activation);
    tr.raw_params = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(prob.unknowns.size()));
    tr.raw_sa = raw_weights(sched);
    return tr;
}

PinnLoss::PinnLoss(const PinnProblem& prob) : prob_(prob) {
    prob_.check();
    const int nc = prob_.n_collocation;
    const double T = prob_.t1() - prob_.t0();
    s_colloc_.resize(nc);
    t_colloc_.resize(nc);
    torque_colloc_.resize(nc, 1);
    for (int i = 0; i < nc; ++i) {
        const double s = -1.0 + 2.0 * i / (nc - 1);
        s_colloc_[i] = s;
        t_colloc_[i] = i == 0 ? prob_.t0() : i == nc - 1 ? prob_.t1() : prob_.t0() + (s + 1.0) / 2.0 * T;
        torque_colloc_(i, 0) = prob_.torque(t_colloc_[i]);
    }
    const auto nd = static_cast<Eigen::Index>(prob_.t_data.size());
    s_data_.resize(nd);
    p_data_eng_.resize(nd, 2);
    for (Eigen::Index i = 0; i < nd; ++i) {
        s_data_[i] = prob_.to_scaled(prob_.t_data[i]);
        p_data_eng_(i, 0) = prob_.p1_data[i] / kPaPerMwc;
        p_data_eng_(i, 1) = prob_.p2_data[i] / kPaPerMwc;
    }
    ic_eng_ = si_to_engineering(prob_.ic.to_array());
    eng_min_ = si_to_engineering(prob_.bounds.min);
    eng_half_ = (si_to_engineering(prob_.bounds.max) - eng_min_) / 2.0;
}

LossBreakdown PinnLoss::assemble(const Pieces& s, const std::vector<ad::Var>& raw_params,
                                 const std::vector<ad::Var>& raw_sa, ad::Var* total_out) {
    ad::Tape& tp = tape_;
    std::array<ad::Var, 6> x, dx;
    for (int j = 0; j < 6; ++j) {
        x[j] = tp.scale(tp.col(s.x_colloc, j), 1.0 / kEngPerSi[j]);
        dx[j] = tp.col(s.dx_colloc, j);
    }
    BasicEspParams<ad::Var> pv;
    for (int i = 0; i < kParamCount; ++i) {
        const auto id = static_cast<Param>(i);
        pv[id] = tp.scalar(prob_.known[id]);
    }
    pv.cv_term_enabled = prob_.known.cv_term_enabled;
    for (std::size_t k = 0; k < prob_.unknowns.size(); ++k)
        pv[prob_.unknowns[k]] = transform_parameter(tp, raw_params[k], prob_.transforms[k]);

    const ad::Var gamma = tp.constant(torque_colloc_);
    const auto f = esp_rhs_generic<ad::Var>(x, gamma, pv);

    LossBreakdown lb;
    ad::Var total;
    auto add_term = [&](ad::Var term) { total = total.valid() ? tp.add(total, term) : term; };

    ad::Var physics;
    for (int j = 0; j < 6; ++j) {
        const ad::Var r = tp.sub(dx[j], tp.scale(f[j], kEngPerSi[j]));
        const ad::Var mse = tp.mean(tp.square(r));
        lb.physics_mse[j] = mse.scalar();
        const ad::Var term = tp.mul(tp.softplus(raw_sa[j]), mse);
        physics = physics.valid() ? tp.add(physics, term) : term;
    }
    ad::Var data;
    for (int k = 0; k < 2; ++k) {
        const ad::Var e = tp.sub(tp.col(s.x_data, 4 + k), tp.constant(p_data_eng_.col(k)));
        const ad::Var mse = tp.mean(tp.square(e));
        lb.data_mse[k] = mse.scalar();
        const ad::Var term = tp.mul(tp.softplus(raw_sa[6 + k]), mse);
        data = data.valid() ? tp.add(data, term) : term;
    }
    ad::Var ic;
    const ad::Var x0 = tp.rows(s.x_colloc, 0, 1);
    for (int j = 0; j < 6; ++j) {
        const ad::Var sq = tp.square(tp.shift(tp.col(x0, j), -ic_eng_[j]));
        lb.ic_sq[j] = sq.scalar();
        const ad::Var term = tp.mul(tp.softplus(raw_sa[8 + j]), sq);
        ic = ic.valid() ? tp.add(ic, term) : term;
    }
    add_term(physics);
    add_term(data);
    add_term(ic);
    lb.physics = physics.scalar();
    lb.data = data.scalar();
    lb.ic = ic.scalar();
    lb.total = total.scalar();
    if (total_out) *total_out = total;
    return lb;
}

LossBreakdown PinnLoss::evaluate(const PinnTrainables& tr, LossGradients* grads) {
    tape_.clear();
    const bool need = grads != nullptr;
    const MlpLeaves leaves = mlp_leaves(tape_, tr.net, need);
    std::vector<ad::Var> rp, rs;
    for (Eigen::Index k = 0; k < tr.raw_params.size(); ++k) rp.push_back(tape_.scalar(tr.raw_params[k], need));
    for (Eigen::Index k = 0; k < tr.raw_sa.size(); ++k) rs.push_back(tape_.scalar(tr.raw_sa[k], need));
    if (static_cast<int>(rs.size()) != kSaCount) throw ValidationError("expected 14 raw weights");

    const auto colloc = mlp_tape_forward(tape_, leaves, tr.net.activation, s_colloc_, true);
    const auto data = mlp_tape_forward(tape_, leaves, tr.net.activation, s_data_, false);

    const double T = prob_.t1() - prob_.t0();
    auto tile = [](const StateVector::Array& row, Eigen::Index n) {
        return ad::Array(row.transpose().replicate(n, 1).array());
    };
    const Eigen::Index nc = s_colloc_.size(), nd = s_data_.size();
    const StateVector::Array offset = eng_half_ + eng_min_;
    Pieces p;
    p.x_colloc = tape_.add(tape_.mul(colloc.y, tape_.constant(tile(eng_half_, nc))),
                           tape_.constant(tile(offset, nc)));
    p.dx_colloc = tape_.mul(colloc.dy, tape_.constant(tile(eng_half_ * (2.0 / T), nc)));
    p.x_data = tape_.add(tape_.mul(data.y, tape_.constant(tile(eng_half_, nd))),
                         tape_.constant(tile(offset, nd)));
    ad::Var total;
    const LossBreakdown lb = assemble(p, rp, rs, &total);
    if (grads) {
        tape_.backward(total);
        grads->nn = mlp_leaf_gradient(leaves);
        grads->ps.resize(static_cast<Eigen::Index>(rp.size()));
        for (std::size_t k = 0; k < rp.size(); ++k) grads->ps[static_cast<Eigen::Index>(k)] = rp[k].grad()(0, 0);
        grads->sa.resize(kSaCount);
        for (int k = 0; k < kSaCount; ++k) grads->sa[k] = rs[k].grad()(0, 0);
    }
    return lb;
}

LossBreakdown PinnLoss::evaluate_states(const Eigen::MatrixXd& x_colloc,
                                        const Eigen::MatrixXd& dx_colloc,
                                        const Eigen::MatrixXd& x_data,
                                        const Eigen::VectorXd& raw_params,
                                        const Eigen::VectorXd& raw_sa) {
    if (x_colloc.rows() != s_colloc_.size() || dx_colloc.rows() != s_colloc_.size() ||
        x_data.rows() != s_data_.size() || x_colloc.cols() != 6 || dx_colloc.cols() != 6 ||
        x_data.cols() != 6)
        throw ValidationError("state matrices do not match the collocation/data grids");
    tape_.clear();
    std::vector<ad::Var> rp, rs;
    for (Eigen::Index k = 0; k < raw_params.size(); ++k) rp.push_back(tape_.scalar(raw_params[k]));
    for (Eigen::Index k = 0; k < raw_sa.size(); ++k) rs.push_back(tape_.scalar(raw_sa[k]));
    auto eng = [](const Eigen::MatrixXd& m) {
        return ad::Array((m.array().rowwise() * kEngPerSi.transpose().array()));
    };
    Pieces p;
    p.x_colloc = tape_.constant(eng(x_colloc));
    p.dx_colloc = tape_.constant(eng(dx_colloc));
    p.x_data = tape_.constant(eng(x_data));
    return assemble(p, rp, rs, nullptr);
}

Eigen::MatrixXd predict_states(const PinnProblem& prob, const MlpParams& net,
                               const std::vector<double>& times) {
    Eigen::VectorXd s(static_cast<Eigen::Index>(times.size()));
    for (std::size_t i = 0; i < times.size(); ++i) s[static_cast<Eigen::Index>(i)] = prob.to_scaled(times[i]);
    const Eigen::MatrixXd raw = mlp_forward(net, s);
    Eigen::MatrixXd out(raw.rows(), 6);
    for (Eigen::Index i = 0; i < raw.rows(); ++i)
        out.row(i) = output_scale(raw.row(i).transpose(), prob.bounds).to_array().transpose();
    return out;
}

std::vector<double> estimated_parameters(const PinnProblem& prob, const PinnTrainables& tr) {
    std::vector<double> out;
    for (std::size_t k = 0; k < prob.unknowns.size(); ++k)
        out.push_back(transform_parameter(tr.raw_params[static_cast<Eigen::Index>(k)], prob.transforms[k]));
    return out;
}

TrainResult train(const PinnProblem& prob, const TrainingSchedule& sched, std::uint64_t seed,
                  const TrainOptions& opts) {
    return train(prob, sched, init_trainables(prob, sched, seed), opts);
}

TrainResult train(const PinnProblem& prob, const TrainingSchedule& sched, PinnTrainables tr,
                  const TrainOptions& opts) {
    sched.check();
    PinnLoss loss(prob);
    Eigen::VectorXd theta = tr.net.flatten();
    AdamState nn(theta.size()), ps(tr.raw_params.size()), sa(tr.raw_sa.size());
    TrainResult res;
    LossGradients g;
    PinnTrainables last_good = tr;
    const long total = sched.total_epochs();
    for (long epoch = 0; epoch < total; ++epoch) {
        const LossBreakdown lb = loss.evaluate(tr, &g);
        if (!std::isfinite(lb.total) || !g.nn.allFinite() || !g.ps.allFinite() ||
            !g.sa.allFinite()) {
            throw TrainingDiverged("non-finite loss at epoch " + std::to_string(epoch) +
                                       " (stage starting at epoch " +
                                       std::to_string(sched.stage_at(epoch).begin) + ")",
                                   last_good);
        }
        last_good = tr;
        if (opts.log_every > 0 && epoch % opts.log_every == 0) {
            EpochRecord rec{epoch, lb, estimated_parameters(prob, tr)};
            if (opts.on_log) opts.on_log(rec);
            res.log.push_back(std::move(rec));
        }
        adam_step(nn, theta, g.nn, sched.lr("nn", epoch));
        tr.net.unflatten(theta);
        adam_step(ps, tr.raw_params, g.ps, sched.lr("ps", epoch));
        if (sched.sa_active(epoch)) {
            const Eigen::VectorXd ascent = -g.sa;
            adam_step(sa, tr.raw_sa, ascent, sched.lr("sa", epoch));
        }
    }
    res.final_loss = loss.evaluate(tr, nullptr);
    if (!std::isfinite(res.final_loss.total))
        throw TrainingDiverged("non-finite loss after the last epoch", last_good);
    res.epochs = total;
    res.estimates = estimated_parameters(prob, tr);
    res.trained = std::move(tr);
    return res;
}

}  // namespace espvfm
