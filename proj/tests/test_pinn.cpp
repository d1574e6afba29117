#include <doctest.h>

#include <cmath>
#include <random>

#include "espvfm/pinn.hpp"
#include "fixtures.hpp"

using namespace espvfm;
using namespace espvfm::testing;

namespace {

double inverse_transform(double v, const ParameterTransform& xf) {
    switch (xf.kind) {
    case TransformKind::SoftplusShift: return ad::softplus_inverse(v / xf.scale - 0.9);
    case TransformKind::Linear: return v / xf.scale;
    case TransformKind::Softminus: return -ad::softplus_inverse(1.0 - v / xf.scale);
    default: return std::atanh((v / xf.anchor - 1.0) / xf.alpha);
    }
}

Eigen::VectorXd true_raw_params(const PinnProblem& prob) {
    Eigen::VectorXd r(static_cast<Eigen::Index>(prob.unknowns.size()));
    for (std::size_t k = 0; k < prob.unknowns.size(); ++k)
        r[static_cast<Eigen::Index>(k)] = inverse_transform(prob.known[prob.unknowns[k]], prob.transforms[k]);
    return r;
}

struct ExactStates {
    Eigen::MatrixXd xc, dxc, xd;
};

ExactStates exact_states(const PinnLoss& loss) {
    const auto& prob = loss.problem();
    const auto& sc = inv1_simulated();
    const auto tr = integrate(sc.truth, prob.ic, prob.torque, prob.t0(), prob.t1(), {1e-10, 1e-10});
    const auto& tc = loss.collocation_times();
    ExactStates e;
    e.xc.resize(static_cast<Eigen::Index>(tc.size()), 6);
    e.dxc.resize(e.xc.rows(), 6);
    for (std::size_t i = 0; i < tc.size(); ++i) {
        const auto x = tr.at(tc[i]);
        e.xc.row(static_cast<Eigen::Index>(i)) = x.transpose();
        e.dxc.row(static_cast<Eigen::Index>(i)) = esp_rhs_array(x, prob.torque(tc[i]), sc.truth).transpose();
    }
    e.xd.resize(static_cast<Eigen::Index>(prob.t_data.size()), 6);
    for (std::size_t i = 0; i < prob.t_data.size(); ++i) {
        auto x = tr.at(prob.t_data[i]);
        x[4] = prob.p1_data[i];
        x[5] = prob.p2_data[i];
        e.xd.row(static_cast<Eigen::Index>(i)) = x.transpose();
    }
    return e;
}

TrainingSchedule short_schedule(long epochs, long max_sa) {
    TrainingSchedule s = default_schedule(1, Scenario::Simulated);
    s.stages.resize(1);
    s.stages[0].begin = 0;
    s.stages[0].end = epochs;
    s.stages[0].max_sa = max_sa;
    s.stages[0].ramps.clear();
    return s;
}

}  // namespace

TEST_SUITE("pinn") {

TEST_CASE("output scale endpoints") {
    ScalingBounds b;
    b.min << 0.001, 200, 0.001, 0.001, -5e5, 0;
    b.max << 0.01, 320, 0.012, 0.011, -1e5, 2e5;
    const auto lo = output_scale(StateVector::Array::Constant(-1), b).to_array();
    const auto hi = output_scale(StateVector::Array::Constant(1), b).to_array();
    const auto mid = output_scale(StateVector::Array::Zero(), b).to_array();
    for (int i = 0; i < 6; ++i) {
        CHECK(lo[i] == doctest::Approx(b.min[i]).epsilon(1e-15));
        CHECK(hi[i] == doctest::Approx(b.max[i]).epsilon(1e-15));
        CHECK(mid[i] == doctest::Approx((b.min[i] + b.max[i]) / 2).epsilon(1e-15));
    }
    b.max[1] = b.min[1];
    CHECK_THROWS_AS(b.check(), ValidationError);
}

TEST_CASE("parameter transforms") {
    CHECK(transform_parameter(0.0, {TransformKind::Bounded, 1, 1.31e9, 0.15}) == doctest::Approx(1.31e9));
    CHECK(transform_parameter(0.0, {TransformKind::Softminus, 1000, 1, 0.5}) ==
          doctest::Approx(306.85).epsilon(1e-5));
    CHECK(transform_parameter(0.0, {TransformKind::SoftplusShift, 1e9, 1, 0.5}) ==
          doctest::Approx(1.59315e9).epsilon(1e-5));
    CHECK(transform_parameter(2.5, {TransformKind::Linear, 40, 1, 0.5}) == doctest::Approx(100.0));
    for (auto kind : {TransformKind::SoftplusShift, TransformKind::Linear, TransformKind::Softminus,
                      TransformKind::Bounded}) {
        const ParameterTransform xf{kind, 7.0, 3.0, 0.4};
        for (double raw : {-1.5, 0.0, 0.8}) {
            ad::Tape tape;
            auto v = transform_parameter(tape, tape.scalar(raw, true), xf);
            CHECK(v.scalar() == doctest::Approx(transform_parameter(raw, xf)).epsilon(1e-14));
            CHECK(inverse_transform(transform_parameter(raw, xf), xf) == doctest::Approx(raw).epsilon(1e-9));
        }
    }
    CHECK_THROWS_AS(ParameterTransform({TransformKind::Bounded, 1, 1, 1.5}).check(), ValidationError);
    CHECK_THROWS_AS(ParameterTransform({TransformKind::Linear, 0, 1, 0.5}).check(), ValidationError);
}

TEST_CASE("bounded transform never leaves its open interval") {
    const ParameterTransform xf{TransformKind::Bounded, 1, 1.31e9, 0.15};
    const auto [lo, hi] = transform_range(xf);
    CHECK(lo == doctest::Approx(1.31e9 * 0.85));
    CHECK(hi == doctest::Approx(1.31e9 * 1.15));
    std::mt19937_64 rng(99);
    std::normal_distribution<double> nd(0.0, 3.0);
    for (int i = 0; i < 1000000; ++i) {
        const double v = transform_parameter(nd(rng), xf);
        if (!(v > lo && v < hi)) {
            FAIL("out of range: " << v);
        }
    }
    CHECK(transform_parameter(40.0, xf) <= hi);
    CHECK(transform_parameter(-40.0, xf) >= lo);
}

TEST_CASE("case unknowns and transforms") {
    CHECK(case_unknowns(1).size() == 3);
    CHECK(case_unknowns(2).size() == 7);
    CHECK(case_unknowns(3).size() == 8);
    CHECK_THROWS_AS(case_unknowns(4), ValidationError);
    const auto truth = preset_investigation(1);
    const auto t3 = case_transforms(3, truth);
    REQUIRE(t3.size() == 8);
    CHECK(t3[0].kind == TransformKind::Bounded);
    CHECK(t3[0].alpha == doctest::Approx(0.15));
    CHECK(t3[0].anchor == truth.B);
    for (std::size_t i = 1; i < t3.size(); ++i) CHECK(t3[i].alpha == doctest::Approx(0.5));
}

TEST_CASE("unit conversion round trip") {
    std::mt19937_64 rng(1);
    std::uniform_real_distribution<double> ud(-1e6, 1e6);
    for (int k = 0; k < 100; ++k) {
        StateVector::Array x;
        for (int i = 0; i < 6; ++i) x[i] = ud(rng);
        const auto y = engineering_to_si(si_to_engineering(x));
        for (int i = 0; i < 6; ++i) CHECK(std::abs(y[i] - x[i]) <= 1e-12 * std::abs(x[i]));
    }
    StateVector::Array one = StateVector::Array::Ones();
    const auto e = si_to_engineering(one);
    CHECK(e[0] == 3600.0);
    CHECK(e[4] == doctest::Approx(1.0 / 9806.65).epsilon(1e-15));
}

TEST_CASE("bounds system recovers an exact root") {
    const auto p = bounds_guess_params(preset_investigation(1));
    CHECK(p.rho == doctest::Approx(931.51));
    CHECK(p.k1p == doctest::Approx(1.15 * preset_investigation(1).k1p));
    for (auto [w, q] : {std::pair{280.0, 0.0085}, std::pair{310.0, 0.0095}}) {
        const double dP = p.rho * (p.k1p * w * q + p.k2p * w * w + p.k4p * q * q);
        const double gamma = -(p.k1s * p.rho * q * q - p.k2s * p.rho * w * q);
        const auto r = solve_bounds_system(p, dP, gamma);
        CHECK(r.omega == doctest::Approx(w).epsilon(1e-10));
        CHECK(r.Qp == doctest::Approx(q).epsilon(1e-10));
    }
}

TEST_CASE("speed bounds bracket the simulated trajectory") {
    const auto& sc = inv1_simulated();
    const auto est = estimate_state_bounds(sc.measurements, sc.torque, bounds_guess_params(sc.truth));
    const auto& w = sc.truth_states["omega_rads"];
    const auto [wmin, wmax] = std::minmax_element(w.begin(), w.end());
    CHECK(est.bounds.min[1] <= *wmin);
    CHECK(est.bounds.max[1] >= 0.95 * *wmax);
}

TEST_CASE("bounds follow argmin/argmax of the pressure difference") {
    const auto& sc = inv1_simulated();
    const auto guess = bounds_guess_params(sc.truth);
    const auto est = estimate_state_bounds(sc.measurements, sc.torque, guess);
    CHECK(est.bounds.min[2] == est.bounds.min[0]);
    CHECK(est.bounds.max[3] == est.bounds.max[0]);
    CHECK(est.bounds.min[4] == *std::min_element(sc.measurements["P1_Pa"].begin(), sc.measurements["P1_Pa"].end()));
    const auto& p1 = sc.measurements["P1_Pa"];
    const auto& p2 = sc.measurements["P2_Pa"];
    double dmin = 1e300, dmax = -1e300, d1 = 0, d2 = 0;
    for (std::size_t i = 0; i < p1.size(); ++i) {
        const double d = p2[i] - p1[i];
        dmin = std::min(dmin, d);
        dmax = std::max(dmax, d);
        if (sc.measurements.t[i] == est.t1) d1 = d;
        if (sc.measurements.t[i] == est.t2) d2 = d;
    }
    CHECK(d1 == dmin);
    CHECK(d2 == dmax);

    TimeSeries m = sc.measurements;
    const double c1 = m["P1_Pa"].front(), c2 = m["P2_Pa"].front();
    for (auto& v : m["P1_Pa"]) v = c1 + 2 * (v - c1);
    for (auto& v : m["P2_Pa"]) v = c2 + 2 * (v - c2);
    const auto est2 = estimate_state_bounds(m, sc.torque, guess);
    CHECK(est2.t1 == est.t1);
    CHECK(est2.t2 == est.t2);

    TimeSeries flat = sc.measurements;
    for (auto& v : flat["P1_Pa"]) v = 0;
    for (auto& v : flat["P2_Pa"]) v = 1e5;
    CHECK_THROWS(estimate_state_bounds(flat, sc.torque, guess));
}

TEST_CASE("loss vanishes on the exact trajectory") {
    const auto prob = inv1_problem(1);
    PinnLoss loss(prob);
    CHECK(loss.collocation_times().size() == 100);
    const auto e = exact_states(loss);
    const auto raw_p = true_raw_params(prob);
    const auto raw_sa = raw_weights(default_schedule(1, Scenario::Simulated));
    const auto exact = loss.evaluate_states(e.xc, e.dxc, e.xd, raw_p, raw_sa);
    const auto off = loss.evaluate_states(e.xc * 1.01, e.dxc, e.xd * 1.01, raw_p, raw_sa);
    for (int s = 0; s < 6; ++s) {
        CAPTURE(s);
        CHECK(exact.physics_mse[static_cast<std::size_t>(s)] <= 1e-6 * off.physics_mse[static_cast<std::size_t>(s)]);
        CHECK(exact.ic_sq[static_cast<std::size_t>(s)] <= 1e-6 * std::max(off.ic_sq[static_cast<std::size_t>(s)], 1e-30));
    }
    CHECK(exact.data_mse[0] <= 1e-20);
    CHECK(exact.data_mse[1] <= 1e-20);
}

TEST_CASE("residual doubling quadruples the physics term") {
    const auto prob = inv1_problem(1);
    PinnLoss loss(prob);
    const auto e = exact_states(loss);
    const auto raw_p = true_raw_params(prob);
    const auto raw_sa = raw_weights(default_schedule(1, Scenario::Simulated));
    Eigen::MatrixXd delta = Eigen::MatrixXd::Zero(e.dxc.rows(), 6);
    std::mt19937_64 rng(2);
    std::normal_distribution<double> nd;
    for (Eigen::Index i = 0; i < delta.rows(); ++i)
        for (int j = 0; j < 6; ++j) delta(i, j) = 1e-3 * nd(rng) * (j < 4 ? 1e-2 : 1e5) * (j == 1 ? 1e4 : 1);
    const auto a = loss.evaluate_states(e.xc, e.dxc + delta, e.xd, raw_p, raw_sa);
    const auto b = loss.evaluate_states(e.xc, e.dxc + 2 * delta, e.xd, raw_p, raw_sa);
    CHECK(b.physics == doctest::Approx(4 * a.physics).epsilon(1e-6));
    for (int s = 0; s < 6; ++s)
        CHECK(b.physics_mse[static_cast<std::size_t>(s)] ==
              doctest::Approx(4 * a.physics_mse[static_cast<std::size_t>(s)]).epsilon(1e-6));
}

TEST_CASE("softplus mask at raw -20 silences the loss") {
    const auto prob = inv1_problem(1);
    PinnLoss loss(prob);
    auto tr = init_trainables(prob, default_schedule(1, Scenario::Simulated), 5);
    tr.raw_sa.setZero();
    const double open = loss.evaluate(tr).total;
    tr.raw_sa.setConstant(-20.0);
    const auto masked = loss.evaluate(tr);
    CHECK(masked.total < 1e-8 * open);
    CHECK(masked.total == doctest::Approx(ad::softplus(-20.0) / std::log(2.0) * open).epsilon(1e-9));
}

TEST_CASE("self-adaptive ascent does not decrease the loss") {
    const auto prob = inv1_problem(1);
    PinnLoss loss(prob);
    for (std::uint64_t seed : {1u, 2u, 3u}) {
        auto tr = init_trainables(prob, default_schedule(1, Scenario::Simulated), seed);
        LossGradients g;
        const double before = loss.evaluate(tr, &g).total;
        AdamState sa(g.sa.size());
        const Eigen::VectorXd ascent = -g.sa;
        adam_step(sa, tr.raw_sa, ascent, 8e-4);
        CHECK(loss.evaluate(tr).total >= before - 1e-12);
    }
}

TEST_CASE("loss gradients pass directional finite-difference checks") {
    const auto prob = inv1_problem(1);
    PinnLoss loss(prob);
    const auto tr = init_trainables(prob, default_schedule(1, Scenario::Simulated), 7);
    CHECK(directional_fd_error(loss, tr, Group::Nn, 1, 1e-4) < 1e-5);
    CHECK(directional_fd_error(loss, tr, Group::Ps, 1, 1e-4) < 1e-5);
    CHECK(directional_fd_error(loss, tr, Group::Sa, 1, 1e-4) < 1e-5);
}

TEST_CASE("trainable initialization") {
    const auto prob = inv1_problem(3);
    const auto sched = default_schedule(3, Scenario::Simulated);
    const auto tr = init_trainables(prob, sched, 4);
    CHECK(tr.raw_params.size() == 8);
    CHECK(tr.raw_params.isZero());
    CHECK(tr.raw_sa.size() == kSaCount);
    const auto raw = raw_weights(sched);
    for (int i = 0; i < kSaCount; ++i) CHECK(tr.raw_sa[i] == raw[i]);
    CHECK(ad::softplus(raw[0]) == doctest::Approx(sched.w_physics[0]).epsilon(1e-9));
    CHECK(ad::softplus(raw[6]) == doctest::Approx(sched.w_data).epsilon(1e-12));
    const auto est = estimated_parameters(prob, tr);
    CHECK(est[0] == doctest::Approx(prob.known.B));
}

TEST_CASE("schedule json round trip and scaling") {
    for (int c : {1, 2, 3})
        for (auto s : {Scenario::Simulated, Scenario::Experimental}) {
            const auto a = default_schedule(c, s);
            CHECK_NOTHROW(a.check());
            const auto b = schedule_from_json(schedule_to_json(a));
            CHECK(schedule_to_json(b) == schedule_to_json(a));
        }
    const auto s1 = default_schedule(1, Scenario::Simulated);
    CHECK(s1.total_epochs() == 60000);
    CHECK(default_schedule(2, Scenario::Simulated).total_epochs() == 83000);
    CHECK(default_schedule(3, Scenario::Simulated).total_epochs() == 90000);
    CHECK(s1.lr("nn", 0) == doctest::Approx(1e-3));
    CHECK(s1.lr("nn", 35000) == doctest::Approx(2e-5));
    CHECK(s1.sa_active(11999));
    CHECK_FALSE(s1.sa_active(12000));
    const auto h = s1.scaled(0.5);
    CHECK(h.total_epochs() == 30000);
    CHECK(h.stages[0].max_sa == 6000);
    TrainingSchedule bad = s1;
    bad.stages[1].begin += 5;
    CHECK_THROWS_AS(bad.check(), ValidationError);
    CHECK(parse_scenario("noisy") == Scenario::Noisy);
    CHECK(scenario_name(Scenario::Experimental) == "exp");
}

TEST_CASE("training is deterministic per seed") {
    const auto prob = inv1_problem(1);
    const auto sched = short_schedule(200, 100);
    const auto a = train(prob, sched, 11);
    const auto b = train(prob, sched, 11);
    CHECK(a.estimates == b.estimates);
    CHECK(a.trained.net.flatten() == b.trained.net.flatten());
    const auto c = train(prob, sched, 12);
    CHECK(c.trained.net.flatten() != a.trained.net.flatten());
}

TEST_CASE("frozen-weight training decreases the loss") {
    const auto prob = inv1_problem(1);
    const auto sched = short_schedule(1000, 0);
    TrainOptions opts;
    opts.log_every = 100;
    std::vector<double> totals;
    opts.on_log = [&](const EpochRecord& r) { totals.push_back(r.loss.total); };
    train(prob, sched, 3, opts);
    REQUIRE(totals.size() >= 10);
    for (std::size_t i = 1; i < totals.size(); ++i) {
        CAPTURE(i);
        CHECK(totals[i] < totals[i - 1]);
    }
}

}  // TEST_SUITE
