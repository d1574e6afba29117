#include <doctest.h>

#include <cmath>
#include <numbers>
#include <numeric>

#include "espvfm/model.hpp"
#include "espvfm/sim.hpp"

using namespace espvfm;

namespace {

EspParams inv1() { return preset_investigation(1); }

TorqueSignal step_torque(const EspParams& p, double t_end) {
    const double g0 = operating_point_at_speed(p, 272.27).torque;
    const double g1 = operating_point_at_speed(p, 314.16).torque;
    std::vector<double> t, g;
    for (int i = 0; i <= static_cast<int>(t_end * 100); ++i) {
        const double ti = i * 0.01;
        t.push_back(ti);
        g.push_back(ti < 1.0 ? g0 : (ti < 2.0 ? g0 + (g1 - g0) * (ti - 1.0) : g1));
    }
    return TorqueSignal(t, g);
}

}  // namespace

TEST_SUITE("sim") {

TEST_CASE("dopri5 error shrinks with tolerance") {
    auto f = [](double, const Vec<1>& y) { return Vec<1>(-y); };
    double prev = 1.0;
    for (double tol : {1e-4, 1e-6, 1e-8, 1e-10}) {
        IntegrateOptions o{tol, tol};
        const auto y = dopri5<1>(f, 0.0, 2.0, Vec<1>(1.0), o);
        const double err = std::abs(y[0] - std::exp(-2.0));
        CAPTURE(tol);
        CHECK(err < 10 * tol);
        CHECK(err < prev);
        prev = err;
    }
}

TEST_CASE("dopri5 time reversal on a harmonic oscillator") {
    auto f = [](double, const Vec<2>& y) { return Vec<2>(y[1], -y[0]); };
    IntegrateOptions o{1e-11, 1e-11};
    const Vec<2> y0(1.0, 0.0);
    const Vec<2> y1 = dopri5<2>(f, 0.0, 5.0, y0, o);
    CHECK(y1[0] == doctest::Approx(std::cos(5.0)).epsilon(1e-8));
    const Vec<2> back = dopri5<2>(f, 5.0, 0.0, y1, o);
    CHECK((back - y0).norm() < 1e-8);
}

TEST_CASE("rk4 fourth-order convergence") {
    auto f = [](double t, const Vec<1>& y) { return Vec<1>(std::cos(t) * y[0]); };
    const double exact = std::exp(std::sin(1.0));
    const double e1 = std::abs(rk4<1>(f, 0.0, 1.0, Vec<1>(1.0), 0.1)[0] - exact);
    const double e2 = std::abs(rk4<1>(f, 0.0, 1.0, Vec<1>(1.0), 0.05)[0] - exact);
    CHECK(std::log2(e1 / e2) == doctest::Approx(4.0).epsilon(0.05));
}

TEST_CASE("torque signal interpolation") {
    TorqueSignal s({0.0, 1.0, 2.0}, {10.0, 20.0, 0.0});
    CHECK(s(0.5) == doctest::Approx(15.0));
    CHECK(s(1.5) == doctest::Approx(10.0));
    CHECK(s.covers(0.0, 2.0));
    CHECK_FALSE(s.covers(0.0, 2.5));
    TorqueSignal::Cursor c(s);
    CHECK(c(0.25) == doctest::Approx(12.5));
    CHECK(c(1.75) == doctest::Approx(5.0));
    CHECK_THROWS_AS(TorqueSignal({0.0, 0.0}, {1.0, 2.0}), ValidationError);
}

TEST_CASE("integration restart property") {
    const auto p = inv1();
    const auto tq = step_torque(p, 3.0);
    const auto op = operating_point_at_speed(p, 272.27);
    const auto x0 = steady_state(p, op.torque, op.state);
    const auto full = integrate_terminal(p, x0, tq, 0.0, 3.0);
    const auto half = integrate_terminal(p, x0, tq, 0.0, 1.5);
    const auto rest = integrate_terminal(p, half, tq, 1.5, 3.0);
    const auto a = full.to_array(), b = rest.to_array();
    for (int i = 0; i < 6; ++i) CHECK(b[i] == doctest::Approx(a[i]).epsilon(1e-6));
}

TEST_CASE("trajectory interpolation reproduces stored steps") {
    const auto p = inv1();
    const auto tq = step_torque(p, 2.0);
    const auto op = operating_point_at_speed(p, 272.27);
    const auto tr = integrate(p, op.state, tq, 0.0, 2.0);
    REQUIRE(tr.t.size() > 10);
    const std::size_t k = tr.t.size() / 2;
    CHECK((tr.at(tr.t[k]) - tr.x[k]).norm() == doctest::Approx(0.0));
    CHECK(tr.stats.accepted > 0);
    const auto grid = integrate_on_grid(p, op.state, tq, {0.0, 1.0, 2.0});
    for (int i = 0; i < 6; ++i)
        CHECK(grid[2][i] == doctest::Approx(tr.x.back()[i]).epsilon(1e-6));
}

TEST_CASE("steady state agrees with a long integration") {
    const auto p = inv1();
    const auto op = operating_point_at_speed(p, 290.0);
    const auto xs = steady_state(p, op.torque, op.state);
    StateVector start = xs;
    start.omega *= 0.98;
    start.P1 *= 0.95;
    const auto xe = integrate_terminal(p, start, TorqueSignal::constant(op.torque, 0.0, 100.0), 0.0,
                                       100.0, {1e-9, 1e-9});
    const auto a = xs.to_array(), b = xe.to_array();
    for (int i = 0; i < 6; ++i) CHECK(b[i] == doctest::Approx(a[i]).epsilon(1e-5));
}

TEST_CASE("steady speed increases with torque") {
    const auto p = inv1();
    const auto op = operating_point_at_speed(p, 280.0);
    double prev = 0;
    for (double dg : {-2.0, 0.0, 2.0, 4.0}) {
        const auto xs = steady_state(p, op.torque + dg, op.state);
        CHECK(xs.omega > prev);
        prev = xs.omega;
    }
}

TEST_CASE("operating point is a steady state") {
    for (int inv : {1, 2}) {
        const auto p = preset_investigation(inv);
        for (double w : {250.0, 280.0, 314.16}) {
            const auto op = operating_point_at_speed(p, w);
            CHECK(op.state.omega == doctest::Approx(w));
            CHECK(scaled_residual_norm(p, op.torque, op.state) < 1e-8);
        }
    }
}

TEST_CASE("fixed resampling of a series") {
    TimeSeries ts;
    for (int i = 0; i <= 200; ++i) ts.t.push_back(i * 0.01);
    std::vector<double> lin, sn;
    for (double t : ts.t) {
        lin.push_back(3.0 * t - 1.0);
        sn.push_back(std::sin(2.0 * std::numbers::pi * t));
    }
    ts.add("a_m", lin);
    ts.add("b_m", sn);
    const auto r = resample_fixed(ts, 0.05);
    CHECK(r.size() == 41);
    for (std::size_t i = 0; i < r.size(); ++i) {
        CHECK(r["a_m"][i] == doctest::Approx(3.0 * r.t[i] - 1.0).epsilon(1e-12));
        CHECK(std::abs(r["b_m"][i] - std::sin(2.0 * std::numbers::pi * r.t[i])) < 1e-4);
    }
    const auto same = resample_fixed(ts, 0.01);
    for (std::size_t i = 0; i < same.size(); ++i) CHECK(same["b_m"][i] == doctest::Approx(ts["b_m"][i]));
}

TEST_CASE("gaussian noise statistics and determinism") {
    TimeSeries ts;
    const int n = 20000;
    for (int i = 0; i < n; ++i) ts.t.push_back(i);
    ts.add("P1_Pa", std::vector<double>(n, 1e5));
    ts.add("omega_rads", std::vector<double>(n, 300.0));
    NoiseSpec spec{{{"P1_Pa", kPressureSigmaPa}}, 42};
    const auto a = add_gaussian_noise(ts, spec);
    const auto b = add_gaussian_noise(ts, spec);
    double m = 0, v = 0;
    for (int i = 0; i < n; ++i) m += a["P1_Pa"][i] - 1e5;
    m /= n;
    for (int i = 0; i < n; ++i) v += std::pow(a["P1_Pa"][i] - 1e5 - m, 2);
    const double sd = std::sqrt(v / (n - 1));
    CHECK(std::abs(sd / kPressureSigmaPa - 1.0) < 0.03);
    CHECK(std::abs(m) < 4 * kPressureSigmaPa / std::sqrt(n));
    CHECK(a["P1_Pa"] == b["P1_Pa"]);
    CHECK(a["omega_rads"] == ts["omega_rads"]);
    spec.seed = 43;
    CHECK(add_gaussian_noise(ts, spec)["P1_Pa"] != a["P1_Pa"]);
}

}  // TEST_SUITE
