#pragma once

#include <cmath>
#include <cstdint>
#include <limits>
#include <map>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "espvfm/errors.hpp"
#include "espvfm/model.hpp"
#include "espvfm/timeseries.hpp"

namespace espvfm {

/// Shaft torque input, linearly interpolated between samples.
class TorqueSignal {
public:
    TorqueSignal() = default;
    TorqueSignal(std::vector<double> t, std::vector<double> gamma);

    static TorqueSignal constant(double gamma, double t0, double t1);
    static TorqueSignal from_series(const TimeSeries& ts, const std::string& channel = "torque_Nm");
    TimeSeries to_series() const;

    double operator()(double t) const;
    double t_begin() const { return t_.front(); }
    double t_end() const { return t_.back(); }
    bool covers(double t0, double t1) const;
    const std::vector<double>& times() const { return t_; }
    const std::vector<double>& values() const { return g_; }

    /// Interpolator with a cached interval, for monotone query sequences.
    class Cursor {
    public:
        explicit Cursor(const TorqueSignal& s) : s_(&s) {}
        double operator()(double t);

    private:
        const TorqueSignal* s_;
        std::size_t i_ = 0;
    };

private:
    std::vector<double> t_, g_;
};

struct IntegrateOptions {
    double rtol = 1e-8;
    double atol = 1e-8;
    double h0 = 0;  // 0 selects an initial step automatically
    double hmax = std::numeric_limits<double>::infinity();
    long max_steps = 200'000'000;
};

struct StepStats {
    long accepted = 0;
    long rejected = 0;
    long rhs_evals = 0;
};

/// Raised by the generic integrator; carries the last good time.
class IntegrationFailure : public NumericalError {
public:
    IntegrationFailure(const std::string& what, double last_t, int component = -1)
        : NumericalError(what), last_good_t(last_t), bad_component(component) {}
    double last_good_t;
    int bad_component;
};

template <int N>
using Vec = Eigen::Matrix<double, N, 1>;

/// Cubic Hermite interpolation on [t0, t1].
template <class V>
V hermite(double t0, const V& y0, const V& f0, double t1, const V& y1, const V& f1, double t) {
    const double h = t1 - t0;
    const double s = (t - t0) / h;
    const double s2 = s * s, s3 = s2 * s;
    const double h00 = 2 * s3 - 3 * s2 + 1, h10 = s3 - 2 * s2 + s;
    const double h01 = -2 * s3 + 3 * s2, h11 = s3 - s2;
    return h00 * y0 + (h10 * h) * f0 + h01 * y1 + (h11 * h) * f1;
}

/// Dormand-Prince 5(4) with PI step control. on_step(t0, y0, f0, t1, y1, f1)
/// is called for every accepted step. Integrates backwards when t1 < t0.
template <int N, class F, class OnStep>
Vec<N> dopri5(F&& f, double t0, double t1, Vec<N> y, const IntegrateOptions& o, OnStep&& on_step,
              StepStats* stats = nullptr) {
    using V = Vec<N>;
    constexpr double c2 = 1.0 / 5, c3 = 3.0 / 10, c4 = 4.0 / 5, c5 = 8.0 / 9;
    constexpr double a21 = 1.0 / 5;
    constexpr double a31 = 3.0 / 40, a32 = 9.0 / 40;
    constexpr double a41 = 44.0 / 45, a42 = -56.0 / 15, a43 = 32.0 / 9;
    constexpr double a51 = 19372.0 / 6561, a52 = -25360.0 / 2187, a53 = 64448.0 / 6561,
                     a54 = -212.0 / 729;
    constexpr double a61 = 9017.0 / 3168, a62 = -355.0 / 33, a63 = 46732.0 / 5247,
                     a64 = 49.0 / 176, a65 = -5103.0 / 18656;
    constexpr double a71 = 35.0 / 384, a73 = 500.0 / 1113, a74 = 125.0 / 192,
                     a75 = -2187.0 / 6784, a76 = 11.0 / 84;
    constexpr double e1 = 71.0 / 57600, e3 = -71.0 / 16695, e4 = 71.0 / 1920,
                     e5 = -17253.0 / 339200, e6 = 22.0 / 525, e7 = -1.0 / 40;
    constexpr double beta = 0.04, expo1 = 0.2 - beta * 0.75, safe = 0.9;

    StepStats local;
    StepStats& st = stats ? *stats : local;
    const double span = t1 - t0;
    if (span == 0.0) return y;
    const double dir = span > 0 ? 1.0 : -1.0;

    auto err_norm = [&](const V& e, const V& ya, const V& yb) {
        double acc = 0;
        for (int i = 0; i < y.size(); ++i) {
            const double sc = o.atol + o.rtol * std::max(std::abs(ya[i]), std::abs(yb[i]));
            acc += (e[i] / sc) * (e[i] / sc);
        }
        return std::sqrt(acc / static_cast<double>(y.size()));
    };

    double t = t0;
    V k1 = f(t, y);
    ++st.rhs_evals;
    for (int i = 0; i < y.size(); ++i)
        if (!std::isfinite(k1[i]))
            throw IntegrationFailure("non-finite derivative at start", t, i);

    double h = o.h0;
    if (h <= 0) {
        const V zero = V::Zero(y.size());
        const double d0 = err_norm(y, y, zero);
        const double d1 = err_norm(k1, y, y);
        double h0 = (d0 < 1e-5 || d1 < 1e-5) ? 1e-6 : 0.01 * d0 / d1;
        h0 = std::min(h0, std::abs(span));
        const V y1 = y + dir * h0 * k1;
        const V f1 = f(t + dir * h0, y1);
        ++st.rhs_evals;
        const double d2 = err_norm(f1 - k1, y, y) / h0;
        const double h1 = std::max(d1, d2) <= 1e-15 ? std::max(1e-6, h0 * 1e-3)
                                                     : std::pow(0.01 / std::max(d1, d2), 0.2);
        h = std::min(100 * h0, h1);
    }
    h = std::min(h, o.hmax);

    double facold = 1e-4;
    bool last_rejected = false;
    long steps = 0;
    while (dir * (t1 - t) > 0) {
        if (++steps > o.max_steps) throw IntegrationFailure("maximum step count exceeded", t);
        bool last = false;
        if (h >= std::abs(t1 - t)) {
            h = std::abs(t1 - t);
            last = true;
        }
        if (h < 1e-14 * std::max(1.0, std::abs(t)))
            throw IntegrationFailure("step size underflow", t);
        const double hs = dir * h;
        const V k2 = f(t + c2 * hs, V(y + hs * (a21 * k1)));
        const V k3 = f(t + c3 * hs, V(y + hs * (a31 * k1 + a32 * k2)));
        const V k4 = f(t + c4 * hs, V(y + hs * (a41 * k1 + a42 * k2 + a43 * k3)));
        const V k5 = f(t + c5 * hs, V(y + hs * (a51 * k1 + a52 * k2 + a53 * k3 + a54 * k4)));
        const V k6 = f(t + hs, V(y + hs * (a61 * k1 + a62 * k2 + a63 * k3 + a64 * k4 + a65 * k5)));
        const V ynew = y + hs * (a71 * k1 + a73 * k3 + a74 * k4 + a75 * k5 + a76 * k6);
        const V k7 = f(t + hs, ynew);
        st.rhs_evals += 6;
        const V e = hs * (e1 * k1 + e3 * k3 + e4 * k4 + e5 * k5 + e6 * k6 + e7 * k7);
        double err = err_norm(e, y, ynew);
        if (!std::isfinite(err) || !k7.allFinite()) err = std::numeric_limits<double>::infinity();

        const double fac11 = std::isfinite(err) ? std::pow(err, expo1) : 1e3;
        if (err <= 1.0) {
            double fac = fac11 / std::pow(facold, beta);
            fac = std::max(0.1, std::min(5.0, fac / safe));
            double hnew = h / fac;
            facold = std::max(err, 1e-4);
            const double tnew = last ? t1 : t + hs;
            on_step(t, y, k1, tnew, ynew, k7);
            t = tnew;
            y = ynew;
            k1 = k7;
            ++st.accepted;
            if (last_rejected) hnew = std::min(hnew, h);
            last_rejected = false;
            h = std::min(hnew, o.hmax);
        } else {
            h = h / std::min(5.0, std::max(1.0, fac11 / safe));
            last_rejected = true;
            ++st.rejected;
        }
    }
    return y;
}

template <int N, class F>
Vec<N> dopri5(F&& f, double t0, double t1, const Vec<N>& y, const IntegrateOptions& o,
              StepStats* stats = nullptr) {
    return dopri5<N>(std::forward<F>(f), t0, t1, y, o,
                     [](double, const Vec<N>&, const Vec<N>&, double, const Vec<N>&,
                        const Vec<N>&) {},
                     stats);
}

/// Classical fixed-step RK4; the last step is shortened to land on t1.
template <int N, class F>
Vec<N> rk4(F&& f, double t0, double t1, Vec<N> y, double dt) {
    const long n = static_cast<long>(std::ceil((t1 - t0) / dt - 1e-9));
    for (long i = 0; i < n; ++i) {
        const double t = t0 + static_cast<double>(i) * dt;
        const double h = std::min(dt, t1 - t);
        const Vec<N> k1 = f(t, y);
        const Vec<N> k2 = f(t + h / 2, Vec<N>(y + h / 2 * k1));
        const Vec<N> k3 = f(t + h / 2, Vec<N>(y + h / 2 * k2));
        const Vec<N> k4 = f(t + h, Vec<N>(y + h * k3));
        y += h / 6 * (k1 + 2 * k2 + 2 * k3 + k4);
    }
    return y;
}

using State6 = StateVector::Array;

/// Accepted solver steps with their derivatives, for Hermite dense output.
struct Trajectory {
    std::vector<double> t;
    std::vector<State6> x;
    std::vector<State6> dx;
    StepStats stats;

    StateVector back() const { return StateVector::from_array(x.back()); }
    State6 at(double time) const;
    TimeSeries series() const;
};

Trajectory integrate(const EspParams& p, const StateVector& x0, const TorqueSignal& torque,
                     double t0, double t1, const IntegrateOptions& opts = {});

/// Terminal state only, without storing steps.
StateVector integrate_terminal(const EspParams& p, const StateVector& x0,
                               const TorqueSignal& torque, double t0, double t1,
                               const IntegrateOptions& opts = {}, StepStats* stats = nullptr);

/// States at the given increasing times (grid.front() is the start time).
std::vector<State6> integrate_on_grid(const EspParams& p, const StateVector& x0,
                                      const TorqueSignal& torque, const std::vector<double>& grid,
                                      const IntegrateOptions& opts = {});

StateVector integrate_rk4(const EspParams& p, const StateVector& x0, const TorqueSignal& torque,
                          double t0, double t1, double dt);

/// Damped Newton on the per-state scaled residual.
StateVector steady_state(const EspParams& p, double torque, const StateVector& guess,
                         int max_iter = 100);
double scaled_residual_norm(const EspParams& p, double torque, const StateVector& x);

/// Cubic Hermite resampling on t0, t0 + dt, ... . Slopes come from the
/// stored derivatives for trajectories and from three-point differences for
/// plain series.
TimeSeries resample_fixed(const Trajectory& traj, double dt);
TimeSeries resample_fixed(const TimeSeries& ts, double dt);

struct NoiseSpec {
    std::map<std::string, double> sigma;  // channel -> absolute std
    std::uint64_t seed = 0;
};

/// Transmitter accuracy 0.065% of a 200 kPa span.
inline constexpr double kPressureSigmaPa = 130.0;

TimeSeries add_gaussian_noise(const TimeSeries& ts, const NoiseSpec& spec);

}  // namespace espvfm
