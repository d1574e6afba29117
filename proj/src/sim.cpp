#include "espvfm/sim.hpp"

#include <algorithm>
#include <iostream>
#include <random>

#include <Eigen/LU>

namespace espvfm {

TorqueSignal::TorqueSignal(std::vector<double> t, std::vector<double> gamma)
    : t_(std::move(t)), g_(std::move(gamma)) {
    if (t_.empty() || t_.size() != g_.size())
        throw ValidationError("torque signal needs matching, non-empty time and value arrays");
    for (std::size_t i = 0; i < t_.size(); ++i) {
        if (!std::isfinite(t_[i]) || !std::isfinite(g_[i]))
            throw ValidationError("torque signal not finite at sample " + std::to_string(i));
        if (i > 0 && !(t_[i] > t_[i - 1]))
            throw ValidationError("torque times not strictly increasing at sample " +
                                  std::to_string(i));
    }
}

TorqueSignal TorqueSignal::constant(double gamma, double t0, double t1) {
    if (!(t1 > t0)) return TorqueSignal({t0}, {gamma});
    return TorqueSignal({t0, t1}, {gamma, gamma});
}

TorqueSignal TorqueSignal::from_series(const TimeSeries& ts, const std::string& channel) {
    return TorqueSignal(ts.t, ts[channel]);
}

TimeSeries TorqueSignal::to_series() const {
    TimeSeries ts;
    ts.t = t_;
    ts.add("torque_Nm", g_);
    return ts;
}

bool TorqueSignal::covers(double t0, double t1) const {
    const double lo = std::min(t0, t1), hi = std::max(t0, t1);
    const double slack = 1e-9 * std::max(1.0, std::abs(hi));
    return !t_.empty() && t_.front() <= lo + slack && t_.back() >= hi - slack;
}

double TorqueSignal::operator()(double t) const {
    if (t_.size() == 1 || t <= t_.front()) return g_.front();
    if (t >= t_.back()) return g_.back();
    const auto it = std::upper_bound(t_.begin(), t_.end(), t);
    const std::size_t i = static_cast<std::size_t>(it - t_.begin()) - 1;
    const double w = (t - t_[i]) / (t_[i + 1] - t_[i]);
    return g_[i] + w * (g_[i + 1] - g_[i]);
}

double TorqueSignal::Cursor::operator()(double t) {
    const auto& ts = s_->t_;
    const auto& gs = s_->g_;
    if (ts.size() == 1 || t <= ts.front()) return gs.front();
    if (t >= ts.back()) return gs.back();
    if (i_ + 1 >= ts.size() || ts[i_] > t) i_ = 0;
    while (ts[i_ + 1] < t) ++i_;
    const double w = (t - ts[i_]) / (ts[i_ + 1] - ts[i_]);
    return gs[i_] + w * (gs[i_ + 1] - gs[i_]);
}

namespace {

void check_inputs(const StateVector& x0, const TorqueSignal& torque, double t0, double t1) {
    const auto a = x0.to_array();
    for (int i = 0; i < 6; ++i)
        if (!std::isfinite(a[i]))
            throw ValidationError("initial state " + std::string(kStateNames[i]) + " is not finite");
    if (!torque.covers(t0, t1))
        throw ValidationError("torque signal does not cover [" + std::to_string(t0) + ", " +
                              std::to_string(t1) + "]");
}

template <class Body>
auto with_named_failure(Body&& body) {
    try {
        return body();
    } catch (const IntegrationFailure& e) {
        std::string msg = std::string("integration failed at t = ") + std::to_string(e.last_good_t) +
                          ": " + e.what();
        if (e.bad_component >= 0 && e.bad_component < 6)
            msg += " (state " + std::string(kStateNames[e.bad_component]) + ")";
        throw IntegrationFailure(msg, e.last_good_t, e.bad_component);
    }
}

}  // namespace

State6 Trajectory::at(double time) const {
    if (t.empty()) throw ValidationError("empty trajectory");
    if (time <= t.front()) return x.front();
    if (time >= t.back()) return x.back();
    const auto it = std::upper_bound(t.begin(), t.end(), time);
    const std::size_t i = static_cast<std::size_t>(it - t.begin()) - 1;
    return hermite(t[i], x[i], dx[i], t[i + 1], x[i + 1], dx[i + 1], time);
}

TimeSeries Trajectory::series() const {
    TimeSeries ts;
    ts.t = t;
    for (int c = 0; c < 6; ++c) {
        std::vector<double> col(t.size());
        for (std::size_t i = 0; i < t.size(); ++i) col[i] = x[i][c];
        ts.add(std::string(kStateChannels[c]), std::move(col));
    }
    return ts;
}

Trajectory integrate(const EspParams& p, const StateVector& x0, const TorqueSignal& torque,
                     double t0, double t1, const IntegrateOptions& opts) {
    check_inputs(x0, torque, t0, t1);
    Trajectory traj;
    TorqueSignal::Cursor gamma(torque);
    auto rhs = [&](double t, const State6& x) { return esp_rhs_array(x, gamma(t), p); };
    const State6 y0 = x0.to_array();
    traj.t.push_back(t0);
    traj.x.push_back(y0);
    traj.dx.push_back(esp_rhs_array(y0, torque(t0), p));
    with_named_failure([&] {
        return dopri5<6>(
            rhs, t0, t1, y0, opts,
            [&](double, const State6&, const State6&, double tn, const State6& yn,
                const State6& fn) {
                traj.t.push_back(tn);
                traj.x.push_back(yn);
                traj.dx.push_back(fn);
            },
            &traj.stats);
    });
    return traj;
}

StateVector integrate_terminal(const EspParams& p, const StateVector& x0,
                               const TorqueSignal& torque, double t0, double t1,
                               const IntegrateOptions& opts, StepStats* stats) {
    check_inputs(x0, torque, t0, t1);
    TorqueSignal::Cursor gamma(torque);
    auto rhs = [&](double t, const State6& x) { return esp_rhs_array(x, gamma(t), p); };
    return StateVector::from_array(
        with_named_failure([&] { return dopri5<6>(rhs, t0, t1, x0.to_array(), opts, stats); }));
}

std::vector<State6> integrate_on_grid(const EspParams& p, const StateVector& x0,
                                      const TorqueSignal& torque, const std::vector<double>& grid,
                                      const IntegrateOptions& opts) {
    if (grid.empty()) return {};
    check_inputs(x0, torque, grid.front(), grid.back());
    std::vector<State6> out;
    out.reserve(grid.size());
    out.push_back(x0.to_array());
    std::size_t next = 1;
    TorqueSignal::Cursor gamma(torque);
    auto rhs = [&](double t, const State6& x) { return esp_rhs_array(x, gamma(t), p); };
    with_named_failure([&] {
        return dopri5<6>(rhs, grid.front(), grid.back(), x0.to_array(), opts,
                         [&](double ta, const State6& ya, const State6& fa, double tb,
                             const State6& yb, const State6& fb) {
                             while (next < grid.size() && grid[next] <= tb) {
                                 out.push_back(grid[next] == tb
                                                   ? yb
                                                   : hermite(ta, ya, fa, tb, yb, fb, grid[next]));
                                 ++next;
                             }
                         });
    });
    while (out.size() < grid.size()) out.push_back(out.back());
    return out;
}

StateVector integrate_rk4(const EspParams& p, const StateVector& x0, const TorqueSignal& torque,
                          double t0, double t1, double dt) {
    check_inputs(x0, torque, t0, t1);
    TorqueSignal::Cursor gamma(torque);
    auto rhs = [&](double t, const State6& x) { return esp_rhs_array(x, gamma(t), p); };
    const State6 y = rk4<6>(rhs, t0, t1, x0.to_array(), dt);
    if (!y.allFinite()) throw NumericalError("RK4 reference produced non-finite state");
    return StateVector::from_array(y);
}

double scaled_residual_norm(const EspParams& p, double torque, const StateVector& x) {
    return (esp_rhs_array(x.to_array(), torque, p).array() / kStateScale.array())
        .matrix()
        .norm();
}

StateVector steady_state(const EspParams& p, double torque, const StateVector& guess,
                         int max_iter) {
    using M6 = Eigen::Matrix<double, 6, 6>;
    auto residual = [&](const State6& z) -> State6 {
        const State6 x = z.array() * kStateScale.array();
        return esp_rhs_array(x, torque, p).array() / kStateScale.array();
    };
    State6 z = guess.to_array().array() / kStateScale.array();
    State6 r = residual(z);
    double norm = r.norm();
    for (int it = 0; it < max_iter && norm >= 1e-12; ++it) {
        M6 J;
        for (int j = 0; j < 6; ++j) {
            const double h = 1e-7 * std::max(1.0, std::abs(z[j]));
            State6 zp = z, zm = z;
            zp[j] += h;
            zm[j] -= h;
            J.col(j) = (residual(zp) - residual(zm)) / (2 * h);
        }
        const State6 dz = J.fullPivLu().solve(-r);
        double lambda = 1.0;
        bool improved = false;
        for (int ls = 0; ls < 30; ++ls) {
            const State6 zt = z + lambda * dz;
            const State6 rt = residual(zt);
            if (rt.allFinite() && rt.norm() < norm) {
                z = zt;
                r = rt;
                norm = rt.norm();
                improved = true;
                break;
            }
            lambda *= 0.5;
        }
        if (!improved) break;
    }
    if (!(norm < 1e-9))
        throw NumericalError("steady_state did not converge; scaled residual " +
                             std::to_string(norm));
    return StateVector::from_array(z.array() * kStateScale.array());
}

namespace {

std::vector<double> fixed_grid(double t0, double t1, double dt, bool& too_coarse) {
    if (!(dt > 0)) throw ValidationError("resample dt must be positive");
    too_coarse = dt > t1 - t0;
    const long n = static_cast<long>(std::floor((t1 - t0) / dt + 1e-9));
    std::vector<double> grid(static_cast<std::size_t>(n) + 1);
    for (long k = 0; k <= n; ++k) grid[static_cast<std::size_t>(k)] = t0 + static_cast<double>(k) * dt;
    return grid;
}

void warn_coarse(TimeSeries& out) {
    out.flags.insert("resample-dt-exceeds-span");
    std::cerr << "warning: resample step exceeds the series span; single sample returned\n";
}

}  // namespace

TimeSeries resample_fixed(const Trajectory& traj, double dt) {
    if (traj.t.empty()) throw ValidationError("cannot resample an empty trajectory");
    bool coarse = false;
    const auto grid = fixed_grid(traj.t.front(), traj.t.back(), dt, coarse);
    TimeSeries out;
    out.t = grid;
    std::vector<State6> vals;
    vals.reserve(grid.size());
    for (double g : grid) vals.push_back(traj.at(g));
    for (int c = 0; c < 6; ++c) {
        std::vector<double> col(grid.size());
        for (std::size_t i = 0; i < grid.size(); ++i) col[i] = vals[i][c];
        out.add(std::string(kStateChannels[c]), std::move(col));
    }
    if (coarse) warn_coarse(out);
    return out;
}

TimeSeries resample_fixed(const TimeSeries& ts, double dt) {
    if (ts.empty()) throw ValidationError("cannot resample an empty series");
    bool coarse = false;
    const auto grid = fixed_grid(ts.t.front(), ts.t.back(), dt, coarse);
    TimeSeries out;
    out.t = grid;
    out.flags = ts.flags;
    const auto& t = ts.t;
    const std::size_t n = t.size();
    for (std::size_t c = 0; c < ts.names.size(); ++c) {
        const auto& y = ts.data[c];
        std::vector<double> slope(n, 0.0);
        if (n == 2) {
            slope[0] = slope[1] = (y[1] - y[0]) / (t[1] - t[0]);
        } else if (n > 2) {
            auto three_point = [&](std::size_t a, std::size_t b, std::size_t m, double at) {
                // derivative at `at` of the quadratic through samples a, m, b
                const double ta = t[a], tm = t[m], tb = t[b];
                return y[a] * (2 * at - tm - tb) / ((ta - tm) * (ta - tb)) +
                       y[m] * (2 * at - ta - tb) / ((tm - ta) * (tm - tb)) +
                       y[b] * (2 * at - ta - tm) / ((tb - ta) * (tb - tm));
            };
            for (std::size_t i = 1; i + 1 < n; ++i) slope[i] = three_point(i - 1, i + 1, i, t[i]);
            slope[0] = three_point(0, 2, 1, t[0]);
            slope[n - 1] = three_point(n - 3, n - 1, n - 2, t[n - 1]);
        }
        std::vector<double> col(grid.size());
        std::size_t k = 0;
        for (std::size_t g = 0; g < grid.size(); ++g) {
            const double tg = grid[g];
            if (n == 1) {
                col[g] = y[0];
                continue;
            }
            while (k + 2 < n && t[k + 1] <= tg) ++k;
            if (tg == t[k]) {
                col[g] = y[k];
            } else if (tg >= t[k + 1]) {
                col[g] = y[k + 1];
            } else {
                col[g] = hermite(t[k], y[k], slope[k], t[k + 1], y[k + 1], slope[k + 1], tg);
            }
        }
        out.add(ts.names[c], std::move(col));
    }
    if (coarse) warn_coarse(out);
    return out;
}

TimeSeries add_gaussian_noise(const TimeSeries& ts, const NoiseSpec& spec) {
    TimeSeries out = ts;
    std::mt19937_64 rng(spec.seed);
    std::normal_distribution<double> z(0.0, 1.0);
    for (const auto& [channel, sigma] : spec.sigma) {
        if (!(sigma >= 0)) throw ValidationError("noise sigma for '" + channel + "' must be >= 0");
        auto& col = out[channel];
        for (double& v : col) {
            const double draw = z(rng);
            if (sigma > 0) v += sigma * draw;
        }
    }
    return out;
}

}  // namespace espvfm
