#include "espvfm/particle_filter.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <limits>
#include <thread>

namespace espvfm {

void PfConfig::check() const {
    if (n_particles < 1) throw ValidationError("pf: n_particles must be positive");
    if (!(ess_threshold > 0) || ess_threshold > n_particles)
        throw ValidationError("pf: ess_threshold must be in (0, n_particles]");
    if (!(jitter_std >= 0)) throw ValidationError("pf: jitter_std must be non-negative");
    if (!(init_span >= 0) || init_span >= 1) throw ValidationError("pf: init_span must be in [0, 1)");
    if (!(sigma[0] > 0) || !(sigma[1] > 0)) throw ValidationError("pf: measurement sigma must be positive");
    if (!(max_failure_fraction > 0) || max_failure_fraction > 1)
        throw ValidationError("pf: max_failure_fraction must be in (0, 1]");
}

void PfProblem::check() const {
    validate(known);
    if (unknowns.empty()) throw ValidationError("pf: no unknown parameters");
    measurements.validate();
    if (!measurements.has("P1_Pa") || !measurements.has("P2_Pa"))
        throw ValidationError("pf: measurements need P1_Pa and P2_Pa");
    if (measurements.size() < 2) throw ValidationError("pf: need at least two measurements");
    const double dt = measurements.t[1] - measurements.t[0];
    if (!is_uniform(measurements.t, dt, 1e-9 * std::max(1.0, dt)))
        throw ValidationError("pf: measurements must be on a uniform grid");
    if (!torque.covers(measurements.t.front(), measurements.t.back()))
        throw ValidationError("pf: torque does not cover the measurement window");
}

TimeSeries PfResult::state_series() const {
    TimeSeries ts;
    ts.t = t;
    for (int j = 0; j < 6; ++j) {
        std::vector<double> c(t.size());
        for (std::size_t i = 0; i < t.size(); ++i) c[i] = state_mean(static_cast<Eigen::Index>(i), j);
        ts.add(std::string(kStateChannels[j]), std::move(c));
    }
    return ts;
}

std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

std::uint64_t derive_seed(std::uint64_t master, std::uint64_t a, std::uint64_t b, std::uint64_t c) {
    std::uint64_t h = splitmix64(master);
    h = splitmix64(h ^ a);
    h = splitmix64(h ^ b);
    return splitmix64(h ^ c);
}

double effective_sample_size(const Eigen::VectorXd& w) {
    const double s2 = w.squaredNorm();
    if (!(s2 > 0)) throw NumericalError("effective_sample_size: all weights are zero");
    return 1.0 / s2;
}

Eigen::VectorXd normalize_log_weights(Eigen::VectorXd& logw) {
    const double m = logw.maxCoeff();
    if (!std::isfinite(m)) throw NumericalError("all particle weights are zero");
    Eigen::VectorXd w = (logw.array() - m).unaryExpr([](double v) { return std::exp(v); });
    const double s = w.sum();
    w /= s;
    logw = w.array().log();
    return w;
}

std::vector<int> systematic_counts(const Eigen::VectorXd& w, double u) {
    const auto n = w.size();
    std::vector<int> counts(static_cast<std::size_t>(n), 0);
    double cum = w[0];
    Eigen::Index j = 0;
    for (Eigen::Index i = 0; i < n; ++i) {
        const double pos = (static_cast<double>(i) + u) / static_cast<double>(n);
        while (pos > cum && j < n - 1) cum += w[++j];
        ++counts[static_cast<std::size_t>(j)];
    }
    return counts;
}

std::vector<Particle> resample(const std::vector<Particle>& particles, const Eigen::VectorXd& w,
                               double jitter_std, std::uint64_t seed, long step) {
    if (static_cast<Eigen::Index>(particles.size()) != w.size())
        throw ValidationError("resample: weight count mismatch");
    std::mt19937_64 pick(derive_seed(seed, 2, static_cast<std::uint64_t>(step)));
    const double u = std::uniform_real_distribution<double>(0.0, 1.0)(pick);
    const auto counts = systematic_counts(w, u);
    std::vector<Particle> out;
    out.reserve(particles.size());
    for (std::size_t i = 0; i < counts.size(); ++i)
        for (int c = 0; c < counts[i]; ++c) out.push_back(particles[i]);
    if (jitter_std > 0) {
        for (std::size_t i = 0; i < out.size(); ++i) {
            std::mt19937_64 rng(derive_seed(seed, 3, static_cast<std::uint64_t>(step), i));
            std::normal_distribution<double> nd(1.0, jitter_std);
            for (Eigen::Index k = 0; k < out[i].size(); ++k) out[i][k] *= nd(rng);
        }
    }
    return out;
}

double log_likelihood(const Particle& x, double p1, double p2, const std::array<double, 2>& sigma) {
    const double e1 = (p1 - x[4]) / sigma[0];
    const double e2 = (p2 - x[5]) / sigma[1];
    return -0.5 * (e1 * e1 + e2 * e2);
}

namespace {

EspParams particle_params(const PfProblem& prob, const Particle& x) {
    EspParams p = prob.known;
    for (std::size_t k = 0; k < prob.unknowns.size(); ++k) p[prob.unknowns[k]] = x[6 + static_cast<Eigen::Index>(k)];
    return p;
}

}  // namespace

PfResult pf_run(const PfConfig& cfg, const PfProblem& prob, std::uint64_t seed) {
    cfg.check();
    prob.check();
    const int n = cfg.n_particles;
    const auto nu = static_cast<Eigen::Index>(prob.unknowns.size());
    const auto& tm = prob.measurements.t;
    const auto& y1 = prob.measurements["P1_Pa"];
    const auto& y2 = prob.measurements["P2_Pa"];

    std::vector<Particle> parts(static_cast<std::size_t>(n), Particle(6 + nu));
    for (int i = 0; i < n; ++i) {
        std::mt19937_64 rng(derive_seed(seed, 1, static_cast<std::uint64_t>(i)));
        std::uniform_real_distribution<double> ud(1.0 - cfg.init_span, 1.0 + cfg.init_span);
        auto& x = parts[static_cast<std::size_t>(i)];
        x.head<6>() = prob.x0.to_array();
        for (Eigen::Index k = 0; k < nu; ++k) x[6 + k] = prob.known[prob.unknowns[static_cast<std::size_t>(k)]] * ud(rng);
    }
    Eigen::VectorXd logw = Eigen::VectorXd::Constant(n, -std::log(static_cast<double>(n)));

    PfResult res;
    const auto nt = static_cast<Eigen::Index>(tm.size());
    res.t = tm;
    res.state_mean.resize(nt, 6);
    res.param_mean.resize(nt, nu);
    auto record = [&](Eigen::Index k, const Eigen::VectorXd& w) {
        Eigen::VectorXd m = Eigen::VectorXd::Zero(6 + nu);
        for (int i = 0; i < n; ++i) m += w[i] * parts[static_cast<std::size_t>(i)];
        res.state_mean.row(k) = m.head<6>().transpose();
        res.param_mean.row(k) = m.tail(nu).transpose();
    };
    record(0, logw.array().exp());
    res.ess.push_back(n);
    res.resampled.push_back(0);
    res.failures.push_back(0);

    std::vector<char> failed(static_cast<std::size_t>(n));
    for (Eigen::Index k = 1; k < nt; ++k) {
        std::fill(failed.begin(), failed.end(), 0);
        std::atomic<int> next{0};
        auto work = [&] {
            for (;;) {
                const int i = next.fetch_add(1);
                if (i >= n) return;
                auto& x = parts[static_cast<std::size_t>(i)];
                if (!std::isfinite(logw[i])) {
                    failed[static_cast<std::size_t>(i)] = 1;
                    continue;
                }
                try {
                    const EspParams p = particle_params(prob, x);
                    const StateVector xe = integrate_terminal(p, StateVector::from_array(x.head<6>()), prob.torque,
                                                              tm[static_cast<std::size_t>(k - 1)],
                                                              tm[static_cast<std::size_t>(k)], cfg.integrate);
                    x.head<6>() = xe.to_array();
                    if (!x.allFinite()) failed[static_cast<std::size_t>(i)] = 1;
                } catch (const NumericalError&) {
                    failed[static_cast<std::size_t>(i)] = 1;
                }
            }
        };
        const int nw = std::clamp(cfg.workers, 1, n);
        if (nw == 1) {
            work();
        } else {
            std::vector<std::jthread> pool;
            for (int w = 0; w < nw; ++w) pool.emplace_back(work);
        }
        int nfail = 0;
        for (int i = 0; i < n; ++i) {
            if (failed[static_cast<std::size_t>(i)]) {
                ++nfail;
                logw[i] = -std::numeric_limits<double>::infinity();
            } else {
                logw[i] += log_likelihood(parts[static_cast<std::size_t>(i)], y1[static_cast<std::size_t>(k)],
                                          y2[static_cast<std::size_t>(k)], cfg.sigma);
            }
        }
        res.failures.push_back(nfail);
        if (nfail > cfg.max_failure_fraction * n)
            throw NumericalError("pf: " + std::to_string(nfail) + " of " + std::to_string(n) +
                                 " particles failed at t = " + std::to_string(tm[static_cast<std::size_t>(k)]));
        Eigen::VectorXd w = normalize_log_weights(logw);
        const double ess = effective_sample_size(w);
        res.ess.push_back(ess);
        record(k, w);
        if (ess < cfg.ess_threshold) {
            parts = resample(parts, w, cfg.jitter_std, seed, static_cast<long>(k));
            logw.setConstant(-std::log(static_cast<double>(n)));
            res.resampled.push_back(1);
        } else {
            res.resampled.push_back(0);
        }
    }
    const Eigen::VectorXd last = res.param_mean.row(nt - 1).transpose();
    res.estimates.assign(last.data(), last.data() + last.size());
    return res;
}

}  // namespace espvfm
