#include "espvfm/identifiability.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <mutex>
#include <thread>

#include <Eigen/Eigenvalues>

namespace espvfm {

std::vector<Param> identifiability_set(int size) {
    using P = Param;
    switch (size) {
    case 8: return {P::B, P::mu, P::rho, P::ku, P::kd, P::k4p, P::k1s, P::k5s};
    case 12:
        return {P::k1p, P::k2p, P::k3p, P::k4p, P::k1s, P::k2s,
                P::k5s, P::rho, P::mu,  P::B,   P::ku,  P::kd};
    case 15:
        return {P::k1p, P::k2p, P::k3p, P::k4p, P::k1s, P::k2s, P::k5s, P::rho,
                P::mu,  P::B,   P::ku,  P::kd,  P::k3s, P::k4s, P::Is};
    default: throw ValidationError("identifiability set size must be 8, 12 or 15");
    }
}

namespace {

Eigen::MatrixXd observe(const EspParams& p, const SensitivityScenario& sc,
                        const std::vector<int>& channels, const IntegrateOptions& opts) {
    StateVector x0 = sc.x0;
    if (sc.steady_initial) x0 = steady_state(p, sc.torque(sc.grid.front()), sc.x0);
    const auto xs = integrate_on_grid(p, x0, sc.torque, sc.grid, opts);
    Eigen::MatrixXd y(static_cast<Eigen::Index>(xs.size()), static_cast<Eigen::Index>(channels.size()));
    for (std::size_t i = 0; i < xs.size(); ++i)
        for (std::size_t c = 0; c < channels.size(); ++c)
            y(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(c)) = xs[i][channels[c]];
    return y;
}

Eigen::VectorXd rows_of(const Eigen::MatrixXd& y) {
    // time-major: row k = (time k / n_ch, channel k % n_ch)
    Eigen::MatrixXd yt = y.transpose();
    return Eigen::Map<const Eigen::VectorXd>(yt.data(), yt.size());
}

}  // namespace

SensitivityMatrix output_sensitivities(const EspParams& p, const std::vector<Param>& subset,
                                       const SensitivityScenario& sc, const std::vector<int>& channels,
                                       int workers, const IntegrateOptions& opts) {
    if (subset.empty()) throw ValidationError("output_sensitivities: empty parameter subset");
    if (channels.empty()) throw ValidationError("output_sensitivities: no observed channels");
    for (int c : channels)
        if (c < 0 || c > 5) throw ValidationError("output_sensitivities: channel index out of range");
    if (sc.grid.size() < 2) throw ValidationError("output_sensitivities: grid needs two or more times");
    validate(p);

    SensitivityMatrix out;
    out.subset = subset;
    out.channels = channels;
    out.y = observe(p, sc, channels, opts);
    const Eigen::VectorXd y0 = rows_of(out.y);
    const auto n = static_cast<Eigen::Index>(subset.size());
    out.S.resize(y0.size(), n);
    out.one_sided_mismatch.assign(subset.size(), 0.0);

    std::atomic<std::size_t> next{0};
    std::exception_ptr failure;
    std::mutex mu;
    auto work = [&] {
        for (;;) {
            const std::size_t j = next.fetch_add(1);
            if (j >= subset.size()) return;
            const Param par = subset[j];
            const double theta = p[par];
            const double h = std::max(1e-6 * std::abs(theta), 1e-12);
            Eigen::VectorXd yp, ym;
            for (int dir : {+1, -1}) {
                EspParams q = p;
                q[par] = theta + dir * h;
                try {
                    (dir > 0 ? yp : ym) = rows_of(observe(q, sc, channels, opts));
                } catch (const std::exception& e) {
                    std::lock_guard lock(mu);
                    if (!failure)
                        failure = std::make_exception_ptr(NumericalError(
                            "sensitivity of " + std::string(param_name(par)) + " (" +
                            (dir > 0 ? "+h" : "-h") + "): " + e.what()));
                    return;
                }
            }
            const Eigen::VectorXd central = (yp - ym) / (2 * h);
            const Eigen::VectorXd forward = (yp - y0) / h;
            const double scale = central.norm();
            const double mism = scale > 0 ? (forward - central).norm() / scale : 0.0;
            std::lock_guard lock(mu);
            out.S.col(static_cast<Eigen::Index>(j)) = central;
            out.one_sided_mismatch[j] = mism;
        }
    };
    const int nw = std::clamp(workers > 0 ? workers : static_cast<int>(std::thread::hardware_concurrency()),
                              1, static_cast<int>(subset.size()));
    if (nw == 1) {
        work();
    } else {
        std::vector<std::jthread> pool;
        for (int w = 0; w < nw; ++w) pool.emplace_back(work);
    }
    if (failure) std::rethrow_exception(failure);
    return out;
}

Eigen::VectorXd relative_noise(const SensitivityMatrix& s, double relative) {
    if (!(relative > 0)) throw ValidationError("relative noise level must be positive");
    return rows_of(s.y).cwiseAbs() * relative;
}

Eigen::MatrixXd fisher_information(const Eigen::MatrixXd& S, const Eigen::VectorXd& sigma) {
    if (sigma.size() != S.rows()) throw ValidationError("fisher_information: sigma size mismatch");
    for (Eigen::Index r = 0; r < sigma.size(); ++r)
        if (!(sigma[r] > 0) || !std::isfinite(sigma[r]))
            throw ValidationError("fisher_information: sigma must be positive at row " + std::to_string(r));
    const Eigen::Index k = S.cols();
    Eigen::Matrix<long double, Eigen::Dynamic, Eigen::Dynamic> acc =
        Eigen::Matrix<long double, Eigen::Dynamic, Eigen::Dynamic>::Zero(k, k);
    for (Eigen::Index r = 0; r < S.rows(); ++r) {
        const long double w = 1.0L / (static_cast<long double>(sigma[r]) * sigma[r]);
        for (Eigen::Index i = 0; i < k; ++i)
            for (Eigen::Index j = i; j < k; ++j)
                acc(i, j) += w * static_cast<long double>(S(r, i)) * S(r, j);
    }
    Eigen::MatrixXd fim(k, k);
    for (Eigen::Index i = 0; i < k; ++i)
        for (Eigen::Index j = i; j < k; ++j) fim(i, j) = fim(j, i) = static_cast<double>(acc(i, j));
    return fim;
}

CorrelationReport correlation_matrix(const Eigen::MatrixXd& fim) {
    if (fim.rows() != fim.cols() || fim.rows() == 0)
        throw ValidationError("correlation_matrix: FIM must be square and non-empty");
    if (!fim.allFinite()) throw ValidationError("correlation_matrix: non-finite FIM");
    const Eigen::Index k = fim.rows();
    // Equilibrate first so the eigen cutoff is not dominated by units.
    Eigen::VectorXd d(k);
    for (Eigen::Index i = 0; i < k; ++i) d[i] = fim(i, i) > 0 ? 1.0 / std::sqrt(fim(i, i)) : 1.0;
    const Eigen::MatrixXd F = d.asDiagonal() * fim * d.asDiagonal();
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(F);
    const Eigen::VectorXd lam = es.eigenvalues();
    const double lmax = lam.cwiseAbs().maxCoeff();
    const double cut = 1e-12 * lmax;
    CorrelationReport rep;
    Eigen::VectorXd inv = Eigen::VectorXd::Zero(k);
    for (Eigen::Index i = 0; i < k; ++i) {
        if (lam[i] > cut) {
            inv[i] = 1.0 / lam[i];
            ++rep.rank;
        }
    }
    rep.full_rank = rep.rank == k;
    const double lmin = lam.minCoeff();
    rep.condition_number = rep.full_rank && lmin > 0 ? lmax / lmin : std::numeric_limits<double>::infinity();
    const Eigen::MatrixXd Cs = es.eigenvectors() * inv.asDiagonal() * es.eigenvectors().transpose();
    rep.covariance = d.asDiagonal() * Cs * d.asDiagonal();
    rep.R = Eigen::MatrixXd::Identity(k, k);
    for (Eigen::Index i = 0; i < k; ++i)
        for (Eigen::Index j = 0; j < k; ++j) {
            if (i == j) continue;
            const double den = std::sqrt(Cs(i, i) * Cs(j, j));
            rep.R(i, j) = den > 0 ? std::clamp(Cs(i, j) / den, -1.0, 1.0) : 0.0;
        }
    return rep;
}

Partition identifiable_partition(const Eigen::MatrixXd& R, const std::vector<bool>& pump_shaft,
                                 double threshold) {
    const auto k = R.rows();
    if (R.cols() != k || static_cast<Eigen::Index>(pump_shaft.size()) != k)
        throw ValidationError("identifiable_partition: shape mismatch");
    Partition out;
    for (Eigen::Index i = 0; i < k; ++i)
        for (Eigen::Index j = i + 1; j < k; ++j)
            if (std::abs(R(i, j)) >= threshold)
                out.pairs.push_back({static_cast<int>(i), static_cast<int>(j), R(i, j)});
    std::stable_sort(out.pairs.begin(), out.pairs.end(),
                     [](const FlaggedPair& a, const FlaggedPair& b) { return std::abs(a.r) > std::abs(b.r); });

    std::vector<bool> removed(static_cast<std::size_t>(k), false);
    auto remaining = [&](int c) {
        int n = 0;
        for (const auto& pr : out.pairs)
            if (!removed[pr.i] && !removed[pr.j] && (pr.i == c || pr.j == c)) ++n;
        return n;
    };
    for (;;) {
        int best = -1, best_n = 0;
        for (int c = 0; c < k; ++c) {
            if (removed[c]) continue;
            const int n = remaining(c);
            if (n == 0) continue;
            const bool better = best < 0 || n > best_n ||
                                (n == best_n && pump_shaft[c] && !pump_shaft[best]);
            if (better) {
                best = c;
                best_n = n;
            }
        }
        if (best < 0) break;
        removed[best] = true;
        out.fix_order.push_back(best);
    }
    return out;
}

Partition identifiable_partition(const Eigen::MatrixXd& R, const std::vector<Param>& subset,
                                 double threshold) {
    std::vector<bool> ps;
    for (Param p : subset) ps.push_back(static_cast<int>(p) <= static_cast<int>(Param::Is));
    return identifiable_partition(R, ps, threshold);
}

}  // namespace espvfm
