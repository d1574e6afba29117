#pragma once

#include <array>
#include <numbers>
#include <optional>
#include <span>
#include <string>
#include <string_view>

#include <Eigen/Core>

#include "espvfm/errors.hpp"

namespace espvfm {

/// Every scalar of the lumped ESP + pipeline + twin-screw booster model.
/// The enum order is the canonical order used by config files and reports.
enum class Param : int {
    k1p, k2p, k3p, k4p,
    k1s, k2s, k3s, k4s, k5s, Is,
    B, rho, mu,
    ku, kd,
    kbd, kbl, omega_t,
    Pin, Pout,
    du, Au, Lu, dd, Ad, Ld, Ap, Lp,
    rho0, cv,
    count_
};

inline constexpr int kParamCount = static_cast<int>(Param::count_);

std::string_view param_name(Param p);
std::string_view param_unit(Param p);
std::optional<Param> param_from_name(std::string_view name);
/// Throws ValidationError listing the known names.
Param parse_param(std::string_view name);

inline constexpr double kRpmToRadS = 2.0 * std::numbers::pi / 60.0;
inline constexpr double kPaPerMwc = 9806.65;
inline constexpr double kSecondsPerHour = 3600.0;

/// Parameter record. T is double for simulation and an autodiff variable
/// when the PINN needs gradients through the right-hand side.
template <class T>
struct BasicEspParams {
    // pump (impeller) coefficients
    T k1p{}, k2p{}, k3p{}, k4p{};
    // shaft coefficients and inertia
    T k1s{}, k2s{}, k3s{}, k4s{}, k5s{}, Is{};
    // fluid
    T B{}, rho{}, mu{};
    // pipeline equivalent resistances
    T ku{}, kd{};
    // twin-screw booster; omega_t is stored in rad/s
    T kbd{}, kbl{}, omega_t{};
    // boundary pressures
    T Pin{}, Pout{};
    // geometry
    T du{}, Au{}, Lu{}, dd{}, Ad{}, Ld{}, Ap{}, Lp{};
    // valve term, inactive unless cv_term_enabled
    T rho0{}, cv{};
    bool cv_term_enabled = false;

    T& operator[](Param p) { return this->*member(p); }
    const T& operator[](Param p) const { return this->*member(p); }

    static constexpr T BasicEspParams::*member(Param p) {
        constexpr std::array<T BasicEspParams::*, kParamCount> table{
            &BasicEspParams::k1p, &BasicEspParams::k2p, &BasicEspParams::k3p, &BasicEspParams::k4p,
            &BasicEspParams::k1s, &BasicEspParams::k2s, &BasicEspParams::k3s, &BasicEspParams::k4s,
            &BasicEspParams::k5s, &BasicEspParams::Is,
            &BasicEspParams::B, &BasicEspParams::rho, &BasicEspParams::mu,
            &BasicEspParams::ku, &BasicEspParams::kd,
            &BasicEspParams::kbd, &BasicEspParams::kbl, &BasicEspParams::omega_t,
            &BasicEspParams::Pin, &BasicEspParams::Pout,
            &BasicEspParams::du, &BasicEspParams::Au, &BasicEspParams::Lu,
            &BasicEspParams::dd, &BasicEspParams::Ad, &BasicEspParams::Ld,
            &BasicEspParams::Ap, &BasicEspParams::Lp,
            &BasicEspParams::rho0, &BasicEspParams::cv};
        return table[static_cast<int>(p)];
    }
};

using EspParams = BasicEspParams<double>;

/// Throws ValidationError naming the first offending field.
void validate(const EspParams& p);

/// Where the pump equivalent resistance k4p comes from. The results tables
/// report errors against a different k4p than the model parameter table.
enum class K4pSource { ResultsTable, ModelTable };

/// Bundled parameter sets for the two experimental investigations.
EspParams preset_investigation(int investigation, K4pSource k4p = K4pSource::ResultsTable);

/// Cross-sectional area of a circular pipe.
inline double pipe_area(double diameter) { return std::numbers::pi * diameter * diameter / 4.0; }

/// Dynamic states. Flows in m^3/s, omega in rad/s, pressures in Pa.
struct StateVector {
    double Qp = 0, omega = 0, Q1 = 0, Q2 = 0, P1 = 0, P2 = 0;

    using Array = Eigen::Matrix<double, 6, 1>;
    Array to_array() const { return {Qp, omega, Q1, Q2, P1, P2}; }
    static StateVector from_array(const Array& a) { return {a[0], a[1], a[2], a[3], a[4], a[5]}; }
    double operator[](int i) const { return to_array()[i]; }
};

inline constexpr std::array<std::string_view, 6> kStateNames{"Qp", "omega", "Q1", "Q2", "P1", "P2"};
inline constexpr std::array<std::string_view, 6> kStateChannels{"Qp_m3s", "omega_rads", "Q1_m3s",
                                                                  "Q2_m3s", "P1_Pa", "P2_Pa"};

/// Characteristic magnitudes used to nondimensionalize states and rates
/// (per-state scale over a 1 s time scale).
inline const StateVector::Array kStateScale{1e-2, 1e2, 1e-2, 1e-2, 1e5, 1e5};

struct FluidSpec {
    double water_fraction = 0;                 // Omega in [0, 1)
    double temperature_c = 25;
    std::optional<double> continuous_viscosity;  // Pa.s; derived from temperature if empty
};

/// Pressure loss f_f(Q)*Q^2 of laminar Hagen-Poiseuille flow, written in the
/// product form 128 L mu Q / (pi d^4) so it is linear in Q and finite at Q = 0.
template <class T, class U>
T laminar_friction_loss(const T& q, const U& mu, const U& length, const U& diameter) {
    const auto d2 = diameter * diameter;
    return (128.0 / std::numbers::pi) * q * (length * mu / (d2 * d2));
}

/// The friction function f_f itself. Q must be nonzero.
double laminar_friction(double q, double mu, double length, double diameter);

/// Effective emulsion viscosity mu_c (1/(1-Omega))^2.5.
double brinkman_viscosity(double mu_c, double water_fraction);

struct ViscosityEstimate {
    double value = 0;            // Pa.s
    bool extrapolated = false;   // temperature outside the fitted 10..60 C range
};

/// Quartic fit of the test oil viscosity against temperature (C).
ViscosityEstimate oil_viscosity_at_temperature(double temperature_c);

/// Effective viscosity of a fluid specification.
double effective_viscosity(const FluidSpec& fluid);

/// Displacement flow of the twin-screw booster in m^3/s.
template <class T>
T twin_screw_flow(const BasicEspParams<T>& p) {
    return p.omega_t * (1.0 / kRpmToRadS) / p.kbd;
}

/// Right-hand side of the six ODEs. Shared by the simulator (T = double) and
/// the PINN residuals (T = autodiff variable).
template <class T>
std::array<T, 6> esp_rhs_generic(const std::array<T, 6>& x, const T& torque,
                                 const BasicEspParams<T>& p) {
    const T& qp = x[0];
    const T& w = x[1];
    const T& q1 = x[2];
    const T& q2 = x[3];
    const T& p1 = x[4];
    const T& p2 = x[5];

    T dqp = (p1 - p2 + p.k3p * p.mu * qp) * p.Ap / (p.rho * p.Lp)
            + p.Ap * (p.k1p * w * qp + p.k2p * w * w + p.k4p * qp * qp) / p.Lp;

    T dw = (torque - p.k1s * p.rho * qp * qp - p.k2s * p.rho * w * qp - p.k3s * p.mu * w
            - p.k4s * w - p.k5s * w * w)
           / p.Is;

    T dq1 = ((twin_screw_flow(p) - q1) * p.kbl * p.mu + p.Pin - p1
             - laminar_friction_loss(q1, p.mu, p.Lu, p.du) * p.Au)
                / (p.rho * p.Lu)
            - p.ku * q1 * q1 / (2.0 * p.Lu * p.Au);

    T dq2 = (p2 - p.Pout - laminar_friction_loss(q2, p.mu, p.Ld, p.dd)) * p.Ad / (p.rho * p.Ld)
            - p.kd * q2 * q2 / (2.0 * p.Ld * p.Ad);
    if (p.cv_term_enabled) dq2 = dq2 - q2 * p.Ad / (p.Ld * p.cv * p.cv * p.rho0);

    T dp1 = (q1 - qp) * p.B / (p.Au * p.Lu);
    T dp2 = (qp - q2) * p.B / (p.Ad * p.Ld);
    return {dqp, dw, dq1, dq2, dp1, dp2};
}

/// Time derivatives of the state. Throws ValidationError on non-finite input.
StateVector esp_rhs(const StateVector& x, double torque, const EspParams& p);

/// Unchecked fast path used inside the integrators.
inline StateVector::Array esp_rhs_array(const StateVector::Array& x, double torque,
                                        const EspParams& p) {
    const auto r = esp_rhs_generic<double>({x[0], x[1], x[2], x[3], x[4], x[5]}, torque, p);
    return {r[0], r[1], r[2], r[3], r[4], r[5]};
}

/// Steady-state torque and state for a prescribed shaft speed (all flows
/// equal, all rates zero). Used to build operating points and test signals.
struct OperatingPoint {
    StateVector state;
    double torque = 0;
};
OperatingPoint operating_point_at_speed(const EspParams& p, double omega);

}  // namespace espvfm
