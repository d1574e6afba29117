#include "espvfm/model.hpp"

#include <cmath>
#include <sstream>

namespace espvfm {

namespace {

struct ParamInfo {
    std::string_view name;
    std::string_view unit;
};

constexpr std::array<ParamInfo, kParamCount> kParamInfo{{
    {"k1p", "1/m"},      {"k2p", "m^2"},    {"k3p", "1/m^3"},   {"k4p", "1/m^4"},
    {"k1s", "s/m^2"},    {"k2s", "m.s"},    {"k3s", "m^2.s"},   {"k4s", "kg.m"},
    {"k5s", "kg.m.s"},   {"Is", "kg.m^2"},  {"B", "Pa"},        {"rho", "kg/m^3"},
    {"mu", "Pa.s"},      {"ku", "1"},       {"kd", "1"},        {"kbd", "m"},
    {"kbl", "m"},        {"omega_t", "rad/s"}, {"Pin", "Pa"},   {"Pout", "Pa"},
    {"du", "m"},         {"Au", "m^2"},     {"Lu", "m"},        {"dd", "m"},
    {"Ad", "m^2"},       {"Ld", "m"},       {"Ap", "m^2"},      {"Lp", "m"},
    {"rho0", "kg/m^3"},  {"cv", "m^2"},
}};

}  // namespace

std::string_view param_name(Param p) { return kParamInfo.at(static_cast<int>(p)).name; }
std::string_view param_unit(Param p) { return kParamInfo.at(static_cast<int>(p)).unit; }

std::optional<Param> param_from_name(std::string_view name) {
    for (int i = 0; i < kParamCount; ++i)
        if (kParamInfo[i].name == name) return static_cast<Param>(i);
    return std::nullopt;
}

Param parse_param(std::string_view name) {
    if (auto p = param_from_name(name)) return *p;
    std::ostringstream msg;
    msg << "unknown parameter '" << name << "'; expected one of:";
    for (const auto& info : kParamInfo) msg << ' ' << info.name;
    throw ValidationError(msg.str());
}

void validate(const EspParams& p) {
    for (int i = 0; i < kParamCount; ++i) {
        const auto id = static_cast<Param>(i);
        if (!std::isfinite(p[id]))
            throw ValidationError("parameter " + std::string(param_name(id)) + " is not finite");
    }
    const Param positive[] = {Param::du, Param::Au, Param::Lu, Param::dd, Param::Ad, Param::Ld,
                              Param::Ap, Param::Lp, Param::B,  Param::rho, Param::mu, Param::Is,
                              Param::kbd};
    for (Param id : positive)
        if (!(p[id] > 0))
            throw ValidationError("parameter " + std::string(param_name(id)) + " must be > 0, got " +
                                  std::to_string(p[id]));
    if (p.cv_term_enabled && !(p.cv > 0 && p.rho0 > 0))
        throw ValidationError("valve term enabled but cv/rho0 are not positive");
}

EspParams preset_investigation(int investigation, K4pSource k4p) {
    EspParams p;
    p.k1p = 4.86767028064;
    p.k2p = 0.00993000571;
    p.k3p = -63059695.62392379;
    p.k4p = k4p == K4pSource::ResultsTable ? -2738928.7728844346 : -2227387.757;
    p.k1s = -61.26078341712889;
    p.k2s = 0.007812519509782526;
    p.k3s = 0.11037160345516595;
    p.k4s = 0.0673205282579523;
    p.k5s = 0.00014230344668551565;
    p.Is = 0.0005084508657503108;
    p.B = 1.31e9;
    p.dd = 0.0762;
    p.Ad = 0.004560367311877479;
    p.Ld = 28.0;
    p.du = 0.0762;
    p.Au = 0.004560367311877479;
    p.Lu = 31.5;
    p.Ap = 0.004896564849701392;
    p.Lp = 0.0475;
    p.Pin = 0.0;
    p.Pout = 0.0;
    p.rho0 = 1000.0;
    p.cv = 0.0;
    p.cv_term_enabled = false;
    switch (investigation) {
    case 1:
        p.mu = 0.14293628356925767;
        p.rho = 882.2053015499059;
        p.ku = 51.024099349975586;
        p.kd = 30.669759377918858;
        p.omega_t = 1280.0 * kRpmToRadS;
        p.kbd = 162186.57714429626;
        p.kbl = 1.1441462507651596e+10;
        break;
    case 2:
        p.mu = 0.22811801215471225;
        p.rho = 872.5911354844369;
        p.ku = 656.553858757019;
        p.kd = 27.025931881022082;
        p.omega_t = 1160.0 * kRpmToRadS;
        p.kbd = 133454.74619668655;
        p.kbl = 9.56458543221449e+9;
        break;
    default:
        throw ValidationError("investigation must be 1 or 2, got " + std::to_string(investigation));
    }
    return p;
}

double laminar_friction(double q, double mu, double length, double diameter) {
    if (q == 0.0)
        throw ValidationError("laminar_friction: Q = 0 is singular; use laminar_friction_loss");
    if (!(diameter > 0 && length > 0 && mu > 0))
        throw ValidationError("laminar_friction: diameter, length and mu must be positive");
    return 128.0 * length * mu / (std::numbers::pi * q * std::pow(diameter, 4));
}

double brinkman_viscosity(double mu_c, double water_fraction) {
    if (!(water_fraction >= 0.0 && water_fraction < 1.0))
        throw ValidationError("water fraction must lie in [0, 1), got " +
                              std::to_string(water_fraction));
    if (!(mu_c > 0)) throw ValidationError("continuous-phase viscosity must be positive");
    return mu_c * std::pow(1.0 / (1.0 - water_fraction), 2.5);
}

ViscosityEstimate oil_viscosity_at_temperature(double t) {
    // least-squares quartic in mPa.s
    const double mpas = (((0.00026436 * t - 0.04864) * t + 3.436) * t - 114.28) * t + 1610.3;
    return {mpas / 1000.0, t < 10.0 || t > 60.0};
}

double effective_viscosity(const FluidSpec& fluid) {
    const double mu_c = fluid.continuous_viscosity
                            ? *fluid.continuous_viscosity
                            : oil_viscosity_at_temperature(fluid.temperature_c).value;
    return brinkman_viscosity(mu_c, fluid.water_fraction);
}

StateVector esp_rhs(const StateVector& x, double torque, const EspParams& p) {
    const auto a = x.to_array();
    for (int i = 0; i < 6; ++i)
        if (!std::isfinite(a[i]))
            throw ValidationError("state " + std::string(kStateNames[i]) + " is not finite");
    if (!std::isfinite(torque)) throw ValidationError("torque is not finite");
    return StateVector::from_array(esp_rhs_array(a, torque, p));
}

OperatingPoint operating_point_at_speed(const EspParams& p, double omega) {
    // With every rate zero and Q1 = Q2 = Qp = q, the discharge pressure follows
    // from the downstream line, the intake pressure from the pump head, and q
    // from the upstream line balance.
    auto pressures = [&](double q) {
        double p2 = p.Pout + laminar_friction_loss(q, p.mu, p.Ld, p.dd) +
                    p.rho * p.kd * q * q / (2.0 * p.Ad * p.Ad);
        if (p.cv_term_enabled) p2 += p.rho * q / (p.cv * p.cv * p.rho0);
        const double head = p.rho * (p.k1p * omega * q + p.k2p * omega * omega + p.k4p * q * q) +
                            p.k3p * p.mu * q;
        return std::pair{p2 - head, p2};
    };
    auto upstream = [&](double q) {
        const double p1 = pressures(q).first;
        return (twin_screw_flow(p) - q) * p.kbl * p.mu + p.Pin - p1 -
               laminar_friction_loss(q, p.mu, p.Lu, p.du) * p.Au -
               p.rho * p.ku * q * q / (2.0 * p.Au);
    };

    double q = twin_screw_flow(p);
    for (int it = 0; it < 100; ++it) {
        const double g = upstream(q);
        const double h = 1e-7 * std::max(std::abs(q), 1e-6);
        const double dg = (upstream(q + h) - upstream(q - h)) / (2.0 * h);
        const double step = g / dg;
        q -= step;
        if (std::abs(step) <= 1e-15 * std::max(std::abs(q), 1e-12)) break;
    }
    if (!std::isfinite(q)) throw NumericalError("operating point: flow did not converge");
    const auto [p1, p2] = pressures(q);
    OperatingPoint op;
    op.state = {q, omega, q, q, p1, p2};
    op.torque = p.k1s * p.rho * q * q + p.k2s * p.rho * omega * q + p.k3s * p.mu * omega +
                p.k4s * omega + p.k5s * omega * omega;
    return op;
}

}  // namespace espvfm
