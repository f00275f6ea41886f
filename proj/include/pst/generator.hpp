#pragma once

// Synchronous generator components. A DynamicGenerator is composed of one
// model per slot (machine, shaft, AVR, prime mover, PSS) that communicate
// through a per-evaluation port block.
//
// Frame convention: the rotor q-axis sits at angle delta in the network RI
// frame, so
//   [v_d; v_q] = [sin(delta), -cos(delta); cos(delta), sin(delta)] [v_R; v_I]
// and currents map back through the transpose.

#include <cstddef>
#include <span>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "pst/types.hpp"

namespace pst {

struct DQ {
    double d = 0.0;
    double q = 0.0;
    bool operator==(const DQ&) const = default;
};

/// Network RI phasor to the rotor dq frame at angle delta.
DQ to_rotor_frame(Complex v_ri, double delta);
/// Rotor dq quantity back to the network RI frame.
Complex from_rotor_frame(DQ x, double delta);

/// Set points shared by generators and inverters.
struct References {
    double omega_ref = 1.0;
    double V_ref = 1.0;
    double P_ref = 0.0;
    double Q_ref = 0.0;
    bool operator==(const References&) const = default;
};

// ---------------------------------------------------------------------------
// Machines
// ---------------------------------------------------------------------------

/// Constant EMF behind transient reactance. No states.
struct Classical {
    double R = 0.0;
    double Xd_p = 0.3;
    double eq_p = 1.0;
    bool operator==(const Classical&) const = default;
};

/// One d- and one q-axis transient model (states eq_p, ed_p).
struct OneDOneQ {
    double R = 0.0;
    double Xd = 1.3125;
    double Xq = 1.2578;
    double Xd_p = 0.1813;
    double Xq_p = 0.25;
    double Td0_p = 5.89;
    double Tq0_p = 0.6;
    bool operator==(const OneDOneQ&) const = default;
};

/// Parameters shared by the sixth-order (subtransient) machines.
struct SixthOrderParams {
    double R = 0.0;
    double Xd = 1.3125;
    double Xq = 1.2578;
    double Xd_p = 0.1813;
    double Xq_p = 0.25;
    double Xd_pp = 0.14;
    double Xq_pp = 0.18;
    double Td0_p = 5.89;
    double Tq0_p = 0.6;
    double Td0_pp = 0.05;
    double Tq0_pp = 0.06;
    bool operator==(const SixthOrderParams&) const = default;
};

/// Simplified Marconato model (states eq_p, ed_p, eq_pp, ed_pp).
struct MarconatoVI {
    SixthOrderParams p;
    double T_AA = 0.0;
    bool operator==(const MarconatoVI&) const = default;
};

/// Simplified Anderson-Fouad model (same states as MarconatoVI).
struct AndersonFouadVI {
    SixthOrderParams p;
    bool operator==(const AndersonFouadVI&) const = default;
};

using MachineModel = std::variant<Classical, OneDOneQ, MarconatoVI, AndersonFouadVI>;

/// Coupling terms of the sixth-order family. Anderson-Fouad is the all-zero case.
struct SubtransientCoupling {
    double gamma_d = 0.0;
    double gamma_q = 0.0;
    double T_AA = 0.0;
};

SubtransientCoupling marconato_coupling(const MarconatoVI& m);

struct MachineOutput {
    DQ i;
    double tau_e = 0.0;
};

std::size_t n_states(const MachineModel& m);
std::span<const std::string_view> state_names(const MachineModel& m);

/// Machine differential equations and stator algebra.
/// Writes dx (size n_states(m)) and returns the stator current and air-gap torque.
MachineOutput machine_eval(const MachineModel& m, std::span<const double> x, DQ v,
                           double V_f, std::span<double> dx);

/// Shared kernel of MarconatoVI / AndersonFouadVI.
MachineOutput subtransient_eval(const SixthOrderParams& p, const SubtransientCoupling& c,
                                std::span<const double> x, DQ v, double V_f,
                                std::span<double> dx);

// ---------------------------------------------------------------------------
// Shafts
// ---------------------------------------------------------------------------

struct SingleMass {
    double H = 3.148;
    double D = 2.0;
    bool operator==(const SingleMass&) const = default;
};

/// Five masses on a torsional spring chain: HP - IP - LP - rotor - exciter.
/// H and D belong to the rotor mass.
struct FiveMass {
    double H = 1.5;
    double H_hp = 0.3;
    double H_ip = 0.5;
    double H_lp = 0.7;
    double H_ex = 0.148;
    double D = 2.0;
    double D_hp = 0.0;
    double D_ip = 0.0;
    double D_lp = 0.0;
    double D_ex = 0.0;
    double D_12 = 20.0;  // HP-IP
    double D_23 = 20.0;  // IP-LP
    double D_34 = 20.0;  // LP-rotor
    double D_45 = 20.0;  // rotor-exciter
    double K_hp = 1e4;   // HP-IP spring
    double K_ip = 1e4;   // IP-LP
    double K_lp = 1e4;   // LP-rotor
    double K_ex = 1e4;   // rotor-exciter
    double F_hp = 0.3;
    double F_ip = 0.3;
    double F_lp = 0.4;
    bool operator==(const FiveMass&) const = default;
};

using ShaftModel = std::variant<SingleMass, FiveMass>;

std::size_t n_states(const ShaftModel& s);
std::span<const std::string_view> state_names(const ShaftModel& s);

/// Rotor angle and speed always occupy the first two shaft states.
void shaft_eval(const ShaftModel& s, std::span<const double> x, double tau_m, double tau_e,
                double omega_b, std::span<double> dx);

// ---------------------------------------------------------------------------
// Excitation
// ---------------------------------------------------------------------------

struct AVRFixed {
    double V_f = 1.0;
    bool operator==(const AVRFixed&) const = default;
};

/// Simplified DC exciter: measurement lag, regulator with anti-windup,
/// rate feedback and exciter with exponential saturation.
/// States: vm, vr1 (regulator), vr2 (rate-feedback filter), vf.
struct AVRTypeI {
    double Ka = 20.0;
    double Ke = 0.01;
    double Kf = 0.063;
    double Ta = 0.2;
    double Te = 0.314;
    double Tf = 0.35;
    double Tr = 0.001;
    double Vr_max = 5.0;
    double Vr_min = -5.0;
    double Ae = 0.0039;
    double Be = 1.555;
    bool operator==(const AVRTypeI&) const = default;
};

/// Measurement lag plus clamped first-order regulator. States: vm, vr.
struct AVRTypeII {
    double Ka = 50.0;
    double Ta = 0.05;
    double Tr = 0.001;
    double Vr_max = 5.0;
    double Vr_min = -5.0;
    bool operator==(const AVRTypeII&) const = default;
};

using AVRModel = std::variant<AVRFixed, AVRTypeI, AVRTypeII>;

std::size_t n_states(const AVRModel& a);
std::span<const std::string_view> state_names(const AVRModel& a);

/// Field voltage as a function of the AVR states only.
double avr_field_voltage(const AVRModel& a, std::span<const double> x);

/// AVR derivatives; returns the field voltage.
double avr_eval(const AVRModel& a, std::span<const double> x, double V_mag, double V_ref,
                double v_pss, std::span<double> dx);

/// Exciter saturation S_e(v_f) = A_e exp(B_e v_f).
double exciter_saturation(const AVRTypeI& a, double v_f);

// ---------------------------------------------------------------------------
// Stabilizers
// ---------------------------------------------------------------------------

struct PSSFixed {
    double V_pss = 0.0;
    bool operator==(const PSSFixed&) const = default;
};

/// v_pss = clamp(K_omega (omega - 1) + K_p (P_ref - tau_e omega), +-limit)
struct PSSSimplifiedDroop {
    double K_omega = 10.0;
    double K_p = 0.0;
    double limit = 0.2;
    bool operator==(const PSSSimplifiedDroop&) const = default;
};

using PSSModel = std::variant<PSSFixed, PSSSimplifiedDroop>;

double pss_output(const PSSModel& p, double omega, double tau_e, double P_ref);

// ---------------------------------------------------------------------------
// Prime movers
// ---------------------------------------------------------------------------

/// tau_m = efficiency * P_ref
struct TGFixed {
    double efficiency = 1.0;
    bool operator==(const TGFixed&) const = default;
};

/// Servo and reheat chain (states xg1, xg2, xg3).
struct TGTypeI {
    double droop = 0.02;  // R_d, the gain applied is 1/R_d
    double Ts = 0.1;
    double Tc = 0.45;
    double T3 = 0.0;
    double T4 = 12.0;
    double T5 = 50.0;
    double P_min = 0.0;
    double P_max = 1.2;
    bool operator==(const TGTypeI&) const = default;
};

/// One-state lead-lag droop (state xg).
struct TGTypeII {
    double droop = 0.02;
    double T1 = 1.0;
    double T2 = 5.0;
    bool operator==(const TGTypeII&) const = default;
};

using PrimeMover = std::variant<TGFixed, TGTypeI, TGTypeII>;

std::size_t n_states(const PrimeMover& tg);
std::span<const std::string_view> state_names(const PrimeMover& tg);

/// Governor derivatives; returns the mechanical torque.
double tg_eval(const PrimeMover& tg, std::span<const double> x, double omega, double omega_ref,
               double P_ref, std::span<double> dx);

// ---------------------------------------------------------------------------
// Composed device
// ---------------------------------------------------------------------------

struct DynamicGenerator {
    std::string name;
    int bus = 0;
    double base_MVA = 100.0;
    References refs;
    MachineModel machine = Classical{};
    ShaftModel shaft = SingleMass{};
    AVRModel avr = AVRFixed{};
    PrimeMover tg = TGFixed{};
    PSSModel pss = PSSFixed{};
    bool operator==(const DynamicGenerator&) const = default;
};

/// Port variables exchanged between generator components during one evaluation.
struct GeneratorPorts {
    DQ v;
    DQ i;
    double tau_m = 0.0;
    double tau_e = 0.0;
    double omega = 1.0;
    double V_f = 0.0;
    double delta = 0.0;
    double v_pss = 0.0;
    Complex i_inj;  // device base, network RI frame
};

/// Local layout: machine, shaft, AVR, prime mover (the PSS has no states).
struct GeneratorLayout {
    std::size_t machine = 0;
    std::size_t shaft = 0;
    std::size_t avr = 0;
    std::size_t tg = 0;
    std::size_t size = 0;
};

GeneratorLayout layout(const DynamicGenerator& g);
std::vector<std::string> state_names(const DynamicGenerator& g);

/// Full device residual. Writes dx (size layout(g).size) and returns the port
/// block, whose i_inj is the injected current on the device MVA base.
GeneratorPorts generator_residual(const DynamicGenerator& g, std::span<const double> x,
                                  Complex v_bus, double omega_b, std::span<double> dx);

}  // namespace pst
