#include "pst/generator.hpp"

#include <algorithm>
#include <array>
#include <cmath>

namespace pst {

namespace {

template <class... Ts>
struct Overloaded : Ts... {
    using Ts::operator()...;
};

constexpr std::array<std::string_view, 0> kNoStates{};
constexpr std::array<std::string_view, 2> kOneDOneQStates{"eq_p", "ed_p"};
constexpr std::array<std::string_view, 4> kSixthOrderStates{"eq_p", "ed_p", "eq_pp", "ed_pp"};
constexpr std::array<std::string_view, 2> kSingleMassStates{"delta", "omega"};
constexpr std::array<std::string_view, 10> kFiveMassStates{
    "delta", "omega", "delta_hp", "omega_hp", "delta_ip",
    "omega_ip", "delta_lp", "omega_lp", "delta_ex", "omega_ex"};
constexpr std::array<std::string_view, 4> kAVRTypeIStates{"vm", "vr1", "vr2", "vf"};
constexpr std::array<std::string_view, 2> kAVRTypeIIStates{"vm", "vr"};
constexpr std::array<std::string_view, 3> kTGTypeIStates{"xg1", "xg2", "xg3"};
constexpr std::array<std::string_view, 1> kTGTypeIIStates{"xg"};

// Solves the stator equations
//   v_d = ed - R i_d + Xq i_q
//   v_q = eq - R i_q - Xd i_d
// for (i_d, i_q).
DQ stator_current(double R, double Xd, double Xq, double ed, double eq, DQ v) {
    const double det = R * R + Xd * Xq;
    if (det == 0.0 || !std::isfinite(det)) {
        throw ModelError("singular stator matrix (R^2 + Xd*Xq = 0)");
    }
    const double a = ed - v.d;  // R i_d - Xq i_q
    const double b = eq - v.q;  // Xd i_d + R i_q
    return {(R * a + Xq * b) / det, (R * b - Xd * a) / det};
}

// Clamped integrator: blocks the derivative when pushing past a limit.
double anti_windup(double x, double dx, double lo, double hi) {
    if ((x >= hi && dx > 0.0) || (x <= lo && dx < 0.0)) {
        return 0.0;
    }
    return dx;
}

}  // namespace

DQ to_rotor_frame(Complex v_ri, double delta) {
    const double s = std::sin(delta);
    const double c = std::cos(delta);
    return {s * v_ri.real() - c * v_ri.imag(), c * v_ri.real() + s * v_ri.imag()};
}

Complex from_rotor_frame(DQ x, double delta) {
    const double s = std::sin(delta);
    const double c = std::cos(delta);
    return {s * x.d + c * x.q, -c * x.d + s * x.q};
}

// ---------------------------------------------------------------------------
// Machines
// ---------------------------------------------------------------------------

SubtransientCoupling marconato_coupling(const MarconatoVI& m) {
    const auto& p = m.p;
    return {p.Td0_pp * p.Xd_pp * (p.Xd - p.Xd_p) / (p.Td0_p * p.Xd_p),
            p.Tq0_pp * p.Xq_pp * (p.Xq - p.Xq_p) / (p.Tq0_p * p.Xq_p), m.T_AA};
}

std::size_t n_states(const MachineModel& m) { return state_names(m).size(); }

std::span<const std::string_view> state_names(const MachineModel& m) {
    return std::visit(
        Overloaded{[](const Classical&) { return std::span<const std::string_view>(kNoStates); },
                   [](const OneDOneQ&) { return std::span<const std::string_view>(kOneDOneQStates); },
                   [](const auto&) { return std::span<const std::string_view>(kSixthOrderStates); }},
        m);
}

MachineOutput subtransient_eval(const SixthOrderParams& p, const SubtransientCoupling& c,
                                std::span<const double> x, DQ v, double V_f,
                                std::span<double> dx) {
    const double eq_p = x[0];
    const double ed_p = x[1];
    const double eq_pp = x[2];
    const double ed_pp = x[3];
    const DQ i = stator_current(p.R, p.Xd_pp, p.Xq_pp, ed_pp, eq_pp, v);

    dx[0] = (-eq_p - (p.Xd - p.Xd_p - c.gamma_d) * i.d + (1.0 - c.T_AA / p.Td0_p) * V_f) / p.Td0_p;
    dx[1] = (-ed_p + (p.Xq - p.Xq_p - c.gamma_q) * i.q) / p.Tq0_p;
    dx[2] = (-eq_pp + eq_p - (p.Xd_p - p.Xd_pp + c.gamma_d) * i.d + (c.T_AA / p.Td0_p) * V_f) /
            p.Td0_pp;
    dx[3] = (-ed_pp + ed_p + (p.Xq_p - p.Xq_pp + c.gamma_q) * i.q) / p.Tq0_pp;

    const double tau_e = ed_pp * i.d + eq_pp * i.q + (p.Xq_pp - p.Xd_pp) * i.d * i.q;
    return {i, tau_e};
}

MachineOutput machine_eval(const MachineModel& m, std::span<const double> x, DQ v,
                           double V_f, std::span<double> dx) {
    return std::visit(
        Overloaded{
            [&](const Classical& c) -> MachineOutput {
                const DQ i = stator_current(c.R, c.Xd_p, c.Xd_p, 0.0, c.eq_p, v);
                return {i, c.eq_p * i.q};
            },
            [&](const OneDOneQ& c) -> MachineOutput {
                const double eq_p = x[0];
                const double ed_p = x[1];
                const DQ i = stator_current(c.R, c.Xd_p, c.Xq_p, ed_p, eq_p, v);
                dx[0] = (-eq_p - (c.Xd - c.Xd_p) * i.d + V_f) / c.Td0_p;
                dx[1] = (-ed_p + (c.Xq - c.Xq_p) * i.q) / c.Tq0_p;
                return {i, ed_p * i.d + eq_p * i.q + (c.Xq_p - c.Xd_p) * i.d * i.q};
            },
            [&](const MarconatoVI& c) {
                return subtransient_eval(c.p, marconato_coupling(c), x, v, V_f, dx);
            },
            [&](const AndersonFouadVI& c) {
                return subtransient_eval(c.p, SubtransientCoupling{}, x, v, V_f, dx);
            }},
        m);
}

// ---------------------------------------------------------------------------
// Shafts
// ---------------------------------------------------------------------------

std::size_t n_states(const ShaftModel& s) { return state_names(s).size(); }

std::span<const std::string_view> state_names(const ShaftModel& s) {
    if (std::holds_alternative<SingleMass>(s)) {
        return kSingleMassStates;
    }
    return kFiveMassStates;
}

void shaft_eval(const ShaftModel& s, std::span<const double> x, double tau_m, double tau_e,
                double omega_b, std::span<double> dx) {
    std::visit(
        Overloaded{
            [&](const SingleMass& m) {
                const double omega = x[1];
                dx[0] = omega_b * (omega - 1.0);
                dx[1] = (tau_m - tau_e - m.D * (omega - 1.0)) / (2.0 * m.H);
            },
            [&](const FiveMass& m) {
                const double d = x[0], w = x[1];
                const double d_hp = x[2], w_hp = x[3];
                const double d_ip = x[4], w_ip = x[5];
                const double d_lp = x[6], w_lp = x[7];
                const double d_ex = x[8], w_ex = x[9];

                dx[0] = omega_b * (w - 1.0);
                dx[1] = (-tau_e - m.D * (w - 1.0) - m.D_34 * (w - w_lp) - m.D_45 * (w - w_ex) +
                         m.K_lp * (d_lp - d) + m.K_ex * (d_ex - d)) /
                        (2.0 * m.H);
                dx[2] = omega_b * (w_hp - 1.0);
                dx[3] = (tau_m * m.F_hp - m.D_hp * (w_hp - 1.0) - m.D_12 * (w_hp - w_ip) +
                         m.K_hp * (d_ip - d_hp)) /
                        (2.0 * m.H_hp);
                dx[4] = omega_b * (w_ip - 1.0);
                dx[5] = (tau_m * m.F_ip - m.D_ip * (w_ip - 1.0) - m.D_12 * (w_ip - w_hp) -
                         m.D_23 * (w_ip - w_lp) + m.K_hp * (d_hp - d_ip) + m.K_ip * (d_lp - d_ip)) /
                        (2.0 * m.H_ip);
                dx[6] = omega_b * (w_lp - 1.0);
                dx[7] = (tau_m * m.F_lp - m.D_lp * (w_lp - 1.0) - m.D_23 * (w_lp - w_ip) -
                         m.D_34 * (w_lp - w) + m.K_ip * (d_ip - d_lp) + m.K_lp * (d - d_lp)) /
                        (2.0 * m.H_lp);
                dx[8] = omega_b * (w_ex - 1.0);
                dx[9] = (-m.D_ex * (w_ex - 1.0) - m.D_45 * (w_ex - w) + m.K_ex * (d - d_ex)) /
                        (2.0 * m.H_ex);
            }},
        s);
}

// ---------------------------------------------------------------------------
// AVR
// ---------------------------------------------------------------------------

std::size_t n_states(const AVRModel& a) { return state_names(a).size(); }

std::span<const std::string_view> state_names(const AVRModel& a) {
    return std::visit(
        Overloaded{[](const AVRFixed&) { return std::span<const std::string_view>(kNoStates); },
                   [](const AVRTypeI&) { return std::span<const std::string_view>(kAVRTypeIStates); },
                   [](const AVRTypeII&) { return std::span<const std::string_view>(kAVRTypeIIStates); }},
        a);
}

double exciter_saturation(const AVRTypeI& a, double v_f) { return a.Ae * std::exp(a.Be * v_f); }

double avr_field_voltage(const AVRModel& a, std::span<const double> x) {
    return std::visit(Overloaded{[](const AVRFixed& f) { return f.V_f; },
                                 [&](const AVRTypeI&) { return x[3]; },
                                 [&](const AVRTypeII&) { return x[1]; }},
                      a);
}

double avr_eval(const AVRModel& a, std::span<const double> x, double V_mag, double V_ref,
                double v_pss, std::span<double> dx) {
    std::visit(
        Overloaded{
            [](const AVRFixed&) {},
            [&](const AVRTypeI& c) {
                const double vm = x[0], vr1 = x[1], vr2 = x[2], vf = x[3];
                const double feedback = (c.Kf / c.Tf) * vf - vr2;
                dx[0] = (V_mag - vm) / c.Tr;
                dx[1] = anti_windup(vr1, (c.Ka * (V_ref + v_pss - vm - feedback) - vr1) / c.Ta,
                                    c.Vr_min, c.Vr_max);
                dx[2] = ((c.Kf / c.Tf) * vf - vr2) / c.Tf;
                dx[3] = (vr1 - (c.Ke + exciter_saturation(c, vf)) * vf) / c.Te;
            },
            [&](const AVRTypeII& c) {
                const double vm = x[0], vr = x[1];
                dx[0] = (V_mag - vm) / c.Tr;
                dx[1] = anti_windup(vr, (c.Ka * (V_ref + v_pss - vm) - vr) / c.Ta, c.Vr_min,
                                    c.Vr_max);
            }},
        a);
    return avr_field_voltage(a, x);
}

// ---------------------------------------------------------------------------
// PSS
// ---------------------------------------------------------------------------

double pss_output(const PSSModel& p, double omega, double tau_e, double P_ref) {
    return std::visit(Overloaded{[](const PSSFixed& f) { return f.V_pss; },
                                 [&](const PSSSimplifiedDroop& s) {
                                     const double v = s.K_omega * (omega - 1.0) +
                                                      s.K_p * (P_ref - tau_e * omega);
                                     return std::clamp(v, -s.limit, s.limit);
                                 }},
                      p);
}

// ---------------------------------------------------------------------------
// Prime movers
// ---------------------------------------------------------------------------

std::size_t n_states(const PrimeMover& tg) { return state_names(tg).size(); }

std::span<const std::string_view> state_names(const PrimeMover& tg) {
    return std::visit(
        Overloaded{[](const TGFixed&) { return std::span<const std::string_view>(kNoStates); },
                   [](const TGTypeI&) { return std::span<const std::string_view>(kTGTypeIStates); },
                   [](const TGTypeII&) { return std::span<const std::string_view>(kTGTypeIIStates); }},
        tg);
}

double tg_eval(const PrimeMover& tg, std::span<const double> x, double omega, double omega_ref,
               double P_ref, std::span<double> dx) {
    return std::visit(
        Overloaded{
            [&](const TGFixed& f) { return f.efficiency * P_ref; },
            [&](const TGTypeI& c) {
                const double xg1 = x[0], xg2 = x[1], xg3 = x[2];
                const double p_in =
                    std::clamp(P_ref + (omega_ref - omega) / c.droop, c.P_min, c.P_max);
                const double lead = xg2 + (c.T3 / c.Tc) * xg1;
                dx[0] = (p_in - xg1) / c.Ts;
                dx[1] = ((1.0 - c.T3 / c.Tc) * xg1 - xg2) / c.Tc;
                dx[2] = ((1.0 - c.T4 / c.T5) * lead - xg3) / c.T5;
                return xg3 + (c.T4 / c.T5) * lead;
            },
            [&](const TGTypeII& c) {
                const double xg = x[0];
                const double dw = omega_ref - omega;
                dx[0] = ((1.0 / c.droop) * (1.0 - c.T1 / c.T2) * dw - xg) / c.T2;
                return P_ref + (1.0 / c.droop) * (c.T1 / c.T2) * dw + xg;
            }},
        tg);
}

// ---------------------------------------------------------------------------
// Composition
// ---------------------------------------------------------------------------

GeneratorLayout layout(const DynamicGenerator& g) {
    GeneratorLayout l;
    l.machine = 0;
    l.shaft = l.machine + n_states(g.machine);
    l.avr = l.shaft + n_states(g.shaft);
    l.tg = l.avr + n_states(g.avr);
    l.size = l.tg + n_states(g.tg);
    return l;
}

std::vector<std::string> state_names(const DynamicGenerator& g) {
    std::vector<std::string> names;
    for (auto n : state_names(g.machine)) names.emplace_back(n);
    for (auto n : state_names(g.shaft)) names.emplace_back(n);
    for (auto n : state_names(g.avr)) names.emplace_back(n);
    for (auto n : state_names(g.tg)) names.emplace_back(n);
    return names;
}

GeneratorPorts generator_residual(const DynamicGenerator& g, std::span<const double> x,
                                  Complex v_bus, double omega_b, std::span<double> dx) {
    const GeneratorLayout l = layout(g);
    const auto sub = [&](std::size_t off, std::size_t n) { return x.subspan(off, n); };
    const auto dsub = [&](std::size_t off, std::size_t n) { return dx.subspan(off, n); };

    GeneratorPorts port;
    const auto xs = sub(l.shaft, l.avr - l.shaft);
    port.delta = xs[0];
    port.omega = xs[1];
    port.v = to_rotor_frame(v_bus, port.delta);

    const auto xa = sub(l.avr, l.tg - l.avr);
    port.V_f = avr_field_voltage(g.avr, xa);

    const MachineOutput mo = machine_eval(g.machine, sub(l.machine, l.shaft - l.machine), port.v,
                                          port.V_f, dsub(l.machine, l.shaft - l.machine));
    port.i = mo.i;
    port.tau_e = mo.tau_e;

    port.v_pss = pss_output(g.pss, port.omega, port.tau_e, g.refs.P_ref);
    avr_eval(g.avr, xa, std::abs(v_bus), g.refs.V_ref, port.v_pss, dsub(l.avr, l.tg - l.avr));

    port.tau_m = tg_eval(g.tg, sub(l.tg, l.size - l.tg), port.omega, g.refs.omega_ref,
                         g.refs.P_ref, dsub(l.tg, l.size - l.tg));

    shaft_eval(g.shaft, xs, port.tau_m, port.tau_e, omega_b, dsub(l.shaft, l.avr - l.shaft));

    port.i_inj = from_rotor_frame(port.i, port.delta);
    return port;
}

}  // namespace pst
