#include "pst/inverter.hpp"

#include <array>
#include <cmath>
#include <type_traits>
#include <utility>

namespace pst {

namespace {

constexpr std::array<std::string_view, InverterLayout::size> kInverterStates{
    "vpll_d", "vpll_q", "eps_pll", "theta_pll",                   // PLL
    "omega_olc", "theta_olc", "q_m",                              // outer loop
    "xi_d", "xi_q", "gamma_d", "gamma_q", "phi_d", "phi_q",       // inner loop
    "icv_d", "icv_q", "vo_d", "vo_q", "io_d", "io_q"};            // filter

Complex as_complex(DQ x) { return {x.d, x.q}; }
DQ as_dq(Complex z) { return {z.real(), z.imag()}; }

}  // namespace

DQ to_device_frame(Complex v_ri, double theta) {
    return as_dq(v_ri * std::polar(1.0, -theta));
}

Complex from_device_frame(DQ x, double theta) { return as_complex(x) * std::polar(1.0, theta); }

std::vector<std::string> state_names(const DynamicInverter&) {
    return {kInverterStates.begin(), kInverterStates.end()};
}

std::vector<bool> differential_mask(const DynamicInverter& inv) {
    std::vector<bool> mask(InverterLayout::size, true);
    if (inv.outer.mode == OuterLoopMode::GridFeeding) {
        mask[InverterLayout::outer] = false;
    }
    if (std::holds_alternative<LCFilter>(inv.filter)) {
        mask[InverterLayout::filter + 4] = false;
        mask[InverterLayout::filter + 5] = false;
    }
    return mask;
}

PllOutput pll_eval(const SrfPll& pll, std::span<const double> x, Complex v_o, double omega_b,
                   std::span<double> dx) {
    const double vpll_d = x[0];
    const double vpll_q = x[1];
    const double eps = x[2];
    const double theta = x[3];
    const DQ v_in = to_device_frame(v_o, theta);

    PllOutput out;
    double angle = 0.0;
    if (vpll_d == 0.0 && vpll_q == 0.0) {
        out.voltage_lost = true;
    } else {
        angle = std::atan2(vpll_q, vpll_d);
    }
    dx[0] = pll.omega_lp * (v_in.d - vpll_d);
    dx[1] = pll.omega_lp * (v_in.q - vpll_q);
    dx[2] = angle;
    out.omega_pll = 1.0 + pll.kp_pll * angle + pll.ki_pll * eps;
    dx[3] = omega_b * (out.omega_pll - 1.0);
    return out;
}

OuterLoopOutput outer_loop_eval(const OuterLoop& ol, std::span<const double> x, double p_meas,
                                double q_meas, double omega_pll, const References& refs,
                                double omega_b, std::span<double> dx) {
    const double omega = x[0];
    const double theta = x[1];
    const double q_m = x[2];

    if (ol.mode == OuterLoopMode::GridForming) {
        dx[0] = (refs.P_ref + ol.kw * (refs.omega_ref - omega) - p_meas -
                 ol.kd * (omega - omega_pll)) /
                ol.Ta;
    } else {
        dx[0] = omega - omega_pll;
    }
    dx[1] = omega_b * (omega - 1.0);
    dx[2] = ol.omega_f * (q_meas - q_m);
    return {omega, theta, refs.V_ref + ol.kq * (refs.Q_ref - q_m)};
}

InnerLoopOutput inner_loop_eval(const InnerLoop& il, std::span<const double> x,
                                double v_ref_inner, const FilterMeasurements& meas,
                                double omega_olc, double cf, double lf, double v_dc,
                                std::span<double> dx) {
    const double xi_d = x[0], xi_q = x[1];
    const double gamma_d = x[2], gamma_q = x[3];
    const double phi_d = x[4], phi_q = x[5];
    const DQ& vo = meas.v_o;
    const DQ& io = meas.i_o;
    const DQ& icv = meas.i_cv;
    const double w = omega_olc;

    // Virtual impedance.
    const double vd_ref = v_ref_inner - il.rv * io.d + w * il.lv * io.q;
    const double vq_ref = -il.rv * io.q - w * il.lv * io.d;

    // Voltage controller.
    const double id_ref = il.kpv * (vd_ref - vo.d) + il.kiv * xi_d - cf * w * vo.q + il.kffi * io.d;
    const double iq_ref = il.kpv * (vq_ref - vo.q) + il.kiv * xi_q + cf * w * vo.d + il.kffi * io.q;

    // Current controller with active damping.
    const double vd_cv = il.kpc * (id_ref - icv.d) + il.kic * gamma_d - w * lf * icv.q +
                         il.kffv * vo.d - il.kad * (vo.d - phi_d);
    const double vq_cv = il.kpc * (iq_ref - icv.q) + il.kic * gamma_q + w * lf * icv.d +
                         il.kffv * vo.q - il.kad * (vo.q - phi_q);

    dx[0] = vd_ref - vo.d;
    dx[1] = vq_ref - vo.q;
    dx[2] = id_ref - icv.d;
    dx[3] = iq_ref - icv.q;
    dx[4] = il.omega_ad * (vo.d - phi_d);
    dx[5] = il.omega_ad * (vo.q - phi_q);

    return {{vd_cv, vq_cv}, {vd_cv / v_dc, vq_cv / v_dc}};
}

ConverterOutput converter_output(const AverageConverter& c, DQ m, double v_dc) {
    ConverterOutput out;
    const double mag = std::hypot(m.d, m.q);
    if (mag > c.m_max) {
        const double s = c.m_max / mag;
        m = {m.d * s, m.q * s};
        out.clamped = true;
    }
    out.v_cnv = {m.d * v_dc, m.q * v_dc};
    return out;
}

FilterMeasurements filter_measurements(std::span<const double> x) {
    return {{x[0], x[1]}, {x[2], x[3]}, {x[4], x[5]}};
}

Complex filter_eval(const FilterModel& f, std::span<const double> x, DQ v_cnv, Complex v_grid,
                    double theta, double omega_sys, double omega_b, std::span<double> dx) {
    const Complex j{0.0, 1.0};
    const Complex i_cv{x[0], x[1]};
    const Complex v_o{x[2], x[3]};
    const Complex i_o{x[4], x[5]};
    const Complex v_g = as_complex(to_device_frame(v_grid, theta));
    const Complex v_c = as_complex(v_cnv);

    const auto write = [&](std::size_t k, Complex z) {
        dx[k] = z.real();
        dx[k + 1] = z.imag();
    };

    std::visit(
        [&](const auto& p) {
            write(0, (omega_b / p.lf) * (v_c - v_o - (p.rf + j * omega_sys * p.lf) * i_cv));
            write(2, (omega_b / p.cf) * (i_cv - i_o - j * omega_sys * p.cf * v_o));
            const Complex grid_drop = v_o - v_g - (p.rg + j * omega_sys * p.lg) * i_o;
            if constexpr (std::is_same_v<std::decay_t<decltype(p)>, LCLFilter>) {
                write(4, (omega_b / p.lg) * grid_drop);
            } else {
                write(4, grid_drop);
            }
        },
        f);
    return i_o * std::polar(1.0, theta);
}

Complex inverter_output_power(std::span<const double> x) {
    const auto m = filter_measurements(x.subspan(InverterLayout::filter, 6));
    return as_complex(m.v_o) * std::conj(as_complex(m.i_o));
}

InverterPorts inverter_residual(const DynamicInverter& inv, std::span<const double> x,
                                Complex v_bus, double omega_b, std::span<double> dx) {
    using L = InverterLayout;
    const auto xs = [&](std::size_t off, std::size_t n) { return x.subspan(off, n); };
    const auto ds = [&](std::size_t off, std::size_t n) { return dx.subspan(off, n); };

    InverterPorts port;
    port.omega_olc = x[L::outer];
    port.theta_olc = x[L::outer + 1];
    port.theta_pll = x[L::pll + 3];
    port.meas = filter_measurements(xs(L::filter, 6));
    port.v_dc = inv.dc.v_dc;

    const Complex v_o_ri = from_device_frame(port.meas.v_o, port.theta_olc);
    const PllOutput pll = pll_eval(inv.pll, xs(L::pll, 4), v_o_ri, omega_b, ds(L::pll, 4));
    port.omega_pll = pll.omega_pll;
    port.voltage_lost = pll.voltage_lost;

    const Complex s = as_complex(port.meas.v_o) * std::conj(as_complex(port.meas.i_o));
    port.p_meas = s.real();
    port.q_meas = s.imag();

    const OuterLoopOutput ol = outer_loop_eval(inv.outer, xs(L::outer, 3), port.p_meas,
                                               port.q_meas, port.omega_pll, inv.refs, omega_b,
                                               ds(L::outer, 3));
    port.v_ref_inner = ol.v_ref_inner;

    const auto [cf, lf] = std::visit([](const auto& p) { return std::pair{p.cf, p.lf}; }, inv.filter);
    const InnerLoopOutput il = inner_loop_eval(inv.inner, xs(L::inner, 6), port.v_ref_inner,
                                               port.meas, port.omega_olc, cf, lf, port.v_dc,
                                               ds(L::inner, 6));
    port.m = il.m;

    const ConverterOutput cnv = converter_output(inv.converter, il.m, port.v_dc);
    port.v_cnv = cnv.v_cnv;
    port.modulation_clamped = cnv.clamped;

    port.i_inj = filter_eval(inv.filter, xs(L::filter, 6), port.v_cnv, v_bus, port.theta_olc,
                             port.omega_olc, omega_b, ds(L::filter, 6));
    return port;
}

}  // namespace pst
