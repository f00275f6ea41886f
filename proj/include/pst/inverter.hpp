#pragma once

// Inverter components and their composition into a current-injecting device.
//
// Internal dynamics live in the outer-loop (theta_olc) reference frame with the
// d-axis at angle theta_olc: x_dq = x_RI * exp(-j theta_olc). The PLL keeps its
// own frame at theta_pll.

#include <cstddef>
#include <span>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "pst/generator.hpp"
#include "pst/types.hpp"

namespace pst {

/// RI phasor into a frame whose d-axis sits at angle theta.
DQ to_device_frame(Complex v_ri, double theta);
Complex from_device_frame(DQ x, double theta);

// Filters ---------------------------------------------------------------------

struct LCLFilter {
    double lf = 0.08;
    double rf = 0.003;
    double cf = 0.074;
    double lg = 0.2;
    double rg = 0.01;
    bool operator==(const LCLFilter&) const = default;
};

/// LC filter with an algebraic coupling impedance (rg + j lg) to the grid node.
struct LCFilter {
    double lf = 0.08;
    double rf = 0.003;
    double cf = 0.074;
    double lg = 0.2;
    double rg = 0.01;
    bool operator==(const LCFilter&) const = default;
};

using FilterModel = std::variant<LCLFilter, LCFilter>;

// Converter and DC side -------------------------------------------------------

/// Average model: v_cnv = m v_dc with |m| <= m_max.
struct AverageConverter {
    double m_max = 2.0;
    bool operator==(const AverageConverter&) const = default;
};

struct FixedDCSource {
    double v_dc = 1.0;
    bool operator==(const FixedDCSource&) const = default;
};

// Controls --------------------------------------------------------------------

/// Virtual impedance followed by cascaded voltage and current PI controllers
/// with active damping.
struct InnerLoop {
    double kpv = 0.59;
    double kiv = 736.0;
    double kffv = 0.0;
    double rv = 0.0;
    double lv = 0.2;
    double kpc = 1.27;
    double kic = 14.3;
    double kffi = 0.0;
    double omega_ad = 50.0;
    double kad = 0.2;
    bool operator==(const InnerLoop&) const = default;
};

enum class OuterLoopMode { GridForming, GridFeeding };

/// Virtual-inertia active power control with reactive power droop.
/// In grid-feeding mode omega_olc becomes algebraic and tracks omega_pll.
struct OuterLoop {
    OuterLoopMode mode = OuterLoopMode::GridForming;
    double Ta = 2.0;
    double kd = 400.0;
    double kw = 20.0;
    double kq = 0.2;
    double omega_f = 1000.0;
    bool operator==(const OuterLoop&) const = default;
};

/// Synchronous-reference-frame PLL with low-pass filtered voltage.
struct SrfPll {
    double omega_lp = 500.0;
    double kp_pll = 0.084;
    double ki_pll = 4.69;
    bool operator==(const SrfPll&) const = default;
};

struct DynamicInverter {
    std::string name;
    int bus = 0;
    double base_MVA = 100.0;
    References refs;
    OuterLoop outer;
    InnerLoop inner;
    AverageConverter converter;
    FilterModel filter = LCLFilter{};
    SrfPll pll;
    FixedDCSource dc;
    bool operator==(const DynamicInverter&) const = default;
};

// Local state layout (19 entries, fixed): PLL, outer loop, inner loop, filter.
struct InverterLayout {
    static constexpr std::size_t pll = 0;       // vpll_d, vpll_q, eps_pll, theta_pll
    static constexpr std::size_t outer = 4;     // omega_olc, theta_olc, q_m
    static constexpr std::size_t inner = 7;     // xi_d, xi_q, gamma_d, gamma_q, phi_d, phi_q
    static constexpr std::size_t filter = 13;   // icv_d, icv_q, vo_d, vo_q, io_d, io_q
    static constexpr std::size_t size = 19;
};

std::vector<std::string> state_names(const DynamicInverter& inv);
/// true for differential entries, false for local algebraic ones.
std::vector<bool> differential_mask(const DynamicInverter& inv);

// Component evaluations -------------------------------------------------------

struct PllOutput {
    double omega_pll = 1.0;
    bool voltage_lost = false;
};

/// v_o is the terminal voltage in the network RI frame.
PllOutput pll_eval(const SrfPll& pll, std::span<const double> x, Complex v_o, double omega_b,
                   std::span<double> dx);

struct OuterLoopOutput {
    double omega_olc = 1.0;
    double theta_olc = 0.0;
    double v_ref_inner = 1.0;
};

/// In grid-feeding mode dx[0] receives the algebraic residual omega_olc - omega_pll.
OuterLoopOutput outer_loop_eval(const OuterLoop& ol, std::span<const double> x, double p_meas,
                                double q_meas, double omega_pll, const References& refs,
                                double omega_b, std::span<double> dx);

/// Filter quantities seen by the controllers, all in the theta_olc frame.
struct FilterMeasurements {
    DQ i_cv;
    DQ v_o;
    DQ i_o;
};

struct InnerLoopOutput {
    DQ v_cv_ref;
    DQ m;
};

InnerLoopOutput inner_loop_eval(const InnerLoop& il, std::span<const double> x,
                                double v_ref_inner, const FilterMeasurements& meas,
                                double omega_olc, double cf, double lf, double v_dc,
                                std::span<double> dx);

struct ConverterOutput {
    DQ v_cnv;
    bool clamped = false;
};

ConverterOutput converter_output(const AverageConverter& c, DQ m, double v_dc);

/// Filter dynamics in the device frame rotating at omega_sys (per unit).
/// v_grid is the RI bus voltage; theta rotates it into the device frame.
/// For the LC variant dx[4], dx[5] receive the algebraic grid-current residual.
/// Returns the injected current (device base, RI frame).
Complex filter_eval(const FilterModel& f, std::span<const double> x, DQ v_cnv, Complex v_grid,
                    double theta, double omega_sys, double omega_b, std::span<double> dx);

FilterMeasurements filter_measurements(std::span<const double> x_filter);

struct InverterPorts {
    double omega_pll = 1.0;
    double omega_olc = 1.0;
    double theta_olc = 0.0;
    double theta_pll = 0.0;
    double v_ref_inner = 1.0;
    double p_meas = 0.0;
    double q_meas = 0.0;
    double v_dc = 1.0;
    DQ m;
    DQ v_cnv;
    FilterMeasurements meas;
    bool modulation_clamped = false;
    bool voltage_lost = false;
    Complex i_inj;  // device base, network RI frame
};

/// Full device residual: PLL -> outer loop -> inner loop -> converter -> filter.
InverterPorts inverter_residual(const DynamicInverter& inv, std::span<const double> x,
                                Complex v_bus, double omega_b, std::span<double> dx);

/// Measured output power (p, q) at the filter capacitor from local states.
Complex inverter_output_power(std::span<const double> x);

}  // namespace pst
