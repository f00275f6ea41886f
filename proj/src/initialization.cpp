#include "pst/initialization.hpp"

#include <array>
#include <cmath>
#include <sstream>

#include "pst/newton.hpp"

namespace pst {

namespace {

std::string fmt(double x) {
    std::ostringstream os;
    os.precision(6);
    os << x;
    return os.str();
}

double device_scale(const DynamicDevice& d, const System& sys) {
    return per_unit_rebase(1.0, Quantity::Power, device_base(d), sys.base_MVA);
}

}  // namespace

// ---------------------------------------------------------------------------
// Power flow
// ---------------------------------------------------------------------------

PowerFlowResult solve_powerflow(const System& sys) {
    validate(sys);
    const std::size_t nb = sys.buses.size();
    const AdmittanceMatrix Y = build_ybus(sys.branches, sys.buses);

    std::vector<Complex> S_spec(nb, Complex{});
    for (const auto& inj : sys.static_injections) {
        if (const auto* l = std::get_if<ConstantImpedanceLoad>(&inj)) {
            S_spec[sys.bus_position_or_throw(l->bus)] -= Complex{l->P, l->Q};
        }
    }
    for (const auto& d : sys.dynamic_devices) {
        const auto& r = device_refs(d);
        S_spec[sys.bus_position_or_throw(device_bus(d))] +=
            device_scale(d, sys) * Complex{r.P_ref, r.Q_ref};
    }

    // Unknowns: angles of non-slack buses, then magnitudes of PQ buses.
    std::vector<std::size_t> ang, mag;
    for (std::size_t k = 0; k < nb; ++k) {
        if (sys.buses[k].type != BusType::Slack) ang.push_back(k);
        if (sys.buses[k].type == BusType::PQ) mag.push_back(k);
    }
    std::vector<double> Vm(nb), Va(nb);
    for (std::size_t k = 0; k < nb; ++k) {
        Vm[k] = sys.buses[k].voltage_magnitude;
        Va[k] = sys.buses[k].voltage_angle;
    }
    const auto n_a = static_cast<Eigen::Index>(ang.size());
    const auto n_m = static_cast<Eigen::Index>(mag.size());

    const auto voltages = [&](const Eigen::VectorXd& z) {
        std::vector<double> m = Vm, a = Va;
        for (Eigen::Index i = 0; i < n_a; ++i) a[ang[i]] = z(i);
        for (Eigen::Index i = 0; i < n_m; ++i) m[mag[i]] = z(n_a + i);
        Eigen::VectorXcd V(static_cast<Eigen::Index>(nb));
        for (std::size_t k = 0; k < nb; ++k) V(static_cast<Eigen::Index>(k)) = std::polar(m[k], a[k]);
        return V;
    };
    const auto injections = [&](const Eigen::VectorXcd& V) {
        const Eigen::VectorXcd I = Y * V;
        return Eigen::VectorXcd(V.array() * I.array().conjugate());
    };

    const VectorFunction F = [&](const Eigen::VectorXd& z, Eigen::VectorXd& out) {
        const Eigen::VectorXcd S = injections(voltages(z));
        out.resize(n_a + n_m);
        for (Eigen::Index i = 0; i < n_a; ++i) out(i) = S(static_cast<Eigen::Index>(ang[i])).real() - S_spec[ang[i]].real();
        for (Eigen::Index i = 0; i < n_m; ++i) out(n_a + i) = S(static_cast<Eigen::Index>(mag[i])).imag() - S_spec[mag[i]].imag();
    };

    Eigen::VectorXd z(n_a + n_m);
    for (Eigen::Index i = 0; i < n_a; ++i) z(i) = Va[ang[i]];
    for (Eigen::Index i = 0; i < n_m; ++i) z(n_a + i) = Vm[mag[i]];

    NewtonOptions opt;
    opt.tolerance = 1e-10;
    opt.max_iterations = 20;
    const NewtonResult nr = damped_newton(F, z, opt);
    if (!nr.converged) {
        throw InitializationError("power flow did not converge in " + std::to_string(nr.iterations) +
                                  " iterations; final mismatch " + fmt(nr.residual_norm));
    }

    PowerFlowResult pf;
    const Eigen::VectorXcd V = voltages(z);
    const Eigen::VectorXcd S = injections(V);
    for (std::size_t k = 0; k < nb; ++k) {
        pf.V.push_back(V(static_cast<Eigen::Index>(k)));
        pf.S_inj.push_back(S(static_cast<Eigen::Index>(k)));
    }
    pf.iterations = nr.iterations;
    pf.mismatch = nr.residual_norm;
    return pf;
}

// ---------------------------------------------------------------------------
// Device back-solve
// ---------------------------------------------------------------------------

namespace {

struct FreeParameter {
    double* value = nullptr;
    const char* name = "";
};

struct DeviceGuess {
    std::vector<double> x;
    std::array<FreeParameter, 2> free;
};

DeviceGuess guess_generator(DynamicGenerator& g, Complex v, Complex i) {
    const GeneratorLayout l = layout(g);
    DeviceGuess out;
    out.x.assign(l.size, 0.0);
    auto& x = out.x;

    // Machine: rotor angle and internal voltages.
    double delta = 0.0;
    double V_f = 1.0;
    std::visit(
        [&](auto& m) {
            using T = std::decay_t<decltype(m)>;
            if constexpr (std::is_same_v<T, Classical>) {
                const Complex E = v + Complex{m.R, m.Xd_p} * i;
                delta = std::arg(E);
                m.eq_p = std::abs(E);
            } else if constexpr (std::is_same_v<T, OneDOneQ>) {
                delta = std::arg(v + Complex{m.R, m.Xq} * i);
                const DQ vd = to_rotor_frame(v, delta);
                const DQ id = to_rotor_frame(i, delta);
                x[l.machine] = vd.q + m.R * id.q + m.Xd_p * id.d;
                x[l.machine + 1] = vd.d + m.R * id.d - m.Xq_p * id.q;
                V_f = x[l.machine] + (m.Xd - m.Xd_p) * id.d;
            } else {
                const SixthOrderParams& p = m.p;
                SubtransientCoupling c{};
                if constexpr (std::is_same_v<T, MarconatoVI>) c = marconato_coupling(m);
                delta = std::arg(v + Complex{p.R, p.Xq} * i);
                const DQ vd = to_rotor_frame(v, delta);
                const DQ id = to_rotor_frame(i, delta);
                const double eq_pp = vd.q + p.R * id.q + p.Xd_pp * id.d;
                const double ed_pp = vd.d + p.R * id.d - p.Xq_pp * id.q;
                V_f = eq_pp + (p.Xd - p.Xd_pp) * id.d;
                x[l.machine] = eq_pp + (p.Xd_p - p.Xd_pp + c.gamma_d) * id.d - (c.T_AA / p.Td0_p) * V_f;
                x[l.machine + 1] = (p.Xq - p.Xq_p - c.gamma_q) * id.q;
                x[l.machine + 2] = eq_pp;
                x[l.machine + 3] = ed_pp;
            }
        },
        g.machine);

    std::vector<double> dx(l.size, 0.0);
    x[l.shaft] = delta;
    x[l.shaft + 1] = 1.0;
    const DQ vdq = to_rotor_frame(v, delta);
    const double tau_e =
        machine_eval(g.machine, std::span<const double>(x).subspan(l.machine, l.shaft - l.machine), vdq,
                     V_f, std::span<double>(dx).subspan(l.machine, l.shaft - l.machine))
            .tau_e;
    const double tau_m = tau_e;

    if (const auto* fm = std::get_if<FiveMass>(&g.shaft)) {
        const double d_lp = delta + tau_m / fm->K_lp;
        const double d_ip = d_lp + tau_m * (fm->F_hp + fm->F_ip) / fm->K_ip;
        const double d_hp = d_ip + tau_m * fm->F_hp / fm->K_hp;
        const std::array<double, 10> s{delta, 1.0, d_hp, 1.0, d_ip, 1.0, d_lp, 1.0, delta, 1.0};
        std::copy(s.begin(), s.end(), x.begin() + static_cast<std::ptrdiff_t>(l.shaft));
    }

    // Prime mover: P_ref so that tau_m = tau_e at omega = 1.
    const double dw = g.refs.omega_ref - 1.0;
    std::visit(
        [&](const auto& tg) {
            using T = std::decay_t<decltype(tg)>;
            if constexpr (std::is_same_v<T, TGFixed>) {
                g.refs.P_ref = tau_m / tg.efficiency;
            } else if constexpr (std::is_same_v<T, TGTypeI>) {
                g.refs.P_ref = tau_m - dw / tg.droop;
                const double xg1 = tau_m;
                const double xg2 = (1.0 - tg.T3 / tg.Tc) * xg1;
                x[l.tg] = xg1;
                x[l.tg + 1] = xg2;
                x[l.tg + 2] = (1.0 - tg.T4 / tg.T5) * xg1;
            } else {
                x[l.tg] = (1.0 / tg.droop) * (1.0 - tg.T1 / tg.T2) * dw;
                g.refs.P_ref = tau_m - (1.0 / tg.droop) * (tg.T1 / tg.T2) * dw - x[l.tg];
            }
        },
        g.tg);

    // Exciter: V_ref (or V_f) so that the field voltage holds.
    const double v_pss = pss_output(g.pss, 1.0, tau_e, g.refs.P_ref);
    const double vm = std::abs(v);
    std::visit(
        [&](auto& a) {
            using T = std::decay_t<decltype(a)>;
            if constexpr (std::is_same_v<T, AVRFixed>) {
                if (!std::holds_alternative<Classical>(g.machine)) a.V_f = V_f;
            } else if constexpr (std::is_same_v<T, AVRTypeI>) {
                const double vr1 = (a.Ke + exciter_saturation(a, V_f)) * V_f;
                x[l.avr] = vm;
                x[l.avr + 1] = vr1;
                x[l.avr + 2] = (a.Kf / a.Tf) * V_f;
                x[l.avr + 3] = V_f;
                if (!std::holds_alternative<Classical>(g.machine)) {
                    g.refs.V_ref = vm + vr1 / a.Ka - v_pss;
                }
            } else {
                x[l.avr] = vm;
                x[l.avr + 1] = V_f;
                if (!std::holds_alternative<Classical>(g.machine)) {
                    g.refs.V_ref = vm + V_f / a.Ka - v_pss;
                }
            }
        },
        g.avr);

    if (auto* c = std::get_if<Classical>(&g.machine)) {
        out.free[0] = {&c->eq_p, "eq_p"};
    } else if (auto* f = std::get_if<AVRFixed>(&g.avr)) {
        out.free[0] = {&f->V_f, "V_f"};
    } else {
        out.free[0] = {&g.refs.V_ref, "V_ref"};
    }
    out.free[1] = {&g.refs.P_ref, "P_ref"};
    return out;
}

DeviceGuess guess_inverter(DynamicInverter& inv, Complex v, Complex i) {
    using L = InverterLayout;
    DeviceGuess out;
    out.x.assign(L::size, 0.0);
    auto& x = out.x;
    const Complex j{0.0, 1.0};

    const auto [lf, rf, cf, lg, rg] = std::visit(
        [](const auto& f) { return std::array<double, 5>{f.lf, f.rf, f.cf, f.lg, f.rg}; }, inv.filter);
    const InnerLoop& il = inv.inner;

    const Complex vo_ri = v + Complex{rg, lg} * i;
    const Complex E = vo_ri + Complex{il.rv, il.lv} * i;
    const double theta = std::arg(E);
    const double v_ref_inner = std::abs(E);
    const Complex rot = std::polar(1.0, -theta);
    const Complex vo = vo_ri * rot;
    const Complex io = i * rot;
    const Complex icv = io + j * cf * vo;
    const Complex vcv = vo + Complex{rf, lf} * icv;

    x[L::pll] = std::abs(vo_ri);
    x[L::pll + 1] = 0.0;
    x[L::pll + 2] = 0.0;
    x[L::pll + 3] = std::arg(vo_ri);

    const Complex s = vo * std::conj(io);
    x[L::outer] = 1.0;
    x[L::outer + 1] = theta;
    x[L::outer + 2] = s.imag();

    x[L::inner] = (icv.real() + cf * vo.imag() - il.kffi * io.real()) / il.kiv;
    x[L::inner + 1] = (icv.imag() - cf * vo.real() - il.kffi * io.imag()) / il.kiv;
    x[L::inner + 2] = (vcv.real() + lf * icv.imag() - il.kffv * vo.real()) / il.kic;
    x[L::inner + 3] = (vcv.imag() - lf * icv.real() - il.kffv * vo.imag()) / il.kic;
    x[L::inner + 4] = vo.real();
    x[L::inner + 5] = vo.imag();

    x[L::filter] = icv.real();
    x[L::filter + 1] = icv.imag();
    x[L::filter + 2] = vo.real();
    x[L::filter + 3] = vo.imag();
    x[L::filter + 4] = io.real();
    x[L::filter + 5] = io.imag();

    auto& r = inv.refs;
    if (inv.outer.mode == OuterLoopMode::GridForming) {
        r.P_ref = s.real() - inv.outer.kw * (r.omega_ref - 1.0);
    }
    r.V_ref = v_ref_inner - inv.outer.kq * (r.Q_ref - s.imag());

    out.free[0] = {&r.V_ref, "V_ref"};
    out.free[1] = {&r.P_ref, "P_ref"};
    return out;
}

void check_limits(const DynamicDevice& d, std::span<const double> x, Complex v, double omega_b) {
    const std::string who = "device '" + device_name(d) + "': ";
    if (const auto* g = std::get_if<DynamicGenerator>(&d)) {
        const GeneratorLayout l = layout(*g);
        if (const auto* a = std::get_if<AVRTypeI>(&g->avr)) {
            const double vr1 = x[l.avr + 1];
            if (vr1 > a->Vr_max + 1e-9 || vr1 < a->Vr_min - 1e-9) {
                throw InitializationError(who + "required regulator output " + fmt(vr1) +
                                          " is outside the AVR limits");
            }
        } else if (const auto* a2 = std::get_if<AVRTypeII>(&g->avr)) {
            const double vr = x[l.avr + 1];
            if (vr > a2->Vr_max + 1e-9 || vr < a2->Vr_min - 1e-9) {
                throw InitializationError(who + "required field voltage " + fmt(vr) +
                                          " is outside the AVR limits");
            }
        }
        if (const auto* tg = std::get_if<TGTypeI>(&g->tg)) {
            const double p_in = g->refs.P_ref + (g->refs.omega_ref - 1.0) / tg->droop;
            if (p_in > tg->P_max + 1e-9 || p_in < tg->P_min - 1e-9) {
                throw InitializationError(who + "required governor power " + fmt(p_in) +
                                          " is outside [P_min, P_max]");
            }
        }
    } else {
        std::vector<double> dx(x.size());
        const InverterPorts p = inverter_residual(std::get<DynamicInverter>(d), x, v, omega_b, dx);
        if (p.modulation_clamped) {
            throw InitializationError(who + "required modulation index exceeds m_max");
        }
    }
}

}  // namespace

std::vector<double> initialize_device(DynamicDevice& device, Complex v_bus, Complex s_inj,
                                      double omega_b, std::vector<ReferenceAdjustment>* report) {
    if (std::abs(v_bus) == 0.0) {
        throw InitializationError("device '" + device_name(device) + "' sits on a bus with zero voltage");
    }
    const Complex i_target = std::conj(s_inj / v_bus);
    const DynamicDevice before = device;

    DeviceGuess guess = std::visit(
        [&](auto& dev) {
            using T = std::decay_t<decltype(dev)>;
            if constexpr (std::is_same_v<T, DynamicGenerator>) {
                return guess_generator(dev, v_bus, i_target);
            } else {
                return guess_inverter(dev, v_bus, i_target);
            }
        },
        device);

    const auto n = static_cast<Eigen::Index>(guess.x.size());
    std::vector<double> xbuf(guess.x.size()), out(guess.x.size());
    const VectorFunction F = [&](const Eigen::VectorXd& z, Eigen::VectorXd& r) {
        for (Eigen::Index k = 0; k < n; ++k) xbuf[static_cast<std::size_t>(k)] = z(k);
        *guess.free[0].value = z(n);
        *guess.free[1].value = z(n + 1);
        const Complex i = device_residual(device, xbuf, v_bus, omega_b, out);
        r.resize(n + 2);
        for (Eigen::Index k = 0; k < n; ++k) r(k) = out[static_cast<std::size_t>(k)];
        r(n) = (i - i_target).real();
        r(n + 1) = (i - i_target).imag();
    };

    Eigen::VectorXd z(n + 2);
    for (Eigen::Index k = 0; k < n; ++k) z(k) = guess.x[static_cast<std::size_t>(k)];
    z(n) = *guess.free[0].value;
    z(n + 1) = *guess.free[1].value;

    NewtonOptions opt;
    opt.tolerance = 1e-12;
    const NewtonResult nr = damped_newton(F, z, opt);
    Eigen::VectorXd r;
    F(z, r);
    const double norm = r.lpNorm<Eigen::Infinity>();
    if (!(norm < 1e-10)) {
        throw InitializationError("device '" + device_name(device) +
                                  "' could not be initialized; local residual " + fmt(norm) +
                                  (nr.singular ? " (singular Jacobian)" : ""));
    }
    std::vector<double> x(z.data(), z.data() + n);
    check_limits(device, x, v_bus, omega_b);

    if (report) {
        const std::string& name = device_name(device);
        const auto& rb = device_refs(before);
        const auto& ra = device_refs(device);
        const auto note = [&](const char* q, double b, double a) {
            if (b != a) report->push_back({name, q, b, a});
        };
        note("P_ref", rb.P_ref, ra.P_ref);
        note("Q_ref", rb.Q_ref, ra.Q_ref);
        note("V_ref", rb.V_ref, ra.V_ref);
        if (const auto* g = std::get_if<DynamicGenerator>(&device)) {
            const auto& gb = std::get<DynamicGenerator>(before);
            if (const auto* c = std::get_if<Classical>(&g->machine)) {
                note("eq_p", std::get<Classical>(gb.machine).eq_p, c->eq_p);
            }
            if (const auto* f = std::get_if<AVRFixed>(&g->avr)) {
                note("V_f", std::get<AVRFixed>(gb.avr).V_f, f->V_f);
            }
        }
    }
    return x;
}

// ---------------------------------------------------------------------------
// Equilibrium
// ---------------------------------------------------------------------------

EquilibriumResult find_equilibrium(DaeModel& model, const Eigen::VectorXd& u_guess, double tolerance) {
    const auto n = static_cast<Eigen::Index>(model.size());
    if (u_guess.size() != n) {
        throw InitializationError("equilibrium guess has the wrong size");
    }
    const VectorFunction F = [&](const Eigen::VectorXd& u, Eigen::VectorXd& r) {
        r.resize(n);
        model.residual(0.0, std::span<const double>(u.data(), static_cast<std::size_t>(n)),
                       std::span<double>(r.data(), static_cast<std::size_t>(n)));
    };
    EquilibriumResult out;
    out.u = u_guess;
    NewtonOptions opt;
    opt.tolerance = tolerance * 1e-2;
    const NewtonResult nr = damped_newton(F, out.u, opt);
    out.iterations = nr.iterations;
    out.residual_norm = nr.residual_norm;
    if (!(nr.residual_norm < tolerance)) {
        if (nr.singular) {
            throw InitializationError("equilibrium search hit a singular Jacobian; residual " +
                                      fmt(nr.residual_norm));
        }
        throw InitializationError("equilibrium search did not converge; residual " + fmt(nr.residual_norm));
    }
    return out;
}

InitializationResult initialize_system(const System& input) {
    InitializationResult res;
    res.powerflow = solve_powerflow(input);
    res.system = input;
    System& sys = res.system;
    const auto& V = res.powerflow.V;
    const std::size_t nb = sys.buses.size();

    // Power each bus must receive from its devices and sources (system base).
    std::vector<Complex> S_supply = res.powerflow.S_inj;
    for (auto& inj : sys.static_injections) {
        if (auto* l = std::get_if<ConstantImpedanceLoad>(&inj)) {
            const std::size_t k = sys.bus_position_or_throw(l->bus);
            S_supply[k] += Complex{l->P, l->Q};
            const double before = l->nominal_voltage;
            l->nominal_voltage = std::abs(V[k]);
            if (before != l->nominal_voltage) {
                res.adjustments.push_back({l->name, "nominal_voltage", before, l->nominal_voltage});
            }
        }
    }

    std::vector<int> sources_at(nb, 0);
    std::vector<double> base_at(nb, 0.0);
    for (const auto& inj : sys.static_injections) {
        if (const auto* s = std::get_if<VoltageSource>(&inj)) ++sources_at[sys.bus_position_or_throw(s->bus)];
    }
    for (const auto& d : sys.dynamic_devices) base_at[sys.bus_position_or_throw(device_bus(d))] += device_base(d);

    // Device dispatch: refs, except where a device closes the bus balance.
    std::vector<Complex> S_dev(sys.dynamic_devices.size());
    std::vector<Complex> S_rest = S_supply;
    for (std::size_t n = 0; n < sys.dynamic_devices.size(); ++n) {
        const auto& d = sys.dynamic_devices[n];
        const std::size_t k = sys.bus_position_or_throw(device_bus(d));
        const double scale = device_scale(d, sys);
        const auto& r = device_refs(d);
        const double share = device_base(d) / base_at[k];
        Complex s{r.P_ref * scale, r.Q_ref * scale};
        const BusType type = sys.buses[k].type;
        if (sources_at[k] == 0) {
            if (type == BusType::Slack) {
                s = S_supply[k] * share;
            } else if (type == BusType::PV) {
                s.imag(S_supply[k].imag() * share);
            }
        }
        S_dev[n] = s;
        S_rest[k] -= s;
    }

    for (auto& inj : sys.static_injections) {
        if (auto* src = std::get_if<VoltageSource>(&inj)) {
            const std::size_t k = sys.bus_position_or_throw(src->bus);
            const Complex s = S_rest[k] / static_cast<double>(sources_at[k]);
            const Complex i = std::conj(s / V[k]);
            const Complex E = V[k] + Complex{src->R_th, src->X_th} * i;
            res.adjustments.push_back({src->name, "V_mag", src->V_mag, std::abs(E)});
            res.adjustments.push_back({src->name, "V_angle", src->V_angle, std::arg(E)});
            src->V_mag = std::abs(E);
            src->V_angle = std::arg(E);
        }
    }

    const StateIndex idx = build_state_index(sys);
    Eigen::VectorXd u = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(idx.size()));
    for (std::size_t k = 0; k < nb; ++k) {
        u(static_cast<Eigen::Index>(2 * k)) = V[k].real();
        u(static_cast<Eigen::Index>(2 * k + 1)) = V[k].imag();
    }
    for (std::size_t n = 0; n < sys.dynamic_devices.size(); ++n) {
        auto& d = sys.dynamic_devices[n];
        const std::size_t k = sys.bus_position_or_throw(device_bus(d));
        const Complex s_dev = S_dev[n] / device_scale(d, sys);
        const auto x = initialize_device(d, V[k], s_dev, sys.omega_b(), &res.adjustments);
        const std::size_t off = idx.at(device_name(d), state_names(d).front());
        for (std::size_t j = 0; j < x.size(); ++j) u(static_cast<Eigen::Index>(off + j)) = x[j];
    }
    for (const auto& br : sys.branches) {
        if (br.kind != BranchKind::Dynamic) continue;
        const Complex vf = V[sys.bus_position_or_throw(br.from_bus)];
        const Complex vt = V[sys.bus_position_or_throw(br.to_bus)];
        const Complex i = (vf - vt) / Complex{br.R, br.X};
        const std::size_t off = idx.at(br.name, "il_r");
        u(static_cast<Eigen::Index>(off)) = i.real();
        u(static_cast<Eigen::Index>(off + 1)) = i.imag();
    }

    DaeModel model(sys);
    const EquilibriumResult eq = find_equilibrium(model, u);
    res.u0 = eq.u;
    res.residual_norm = eq.residual_norm;
    res.newton_iterations = eq.iterations;
    return res;
}

}  // namespace pst
