#include <doctest.h>

#include <cmath>
#include <numbers>

#include "pst/initialization.hpp"
#include "pst/network.hpp"
#include "support.hpp"

using namespace pst;

namespace {

double max_abs(std::span<const double> v) {
    double m = 0.0;
    for (double x : v) m = std::max(m, std::abs(x));
    return m;
}

std::span<const double> view(const Eigen::VectorXd& v) {
    return {v.data(), static_cast<std::size_t>(v.size())};
}

}  // namespace

TEST_CASE("power flow with no injections is flat") {
    System s = test::two_bus();
    s.buses[0].voltage_magnitude = 1.02;
    s.buses.push_back(test::bus(3, BusType::PQ));
    s.branches.push_back(test::line("l23", 2, 3, 0.01, 0.2));
    const PowerFlowResult pf = solve_powerflow(s);
    for (const Complex& v : pf.V) {
        CHECK(std::abs(v) == doctest::Approx(1.02).epsilon(1e-12));
        CHECK(std::abs(std::arg(v)) < 1e-12);
    }
}

TEST_CASE("two-bus power flow against the closed form") {
    System s = test::two_bus(0.5);
    s.static_injections.push_back(test::load("ld", 2, 0.5, 0.0));
    const PowerFlowResult pf = solve_powerflow(s);
    // V^4 - V^2 + (P X)^2 = 0, upper root; sin(2 theta) = 2 P X
    const double V = std::sqrt((1.0 + std::sqrt(1.0 - 4.0 * 0.25 * 0.25)) / 2.0);
    const double theta = 0.5 * std::asin(2.0 * 0.5 * 0.5);
    CHECK(std::abs(pf.V[1]) == doctest::Approx(V).epsilon(1e-10));
    CHECK(std::arg(pf.V[1]) == doctest::Approx(-theta).epsilon(1e-10));
    CHECK(std::abs(pf.V[1]) == doctest::Approx(std::cos(std::numbers::pi / 12.0)).epsilon(1e-10));
    CHECK(pf.mismatch < 1e-10);
}

TEST_CASE("case 1 power flow") {
    const System s = test::bundled("case1_threebus").system;
    const PowerFlowResult pf = solve_powerflow(s);
    CHECK(pf.mismatch < 1e-10);
    CHECK(std::abs(pf.V[0]) == doctest::Approx(1.02));
    CHECK(std::abs(pf.V[1]) == doctest::Approx(1.0142));
    CHECK(std::abs(pf.V[2]) == doctest::Approx(1.0059));
    // independent check of the injections
    const auto Y = build_ybus(s.branches, s.buses);
    for (int k = 0; k < 3; ++k) {
        Complex i = 0.0;
        for (int m = 0; m < 3; ++m) i += Y(k, m) * pf.V[static_cast<std::size_t>(m)];
        CHECK(std::abs(pf.V[static_cast<std::size_t>(k)] * std::conj(i) - pf.S_inj[static_cast<std::size_t>(k)]) < 1e-10);
    }
    CHECK(pf.S_inj[1].real() == doctest::Approx(1.0 - 1.5));
    CHECK(pf.S_inj[2].real() == doctest::Approx(1.0 - 0.5));
}

TEST_CASE("infeasible power flow") {
    System s = test::two_bus(0.5);
    s.static_injections.push_back(test::load("ld", 2, 10.0, 0.0));
    CHECK_THROWS_AS(solve_powerflow(s), InitializationError);
}

TEST_CASE("classical back-solve") {
    DynamicDevice d = test::omib().dynamic_devices[0];
    const Complex v = std::polar(1.0, 0.05);
    const Complex s(0.5, 0.1);
    std::vector<ReferenceAdjustment> report;
    const auto x = initialize_device(d, v, s, kTwoPi * 60.0, &report);
    const Complex i = std::conj(s / v);
    const Complex e = v + Complex(0.0, 0.2995) * i;
    CHECK(x[0] == doctest::Approx(std::arg(e)).epsilon(1e-10));
    CHECK(x[1] == doctest::Approx(1.0));
    const auto& g = std::get<DynamicGenerator>(d);
    CHECK(std::get<Classical>(g.machine).eq_p == doctest::Approx(std::abs(e)).epsilon(1e-10));
    bool reported = false;
    for (const auto& a : report) {
        if (a.owner == "OMIB_Gen" && a.quantity == "eq_p") {
            reported = true;
            CHECK(a.before == 0.7087);
            CHECK(a.after == doctest::Approx(std::abs(e)));
        }
    }
    CHECK(reported);
}

TEST_CASE("every generator combination back-solves") {
    const Complex v = std::polar(1.01, 0.1);
    const Complex s(0.8, 0.2);
    const std::vector<MachineModel> machines = {Classical{}, OneDOneQ{}, MarconatoVI{}, AndersonFouadVI{}};
    const std::vector<ShaftModel> shafts = {SingleMass{}, FiveMass{}};
    const std::vector<AVRModel> avrs = {AVRFixed{}, AVRTypeI{}, AVRTypeII{}};
    const std::vector<PrimeMover> tgs = {TGFixed{}, TGTypeI{}, TGTypeII{}};
    const std::vector<PSSModel> psss = {PSSFixed{}, PSSSimplifiedDroop{}};
    int count = 0;
    for (const auto& m : machines)
        for (const auto& sh : shafts)
            for (const auto& a : avrs)
                for (const auto& t : tgs)
                    for (const auto& p : psss) {
                        DynamicGenerator g;
                        g.name = "g";
                        g.bus = 1;
                        g.refs.P_ref = 0.3;
                        g.machine = m;
                        g.shaft = sh;
                        g.avr = a;
                        g.tg = t;
                        g.pss = p;
                        DynamicDevice d = g;
                        CAPTURE(count);
                        const auto x = initialize_device(d, v, s, kTwoPi * 60.0);
                        std::vector<double> dx(x.size());
                        const Complex i = device_residual(d, x, v, kTwoPi * 60.0, dx);
                        CHECK(max_abs(dx) < 1e-9);
                        CHECK(std::abs(v * std::conj(i) - s) < 1e-9);
                        ++count;
                    }
    CHECK(count == 144);
}

TEST_CASE("every inverter configuration back-solves") {
    const Complex v = std::polar(1.0, -0.05);
    const Complex s(0.6, -0.1);
    DynamicInverter base = std::get<DynamicInverter>(test::bundled("case2_vsm_step").system.dynamic_devices[0]);
    for (int variant = 0; variant < 4; ++variant) {
        CAPTURE(variant);
        DynamicInverter inv = base;
        if (variant & 1) inv.filter = LCFilter{};
        if (variant & 2) inv.outer.mode = OuterLoopMode::GridFeeding;
        DynamicDevice d = inv;
        const auto x = initialize_device(d, v, s, kTwoPi * 50.0);
        std::vector<double> dx(x.size());
        const Complex i = device_residual(d, x, v, kTwoPi * 50.0, dx);
        CHECK(max_abs(dx) < 1e-9);
        CHECK(std::abs(v * std::conj(i) - s) < 1e-9);
    }
}

TEST_CASE("infeasible back-solve") {
    DynamicGenerator g = std::get<DynamicGenerator>(test::bundled("case1_threebus").system.dynamic_devices[0]);
    auto& avr = std::get<AVRTypeI>(g.avr);
    avr.Vr_max = 0.1;
    DynamicDevice d = g;
    CHECK_THROWS_AS(initialize_device(d, 1.0, Complex(1.0, 0.4), kTwoPi * 60.0), InitializationError);
}

TEST_CASE("equilibrium search") {
    const InitializationResult init = initialize_system(test::bundled("case1_threebus").system);
    CHECK(init.residual_norm < 1e-9);
    DaeModel model(init.system);

    SUBCASE("exact guess") {
        const EquilibriumResult r = find_equilibrium(model, init.u0);
        CHECK(r.iterations <= 1);
        CHECK((r.u - init.u0).cwiseAbs().maxCoeff() < 1e-9);
    }
    SUBCASE("perturbed guess") {
        Eigen::VectorXd g = init.u0;
        for (Eigen::Index k = 0; k < g.size(); ++k) g(k) += (k % 2 ? 1e-3 : -1e-3);
        const EquilibriumResult r = find_equilibrium(model, g);
        CHECK(r.residual_norm < 1e-9);
        CHECK((r.u - init.u0).cwiseAbs().maxCoeff() < 1e-9);
    }
    SUBCASE("no equilibrium") {
        std::vector<BranchData> weak = init.system.branches;
        for (auto& b : weak) b.X *= 40.0;
        model.set_admittance(model.compose_admittance(weak));
        CHECK_THROWS_AS(find_equilibrium(model, init.u0), InitializationError);
    }
}

TEST_CASE("initialization report") {
    const InitializationResult init = initialize_system(test::bundled("case2_vsm_step").system);
    bool p = false, v = false;
    for (const auto& a : init.adjustments) {
        if (a.owner == "VSM" && a.quantity == "P_ref") p = true;
        if (a.owner == "VSM" && a.quantity == "V_ref") v = true;
    }
    CHECK(p);
    CHECK(v);
    DaeModel model(init.system);
    std::vector<double> r(model.size());
    model.residual(0.0, view(init.u0), r);
    CHECK(max_abs(r) < 1e-9);
}
