#include <doctest.h>

#include <sstream>

#include "pst/initialization.hpp"
#include "pst/solver.hpp"
#include "support.hpp"

using namespace pst;

namespace {

struct Run {
    InitializationResult init;
    Trajectory traj;
    AdmittanceMatrix Y_end;
};

Run run(const CaseDocument& doc, const SolverOptions& opt, std::vector<Perturbation> events, double t1) {
    Run r;
    r.init = initialize_system(doc.system);
    DaeModel model(r.init.system);
    r.traj = simulate(model, r.init.u0, doc.simulation.t_start, t1, std::move(events), opt);
    r.Y_end = model.admittance();
    return r;
}

std::vector<Perturbation> case_events(const CaseDocument& doc) {
    std::vector<Perturbation> ev;
    for (const auto& p : doc.simulation.perturbations) ev.push_back(to_perturbation(p));
    return ev;
}

double max_gap(const Trajectory& a, const Trajectory& b, std::size_t col) {
    const auto ya = a.column(col), yb = b.column(col);
    double m = 0.0;
    for (std::size_t k = 0; k < a.rows(); ++k) m = std::max(m, std::abs(ya[k] - test::interp_cubic(b.t, yb, a.t[k])));
    return m;
}

}  // namespace

TEST_CASE("BDF weights") {
    const double h = 0.1;
    const std::vector<double> n1 = {1.0, 1.0 - h};
    const auto w1 = bdf_weights(n1);
    CHECK(w1[0] == doctest::Approx(1.0 / h));
    CHECK(w1[1] == doctest::Approx(-1.0 / h));

    const std::vector<double> n2 = {1.0, 1.0 - h, 1.0 - 2.0 * h};
    const auto w2 = bdf_weights(n2);
    CHECK(w2[0] == doctest::Approx(1.5 / h));
    CHECK(w2[1] == doctest::Approx(-2.0 / h));
    CHECK(w2[2] == doctest::Approx(0.5 / h));

    // exact for polynomials up to the order on uneven nodes
    const std::vector<double> n4 = {2.0, 1.9, 1.75, 1.7, 1.5};
    const auto w4 = bdf_weights(n4);
    double d = 0.0;
    for (std::size_t k = 0; k < n4.size(); ++k) d += w4[k] * std::pow(n4[k], 4);
    CHECK(d == doctest::Approx(4.0 * 8.0).epsilon(1e-10));
}

TEST_CASE("weighted RMS norm") {
    Eigen::VectorXd v(2), ref(2);
    v << 1e-6, 0.0;
    ref << 0.0, 5.0;
    CHECK(wrms_norm(v, ref, 1e-6, 1e-6) == doctest::Approx(std::sqrt(0.5)));
}

TEST_CASE("flat run stays at equilibrium") {
    for (const auto& name : bundled_case_names()) {
        CAPTURE(name);
        const CaseDocument doc = test::bundled(name);
        const Run r = run(doc, doc.simulation.options, {}, 10.0);
        double drift = 0.0;
        const auto first = r.traj.row(0);
        for (std::size_t k = 0; k < r.traj.rows(); ++k) {
            const auto row = r.traj.row(k);
            for (std::size_t c = 0; c < row.size(); ++c) drift = std::max(drift, std::abs(row[c] - first[c]));
        }
        CHECK(drift < 1e-6);
        CHECK(r.traj.t.back() == 10.0);
    }
}

TEST_CASE("omib fault against a tighter run") {
    const CaseDocument doc = test::bundled("omib");
    SolverOptions tight = doc.simulation.options;
    tight.rtol /= 10.0;
    tight.atol /= 10.0;
    const Run a = run(doc, doc.simulation.options, case_events(doc), 30.0);
    const Run b = run(doc, tight, case_events(doc), 30.0);
    const std::size_t col = a.traj.index.at("OMIB_Gen", "delta");
    CHECK(max_gap(a.traj, b.traj, col) < 1e-4);
    // the fault moves the angle
    const auto d = a.traj.column(col);
    CHECK(*std::max_element(d.begin(), d.end()) - d.front() > 0.01);
}

TEST_CASE("case 2 reference step settles") {
    const CaseDocument doc = test::bundled("case2_vsm_step");
    const Run r = run(doc, doc.simulation.options, case_events(doc), doc.simulation.t_end);
    const auto [t, w] = get_state_series(r.traj, "VSM", "omega_olc");
    double peak = 0.0;
    for (std::size_t k = 0; k < t.size(); ++k) {
        if (t[k] <= 1.0) CHECK(std::abs(w[k] - 1.0) < 1e-6);
        peak = std::max(peak, std::abs(w[k] - 1.0));
    }
    CHECK(peak > 1e-3);
    CHECK(std::abs(w.back() - 1.0) < 1e-4);
    const auto last = r.traj.row(r.traj.rows() - 1);
    const std::size_t off = r.traj.index.at("VSM", "vpll_d");
    const Complex s = inverter_output_power(last.subspan(off, InverterLayout::size));
    CHECK(s.real() == doctest::Approx(0.7).epsilon(1e-4));
}

TEST_CASE("events") {
    const CaseDocument doc = test::bundled("case1_threebus");
    const Run r = run(doc, doc.simulation.options, case_events(doc), 5.0);

    SUBCASE("time grid includes the event and increases") {
        CHECK(std::count(r.traj.t.begin(), r.traj.t.end(), 1.0) == 1);
        for (std::size_t k = 1; k < r.traj.rows(); ++k) CHECK(r.traj.t[k] > r.traj.t[k - 1]);
    }
    SUBCASE("differential states are continuous, algebraic ones jump") {
        REQUIRE(r.traj.events.size() == 1);
        const EventRecord& e = r.traj.events[0];
        CHECK(e.time == 1.0);
        bool jumped = false;
        for (std::size_t k = 0; k < e.u_before.size(); ++k) {
            if (r.traj.index.differential[k]) {
                CHECK(e.u_after[k] == e.u_before[k]);
            } else if (e.u_after[k] != e.u_before[k]) {
                jumped = true;
            }
        }
        CHECK(jumped);
        const std::size_t k_event = static_cast<std::size_t>(
            std::find(r.traj.t.begin(), r.traj.t.end(), 1.0) - r.traj.t.begin());
        const auto row = r.traj.row(k_event);
        CHECK(std::vector<double>(row.begin(), row.end()) == e.u_before);
    }
    SUBCASE("tripped network matches a rebuilt one") {
        System reduced = r.init.system;
        reduced.branches.erase(reduced.branches.begin() + 1);
        DaeModel m(r.init.system);
        CHECK((m.compose_admittance(reduced.branches) - r.Y_end).cwiseAbs().maxCoeff() < 1e-12);
    }
}

TEST_CASE("two of three circuits") {
    const CaseDocument doc = test::bundled("case4_vsm_machine_dynlines");
    const Run r = run(doc, doc.simulation.options, case_events(doc), 1.5);
    DaeModel m(r.init.system);
    const AdmittanceMatrix Y0 = m.admittance();
    const auto b1 = r.init.system.bus_position_or_throw(1);
    const auto b3 = r.init.system.bus_position_or_throw(3);
    CHECK(std::abs(r.Y_end(b1, b3) - Y0(b1, b3) / 3.0) < 1e-12);
}

TEST_CASE("an identical admittance change leaves the run unchanged") {
    const CaseDocument doc = test::bundled("omib");
    const InitializationResult init = initialize_system(doc.system);
    DaeModel m(init.system);
    std::vector<Perturbation> ev = {YbusChange{1.0, m.admittance()}};
    const Run a = run(doc, doc.simulation.options, ev, 5.0);
    const Run b = run(doc, doc.simulation.options, {}, 5.0);
    for (std::size_t c = 0; c < a.traj.cols(); ++c) CHECK(max_gap(a.traj, b.traj, c) < 1e-6);
}

TEST_CASE("trapezoidal method") {
    const CaseDocument doc = test::bundled("omib");
    SolverOptions opt = doc.simulation.options;
    opt.method = Method::Trapezoidal;
    opt.dtmax = 1e-3;
    const Run a = run(doc, opt, case_events(doc), 5.0);
    const Run b = run(doc, doc.simulation.options, case_events(doc), 5.0);
    const std::size_t col = a.traj.index.at("OMIB_Gen", "delta");
    CHECK(max_gap(b.traj, a.traj, col) < 1e-4);
    CHECK(a.traj.stats.max_order_used <= 2);
}

TEST_CASE("bad events") {
    const CaseDocument doc = test::bundled("omib");
    CHECK_THROWS(run(doc, doc.simulation.options, {BranchTrip{40.0, "BUS1-BUS2", 1}}, 5.0));
    CHECK_THROWS_AS(run(doc, doc.simulation.options, {BranchTrip{1.0, "nope", 1}}, 5.0), ValidationError);
    CHECK_THROWS_AS(run(doc, doc.simulation.options, {ReferenceStep{1.0, "ghost", "P_ref", 1.0}}, 5.0),
                    ValidationError);
}

TEST_CASE("trajectory CSV") {
    const CaseDocument doc = test::bundled("omib");
    const Run a = run(doc, doc.simulation.options, case_events(doc), 2.0);
    const Run b = run(doc, doc.simulation.options, case_events(doc), 2.0);
    std::ostringstream sa, sb;
    a.traj.write_csv(sa);
    b.traj.write_csv(sb);
    CHECK(sa.str() == sb.str());
    const std::string text = sa.str();
    CHECK(text.rfind("time,bus1.v_r,bus1.v_i,bus2.v_r,bus2.v_i,OMIB_Gen.delta,OMIB_Gen.omega\n", 0) == 0);
    CHECK(static_cast<std::size_t>(std::count(text.begin(), text.end(), '\n')) == a.traj.rows() + 1);
}
