#pragma once

// Small fixtures shared by the unit tests.

#include <algorithm>
#include <string>
#include <vector>

#include "pst/case_io.hpp"
#include "pst/runner.hpp"

namespace pst::test {

inline CaseDocument bundled(const std::string& name) {
    return load_case_document(bundled_case_path(name));
}

inline Bus bus(int number, BusType type, double v = 1.0) {
    Bus b;
    b.number = number;
    b.name = "b" + std::to_string(number);
    b.type = type;
    b.voltage_magnitude = v;
    return b;
}

inline BranchData line(std::string name, int from, int to, double R, double X, double B = 0.0) {
    BranchData br;
    br.name = std::move(name);
    br.from_bus = from;
    br.to_bus = to;
    br.R = R;
    br.X = X;
    br.B_from = B;
    br.B_to = B;
    return br;
}

inline VoltageSource source(int bus, double v = 1.0) {
    VoltageSource s;
    s.name = "src";
    s.bus = bus;
    s.V_mag = v;
    return s;
}

inline ConstantImpedanceLoad load(std::string name, int bus, double P, double Q) {
    ConstantImpedanceLoad l;
    l.name = std::move(name);
    l.bus = bus;
    l.P = P;
    l.Q = Q;
    return l;
}

/// Slack bus 1 with a source, PQ bus 2, one line, nothing else.
inline System two_bus(double X = 0.5) {
    System s;
    s.buses = {bus(1, BusType::Slack), bus(2, BusType::PQ)};
    s.branches = {line("l12", 1, 2, 0.0, X)};
    s.static_injections = {source(1)};
    return s;
}

/// Linear interpolation of (t, y) at time x, clamped to the ends.
inline double interp(const std::vector<double>& t, const std::vector<double>& y, double x) {
    if (x <= t.front()) return y.front();
    if (x >= t.back()) return y.back();
    const auto it = std::upper_bound(t.begin(), t.end(), x);
    const std::size_t k = static_cast<std::size_t>(it - t.begin());
    const double a = (x - t[k - 1]) / (t[k] - t[k - 1]);
    return y[k - 1] + a * (y[k] - y[k - 1]);
}

/// Cubic Lagrange interpolation through the four samples around x, clamped to
/// the ends. For smooth series sampled at solver steps, where linear
/// interpolation error would swamp tolerance-level differences.
inline double interp_cubic(const std::vector<double>& t, const std::vector<double>& y, double x) {
    if (t.size() < 4) return interp(t, y, x);
    if (x <= t.front()) return y.front();
    if (x >= t.back()) return y.back();
    const auto it = std::upper_bound(t.begin(), t.end(), x);
    const std::size_t k = static_cast<std::size_t>(it - t.begin());
    const std::size_t first = std::clamp<std::size_t>(k, 2, t.size() - 2) - 2;
    double sum = 0.0;
    for (std::size_t i = first; i < first + 4; ++i) {
        double w = 1.0;
        for (std::size_t j = first; j < first + 4; ++j) {
            if (j != i) w *= (x - t[j]) / (t[i] - t[j]);
        }
        sum += w * y[i];
    }
    return sum;
}

/// The bundled OMIB system without its simulation section.
inline System omib() { return bundled("omib").system; }

}  // namespace pst::test
