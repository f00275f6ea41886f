#include "pst/system.hpp"

#include <cmath>
#include <set>

namespace pst {

std::optional<std::size_t> System::bus_position(int number) const {
    for (std::size_t k = 0; k < buses.size(); ++k) {
        if (buses[k].number == number) {
            return k;
        }
    }
    return std::nullopt;
}

std::size_t System::bus_position_or_throw(int number) const {
    if (auto k = bus_position(number)) {
        return *k;
    }
    throw ValidationError("unknown bus " + std::to_string(number));
}

double per_unit_rebase(double value, Quantity kind, double device_MVA, double system_MVA) {
    if (!(device_MVA > 0.0) || !(system_MVA > 0.0)) {
        throw ValidationError("MVA bases must be positive");
    }
    switch (kind) {
        case Quantity::Impedance:
            return value * system_MVA / device_MVA;
        case Quantity::Admittance:
        case Quantity::Power:
        case Quantity::Current:
            return value * device_MVA / system_MVA;
    }
    return value;
}

Complex load_admittance(const ConstantImpedanceLoad& load) {
    const double v2 = load.nominal_voltage * load.nominal_voltage;
    return Complex{load.P, -load.Q} / v2;
}

namespace {

void check_bus(const System& sys, int bus, const std::string& who) {
    if (!sys.bus_position(bus)) {
        throw ValidationError(who + " references undeclared bus " + std::to_string(bus));
    }
}

}  // namespace

void validate(const System& sys) {
    if (!(sys.base_MVA > 0.0) || !(sys.base_frequency > 0.0)) {
        throw ValidationError("system base MVA and frequency must be positive");
    }

    std::set<int> numbers;
    int slack = 0;
    for (const auto& b : sys.buses) {
        if (!numbers.insert(b.number).second) {
            throw ValidationError("duplicate bus number " + std::to_string(b.number));
        }
        if (!(b.voltage_magnitude > 0.0)) {
            throw ValidationError("bus " + std::to_string(b.number) + " voltage must be positive");
        }
        slack += b.type == BusType::Slack;
    }

    std::set<std::string> branch_names;
    for (const auto& br : sys.branches) {
        const std::string who = "branch '" + br.name + "'";
        if (!branch_names.insert(br.name).second) {
            throw ValidationError("duplicate branch name '" + br.name + "'");
        }
        check_bus(sys, br.from_bus, who);
        check_bus(sys, br.to_bus, who);
        if (br.from_bus == br.to_bus) {
            throw ValidationError(who + " connects a bus to itself");
        }
        if (br.X == 0.0) {
            throw ValidationError(who + " has zero reactance");
        }
        if (br.B_from < 0.0 || br.B_to < 0.0) {
            throw ValidationError(who + " has negative shunt susceptance");
        }
        if (br.circuits < 1) {
            throw ValidationError(who + " must have at least one circuit");
        }
        if (br.kind == BranchKind::Dynamic && (br.B_from <= 0.0 || br.B_to <= 0.0)) {
            throw ValidationError(who + " is dynamic and needs positive shunt capacitance at both ends");
        }
    }

    int sources = 0;
    std::set<int> source_buses;
    for (const auto& inj : sys.static_injections) {
        std::visit(
            [&](const auto& s) {
                check_bus(sys, s.bus, "static injection '" + s.name + "'");
                using T = std::decay_t<decltype(s)>;
                if constexpr (std::is_same_v<T, VoltageSource>) {
                    ++sources;
                    source_buses.insert(s.bus);
                    if (std::hypot(s.R_th, s.X_th) <= 0.0) {
                        throw ValidationError("source '" + s.name + "' needs a nonzero Thevenin impedance");
                    }
                } else {
                    if (!std::isfinite(s.P) || !std::isfinite(s.Q)) {
                        throw ValidationError("load '" + s.name + "' has non-finite power");
                    }
                    if (!(s.nominal_voltage > 0.0)) {
                        throw ValidationError("load '" + s.name + "' nominal voltage must be positive");
                    }
                }
            },
            inj);
    }

    if (slack != 1) {
        throw ValidationError("exactly one slack (angle reference) bus is required, found " +
                              std::to_string(slack));
    }
    for (const auto& b : sys.buses) {
        if (b.type == BusType::Slack && sources > 0 && !source_buses.count(b.number)) {
            throw ValidationError("the voltage source must sit on the slack bus");
        }
    }

    std::set<std::string> device_names;
    for (const auto& d : sys.dynamic_devices) {
        const auto& name = device_name(d);
        if (!device_names.insert(name).second) {
            throw ValidationError("duplicate device name '" + name + "'");
        }
        check_bus(sys, device_bus(d), "device '" + name + "'");
        if (!(device_base(d) > 0.0)) {
            throw ValidationError("device '" + name + "' MVA base must be positive");
        }
    }
}

}  // namespace pst
