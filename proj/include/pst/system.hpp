#pragma once

// Electrical system data model: buses, branches, static and dynamic injections.
// All electrical quantities are per unit on the stated bases; angles in radians.

#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "pst/device.hpp"
#include "pst/types.hpp"

namespace pst {

enum class BusType { Slack, PV, PQ };

struct Bus {
    int number = 0;
    std::string name;
    BusType type = BusType::PQ;
    double voltage_magnitude = 1.0;
    double voltage_angle = 0.0;
    double base_kV = 230.0;
    bool operator==(const Bus&) const = default;
};

enum class BranchKind { Static, Dynamic };

/// Pi-model branch. R, X, B_from and B_to describe the whole branch; when it is
/// made of `circuits` identical parallel circuits, tripping k of them scales
/// every admittance by (circuits - k) / circuits.
struct BranchData {
    std::string name;
    int from_bus = 0;
    int to_bus = 0;
    double R = 0.0;
    double X = 0.1;
    double B_from = 0.0;
    double B_to = 0.0;
    int circuits = 1;
    BranchKind kind = BranchKind::Static;
    bool operator==(const BranchData&) const = default;
};

/// Constant-impedance load. P and Q are drawn at `nominal_voltage`, which the
/// initialization overwrites with the power-flow voltage magnitude.
struct ConstantImpedanceLoad {
    std::string name;
    int bus = 0;
    double P = 0.0;
    double Q = 0.0;
    double nominal_voltage = 1.0;
    bool operator==(const ConstantImpedanceLoad&) const = default;
};

/// Thevenin voltage source ("infinite bus").
struct VoltageSource {
    std::string name;
    int bus = 0;
    double V_mag = 1.0;
    double V_angle = 0.0;
    double R_th = 0.0;
    double X_th = 1e-5;
    bool operator==(const VoltageSource&) const = default;
};

using StaticInjection = std::variant<ConstantImpedanceLoad, VoltageSource>;

struct System {
    double base_MVA = 100.0;
    double base_frequency = 60.0;
    std::vector<Bus> buses;
    std::vector<BranchData> branches;
    std::vector<StaticInjection> static_injections;
    std::vector<DynamicDevice> dynamic_devices;

    double omega_b() const { return kTwoPi * base_frequency; }
    /// Position of bus `number` in `buses`, if present.
    std::optional<std::size_t> bus_position(int number) const;
    std::size_t bus_position_or_throw(int number) const;

    bool operator==(const System&) const = default;
};

/// Converts a per-unit value from the device MVA base to the system MVA base.
enum class Quantity { Impedance, Admittance, Power, Current };
double per_unit_rebase(double value, Quantity kind, double device_MVA, double system_MVA);

/// Checks every structural invariant; throws ValidationError on the first violation.
void validate(const System& sys);

/// Y_load = (P - jQ) / |V0|^2
Complex load_admittance(const ConstantImpedanceLoad& load);

}  // namespace pst
