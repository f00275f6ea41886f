#pragma once

#include <optional>
#include <string>
#include <variant>
#include <vector>

#include <Eigen/Dense>

#include "pst/system.hpp"

namespace pst {

/// Replace the admittance matrix used by the network balance.
struct YbusChange {
    double time = 0.0;
    Eigen::MatrixXcd Y;
};

/// Set one reference (P_ref, Q_ref, V_ref, omega_ref) of a named device.
struct ReferenceStep {
    double time = 0.0;
    std::string device;
    std::string reference;
    double value = 0.0;
    bool operator==(const ReferenceStep&) const = default;
};

/// Trip `circuits` parallel circuits of a static branch (0 = all of them).
struct BranchTrip {
    double time = 0.0;
    std::string branch;
    int circuits = 0;
    bool operator==(const BranchTrip&) const = default;
};

/// Shunt admittance added at a bus, e.g. a bolted three-phase fault.
struct FaultShunt {
    int bus = 0;
    double G = 0.0;
    double B = 0.0;
    bool operator==(const FaultShunt&) const = default;
};

/// Case-file description of a Ybus change. It is resolved to a YbusChange once
/// load admittances are known: Y is rebuilt from `branches` (or the system's
/// static branches when absent) plus loads plus `shunts`.
struct YbusChangeRecipe {
    double time = 0.0;
    std::optional<std::vector<BranchData>> branches;
    std::vector<FaultShunt> shunts;
    bool operator==(const YbusChangeRecipe&) const = default;
};

/// Perturbations expressible in a case file.
using PerturbationSpec = std::variant<YbusChangeRecipe, ReferenceStep, BranchTrip>;

/// Everything the solver accepts. A BranchTrip or YbusChangeRecipe is turned
/// into an admittance update when its event time is reached.
using Perturbation = std::variant<YbusChange, YbusChangeRecipe, ReferenceStep, BranchTrip>;

double perturbation_time(const Perturbation& p);
Perturbation to_perturbation(const PerturbationSpec& p);

}  // namespace pst
