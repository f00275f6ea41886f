#pragma once

// Power flow, device back-solve and equilibrium search.

#include <string>
#include <vector>

#include <Eigen/Dense>

#include "pst/assembly.hpp"
#include "pst/system.hpp"

namespace pst {

struct PowerFlowResult {
    std::vector<Complex> V;      // bus voltage phasors
    std::vector<Complex> S_inj;  // net injected power per bus (system base)
    int iterations = 0;
    double mismatch = 0.0;
};

/// Newton-Raphson on the polar mismatch equations. Loads are constant power
/// at this stage, devices inject their P_ref (and Q_ref on PQ buses), and
/// dynamic branches are treated as their pi-model equivalents.
PowerFlowResult solve_powerflow(const System& sys);

/// A reference or parameter overwritten during initialization.
struct ReferenceAdjustment {
    std::string owner;
    std::string quantity;
    double before = 0.0;
    double after = 0.0;
};

/// Back-solves the local states of `device` for terminal voltage `v_bus` and
/// injected power `s_inj` (device base), adjusting its free references in
/// place. The result satisfies the device residual to 1e-9.
std::vector<double> initialize_device(DynamicDevice& device, Complex v_bus, Complex s_inj,
                                      double omega_b, std::vector<ReferenceAdjustment>* report = nullptr);

struct EquilibriumResult {
    Eigen::VectorXd u;
    int iterations = 0;
    double residual_norm = 0.0;
};

/// Newton on the full residual with du = 0; throws InitializationError on a
/// singular Jacobian or non-convergence.
EquilibriumResult find_equilibrium(DaeModel& model, const Eigen::VectorXd& u_guess,
                                   double tolerance = 1e-9);

struct InitializationResult {
    System system;  // with adjusted references, load voltages and source EMF
    Eigen::VectorXd u0;
    PowerFlowResult powerflow;
    std::vector<ReferenceAdjustment> adjustments;
    double residual_norm = 0.0;
    int newton_iterations = 0;
};

InitializationResult initialize_system(const System& sys);

}  // namespace pst
