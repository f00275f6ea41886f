#pragma once

// Nodal admittance matrix, current-injection balance and dynamic pi-branches.

#include <span>
#include <vector>

#include <Eigen/Dense>

#include "pst/system.hpp"

namespace pst {

using AdmittanceMatrix = Eigen::MatrixXcd;

/// Stamps every branch in `branches` (kind is not inspected; callers pass the
/// static set). `extra_shunts`, when non-empty, is added to the diagonal.
AdmittanceMatrix build_ybus(std::span<const BranchData> branches, const std::vector<Bus>& buses,
                            const Eigen::VectorXcd& extra_shunts = {});

/// Series admittance 1 / (R + jX). Throws ValidationError for a zero impedance.
Complex series_admittance(const BranchData& br);

/// Branch with `k` of its parallel circuits removed (k < circuits).
BranchData remove_circuits(const BranchData& br, int k);

/// out[2k], out[2k+1] = Re, Im of (i_inj - Y v)_k.
void network_residual(const Eigen::VectorXcd& v, const Eigen::VectorXcd& i_inj,
                      const AdmittanceMatrix& Y, std::span<double> out);

struct DynamicBranchState {
    Complex i_l;
    Complex v_from;
    Complex v_to;
};

struct DynamicBranchDerivatives {
    Complex di_l;
    Complex dv_from;
    Complex dv_to;
};

/// Time derivatives of a dynamic branch. i_c_from and i_c_to are the net
/// currents flowing into the terminal capacitors; the capacitances are the
/// branch's B_from and B_to.
DynamicBranchDerivatives dynamic_branch_residual(const DynamicBranchState& s,
                                                 const BranchData& br, Complex i_c_from,
                                                 Complex i_c_to, double omega_b);

}  // namespace pst
