#pragma once

// Linearization at an equilibrium and eigenanalysis of the reduced Jacobian
//   J_red = f_x - f_y g_y^{-1} g_x

#include <complex>
#include <iosfwd>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "pst/assembly.hpp"

namespace pst {

struct JacobianBlocks {
    Eigen::MatrixXd g_y, g_x, f_y, f_x;
    std::vector<std::size_t> y_positions;  // global positions of algebraic variables
    std::vector<std::size_t> x_positions;  // global positions of differential variables
};

/// Central differences of the residual (du = 0) with per-variable step
/// max(1e-7, 1e-7 |u_i|), split by the differential mask.
JacobianBlocks full_jacobian(DaeModel& model, const Eigen::VectorXd& u_eq);

/// Throws LinearAlgebraError when g_y is singular (condition number above 1e10).
Eigen::MatrixXd reduce_jacobian(const JacobianBlocks& blocks);

struct Mode {
    std::complex<double> eigenvalue;
    double damping = 0.0;       // -Re / |lambda|
    double frequency_hz = 0.0;  // Im / 2 pi
    std::vector<std::string> dominant_states;
};

struct EigenResult {
    Eigen::VectorXcd eigenvalues;
    Eigen::MatrixXcd eigenvectors;  // columns, in the order of eigenvalues
    std::vector<Mode> modes;
};

/// Modes sorted by decreasing real part, conjugate pairs adjacent with the
/// positive imaginary part first. `labels` names the rows of J_red.
EigenResult eigenanalysis(const Eigen::MatrixXd& J_red, const std::vector<std::string>& labels = {});

struct SmallSignalResult {
    Eigen::VectorXd u_eq;
    JacobianBlocks blocks;
    Eigen::MatrixXd J_red;
    EigenResult eig;
    bool stable() const;
};

SmallSignalResult small_signal_analysis(DaeModel& model, const Eigen::VectorXd& u_eq);

/// CSV with columns re, im, damping, frequency_hz, dominant_states.
void write_eigen_csv(std::ostream& os, const EigenResult& r);

}  // namespace pst
