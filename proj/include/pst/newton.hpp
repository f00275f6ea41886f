#pragma once

// Damped Newton iteration with a forward-difference Jacobian, used for the
// power flow, device back-solves and equilibrium polishing.

#include <functional>

#include <Eigen/Dense>

namespace pst {

using VectorFunction = std::function<void(const Eigen::VectorXd& z, Eigen::VectorXd& F)>;

struct NewtonOptions {
    double tolerance = 1e-10;  // on the residual infinity norm
    int max_iterations = 50;
    int max_halvings = 8;
};

struct NewtonResult {
    bool converged = false;
    bool singular = false;
    int iterations = 0;
    double residual_norm = 0.0;
};

/// Forward differences with step max(1e-7, 1e-7 |z_i|). F0 = F(z).
Eigen::MatrixXd forward_jacobian(const VectorFunction& F, const Eigen::VectorXd& z,
                                 const Eigen::VectorXd& F0);

/// Central differences with step max(1e-7, 1e-7 |z_i|).
Eigen::MatrixXd central_jacobian(const VectorFunction& F, const Eigen::VectorXd& z, Eigen::Index m);

/// Solves F(z) = 0 in place. A rank-deficient Jacobian falls back to the
/// minimum-norm step and sets `singular`.
NewtonResult damped_newton(const VectorFunction& F, Eigen::VectorXd& z, const NewtonOptions& opt = {});

}  // namespace pst
