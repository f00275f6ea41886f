#include "pst/newton.hpp"

#include <algorithm>
#include <cmath>

namespace pst {

namespace {

double fd_step(double z) { return std::max(1e-7, 1e-7 * std::abs(z)); }

}  // namespace

Eigen::MatrixXd forward_jacobian(const VectorFunction& F, const Eigen::VectorXd& z,
                                 const Eigen::VectorXd& F0) {
    Eigen::MatrixXd J(F0.size(), z.size());
    Eigen::VectorXd zp = z;
    Eigen::VectorXd Fp(F0.size());
    for (Eigen::Index j = 0; j < z.size(); ++j) {
        const double h = fd_step(z(j));
        zp(j) = z(j) + h;
        F(zp, Fp);
        J.col(j) = (Fp - F0) / h;
        zp(j) = z(j);
    }
    return J;
}

Eigen::MatrixXd central_jacobian(const VectorFunction& F, const Eigen::VectorXd& z, Eigen::Index m) {
    Eigen::MatrixXd J(m, z.size());
    Eigen::VectorXd zp = z;
    Eigen::VectorXd Fp(m), Fm(m);
    for (Eigen::Index j = 0; j < z.size(); ++j) {
        const double h = fd_step(z(j));
        zp(j) = z(j) + h;
        F(zp, Fp);
        zp(j) = z(j) - h;
        F(zp, Fm);
        J.col(j) = (Fp - Fm) / (2.0 * h);
        zp(j) = z(j);
    }
    return J;
}

NewtonResult damped_newton(const VectorFunction& F, Eigen::VectorXd& z, const NewtonOptions& opt) {
    NewtonResult r;
    Eigen::VectorXd Fz;
    F(z, Fz);
    r.residual_norm = Fz.size() ? Fz.lpNorm<Eigen::Infinity>() : 0.0;

    Eigen::VectorXd trial(z.size());
    Eigen::VectorXd Ft;
    while (r.residual_norm >= opt.tolerance) {
        if (r.iterations >= opt.max_iterations || !std::isfinite(r.residual_norm)) {
            return r;
        }
        ++r.iterations;
        const Eigen::MatrixXd J = forward_jacobian(F, z, Fz);
        Eigen::VectorXd step;
        Eigen::FullPivLU<Eigen::MatrixXd> lu(J);
        if (J.rows() == J.cols() && lu.isInvertible()) {
            step = lu.solve(-Fz);
        } else {
            r.singular = true;
            step = J.completeOrthogonalDecomposition().solve(-Fz);
        }

        double lambda = 1.0;
        bool improved = false;
        for (int h = 0; h <= opt.max_halvings; ++h) {
            trial = z + lambda * step;
            F(trial, Ft);
            const double norm = Ft.lpNorm<Eigen::Infinity>();
            if (std::isfinite(norm) && norm < r.residual_norm) {
                z = trial;
                Fz = Ft;
                r.residual_norm = norm;
                improved = true;
                break;
            }
            lambda *= 0.5;
        }
        if (!improved) {
            return r;
        }
    }
    r.converged = true;
    return r;
}

}  // namespace pst
