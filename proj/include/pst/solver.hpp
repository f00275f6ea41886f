#pragma once

// Implicit DAE integration (variable-order BDF, fixed-step trapezoidal) with
// exact-stop perturbation events.

#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "pst/assembly.hpp"
#include "pst/perturbation.hpp"
#include "pst/simulation_spec.hpp"

namespace pst {

struct SolverStats {
    int steps = 0;
    int rejected_steps = 0;
    int newton_iterations = 0;
    int newton_failures = 0;
    int jacobian_evaluations = 0;
    int factorizations = 0;
    int max_order_used = 0;
};

struct EventRecord {
    double time = 0.0;
    std::string description;
    std::vector<double> u_before;
    std::vector<double> u_after;
};

/// Accepted steps of a run. Row k holds the state at time t[k]; at an event
/// time the stored row is the pre-event state and the post-event state is in
/// the matching EventRecord.
struct Trajectory {
    StateIndex index;
    std::vector<double> t;
    std::vector<double> data;  // row-major, index.size() columns
    SolverStats stats;
    std::vector<EventRecord> events;

    std::size_t rows() const { return t.size(); }
    std::size_t cols() const { return index.size(); }
    std::span<const double> row(std::size_t k) const {
        return {data.data() + k * cols(), cols()};
    }
    double value(std::size_t k, std::size_t col) const { return data[k * cols() + col]; }
    std::vector<double> column(std::size_t col) const;
    void append(double time, std::span<const double> u);

    /// header `time,<owner>.<state>,...`, one row per accepted step
    void write_csv(std::ostream& os) const;
};

/// Applies the change to the model. Does not touch the state vector.
std::string apply_perturbation(DaeModel& model, const Perturbation& p);

/// Re-solves the algebraic entries of u with the differential ones fixed.
void solve_algebraic(DaeModel& model, double t, Eigen::VectorXd& u);

/// Integrates from a consistent u0 over [t0, t1].
Trajectory simulate(DaeModel& model, const Eigen::VectorXd& u0, double t0, double t1,
                    std::vector<Perturbation> perturbations, const SolverOptions& options);

/// Weighted RMS norm with weights 1 / (rtol |ref_i| + atol).
double wrms_norm(const Eigen::VectorXd& v, const Eigen::VectorXd& ref, double rtol, double atol);

/// Lagrange derivative weights at nodes[0] for the polynomial through `nodes`:
/// p'(nodes[0]) = sum_j w_j y_j.
std::vector<double> bdf_weights(std::span<const double> nodes);

}  // namespace pst
