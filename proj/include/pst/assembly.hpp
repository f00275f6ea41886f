#pragma once

// Global state layout and the full-system DAE residual
//   differential rows: f(u) - du
//   algebraic rows:    g(u)

#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "pst/network.hpp"
#include "pst/system.hpp"

namespace pst {

/// Two-level map (owner -> state -> global position). Owners are buses
/// ("bus<number>", states v_r and v_i), devices, and dynamic branches
/// (states il_r and il_i).
struct StateIndex {
    std::map<std::string, std::map<std::string, std::size_t>> positions;
    std::vector<bool> differential;
    std::vector<std::string> labels;  // "<owner>.<state>" in global order
    std::size_t n_x = 0;
    std::size_t n_y = 0;

    std::size_t size() const { return labels.size(); }
    std::optional<std::size_t> find(const std::string& owner, const std::string& state) const;
    /// Throws ModelError listing the available keys when absent.
    std::size_t at(const std::string& owner, const std::string& state) const;
};

/// Buses first (two entries each), then devices in declaration order, then
/// dynamic-branch series currents.
StateIndex build_state_index(const System& sys);

std::string bus_label(const Bus& b);

class DaeModel {
public:
    /// Validates the system and prepares the static admittance matrix
    /// (static branches plus load shunts) and evaluation scratch.
    explicit DaeModel(System sys);

    const System& system() const { return sys_; }
    const StateIndex& index() const { return index_; }
    std::size_t size() const { return index_.size(); }
    double omega_b() const { return omega_b_; }

    const AdmittanceMatrix& admittance() const { return Y_; }
    void set_admittance(const AdmittanceMatrix& Y);

    /// Static branches of `branches` plus current load admittances plus shunts.
    AdmittanceMatrix compose_admittance(std::span<const BranchData> branches,
                                        const Eigen::VectorXcd& shunts = {}) const;

    /// Removes `circuits` parallel circuits of a static branch (0 = all) and
    /// updates the admittance matrix incrementally.
    void trip_branch(const std::string& name, int circuits);

    /// Sets P_ref, Q_ref, V_ref or omega_ref of a named device.
    void set_reference(const std::string& device, const std::string& reference, double value);

    /// Residual in place. Allocation free after construction.
    void residual(double t, std::span<const double> u, std::span<const double> du,
                  std::span<double> res);
    /// Residual with du = 0.
    void residual(double t, std::span<const double> u, std::span<double> res);

    Complex bus_voltage(std::span<const double> u, std::size_t k) const {
        return {u[2 * k], u[2 * k + 1]};
    }

private:
    struct DeviceSlot {
        std::size_t offset = 0;
        std::size_t size = 0;
        std::size_t bus = 0;
        double scale = 1.0;  // device base -> system base
    };
    struct SourceSlot {
        std::size_t bus = 0;
        Complex emf;
        Complex z;
    };
    struct DynamicBranchSlot {
        std::size_t offset = 0;
        std::size_t from = 0;
        std::size_t to = 0;
        Complex z;
        double X = 0.0;
    };

    System sys_;
    StateIndex index_;
    double omega_b_ = 0.0;
    AdmittanceMatrix Y_;
    Eigen::VectorXcd load_shunts_;
    std::vector<DeviceSlot> devices_;
    std::vector<SourceSlot> sources_;
    std::vector<DynamicBranchSlot> dyn_branches_;
    std::vector<double> bus_capacitance_;  // zero for algebraic buses

    Eigen::VectorXcd v_;
    Eigen::VectorXcd i_inj_;
    Eigen::VectorXcd i_net_;
    std::vector<double> zeros_;
};

}  // namespace pst
