#include "pst/assembly.hpp"

#include <algorithm>
#include <set>

namespace pst {

std::string bus_label(const Bus& b) { return "bus" + std::to_string(b.number); }

namespace {

const std::string& canonical_state(const std::string& s) {
    static const std::map<std::string, std::string> aliases{
        {"δ", "delta"}, {"ω", "omega"}, {"θ_olc", "theta_olc"}, {"ω_olc", "omega_olc"},
        {"θ_pll", "theta_pll"}};
    const auto it = aliases.find(s);
    return it == aliases.end() ? s : it->second;
}

}  // namespace

std::optional<std::size_t> StateIndex::find(const std::string& owner,
                                            const std::string& state) const {
    const auto o = positions.find(owner);
    if (o == positions.end()) return std::nullopt;
    const auto s = o->second.find(canonical_state(state));
    if (s == o->second.end()) return std::nullopt;
    return s->second;
}

std::size_t StateIndex::at(const std::string& owner, const std::string& state) const {
    if (auto k = find(owner, state)) return *k;
    std::string msg;
    const auto o = positions.find(owner);
    if (o == positions.end()) {
        msg = "unknown device '" + owner + "'; available:";
        for (const auto& [name, _] : positions) msg += " " + name;
    } else {
        msg = "device '" + owner + "' has no state '" + state + "'; available:";
        std::vector<std::pair<std::size_t, std::string>> ordered;
        for (const auto& [name, pos] : o->second) ordered.emplace_back(pos, name);
        std::sort(ordered.begin(), ordered.end());
        for (const auto& [_, name] : ordered) msg += " " + name;
    }
    throw ModelError(msg);
}

StateIndex build_state_index(const System& sys) {
    StateIndex idx;
    std::set<int> promoted;
    for (const auto& br : sys.branches) {
        if (br.kind == BranchKind::Dynamic) {
            promoted.insert(br.from_bus);
            promoted.insert(br.to_bus);
        }
    }

    const auto add_owner = [&](const std::string& owner) {
        if (!idx.positions.emplace(owner, std::map<std::string, std::size_t>{}).second) {
            throw ValidationError("duplicate name '" + owner + "' in the state index");
        }
    };
    const auto add = [&](const std::string& owner, const std::string& state, bool diff) {
        idx.positions[owner][state] = idx.labels.size();
        idx.labels.push_back(owner + "." + state);
        idx.differential.push_back(diff);
    };

    for (const auto& b : sys.buses) {
        const std::string owner = bus_label(b);
        const bool diff = promoted.count(b.number) > 0;
        add_owner(owner);
        add(owner, "v_r", diff);
        add(owner, "v_i", diff);
    }
    for (const auto& d : sys.dynamic_devices) {
        const std::string& owner = device_name(d);
        add_owner(owner);
        const auto names = state_names(d);
        const auto mask = differential_mask(d);
        for (std::size_t k = 0; k < names.size(); ++k) add(owner, names[k], mask[k]);
    }
    for (const auto& br : sys.branches) {
        if (br.kind != BranchKind::Dynamic) continue;
        add_owner(br.name);
        add(br.name, "il_r", true);
        add(br.name, "il_i", true);
    }

    idx.n_x = static_cast<std::size_t>(std::count(idx.differential.begin(), idx.differential.end(), true));
    idx.n_y = idx.size() - idx.n_x;
    return idx;
}

DaeModel::DaeModel(System sys) : sys_(std::move(sys)) {
    validate(sys_);
    index_ = build_state_index(sys_);
    omega_b_ = sys_.omega_b();
    const std::size_t nb = sys_.buses.size();

    load_shunts_ = Eigen::VectorXcd::Zero(static_cast<Eigen::Index>(nb));
    for (const auto& inj : sys_.static_injections) {
        if (const auto* l = std::get_if<ConstantImpedanceLoad>(&inj)) {
            load_shunts_(static_cast<Eigen::Index>(sys_.bus_position_or_throw(l->bus))) += load_admittance(*l);
        } else {
            const auto& s = std::get<VoltageSource>(inj);
            sources_.push_back({sys_.bus_position_or_throw(s.bus), std::polar(s.V_mag, s.V_angle),
                                Complex{s.R_th, s.X_th}});
        }
    }
    Y_ = compose_admittance(sys_.branches);

    for (const auto& d : sys_.dynamic_devices) {
        DeviceSlot slot;
        slot.offset = index_.positions.at(device_name(d)).begin()->second;
        for (const auto& [_, pos] : index_.positions.at(device_name(d))) slot.offset = std::min(slot.offset, pos);
        slot.size = n_states(d);
        slot.bus = sys_.bus_position_or_throw(device_bus(d));
        slot.scale = per_unit_rebase(1.0, Quantity::Current, device_base(d), sys_.base_MVA);
        devices_.push_back(slot);
    }

    bus_capacitance_.assign(nb, 0.0);
    for (const auto& br : sys_.branches) {
        if (br.kind != BranchKind::Dynamic) continue;
        DynamicBranchSlot slot;
        slot.offset = index_.at(br.name, "il_r");
        slot.from = sys_.bus_position_or_throw(br.from_bus);
        slot.to = sys_.bus_position_or_throw(br.to_bus);
        slot.z = Complex{br.R, br.X};
        slot.X = br.X;
        bus_capacitance_[slot.from] += br.B_from;
        bus_capacitance_[slot.to] += br.B_to;
        dyn_branches_.push_back(slot);
    }

    v_.resize(static_cast<Eigen::Index>(nb));
    i_inj_.resize(static_cast<Eigen::Index>(nb));
    i_net_.resize(static_cast<Eigen::Index>(nb));
    zeros_.assign(index_.size(), 0.0);
}

AdmittanceMatrix DaeModel::compose_admittance(std::span<const BranchData> branches,
                                              const Eigen::VectorXcd& shunts) const {
    std::vector<BranchData> statics;
    for (const auto& br : branches) {
        if (br.kind == BranchKind::Static) statics.push_back(br);
    }
    Eigen::VectorXcd diag = load_shunts_;
    if (shunts.size() > 0) {
        if (shunts.size() != diag.size()) {
            throw ValidationError("shunt vector size does not match the bus count");
        }
        diag += shunts;
    }
    return build_ybus(statics, sys_.buses, diag);
}

void DaeModel::set_admittance(const AdmittanceMatrix& Y) {
    if (Y.rows() != Y_.rows() || Y.cols() != Y_.cols()) {
        throw ValidationError("admittance matrix has the wrong dimensions");
    }
    if (!Y.allFinite()) {
        throw ValidationError("admittance matrix has non-finite entries");
    }
    Y_ = Y;
}

void DaeModel::trip_branch(const std::string& name, int circuits) {
    const auto it = std::find_if(sys_.branches.begin(), sys_.branches.end(),
                                 [&](const BranchData& b) { return b.name == name; });
    if (it == sys_.branches.end()) {
        throw ValidationError("unknown branch '" + name + "'");
    }
    if (it->kind == BranchKind::Dynamic) {
        throw ValidationError("branch '" + name + "' is dynamic; tripping dynamic branches is not supported");
    }
    if (circuits < 0) {
        throw ValidationError("negative circuit count for branch '" + name + "'");
    }
    const std::vector<BranchData> old{*it};
    Y_ -= build_ybus(old, sys_.buses);
    if (circuits == 0 || circuits >= it->circuits) {
        sys_.branches.erase(it);
    } else {
        *it = remove_circuits(*it, circuits);
        const std::vector<BranchData> now{*it};
        Y_ += build_ybus(now, sys_.buses);
    }
}

void DaeModel::set_reference(const std::string& device, const std::string& reference, double value) {
    for (auto& d : sys_.dynamic_devices) {
        if (device_name(d) != device) continue;
        References& r = device_refs(d);
        if (reference == "P_ref") {
            r.P_ref = value;
        } else if (reference == "Q_ref") {
            r.Q_ref = value;
        } else if (reference == "V_ref") {
            r.V_ref = value;
        } else if (reference == "omega_ref" || reference == "ω_ref") {
            r.omega_ref = value;
        } else {
            throw ValidationError("unknown reference '" + reference +
                                  "'; available: P_ref Q_ref V_ref omega_ref");
        }
        return;
    }
    throw ValidationError("unknown device '" + device + "'");
}

void DaeModel::residual(double t, std::span<const double> u, std::span<double> res) {
    residual(t, u, zeros_, res);
}

void DaeModel::residual(double /*t*/, std::span<const double> u, std::span<const double> du,
                        std::span<double> res) {
    const auto nb = v_.size();
    for (Eigen::Index k = 0; k < nb; ++k) {
        v_(k) = Complex{u[2 * k], u[2 * k + 1]};
    }
    i_inj_.setZero();

    for (const auto& s : sources_) {
        const auto b = static_cast<Eigen::Index>(s.bus);
        i_inj_(b) += (s.emf - v_(b)) / s.z;
    }

    for (std::size_t k = 0; k < devices_.size(); ++k) {
        const DeviceSlot& slot = devices_[k];
        const auto& d = sys_.dynamic_devices[k];
        const auto x = u.subspan(slot.offset, slot.size);
        const auto out = res.subspan(slot.offset, slot.size);
        Complex i;
        try {
            i = device_residual(d, x, v_(static_cast<Eigen::Index>(slot.bus)), omega_b_, out);
        } catch (const Error& e) {
            throw ModelError("device '" + device_name(d) + "': " + e.what());
        }
        i_inj_(static_cast<Eigen::Index>(slot.bus)) += slot.scale * i;
    }

    for (const auto& br : dyn_branches_) {
        const Complex i_l{u[br.offset], u[br.offset + 1]};
        const Complex vf = v_(static_cast<Eigen::Index>(br.from));
        const Complex vt = v_(static_cast<Eigen::Index>(br.to));
        const Complex di = (omega_b_ / br.X) * ((vf - vt) - br.z * i_l);
        res[br.offset] = di.real();
        res[br.offset + 1] = di.imag();
        i_inj_(static_cast<Eigen::Index>(br.from)) -= i_l;
        i_inj_(static_cast<Eigen::Index>(br.to)) += i_l;
    }

    i_net_.noalias() = Y_ * v_;
    const Complex j{0.0, 1.0};
    for (Eigen::Index k = 0; k < nb; ++k) {
        const Complex m = i_inj_(k) - i_net_(k);
        const double c = bus_capacitance_[static_cast<std::size_t>(k)];
        if (c > 0.0) {
            const Complex dv = (omega_b_ / c) * (m - j * c * v_(k));
            res[2 * k] = dv.real();
            res[2 * k + 1] = dv.imag();
        } else {
            res[2 * k] = m.real();
            res[2 * k + 1] = m.imag();
        }
    }

    for (std::size_t k = 0; k < res.size(); ++k) {
        if (index_.differential[k]) res[k] -= du[k];
    }
}

}  // namespace pst
