#include "pst/network.hpp"

namespace pst {

Complex series_admittance(const BranchData& br) {
    if (br.R == 0.0 && br.X == 0.0) {
        throw ValidationError("branch '" + br.name + "' has zero impedance");
    }
    return 1.0 / Complex{br.R, br.X};
}

AdmittanceMatrix build_ybus(std::span<const BranchData> branches, const std::vector<Bus>& buses,
                            const Eigen::VectorXcd& extra_shunts) {
    const auto n = static_cast<Eigen::Index>(buses.size());
    AdmittanceMatrix Y = AdmittanceMatrix::Zero(n, n);

    const auto position = [&](int number, const std::string& who) -> Eigen::Index {
        for (std::size_t k = 0; k < buses.size(); ++k) {
            if (buses[k].number == number) return static_cast<Eigen::Index>(k);
        }
        throw ValidationError("branch '" + who + "' references undeclared bus " +
                              std::to_string(number));
    };

    for (const auto& br : branches) {
        const Eigen::Index f = position(br.from_bus, br.name);
        const Eigen::Index t = position(br.to_bus, br.name);
        const Complex y = series_admittance(br);
        Y(f, f) += y + Complex{0.0, br.B_from};
        Y(t, t) += y + Complex{0.0, br.B_to};
        Y(f, t) -= y;
        Y(t, f) -= y;
    }

    if (extra_shunts.size() > 0) {
        if (extra_shunts.size() != n) {
            throw ValidationError("shunt vector size does not match the bus count");
        }
        Y.diagonal() += extra_shunts;
    }
    return Y;
}

BranchData remove_circuits(const BranchData& br, int k) {
    if (k <= 0 || k >= br.circuits) {
        throw ValidationError("cannot remove " + std::to_string(k) + " of " +
                              std::to_string(br.circuits) + " circuits of branch '" + br.name + "'");
    }
    const double keep = static_cast<double>(br.circuits - k) / br.circuits;
    BranchData out = br;
    out.R /= keep;
    out.X /= keep;
    out.B_from *= keep;
    out.B_to *= keep;
    out.circuits -= k;
    return out;
}

void network_residual(const Eigen::VectorXcd& v, const Eigen::VectorXcd& i_inj,
                      const AdmittanceMatrix& Y, std::span<double> out) {
    for (Eigen::Index k = 0; k < v.size(); ++k) {
        Complex m = i_inj(k);
        for (Eigen::Index j = 0; j < v.size(); ++j) {
            m -= Y(k, j) * v(j);
        }
        out[2 * k] = m.real();
        out[2 * k + 1] = m.imag();
    }
}

DynamicBranchDerivatives dynamic_branch_residual(const DynamicBranchState& s,
                                                 const BranchData& br, Complex i_c_from,
                                                 Complex i_c_to, double omega_b) {
    if (!(br.B_from > 0.0) || !(br.B_to > 0.0)) {
        throw ModelError("dynamic branch '" + br.name + "' needs capacitance at both terminals");
    }
    const Complex j{0.0, 1.0};
    DynamicBranchDerivatives d;
    d.di_l = (omega_b / br.X) * ((s.v_from - s.v_to) - Complex{br.R, br.X} * s.i_l);
    d.dv_from = (omega_b / br.B_from) * (i_c_from - j * br.B_from * s.v_from);
    d.dv_to = (omega_b / br.B_to) * (i_c_to - j * br.B_to * s.v_to);
    return d;
}

}  // namespace pst
