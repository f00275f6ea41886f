#include "pst/small_signal.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <numeric>
#include <ostream>

#include <Eigen/Eigenvalues>

#include "pst/newton.hpp"

namespace pst {

JacobianBlocks full_jacobian(DaeModel& model, const Eigen::VectorXd& u_eq) {
    const auto n = static_cast<Eigen::Index>(model.size());
    if (u_eq.size() != n) {
        throw ValidationError("equilibrium vector has the wrong size");
    }
    const VectorFunction F = [&](const Eigen::VectorXd& u, Eigen::VectorXd& r) {
        r.resize(n);
        model.residual(0.0, std::span<const double>(u.data(), static_cast<std::size_t>(n)),
                       std::span<double>(r.data(), static_cast<std::size_t>(n)));
    };
    const Eigen::MatrixXd J = central_jacobian(F, u_eq, n);

    JacobianBlocks b;
    const auto& mask = model.index().differential;
    for (std::size_t k = 0; k < mask.size(); ++k) {
        (mask[k] ? b.x_positions : b.y_positions).push_back(k);
    }
    const auto take = [&](const std::vector<std::size_t>& rows, const std::vector<std::size_t>& cols) {
        Eigen::MatrixXd M(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(cols.size()));
        for (std::size_t i = 0; i < rows.size(); ++i) {
            for (std::size_t j = 0; j < cols.size(); ++j) {
                M(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) =
                    J(static_cast<Eigen::Index>(rows[i]), static_cast<Eigen::Index>(cols[j]));
            }
        }
        return M;
    };
    b.g_y = take(b.y_positions, b.y_positions);
    b.g_x = take(b.y_positions, b.x_positions);
    b.f_y = take(b.x_positions, b.y_positions);
    b.f_x = take(b.x_positions, b.x_positions);
    return b;
}

Eigen::MatrixXd reduce_jacobian(const JacobianBlocks& b) {
    if (b.g_y.size() == 0) {
        return b.f_x;
    }
    const Eigen::JacobiSVD<Eigen::MatrixXd> svd(b.g_y);
    const auto& s = svd.singularValues();
    const double smax = s(0);
    const double smin = s(s.size() - 1);
    if (!(smin > 0.0) || smax / smin > 1e10) {
        throw LinearAlgebraError(
            "algebraic Jacobian g_y is singular (condition number above 1e10); the index-1 "
            "assumption does not hold at this operating point");
    }
    const Eigen::PartialPivLU<Eigen::MatrixXd> lu(b.g_y);
    return b.f_x - b.f_y * lu.solve(b.g_x);
}

EigenResult eigenanalysis(const Eigen::MatrixXd& J_red, const std::vector<std::string>& labels) {
    EigenResult out;
    const Eigen::Index n = J_red.rows();
    if (n == 0) return out;
    if (!J_red.allFinite()) {
        throw LinearAlgebraError("reduced Jacobian has non-finite entries");
    }
    Eigen::EigenSolver<Eigen::MatrixXd> es(J_red, true);
    if (es.info() != Eigen::Success) {
        throw LinearAlgebraError("eigenvalue solver did not converge");
    }
    const Eigen::VectorXcd lam = es.eigenvalues();
    const Eigen::MatrixXcd vec = es.eigenvectors();

    std::vector<Eigen::Index> order(static_cast<std::size_t>(n));
    std::iota(order.begin(), order.end(), Eigen::Index{0});
    std::stable_sort(order.begin(), order.end(), [&](Eigen::Index a, Eigen::Index b) {
        const auto la = lam(a), lb = lam(b);
        if (la.real() != lb.real()) return la.real() > lb.real();
        return la.imag() > lb.imag();
    });
    // Conjugates share the real part up to rounding; keep them adjacent.
    for (std::size_t i = 0; i + 1 < order.size(); ++i) {
        const auto li = lam(order[i]);
        if (li.imag() == 0.0) continue;
        for (std::size_t j = i + 1; j < order.size(); ++j) {
            if (std::abs(lam(order[j]) - std::conj(li)) <= 1e-9 * std::max(1.0, std::abs(li))) {
                std::swap(order[i + 1], order[j]);
                if (li.imag() < 0.0) std::swap(order[i], order[i + 1]);
                ++i;
                break;
            }
        }
    }

    out.eigenvalues.resize(n);
    out.eigenvectors.resize(n, n);
    for (Eigen::Index k = 0; k < n; ++k) {
        const Eigen::Index src = order[static_cast<std::size_t>(k)];
        const auto l = lam(src);
        out.eigenvalues(k) = l;
        out.eigenvectors.col(k) = vec.col(src);

        Mode m;
        m.eigenvalue = l;
        const double mag = std::abs(l);
        m.damping = mag > 0.0 ? -l.real() / mag : 0.0;
        m.frequency_hz = l.imag() / kTwoPi;
        if (!labels.empty()) {
            std::vector<Eigen::Index> rows(static_cast<std::size_t>(n));
            std::iota(rows.begin(), rows.end(), Eigen::Index{0});
            const auto v = vec.col(src);
            std::stable_sort(rows.begin(), rows.end(),
                             [&](Eigen::Index a, Eigen::Index b) { return std::abs(v(a)) > std::abs(v(b)); });
            for (std::size_t r = 0; r < std::min<std::size_t>(3, rows.size()); ++r) {
                m.dominant_states.push_back(labels[static_cast<std::size_t>(rows[r])]);
            }
        }
        out.modes.push_back(std::move(m));
    }
    return out;
}

bool SmallSignalResult::stable() const {
    for (Eigen::Index k = 0; k < eig.eigenvalues.size(); ++k) {
        if (!(eig.eigenvalues(k).real() < 0.0)) return false;
    }
    return true;
}

SmallSignalResult small_signal_analysis(DaeModel& model, const Eigen::VectorXd& u_eq) {
    SmallSignalResult r;
    r.u_eq = u_eq;
    r.blocks = full_jacobian(model, u_eq);
    r.J_red = reduce_jacobian(r.blocks);
    std::vector<std::string> labels;
    for (std::size_t k : r.blocks.x_positions) labels.push_back(model.index().labels[k]);
    r.eig = eigenanalysis(r.J_red, labels);
    return r;
}

namespace {

void put(std::ostream& os, double x) {
    char buf[64];
    const auto res = std::to_chars(buf, buf + sizeof buf, x);
    os.write(buf, res.ptr - buf);
}

}  // namespace

void write_eigen_csv(std::ostream& os, const EigenResult& r) {
    os << "re,im,damping,frequency_hz,dominant_states\n";
    for (const auto& m : r.modes) {
        put(os, m.eigenvalue.real());
        os << ',';
        put(os, m.eigenvalue.imag());
        os << ',';
        put(os, m.damping);
        os << ',';
        put(os, m.frequency_hz);
        os << ',';
        for (std::size_t i = 0; i < m.dominant_states.size(); ++i) {
            os << (i ? ";" : "") << m.dominant_states[i];
        }
        os << '\n';
    }
}

}  // namespace pst
