#include "pst/solver.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <ostream>
#include <sstream>

#include "pst/newton.hpp"

namespace pst {

// ---------------------------------------------------------------------------
// Perturbations
// ---------------------------------------------------------------------------

double perturbation_time(const Perturbation& p) {
    return std::visit([](const auto& x) { return x.time; }, p);
}

Perturbation to_perturbation(const PerturbationSpec& p) {
    return std::visit([](const auto& x) -> Perturbation { return x; }, p);
}

std::string apply_perturbation(DaeModel& model, const Perturbation& p) {
    if (const auto* yc = std::get_if<YbusChange>(&p)) {
        model.set_admittance(yc->Y);
        return "ybus_change";
    }
    if (const auto* rc = std::get_if<YbusChangeRecipe>(&p)) {
        const System& sys = model.system();
        Eigen::VectorXcd shunts = Eigen::VectorXcd::Zero(static_cast<Eigen::Index>(sys.buses.size()));
        for (const auto& s : rc->shunts) {
            shunts(static_cast<Eigen::Index>(sys.bus_position_or_throw(s.bus))) += Complex{s.G, s.B};
        }
        const auto& branches = rc->branches ? *rc->branches : sys.branches;
        model.set_admittance(model.compose_admittance(branches, shunts));
        return "ybus_change";
    }
    if (const auto* rs = std::get_if<ReferenceStep>(&p)) {
        model.set_reference(rs->device, rs->reference, rs->value);
        std::ostringstream os;
        os << "reference_step " << rs->device << "." << rs->reference << " = " << rs->value;
        return os.str();
    }
    const auto& bt = std::get<BranchTrip>(p);
    model.trip_branch(bt.branch, bt.circuits);
    return "branch_trip " + bt.branch +
           (bt.circuits > 0 ? " (" + std::to_string(bt.circuits) + " circuits)" : std::string{});
}

void solve_algebraic(DaeModel& model, double t, Eigen::VectorXd& u) {
    const auto& mask = model.index().differential;
    std::vector<Eigen::Index> alg;
    for (std::size_t k = 0; k < mask.size(); ++k) {
        if (!mask[k]) alg.push_back(static_cast<Eigen::Index>(k));
    }
    if (alg.empty()) return;

    Eigen::VectorXd work = u;
    Eigen::VectorXd res(u.size());
    const auto n = static_cast<std::size_t>(u.size());
    const VectorFunction F = [&](const Eigen::VectorXd& z, Eigen::VectorXd& out) {
        for (std::size_t i = 0; i < alg.size(); ++i) work(alg[i]) = z(static_cast<Eigen::Index>(i));
        model.residual(t, std::span<const double>(work.data(), n), std::span<double>(res.data(), n));
        out.resize(static_cast<Eigen::Index>(alg.size()));
        for (std::size_t i = 0; i < alg.size(); ++i) out(static_cast<Eigen::Index>(i)) = res(alg[i]);
    };
    Eigen::VectorXd z(static_cast<Eigen::Index>(alg.size()));
    for (std::size_t i = 0; i < alg.size(); ++i) z(static_cast<Eigen::Index>(i)) = u(alg[i]);

    NewtonOptions opt;
    opt.tolerance = 1e-11;
    const NewtonResult r = damped_newton(F, z, opt);
    if (!(r.residual_norm < 1e-9)) {
        throw IntegrationError("algebraic re-solve failed after an event; residual " +
                               std::to_string(r.residual_norm));
    }
    for (std::size_t i = 0; i < alg.size(); ++i) u(alg[i]) = z(static_cast<Eigen::Index>(i));
}

// ---------------------------------------------------------------------------
// Trajectory
// ---------------------------------------------------------------------------

std::vector<double> Trajectory::column(std::size_t col) const {
    std::vector<double> out(rows());
    for (std::size_t k = 0; k < rows(); ++k) out[k] = value(k, col);
    return out;
}

void Trajectory::append(double time, std::span<const double> u) {
    t.push_back(time);
    data.insert(data.end(), u.begin(), u.end());
}

namespace {

void put_double(std::ostream& os, double x) {
    char buf[64];
    const auto r = std::to_chars(buf, buf + sizeof buf, x);
    os.write(buf, r.ptr - buf);
}

}  // namespace

void Trajectory::write_csv(std::ostream& os) const {
    os << "time";
    for (const auto& l : index.labels) os << ',' << l;
    os << '\n';
    for (std::size_t k = 0; k < rows(); ++k) {
        put_double(os, t[k]);
        for (double v : row(k)) {
            os << ',';
            put_double(os, v);
        }
        os << '\n';
    }
}

// ---------------------------------------------------------------------------
// Integration
// ---------------------------------------------------------------------------

double wrms_norm(const Eigen::VectorXd& v, const Eigen::VectorXd& ref, double rtol, double atol) {
    if (v.size() == 0) return 0.0;
    double s = 0.0;
    for (Eigen::Index i = 0; i < v.size(); ++i) {
        const double e = v(i) / (rtol * std::abs(ref(i)) + atol);
        s += e * e;
    }
    return std::sqrt(s / static_cast<double>(v.size()));
}

std::vector<double> bdf_weights(std::span<const double> nodes) {
    const std::size_t m = nodes.size();
    std::vector<double> w(m, 0.0);
    const double t0 = nodes[0];
    for (std::size_t i = 1; i < m; ++i) w[0] += 1.0 / (t0 - nodes[i]);
    for (std::size_t j = 1; j < m; ++j) {
        double num = 1.0;
        double den = 1.0;
        for (std::size_t i = 0; i < m; ++i) {
            if (i == j) continue;
            den *= nodes[j] - nodes[i];
            if (i != 0) num *= t0 - nodes[i];
        }
        w[j] = num / den;
    }
    return w;
}

namespace {

class Integrator {
public:
    Integrator(DaeModel& model, const SolverOptions& opt)
        : model_(model), opt_(opt), n_(static_cast<Eigen::Index>(model.size())) {
        diff_ = Eigen::VectorXd::Zero(n_);
        for (Eigen::Index i = 0; i < n_; ++i) {
            if (model.index().differential[static_cast<std::size_t>(i)]) diff_(i) = 1.0;
        }
        res_.resize(n_);
        du_.resize(n_);
        if (!(opt_.dtmax > 0.0) || !(opt_.rtol > 0.0) || !(opt_.atol > 0.0)) {
            throw ValidationError("dtmax, rtol and atol must be positive");
        }
        if (opt_.max_order < 1 || opt_.max_order > 5) {
            throw ValidationError("BDF order must be between 1 and 5");
        }
    }

    void reset(double t, const Eigen::VectorXd& u) {
        ts_.assign(1, t);
        us_.assign(1, u);
        evaluate(t, u, Eigen::VectorXd::Zero(n_));
        du_last_ = res_.cwiseProduct(diff_);
        order_ = 1;
        steps_at_order_ = 0;
        error_failures_ = 0;
        h_ = std::min(opt_.initial_step, opt_.dtmax);
        jacobian_age_ = opt_.jacobian_refresh;  // force a refresh
    }

    double time() const { return ts_.front(); }
    const Eigen::VectorXd& state() const { return us_.front(); }
    const SolverStats& stats() const { return stats_; }

    void advance_to(double t_stop, Trajectory& traj) {
        while (time() < t_stop) {
            if (opt_.method == Method::BDF) {
                bdf_step(t_stop);
            } else {
                trapezoidal_step(t_stop);
            }
            traj.append(time(), std::span<const double>(state().data(), static_cast<std::size_t>(n_)));
        }
    }

private:
    void evaluate(double t, const Eigen::VectorXd& u, const Eigen::VectorXd& du) {
        model_.residual(t, std::span<const double>(u.data(), static_cast<std::size_t>(n_)),
                        std::span<const double>(du.data(), static_cast<std::size_t>(n_)),
                        std::span<double>(res_.data(), static_cast<std::size_t>(n_)));
    }

    void refresh_jacobian(double t, const Eigen::VectorXd& u) {
        const Eigen::VectorXd zero = Eigen::VectorXd::Zero(n_);
        evaluate(t, u, zero);
        const Eigen::VectorXd r0 = res_;
        J_.resize(n_, n_);
        Eigen::VectorXd up = u;
        for (Eigen::Index j = 0; j < n_; ++j) {
            const double h = 1e-7 * std::max(1.0, std::abs(u(j)));
            up(j) = u(j) + h;
            evaluate(t, up, zero);
            J_.col(j) = (res_ - r0) / h;
            up(j) = u(j);
        }
        ++stats_.jacobian_evaluations;
        jacobian_age_ = 0;
        lu_alpha_ = -1.0;
    }

    void factor(double alpha) {
        Eigen::MatrixXd M = J_;
        M.diagonal() -= alpha * diff_;
        lu_.compute(M);
        lu_alpha_ = alpha;
        ++stats_.factorizations;
    }

    /// Newton on residual(t, u, alpha u + beta) = 0 starting from u.
    bool corrector(double t, double alpha, const Eigen::VectorXd& beta, Eigen::VectorXd& u,
                   const Eigen::VectorXd& ref) {
        if (lu_alpha_ != alpha) factor(alpha);
        double prev = 0.0;
        for (int m = 0; m < 4; ++m) {
            du_ = alpha * u + beta;
            try {
                evaluate(t, u, du_);
            } catch (const Error&) {
                return false;
            }
            if (!res_.allFinite()) return false;
            const Eigen::VectorXd delta = lu_.solve(-res_);
            u += delta;
            ++stats_.newton_iterations;
            const double nd = wrms_norm(delta, ref, opt_.rtol, opt_.atol);
            if (!std::isfinite(nd)) return false;
            if (m == 0) {
                if (nd <= 1e-3) return true;
            } else {
                const double rate = nd / prev;
                if (rate > 0.9) return false;
                if (rate / (1.0 - rate) * nd < 0.1 || nd <= 1e-3) return true;
            }
            prev = nd;
        }
        return false;
    }

    /// Step length that lands exactly on t_stop without leaving a sliver.
    double limit_step(double h, double t_stop) const {
        const double t = time();
        h = std::min(h, opt_.dtmax);
        const double remaining = t_stop - t;
        if (h >= remaining * (1.0 - 1e-10)) return remaining;
        if (t + 1.5 * h > t_stop) return remaining / 2.0;
        return h;
    }

    Eigen::VectorXd extrapolate(std::size_t m, double t) const {
        // Polynomial through the m + 1 newest stored points.
        Eigen::VectorXd p = Eigen::VectorXd::Zero(n_);
        for (std::size_t j = 0; j <= m; ++j) {
            double c = 1.0;
            for (std::size_t i = 0; i <= m; ++i) {
                if (i != j) c *= (t - ts_[i]) / (ts_[j] - ts_[i]);
            }
            p += c * us_[j];
        }
        return p;
    }

    double error_coefficient(std::size_t m, double t_new) const {
        double alpha0 = 0.0;
        double num = 1.0;
        for (std::size_t j = 0; j < m; ++j) {
            alpha0 += 1.0 / (t_new - ts_[j]);
            num *= t_new - ts_[j];
        }
        const double den = num * (t_new - ts_[m]);
        return num / den / alpha0;
    }

    void fail_step(double factor) {
        ++stats_.rejected_steps;
        h_ *= factor;
        if (h_ < opt_.min_step) {
            std::ostringstream os;
            os << "step size fell below " << opt_.min_step << " at t = " << time();
            throw IntegrationError(os.str());
        }
    }

    void bdf_step(double t_stop) {
        for (;;) {
            const std::size_t hist = ts_.size();
            const std::size_t k = std::min<std::size_t>(static_cast<std::size_t>(order_), hist);
            const double t_n = time();
            const double h = limit_step(h_, t_stop);
            const double t_new = (h == t_stop - t_n) ? t_stop : t_n + h;

            std::vector<double> nodes{t_new};
            for (std::size_t j = 0; j < k; ++j) nodes.push_back(ts_[j]);
            const std::vector<double> w = bdf_weights(nodes);
            Eigen::VectorXd beta = Eigen::VectorXd::Zero(n_);
            for (std::size_t j = 1; j <= k; ++j) beta += w[j] * us_[j - 1];

            const bool startup = hist < k + 1;
            const Eigen::VectorXd u_pred =
                startup ? Eigen::VectorXd(us_[0] + (t_new - t_n) * du_last_) : extrapolate(k, t_new);

            if (jacobian_age_ >= opt_.jacobian_refresh) refresh_jacobian(t_new, u_pred);

            Eigen::VectorXd u = u_pred;
            if (!corrector(t_new, w[0], beta, u, us_[0])) {
                ++stats_.newton_failures;
                if (jacobian_age_ > 0) {
                    refresh_jacobian(t_new, u_pred);
                    continue;
                }
                h_ = h;
                fail_step(0.25);
                continue;
            }

            const double C = startup ? 0.5 : error_coefficient(k, t_new);
            const double err = C * wrms_norm(u - u_pred, us_[0], opt_.rtol, opt_.atol);
            if (!(err <= 1.0)) {
                ++error_failures_;
                h_ = h;
                if (error_failures_ >= 3) {
                    order_ = 1;
                    steps_at_order_ = 0;
                    fail_step(0.25);
                } else {
                    if (error_failures_ == 2 && order_ > 1) {
                        --order_;
                        steps_at_order_ = 0;
                    }
                    const double r = std::isfinite(err) ? 0.9 * std::pow(err, -1.0 / (k + 1.0)) : 0.25;
                    fail_step(std::clamp(r, 0.2, 0.9));
                }
                continue;
            }

            // Accepted. Candidate orders, estimated before the history shifts.
            int next = static_cast<int>(k);
            double best = std::pow(std::max(err, 1e-10), -1.0 / (k + 1.0));
            ++steps_at_order_;
            if (!startup && steps_at_order_ >= static_cast<int>(k) + 1) {
                const auto ratio = [&](std::size_t m) {
                    const double e = error_coefficient(m, t_new) *
                                     wrms_norm(u - extrapolate(m, t_new), us_[0], opt_.rtol, opt_.atol);
                    return std::pow(std::max(e, 1e-10), -1.0 / (m + 1.0));
                };
                if (k > 1) {
                    const double r = ratio(k - 1);
                    if (r > best) {
                        best = r;
                        next = static_cast<int>(k) - 1;
                    }
                }
                if (static_cast<int>(k) < opt_.max_order && hist >= k + 2) {
                    const double r = ratio(k + 1);
                    if (r > 1.2 * best) {
                        best = r;
                        next = static_cast<int>(k) + 1;
                    }
                }
            }
            if (next != order_) {
                order_ = next;
                steps_at_order_ = 0;
            }

            du_last_ = w[0] * u + beta;
            ts_.insert(ts_.begin(), t_new);
            us_.insert(us_.begin(), u);
            if (ts_.size() > static_cast<std::size_t>(opt_.max_order) + 2) {
                ts_.pop_back();
                us_.pop_back();
            }

            const double r = 0.9 * best;
            double hn = h;
            if (r >= 2.0) {
                hn = 2.0 * h;
            } else if (r < 1.0) {
                hn = h * std::max(0.5, r);
            }
            // A short landing step does not shrink the running step size.
            h_ = (t_new == t_stop && h < h_) ? std::max(h_, hn) : hn;
            h_ = std::min(h_, opt_.dtmax);

            error_failures_ = 0;
            ++jacobian_age_;
            ++stats_.steps;
            stats_.max_order_used = std::max(stats_.max_order_used, static_cast<int>(k));
            return;
        }
    }

    void trapezoidal_step(double t_stop) {
        double h = limit_step(opt_.dtmax, t_stop);
        for (;;) {
            const double t_n = time();
            const double t_new = (h == t_stop - t_n) ? t_stop : t_n + h;
            const double alpha = 2.0 / (t_new - t_n);
            const Eigen::VectorXd beta = -alpha * us_[0] - du_last_;
            const Eigen::VectorXd u_pred = us_[0] + (t_new - t_n) * du_last_.cwiseProduct(diff_);

            if (jacobian_age_ >= opt_.jacobian_refresh) refresh_jacobian(t_new, u_pred);
            Eigen::VectorXd u = u_pred;
            if (!corrector(t_new, alpha, beta, u, us_[0])) {
                ++stats_.newton_failures;
                if (jacobian_age_ > 0) {
                    refresh_jacobian(t_new, u_pred);
                    continue;
                }
                ++stats_.rejected_steps;
                h *= 0.5;
                if (h < opt_.min_step) {
                    throw IntegrationError("trapezoidal step size fell below the minimum");
                }
                continue;
            }
            du_last_ = (alpha * u + beta).cwiseProduct(diff_);
            ts_.assign(1, t_new);
            us_.assign(1, u);
            ++jacobian_age_;
            ++stats_.steps;
            stats_.max_order_used = 2;
            return;
        }
    }

    DaeModel& model_;
    SolverOptions opt_;
    Eigen::Index n_;
    Eigen::VectorXd diff_;
    Eigen::VectorXd res_;
    Eigen::VectorXd du_;

    std::vector<double> ts_;
    std::vector<Eigen::VectorXd> us_;
    Eigen::VectorXd du_last_;
    int order_ = 1;
    int steps_at_order_ = 0;
    int error_failures_ = 0;
    double h_ = 0.0;

    Eigen::MatrixXd J_;
    Eigen::PartialPivLU<Eigen::MatrixXd> lu_;
    double lu_alpha_ = -1.0;
    int jacobian_age_ = 0;
    SolverStats stats_;
};

}  // namespace

Trajectory simulate(DaeModel& model, const Eigen::VectorXd& u0, double t0, double t1,
                    std::vector<Perturbation> perturbations, const SolverOptions& options) {
    if (!(t1 > t0)) {
        throw ValidationError("simulation end time must exceed the start time");
    }
    if (u0.size() != static_cast<Eigen::Index>(model.size())) {
        throw ValidationError("initial state has the wrong size");
    }
    for (const auto& p : perturbations) {
        const double tp = perturbation_time(p);
        if (!(tp >= t0 && tp <= t1)) {
            throw ValidationError("perturbation time " + std::to_string(tp) + " lies outside the simulation span");
        }
    }
    std::stable_sort(perturbations.begin(), perturbations.end(),
                     [](const Perturbation& a, const Perturbation& b) {
                         return perturbation_time(a) < perturbation_time(b);
                     });

    {
        Eigen::VectorXd res(u0.size());
        model.residual(t0, std::span<const double>(u0.data(), model.size()),
                       std::span<double>(res.data(), model.size()));
        double worst = 0.0;
        for (std::size_t k = 0; k < model.size(); ++k) {
            if (!model.index().differential[k]) worst = std::max(worst, std::abs(res(static_cast<Eigen::Index>(k))));
        }
        if (!(worst < 1e-6)) {
            throw IntegrationError("initial condition violates the algebraic equations (residual " +
                                   std::to_string(worst) + ")");
        }
    }

    Trajectory traj;
    traj.index = model.index();
    traj.append(t0, std::span<const double>(u0.data(), model.size()));

    Integrator integ(model, options);
    integ.reset(t0, u0);

    std::size_t next = 0;
    const auto fire_events = [&](double t) {
        if (next >= perturbations.size() || perturbation_time(perturbations[next]) != t) return;
        Eigen::VectorXd u = integ.state();
        EventRecord rec;
        rec.time = t;
        rec.u_before.assign(u.data(), u.data() + u.size());
        while (next < perturbations.size() && perturbation_time(perturbations[next]) == t) {
            const std::string d = apply_perturbation(model, perturbations[next]);
            rec.description += rec.description.empty() ? d : "; " + d;
            ++next;
        }
        solve_algebraic(model, t, u);
        rec.u_after.assign(u.data(), u.data() + u.size());
        traj.events.push_back(std::move(rec));
        integ.reset(t, u);
    };

    fire_events(t0);
    std::vector<double> stops;
    for (const auto& p : perturbations) {
        const double tp = perturbation_time(p);
        if (tp > t0 && tp < t1 && (stops.empty() || stops.back() != tp)) stops.push_back(tp);
    }
    stops.push_back(t1);

    for (double stop : stops) {
        integ.advance_to(stop, traj);
        fire_events(stop);
    }
    traj.stats = integ.stats();
    return traj;
}

}  // namespace pst
