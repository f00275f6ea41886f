#include "pst/runner.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <sstream>
#include <thread>

#include <CLI11.hpp>

namespace pst {

CaseRun run_case(const CaseDocument& doc, bool small_signal) {
    const auto start = std::chrono::steady_clock::now();
    CaseRun run;
    run.document = doc;
    run.init = initialize_system(doc.system);

    DaeModel model(run.init.system);
    if (small_signal) {
        run.small_signal = small_signal_analysis(model, run.init.u0);
    }
    std::vector<Perturbation> events;
    for (const auto& p : doc.simulation.perturbations) events.push_back(to_perturbation(p));
    run.trajectory = simulate(model, run.init.u0, doc.simulation.t_start, doc.simulation.t_end,
                              std::move(events), doc.simulation.options);
    run.final_admittance = model.admittance();
    run.runtime_seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    return run;
}

std::pair<std::vector<double>, std::vector<double>> get_state_series(const Trajectory& traj,
                                                                     const std::string& device,
                                                                     const std::string& state) {
    const std::size_t col = traj.index.at(device, state);
    return {traj.t, traj.column(col)};
}

std::vector<std::string> bundled_case_names() {
    return {"omib", "case1_threebus", "case2_vsm_step", "case3_multimass", "case4_vsm_machine_dynlines"};
}

std::filesystem::path bundled_case_path(const std::string& name) {
    return std::filesystem::path(PST_CASES_DIR) / (name + ".json");
}

std::string initialization_report(const InitializationResult& init) {
    std::ostringstream os;
    os.precision(10);
    os << "power flow: " << init.powerflow.iterations << " iterations, mismatch "
       << init.powerflow.mismatch << "\n";
    for (std::size_t k = 0; k < init.system.buses.size(); ++k) {
        const Complex v = init.powerflow.V[k];
        const Complex s = init.powerflow.S_inj[k];
        os << "  " << bus_label(init.system.buses[k]) << ": |V| = " << std::abs(v)
           << ", angle = " << std::arg(v) << " rad, P = " << s.real() << ", Q = " << s.imag() << "\n";
    }
    os << "equilibrium: residual " << init.residual_norm << " after " << init.newton_iterations
       << " Newton iterations\n";
    os << "adjusted references:\n";
    for (const auto& a : init.adjustments) {
        os << "  " << a.owner << "." << a.quantity << ": " << a.before << " -> " << a.after << "\n";
    }
    return os.str();
}

std::string plot_script(const std::string& csv_name, const std::vector<std::string>& series) {
    std::ostringstream os;
    os << "import csv\n"
          "import matplotlib\n"
          "matplotlib.use(\"Agg\")\n"
          "import matplotlib.pyplot as plt\n\n"
          "SERIES = [";
    for (std::size_t i = 0; i < series.size(); ++i) os << (i ? ", " : "") << '"' << series[i] << '"';
    os << "]\n\n"
          "with open(\""
       << csv_name
       << "\") as f:\n"
          "    rows = list(csv.DictReader(f))\n"
          "t = [float(r[\"time\"]) for r in rows]\n"
          "fig, axes = plt.subplots(len(SERIES), 1, sharex=True, squeeze=False,\n"
          "                         figsize=(8, 2.5 * len(SERIES)))\n"
          "for ax, name in zip(axes[:, 0], SERIES):\n"
          "    ax.plot(t, [float(r[name]) for r in rows])\n"
          "    ax.set_ylabel(name)\n"
          "    ax.grid(True)\n"
          "axes[-1, 0].set_xlabel(\"time [s]\")\n"
          "fig.tight_layout()\n"
          "fig.savefig(\"plot.png\", dpi=120)\n";
    return os.str();
}

namespace {

std::vector<std::string> default_series(const System& sys) {
    std::vector<std::string> out;
    for (const auto& d : sys.dynamic_devices) {
        if (std::holds_alternative<DynamicGenerator>(d)) {
            out.push_back(device_name(d) + ".delta");
            out.push_back(device_name(d) + ".omega");
        } else {
            out.push_back(device_name(d) + ".omega_olc");
        }
    }
    return out;
}

}  // namespace

void write_artifacts(const CaseRun& run, const std::filesystem::path& dir) {
    std::filesystem::create_directories(dir);
    {
        std::ofstream f(dir / "trajectory.csv");
        run.trajectory.write_csv(f);
    }
    {
        std::ofstream f(dir / "initialization.txt");
        f << initialization_report(run.init);
    }
    if (run.small_signal) {
        std::ofstream f(dir / "eigenvalues.csv");
        write_eigen_csv(f, run.small_signal->eig);
    }
    {
        std::ofstream f(dir / "plot.py");
        f << plot_script("trajectory.csv", default_series(run.init.system));
    }
}

// ---------------------------------------------------------------------------
// Command line
// ---------------------------------------------------------------------------

namespace {

struct CliOverrides {
    std::vector<double> tspan;
    std::optional<double> dtmax, rtol, atol;
    std::string method;
    bool small_signal = false;
    std::string out;
};

struct JobResult {
    int code = kExitOk;
    std::string message;
};

std::filesystem::path resolve_case(const std::string& arg) {
    std::filesystem::path p(arg);
    if (std::filesystem::exists(p)) return p;
    const auto names = bundled_case_names();
    if (std::find(names.begin(), names.end(), arg) != names.end()) return bundled_case_path(arg);
    return p;
}

JobResult run_one(const std::string& arg, const CliOverrides& o) {
    JobResult r;
    std::ostringstream msg;
    CaseDocument doc;
    try {
        doc = load_case_document(resolve_case(arg));
        auto& s = doc.simulation;
        if (!o.tspan.empty()) {
            s.t_start = o.tspan[0];
            s.t_end = o.tspan[1];
        }
        if (o.dtmax) s.options.dtmax = *o.dtmax;
        if (o.rtol) s.options.rtol = *o.rtol;
        if (o.atol) s.options.atol = *o.atol;
        if (o.method == "bdf") s.options.method = Method::BDF;
        if (o.method == "trapezoidal") s.options.method = Method::Trapezoidal;
    } catch (const Error& e) {
        r.code = kExitParse;
        r.message = arg + ": parse error: " + e.what() + "\n";
        return r;
    }

    try {
        const CaseRun run = run_case(doc, o.small_signal);
        const std::filesystem::path dir =
            std::filesystem::path(o.out) / std::filesystem::path(arg).stem();
        write_artifacts(run, dir);
        const auto& st = run.trajectory.stats;
        msg << arg << ": " << run.trajectory.rows() << " points, " << st.steps << " steps ("
            << st.rejected_steps << " rejected), " << st.newton_iterations << " Newton iterations, "
            << run.runtime_seconds << " s -> " << dir.string() << "\n";
        if (run.small_signal) {
            msg << "  " << run.small_signal->eig.modes.size() << " eigenvalues"
                << (run.small_signal->stable() ? " (stable)" : " (unstable)") << "\n";
        }
        r.message = msg.str();
    } catch (const InitializationError& e) {
        r.code = kExitInitialization;
        r.message = arg + ": initialization failed: " + e.what() + "\n";
    } catch (const ValidationError& e) {
        r.code = kExitParse;
        r.message = arg + ": invalid case: " + e.what() + "\n";
    } catch (const Error& e) {
        r.code = kExitIntegration;
        r.message = arg + ": simulation failed: " + e.what() + "\n";
    }
    return r;
}

}  // namespace

int run_cli(int argc, char** argv) {
    CLI::App app{"Time-domain and small-signal simulation of low-inertia power systems"};
    app.require_subcommand(1);

    CliOverrides o;
    const char* env_out = std::getenv("PSTSIM_OUT");
    o.out = env_out && *env_out ? env_out : "pstsim_out";
    std::vector<std::string> cases;
    int jobs = 1;

    CLI::App* run = app.add_subcommand("run", "Run one or more case files (or bundled case names)");
    run->add_option("cases", cases, "Case files or bundled case names")->required();
    run->add_option("--tspan", o.tspan, "Start and end time, e.g. 0,10")->delimiter(',')->expected(2);
    run->add_option("--dtmax", o.dtmax, "Largest step [s]");
    run->add_option("--rtol", o.rtol, "Relative tolerance");
    run->add_option("--atol", o.atol, "Absolute tolerance");
    run->add_option("--method", o.method, "Integrator")->check(CLI::IsMember({"bdf", "trapezoidal"}));
    run->add_flag("--small-signal", o.small_signal, "Also write the eigenvalues at the initial equilibrium");
    run->add_option("--out", o.out, "Output directory (default $PSTSIM_OUT or ./pstsim_out)");
    run->add_option("--jobs", jobs, "Cases run concurrently")->check(CLI::PositiveNumber);

    CLI::App* list = app.add_subcommand("list", "List bundled cases");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? kExitOk : kExitUsage;
    }

    if (list->parsed()) {
        for (const auto& n : bundled_case_names()) std::cout << n << "  " << bundled_case_path(n).string() << "\n";
        return kExitOk;
    }

    std::vector<JobResult> results(cases.size());
    std::atomic<std::size_t> next{0};
    const auto worker = [&] {
        for (std::size_t k = next++; k < cases.size(); k = next++) results[k] = run_one(cases[k], o);
    };
    const auto n_threads = std::min<std::size_t>(static_cast<std::size_t>(jobs), cases.size());
    std::vector<std::thread> pool;
    for (std::size_t i = 1; i < n_threads; ++i) pool.emplace_back(worker);
    worker();
    for (auto& t : pool) t.join();

    int code = kExitOk;
    for (const auto& r : results) {
        (r.code == kExitOk ? std::cout : std::cerr) << r.message;
        if (code == kExitOk) code = r.code;
    }
    return code;
}

}  // namespace pst
