#pragma once

// Case execution, result extraction and the command-line front end.

#include <filesystem>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "pst/case_io.hpp"
#include "pst/initialization.hpp"
#include "pst/small_signal.hpp"
#include "pst/solver.hpp"

namespace pst {

enum ExitCode : int {
    kExitOk = 0,
    kExitUsage = 1,
    kExitParse = 2,
    kExitInitialization = 3,
    kExitIntegration = 4,
};

struct CaseRun {
    CaseDocument document;
    InitializationResult init;
    Trajectory trajectory;
    std::optional<SmallSignalResult> small_signal;  // at the initial equilibrium
    AdmittanceMatrix final_admittance;
    double runtime_seconds = 0.0;
};

/// Initializes, optionally linearizes, and simulates a case document.
CaseRun run_case(const CaseDocument& doc, bool small_signal = false);

/// (times, values) of one labeled state.
std::pair<std::vector<double>, std::vector<double>> get_state_series(const Trajectory& traj,
                                                                     const std::string& device,
                                                                     const std::string& state);

std::vector<std::string> bundled_case_names();
std::filesystem::path bundled_case_path(const std::string& name);

std::string initialization_report(const InitializationResult& init);

/// Python/matplotlib script plotting `series` (column labels) from a trajectory CSV.
std::string plot_script(const std::string& csv_name, const std::vector<std::string>& series);

/// Writes trajectory.csv, initialization.txt, plot.py and (optionally)
/// eigenvalues.csv into `dir`.
void write_artifacts(const CaseRun& run, const std::filesystem::path& dir);

/// Entry point of the `pstsim` executable; returns an ExitCode.
int run_cli(int argc, char** argv);

}  // namespace pst
