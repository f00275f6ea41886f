#pragma once

// Case documents: a nested JSON document with sections `buses`, `branches`,
// `static_injections`, `generators`, `inverters` and `simulation`. Component
// slots pick their model with a `type` string. Angles are radians unless the
// key carries a `_deg` suffix.

#include <filesystem>
#include <string>

#include "pst/simulation_spec.hpp"
#include "pst/system.hpp"

namespace pst {

struct CaseDocument {
    System system;
    SimulationSpec simulation;
    bool operator==(const CaseDocument&) const = default;
};

/// Parses and validates a case file. Throws ParseError or ValidationError.
System load_case(const std::filesystem::path& path);
CaseDocument load_case_document(const std::filesystem::path& path);
CaseDocument parse_case(const std::string& text);

/// Inverse of parse_case; the output re-parses to an equal document.
std::string serialize_case(const CaseDocument& doc);
std::string serialize_case(const System& sys);

}  // namespace pst
