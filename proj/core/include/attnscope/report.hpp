#pragma once

#include <string>

#include "attnscope/analysis.hpp"

namespace attnscope {

// Machine-readable report; schema documented in the README. Emission is
// deterministic: identical reports serialize to identical bytes.
std::string report_json_text(const PreservationReport& report);
void write_report_json(const PreservationReport& report, const std::string& path);

// Human-readable aligned-column tables (per-class rates per method, then
// top-token tables by count and by coverage).
std::string report_text(const PreservationReport& report);
void write_report_text(const PreservationReport& report, const std::string& path);

// Tab-separated dump, one line per output token with the per-method
// outcome letters (P preserved, N not preserved, X not counterfactualizable).
std::string outcome_dump_text(const PreservationReport& report);
void write_outcome_dump(const PreservationReport& report, const std::string& path);

}  // namespace attnscope
