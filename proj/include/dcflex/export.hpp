#pragma once

#include <string>

#include "dcflex/sim.hpp"

namespace dcflex {

/// "t,V_1..V_n,Is_1..Is_n,ul_1..ul_n,I_1..I_m,S,S_c,S_cl,kkt_residual"
std::string trace_csv_header(int n, int m);

/// One row per recorded sample, %.17g, LF line endings, so identical runs
/// produce identical bytes. The ul columns are the plant-side inputs (the
/// controller setpoint pushed through the interconnection, clamped when the
/// box is enabled). Throws std::runtime_error on an empty trace before
/// touching the file.
void write_trace_csv(const std::string& path, const ClosedLoopSystem& sys,
                     const SimTrace& trace);

/// Human-readable run summary, one "key: value" per line plus the event log.
void write_certificate(const std::string& path, const std::string& name,
                       const ScenarioResult& result);

/// voltage.svg, current.svg, ul.svg: static line charts over log10(t).
/// Throws std::runtime_error on an empty trace before touching any file.
void write_plots(const std::string& dir, const ClosedLoopSystem& sys,
                 const SimTrace& trace);

}  // namespace dcflex
