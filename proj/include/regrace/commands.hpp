#pragma once

#include <iosfwd>
#include <string>

#include "regrace/config.hpp"

namespace regrace {

/// Executes one batch subcommand: build, extract, index, query, register,
/// eval-pr, eval-reg, or synth. Returns a process exit status — 0 on
/// success, 2 on usage errors (unknown command, missing inputs), 1 on data
/// errors. Progress and metric lines go to `out`, diagnostics to `err`.
int run_command(const std::string& command, const Config& cfg, std::ostream& out,
                std::ostream& err);

}  // namespace regrace
