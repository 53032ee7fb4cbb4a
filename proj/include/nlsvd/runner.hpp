#pragma once

#include <exception>
#include <iosfwd>
#include <string>
#include <vector>

#include "nlsvd/config.hpp"

namespace nlsvd {

inline constexpr const char* kVersion = "0.1.0";

// train-svdnet, build-gsvd, validate, attack, bias-sweep, traverse, pipeline.
const std::vector<std::string>& subcommands();

// Runs one subcommand, writing artifacts and a reproducibility stamp into
// cfg.output_dir. Progress lines go to `log`. Errors propagate.
void run(const std::string& subcommand, const RunConfig& cfg, std::ostream& log);

// {"error": {"kind": ..., "message": ...}} for any exception.
std::string error_json(const std::exception& e);

// Runs and converts failures into the error JSON (printed to `err` and, when
// possible, written to <output_dir>/error.json). Returns the exit status.
int run_guarded(const std::string& subcommand, const RunConfig& cfg, std::ostream& log,
                std::ostream& err);

}  // namespace nlsvd
