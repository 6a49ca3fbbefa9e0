#pragma once

// Command-line driver: `synth`, `sweep` and `report`.
//
// Settings come from built-in defaults, then an optional JSON file
// (--config, sections "train", "sweep", "synth", "io"), then flags.

#include <iosfwd>
#include <string>
#include <vector>

namespace mdmt {

/// `args` excludes the program name. Returns the process exit code.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

int run_cli(int argc, char** argv);

} // namespace mdmt
