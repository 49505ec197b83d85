#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include "stainforge/gradient_check.hpp"

namespace stainforge {

/// Seams the tests swap out.
struct CliHooks {
  GradientFn gradient = acd::gradient;
};

/// Runs one command line (without the program name) and returns the process
/// exit status. Results go to `out`, progress and diagnostics to `err`.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err,
            const CliHooks& hooks = {});

}  // namespace stainforge
