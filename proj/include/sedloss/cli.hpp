#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include "sedloss/gradcheck.hpp"

namespace sedloss::cli {

/// Stable exit codes.
inline constexpr int kOk = 0;
inline constexpr int kCheckFailed = 1;
inline constexpr int kUsage = 2;

/// Test seams. An empty loss_cases list means default_loss_cases().
struct Hooks {
  std::vector<GradCheckCase> loss_cases;
};

/// Subcommands: gen-data, stats, grad-check, train, sweep, compare.
/// Every option can also be given as `key=value` in a --config file; flags
/// override the file.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err,
        const Hooks& hooks = {});

}  // namespace sedloss::cli
