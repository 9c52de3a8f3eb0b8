#pragma once

#include <string>
#include <vector>

namespace espark {

/// Exit codes shared by every subcommand.
enum ExitCode : int {
    kExitOk = 0,
    kExitCheckFailure = 1,
    kExitConfigError = 2,
    kExitBackendError = 3,
};

/// Full CLI dispatcher (train | espark | baselines | verify). Exposed
/// as a library call so tests drive the commands in-process.
int run_cli(const std::vector<std::string>& args);

int cmd_train(const std::vector<std::string>& args);
int cmd_espark(const std::vector<std::string>& args);
int cmd_baselines(const std::vector<std::string>& args);
int cmd_verify(const std::vector<std::string>& args);

}  // namespace espark
