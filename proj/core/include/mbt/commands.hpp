#pragma once

#include "mbt/config.hpp"

namespace mbt {

// process exit codes shared by every subcommand
inline constexpr int kExitOk = 0;       // success
inline constexpr int kExitUsage = 1;    // bad invocation / configuration
inline constexpr int kExitRuntime = 2;  // runtime failure (I/O, numerics, data)
inline constexpr int kExitCheck = 3;    // a verification (gradient check) failed

// Each command validates its inputs, does the work and reports on stdout;
// errors are caught internally and mapped onto the exit codes above.
int cmd_synth(const RunConfig& cfg);
int cmd_train(const RunConfig& cfg);
int cmd_eval(const RunConfig& cfg);
int cmd_predict(const RunConfig& cfg);
int cmd_ablate(const RunConfig& cfg);
int cmd_gradcheck(const RunConfig& cfg);

}  // namespace mbt
