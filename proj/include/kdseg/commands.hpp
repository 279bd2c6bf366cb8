#pragma once

#include <ostream>

#include "kdseg/config.hpp"

namespace kdseg {

/// Exit codes of the command-line tool.
enum ExitCode : int {
  kExitOk = 0,
  kExitConfig = 1,   // invalid flags, config file or values
  kExitRuntime = 2,  // missing inputs, I/O, data or training failures
};

// Each command parses and validates its config sections before touching any
// file, writes only under run.output_dir and never modifies its inputs.
// Config errors surface as ConfigError, everything else as other kdseg::Error
// types.

/// images/, labels/ and manifest.json of a synthetic dataset.
void cmd_synth(const RunConfig& run, std::ostream& log);
/// labels_pseudo/ and an updated manifest.json.
void cmd_pseudolabel(const RunConfig& run, std::ostream& log);
/// checkpoints/{best,last}.ckpt and train_report.json.
void cmd_train(const RunConfig& run, std::ostream& log);
/// predictions/<id>.png, 16-bit probability maps.
void cmd_predict(const RunConfig& run, std::ostream& log);
/// metrics.csv, summary.json and optional overlays/.
void cmd_evaluate(const RunConfig& run, std::ostream& log);
/// comparison.csv, boxplot_<metric>.csv and per-method reports.
void cmd_compare(const RunConfig& run, std::ostream& log);

/// Dispatches on run.command and maps exceptions to exit codes, printing
/// the message to `err`.
int run_command(const RunConfig& run, std::ostream& log, std::ostream& err);

}  // namespace kdseg
