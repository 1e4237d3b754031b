#pragma once

#include <iosfwd>
#include <optional>
#include <string>

#include "cyclevc/training.hpp"

namespace cyclevc::cli {

// Command bodies shared by the binary and the tests. They throw
// ValidationError / ComputeError; the binary maps those to exit codes 1 / 2.

void run_train(const std::string& config_path,
               std::optional<std::uint64_t> seed_override = {},
               const std::string& resume_checkpoint = "");

struct ConvertOptions {
  std::string checkpoint;
  std::string input;  // one .mcp file or a directory of them
  std::string out_dir;
  std::string direction = "xy";
  bool differential = false;
};
void run_convert(const ConvertOptions& opt);

void run_evaluate(const std::string& converted_dir, const std::string& target_dir,
                  const std::string& pairs_path, const std::string& out_path);

// Prints one row per differentiable op; returns the number of failures.
int run_gradcheck(std::ostream& out);

void run_synth(const std::string& spec_path, const std::string& out_dir);

// Rebuilds one generator (plus both stats blocks) from a checkpoint; shared
// by convert and by tests that score converted output.
struct LoadedConverter {
  GeneratorSpec spec;
  std::unique_ptr<Generator> generator;
  NormStats src_stats, tgt_stats;
  int q = 0;
};
LoadedConverter load_converter(const Checkpoint& ck, const std::string& direction);

// Whole-utterance conversion: normalize with source stats, reflection-pad T
// to a valid generator length, forward, trim, denormalize with target stats.
FeatureSequence convert_sequence(const LoadedConverter& c, const FeatureSequence& in);

}  // namespace cyclevc::cli
