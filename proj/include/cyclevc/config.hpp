#pragma once

#include <string>
#include <utility>
#include <vector>

#include "cyclevc/synth.hpp"
#include "cyclevc/training.hpp"

namespace cyclevc {

// Flat key=value text with '#' comments; keys are validated strictly so a
// typo fails before any compute.
struct TrainRunConfig {
  TrainingConfig train;
  std::string train_manifest_x;
  std::string train_manifest_y;
  std::string out_dir = "run";
};

TrainRunConfig parse_train_config(const std::string& path);
TrainRunConfig parse_train_config_text(const std::string& text,
                                       const std::string& origin);
// Echo of the fully resolved configuration; reparsing it yields an identical
// TrainRunConfig.
std::string format_train_config(const TrainRunConfig& c);

SynthSpec parse_synth_spec(const std::string& path);
std::string format_synth_spec(const SynthSpec& s);

// Newline-separated relative paths, resolved against the manifest directory.
std::vector<std::string> read_manifest(const std::string& path);

}  // namespace cyclevc
