#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "cyclevc/cli.hpp"
#include "cyclevc/grid.hpp"

int main(int argc, char** argv) {
  CLI::App app{"CycleGAN-style non-parallel Mel-cepstral sequence conversion"};
  app.require_subcommand(1);

  std::string config_path, resume_path;
  std::optional<std::uint64_t> seed_override;
  auto* train = app.add_subcommand("train", "train a conversion model pair");
  train->add_option("--config", config_path, "key=value run configuration")->required();
  train->add_option("--resume", resume_path, "checkpoint to resume from");
  std::uint64_t seed_value = 0;
  auto* seed_opt = train->add_option("--seed", seed_value, "override the config seed");

  cyclevc::cli::ConvertOptions conv;
  auto* convert = app.add_subcommand("convert", "convert feature files through a checkpoint");
  convert->add_option("--checkpoint", conv.checkpoint, "trained checkpoint")->required();
  convert->add_option("--input", conv.input, ".mcp file or directory")->required();
  convert->add_option("--out", conv.out_dir, "output directory")->required();
  convert->add_option("--direction", conv.direction, "xy or yx (default xy)");
  convert->add_flag("--differential", conv.differential,
                    "also write converted-minus-source files");

  std::string eval_converted, eval_target, eval_pairs, eval_out;
  auto* evaluate = app.add_subcommand("evaluate", "MCD/MSD report for converted vs target");
  evaluate->add_option("--converted", eval_converted, "directory of converted files")->required();
  evaluate->add_option("--target", eval_target, "directory of target files")->required();
  evaluate->add_option("--pairs", eval_pairs, "pairing manifest (converted,target rows)")->required();
  evaluate->add_option("--out", eval_out, "report path (default: stdout)");

  auto* gradcheck = app.add_subcommand("gradcheck", "finite-difference check of every op");

  std::string synth_spec, synth_out;
  auto* synth = app.add_subcommand("synth", "generate the two-pseudo-speaker corpus");
  synth->add_option("--config", synth_spec, "key=value synthesis spec")->required();
  synth->add_option("--out", synth_out, "output directory")->required();

  CLI11_PARSE(app, argc, argv);

  try {
    if (train->parsed()) {
      if (seed_opt->count() > 0) seed_override = seed_value;
      cyclevc::cli::run_train(config_path, seed_override, resume_path);
    } else if (convert->parsed()) {
      cyclevc::cli::run_convert(conv);
    } else if (evaluate->parsed()) {
      cyclevc::cli::run_evaluate(eval_converted, eval_target, eval_pairs, eval_out);
    } else if (gradcheck->parsed()) {
      if (cyclevc::cli::run_gradcheck(std::cout) > 0) return 2;
    } else if (synth->parsed()) {
      cyclevc::cli::run_synth(synth_spec, synth_out);
    }
  } catch (const cyclevc::ValidationError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "runtime failure: " << e.what() << "\n";
    return 2;
  }
  return 0;
}
