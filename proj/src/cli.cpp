#include "cyclevc/cli.hpp"

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include "cyclevc/config.hpp"
#include "cyclevc/gradcheck.hpp"
#include "cyclevc/log.hpp"
#include "cyclevc/metrics.hpp"

namespace cyclevc::cli {

namespace fs = std::filesystem;

namespace {

Corpus load_corpus(const std::string& speaker, const std::string& manifest_path) {
  Corpus c;
  c.speaker = speaker;
  for (const auto& path : read_manifest(manifest_path)) {
    if (!fs::exists(path))
      throw ValidationError(manifest_path + ": listed file missing: " + path);
    c.sequences.push_back(read_features(path));
  }
  return c;
}

}  // namespace

void run_train(const std::string& config_path,
               std::optional<std::uint64_t> seed_override,
               const std::string& resume_checkpoint) {
  TrainRunConfig run = parse_train_config(config_path);
  if (seed_override) run.train.seed = *seed_override;

  // relative paths in the config resolve against the config file itself
  const fs::path base = fs::absolute(config_path).parent_path();
  auto resolve = [&base](std::string& p) {
    if (!p.empty() && fs::path(p).is_relative()) p = (base / p).string();
  };
  resolve(run.train_manifest_x);
  resolve(run.train_manifest_y);
  resolve(run.out_dir);

  Corpus cx = load_corpus("x", run.train_manifest_x);
  Corpus cy = load_corpus("y", run.train_manifest_y);
  // fail on dimension mismatch before any compute
  if (cx.q() != cy.q())
    throw ValidationError("speakers disagree on feature dimension: Q=" +
                          std::to_string(cx.q()) + " vs Q=" + std::to_string(cy.q()));

  fs::create_directories(run.out_dir);
  {
    std::ofstream meta(fs::path(run.out_dir) / "run_config.txt");
    meta << format_train_config(run);
  }

  std::unique_ptr<Trainer> trainer;
  if (resume_checkpoint.empty()) {
    trainer = std::make_unique<Trainer>(run.train, std::move(cx), std::move(cy));
  } else {
    const Checkpoint ck = load_checkpoint(resume_checkpoint);
    trainer = std::make_unique<Trainer>(ck, run.train, std::move(cx), std::move(cy));
  }

  write_stats((fs::path(run.out_dir) / "stats_x.txt").string(), trainer->stats_x());
  write_stats((fs::path(run.out_dir) / "stats_y.txt").string(), trainer->stats_y());

  const auto log_mode = resume_checkpoint.empty() ? std::ios::trunc : std::ios::app;
  std::ofstream loss_log(fs::path(run.out_dir) / "loss_log.csv", log_mode);
  if (!loss_log) throw ValidationError(run.out_dir + ": cannot open loss log");

  log_info("training " + std::to_string(run.train.iterations) + " iterations (" +
           to_string(run.train.generator_kind) + " generator, " +
           to_string(run.train.discriminator_kind) + " discriminator, " +
           std::to_string(run.train.adv_steps) + "-step)");
  trainer->run(&loss_log, run.out_dir);
  log_info("training done at iteration " + std::to_string(trainer->iteration()));
}

LoadedConverter load_converter(const Checkpoint& ck, const std::string& direction) {
  if (direction != "xy" && direction != "yx")
    throw ValidationError("direction must be 'xy' or 'yx', got '" + direction + "'");
  if (ck.stats_x.mcep_mean.empty() || ck.stats_y.mcep_mean.empty())
    throw ValidationError("checkpoint carries no normalization stats");
  LoadedConverter c;
  c.q = ck.q;
  c.spec = GeneratorSpec{ck.cfg.generator_kind, ck.q, ck.cfg.base_channels, ck.cfg.n_res};
  c.generator = std::make_unique<Generator>(c.spec, 0);
  const std::string prefix = direction == "xy" ? "g_xy." : "g_yx.";
  ParamStore& store = c.generator->params();
  for (std::size_t i = 0; i < store.size(); ++i) {
    const std::string want = prefix + store.name(i);
    const auto it = std::find(ck.names.begin(), ck.names.end(), want);
    if (it == ck.names.end())
      throw ValidationError("checkpoint is missing parameter '" + want + "'");
    const std::size_t idx = static_cast<std::size_t>(it - ck.names.begin());
    if (!(ck.shapes[idx] == store.grid(i).shape))
      throw ValidationError("checkpoint parameter '" + want + "' has shape " +
                            ck.shapes[idx].str() + ", expected " +
                            store.grid(i).shape.str());
    store.grid(i).v = ck.values[idx];
  }
  if (direction == "xy") {
    c.src_stats = ck.stats_x;
    c.tgt_stats = ck.stats_y;
  } else {
    c.src_stats = ck.stats_y;
    c.tgt_stats = ck.stats_x;
  }
  return c;
}

namespace {

// Reflection padding (no edge repeat) out to the next generator-admissible
// length; falls back to edge bouncing for very short inputs.
FeatureSequence pad_reflect(const FeatureSequence& x, int target_t) {
  if (x.t >= target_t) return x;
  FeatureSequence y(x.q, target_t);
  for (int d = 0; d < x.q; ++d) {
    for (int i = 0; i < x.t; ++i) y.at(d, i) = x.at(d, i);
    for (int i = x.t; i < target_t; ++i) {
      int m = i;
      const int period = std::max(1, 2 * (x.t - 1));
      m = m % period;
      if (m >= x.t) m = period - m;
      y.at(d, i) = x.at(d, m);
    }
  }
  return y;
}

}  // namespace

FeatureSequence convert_sequence(const LoadedConverter& c, const FeatureSequence& in) {
  if (in.q != c.q)
    throw ValidationError("convert: input has Q=" + std::to_string(in.q) +
                          " but the checkpoint was trained with Q=" +
                          std::to_string(c.q));
  const FeatureSequence norm = normalize(in, c.src_stats);
  const int padded_t = std::max(16, (in.t + 3) / 4 * 4);
  const FeatureSequence padded = pad_reflect(norm, padded_t);
  FeatureSequence out = generator_forward(*c.generator, padded);
  if (out.t != in.t) {
    FeatureSequence trimmed(in.q, in.t);
    for (int d = 0; d < in.q; ++d)
      for (int i = 0; i < in.t; ++i) trimmed.at(d, i) = out.at(d, i);
    out = std::move(trimmed);
  }
  return denormalize(out, c.tgt_stats);
}

void run_convert(const ConvertOptions& opt) {
  const Checkpoint ck = load_checkpoint(opt.checkpoint);
  const LoadedConverter conv = load_converter(ck, opt.direction);

  std::vector<fs::path> inputs;
  if (fs::is_directory(opt.input)) {
    for (const auto& e : fs::directory_iterator(opt.input))
      if (e.path().extension() == ".mcp") inputs.push_back(e.path());
    std::sort(inputs.begin(), inputs.end());
    if (inputs.empty())
      throw ValidationError(opt.input + ": directory contains no .mcp files");
  } else if (fs::exists(opt.input)) {
    inputs.push_back(opt.input);
  } else {
    throw ValidationError(opt.input + ": no such file or directory");
  }

  fs::create_directories(opt.out_dir);
  if (opt.differential) fs::create_directories(fs::path(opt.out_dir) / "differential");
  for (const auto& p : inputs) {
    const FeatureSequence src = read_features(p.string());
    const FeatureSequence out = convert_sequence(conv, src);
    const fs::path dst = fs::path(opt.out_dir) / p.filename();
    write_features(dst.string(), out);
    log_debug("converted " + p.string() + " -> " + dst.string());
    if (opt.differential) {
      const fs::path diff = fs::path(opt.out_dir) / "differential" / p.filename();
      write_features(diff.string(), differential_mceps(src, out));
    }
  }
  log_info("converted " + std::to_string(inputs.size()) + " file(s) to " + opt.out_dir);
}

void run_evaluate(const std::string& converted_dir, const std::string& target_dir,
                  const std::string& pairs_path, const std::string& out_path) {
  std::ifstream pairs(pairs_path);
  if (!pairs) throw ValidationError(pairs_path + ": cannot open pairing manifest");

  std::vector<std::pair<std::string, std::string>> entries;
  std::string line;
  while (std::getline(pairs, line)) {
    if (line.empty() || line[0] == '#') continue;
    const auto comma = line.find(',');
    if (comma == std::string::npos)
      throw ValidationError(pairs_path + ": expected 'converted,target', got '" + line +
                            "'");
    entries.emplace_back(line.substr(0, comma), line.substr(comma + 1));
  }
  if (entries.empty()) throw ValidationError(pairs_path + ": no pairs listed");

  // fail-fast: collect every orphan before touching any feature data
  std::vector<std::string> orphans;
  for (const auto& [c, t] : entries) {
    if (!fs::exists(fs::path(converted_dir) / c))
      orphans.push_back("missing converted file: " + c);
    if (!fs::exists(fs::path(target_dir) / t))
      orphans.push_back("missing target file: " + t);
  }
  for (const auto& e : fs::directory_iterator(converted_dir)) {
    if (e.path().extension() != ".mcp") continue;
    const std::string name = e.path().filename().string();
    const bool listed = std::any_of(entries.begin(), entries.end(),
                                    [&name](const auto& p) { return p.first == name; });
    if (!listed) orphans.push_back("unpaired converted file: " + name);
  }
  if (!orphans.empty()) {
    std::string msg = "evaluate: orphan files";
    for (const auto& o : orphans) msg += "\n  " + o;
    throw ValidationError(msg);
  }

  std::vector<UtteranceMetrics> rows;
  for (const auto& [c, t] : entries) {
    const FeatureSequence conv = read_features((fs::path(converted_dir) / c).string());
    const FeatureSequence tgt = read_features((fs::path(target_dir) / t).string());
    rows.push_back({c, mcd_utterance(conv, tgt), msd(conv, tgt)});
  }

  if (out_path.empty()) {
    write_metric_report(std::cout, rows);
  } else {
    std::ofstream out(out_path);
    if (!out) throw ValidationError(out_path + ": cannot open for writing");
    write_metric_report(out, rows);
  }
}

int run_gradcheck(std::ostream& out) {
  const double tolerance = 1e-4;
  int failures = 0;
  out << "op                 max_rel_err   status\n";
  for (const auto& row : grad_check_all(42)) {
    char buf[96];
    std::snprintf(buf, sizeof buf, "%-18s %.3e     %s", row.name.c_str(),
                  row.max_rel_err, row.max_rel_err < tolerance ? "pass" : "FAIL");
    out << buf << "\n";
    if (!(row.max_rel_err < tolerance)) ++failures;
  }
  return failures;
}

void run_synth(const std::string& spec_path, const std::string& out_dir) {
  const SynthSpec spec = parse_synth_spec(spec_path);
  const SynthOutput out = generate_corpus(spec, out_dir);
  log_info("synthetic corpus written under " + out_dir);
  log_debug("ground truth at " + out.ground_truth);
}

}  // namespace cyclevc::cli
