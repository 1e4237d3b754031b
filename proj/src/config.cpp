#include "cyclevc/config.hpp"

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

namespace cyclevc {

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

std::vector<std::pair<std::string, std::string>> parse_kv(const std::string& text,
                                                          const std::string& origin) {
  std::vector<std::pair<std::string, std::string>> items;
  std::istringstream in(text);
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw ValidationError(origin + ":" + std::to_string(lineno) +
                            ": expected key=value, got '" + line + "'");
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    if (key.empty())
      throw ValidationError(origin + ":" + std::to_string(lineno) + ": empty key");
    items.emplace_back(key, value);
  }
  return items;
}

std::string read_text_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError(path + ": cannot open");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::int64_t to_i64(const std::string& v, const std::string& key) {
  try {
    std::size_t idx = 0;
    const long long x = std::stoll(v, &idx);
    if (idx != v.size()) throw std::invalid_argument("trailing");
    return x;
  } catch (const std::exception&) {
    throw ValidationError("config: key '" + key + "' expects an integer, got '" + v + "'");
  }
}

std::uint64_t to_u64(const std::string& v, const std::string& key) {
  try {
    std::size_t idx = 0;
    const unsigned long long x = std::stoull(v, &idx);
    if (idx != v.size()) throw std::invalid_argument("trailing");
    return x;
  } catch (const std::exception&) {
    throw ValidationError("config: key '" + key + "' expects an unsigned integer, got '" +
                          v + "'");
  }
}

int to_int(const std::string& v, const std::string& key) {
  return static_cast<int>(to_i64(v, key));
}

double to_f64(const std::string& v, const std::string& key) {
  try {
    std::size_t idx = 0;
    const double x = std::stod(v, &idx);
    if (idx != v.size()) throw std::invalid_argument("trailing");
    return x;
  } catch (const std::exception&) {
    throw ValidationError("config: key '" + key + "' expects a number, got '" + v + "'");
  }
}

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

}  // namespace

TrainRunConfig parse_train_config_text(const std::string& text,
                                       const std::string& origin) {
  TrainRunConfig c;
  for (const auto& [key, value] : parse_kv(text, origin)) {
    TrainingConfig& t = c.train;
    if (key == "iterations") t.iterations = to_i64(value, key);
    else if (key == "lr_g") t.lr_g = to_f64(value, key);
    else if (key == "lr_d") t.lr_d = to_f64(value, key);
    else if (key == "beta1") t.beta1 = to_f64(value, key);
    else if (key == "beta2") t.beta2 = to_f64(value, key);
    else if (key == "adam_eps") t.adam_eps = to_f64(value, key);
    else if (key == "batch_size") t.batch_size = to_int(value, key);
    else if (key == "crop_frames") t.crop_frames = to_int(value, key);
    else if (key == "lambda_cyc") t.lambda_cyc = to_f64(value, key);
    else if (key == "lambda_id") t.lambda_id = to_f64(value, key);
    else if (key == "id_cutoff_iter") t.id_cutoff_iter = to_i64(value, key);
    else if (key == "adv_steps") t.adv_steps = to_int(value, key);
    else if (key == "generator_kind") t.generator_kind = parse_generator_kind(value);
    else if (key == "discriminator_kind")
      t.discriminator_kind = parse_discriminator_kind(value);
    else if (key == "seed") t.seed = to_u64(value, key);
    else if (key == "base_channels") t.base_channels = to_int(value, key);
    else if (key == "n_res") t.n_res = to_int(value, key);
    else if (key == "checkpoint_every") t.checkpoint_every = to_i64(value, key);
    else if (key == "train_manifest_x") c.train_manifest_x = value;
    else if (key == "train_manifest_y") c.train_manifest_y = value;
    else if (key == "out_dir") c.out_dir = value;
    else throw ValidationError("config: unknown key '" + key + "'");
  }
  c.train.validate();
  if (c.train_manifest_x.empty() || c.train_manifest_y.empty())
    throw ValidationError("config: train_manifest_x and train_manifest_y are required");
  return c;
}

TrainRunConfig parse_train_config(const std::string& path) {
  return parse_train_config_text(read_text_file(path), path);
}

std::string format_train_config(const TrainRunConfig& c) {
  const TrainingConfig& t = c.train;
  std::ostringstream out;
  out << "iterations=" << t.iterations << "\n"
      << "lr_g=" << fmt(t.lr_g) << "\n"
      << "lr_d=" << fmt(t.lr_d) << "\n"
      << "beta1=" << fmt(t.beta1) << "\n"
      << "beta2=" << fmt(t.beta2) << "\n"
      << "adam_eps=" << fmt(t.adam_eps) << "\n"
      << "batch_size=" << t.batch_size << "\n"
      << "crop_frames=" << t.crop_frames << "\n"
      << "lambda_cyc=" << fmt(t.lambda_cyc) << "\n"
      << "lambda_id=" << fmt(t.lambda_id) << "\n"
      << "id_cutoff_iter=" << t.id_cutoff_iter << "\n"
      << "adv_steps=" << t.adv_steps << "\n"
      << "generator_kind=" << to_string(t.generator_kind) << "\n"
      << "discriminator_kind=" << to_string(t.discriminator_kind) << "\n"
      << "seed=" << t.seed << "\n"
      << "base_channels=" << t.base_channels << "\n"
      << "n_res=" << t.n_res << "\n"
      << "checkpoint_every=" << t.checkpoint_every << "\n"
      << "train_manifest_x=" << c.train_manifest_x << "\n"
      << "train_manifest_y=" << c.train_manifest_y << "\n"
      << "out_dir=" << c.out_dir << "\n";
  return out.str();
}

SynthSpec parse_synth_spec(const std::string& path) {
  SynthSpec s;
  for (const auto& [key, value] : parse_kv(read_text_file(path), path)) {
    if (key == "seed") s.seed = to_u64(value, key);
    else if (key == "n_train") s.n_train = to_int(value, key);
    else if (key == "n_eval") s.n_eval = to_int(value, key);
    else if (key == "q") s.q = to_int(value, key);
    else if (key == "t_min") s.t_min = to_int(value, key);
    else if (key == "t_max") s.t_max = to_int(value, key);
    else if (key == "scale_min") s.scale_min = to_f64(value, key);
    else if (key == "scale_max") s.scale_max = to_f64(value, key);
    else if (key == "fir_max") s.fir_max = to_f64(value, key);
    else if (key == "sinusoids") s.sinusoids = to_int(value, key);
    else throw ValidationError("synth spec: unknown key '" + key + "'");
  }
  s.validate();
  return s;
}

std::string format_synth_spec(const SynthSpec& s) {
  std::ostringstream out;
  out << "seed=" << s.seed << "\n"
      << "n_train=" << s.n_train << "\n"
      << "n_eval=" << s.n_eval << "\n"
      << "q=" << s.q << "\n"
      << "t_min=" << s.t_min << "\n"
      << "t_max=" << s.t_max << "\n"
      << "scale_min=" << fmt(s.scale_min) << "\n"
      << "scale_max=" << fmt(s.scale_max) << "\n"
      << "fir_max=" << fmt(s.fir_max) << "\n"
      << "sinusoids=" << s.sinusoids << "\n";
  return out.str();
}

std::vector<std::string> read_manifest(const std::string& path) {
  namespace fs = std::filesystem;
  std::ifstream in(path);
  if (!in) throw ValidationError(path + ": cannot open manifest");
  const fs::path base = fs::path(path).parent_path();
  std::vector<std::string> out;
  std::string line;
  while (std::getline(in, line)) {
    line = trim(line);
    if (line.empty() || line[0] == '#') continue;
    fs::path p(line);
    out.push_back(p.is_absolute() ? p.string() : (base / p).string());
  }
  if (out.empty()) throw ValidationError(path + ": manifest lists no files");
  return out;
}

}  // namespace cyclevc
