#include "cyclevc/features.hpp"

#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <sstream>

namespace cyclevc {

namespace {

constexpr char kMagic[4] = {'M', 'C', 'P', '1'};
// Q*T is capped so the payload can never overflow a 32-bit byte count.
constexpr std::uint64_t kMaxElements = 1ull << 28;

void put_u32(std::ostream& out, std::uint32_t v) {
  unsigned char b[4] = {static_cast<unsigned char>(v),
                        static_cast<unsigned char>(v >> 8),
                        static_cast<unsigned char>(v >> 16),
                        static_cast<unsigned char>(v >> 24)};
  out.write(reinterpret_cast<const char*>(b), 4);
}

std::uint32_t get_u32(std::istream& in, const std::string& path, const char* what) {
  unsigned char b[4];
  if (!in.read(reinterpret_cast<char*>(b), 4))
    throw ValidationError(path + ": truncated feature file (while reading " +
                          what + ")");
  return static_cast<std::uint32_t>(b[0]) | (static_cast<std::uint32_t>(b[1]) << 8) |
         (static_cast<std::uint32_t>(b[2]) << 16) |
         (static_cast<std::uint32_t>(b[3]) << 24);
}

}  // namespace

FeatureSequence read_features(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ValidationError(path + ": cannot open feature file");
  char magic[4];
  if (!in.read(magic, 4))
    throw ValidationError(path + ": truncated feature file (while reading magic)");
  if (std::memcmp(magic, kMagic, 4) != 0)
    throw ValidationError(path + ": bad magic, not an MCP1 feature file");
  const std::uint32_t q = get_u32(in, path, "Q");
  const std::uint32_t t = get_u32(in, path, "T");
  if (q < 1 || t < 1)
    throw ValidationError(path + ": invalid dimensions Q=" + std::to_string(q) +
                          " T=" + std::to_string(t) + " (both must be >= 1)");
  if (static_cast<std::uint64_t>(q) * t > kMaxElements)
    throw ValidationError(path + ": dimension overflow, Q*T=" +
                          std::to_string(static_cast<std::uint64_t>(q) * t) +
                          " exceeds " + std::to_string(kMaxElements));
  FeatureSequence f(static_cast<int>(q), static_cast<int>(t));
  std::vector<float> buf(f.values.size());
  if (!in.read(reinterpret_cast<char*>(buf.data()),
               static_cast<std::streamsize>(buf.size() * sizeof(float))))
    throw ValidationError(path + ": truncated feature file (payload short of " +
                          std::to_string(buf.size()) + " floats)");
  for (std::size_t i = 0; i < buf.size(); ++i) f.values[i] = buf[i];
  return f;
}

void write_features(const std::string& path, const FeatureSequence& f) {
  if (f.q < 1 || f.t < 1)
    throw ValidationError(path + ": refusing to write empty feature sequence");
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ValidationError(path + ": cannot open for writing");
  out.write(kMagic, 4);
  put_u32(out, static_cast<std::uint32_t>(f.q));
  put_u32(out, static_cast<std::uint32_t>(f.t));
  std::vector<float> buf(f.values.size());
  for (std::size_t i = 0; i < buf.size(); ++i) buf[i] = static_cast<float>(f.values[i]);
  out.write(reinterpret_cast<const char*>(buf.data()),
            static_cast<std::streamsize>(buf.size() * sizeof(float)));
  if (!out) throw ValidationError(path + ": write failed");
}

namespace {

std::vector<double> parse_labeled_row(const std::string& line, const std::string& path) {
  std::vector<double> out;
  std::istringstream ss(line);
  std::string label;
  ss >> label;
  double v;
  while (ss >> v) out.push_back(v);
  if (out.empty()) throw ValidationError(path + ": empty stats row '" + line + "'");
  return out;
}

}  // namespace

NormStats read_stats(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError(path + ": cannot open stats file");
  NormStats s;
  std::string line;
  bool have_mean = false, have_std = false;
  while (std::getline(in, line)) {
    if (line.empty() || line[0] == '#') continue;
    if (line.rfind("mcep_mean", 0) == 0) {
      s.mcep_mean = parse_labeled_row(line, path);
      have_mean = true;
    } else if (line.rfind("mcep_std", 0) == 0) {
      s.mcep_std = parse_labeled_row(line, path);
      have_std = true;
    } else if (line.rfind("logf0_mean", 0) == 0) {
      s.logf0_mean = parse_labeled_row(line, path)[0];
    } else if (line.rfind("logf0_std", 0) == 0) {
      s.logf0_std = parse_labeled_row(line, path)[0];
    } else {
      throw ValidationError(path + ": unknown stats row '" + line + "'");
    }
  }
  if (!have_mean || !have_std)
    throw ValidationError(path + ": stats file missing mcep_mean or mcep_std");
  if (s.mcep_mean.size() != s.mcep_std.size())
    throw ValidationError(path + ": mcep_mean and mcep_std lengths differ");
  for (double sd : s.mcep_std)
    if (!(sd > 0.0)) throw ValidationError(path + ": non-positive mcep_std entry");
  if (!(s.logf0_std > 0.0))
    throw ValidationError(path + ": non-positive logf0_std");
  return s;
}

void write_stats(const std::string& path, const NormStats& s) {
  std::ofstream out(path);
  if (!out) throw ValidationError(path + ": cannot open for writing");
  char buf[32];
  auto row = [&](const char* label, const std::vector<double>& v) {
    out << label;
    for (double x : v) {
      std::snprintf(buf, sizeof buf, " %.17g", x);
      out << buf;
    }
    out << "\n";
  };
  row("mcep_mean", s.mcep_mean);
  row("mcep_std", s.mcep_std);
  std::snprintf(buf, sizeof buf, "%.17g", s.logf0_mean);
  out << "logf0_mean " << buf << "\n";
  std::snprintf(buf, sizeof buf, "%.17g", s.logf0_std);
  out << "logf0_std " << buf << "\n";
}

double convert_f0(double logf0, const NormStats& src, const NormStats& tgt) {
  if (!(src.logf0_std > 0.0) || !(tgt.logf0_std > 0.0))
    throw ValidationError("convert_f0: log-F0 stds must be positive");
  return tgt.logf0_mean + (tgt.logf0_std / src.logf0_std) * (logf0 - src.logf0_mean);
}

std::vector<double> convert_f0_track(const std::vector<double>& f0,
                                     const NormStats& src, const NormStats& tgt) {
  std::vector<double> out(f0.size());
  for (std::size_t i = 0; i < f0.size(); ++i)
    out[i] = f0[i] > 0.0 ? std::exp(convert_f0(std::log(f0[i]), src, tgt)) : f0[i];
  return out;
}

FeatureSequence differential_mceps(const FeatureSequence& source,
                                   const FeatureSequence& converted) {
  if (source.q != converted.q || source.t != converted.t)
    throw ValidationError("differential_mceps: shape mismatch " +
                          std::to_string(source.q) + "x" + std::to_string(source.t) +
                          " vs " + std::to_string(converted.q) + "x" +
                          std::to_string(converted.t));
  FeatureSequence d(source.q, source.t);
  for (std::size_t i = 0; i < d.values.size(); ++i)
    d.values[i] = converted.values[i] - source.values[i];
  return d;
}

Grid to_grid(const FeatureSequence& f) {
  Grid g({1, 1, f.q, f.t});
  g.v = f.values;  // dimension-major matches NCHW rows
  return g;
}

FeatureSequence from_grid(const Grid& g) {
  if (g.shape.n != 1 || g.shape.c != 1)
    throw ComputeError("from_grid: expected (1,1,Q,T), got " + g.shape.str());
  FeatureSequence f(g.shape.h, g.shape.w);
  f.values = g.v;
  return f;
}

}  // namespace cyclevc
