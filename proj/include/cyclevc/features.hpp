#pragma once

#include <string>
#include <vector>

#include "cyclevc/grid.hpp"

namespace cyclevc {

// Q x T matrix of Mel-cepstral coefficients, dimension-major: values[d*t + i]
// holds dimension d at frame i.
struct FeatureSequence {
  int q = 0;
  int t = 0;
  std::vector<double> values;

  FeatureSequence() = default;
  FeatureSequence(int q_, int t_) : q(q_), t(t_) {
    if (q_ < 1 || t_ < 1)
      throw ValidationError("feature sequence: q and t must be >= 1, got q=" +
                            std::to_string(q_) + " t=" + std::to_string(t_));
    values.assign(static_cast<std::size_t>(q_) * t_, 0.0);
  }

  double& at(int d, int i) { return values[static_cast<std::size_t>(d) * t + i]; }
  double at(int d, int i) const { return values[static_cast<std::size_t>(d) * t + i]; }
};

// Per-dimension MCEP statistics plus scalar log-F0 statistics (voiced frames
// only). Stds are strictly positive.
struct NormStats {
  std::vector<double> mcep_mean;
  std::vector<double> mcep_std;
  double logf0_mean = 0.0;
  double logf0_std = 1.0;
};

// "MCP1" container: little-endian, bytes 0-3 magic, u32 Q, u32 T, then Q*T
// 32-bit floats dimension-major.
FeatureSequence read_features(const std::string& path);
void write_features(const std::string& path, const FeatureSequence& f);

// Labeled plain-text stats file (mcep_mean / mcep_std / logf0_mean / logf0_std).
NormStats read_stats(const std::string& path);
void write_stats(const std::string& path, const NormStats& s);

// Log-Gaussian normalized transform of one voiced frame's log-F0.
double convert_f0(double logf0, const NormStats& src, const NormStats& tgt);

// Linear-F0 track helper; unvoiced frames (f0 <= 0) pass through unchanged.
std::vector<double> convert_f0_track(const std::vector<double>& f0,
                                     const NormStats& src, const NormStats& tgt);

// converted - source, elementwise.
FeatureSequence differential_mceps(const FeatureSequence& source,
                                   const FeatureSequence& converted);

Grid to_grid(const FeatureSequence& f);       // (1, 1, Q, T)
FeatureSequence from_grid(const Grid& g);     // inverse of to_grid

}  // namespace cyclevc
