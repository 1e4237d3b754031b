#pragma once

#include <string>
#include <vector>

#include "cyclevc/features.hpp"
#include "cyclevc/rng.hpp"

namespace cyclevc {

// Two-pseudo-speaker corpus: shared base-trajectory distribution, one
// invertible transform per speaker, disjoint draws (non-parallel by
// construction). The exact composite map T_B o T_A^{-1} is written out so
// conversions can be scored against an oracle target.
struct SynthSpec {
  std::uint64_t seed = 1;
  int n_train = 40;
  int n_eval = 8;
  int q = 20;
  int t_min = 150;
  int t_max = 170;
  double scale_min = 0.5;
  double scale_max = 2.0;
  double fir_max = 0.3;  // per-tap magnitude bound; a+b stays inside the unit diagonal
  int sinusoids = 4;

  void validate() const;
};

// Frame-wise orthogonal mixing with per-dimension scales, followed by a
// 3-tap temporal FIR (a, 1, b) per dimension. Invertible while the center
// tap dominates (|a| + |b| < 1).
struct SpeakerTransform {
  std::vector<double> scales;  // length q
  std::vector<double> mix;     // q x q orthogonal, row-major
  double fir_a = 0.0;
  double fir_b = 0.0;
};

struct GroundTruthMap {
  int q = 0;
  SpeakerTransform ta, tb;
};

SpeakerTransform random_transform(const SynthSpec& spec, Rng& rng);

FeatureSequence apply_transform(const SpeakerTransform& t, const FeatureSequence& x);
FeatureSequence invert_transform(const SpeakerTransform& t, const FeatureSequence& y);

// tb(ta^{-1}(a)): the oracle A->B conversion.
FeatureSequence apply_ground_truth_xy(const GroundTruthMap& m, const FeatureSequence& a);
FeatureSequence apply_ground_truth_yx(const GroundTruthMap& m, const FeatureSequence& b);

// Sum of random-phase sinusoids per dimension, lightly smoothed.
FeatureSequence synth_base(const SynthSpec& spec, Rng& rng);

void write_ground_truth(const std::string& path, const GroundTruthMap& m);
GroundTruthMap read_ground_truth(const std::string& path);

struct SynthOutput {
  std::string manifest_a_train, manifest_a_eval;
  std::string manifest_b_train, manifest_b_eval;
  std::string pairs_xy, pairs_yx;  // converted-name,oracle-name rows
  std::string oracle_dir;
  std::string ground_truth;
};

SynthOutput generate_corpus(const SynthSpec& spec, const std::string& out_dir);

}  // namespace cyclevc
