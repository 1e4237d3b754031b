#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "cyclevc/losses.hpp"
#include "cyclevc/model.hpp"
#include "cyclevc/rng.hpp"

namespace cyclevc {

struct TrainingConfig {
  std::int64_t iterations = 200000;
  double lr_g = 0.0002;
  double lr_d = 0.0001;
  double beta1 = 0.5;
  double beta2 = 0.999;
  double adam_eps = 1e-8;
  int batch_size = 1;
  int crop_frames = 128;
  double lambda_cyc = 10.0;
  double lambda_id = 5.0;
  std::int64_t id_cutoff_iter = 10000;
  int adv_steps = 2;
  GeneratorKind generator_kind = GeneratorKind::k212d;
  DiscriminatorKind discriminator_kind = DiscriminatorKind::kPatch;
  std::uint64_t seed = 1;
  int base_channels = 64;
  int n_res = 6;
  std::int64_t checkpoint_every = 5000;

  void validate() const;  // throws ValidationError on any broken invariant
};

struct Corpus {
  std::string speaker;
  std::vector<FeatureSequence> sequences;

  int q() const;  // common feature dimension; throws if sequences disagree
};

// Per-dimension population statistics over all frames of all sequences;
// stds floored at 1e-8.
NormStats compute_stats(const std::vector<FeatureSequence>& sequences);

FeatureSequence normalize(const FeatureSequence& x, const NormStats& s);
FeatureSequence denormalize(const FeatureSequence& x, const NormStats& s);

// Contiguous Q x frames slice with a uniformly drawn start. Throws on
// too-short input; the training loop reacts by resampling another sequence.
FeatureSequence random_crop(const FeatureSequence& x, int frames, Rng& rng);

// Adam over a fixed list of parameter grids, reading each grid's .g.
class AdamOpt {
 public:
  explicit AdamOpt(std::vector<Grid*> params);
  void step(double lr, double beta1, double beta2, double eps);

  std::vector<Grid*> params;
  std::vector<std::vector<double>> m, v;
  std::int64_t t = 0;
};

struct Checkpoint {
  TrainingConfig cfg;
  int q = 0;
  std::int64_t iteration = 0;
  Rng::State rng{};
  std::int64_t t_g = 0, t_d = 0;
  NormStats stats_x, stats_y;
  std::vector<std::string> names;
  std::vector<Shape> shapes;
  std::vector<std::vector<double>> values;
  std::vector<std::vector<double>> adam_m;
  std::vector<std::vector<double>> adam_v;
};

// Little-endian binary: magic "CVC2", format version, config block, stats,
// then length-prefixed named parameter arrays with their Adam moments.
void save_checkpoint(const std::string& path, const Checkpoint& ck);
Checkpoint load_checkpoint(const std::string& path);

// Rejects resuming into a run whose architecture differs from the
// checkpoint's; never coerces.
void check_architecture_match(const Checkpoint& ck, const TrainingConfig& cfg);

class Trainer {
 public:
  // Fresh run: computes normalization stats from the training corpora.
  Trainer(const TrainingConfig& cfg, Corpus cx, Corpus cy);
  // Resume: restores parameters, optimizer moments, RNG state and iteration.
  Trainer(const Checkpoint& ck, const TrainingConfig& cfg, Corpus cx, Corpus cy);

  // One iteration: discriminator update on detached generator outputs, then
  // one joint generator update. The identity term participates only while
  // iteration < id_cutoff_iter.
  LossReport step();

  // Steps until cfg.iterations, appending one CSV row per iteration and
  // writing periodic plus final checkpoints when a directory is given.
  void run(std::ostream* loss_log, const std::string& checkpoint_dir);

  Checkpoint make_checkpoint() const;

  ModelSet& models() { return models_; }
  const ModelSet& models() const { return models_; }
  std::int64_t iteration() const { return iteration_; }
  const TrainingConfig& config() const { return cfg_; }
  const NormStats& stats_x() const { return stats_x_; }
  const NormStats& stats_y() const { return stats_y_; }

 private:
  void prepare_corpora(Corpus cx, Corpus cy);
  Grid sample_batch(const std::vector<FeatureSequence>& seqs);

  TrainingConfig cfg_;
  int q_ = 0;
  ModelSet models_;
  AdamOpt opt_g_, opt_d_;
  Rng rng_;
  std::int64_t iteration_ = 0;
  NormStats stats_x_, stats_y_;
  std::vector<FeatureSequence> train_x_, train_y_;  // normalized
};

}  // namespace cyclevc
