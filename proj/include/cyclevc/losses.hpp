#pragma once

#include <cstdint>
#include <string>
#include <utility>

#include "cyclevc/features.hpp"
#include "cyclevc/graph.hpp"
#include "cyclevc/model.hpp"

namespace cyclevc {

struct LossWeights {
  double lambda_cyc = 10.0;
  double lambda_id = 5.0;
  int adv_steps = 1;
};

// Per-iteration objective terms. adv2_* stay zero with one-step training;
// id is zeroed (in optimization and reporting) once the identity schedule
// has lapsed.
struct LossReport {
  double adv_g = 0.0, adv_d = 0.0;
  double adv2_g = 0.0, adv2_d = 0.0;
  double cyc = 0.0, id = 0.0;
  double total_g = 0.0, total_d = 0.0;
};

// Least-squares adversarial losses with targets 1 (real) and 0 (fake);
// the generator drives fakes toward 1.
double lsgan_d_loss(const Grid& real_scores, const Grid& fake_scores);
double lsgan_g_loss(const Grid& fake_scores);

// Sum of the two directions' reconstruction errors, each a mean absolute
// error over all entries.
double cycle_loss(const FeatureSequence& x, const FeatureSequence& x_cyc,
                  const FeatureSequence& y, const FeatureSequence& y_cyc);
double identity_loss(const FeatureSequence& y, const FeatureSequence& g_xy_of_y,
                     const FeatureSequence& x, const FeatureSequence& g_yx_of_x);

// Adversarial terms on the circularly converted feature: real = d2(x),
// fake = d2(x_cyc). Returns (g_term, d_term). d2 == nullptr is a
// configuration error (adv_steps=1 must not call this).
std::pair<double, double> second_adversarial_loss(const FeatureSequence& x,
                                                  const FeatureSequence& x_cyc,
                                                  const Discriminator* d2);

// total_g = adv_g + adv2_g + lambda_cyc*cyc + lambda_id*id
// total_d = adv_d + adv2_d
// The identity schedule is the caller's business: parts.id must already be
// zeroed when the schedule is inactive.
std::pair<double, double> total_objective(const LossReport& parts,
                                          const LossWeights& w);

// One comma-separated log row:
// iteration, adv_g, adv_d, adv2_g, adv2_d, cyc, id, total_g, total_d
std::string loss_csv_line(std::int64_t iteration, const LossReport& r);

// Graph-level builders used by the training loop.
Grid* lsgan_d_loss_node(Graph& g, Grid* real_scores, Grid* fake_scores);
Grid* lsgan_g_loss_node(Graph& g, Grid* fake_scores);

}  // namespace cyclevc
