#include "cyclevc/losses.hpp"

#include <cstdio>

namespace cyclevc {

namespace {

double mean_sq_to(const Grid& scores, double target) {
  if (scores.shape.numel() == 0 || scores.v.empty())
    throw ValidationError("lsgan: empty score grid");
  double s = 0.0;
  for (double v : scores.v) s += (v - target) * (v - target);
  return s / static_cast<double>(scores.v.size());
}

double l1_mean_pair(const FeatureSequence& a, const FeatureSequence& b,
                    const char* what) {
  if (a.q != b.q || a.t != b.t)
    throw ValidationError(std::string(what) + ": shape mismatch " +
                          std::to_string(a.q) + "x" + std::to_string(a.t) + " vs " +
                          std::to_string(b.q) + "x" + std::to_string(b.t));
  double s = 0.0;
  for (std::size_t i = 0; i < a.values.size(); ++i)
    s += std::abs(a.values[i] - b.values[i]);
  return s / static_cast<double>(a.values.size());
}

}  // namespace

double lsgan_d_loss(const Grid& real_scores, const Grid& fake_scores) {
  return mean_sq_to(real_scores, 1.0) + mean_sq_to(fake_scores, 0.0);
}

double lsgan_g_loss(const Grid& fake_scores) { return mean_sq_to(fake_scores, 1.0); }

double cycle_loss(const FeatureSequence& x, const FeatureSequence& x_cyc,
                  const FeatureSequence& y, const FeatureSequence& y_cyc) {
  return l1_mean_pair(x, x_cyc, "cycle_loss") + l1_mean_pair(y, y_cyc, "cycle_loss");
}

double identity_loss(const FeatureSequence& y, const FeatureSequence& g_xy_of_y,
                     const FeatureSequence& x, const FeatureSequence& g_yx_of_x) {
  return l1_mean_pair(y, g_xy_of_y, "identity_loss") +
         l1_mean_pair(x, g_yx_of_x, "identity_loss");
}

std::pair<double, double> second_adversarial_loss(const FeatureSequence& x,
                                                  const FeatureSequence& x_cyc,
                                                  const Discriminator* d2) {
  if (d2 == nullptr)
    throw ValidationError(
        "second_adversarial_loss: no second-step discriminator (adv_steps=1 "
        "configuration)");
  if (x.q != x_cyc.q || x.t != x_cyc.t)
    throw ValidationError("second_adversarial_loss: shape mismatch");
  const Grid real = discriminator_forward(*d2, x);
  const Grid fake = discriminator_forward(*d2, x_cyc);
  return {lsgan_g_loss(fake), lsgan_d_loss(real, fake)};
}

std::pair<double, double> total_objective(const LossReport& parts,
                                          const LossWeights& w) {
  if (w.lambda_cyc < 0.0 || w.lambda_id < 0.0)
    throw ValidationError("total_objective: negative trade-off weight");
  if (w.adv_steps != 1 && w.adv_steps != 2)
    throw ValidationError("total_objective: adv_steps must be 1 or 2");
  if (w.adv_steps == 1 && (parts.adv2_g != 0.0 || parts.adv2_d != 0.0))
    throw ValidationError(
        "total_objective: adv2 terms present in a one-step configuration");
  const double total_g =
      parts.adv_g + parts.adv2_g + w.lambda_cyc * parts.cyc + w.lambda_id * parts.id;
  const double total_d = parts.adv_d + parts.adv2_d;
  return {total_g, total_d};
}

std::string loss_csv_line(std::int64_t iteration, const LossReport& r) {
  char buf[320];
  std::snprintf(buf, sizeof buf,
                "%lld,%.12g,%.12g,%.12g,%.12g,%.12g,%.12g,%.12g,%.12g",
                static_cast<long long>(iteration), r.adv_g, r.adv_d, r.adv2_g,
                r.adv2_d, r.cyc, r.id, r.total_g, r.total_d);
  return buf;
}

Grid* lsgan_d_loss_node(Graph& g, Grid* real_scores, Grid* fake_scores) {
  Grid* real_term = g.mean_sq_to(real_scores, 1.0);
  Grid* fake_term = g.mean_sq_to(fake_scores, 0.0);
  return g.weighted_sum({{real_term, 1.0}, {fake_term, 1.0}});
}

Grid* lsgan_g_loss_node(Graph& g, Grid* fake_scores) {
  return g.mean_sq_to(fake_scores, 1.0);
}

}  // namespace cyclevc
