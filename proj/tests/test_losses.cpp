#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "cyclevc/losses.hpp"

using namespace cyclevc;

namespace {

Grid scores(std::initializer_list<double> values) {
  Grid g({1, 1, 1, static_cast<int>(values.size())});
  std::size_t i = 0;
  for (double v : values) g.v[i++] = v;
  return g;
}

FeatureSequence seq(int q, int t, std::initializer_list<double> values) {
  FeatureSequence f(q, t);
  std::size_t i = 0;
  for (double v : values) f.values[i++] = v;
  return f;
}

FeatureSequence random_seq(int q, int t, std::uint64_t s) {
  Rng rng(s);
  FeatureSequence f(q, t);
  for (auto& v : f.values) v = rng.normal();
  return f;
}

}  // namespace

TEST_CASE("lsgan_d_loss: optimum, worst case, midpoint") {
  CHECK(lsgan_d_loss(scores({1, 1, 1}), scores({0, 0})) == doctest::Approx(0.0));
  CHECK(lsgan_d_loss(scores({0, 0}), scores({1, 1, 1})) == doctest::Approx(2.0));
  CHECK(lsgan_d_loss(scores({0.5}), scores({0.5})) == doctest::Approx(0.5));
  Grid empty;
  CHECK_THROWS_AS(lsgan_d_loss(empty, scores({1})), ValidationError);
}

TEST_CASE("lsgan_g_loss: hand values") {
  CHECK(lsgan_g_loss(scores({1, 1})) == doctest::Approx(0.0));
  CHECK(lsgan_g_loss(scores({0})) == doctest::Approx(1.0));
  CHECK(lsgan_g_loss(scores({0, 1})) == doctest::Approx(0.5));
}

TEST_CASE("cycle_loss: identity, hand value, homogeneity") {
  const FeatureSequence x = random_seq(3, 5, 1);
  const FeatureSequence y = random_seq(3, 7, 2);
  CHECK(cycle_loss(x, x, y, y) == doctest::Approx(0.0));

  CHECK(cycle_loss(seq(1, 1, {1}), seq(1, 1, {3}), seq(1, 1, {0}), seq(1, 1, {0})) ==
        doctest::Approx(2.0));

  FeatureSequence xc = x, yc = y;
  for (std::size_t i = 0; i < xc.values.size(); ++i) xc.values[i] += 0.3;
  for (std::size_t i = 0; i < yc.values.size(); ++i) yc.values[i] -= 0.1;
  const double base = cycle_loss(x, xc, y, yc);
  FeatureSequence xc2 = x, yc2 = y;
  for (std::size_t i = 0; i < xc2.values.size(); ++i) xc2.values[i] += 3 * 0.3;
  for (std::size_t i = 0; i < yc2.values.size(); ++i) yc2.values[i] -= 3 * 0.1;
  CHECK(cycle_loss(x, xc2, y, yc2) == doctest::Approx(3.0 * base));

  CHECK_THROWS_AS(cycle_loss(x, random_seq(3, 6, 3), y, y), ValidationError);
}

TEST_CASE("identity_loss: hand values and symmetry") {
  const FeatureSequence x = random_seq(2, 4, 4);
  const FeatureSequence y = random_seq(2, 6, 5);
  CHECK(identity_loss(y, y, x, x) == doctest::Approx(0.0));

  FeatureSequence y_shift = y;
  for (auto& v : y_shift.values) v += 0.5;
  CHECK(identity_loss(y, y_shift, x, x) == doctest::Approx(0.5));

  FeatureSequence x_shift = x;
  for (auto& v : x_shift.values) v += 0.2;
  CHECK(identity_loss(y, y_shift, x, x_shift) ==
        doctest::Approx(identity_loss(x, x_shift, y, y_shift)));
}

TEST_CASE("second_adversarial_loss: configuration and degenerate cases") {
  const FeatureSequence x = random_seq(10, 32, 6);
  CHECK_THROWS_AS(second_adversarial_loss(x, x, nullptr), ValidationError);

  DiscriminatorSpec ds{DiscriminatorKind::kPatch, 10, 2, 32};
  Discriminator d2(ds, 9);
  SUBCASE("x_cyc == x collapses to same-sample real/fake") {
    const auto [g_term, d_term] = second_adversarial_loss(x, x, &d2);
    const Grid s = discriminator_forward(d2, x);
    CHECK(g_term == doctest::Approx(lsgan_g_loss(s)));
    CHECK(d_term == doctest::Approx(lsgan_d_loss(s, s)));
  }
  SUBCASE("constant-one discriminator gives d_term = 1") {
    for (std::size_t i = 0; i < d2.params().size(); ++i)
      for (auto& v : d2.params().grid(i).v) v = 0.0;
    Grid* out_bias = d2.params().find("out.bias");
    REQUIRE(out_bias != nullptr);
    out_bias->v[0] = 1.0;
    const FeatureSequence xc = random_seq(10, 32, 7);
    const auto [g_term, d_term] = second_adversarial_loss(x, xc, &d2);
    CHECK(d_term == doctest::Approx(1.0));
    CHECK(g_term == doctest::Approx(0.0));
  }
}

TEST_CASE("total_objective: weighting and adv_steps bookkeeping") {
  LossReport parts;
  LossWeights w{10.0, 5.0, 1};
  SUBCASE("all zero") {
    const auto [g, d] = total_objective(parts, w);
    CHECK(g == 0.0);
    CHECK(d == 0.0);
  }
  SUBCASE("lambda_cyc = 10 scales a unit cycle loss to 10") {
    parts.cyc = 1.0;
    const auto [g, d] = total_objective(parts, w);
    CHECK(g == doctest::Approx(10.0));
    CHECK(d == 0.0);
  }
  SUBCASE("lambda_id = 5 scales a unit identity loss to 5") {
    parts.id = 1.0;
    const auto [g, d] = total_objective(parts, w);
    CHECK(g == doctest::Approx(5.0));
  }
  SUBCASE("one-step config rejects stray adv2 terms") {
    parts.adv2_g = 0.1;
    CHECK_THROWS_AS(total_objective(parts, w), ValidationError);
  }
  SUBCASE("two-step adds exactly the second-step terms") {
    parts.adv_g = 0.5;
    parts.adv_d = 0.25;
    parts.cyc = 2.0;
    LossWeights w1{10.0, 5.0, 1};
    const auto [g1, d1] = total_objective(parts, w1);
    parts.adv2_g = 0.75;
    parts.adv2_d = 0.125;
    LossWeights w2{10.0, 5.0, 2};
    const auto [g2, d2] = total_objective(parts, w2);
    CHECK(g2 - g1 == doctest::Approx(0.75));
    CHECK(d2 - d1 == doctest::Approx(0.125));
  }
}

TEST_CASE("loss_csv_line: one comma-separated row, nine fields") {
  LossReport r;
  r.adv_g = 1.5;
  r.total_d = -0.25;
  const std::string line = loss_csv_line(42, r);
  CHECK(line.rfind("42,", 0) == 0);
  int commas = 0;
  for (char c : line) commas += c == ',';
  CHECK(commas == 8);
}

TEST_CASE("total_g gradient matches finite differences on a tiny model") {
  // Q=4, T=16, both cycle directions plus identity and two-step terms
  const int q = 4, t = 16;
  GeneratorSpec gs{GeneratorKind::k212d, q, 2, 1};
  DiscriminatorSpec ds{DiscriminatorKind::kPatch, q, 2, t};
  ModelSet m(gs, ds, true, 33);
  const FeatureSequence xs = random_seq(q, t, 44);
  const FeatureSequence ys = random_seq(q, t, 45);
  const LossWeights w{10.0, 5.0, 2};

  auto total_g_value = [&](bool with_grad) {
    Graph g;
    Grid* x = g.leaf(to_grid(xs));
    Grid* y = g.leaf(to_grid(ys));
    Grid* fake_y = m.g_xy->forward(g, x);
    Grid* fake_x = m.g_yx->forward(g, y);
    Grid* cyc_x = m.g_yx->forward(g, fake_y);
    Grid* cyc_y = m.g_xy->forward(g, fake_x);
    Grid* id_y = m.g_xy->forward(g, y);
    Grid* id_x = m.g_yx->forward(g, x);
    Grid* total = g.weighted_sum({
        {g.mean_sq_to(m.d_y->forward(g, fake_y), 1.0), 1.0},
        {g.mean_sq_to(m.d_x->forward(g, fake_x), 1.0), 1.0},
        {g.mean_sq_to(m.d2_x->forward(g, cyc_x), 1.0), 1.0},
        {g.mean_sq_to(m.d2_y->forward(g, cyc_y), 1.0), 1.0},
        {g.l1_mean(cyc_x, x), w.lambda_cyc},
        {g.l1_mean(cyc_y, y), w.lambda_cyc},
        {g.l1_mean(id_y, y), w.lambda_id},
        {g.l1_mean(id_x, x), w.lambda_id},
    });
    const double value = total->scalar();
    if (with_grad) g.backward(total);
    return value;
  };

  for (Grid* p : m.generator_params()) p->zero_grad();
  total_g_value(true);

  // sample parameter coordinates across both generators
  Rng rng(46);
  auto gen_params = m.generator_params();
  int checked = 0;
  double max_rel = 0.0;
  const double h = 1e-5;
  while (checked < 24) {
    Grid* p = gen_params[rng.uniform_int(0, static_cast<std::int64_t>(gen_params.size()) - 1)];
    const std::int64_t i = rng.uniform_int(0, p->shape.numel() - 1);
    const double analytic = p->g[i];
    const double saved = p->v[i];
    p->v[i] = saved + h;
    const double lp = total_g_value(false);
    p->v[i] = saved - h;
    const double lm = total_g_value(false);
    p->v[i] = saved;
    const double fd = (lp - lm) / (2 * h);
    if (std::abs(analytic) < 1e-7 && std::abs(fd) < 1e-7) continue;  // dead bias crumbs
    const double rel = std::abs(analytic - fd) /
                       std::max({std::abs(analytic), std::abs(fd), 1e-8});
    max_rel = std::max(max_rel, rel);
    ++checked;
  }
  CHECK(max_rel < 1e-3);
}
