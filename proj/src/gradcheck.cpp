#include "cyclevc/gradcheck.hpp"

#include <algorithm>
#include <cmath>

#include "cyclevc/ops.hpp"

namespace cyclevc {

namespace {

long double weighted_value(const Grid& y, const std::vector<double>& w) {
  long double s = 0.0L;
  for (std::size_t i = 0; i < y.v.size(); ++i)
    s += static_cast<long double>(w[i]) * y.v[i];
  return s;
}

Grid random_grid(Shape s, Rng& rng, double scale = 1.0) {
  Grid g(s);
  for (auto& v : g.v) v = scale * rng.normal();
  return g;
}

}  // namespace

double grad_check(const DiffOp& op, const Grid& input, double h, int samples,
                  Rng& rng) {
  Grid x = input;
  Grid y0 = op.forward(x);
  std::vector<double> w(y0.v.size());
  for (auto& v : w) v = rng.uniform(-1.0, 1.0);

  Grid y_node = y0;
  y_node.g = w;
  Grid x_grad = x;
  x_grad.ensure_grad();
  op.backward(x, y_node, x_grad);

  const std::int64_t n = x.shape.numel();
  std::vector<std::int64_t> coords;
  if (n <= samples) {
    coords.resize(n);
    for (std::int64_t i = 0; i < n; ++i) coords[i] = i;
  } else {
    coords.resize(samples);
    for (auto& c : coords) c = rng.uniform_int(0, n - 1);
  }

  double max_rel = 0.0;
  for (std::int64_t i : coords) {
    const double saved = x.v[i];
    x.v[i] = saved + h;
    const long double lp = weighted_value(op.forward(x), w);
    x.v[i] = saved - h;
    const long double lm = weighted_value(op.forward(x), w);
    x.v[i] = saved;
    const double fd = static_cast<double>((lp - lm) / (2.0L * h));
    const double an = x_grad.g[i];
    const double rel =
        std::abs(an - fd) / std::max({std::abs(an), std::abs(fd), 1e-8});
    max_rel = std::max(max_rel, rel);
  }
  return max_rel;
}

std::vector<GradCheckRow> grad_check_all(std::uint64_t seed) {
  Rng rng(seed);
  const double h = 1e-4;
  const int samples = 128;
  std::vector<GradCheckRow> rows;

  auto run = [&](const std::string& name, const DiffOp& op, const Grid& input,
                 double* slot = nullptr) {
    const double err = grad_check(op, input, h, samples, rng);
    if (slot != nullptr) {
      *slot = std::max(*slot, err);
    } else {
      rows.push_back({name, err});
    }
  };

  // conv2d: input, kernel and bias gradients folded into one row
  {
    ops::ConvSpec spec{3, 4, 3, 3, 1, 1, 1, 1};
    Grid x = random_grid({2, 3, 5, 6}, rng);
    Grid k = random_grid({4, 3, 3, 3}, rng, 0.5);
    Grid b = random_grid({1, 4, 1, 1}, rng, 0.1);
    double worst = 0.0;
    run("", {"conv2d_x",
             [&](const Grid& xx) { Grid y; ops::conv2d_forward(xx, k, b, spec, y); return y; },
             [&](const Grid& xx, const Grid& y, Grid& gx) {
               ops::conv2d_backward(xx, k, spec, y, &gx, nullptr, nullptr);
             }},
        x, &worst);
    run("", {"conv2d_k",
             [&](const Grid& kk) { Grid y; ops::conv2d_forward(x, kk, b, spec, y); return y; },
             [&](const Grid& kk, const Grid& y, Grid& gk) {
               ops::conv2d_backward(x, kk, spec, y, nullptr, &gk, nullptr);
             }},
        k, &worst);
    run("", {"conv2d_b",
             [&](const Grid& bb) { Grid y; ops::conv2d_forward(x, k, bb, spec, y); return y; },
             [&](const Grid& bb, const Grid& y, Grid& gb) {
               ops::conv2d_backward(x, k, spec, y, nullptr, nullptr, &gb);
             }},
        b, &worst);
    // strided variant exercises the gather paths
    ops::ConvSpec strided{3, 4, 3, 3, 2, 2, 1, 1};
    run("", {"conv2d_x_s2",
             [&](const Grid& xx) { Grid y; ops::conv2d_forward(xx, k, b, strided, y); return y; },
             [&](const Grid& xx, const Grid& y, Grid& gx) {
               ops::conv2d_backward(xx, k, strided, y, &gx, nullptr, nullptr);
             }},
        x, &worst);
    // large-kernel variant exercises the direct (non-GEMM) dispatch
    ops::ConvSpec wide{2, 3, 5, 15, 1, 1, 2, 7};
    Grid xw = random_grid({1, 2, 8, 20}, rng);
    Grid kw = random_grid({3, 2, 5, 15}, rng, 0.2);
    Grid bw = random_grid({1, 3, 1, 1}, rng, 0.1);
    run("", {"conv2d_x_wide",
             [&](const Grid& xx) { Grid y; ops::conv2d_forward(xx, kw, bw, wide, y); return y; },
             [&](const Grid& xx, const Grid& y, Grid& gx) {
               ops::conv2d_backward(xx, kw, wide, y, &gx, nullptr, nullptr);
             }},
        xw, &worst);
    run("", {"conv2d_k_wide",
             [&](const Grid& kk) { Grid y; ops::conv2d_forward(xw, kk, bw, wide, y); return y; },
             [&](const Grid& kk, const Grid& y, Grid& gk) {
               ops::conv2d_backward(xw, kk, wide, y, nullptr, &gk, nullptr);
             }},
        kw, &worst);
    rows.push_back({"conv2d", worst});
  }

  // conv1d on a width-12 sequence with 6 feature channels
  {
    ops::ConvSpec spec{6, 8, 1, 5, 1, 1, 0, 2};
    Grid x = random_grid({1, 6, 1, 12}, rng);
    Grid k = random_grid({8, 6, 1, 5}, rng, 0.5);
    Grid b = random_grid({1, 8, 1, 1}, rng, 0.1);
    double worst = 0.0;
    run("", {"conv1d_x",
             [&](const Grid& xx) { Grid y; ops::conv1d_forward(xx, k, b, spec, y); return y; },
             [&](const Grid& xx, const Grid& y, Grid& gx) {
               ops::conv1d_backward(xx, k, spec, y, &gx, nullptr, nullptr);
             }},
        x, &worst);
    run("", {"conv1d_k",
             [&](const Grid& kk) { Grid y; ops::conv1d_forward(x, kk, b, spec, y); return y; },
             [&](const Grid& kk, const Grid& y, Grid& gk) {
               ops::conv1d_backward(x, kk, spec, y, nullptr, &gk, nullptr);
             }},
        k, &worst);
    rows.push_back({"conv1d", worst});
  }

  // glu on a random 4-channel input
  {
    Grid x = random_grid({2, 4, 3, 5}, rng);
    rows.push_back(
        {"glu", grad_check({"glu",
                            [](const Grid& xx) { Grid y; ops::glu_forward(xx, y); return y; },
                            [](const Grid& xx, const Grid& y, Grid& gx) {
                              ops::glu_backward(xx, y, gx);
                            }},
                           x, h, samples, rng)});
  }

  // instance_norm: input, gamma, beta
  {
    const double eps = 1e-5;
    Grid x = random_grid({2, 3, 4, 6}, rng);
    Grid gamma = random_grid({1, 3, 1, 1}, rng, 0.5);
    for (auto& v : gamma.v) v += 1.0;
    Grid beta = random_grid({1, 3, 1, 1}, rng, 0.3);
    double worst = 0.0;
    run("", {"instance_norm_x",
             [&](const Grid& xx) {
               Grid y;
               ops::instance_norm_forward(xx, gamma, beta, eps, y);
               return y;
             },
             [&](const Grid& xx, const Grid& y, Grid& gx) {
               ops::instance_norm_backward(xx, gamma, eps, y, &gx, nullptr, nullptr);
             }},
        x, &worst);
    run("", {"instance_norm_gamma",
             [&](const Grid& gg) {
               Grid y;
               ops::instance_norm_forward(x, gg, beta, eps, y);
               return y;
             },
             [&](const Grid& gg, const Grid& y, Grid& gg_grad) {
               ops::instance_norm_backward(x, gg, eps, y, nullptr, &gg_grad, nullptr);
             }},
        gamma, &worst);
    run("", {"instance_norm_beta",
             [&](const Grid& bb) {
               Grid y;
               ops::instance_norm_forward(x, gamma, bb, eps, y);
               return y;
             },
             [&](const Grid& bb, const Grid& y, Grid& gb) {
               ops::instance_norm_backward(x, gamma, eps, y, nullptr, nullptr, &gb);
             }},
        beta, &worst);
    rows.push_back({"instance_norm", worst});
  }

  // pixel shufflers are permutations; the check still exercises the inverse
  {
    Grid x = random_grid({1, 8, 3, 4}, rng);
    rows.push_back({"pixel_shuffle",
                    grad_check({"pixel_shuffle",
                                [](const Grid& xx) {
                                  Grid y;
                                  ops::pixel_shuffle_forward(xx, 2, 2, y);
                                  return y;
                                },
                                [](const Grid& xx, const Grid& y, Grid& gx) {
                                  ops::pixel_shuffle_backward(y, 2, 2, gx);
                                }},
                               x, h, samples, rng)});
    Grid x1 = random_grid({1, 6, 1, 5}, rng);
    rows.push_back({"pixel_shuffle_1d",
                    grad_check({"pixel_shuffle_1d",
                                [](const Grid& xx) {
                                  Grid y;
                                  ops::pixel_shuffle_forward(xx, 1, 2, y);
                                  return y;
                                },
                                [](const Grid& xx, const Grid& y, Grid& gx) {
                                  ops::pixel_shuffle_backward(y, 1, 2, gx);
                                }},
                               x1, h, samples, rng)});
  }

  // linear: input, weight, bias
  {
    Grid x = random_grid({2, 3, 2, 4}, rng);
    Grid wgt = random_grid({5, 24, 1, 1}, rng, 0.3);
    Grid b = random_grid({1, 5, 1, 1}, rng, 0.1);
    double worst = 0.0;
    run("", {"linear_x",
             [&](const Grid& xx) { Grid y; ops::linear_forward(xx, wgt, b, y); return y; },
             [&](const Grid& xx, const Grid& y, Grid& gx) {
               ops::linear_backward(xx, wgt, y, &gx, nullptr, nullptr);
             }},
        x, &worst);
    run("", {"linear_w",
             [&](const Grid& ww) { Grid y; ops::linear_forward(x, ww, b, y); return y; },
             [&](const Grid& ww, const Grid& y, Grid& gw) {
               ops::linear_backward(x, ww, y, nullptr, &gw, nullptr);
             }},
        wgt, &worst);
    run("", {"linear_b",
             [&](const Grid& bb) { Grid y; ops::linear_forward(x, wgt, bb, y); return y; },
             [&](const Grid& bb, const Grid& y, Grid& gb) {
               ops::linear_backward(x, wgt, y, nullptr, nullptr, &gb);
             }},
        b, &worst);
    rows.push_back({"linear", worst});
  }

  // mean((x - t)^2) reduction
  {
    Grid x = random_grid({1, 2, 3, 4}, rng);
    rows.push_back({"mean_sq_to_const",
                    grad_check({"mean_sq_to_const",
                                [](const Grid& xx) {
                                  Grid y;
                                  ops::mean_sq_to_const_forward(xx, 1.0, y);
                                  return y;
                                },
                                [](const Grid& xx, const Grid& y, Grid& gx) {
                                  ops::mean_sq_to_const_backward(xx, 1.0, y, gx);
                                }},
                               x, h, samples, rng)});
  }

  // mean|a - b| with the pair kept clear of the kink at a == b
  {
    Grid a = random_grid({1, 2, 3, 4}, rng);
    Grid b = a;
    for (auto& v : b.v) v += (rng.uniform() < 0.5 ? -1.0 : 1.0) * rng.uniform(0.1, 1.0);
    double worst = 0.0;
    run("", {"l1_mean_a",
             [&](const Grid& aa) { Grid y; ops::l1_mean_forward(aa, b, y); return y; },
             [&](const Grid& aa, const Grid& y, Grid& ga) {
               ops::l1_mean_backward(aa, b, y, &ga, nullptr);
             }},
        a, &worst);
    run("", {"l1_mean_b",
             [&](const Grid& bb) { Grid y; ops::l1_mean_forward(a, bb, y); return y; },
             [&](const Grid& bb, const Grid& y, Grid& gb) {
               ops::l1_mean_backward(a, bb, y, nullptr, &gb);
             }},
        b, &worst);
    rows.push_back({"l1_mean", worst});
  }

  return rows;
}

}  // namespace cyclevc
