#include "cyclevc/graph.hpp"

#include <algorithm>

namespace cyclevc {

Grid* Graph::alloc() {
  arena_.emplace_back();
  return &arena_.back();
}

bool Graph::tracked(const Grid* a, const Grid* b, const Grid* c) {
  return (a && a->has_grad()) || (b && b->has_grad()) || (c && c->has_grad());
}

Grid* Graph::leaf(Grid values, bool track) {
  Grid* node = alloc();
  *node = std::move(values);
  if (track)
    node->ensure_grad();
  else
    node->g.clear();
  return node;
}

Grid* Graph::param(Grid& p) {
  if (!p.has_grad()) throw ComputeError("graph: parameter grid lacks a grad buffer");
  return &p;
}

Grid* Graph::conv2d(Grid* x, Grid* kernel, Grid* bias, const ops::ConvSpec& spec) {
  Grid* y = alloc();
  ops::conv2d_forward(*x, *kernel, *bias, spec, *y);
  if (tracked(x, kernel, bias)) {
    y->ensure_grad();
    tape_.push_back([x, kernel, bias, spec, y] {
      ops::conv2d_backward(*x, *kernel, spec, *y,
                           x->has_grad() ? x : nullptr,
                           kernel->has_grad() ? kernel : nullptr,
                           bias->has_grad() ? bias : nullptr);
    });
  }
  return y;
}

Grid* Graph::conv1d(Grid* x, Grid* kernel, Grid* bias, const ops::ConvSpec& spec) {
  ops::conv1d_output_shape(x->shape, spec);
  return conv2d(x, kernel, bias, spec);
}

Grid* Graph::glu(Grid* x) {
  Grid* y = alloc();
  ops::glu_forward(*x, *y);
  if (tracked(x)) {
    y->ensure_grad();
    tape_.push_back([x, y] {
      ops::glu_backward(*x, *y, *x);
    });
  }
  return y;
}

Grid* Graph::instance_norm(Grid* x, Grid* gamma, Grid* beta, double eps) {
  Grid* y = alloc();
  ops::instance_norm_forward(*x, *gamma, *beta, eps, *y);
  if (tracked(x, gamma, beta)) {
    y->ensure_grad();
    tape_.push_back([x, gamma, beta, eps, y] {
      ops::instance_norm_backward(*x, *gamma, eps, *y,
                                  x->has_grad() ? x : nullptr,
                                  gamma->has_grad() ? gamma : nullptr,
                                  beta->has_grad() ? beta : nullptr);
    });
  }
  return y;
}

Grid* Graph::pixel_shuffle(Grid* x, int rh, int rw) {
  Grid* y = alloc();
  ops::pixel_shuffle_forward(*x, rh, rw, *y);
  if (tracked(x)) {
    y->ensure_grad();
    tape_.push_back([x, rh, rw, y] {
      ops::pixel_shuffle_backward(*y, rh, rw, *x);
    });
  }
  return y;
}

Grid* Graph::linear(Grid* x, Grid* weight, Grid* bias) {
  Grid* y = alloc();
  ops::linear_forward(*x, *weight, *bias, *y);
  if (tracked(x, weight, bias)) {
    y->ensure_grad();
    tape_.push_back([x, weight, bias, y] {
      ops::linear_backward(*x, *weight, *y,
                           x->has_grad() ? x : nullptr,
                           weight->has_grad() ? weight : nullptr,
                           bias->has_grad() ? bias : nullptr);
    });
  }
  return y;
}

Grid* Graph::reshape(Grid* x, Shape target) {
  if (target.numel() != x->shape.numel())
    throw ValidationError("reshape: element count mismatch " + x->shape.str() +
                          " -> " + target.str());
  Grid* y = alloc();
  y->shape = target;
  y->v = x->v;  // NCHW layout makes (c,h) <-> c*h reshapes flat copies
  if (tracked(x)) {
    y->ensure_grad();
    tape_.push_back([x, y] {
      for (std::size_t i = 0; i < x->g.size(); ++i) x->g[i] += y->g[i];
    });
  }
  return y;
}

Grid* Graph::pad_rows(Grid* x, int extra) {
  if (extra == 0) return x;
  Grid* y = alloc();
  ops::pad_rows_forward(*x, extra, *y);
  if (tracked(x)) {
    y->ensure_grad();
    tape_.push_back([x, y] {
      for (int n = 0; n < x->shape.n; ++n)
        for (int c = 0; c < x->shape.c; ++c)
          for (int h = 0; h < x->shape.h; ++h) {
            const double* src = y->g.data() + y->idx(n, c, h, 0);
            double* dst = x->g.data() + x->idx(n, c, h, 0);
            for (int w = 0; w < x->shape.w; ++w) dst[w] += src[w];
          }
    });
  }
  return y;
}

Grid* Graph::slice_rows(Grid* x, int keep) {
  if (keep == x->shape.h) return x;
  Grid* y = alloc();
  ops::slice_rows_forward(*x, keep, *y);
  if (tracked(x)) {
    y->ensure_grad();
    tape_.push_back([x, y, keep] {
      for (int n = 0; n < x->shape.n; ++n)
        for (int c = 0; c < x->shape.c; ++c)
          for (int h = 0; h < keep; ++h) {
            const double* src = y->g.data() + y->idx(n, c, h, 0);
            double* dst = x->g.data() + x->idx(n, c, h, 0);
            for (int w = 0; w < x->shape.w; ++w) dst[w] += src[w];
          }
    });
  }
  return y;
}

Grid* Graph::add(Grid* a, Grid* b) {
  Grid* y = alloc();
  ops::add_forward(*a, *b, *y);
  if (tracked(a, b)) {
    y->ensure_grad();
    tape_.push_back([a, b, y] {
      if (a->has_grad())
        for (std::size_t i = 0; i < a->g.size(); ++i) a->g[i] += y->g[i];
      if (b->has_grad())
        for (std::size_t i = 0; i < b->g.size(); ++i) b->g[i] += y->g[i];
    });
  }
  return y;
}

Grid* Graph::mean_sq_to(Grid* x, double target) {
  Grid* y = alloc();
  ops::mean_sq_to_const_forward(*x, target, *y);
  if (tracked(x)) {
    y->ensure_grad();
    tape_.push_back([x, target, y] {
      ops::mean_sq_to_const_backward(*x, target, *y, *x);
    });
  }
  return y;
}

Grid* Graph::l1_mean(Grid* a, Grid* b) {
  Grid* y = alloc();
  ops::l1_mean_forward(*a, *b, *y);
  if (tracked(a, b)) {
    y->ensure_grad();
    tape_.push_back([a, b, y] {
      ops::l1_mean_backward(*a, *b, *y,
                            a->has_grad() ? a : nullptr,
                            b->has_grad() ? b : nullptr);
    });
  }
  return y;
}

Grid* Graph::weighted_sum(const std::vector<std::pair<Grid*, double>>& terms) {
  Grid* y = alloc();
  *y = Grid({1, 1, 1, 1});
  bool track = false;
  double s = 0.0;
  for (const auto& [node, weight] : terms) {
    s += weight * node->scalar();
    track = track || node->has_grad();
  }
  y->v[0] = s;
  if (track) {
    y->ensure_grad();
    auto copy = terms;
    tape_.push_back([copy, y] {
      for (const auto& [node, weight] : copy)
        if (node->has_grad()) node->g[0] += weight * y->g[0];
    });
  }
  return y;
}

Grid* Graph::detach(Grid* x) {
  Grid* y = alloc();
  y->shape = x->shape;
  y->v = x->v;
  return y;
}

void Graph::backward(Grid* loss) {
  if (loss->shape.numel() != 1)
    throw ComputeError("graph: backward target must be scalar, got " +
                       loss->shape.str());
  if (!loss->has_grad())
    throw ComputeError("graph: backward target does not depend on tracked grids");
  loss->g[0] = 1.0;
  backward_seeded(loss);
}

void Graph::backward_seeded(Grid* node) {
  if (!node->has_grad())
    throw ComputeError("graph: backward seed node carries no gradient buffer");
  for (auto it = tape_.rbegin(); it != tape_.rend(); ++it) (*it)();
}

}  // namespace cyclevc
