#pragma once

#include <deque>
#include <functional>
#include <utility>
#include <vector>

#include "cyclevc/grid.hpp"
#include "cyclevc/ops.hpp"

namespace cyclevc {

// Reverse-mode tape over Grid nodes. Activation nodes live in an arena owned
// by the graph; parameter grids live outside (ParamStore) and are referenced
// directly so their gradients accumulate across the ops that use them.
//
// A node carries a gradient buffer iff any of its inputs does, so subgraphs
// built from untracked leaves evaluate forward-only at no extra cost.
// One graph records one phase of one iteration; backward() walks the tape
// once in reverse.
class Graph {
 public:
  Grid* leaf(Grid values, bool track = false);
  Grid* param(Grid& p);  // external; must already carry a grad buffer

  Grid* conv2d(Grid* x, Grid* kernel, Grid* bias, const ops::ConvSpec& spec);
  Grid* conv1d(Grid* x, Grid* kernel, Grid* bias, const ops::ConvSpec& spec);
  Grid* glu(Grid* x);
  Grid* instance_norm(Grid* x, Grid* gamma, Grid* beta, double eps);
  Grid* pixel_shuffle(Grid* x, int rh, int rw);
  Grid* linear(Grid* x, Grid* weight, Grid* bias);
  Grid* reshape(Grid* x, Shape target);
  Grid* pad_rows(Grid* x, int extra);
  Grid* slice_rows(Grid* x, int keep);
  Grid* add(Grid* a, Grid* b);

  Grid* mean_sq_to(Grid* x, double target);
  Grid* l1_mean(Grid* a, Grid* b);
  // weighted sum of scalar nodes
  Grid* weighted_sum(const std::vector<std::pair<Grid*, double>>& terms);

  // value copy that does not propagate gradients
  Grid* detach(Grid* x);

  // seeds d(loss)/d(loss) = 1 and runs the tape in reverse
  void backward(Grid* loss);
  // runs the tape in reverse with whatever gradients are already seeded on
  // the given node (which must carry a grad buffer)
  void backward_seeded(Grid* node);

  std::size_t size() const { return arena_.size(); }

 private:
  Grid* alloc();
  static bool tracked(const Grid* a, const Grid* b = nullptr, const Grid* c = nullptr);

  std::deque<Grid> arena_;
  std::vector<std::function<void()>> tape_;
};

}  // namespace cyclevc
