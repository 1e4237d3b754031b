#pragma once

#include <functional>
#include <string>
#include <vector>

#include "cyclevc/grid.hpp"
#include "cyclevc/rng.hpp"

namespace cyclevc {

// A differentiable op under test: forward maps one grid to another with any
// fixed closure parameters; backward accumulates d(sum(y.g * y))/dx into
// x_grad.g given the output node y whose .g holds incoming gradients.
struct DiffOp {
  std::string name;
  std::function<Grid(const Grid&)> forward;
  std::function<void(const Grid& x, const Grid& y, Grid& x_grad)> backward;
};

// Max over sampled input coordinates of
//   |analytic - central_difference| / max(|analytic|, |fd|, 1e-8)
// for a random linear functional of the op output. Samples every coordinate
// when the input is small enough, otherwise `samples` random ones. The
// functional is accumulated in long double so the difference quotient is
// evaluated in the widest precision available.
double grad_check(const DiffOp& op, const Grid& input, double h, int samples,
                  Rng& rng);

struct GradCheckRow {
  std::string name;
  double max_rel_err = 0.0;
};

// Fixed-seed verification table over every differentiable kernel. Each row
// covers the op's input gradient and, where the op has parameters (conv,
// instance_norm, linear), the parameter gradients as well.
std::vector<GradCheckRow> grad_check_all(std::uint64_t seed);

}  // namespace cyclevc
