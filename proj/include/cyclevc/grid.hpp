#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace cyclevc {

// Thrown when user-supplied input (shapes, files, configs) is invalid.
// The CLI maps this to exit code 1.
class ValidationError : public std::runtime_error {
 public:
  explicit ValidationError(const std::string& msg) : std::runtime_error(msg) {}
};

// Thrown when a computation goes wrong mid-run (non-finite loss, ...).
// The CLI maps this to exit code 2.
class ComputeError : public std::runtime_error {
 public:
  explicit ComputeError(const std::string& msg) : std::runtime_error(msg) {}
};

struct Shape {
  int n = 1;  // batch
  int c = 1;  // channels
  int h = 1;  // height
  int w = 1;  // width

  std::int64_t numel() const {
    return static_cast<std::int64_t>(n) * c * h * w;
  }
  bool operator==(const Shape&) const = default;
  std::string str() const {
    return "(" + std::to_string(n) + "," + std::to_string(c) + "," +
           std::to_string(h) + "," + std::to_string(w) + ")";
  }
};

// N x C x H x W array of doubles plus an optional gradient buffer of the
// same extent. Layout is row-major NCHW; w is the fastest axis.
struct Grid {
  Shape shape;
  std::vector<double> v;
  std::vector<double> g;  // empty unless the grid participates in differentiation

  Grid() = default;
  explicit Grid(Shape s, bool with_grad = false) : shape(s) {
    if (s.n < 1 || s.c < 1 || s.h < 1 || s.w < 1)
      throw ValidationError("grid: non-positive dimension in shape " + s.str());
    v.assign(static_cast<std::size_t>(s.numel()), 0.0);
    if (with_grad) g.assign(v.size(), 0.0);
  }

  std::int64_t idx(int n, int c, int h, int w) const {
    return ((static_cast<std::int64_t>(n) * shape.c + c) * shape.h + h) * shape.w + w;
  }
  double& at(int n, int c, int h, int w) { return v[idx(n, c, h, w)]; }
  double at(int n, int c, int h, int w) const { return v[idx(n, c, h, w)]; }

  bool has_grad() const { return !g.empty(); }
  void ensure_grad() {
    if (g.empty()) g.assign(v.size(), 0.0);
  }
  void zero_grad() {
    if (!g.empty()) g.assign(g.size(), 0.0);
  }
  double scalar() const {
    if (shape.numel() != 1)
      throw ComputeError("grid: scalar() on non-scalar shape " + shape.str());
    return v[0];
  }
};

bool all_finite(const std::vector<double>& x);
bool all_finite(const Grid& x);

}  // namespace cyclevc
