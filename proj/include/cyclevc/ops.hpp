#pragma once

#include "cyclevc/grid.hpp"

namespace cyclevc::ops {

// Convolution hyperparameters. Kernels are stored as (out_channels,
// in_channels, kh, kw) grids, biases as (1, out_channels, 1, 1).
struct ConvSpec {
  int in_channels = 1;
  int out_channels = 1;
  int kh = 1, kw = 1;
  int sh = 1, sw = 1;
  int ph = 0, pw = 0;
};

// Output spatial size = floor((in + 2p - k)/s) + 1 per dimension.
// Throws ValidationError naming the offending dimension.
Shape conv2d_output_shape(const Shape& x, const ConvSpec& p);

void conv2d_forward(const Grid& x, const Grid& kernel, const Grid& bias,
                    const ConvSpec& p, Grid& y);
// Backward kernels read the incoming gradient from y.g and accumulate into
// whichever of x_grad / kernel_grad / bias_grad is non-null. Reduction order
// per accumulated element is fixed, independent of threading.
void conv2d_backward(const Grid& x, const Grid& kernel, const ConvSpec& p,
                     const Grid& y, Grid* x_grad, Grid* kernel_grad,
                     Grid* bias_grad);

// 1D convolution = conv2d on a height-1 grid whose channel axis carries the
// feature dimension. Enforces h == 1 and kh == 1.
Shape conv1d_output_shape(const Shape& x, const ConvSpec& p);
void conv1d_forward(const Grid& x, const Grid& kernel, const Grid& bias,
                    const ConvSpec& p, Grid& y);
void conv1d_backward(const Grid& x, const Grid& kernel, const ConvSpec& p,
                     const Grid& y, Grid* x_grad, Grid* kernel_grad,
                     Grid* bias_grad);

// Gated linear unit: channels split into halves A (first) and B (second),
// output = A * sigmoid(B). Rejects odd channel counts.
void glu_forward(const Grid& x, Grid& y);
void glu_backward(const Grid& x, const Grid& y, Grid& x_grad);

// Per-(batch, channel) normalization over spatial positions:
// y = gamma * (x - mean) / sqrt(var + eps) + beta.
// gamma/beta are (1, C, 1, 1) grids; population variance.
void instance_norm_forward(const Grid& x, const Grid& gamma, const Grid& beta,
                           double eps, Grid& y);
void instance_norm_backward(const Grid& x, const Grid& gamma, double eps,
                            const Grid& y, Grid* x_grad, Grid* gamma_grad,
                            Grid* beta_grad);

// Channel-to-space permutation: (C*rh*rw, H, W) -> (C, H*rh, W*rw) with
// out[c, h*rh+i, w*rw+j] = in[c*rh*rw + i*rw + j, h, w]. The square 2D
// shuffler is (r, r); the width-only 1D shuffler is (1, r).
void pixel_shuffle_forward(const Grid& x, int rh, int rw, Grid& y);
void pixel_shuffle_backward(const Grid& y, int rh, int rw, Grid& x_grad);

// Fully connected layer over the flattened (c, h, w) extent.
// weight is (out, c*h*w, 1, 1); bias (1, out, 1, 1); output (n, out, 1, 1).
void linear_forward(const Grid& x, const Grid& weight, const Grid& bias, Grid& y);
void linear_backward(const Grid& x, const Grid& weight, const Grid& y,
                     Grid* x_grad, Grid* weight_grad, Grid* bias_grad);

// mean((x - target)^2) as a 1x1x1x1 grid.
void mean_sq_to_const_forward(const Grid& x, double target, Grid& y);
void mean_sq_to_const_backward(const Grid& x, double target, const Grid& y,
                               Grid& x_grad);

// mean(|a - b|) as a 1x1x1x1 grid. sign(0) treated as 0.
void l1_mean_forward(const Grid& a, const Grid& b, Grid& y);
void l1_mean_backward(const Grid& a, const Grid& b, const Grid& y,
                      Grid* a_grad, Grid* b_grad);

void add_forward(const Grid& a, const Grid& b, Grid& y);

// Zero rows appended below row h-1: (C, H, W) -> (C, H + extra, W).
void pad_rows_forward(const Grid& x, int extra, Grid& y);
void slice_rows_forward(const Grid& x, int keep, Grid& y);

// Bias-corrected Adam. state_m/state_v must be shaped like params; t >= 1 is
// the step number after which this update applies. Rejects non-finite grads,
// reporting the offending coordinate.
void adam_step(std::vector<double>& params, const std::vector<double>& grads,
               std::vector<double>& state_m, std::vector<double>& state_v,
               double lr, double beta1, double beta2, double eps, std::int64_t t);

}  // namespace cyclevc::ops
