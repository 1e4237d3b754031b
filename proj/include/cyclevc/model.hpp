#pragma once

#include <deque>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "cyclevc/features.hpp"
#include "cyclevc/graph.hpp"
#include "cyclevc/grid.hpp"
#include "cyclevc/rng.hpp"

namespace cyclevc {

enum class GeneratorKind { k1d, k2d, k212d };
enum class DiscriminatorKind { kFull, kPatch };

GeneratorKind parse_generator_kind(const std::string& s);  // "1d" | "2d" | "2-1-2d"
DiscriminatorKind parse_discriminator_kind(const std::string& s);  // "full" | "patch"
std::string to_string(GeneratorKind k);
std::string to_string(DiscriminatorKind k);

// base_channels scales every layer width; 64 reproduces the full-size
// network, smaller values give the reduced desk-scale variants.
struct GeneratorSpec {
  GeneratorKind kind = GeneratorKind::k212d;
  int q = 35;
  int base_channels = 64;
  int n_res = 6;
  bool operator==(const GeneratorSpec&) const = default;
};

struct DiscriminatorSpec {
  DiscriminatorKind kind = DiscriminatorKind::kPatch;
  int q = 35;
  int base_channels = 64;
  int t_ref = 128;  // input width the full kind's final layer is sized for
  bool operator==(const DiscriminatorSpec&) const = default;
};

// Named parameter grids in a fixed construction order; the order defines the
// checkpoint layout and the optimizer state alignment.
class ParamStore {
 public:
  Grid& add(const std::string& name, Shape shape);
  std::size_t size() const { return grids_.size(); }
  Grid& grid(std::size_t i) { return grids_[i]; }
  const Grid& grid(std::size_t i) const { return grids_[i]; }
  const std::string& name(std::size_t i) const { return names_[i]; }
  Grid* find(const std::string& name);
  void zero_grads();
  std::int64_t total_parameters() const;
  std::vector<Grid*> all();

 private:
  std::deque<Grid> grids_;
  std::vector<std::string> names_;
};

namespace detail {

// conv [-> pixel shuffle] [-> instance norm] [-> GLU]
struct ConvBlock {
  ops::ConvSpec spec;
  Grid* kernel = nullptr;
  Grid* bias = nullptr;
  Grid* gamma = nullptr;
  Grid* beta = nullptr;
  int ps_rh = 1, ps_rw = 1;
  bool glu = false;
  Grid* apply(Graph& g, Grid* x) const;
};

}  // namespace detail

class Generator {
 public:
  Generator(const GeneratorSpec& spec, std::uint64_t seed);

  // x is a (1, 1, Q, T) grid with T divisible by 4 and T >= 16; the result
  // has the same shape.
  Grid* forward(Graph& g, Grid* x) const;

  const GeneratorSpec& spec() const { return spec_; }
  ParamStore& params() { return params_; }
  const ParamStore& params() const { return params_; }

 private:
  GeneratorSpec spec_;
  ParamStore params_;
  int hq_ = 0;  // frequency rows after padding to a multiple of 4 (2D kinds)

  detail::ConvBlock entry_, down1_, down2_;
  detail::ConvBlock to_core_, from_core_;  // 1x1 channel adapters (2-1-2d)
  std::vector<std::pair<detail::ConvBlock, detail::ConvBlock>> res_;
  detail::ConvBlock up1_, up2_, out_;
};

class Discriminator {
 public:
  Discriminator(const DiscriminatorSpec& spec, std::uint64_t seed);

  // x is a (1, 1, Q, T) grid; returns the raw (unsquashed) score grid:
  // a single scalar for the full kind, a patch grid otherwise.
  Grid* forward(Graph& g, Grid* x) const;

  const DiscriminatorSpec& spec() const { return spec_; }
  ParamStore& params() { return params_; }
  const ParamStore& params() const { return params_; }

 private:
  DiscriminatorSpec spec_;
  ParamStore params_;
  std::vector<detail::ConvBlock> trunk_;
  detail::ConvBlock patch_out_;
  Grid* fc_weight_ = nullptr;
  Grid* fc_bias_ = nullptr;
};

// Parameters of the two generators and the two or four discriminators.
// d2_x/d2_y exist iff two_step is set.
struct ModelSet {
  std::unique_ptr<Generator> g_xy, g_yx;
  std::unique_ptr<Discriminator> d_x, d_y;
  std::unique_ptr<Discriminator> d2_x, d2_y;

  ModelSet(const GeneratorSpec& gs, const DiscriminatorSpec& ds, bool two_step,
           std::uint64_t seed);

  bool two_step() const { return d2_x != nullptr; }
  std::vector<Grid*> generator_params() const;
  std::vector<Grid*> discriminator_params() const;
  // (prefixed name, grid) pairs across every network, in checkpoint order
  std::vector<std::pair<std::string, Grid*>> named_params() const;
};

// Whole-sequence conversion with the shape contract of the paper's pipeline:
// rejects T not divisible by 4 (the message names the next valid length).
FeatureSequence generator_forward(const Generator& g, const FeatureSequence& x);

// Score grid for one sequence; full kind requires t == spec().t_ref.
Grid discriminator_forward(const Discriminator& d, const FeatureSequence& x);

}  // namespace cyclevc
