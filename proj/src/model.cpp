#include "cyclevc/model.hpp"

#include <algorithm>
#include <cmath>

namespace cyclevc {

namespace {

constexpr double kInstanceNormEps = 1e-5;

int ceil4(int v) { return (v + 3) / 4 * 4; }

}  // namespace

GeneratorKind parse_generator_kind(const std::string& s) {
  if (s == "1d") return GeneratorKind::k1d;
  if (s == "2d") return GeneratorKind::k2d;
  if (s == "2-1-2d") return GeneratorKind::k212d;
  throw ValidationError("unknown generator kind '" + s + "' (expected 1d, 2d or 2-1-2d)");
}

DiscriminatorKind parse_discriminator_kind(const std::string& s) {
  if (s == "full") return DiscriminatorKind::kFull;
  if (s == "patch") return DiscriminatorKind::kPatch;
  throw ValidationError("unknown discriminator kind '" + s + "' (expected full or patch)");
}

std::string to_string(GeneratorKind k) {
  switch (k) {
    case GeneratorKind::k1d: return "1d";
    case GeneratorKind::k2d: return "2d";
    case GeneratorKind::k212d: return "2-1-2d";
  }
  return "?";
}

std::string to_string(DiscriminatorKind k) {
  return k == DiscriminatorKind::kFull ? "full" : "patch";
}

Grid& ParamStore::add(const std::string& name, Shape shape) {
  names_.push_back(name);
  grids_.emplace_back(shape, /*with_grad=*/true);
  return grids_.back();
}

Grid* ParamStore::find(const std::string& name) {
  for (std::size_t i = 0; i < names_.size(); ++i)
    if (names_[i] == name) return &grids_[i];
  return nullptr;
}

void ParamStore::zero_grads() {
  for (auto& g : grids_) g.zero_grad();
}

std::int64_t ParamStore::total_parameters() const {
  std::int64_t n = 0;
  for (const auto& g : grids_) n += g.shape.numel();
  return n;
}

std::vector<Grid*> ParamStore::all() {
  std::vector<Grid*> out;
  out.reserve(grids_.size());
  for (auto& g : grids_) out.push_back(&g);
  return out;
}

namespace detail {

Grid* ConvBlock::apply(Graph& g, Grid* x) const {
  Grid* y = g.conv2d(x, kernel, bias, spec);
  if (ps_rh != 1 || ps_rw != 1) y = g.pixel_shuffle(y, ps_rh, ps_rw);
  if (gamma != nullptr) y = g.instance_norm(y, gamma, beta, kInstanceNormEps);
  if (glu) y = g.glu(y);
  return y;
}

namespace {

// Creates the parameters for one conv block and initializes them: kernels
// zero-mean normal scaled by 1/sqrt(fan_in), biases zero, norm affine at
// identity.
struct Builder {
  ParamStore& store;
  Rng& rng;

  ConvBlock conv(const std::string& name, int in_c, int out_c, int kh, int kw,
                 int sh, int sw, int ph, int pw, bool norm, bool glu, int ps_rh = 1,
                 int ps_rw = 1) {
    ConvBlock b;
    b.spec = ops::ConvSpec{in_c, out_c, kh, kw, sh, sw, ph, pw};
    b.kernel = &store.add(name + ".kernel", {out_c, in_c, kh, kw});
    const double scale = 1.0 / std::sqrt(static_cast<double>(in_c) * kh * kw);
    for (auto& v : b.kernel->v) v = scale * rng.normal();
    b.bias = &store.add(name + ".bias", {1, out_c, 1, 1});
    b.ps_rh = ps_rh;
    b.ps_rw = ps_rw;
    if (norm) {
      const int norm_c = out_c / (ps_rh * ps_rw);
      b.gamma = &store.add(name + ".gamma", {1, norm_c, 1, 1});
      for (auto& v : b.gamma->v) v = 1.0;
      b.beta = &store.add(name + ".beta", {1, norm_c, 1, 1});
    }
    b.glu = glu;
    return b;
  }
};

}  // namespace
}  // namespace detail

Generator::Generator(const GeneratorSpec& spec, std::uint64_t seed) : spec_(spec) {
  if (spec.q < 1) throw ValidationError("generator: Q must be >= 1");
  if (spec.base_channels < 1) throw ValidationError("generator: base_channels must be >= 1");
  if (spec.n_res < 1) throw ValidationError("generator: n_res must be >= 1");
  Rng rng(seed);
  detail::Builder b{params_, rng};
  const int c0 = spec.base_channels;
  hq_ = ceil4(spec.q);

  switch (spec.kind) {
    case GeneratorKind::k212d:
    case GeneratorKind::k2d: {
      entry_ = b.conv("entry", 1, 4 * c0, 5, 15, 1, 1, 2, 7, false, true);
      down1_ = b.conv("down1", 2 * c0, 8 * c0, 5, 5, 2, 2, 2, 2, true, true);
      down2_ = b.conv("down2", 4 * c0, 8 * c0, 5, 5, 2, 2, 2, 2, true, true);
      if (spec.kind == GeneratorKind::k212d) {
        const int c_flat = 4 * c0 * (hq_ / 4);
        to_core_ = b.conv("to_core", c_flat, 4 * c0, 1, 1, 1, 1, 0, 0, true, false);
        for (int i = 0; i < spec.n_res; ++i) {
          const std::string base = "res" + std::to_string(i);
          auto a = b.conv(base + ".a", 4 * c0, 16 * c0, 1, 3, 1, 1, 0, 1, true, true);
          auto c = b.conv(base + ".b", 8 * c0, 4 * c0, 1, 3, 1, 1, 0, 1, true, false);
          res_.emplace_back(a, c);
        }
        from_core_ = b.conv("from_core", 4 * c0, c_flat, 1, 1, 1, 1, 0, 0, true, false);
      } else {
        for (int i = 0; i < spec.n_res; ++i) {
          const std::string base = "res" + std::to_string(i);
          auto a = b.conv(base + ".a", 4 * c0, 16 * c0, 3, 3, 1, 1, 1, 1, true, true);
          auto c = b.conv(base + ".b", 8 * c0, 4 * c0, 3, 3, 1, 1, 1, 1, true, false);
          res_.emplace_back(a, c);
        }
      }
      up1_ = b.conv("up1", 4 * c0, 32 * c0, 5, 5, 1, 1, 2, 2, true, true, 2, 2);
      up2_ = b.conv("up2", 4 * c0, 16 * c0, 5, 5, 1, 1, 2, 2, true, true, 2, 2);
      out_ = b.conv("out", 2 * c0, 1, 5, 15, 1, 1, 2, 7, false, false);
      break;
    }
    case GeneratorKind::k1d: {
      entry_ = b.conv("entry", spec.q, 4 * c0, 1, 15, 1, 1, 0, 7, false, true);
      down1_ = b.conv("down1", 2 * c0, 8 * c0, 1, 5, 1, 2, 0, 2, true, true);
      down2_ = b.conv("down2", 4 * c0, 16 * c0, 1, 5, 1, 2, 0, 2, true, true);
      for (int i = 0; i < spec.n_res; ++i) {
        const std::string base = "res" + std::to_string(i);
        auto a = b.conv(base + ".a", 8 * c0, 32 * c0, 1, 3, 1, 1, 0, 1, true, true);
        auto c = b.conv(base + ".b", 16 * c0, 8 * c0, 1, 3, 1, 1, 0, 1, true, false);
        res_.emplace_back(a, c);
      }
      up1_ = b.conv("up1", 8 * c0, 32 * c0, 1, 5, 1, 1, 0, 2, true, true, 1, 2);
      up2_ = b.conv("up2", 8 * c0, 16 * c0, 1, 5, 1, 1, 0, 2, true, true, 1, 2);
      out_ = b.conv("out", 4 * c0, spec.q, 1, 15, 1, 1, 0, 7, false, false);
      break;
    }
  }
}

Grid* Generator::forward(Graph& g, Grid* x) const {
  const Shape s = x->shape;
  if (s.c != 1 || s.h != spec_.q)
    throw ValidationError("generator: expected (n,1," + std::to_string(spec_.q) +
                          ",T) input, got " + s.str());
  if (s.w % 4 != 0 || s.w < 16) {
    const int next = std::max(16, ceil4(s.w));
    throw ValidationError("generator: T=" + std::to_string(s.w) +
                          " must be a multiple of 4 and >= 16; next valid padded "
                          "length is " + std::to_string(next));
  }

  if (spec_.kind == GeneratorKind::k1d) {
    Grid* h = g.reshape(x, {s.n, spec_.q, 1, s.w});
    h = entry_.apply(g, h);
    h = down1_.apply(g, h);
    h = down2_.apply(g, h);
    for (const auto& [a, c] : res_) h = g.add(h, c.apply(g, a.apply(g, h)));
    h = up1_.apply(g, h);
    h = up2_.apply(g, h);
    h = out_.apply(g, h);
    return g.reshape(h, s);
  }

  Grid* h = g.pad_rows(x, hq_ - spec_.q);
  h = entry_.apply(g, h);
  h = down1_.apply(g, h);
  h = down2_.apply(g, h);
  if (spec_.kind == GeneratorKind::k212d) {
    const Shape mid = h->shape;
    h = g.reshape(h, {mid.n, mid.c * mid.h, 1, mid.w});
    h = to_core_.apply(g, h);
    for (const auto& [a, c] : res_) h = g.add(h, c.apply(g, a.apply(g, h)));
    h = from_core_.apply(g, h);
    h = g.reshape(h, mid);
  } else {
    for (const auto& [a, c] : res_) h = g.add(h, c.apply(g, a.apply(g, h)));
  }
  h = up1_.apply(g, h);
  h = up2_.apply(g, h);
  h = out_.apply(g, h);
  return g.slice_rows(h, spec_.q);
}

Discriminator::Discriminator(const DiscriminatorSpec& spec, std::uint64_t seed)
    : spec_(spec) {
  if (spec.q < 1) throw ValidationError("discriminator: Q must be >= 1");
  if (spec.base_channels < 1)
    throw ValidationError("discriminator: base_channels must be >= 1");
  if (spec.t_ref < 1) throw ValidationError("discriminator: t_ref must be >= 1");
  Rng rng(seed);
  detail::Builder b{params_, rng};
  const int c0 = spec.base_channels;

  // No normalization anywhere in the discriminator: instance norm couples
  // every spatial position through the per-channel statistics, which would
  // break the strict locality of the patch scores.
  trunk_.push_back(b.conv("l1", 1, 4 * c0, 3, 3, 1, 1, 1, 1, false, true));
  trunk_.push_back(b.conv("l2", 2 * c0, 8 * c0, 3, 3, 2, 2, 1, 1, false, true));
  trunk_.push_back(b.conv("l3", 4 * c0, 16 * c0, 3, 3, 2, 2, 1, 1, false, true));
  trunk_.push_back(b.conv("l4", 8 * c0, 32 * c0, 3, 3, 2, 2, 1, 1, false, true));
  trunk_.push_back(b.conv("l5", 16 * c0, 32 * c0, 1, 5, 1, 1, 0, 2, false, true));

  if (spec.kind == DiscriminatorKind::kPatch) {
    patch_out_ = b.conv("out", 16 * c0, 1, 1, 3, 1, 1, 0, 1, false, false);
  } else {
    // probe the trunk output extent at (q, t_ref) to size the final layer
    Shape probe{1, 1, spec.q, spec.t_ref};
    for (const auto& blk : trunk_) {
      probe = ops::conv2d_output_shape(probe, blk.spec);
      probe.c /= 2;  // GLU
    }
    const std::int64_t flat = static_cast<std::int64_t>(probe.c) * probe.h * probe.w;
    fc_weight_ = &params_.add("out.weight", {1, static_cast<int>(flat), 1, 1});
    const double scale = 1.0 / std::sqrt(static_cast<double>(flat));
    for (auto& v : fc_weight_->v) v = scale * rng.normal();
    fc_bias_ = &params_.add("out.bias", {1, 1, 1, 1});
  }
}

Grid* Discriminator::forward(Graph& g, Grid* x) const {
  const Shape s = x->shape;
  if (s.c != 1 || s.h != spec_.q)
    throw ValidationError("discriminator: expected (n,1," + std::to_string(spec_.q) +
                          ",T) input, got " + s.str());
  if (spec_.kind == DiscriminatorKind::kFull && s.w != spec_.t_ref)
    throw ValidationError("discriminator: full kind is sized for T=" +
                          std::to_string(spec_.t_ref) + ", got T=" +
                          std::to_string(s.w));
  Grid* h = x;
  for (const auto& blk : trunk_) h = blk.apply(g, h);
  if (spec_.kind == DiscriminatorKind::kPatch) return patch_out_.apply(g, h);
  return g.linear(h, fc_weight_, fc_bias_);
}

ModelSet::ModelSet(const GeneratorSpec& gs, const DiscriminatorSpec& ds,
                   bool two_step, std::uint64_t seed) {
  g_xy = std::make_unique<Generator>(gs, Rng::derive(seed, 1));
  g_yx = std::make_unique<Generator>(gs, Rng::derive(seed, 2));
  d_x = std::make_unique<Discriminator>(ds, Rng::derive(seed, 3));
  d_y = std::make_unique<Discriminator>(ds, Rng::derive(seed, 4));
  if (two_step) {
    d2_x = std::make_unique<Discriminator>(ds, Rng::derive(seed, 5));
    d2_y = std::make_unique<Discriminator>(ds, Rng::derive(seed, 6));
  }
}

std::vector<Grid*> ModelSet::generator_params() const {
  std::vector<Grid*> out = g_xy->params().all();
  for (Grid* p : g_yx->params().all()) out.push_back(p);
  return out;
}

std::vector<Grid*> ModelSet::discriminator_params() const {
  std::vector<Grid*> out = d_x->params().all();
  for (Grid* p : d_y->params().all()) out.push_back(p);
  if (d2_x) for (Grid* p : d2_x->params().all()) out.push_back(p);
  if (d2_y) for (Grid* p : d2_y->params().all()) out.push_back(p);
  return out;
}

std::vector<std::pair<std::string, Grid*>> ModelSet::named_params() const {
  std::vector<std::pair<std::string, Grid*>> out;
  auto append = [&out](const std::string& prefix, ParamStore& store) {
    for (std::size_t i = 0; i < store.size(); ++i)
      out.emplace_back(prefix + store.name(i), &store.grid(i));
  };
  append("g_xy.", g_xy->params());
  append("g_yx.", g_yx->params());
  append("d_x.", d_x->params());
  append("d_y.", d_y->params());
  if (d2_x) append("d2_x.", d2_x->params());
  if (d2_y) append("d2_y.", d2_y->params());
  return out;
}

FeatureSequence generator_forward(const Generator& gen, const FeatureSequence& x) {
  if (x.q != gen.spec().q)
    throw ValidationError("generator_forward: sequence has Q=" + std::to_string(x.q) +
                          " but the generator expects Q=" +
                          std::to_string(gen.spec().q));
  Graph g;
  Grid* in = g.leaf(to_grid(x));
  Grid* out = gen.forward(g, in);
  FeatureSequence y = from_grid(*out);
  if (!all_finite(y.values))
    throw ComputeError("generator_forward: non-finite output");
  return y;
}

Grid discriminator_forward(const Discriminator& d, const FeatureSequence& x) {
  Graph g;
  Grid* in = g.leaf(to_grid(x));
  return *d.forward(g, in);
}

}  // namespace cyclevc
