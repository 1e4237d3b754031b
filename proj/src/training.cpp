#include "cyclevc/training.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <ostream>

namespace cyclevc {

void TrainingConfig::validate() const {
  if (iterations < 0) throw ValidationError("config: iterations must be >= 0");
  if (!(lr_g > 0.0) || !(lr_d > 0.0))
    throw ValidationError("config: learning rates must be positive");
  if (!(beta1 >= 0.0 && beta1 < 1.0) || !(beta2 >= 0.0 && beta2 < 1.0))
    throw ValidationError("config: Adam betas must lie in [0, 1)");
  if (batch_size < 1) throw ValidationError("config: batch_size must be >= 1");
  if (crop_frames < 16 || crop_frames % 4 != 0)
    throw ValidationError("config: crop_frames must be a multiple of 4 and >= 16, got " +
                          std::to_string(crop_frames));
  if (lambda_cyc < 0.0 || lambda_id < 0.0)
    throw ValidationError("config: lambda weights must be >= 0");
  if (id_cutoff_iter < 0 || id_cutoff_iter > iterations)
    throw ValidationError("config: id_cutoff_iter must lie in [0, iterations]");
  if (adv_steps != 1 && adv_steps != 2)
    throw ValidationError("config: adv_steps must be 1 or 2, got " +
                          std::to_string(adv_steps));
  if (base_channels < 1) throw ValidationError("config: base_channels must be >= 1");
  if (n_res < 1) throw ValidationError("config: n_res must be >= 1");
  if (checkpoint_every < 1)
    throw ValidationError("config: checkpoint_every must be >= 1");
}

int Corpus::q() const {
  if (sequences.empty())
    throw ValidationError("corpus '" + speaker + "': no sequences");
  const int q0 = sequences.front().q;
  for (const auto& s : sequences)
    if (s.q != q0)
      throw ValidationError("corpus '" + speaker + "': mixed feature dimensions " +
                            std::to_string(q0) + " and " + std::to_string(s.q));
  return q0;
}

NormStats compute_stats(const std::vector<FeatureSequence>& sequences) {
  if (sequences.empty()) throw ValidationError("compute_stats: empty corpus");
  const int q = sequences.front().q;
  std::vector<double> sum(q, 0.0), sumsq(q, 0.0);
  std::int64_t frames = 0;
  for (const auto& s : sequences) {
    if (s.q != q) throw ValidationError("compute_stats: mixed feature dimensions");
    for (int d = 0; d < q; ++d)
      for (int i = 0; i < s.t; ++i) {
        const double v = s.at(d, i);
        sum[d] += v;
        sumsq[d] += v * v;
      }
    frames += s.t;
  }
  NormStats st;
  st.mcep_mean.resize(q);
  st.mcep_std.resize(q);
  for (int d = 0; d < q; ++d) {
    const double mean = sum[d] / static_cast<double>(frames);
    const double var = std::max(0.0, sumsq[d] / static_cast<double>(frames) - mean * mean);
    st.mcep_mean[d] = mean;
    st.mcep_std[d] = std::max(std::sqrt(var), 1e-8);
  }
  return st;
}

namespace {

FeatureSequence affine_per_dim(const FeatureSequence& x, const NormStats& s,
                               bool forward) {
  if (static_cast<int>(s.mcep_mean.size()) != x.q)
    throw ValidationError("normalize: stats have dimension " +
                          std::to_string(s.mcep_mean.size()) + ", sequence has " +
                          std::to_string(x.q));
  FeatureSequence y(x.q, x.t);
  for (int d = 0; d < x.q; ++d) {
    const double mu = s.mcep_mean[d], sd = s.mcep_std[d];
    for (int i = 0; i < x.t; ++i)
      y.at(d, i) = forward ? (x.at(d, i) - mu) / sd : x.at(d, i) * sd + mu;
  }
  return y;
}

}  // namespace

FeatureSequence normalize(const FeatureSequence& x, const NormStats& s) {
  return affine_per_dim(x, s, true);
}

FeatureSequence denormalize(const FeatureSequence& x, const NormStats& s) {
  return affine_per_dim(x, s, false);
}

FeatureSequence random_crop(const FeatureSequence& x, int frames, Rng& rng) {
  if (frames < 1) throw ValidationError("random_crop: frames must be >= 1");
  if (x.t < frames)
    throw ValidationError("random_crop: sequence has " + std::to_string(x.t) +
                          " frames, need " + std::to_string(frames));
  const int start = static_cast<int>(rng.uniform_int(0, x.t - frames));
  FeatureSequence y(x.q, frames);
  for (int d = 0; d < x.q; ++d)
    for (int i = 0; i < frames; ++i) y.at(d, i) = x.at(d, start + i);
  return y;
}

AdamOpt::AdamOpt(std::vector<Grid*> p) : params(std::move(p)) {
  m.resize(params.size());
  v.resize(params.size());
  for (std::size_t i = 0; i < params.size(); ++i) {
    m[i].assign(params[i]->v.size(), 0.0);
    v[i].assign(params[i]->v.size(), 0.0);
  }
}

void AdamOpt::step(double lr, double beta1, double beta2, double eps) {
  ++t;
  for (std::size_t i = 0; i < params.size(); ++i)
    ops::adam_step(params[i]->v, params[i]->g, m[i], v[i], lr, beta1, beta2, eps, t);
}

// ---------------------------------------------------------------------------
// checkpoint serialization

namespace {

constexpr char kCkptMagic[4] = {'C', 'V', 'C', '2'};
constexpr std::uint32_t kCkptVersion = 1;

class Writer {
 public:
  explicit Writer(const std::string& path) : out_(path, std::ios::binary), path_(path) {
    if (!out_) throw ValidationError(path + ": cannot open checkpoint for writing");
  }
  void bytes(const void* p, std::size_t n) {
    out_.write(static_cast<const char*>(p), static_cast<std::streamsize>(n));
  }
  void u32(std::uint32_t v) {
    unsigned char b[4] = {static_cast<unsigned char>(v), static_cast<unsigned char>(v >> 8),
                          static_cast<unsigned char>(v >> 16),
                          static_cast<unsigned char>(v >> 24)};
    bytes(b, 4);
  }
  void u64(std::uint64_t v) {
    u32(static_cast<std::uint32_t>(v));
    u32(static_cast<std::uint32_t>(v >> 32));
  }
  void i64(std::int64_t v) { u64(static_cast<std::uint64_t>(v)); }
  void f64(double v) { u64(std::bit_cast<std::uint64_t>(v)); }
  void f64s(const std::vector<double>& v) {
    for (double x : v) f64(x);
  }
  void str(const std::string& s) {
    u32(static_cast<std::uint32_t>(s.size()));
    bytes(s.data(), s.size());
  }
  void close() {
    out_.flush();
    if (!out_) throw ValidationError(path_ + ": checkpoint write failed");
  }

 private:
  std::ofstream out_;
  std::string path_;
};

class Reader {
 public:
  explicit Reader(const std::string& path) : in_(path, std::ios::binary), path_(path) {
    if (!in_) throw ValidationError(path + ": cannot open checkpoint");
  }
  void bytes(void* p, std::size_t n) {
    if (!in_.read(static_cast<char*>(p), static_cast<std::streamsize>(n)))
      throw ValidationError(path_ + ": corrupt checkpoint (truncated)");
  }
  std::uint32_t u32() {
    unsigned char b[4];
    bytes(b, 4);
    return static_cast<std::uint32_t>(b[0]) | (static_cast<std::uint32_t>(b[1]) << 8) |
           (static_cast<std::uint32_t>(b[2]) << 16) |
           (static_cast<std::uint32_t>(b[3]) << 24);
  }
  std::uint64_t u64() {
    const std::uint64_t lo = u32();
    return lo | (static_cast<std::uint64_t>(u32()) << 32);
  }
  std::int64_t i64() { return static_cast<std::int64_t>(u64()); }
  double f64() { return std::bit_cast<double>(u64()); }
  std::vector<double> f64s(std::size_t n) {
    std::vector<double> v(n);
    for (auto& x : v) x = f64();
    return v;
  }
  std::string str() {
    const std::uint32_t n = u32();
    if (n > (1u << 20)) throw ValidationError(path_ + ": corrupt checkpoint (bad string)");
    std::string s(n, '\0');
    bytes(s.data(), n);
    return s;
  }
  bool at_eof() {
    in_.peek();
    return in_.eof();
  }
  const std::string& path() const { return path_; }

 private:
  std::ifstream in_;
  std::string path_;
};

void write_stats_block(Writer& w, const NormStats& s) {
  w.u32(static_cast<std::uint32_t>(s.mcep_mean.size()));
  w.f64s(s.mcep_mean);
  w.f64s(s.mcep_std);
  w.f64(s.logf0_mean);
  w.f64(s.logf0_std);
}

NormStats read_stats_block(Reader& r) {
  NormStats s;
  const std::uint32_t n = r.u32();
  if (n > (1u << 20))
    throw ValidationError(r.path() + ": corrupt checkpoint (bad stats length)");
  s.mcep_mean = r.f64s(n);
  s.mcep_std = r.f64s(n);
  s.logf0_mean = r.f64();
  s.logf0_std = r.f64();
  return s;
}

}  // namespace

void save_checkpoint(const std::string& path, const Checkpoint& ck) {
  Writer w(path);
  w.bytes(kCkptMagic, 4);
  w.u32(kCkptVersion);
  const TrainingConfig& c = ck.cfg;
  w.i64(c.iterations);
  w.f64(c.lr_g);
  w.f64(c.lr_d);
  w.f64(c.beta1);
  w.f64(c.beta2);
  w.f64(c.adam_eps);
  w.u32(static_cast<std::uint32_t>(c.batch_size));
  w.u32(static_cast<std::uint32_t>(c.crop_frames));
  w.f64(c.lambda_cyc);
  w.f64(c.lambda_id);
  w.i64(c.id_cutoff_iter);
  w.u32(static_cast<std::uint32_t>(c.adv_steps));
  w.u32(static_cast<std::uint32_t>(c.generator_kind));
  w.u32(static_cast<std::uint32_t>(c.discriminator_kind));
  w.u64(c.seed);
  w.u32(static_cast<std::uint32_t>(c.base_channels));
  w.u32(static_cast<std::uint32_t>(c.n_res));
  w.i64(c.checkpoint_every);
  w.u32(static_cast<std::uint32_t>(ck.q));
  w.i64(ck.iteration);
  for (auto word : ck.rng) w.u64(word);
  w.i64(ck.t_g);
  w.i64(ck.t_d);
  write_stats_block(w, ck.stats_x);
  write_stats_block(w, ck.stats_y);
  w.u32(static_cast<std::uint32_t>(ck.names.size()));
  for (std::size_t i = 0; i < ck.names.size(); ++i) {
    w.str(ck.names[i]);
    const Shape& s = ck.shapes[i];
    w.u32(static_cast<std::uint32_t>(s.n));
    w.u32(static_cast<std::uint32_t>(s.c));
    w.u32(static_cast<std::uint32_t>(s.h));
    w.u32(static_cast<std::uint32_t>(s.w));
    w.u64(ck.values[i].size());
    w.f64s(ck.values[i]);
    w.f64s(ck.adam_m[i]);
    w.f64s(ck.adam_v[i]);
  }
  w.close();
}

Checkpoint load_checkpoint(const std::string& path) {
  Reader r(path);
  char magic[4];
  r.bytes(magic, 4);
  if (std::memcmp(magic, kCkptMagic, 4) != 0)
    throw ValidationError(path + ": corrupt checkpoint (bad magic)");
  const std::uint32_t version = r.u32();
  if (version != kCkptVersion)
    throw ValidationError(path + ": checkpoint format version " +
                          std::to_string(version) + " unsupported (expected " +
                          std::to_string(kCkptVersion) + ")");
  Checkpoint ck;
  TrainingConfig& c = ck.cfg;
  c.iterations = r.i64();
  c.lr_g = r.f64();
  c.lr_d = r.f64();
  c.beta1 = r.f64();
  c.beta2 = r.f64();
  c.adam_eps = r.f64();
  c.batch_size = static_cast<int>(r.u32());
  c.crop_frames = static_cast<int>(r.u32());
  c.lambda_cyc = r.f64();
  c.lambda_id = r.f64();
  c.id_cutoff_iter = r.i64();
  c.adv_steps = static_cast<int>(r.u32());
  const std::uint32_t gk = r.u32();
  const std::uint32_t dk = r.u32();
  if (gk > 2 || dk > 1)
    throw ValidationError(path + ": corrupt checkpoint (bad network kind)");
  c.generator_kind = static_cast<GeneratorKind>(gk);
  c.discriminator_kind = static_cast<DiscriminatorKind>(dk);
  c.seed = r.u64();
  c.base_channels = static_cast<int>(r.u32());
  c.n_res = static_cast<int>(r.u32());
  c.checkpoint_every = r.i64();
  ck.q = static_cast<int>(r.u32());
  ck.iteration = r.i64();
  for (auto& word : ck.rng) word = r.u64();
  ck.t_g = r.i64();
  ck.t_d = r.i64();
  ck.stats_x = read_stats_block(r);
  ck.stats_y = read_stats_block(r);
  const std::uint32_t n_params = r.u32();
  if (n_params > (1u << 16))
    throw ValidationError(path + ": corrupt checkpoint (bad parameter count)");
  for (std::uint32_t i = 0; i < n_params; ++i) {
    ck.names.push_back(r.str());
    Shape s;
    s.n = static_cast<int>(r.u32());
    s.c = static_cast<int>(r.u32());
    s.h = static_cast<int>(r.u32());
    s.w = static_cast<int>(r.u32());
    ck.shapes.push_back(s);
    const std::uint64_t numel = r.u64();
    if (numel != static_cast<std::uint64_t>(s.numel()) || numel > (1ull << 32))
      throw ValidationError(path + ": corrupt checkpoint (bad array length)");
    ck.values.push_back(r.f64s(numel));
    ck.adam_m.push_back(r.f64s(numel));
    ck.adam_v.push_back(r.f64s(numel));
  }
  if (!r.at_eof())
    throw ValidationError(path + ": corrupt checkpoint (trailing bytes)");
  return ck;
}

void check_architecture_match(const Checkpoint& ck, const TrainingConfig& cfg) {
  auto fail = [](const std::string& field, const std::string& have,
                 const std::string& want) {
    throw ValidationError("architecture mismatch: checkpoint has " + field + "=" +
                          have + " but the run requests " + want);
  };
  if (ck.cfg.generator_kind != cfg.generator_kind)
    fail("generator_kind", to_string(ck.cfg.generator_kind),
         to_string(cfg.generator_kind));
  if (ck.cfg.discriminator_kind != cfg.discriminator_kind)
    fail("discriminator_kind", to_string(ck.cfg.discriminator_kind),
         to_string(cfg.discriminator_kind));
  if (ck.cfg.adv_steps != cfg.adv_steps)
    fail("adv_steps", std::to_string(ck.cfg.adv_steps), std::to_string(cfg.adv_steps));
  if (ck.cfg.base_channels != cfg.base_channels)
    fail("base_channels", std::to_string(ck.cfg.base_channels),
         std::to_string(cfg.base_channels));
  if (ck.cfg.n_res != cfg.n_res)
    fail("n_res", std::to_string(ck.cfg.n_res), std::to_string(cfg.n_res));
  if (ck.cfg.crop_frames != cfg.crop_frames)
    fail("crop_frames", std::to_string(ck.cfg.crop_frames),
         std::to_string(cfg.crop_frames));
}

// ---------------------------------------------------------------------------
// trainer

namespace {

ModelSet build_models(const TrainingConfig& cfg, int q) {
  GeneratorSpec gs{cfg.generator_kind, q, cfg.base_channels, cfg.n_res};
  DiscriminatorSpec ds{cfg.discriminator_kind, q, cfg.base_channels, cfg.crop_frames};
  return ModelSet(gs, ds, cfg.adv_steps == 2, cfg.seed);
}

int common_q(const Corpus& cx, const Corpus& cy) {
  const int qx = cx.q();
  const int qy = cy.q();
  if (qx != qy)
    throw ValidationError("corpora disagree on feature dimension: " +
                          cx.speaker + " has Q=" + std::to_string(qx) + ", " +
                          cy.speaker + " has Q=" + std::to_string(qy));
  return qx;
}

double checked(double v, const char* term, std::int64_t iteration) {
  if (!std::isfinite(v))
    throw ComputeError("training: non-finite " + std::string(term) +
                       " at iteration " + std::to_string(iteration));
  return v;
}

}  // namespace

Trainer::Trainer(const TrainingConfig& cfg, Corpus cx, Corpus cy)
    : cfg_(cfg),
      q_(common_q(cx, cy)),
      models_(build_models(cfg, q_)),
      opt_g_(models_.generator_params()),
      opt_d_(models_.discriminator_params()),
      rng_(Rng::derive(cfg.seed, 0xc0ffee)) {
  cfg_.validate();
  stats_x_ = compute_stats(cx.sequences);
  stats_y_ = compute_stats(cy.sequences);
  prepare_corpora(std::move(cx), std::move(cy));
}

Trainer::Trainer(const Checkpoint& ck, const TrainingConfig& cfg, Corpus cx, Corpus cy)
    : cfg_(cfg),
      q_(common_q(cx, cy)),
      models_(build_models(cfg, q_)),
      opt_g_(models_.generator_params()),
      opt_d_(models_.discriminator_params()),
      rng_(0) {
  cfg_.validate();
  check_architecture_match(ck, cfg_);
  if (ck.q != q_)
    throw ValidationError("architecture mismatch: checkpoint has Q=" +
                          std::to_string(ck.q) + " but the corpora have Q=" +
                          std::to_string(q_));
  auto named = models_.named_params();
  if (named.size() != ck.names.size())
    throw ValidationError("architecture mismatch: checkpoint stores " +
                          std::to_string(ck.names.size()) + " parameters, model has " +
                          std::to_string(named.size()));
  for (std::size_t i = 0; i < named.size(); ++i) {
    if (named[i].first != ck.names[i])
      throw ValidationError("architecture mismatch: parameter '" + ck.names[i] +
                            "' in checkpoint, expected '" + named[i].first + "'");
    if (!(named[i].second->shape == ck.shapes[i]))
      throw ValidationError("architecture mismatch: parameter '" + ck.names[i] +
                            "' has shape " + ck.shapes[i].str() + " in checkpoint, "
                            "expected " + named[i].second->shape.str());
    named[i].second->v = ck.values[i];
  }
  const std::size_t n_g = opt_g_.params.size();
  for (std::size_t i = 0; i < named.size(); ++i) {
    auto& dst_m = i < n_g ? opt_g_.m[i] : opt_d_.m[i - n_g];
    auto& dst_v = i < n_g ? opt_g_.v[i] : opt_d_.v[i - n_g];
    dst_m = ck.adam_m[i];
    dst_v = ck.adam_v[i];
  }
  opt_g_.t = ck.t_g;
  opt_d_.t = ck.t_d;
  rng_.set_state(ck.rng);
  iteration_ = ck.iteration;
  stats_x_ = ck.stats_x;
  stats_y_ = ck.stats_y;
  prepare_corpora(std::move(cx), std::move(cy));
}

void Trainer::prepare_corpora(Corpus cx, Corpus cy) {
  auto prep = [this](const Corpus& c, std::vector<FeatureSequence>& out,
                     const NormStats& st) {
    bool any = false;
    for (const auto& s : c.sequences) {
      out.push_back(normalize(s, st));
      any = any || s.t >= cfg_.crop_frames;
    }
    if (!any)
      throw ValidationError("corpus '" + c.speaker + "': no sequence reaches crop_frames=" +
                            std::to_string(cfg_.crop_frames));
  };
  prep(cx, train_x_, stats_x_);
  prep(cy, train_y_, stats_y_);
}

Grid Trainer::sample_batch(const std::vector<FeatureSequence>& seqs) {
  Grid out({cfg_.batch_size, 1, q_, cfg_.crop_frames});
  for (int b = 0; b < cfg_.batch_size; ++b) {
    // resample until the drawn sentence is long enough to crop
    const FeatureSequence* s = nullptr;
    do {
      s = &seqs[rng_.uniform_int(0, static_cast<std::int64_t>(seqs.size()) - 1)];
    } while (s->t < cfg_.crop_frames);
    const FeatureSequence crop = random_crop(*s, cfg_.crop_frames, rng_);
    std::copy(crop.values.begin(), crop.values.end(),
              out.v.begin() + out.idx(b, 0, 0, 0));
  }
  return out;
}

LossReport Trainer::step() {
  const bool id_active = iteration_ < cfg_.id_cutoff_iter;
  const std::int64_t it = iteration_;
  LossReport rep;

  Graph gg;
  Grid* x = gg.leaf(sample_batch(train_x_));
  Grid* y = gg.leaf(sample_batch(train_y_));
  Grid* fake_y = models_.g_xy->forward(gg, x);
  Grid* fake_x = models_.g_yx->forward(gg, y);
  Grid* cyc_x = models_.g_yx->forward(gg, fake_y);
  Grid* cyc_y = models_.g_xy->forward(gg, fake_x);
  Grid* id_y = id_active ? models_.g_xy->forward(gg, y) : nullptr;
  Grid* id_x = id_active ? models_.g_yx->forward(gg, x) : nullptr;

  // -- discriminator phase: detached generator outputs, all active
  //    discriminators updated once
  {
    Graph gd;
    auto copy_of = [&gd](const Grid* src) {
      Grid t(src->shape);
      t.v = src->v;
      return gd.leaf(std::move(t));
    };
    Grid* x_in = copy_of(x);
    Grid* y_in = copy_of(y);
    Grid* fy_in = copy_of(fake_y);
    Grid* fx_in = copy_of(fake_x);

    for (Grid* p : opt_d_.params) {
      p->ensure_grad();
      p->zero_grad();
    }
    Grid* loss_dy = lsgan_d_loss_node(gd, models_.d_y->forward(gd, y_in),
                                      models_.d_y->forward(gd, fy_in));
    Grid* loss_dx = lsgan_d_loss_node(gd, models_.d_x->forward(gd, x_in),
                                      models_.d_x->forward(gd, fx_in));
    std::vector<std::pair<Grid*, double>> terms{{loss_dx, 1.0}, {loss_dy, 1.0}};
    rep.adv_d = checked(loss_dx->scalar() + loss_dy->scalar(), "adv_d", it);
    if (models_.two_step()) {
      Grid* cx_in = copy_of(cyc_x);
      Grid* cy_in = copy_of(cyc_y);
      Grid* loss_d2x = lsgan_d_loss_node(gd, models_.d2_x->forward(gd, x_in),
                                         models_.d2_x->forward(gd, cx_in));
      Grid* loss_d2y = lsgan_d_loss_node(gd, models_.d2_y->forward(gd, y_in),
                                         models_.d2_y->forward(gd, cy_in));
      terms.push_back({loss_d2x, 1.0});
      terms.push_back({loss_d2y, 1.0});
      rep.adv2_d = checked(loss_d2x->scalar() + loss_d2y->scalar(), "adv2_d", it);
    }
    Grid* total_d = gd.weighted_sum(terms);
    rep.total_d = checked(total_d->scalar(), "total_d", it);
    gd.backward(total_d);
    opt_d_.step(cfg_.lr_d, cfg_.beta1, cfg_.beta2, cfg_.adam_eps);
    // drop the discriminator grad buffers so the generator phase's backward
    // skips their kernel/bias accumulation entirely
    for (Grid* p : opt_d_.params) p->g.clear();
  }

  // -- generator phase: both generators updated jointly through total_g,
  //    scored by the discriminators updated above
  {
    for (Grid* p : opt_g_.params) {
      p->ensure_grad();
      p->zero_grad();
    }
    Grid* adv_y = lsgan_g_loss_node(gg, models_.d_y->forward(gg, fake_y));
    Grid* adv_x = lsgan_g_loss_node(gg, models_.d_x->forward(gg, fake_x));
    Grid* cyc_a = gg.l1_mean(cyc_x, x);
    Grid* cyc_b = gg.l1_mean(cyc_y, y);
    rep.adv_g = checked(adv_y->scalar() + adv_x->scalar(), "adv_g", it);
    rep.cyc = checked(cyc_a->scalar() + cyc_b->scalar(), "cyc", it);
    std::vector<std::pair<Grid*, double>> terms{{adv_y, 1.0},
                                                {adv_x, 1.0},
                                                {cyc_a, cfg_.lambda_cyc},
                                                {cyc_b, cfg_.lambda_cyc}};
    if (models_.two_step()) {
      Grid* adv2_x = lsgan_g_loss_node(gg, models_.d2_x->forward(gg, cyc_x));
      Grid* adv2_y = lsgan_g_loss_node(gg, models_.d2_y->forward(gg, cyc_y));
      terms.push_back({adv2_x, 1.0});
      terms.push_back({adv2_y, 1.0});
      rep.adv2_g = checked(adv2_x->scalar() + adv2_y->scalar(), "adv2_g", it);
    }
    if (id_active) {
      Grid* id_a = gg.l1_mean(id_y, y);
      Grid* id_b = gg.l1_mean(id_x, x);
      terms.push_back({id_a, cfg_.lambda_id});
      terms.push_back({id_b, cfg_.lambda_id});
      rep.id = checked(id_a->scalar() + id_b->scalar(), "id", it);
    }
    Grid* total_g = gg.weighted_sum(terms);
    rep.total_g = checked(total_g->scalar(), "total_g", it);
    gg.backward(total_g);
    opt_g_.step(cfg_.lr_g, cfg_.beta1, cfg_.beta2, cfg_.adam_eps);
  }

  ++iteration_;
  return rep;
}

void Trainer::run(std::ostream* loss_log, const std::string& checkpoint_dir) {
  namespace fs = std::filesystem;
  if (!checkpoint_dir.empty()) fs::create_directories(checkpoint_dir);
  auto save = [&](const std::string& name) {
    if (checkpoint_dir.empty()) return;
    save_checkpoint((fs::path(checkpoint_dir) / name).string(), make_checkpoint());
  };
  while (iteration_ < cfg_.iterations) {
    const LossReport r = step();
    if (loss_log != nullptr) *loss_log << loss_csv_line(iteration_, r) << "\n";
    if (iteration_ % cfg_.checkpoint_every == 0 && iteration_ < cfg_.iterations)
      save("ckpt_" + std::to_string(iteration_) + ".cvc2");
  }
  save("ckpt_final.cvc2");
}

Checkpoint Trainer::make_checkpoint() const {
  Checkpoint ck;
  ck.cfg = cfg_;
  ck.q = q_;
  ck.iteration = iteration_;
  ck.rng = rng_.state();
  ck.t_g = opt_g_.t;
  ck.t_d = opt_d_.t;
  ck.stats_x = stats_x_;
  ck.stats_y = stats_y_;
  const auto named = models_.named_params();
  const std::size_t n_g = opt_g_.params.size();
  for (std::size_t i = 0; i < named.size(); ++i) {
    ck.names.push_back(named[i].first);
    ck.shapes.push_back(named[i].second->shape);
    ck.values.push_back(named[i].second->v);
    ck.adam_m.push_back(i < n_g ? opt_g_.m[i] : opt_d_.m[i - n_g]);
    ck.adam_v.push_back(i < n_g ? opt_g_.v[i] : opt_d_.v[i - n_g]);
  }
  return ck;
}

}  // namespace cyclevc
