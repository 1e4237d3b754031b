#include "cyclevc/synth.hpp"

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

namespace cyclevc {

namespace {

constexpr double kTwoPi = 6.283185307179586476925;

}  // namespace

void SynthSpec::validate() const {
  if (n_train < 1 || n_eval < 1)
    throw ValidationError("synth: n_train and n_eval must be >= 1");
  if (q < 2) throw ValidationError("synth: q must be >= 2");
  if (t_min < 16 || t_max < t_min)
    throw ValidationError("synth: need 16 <= t_min <= t_max");
  if (!(scale_min > 0.0) || scale_max < scale_min)
    throw ValidationError("synth: non-invertible transform spec, scales must be "
                          "positive with scale_min <= scale_max");
  if (!(fir_max >= 0.0) || fir_max >= 0.5)
    throw ValidationError("synth: non-invertible transform spec, fir_max must lie "
                          "in [0, 0.5) so the center tap dominates");
  if (sinusoids < 1) throw ValidationError("synth: sinusoids must be >= 1");
}

SpeakerTransform random_transform(const SynthSpec& spec, Rng& rng) {
  SpeakerTransform t;
  t.scales.resize(spec.q);
  for (auto& s : t.scales) s = rng.uniform(spec.scale_min, spec.scale_max);

  // random Gaussian matrix orthonormalized by Gram-Schmidt
  const int q = spec.q;
  t.mix.assign(static_cast<std::size_t>(q) * q, 0.0);
  for (auto& v : t.mix) v = rng.normal();
  for (int i = 0; i < q; ++i) {
    double* row = &t.mix[static_cast<std::size_t>(i) * q];
    for (int k = 0; k < i; ++k) {
      const double* prev = &t.mix[static_cast<std::size_t>(k) * q];
      double dot = 0.0;
      for (int j = 0; j < q; ++j) dot += row[j] * prev[j];
      for (int j = 0; j < q; ++j) row[j] -= dot * prev[j];
    }
    double norm = 0.0;
    for (int j = 0; j < q; ++j) norm += row[j] * row[j];
    norm = std::sqrt(norm);
    if (norm < 1e-9)
      throw ValidationError("synth: degenerate mixing matrix draw");
    for (int j = 0; j < q; ++j) row[j] /= norm;
  }

  t.fir_a = rng.uniform(-spec.fir_max, spec.fir_max);
  t.fir_b = rng.uniform(-spec.fir_max, spec.fir_max);
  return t;
}

namespace {

void check_transform(const SpeakerTransform& t, const char* what) {
  if (t.scales.empty() || t.mix.size() != t.scales.size() * t.scales.size())
    throw ValidationError(std::string(what) + ": malformed transform");
  for (double s : t.scales)
    if (!(s > 0.0))
      throw ValidationError(std::string(what) +
                            ": non-invertible transform (non-positive scale)");
  if (std::abs(t.fir_a) + std::abs(t.fir_b) >= 1.0)
    throw ValidationError(std::string(what) +
                          ": non-invertible transform (FIR center tap not dominant)");
}

}  // namespace

FeatureSequence apply_transform(const SpeakerTransform& t, const FeatureSequence& x) {
  check_transform(t, "apply_transform");
  const int q = static_cast<int>(t.scales.size());
  if (x.q != q)
    throw ValidationError("apply_transform: sequence Q=" + std::to_string(x.q) +
                          " does not match transform Q=" + std::to_string(q));
  // frame-wise z = mix * diag(scales) * x
  FeatureSequence z(q, x.t);
  for (int i = 0; i < q; ++i) {
    const double* row = &t.mix[static_cast<std::size_t>(i) * q];
    for (int f = 0; f < x.t; ++f) {
      double s = 0.0;
      for (int j = 0; j < q; ++j) s += row[j] * t.scales[j] * x.at(j, f);
      z.at(i, f) = s;
    }
  }
  // temporal FIR per dimension, zero boundary
  FeatureSequence y(q, x.t);
  for (int d = 0; d < q; ++d)
    for (int f = 0; f < x.t; ++f) {
      double v = z.at(d, f);
      if (f > 0) v += t.fir_a * z.at(d, f - 1);
      if (f + 1 < x.t) v += t.fir_b * z.at(d, f + 1);
      y.at(d, f) = v;
    }
  return y;
}

FeatureSequence invert_transform(const SpeakerTransform& t, const FeatureSequence& y) {
  check_transform(t, "invert_transform");
  const int q = static_cast<int>(t.scales.size());
  if (y.q != q)
    throw ValidationError("invert_transform: sequence Q mismatch");
  // undo the FIR: tridiagonal solve (Thomas algorithm) per dimension
  FeatureSequence z(q, y.t);
  const int n = y.t;
  std::vector<double> cp(n), dp(n);
  for (int d = 0; d < q; ++d) {
    cp[0] = t.fir_b;
    dp[0] = y.at(d, 0);
    for (int f = 1; f < n; ++f) {
      const double m = 1.0 / (1.0 - t.fir_a * cp[f - 1]);
      cp[f] = t.fir_b * m;
      dp[f] = (y.at(d, f) - t.fir_a * dp[f - 1]) * m;
    }
    z.at(d, n - 1) = dp[n - 1];
    for (int f = n - 2; f >= 0; --f) z.at(d, f) = dp[f] - cp[f] * z.at(d, f + 1);
  }
  // undo the frame-wise linear map: x = diag(1/scales) * mix^T * z
  FeatureSequence x(q, y.t);
  for (int j = 0; j < q; ++j)
    for (int f = 0; f < n; ++f) {
      double s = 0.0;
      for (int i = 0; i < q; ++i) s += t.mix[static_cast<std::size_t>(i) * q + j] * z.at(i, f);
      x.at(j, f) = s / t.scales[j];
    }
  return x;
}

FeatureSequence apply_ground_truth_xy(const GroundTruthMap& m, const FeatureSequence& a) {
  return apply_transform(m.tb, invert_transform(m.ta, a));
}

FeatureSequence apply_ground_truth_yx(const GroundTruthMap& m, const FeatureSequence& b) {
  return apply_transform(m.ta, invert_transform(m.tb, b));
}

FeatureSequence synth_base(const SynthSpec& spec, Rng& rng) {
  const int t = static_cast<int>(rng.uniform_int(spec.t_min, spec.t_max));
  FeatureSequence f(spec.q, t);
  std::vector<double> raw(t);
  for (int d = 0; d < spec.q; ++d) {
    // each dimension gets a fixed mean level, its own modulation band and a
    // skewed component; the asymmetric, dimension-distinct marginals anchor
    // the cycle objective to the true map instead of an arbitrary
    // distribution-preserving bijection
    const double level = 1.2 * std::sin(2.4 * d + 0.7);
    const double band = 0.02 + 0.14 * d / std::max(1, spec.q - 1);
    const double jitter = 0.05 * rng.normal();
    for (auto& v : raw) v = level + jitter;
    for (int k = 0; k < spec.sinusoids; ++k) {
      const double freq = rng.uniform(0.7 * band, 1.3 * band);
      const double phase = rng.uniform(0.0, kTwoPi);
      const double amp = rng.uniform(0.6, 1.0) / (k + 1);
      for (int i = 0; i < t; ++i) raw[i] += amp * std::sin(kTwoPi * freq * i + phase);
    }
    {
      const double freq = rng.uniform(0.01, 0.05);
      const double phase = rng.uniform(0.0, kTwoPi);
      for (int i = 0; i < t; ++i) {
        const double s = std::sin(kTwoPi * freq * i + phase);
        raw[i] += 0.35 * s * s;
      }
    }
    // light 3-point smoothing
    for (int i = 0; i < t; ++i) {
      const double prev = i > 0 ? raw[i - 1] : raw[i];
      const double next = i + 1 < t ? raw[i + 1] : raw[i];
      f.at(d, i) = 0.25 * prev + 0.5 * raw[i] + 0.25 * next;
    }
  }
  return f;
}

namespace {

void write_row(std::ostream& out, const char* label, const std::vector<double>& v) {
  out << label;
  char buf[32];
  for (double x : v) {
    std::snprintf(buf, sizeof buf, " %.17g", x);
    out << buf;
  }
  out << "\n";
}

std::vector<double> parse_row(const std::string& line) {
  std::istringstream ss(line);
  std::string label;
  ss >> label;
  std::vector<double> out;
  double v;
  while (ss >> v) out.push_back(v);
  return out;
}

}  // namespace

void write_ground_truth(const std::string& path, const GroundTruthMap& m) {
  std::ofstream out(path);
  if (!out) throw ValidationError(path + ": cannot open for writing");
  out << "q " << m.q << "\n";
  write_row(out, "ta_scales", m.ta.scales);
  write_row(out, "ta_mix", m.ta.mix);
  out << "ta_fir " << m.ta.fir_a << " " << m.ta.fir_b << "\n";
  write_row(out, "tb_scales", m.tb.scales);
  write_row(out, "tb_mix", m.tb.mix);
  out << "tb_fir " << m.tb.fir_a << " " << m.tb.fir_b << "\n";
}

GroundTruthMap read_ground_truth(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError(path + ": cannot open ground-truth file");
  GroundTruthMap m;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto v = parse_row(line);
    if (line.rfind("q ", 0) == 0) m.q = static_cast<int>(v[0]);
    else if (line.rfind("ta_scales", 0) == 0) m.ta.scales = v;
    else if (line.rfind("ta_mix", 0) == 0) m.ta.mix = v;
    else if (line.rfind("ta_fir", 0) == 0) { m.ta.fir_a = v[0]; m.ta.fir_b = v[1]; }
    else if (line.rfind("tb_scales", 0) == 0) m.tb.scales = v;
    else if (line.rfind("tb_mix", 0) == 0) m.tb.mix = v;
    else if (line.rfind("tb_fir", 0) == 0) { m.tb.fir_a = v[0]; m.tb.fir_b = v[1]; }
    else throw ValidationError(path + ": unknown ground-truth row '" + line + "'");
  }
  if (m.q < 2 || m.ta.scales.empty() || m.tb.scales.empty())
    throw ValidationError(path + ": incomplete ground-truth file");
  return m;
}

SynthOutput generate_corpus(const SynthSpec& spec, const std::string& out_dir) {
  spec.validate();
  namespace fs = std::filesystem;
  const fs::path root(out_dir);
  for (const char* sub : {"a/train", "a/eval", "b/train", "b/eval", "oracle"})
    fs::create_directories(root / sub);

  Rng rng(spec.seed);
  GroundTruthMap map;
  map.q = spec.q;
  map.ta = random_transform(spec, rng);
  map.tb = random_transform(spec, rng);

  auto num = [](int i) {
    char buf[16];
    std::snprintf(buf, sizeof buf, "%03d", i);
    return std::string(buf);
  };

  SynthOutput out;
  out.ground_truth = (root / "ground_truth.txt").string();
  write_ground_truth(out.ground_truth, map);
  out.oracle_dir = (root / "oracle").string();

  auto manifest = [&root](const std::string& name) {
    return (root / name).string();
  };
  out.manifest_a_train = manifest("manifest_a_train.txt");
  out.manifest_a_eval = manifest("manifest_a_eval.txt");
  out.manifest_b_train = manifest("manifest_b_train.txt");
  out.manifest_b_eval = manifest("manifest_b_eval.txt");
  out.pairs_xy = manifest("pairs_xy.txt");
  out.pairs_yx = manifest("pairs_yx.txt");

  std::ofstream ma_train(out.manifest_a_train), ma_eval(out.manifest_a_eval);
  std::ofstream mb_train(out.manifest_b_train), mb_eval(out.manifest_b_eval);
  std::ofstream pairs_xy(out.pairs_xy), pairs_yx(out.pairs_yx);

  // speaker A: disjoint base draws, transformed by T_A; eval bases also get
  // their T_B image written as the conversion oracle
  for (int i = 0; i < spec.n_train; ++i) {
    const FeatureSequence base = synth_base(spec, rng);
    write_features((root / "a/train" / ("a_train_" + num(i) + ".mcp")).string(),
                   apply_transform(map.ta, base));
    ma_train << "a/train/a_train_" << num(i) << ".mcp\n";
  }
  for (int i = 0; i < spec.n_eval; ++i) {
    const FeatureSequence base = synth_base(spec, rng);
    write_features((root / "a/eval" / ("a_eval_" + num(i) + ".mcp")).string(),
                   apply_transform(map.ta, base));
    write_features((root / "oracle" / ("from_a_" + num(i) + ".mcp")).string(),
                   apply_transform(map.tb, base));
    ma_eval << "a/eval/a_eval_" << num(i) << ".mcp\n";
    pairs_xy << "a_eval_" << num(i) << ".mcp,from_a_" << num(i) << ".mcp\n";
  }
  for (int i = 0; i < spec.n_train; ++i) {
    const FeatureSequence base = synth_base(spec, rng);
    write_features((root / "b/train" / ("b_train_" + num(i) + ".mcp")).string(),
                   apply_transform(map.tb, base));
    mb_train << "b/train/b_train_" << num(i) << ".mcp\n";
  }
  for (int i = 0; i < spec.n_eval; ++i) {
    const FeatureSequence base = synth_base(spec, rng);
    write_features((root / "b/eval" / ("b_eval_" + num(i) + ".mcp")).string(),
                   apply_transform(map.tb, base));
    write_features((root / "oracle" / ("from_b_" + num(i) + ".mcp")).string(),
                   apply_transform(map.ta, base));
    mb_eval << "b/eval/b_eval_" << num(i) << ".mcp\n";
    pairs_yx << "b_eval_" << num(i) << ".mcp,from_b_" << num(i) << ".mcp\n";
  }
  return out;
}

}  // namespace cyclevc
