#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <sstream>

#include "cyclevc/metrics.hpp"
#include "cyclevc/rng.hpp"

using namespace cyclevc;

namespace {

FeatureSequence random_seq(int q, int t, std::uint64_t seed, double scale = 1.0) {
  Rng rng(seed);
  FeatureSequence f(q, t);
  for (auto& v : f.values) v = scale * rng.normal();
  return f;
}

// exhaustive minimum-cost alignment for the DP oracle check
double brute_force_dtw(const FeatureSequence& a, const FeatureSequence& b) {
  const int tc = a.t, tt = b.t;
  auto cost = [&](int i, int j) {
    double s = 0.0;
    for (int d = 1; d < a.q; ++d) {
      const double diff = a.at(d, i) - b.at(d, j);
      s += diff * diff;
    }
    return std::sqrt(s);
  };
  double best = std::numeric_limits<double>::infinity();
  // depth-first over all monotone paths
  struct Frame { int i, j; double acc; };
  std::vector<Frame> stack{{0, 0, cost(0, 0)}};
  while (!stack.empty()) {
    const Frame f = stack.back();
    stack.pop_back();
    if (f.i == tc - 1 && f.j == tt - 1) {
      best = std::min(best, f.acc);
      continue;
    }
    if (f.i + 1 < tc && f.j + 1 < tt)
      stack.push_back({f.i + 1, f.j + 1, f.acc + cost(f.i + 1, f.j + 1)});
    if (f.i + 1 < tc) stack.push_back({f.i + 1, f.j, f.acc + cost(f.i + 1, f.j)});
    if (f.j + 1 < tt) stack.push_back({f.i, f.j + 1, f.acc + cost(f.i, f.j + 1)});
  }
  return best;
}

double path_cost(const FeatureSequence& a, const FeatureSequence& b,
                 const AlignmentPath& p) {
  double s = 0.0;
  for (const auto& [i, j] : p.steps) {
    double c = 0.0;
    for (int d = 1; d < a.q; ++d) {
      const double diff = a.at(d, i) - b.at(d, j);
      c += diff * diff;
    }
    s += std::sqrt(c);
  }
  return s;
}

// straight-line DFT evaluation, independent of the library implementation
std::vector<double> oracle_modspec(const std::vector<double>& traj) {
  const int n = kMsSegment;
  std::vector<double> power(kMsBins, 0.0);
  int n_seg = 0;
  for (int start = 0; start + n <= static_cast<int>(traj.size()); start += kMsHop) {
    ++n_seg;
    for (int k = 0; k < kMsBins; ++k) {
      double re = 0.0, im = 0.0;
      for (int t = 0; t < n; ++t) {
        const double w = 0.5 * (1.0 - std::cos(2.0 * M_PI * t / n));
        const double ang = 2.0 * M_PI * k * t / n;
        re += traj[start + t] * w * std::cos(ang);
        im -= traj[start + t] * w * std::sin(ang);
      }
      power[k] += re * re + im * im;
    }
  }
  for (auto& p : power) p = std::log10(std::max(p / n_seg, kMsFloor));
  return power;
}

}  // namespace

TEST_CASE("mcd_frame: hand values and scaling") {
  std::vector<double> a(34, 0.0), b(34, 0.0);
  CHECK(mcd_frame(a, b) == doctest::Approx(0.0));
  b[7] = 1.0;
  const double one = (10.0 / std::log(10.0)) * std::sqrt(2.0);
  CHECK(mcd_frame(a, b) == doctest::Approx(one).epsilon(1e-9));
  CHECK(mcd_frame(a, b) == doctest::Approx(6.141851).epsilon(1e-5));
  b[7] = 2.0;
  CHECK(mcd_frame(a, b) == doctest::Approx(2 * one).epsilon(1e-9));
  CHECK(mcd_frame(a, b) == doctest::Approx(12.283702).epsilon(1e-5));
}

TEST_CASE("mcd_frame: invariant under a shared coefficient permutation") {
  Rng rng(1);
  std::vector<double> a(16), b(16);
  for (auto& v : a) v = rng.normal();
  for (auto& v : b) v = rng.normal();
  const double base = mcd_frame(a, b);
  std::vector<double> pa = a, pb = b;
  // rotate both by three positions
  std::rotate(pa.begin(), pa.begin() + 3, pa.end());
  std::rotate(pb.begin(), pb.begin() + 3, pb.end());
  CHECK(mcd_frame(pa, pb) == doctest::Approx(base).epsilon(1e-15));
  CHECK_THROWS_AS(mcd_frame(a, std::vector<double>(15)), ValidationError);
}

TEST_CASE("dtw_align: structure of the path") {
  SUBCASE("identical sequences align on the diagonal at zero cost") {
    const FeatureSequence a = random_seq(4, 6, 2);
    const AlignmentPath p = dtw_align(a, a);
    REQUIRE(p.steps.size() == 6);
    for (int i = 0; i < 6; ++i) {
      CHECK(p.steps[i].first == i);
      CHECK(p.steps[i].second == i);
    }
    CHECK(path_cost(a, a, p) == doctest::Approx(0.0));
  }
  SUBCASE("one duplicated frame costs nothing and adds one non-diagonal step") {
    FeatureSequence a = random_seq(3, 3, 3);
    FeatureSequence b(3, 4);
    for (int d = 0; d < 3; ++d) {
      b.at(d, 0) = a.at(d, 0);
      b.at(d, 1) = a.at(d, 1);
      b.at(d, 2) = a.at(d, 1);
      b.at(d, 3) = a.at(d, 2);
    }
    const AlignmentPath p = dtw_align(a, b);
    CHECK(path_cost(a, b, p) == doctest::Approx(0.0));
    int non_diag = 0;
    for (std::size_t s = 1; s < p.steps.size(); ++s) {
      const int di = p.steps[s].first - p.steps[s - 1].first;
      const int dj = p.steps[s].second - p.steps[s - 1].second;
      non_diag += (di + dj) == 1;
    }
    CHECK(non_diag == 1);
  }
  SUBCASE("path length never exceeds Tc + Tt - 1") {
    for (int trial = 0; trial < 20; ++trial) {
      Rng rng(100 + trial);
      const int tc = 1 + static_cast<int>(rng.uniform_int(0, 4));
      const int tt = 1 + static_cast<int>(rng.uniform_int(0, 4));
      const FeatureSequence a = random_seq(3, tc, 200 + trial);
      const FeatureSequence b = random_seq(3, tt, 300 + trial);
      const AlignmentPath p = dtw_align(a, b);
      CHECK(p.steps.size() <= static_cast<std::size_t>(tc + tt - 1));
      CHECK(p.steps.front() == std::pair<int, int>{0, 0});
      CHECK(p.steps.back() == std::pair<int, int>{tc - 1, tt - 1});
    }
  }
}

TEST_CASE("dtw_align: DP equals exhaustive enumeration on small pairs") {
  for (int trial = 0; trial < 200; ++trial) {
    Rng rng(7000 + trial);
    const int tc = 1 + static_cast<int>(rng.uniform_int(0, 4));
    const int tt = 1 + static_cast<int>(rng.uniform_int(0, 4));
    const FeatureSequence a = random_seq(3, tc, 500 + trial);
    const FeatureSequence b = random_seq(3, tt, 900 + trial);
    const double dp = path_cost(a, b, dtw_align(a, b));
    const double brute = brute_force_dtw(a, b);
    CHECK(dp == doctest::Approx(brute).epsilon(1e-12));
  }
}

TEST_CASE("mcd_utterance: zero on identical input, brute-force equality on a 4x4 toy") {
  const FeatureSequence a = random_seq(5, 12, 4);
  CHECK(mcd_utterance(a, a) == doctest::Approx(0.0));

  const FeatureSequence c = random_seq(4, 4, 5);
  const FeatureSequence t = random_seq(4, 4, 6);
  // brute force: enumerate paths, keep the DP-optimal cost, then average
  // mcd_frame along the DP path itself
  const AlignmentPath p = dtw_align(c, t);
  CHECK(path_cost(c, t, p) == doctest::Approx(brute_force_dtw(c, t)).epsilon(1e-12));
  double mean = 0.0;
  std::vector<double> cv(3), tv(3);
  for (const auto& [i, j] : p.steps) {
    for (int d = 1; d < 4; ++d) {
      cv[d - 1] = c.at(d, i);
      tv[d - 1] = t.at(d, j);
    }
    mean += mcd_frame(cv, tv);
  }
  mean /= p.steps.size();
  CHECK(mcd_utterance(c, t) == doctest::Approx(mean).epsilon(1e-12));
}

TEST_CASE("summarize: population statistics") {
  const MetricSummary s = summarize({0.0, 2.0});
  CHECK(s.mean == doctest::Approx(1.0));
  CHECK(s.stddev == doctest::Approx(1.0));
  CHECK_THROWS_AS(summarize({}), ValidationError);
}

TEST_CASE("modulation_spectrum: hand-analyzable signals") {
  SUBCASE("constant trajectory: bins beyond the Hann main lobe sit at the floor") {
    std::vector<double> traj(kMsSegment, 3.7);
    const auto spec = modulation_spectrum(traj);
    REQUIRE(static_cast<int>(spec.size()) == kMsBins);
    CHECK(spec[0] > std::log10(kMsFloor));
    for (int k = 2; k < kMsBins; ++k)
      CHECK(spec[k] == doctest::Approx(std::log10(kMsFloor)));
  }
  SUBCASE("bin-frequency sinusoid dominates outside its main lobe by 20 dB") {
    const int j = 8;
    std::vector<double> traj(kMsSegment * 2);
    for (std::size_t t = 0; t < traj.size(); ++t)
      traj[t] = std::sin(2.0 * M_PI * j * t / kMsSegment + 0.31);
    const auto spec = modulation_spectrum(traj);
    for (int k = 0; k < kMsBins; ++k) {
      if (std::abs(k - j) <= 1) continue;
      CHECK(10.0 * (spec[j] - spec[k]) >= 20.0);
    }
  }
  SUBCASE("doubling the amplitude raises every live bin by log10(4)") {
    Rng rng(11);
    std::vector<double> traj(96), twice(96);
    for (std::size_t i = 0; i < traj.size(); ++i) {
      traj[i] = rng.normal();
      twice[i] = 2.0 * traj[i];
    }
    const auto s1 = modulation_spectrum(traj);
    const auto s2 = modulation_spectrum(twice);
    for (int k = 0; k < kMsBins; ++k) {
      if (s1[k] <= std::log10(kMsFloor) + 1e-12) continue;
      CHECK(s2[k] - s1[k] == doctest::Approx(std::log10(4.0)).epsilon(1e-9));
    }
  }
  SUBCASE("too-short trajectory names the minimum length") {
    std::vector<double> traj(kMsSegment - 1, 1.0);
    CHECK_THROWS_WITH_AS(modulation_spectrum(traj), doctest::Contains("64"),
                         ValidationError);
  }
  SUBCASE("matches the straight-line oracle") {
    Rng rng(12);
    std::vector<double> traj(160);
    for (auto& v : traj) v = rng.normal();
    const auto lib = modulation_spectrum(traj);
    const auto oracle = oracle_modspec(traj);
    for (int k = 0; k < kMsBins; ++k)
      CHECK(lib[k] == doctest::Approx(oracle[k]).epsilon(1e-9));
  }
}

TEST_CASE("msd: hand-analyzable cases") {
  SUBCASE("identical sequences give zero") {
    const FeatureSequence a = random_seq(6, 100, 13);
    CHECK(msd(a, a) == doctest::Approx(0.0));
  }
  SUBCASE("uniform scaling by 2 gives 10*log10(4) dB") {
    // smooth-but-rich trajectories keep every bin above the floor
    FeatureSequence a(4, 128);
    Rng rng(14);
    for (int d = 0; d < 4; ++d) {
      for (int i = 0; i < 128; ++i) {
        double v = 0.0;
        for (int k = 1; k < kMsBins; ++k)
          v += std::sin(2.0 * M_PI * k * i / kMsSegment + d + 0.1 * k);
        a.at(d, i) = v + 0.01 * rng.normal();
      }
    }
    FeatureSequence b = a;
    for (auto& v : b.values) v *= 2.0;
    CHECK(msd(b, a) == doctest::Approx(10.0 * std::log10(4.0)).epsilon(1e-6));
  }
  SUBCASE("one-dimension toy case equals the straight-line oracle") {
    Rng rng(15);
    FeatureSequence c(2, 64), t(2, 64);
    for (int i = 0; i < 64; ++i) {
      c.at(0, i) = rng.normal();  // dim 0 excluded from the metric
      t.at(0, i) = rng.normal();
      c.at(1, i) = rng.normal();
      t.at(1, i) = rng.normal();
    }
    std::vector<double> cd(64), td(64);
    for (int i = 0; i < 64; ++i) {
      cd[i] = c.at(1, i);
      td[i] = t.at(1, i);
    }
    const auto sc = oracle_modspec(cd);
    const auto st = oracle_modspec(td);
    double sumsq = 0.0;
    for (int k = 0; k < kMsBins; ++k) {
      const double diff = 10.0 * (sc[k] - st[k]);
      sumsq += diff * diff;
    }
    CHECK(msd(c, t) == doctest::Approx(std::sqrt(sumsq / kMsBins)).epsilon(1e-9));
  }
  SUBCASE("invariant to shifting both sequences by one whole segment") {
    // 64-periodic content so the segment set is identical after the shift
    FeatureSequence a(3, 192), b(3, 192);
    for (int d = 0; d < 3; ++d)
      for (int i = 0; i < 192; ++i) {
        a.at(d, i) = std::sin(2.0 * M_PI * 3 * i / kMsSegment + d);
        b.at(d, i) = std::cos(2.0 * M_PI * 5 * i / kMsSegment + 2 * d) +
                     0.5 * std::sin(2.0 * M_PI * 7 * i / kMsSegment);
      }
    auto window = [](const FeatureSequence& f, int start, int len) {
      FeatureSequence out(f.q, len);
      for (int d = 0; d < f.q; ++d)
        for (int i = 0; i < len; ++i) out.at(d, i) = f.at(d, start + i);
      return out;
    };
    const double m0 = msd(window(a, 0, 128), window(b, 0, 128));
    const double m1 = msd(window(a, kMsSegment, 128), window(b, kMsSegment, 128));
    CHECK(m1 == doctest::Approx(m0).epsilon(1e-12));
  }
  SUBCASE("short utterances are zero-padded to one segment") {
    const FeatureSequence a = random_seq(3, 40, 16);
    const FeatureSequence b = random_seq(3, 40, 17);
    CHECK(msd(a, b) > 0.0);
    CHECK(std::isfinite(msd(a, b)));
  }
}

TEST_CASE("metric report: rows plus one summary line") {
  std::ostringstream out;
  write_metric_report(out, {{"u0.mcp", 0.0, 0.0}, {"u1.mcp", 2.0, 4.0}});
  const std::string text = out.str();
  int lines = 0;
  for (char ch : text) lines += ch == '\n';
  CHECK(lines == 3);
  CHECK(text.find("summary,1.000000±1.000000,2.000000±2.000000") != std::string::npos);
}
