#include "cyclevc/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <ostream>

namespace cyclevc {

namespace {

constexpr double kMcdScale = 10.0 / 2.302585092994045684;  // 10 / ln 10
constexpr double kTwoPi = 6.283185307179586476925;

// Euclidean frame distance over dimensions 1..Q-1.
double frame_cost(const FeatureSequence& a, int i, const FeatureSequence& b, int j) {
  double s = 0.0;
  for (int d = 1; d < a.q; ++d) {
    const double diff = a.at(d, i) - b.at(d, j);
    s += diff * diff;
  }
  return std::sqrt(s);
}

void require_comparable(const FeatureSequence& a, const FeatureSequence& b,
                        const char* what) {
  if (a.q != b.q)
    throw ValidationError(std::string(what) + ": feature dimensions differ, " +
                          std::to_string(a.q) + " vs " + std::to_string(b.q));
  if (a.q < 2)
    throw ValidationError(std::string(what) +
                          ": need Q >= 2 (0th coefficient is excluded)");
}

}  // namespace

double mcd_frame(std::span<const double> c, std::span<const double> t) {
  if (c.size() != t.size())
    throw ValidationError("mcd_frame: length mismatch " + std::to_string(c.size()) +
                          " vs " + std::to_string(t.size()));
  if (c.empty()) throw ValidationError("mcd_frame: empty coefficient vectors");
  double s = 0.0;
  for (std::size_t d = 0; d < c.size(); ++d) {
    const double diff = c[d] - t[d];
    s += diff * diff;
  }
  return kMcdScale * std::sqrt(2.0 * s);
}

AlignmentPath dtw_align(const FeatureSequence& converted,
                        const FeatureSequence& target) {
  require_comparable(converted, target, "dtw_align");
  const int tc = converted.t, tt = target.t;
  std::vector<double> acc(static_cast<std::size_t>(tc) * tt);
  auto at = [&acc, tt](int i, int j) -> double& { return acc[static_cast<std::size_t>(i) * tt + j]; };

  for (int i = 0; i < tc; ++i)
    for (int j = 0; j < tt; ++j) {
      const double c = frame_cost(converted, i, target, j);
      if (i == 0 && j == 0) {
        at(i, j) = c;
      } else if (i == 0) {
        at(i, j) = at(i, j - 1) + c;
      } else if (j == 0) {
        at(i, j) = at(i - 1, j) + c;
      } else {
        at(i, j) = std::min({at(i - 1, j - 1), at(i - 1, j), at(i, j - 1)}) + c;
      }
    }

  AlignmentPath path;
  int i = tc - 1, j = tt - 1;
  path.steps.emplace_back(i, j);
  while (i > 0 || j > 0) {
    if (i == 0) {
      --j;
    } else if (j == 0) {
      --i;
    } else {
      const double diag = at(i - 1, j - 1);
      const double up = at(i - 1, j);
      const double left = at(i, j - 1);
      if (diag <= up && diag <= left) {
        --i;
        --j;
      } else if (up <= left) {
        --i;
      } else {
        --j;
      }
    }
    path.steps.emplace_back(i, j);
  }
  std::reverse(path.steps.begin(), path.steps.end());
  return path;
}

double mcd_utterance(const FeatureSequence& converted, const FeatureSequence& target) {
  require_comparable(converted, target, "mcd_utterance");
  const AlignmentPath path = dtw_align(converted, target);
  std::vector<double> cv(converted.q - 1), tv(target.q - 1);
  double s = 0.0;
  for (const auto& [i, j] : path.steps) {
    for (int d = 1; d < converted.q; ++d) {
      cv[d - 1] = converted.at(d, i);
      tv[d - 1] = target.at(d, j);
    }
    s += mcd_frame(cv, tv);
  }
  return s / static_cast<double>(path.steps.size());
}

MetricSummary summarize(const std::vector<double>& values) {
  if (values.empty()) throw ValidationError("summarize: no values");
  MetricSummary out;
  out.per_utterance = values;
  double s = 0.0;
  for (double v : values) s += v;
  out.mean = s / static_cast<double>(values.size());
  double var = 0.0;
  for (double v : values) var += (v - out.mean) * (v - out.mean);
  out.stddev = std::sqrt(var / static_cast<double>(values.size()));
  return out;
}

std::vector<double> modulation_spectrum(std::span<const double> traj) {
  const int t = static_cast<int>(traj.size());
  if (t < kMsSegment)
    throw ValidationError("modulation_spectrum: trajectory has " + std::to_string(t) +
                          " frames; minimum length is " + std::to_string(kMsSegment));
  static const auto window = [] {
    std::array<double, kMsSegment> w{};
    for (int n = 0; n < kMsSegment; ++n)
      w[n] = 0.5 * (1.0 - std::cos(kTwoPi * n / kMsSegment));
    return w;
  }();

  std::vector<double> power(kMsBins, 0.0);
  const int n_seg = (t - kMsSegment) / kMsHop + 1;
  std::vector<double> seg(kMsSegment);
  for (int s = 0; s < n_seg; ++s) {
    const int start = s * kMsHop;
    for (int n = 0; n < kMsSegment; ++n) seg[n] = traj[start + n] * window[n];
    for (int k = 0; k < kMsBins; ++k) {
      double re = 0.0, im = 0.0;
      for (int n = 0; n < kMsSegment; ++n) {
        const double ang = kTwoPi * k * n / kMsSegment;
        re += seg[n] * std::cos(ang);
        im -= seg[n] * std::sin(ang);
      }
      power[k] += re * re + im * im;
    }
  }
  std::vector<double> out(kMsBins);
  for (int k = 0; k < kMsBins; ++k)
    out[k] = std::log10(std::max(power[k] / n_seg, kMsFloor));
  return out;
}

double msd(const FeatureSequence& converted, const FeatureSequence& target) {
  require_comparable(converted, target, "msd");
  auto padded_dim = [](const FeatureSequence& f, int d) {
    std::vector<double> traj(std::max(f.t, kMsSegment), 0.0);
    for (int i = 0; i < f.t; ++i) traj[i] = f.at(d, i);
    return traj;
  };
  double sumsq = 0.0;
  std::int64_t count = 0;
  for (int d = 1; d < converted.q; ++d) {
    const auto sc = modulation_spectrum(padded_dim(converted, d));
    const auto st = modulation_spectrum(padded_dim(target, d));
    for (int k = 0; k < kMsBins; ++k) {
      const double diff = 10.0 * (sc[k] - st[k]);
      sumsq += diff * diff;
      ++count;
    }
  }
  return std::sqrt(sumsq / static_cast<double>(count));
}

void write_metric_report(std::ostream& out, const std::vector<UtteranceMetrics>& rows) {
  if (rows.empty()) throw ValidationError("metric report: no rows");
  char buf[128];
  std::vector<double> mcds, msds;
  for (const auto& r : rows) {
    std::snprintf(buf, sizeof buf, "%s,%.6f,%.6f", r.id.c_str(), r.mcd, r.msd);
    out << buf << "\n";
    mcds.push_back(r.mcd);
    msds.push_back(r.msd);
  }
  const MetricSummary sm = summarize(mcds);
  const MetricSummary ss = summarize(msds);
  std::snprintf(buf, sizeof buf, "summary,%.6f±%.6f,%.6f±%.6f", sm.mean, sm.stddev,
                ss.mean, ss.stddev);
  out << buf << "\n";
}

}  // namespace cyclevc
