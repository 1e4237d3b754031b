#pragma once

#include <iosfwd>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "cyclevc/features.hpp"

namespace cyclevc {

// Modulation-spectrum analysis parameters. These are fixed conventions: the
// absolute MSD numbers depend on them, comparisons do not.
inline constexpr int kMsSegment = 64;      // frames per segment
inline constexpr int kMsHop = 32;          // 50% overlap
inline constexpr int kMsBins = 33;         // one-sided, DC..Nyquist
inline constexpr double kMsFloor = 1e-10;  // power floor before log10

// Monotone alignment: starts at (0,0), ends at (Tc-1, Tt-1), steps in
// {(1,0),(0,1),(1,1)}.
struct AlignmentPath {
  std::vector<std::pair<int, int>> steps;
};

struct MetricSummary {
  double mean = 0.0;
  double stddev = 0.0;  // population
  std::vector<double> per_utterance;
};

// (10/ln10) * sqrt(2 * sum((c_d - t_d)^2)) in dB over coefficient vectors
// that exclude the 0th (energy) dimension.
double mcd_frame(std::span<const double> c, std::span<const double> t);

// Exact dynamic-programming alignment minimizing summed Euclidean cost over
// dimensions 1..Q-1. Ties prefer the diagonal step.
AlignmentPath dtw_align(const FeatureSequence& converted,
                        const FeatureSequence& target);

// Mean of mcd_frame along the DTW path.
double mcd_utterance(const FeatureSequence& converted, const FeatureSequence& target);

MetricSummary summarize(const std::vector<double>& values);

// log10 average segment power per modulation-frequency bin (kMsBins values).
// Segments are Hann-windowed with 50% overlap; requires T >= kMsSegment.
std::vector<double> modulation_spectrum(std::span<const double> traj);

// RMSE between the dB-scaled (10*log10) modulation spectra, over dimensions
// 1..Q-1 and all bins. Trajectories shorter than one segment are zero-padded.
double msd(const FeatureSequence& converted, const FeatureSequence& target);

struct UtteranceMetrics {
  std::string id;
  double mcd = 0.0;
  double msd = 0.0;
};

// Per-utterance rows then a summary row mirroring the mean+-std presentation.
void write_metric_report(std::ostream& out, const std::vector<UtteranceMetrics>& rows);

}  // namespace cyclevc
