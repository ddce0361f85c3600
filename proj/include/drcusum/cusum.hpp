#pragma once

#include "drcusum/core.hpp"

#include <nlohmann/json.hpp>

#include <functional>
#include <vector>

namespace drcusum {

enum class RatioSource { OracleRatio, EstimatedRatio };

struct CusumSeries {
  Eigen::VectorXd values;  // values[t-1] = S(t) = sum of the first t log-ratios
  RatioSource source = RatioSource::OracleRatio;
  int t_split = 0;

  int n() const { return static_cast<int>(values.size()); }
  double at(int t) const { return values[t - 1]; }
};

// S(t) = sum_{j<=t} clip(log_ratio_j, +/- a_clip). The clip bound doubles as
// the accuracy theorem's A when empirical accuracy is evaluated.
CusumSeries compute_cusum(const Eigen::VectorXd& log_ratios, int t_split,
                          double a_clip = 10.0,
                          RatioSource source = RatioSource::OracleRatio);

struct SlopeChange {
  int index = 0;
  double slope_before = 0.0;
  double slope_after = 0.0;
  double magnitude = 0.0;
};

struct SegmentationConfig {
  // 0 means "derive from n": smoothing max(5, n/100), min_gap max(2, n/50).
  int smoothing_window = 0;
  int min_gap = 0;
  double penalty_scale = 1.0;
  double min_magnitude = 0.0;  // 0 = automatic floor from increment noise

  int effective_smoothing(int n) const {
    return smoothing_window > 0 ? smoothing_window : std::max(5, n / 100);
  }
  int effective_min_gap(int n) const {
    return min_gap > 0 ? min_gap : std::max(2, n / 50);
  }
};

struct ArgmaxResult {
  ChangePointEstimate estimate;
  bool degenerate = false;  // maximum sits on the boundary, no interior peak
};

// Smallest index attaining the maximum of S; slopes from least-squares fits
// over min_gap-sized windows on each side.
ArgmaxResult argmax_estimator(const CusumSeries& series,
                              const SegmentationConfig& config = {});

// Breakpoints of a bottom-up piecewise-linear fit of S. Segments start at
// min_gap length and merge greedily by smallest SSE increase until the next
// merge would cost more than penalty_scale * sigma^2 * ln(n), where sigma^2 is
// the residual variance of a single global line. Merging runs on a smoothed
// copy; accepted boundaries are then re-placed on the raw series by minimizing
// the two-segment SSE, which recovers exact corners exactly. Breakpoints within
// min_gap of 1, n, or t_split are dropped only when an interior breakpoint of
// equal or larger magnitude exists (filter_t_split=false skips the t_split part,
// used by verification re-splits where the split sits on the candidate itself).
std::vector<SlopeChange> detect_slope_changes(const CusumSeries& series,
                                              const SegmentationConfig& config,
                                              bool filter_t_split = true);

// Per-step log-ratios for `window` (rows are consecutive samples; the first row
// has global time index global_start), split after local index t_split. The
// estimated flavor trains a model on the two sides; the oracle flavor evaluates
// known densities.
struct RatioProvider {
  RatioSource source = RatioSource::EstimatedRatio;
  std::function<Eigen::VectorXd(const Eigen::MatrixXd& window, int global_start,
                                int t_split, RandomSource& rng)>
      fn;
  nlohmann::json config = nlohmann::json::object();  // echoed into results
};

// Split index used when re-running detection at a candidate: the candidate
// itself, nudged by min_gap if it coincides with floor(n/2), clamped interior.
int verification_split(int candidate, int n, int min_gap);

struct VerifyResult {
  bool verified = false;
  ChangePointEstimate refined;
  CusumSeries cusum;
};

// Re-runs detection with the split moved onto the candidate: a true change
// survives the move, a split artifact does not. verified means the re-split
// statistic has exactly one interior breakpoint and it lies within min_gap of
// the new argmax. When the candidate coincides with n/2 the new split is offset
// by min_gap so the re-split is informative.
VerifyResult verify_change(const TimeSeries& series, int candidate,
                           const RatioProvider& ratios,
                           const SegmentationConfig& seg, double a_clip,
                           RandomSource& rng);

}  // namespace drcusum
