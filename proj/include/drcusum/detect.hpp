#pragma once

#include "drcusum/cusum.hpp"
#include "drcusum/distributions.hpp"
#include "drcusum/dre.hpp"

#include <optional>
#include <vector>

namespace drcusum {

// 0 means "pick for me": the midpoint split.
int resolve_t_split(int requested, int n);

// Ground-truth generating law of one stretch of a series: `density` governs
// samples from index `start` (1-based, inclusive) until the next segment.
struct SegmentDensity {
  int start = 1;
  Density density;
};

// Oracle log-ratios: for a window the provider forms the exact P_left/P_right
// mixtures implied by how much of each segment falls on each side of the split,
// then evaluates log(p_left/p_right) pointwise. This is the quantity the
// learned estimators approximate.
RatioProvider make_oracle_ratio_provider(std::vector<SegmentDensity> segments);

// Learned log-ratios: trains a fresh model on the window's two sides at every
// call (detection, then once more per verification re-split).
RatioProvider make_dre_ratio_provider(const DreConfig& config);

struct DetectionResult {
  std::vector<ChangePointEstimate> change_points;  // ascending, gaps >= min_gap
  std::vector<CusumSeries> cusums;  // one per split analyzed
  // Diagnostic when nothing verified: the best candidate that failed.
  std::optional<ChangePointEstimate> strongest_unverified;
  nlohmann::json config_echo;
  std::uint64_t seed = 0;
};

enum class VoteStrategy { MajorityVote, WeightedSum };

struct EnsembleConfig {
  std::vector<int> split_points;  // empty = {n/4, n/2, 3n/4}
  VoteStrategy strategy = VoteStrategy::MajorityVote;
  int vote_tolerance = 0;  // 0 = min_gap
  int vote_threshold = 0;  // 0 = ceil(r/2)
};

enum class WindowMode { FixedWindow, AdaptiveWindow };

struct OnlineConfig {
  int window_len = 0;
  int stride = 0;  // 0 = window_len/2
  WindowMode mode = WindowMode::FixedWindow;
};

// Single change point: train at t_split, list slope changes of the statistic,
// re-split at each candidate and keep those where the moved-split statistic
// shows exactly one interior break at its argmax. Returned estimates are the
// re-split argmaxes (the re-run's own location estimate).
DetectionResult detect_single(const TimeSeries& series, const SplitConfig& split,
                              const RatioProvider& ratios,
                              const SegmentationConfig& seg, double a_clip,
                              RandomSource& rng);

// Multiple change points from one split: every slope change is a candidate;
// a candidate is kept when it reappears (within twice min_gap, since both
// runs localize only to about min_gap) among the slope changes of its own
// re-split run.
DetectionResult detect_multi(const TimeSeries& series, const SplitConfig& split,
                             const RatioProvider& ratios,
                             const SegmentationConfig& seg, double a_clip,
                             RandomSource& rng);

// Runs detect_multi once per split, clusters candidates across splits within
// vote_tolerance, and keeps clusters by vote count (MajorityVote) or by total
// slope-change magnitude above the median cluster score (WeightedSum). Cluster
// centroids are reported, rounded to the nearest index.
DetectionResult ensemble_detect(const TimeSeries& series, const EnsembleConfig& cfg,
                                const RatioProvider& ratios,
                                const SegmentationConfig& seg, double a_clip,
                                RandomSource& rng);

// Windowed detection over a stream. FixedWindow advances by stride; Adaptive
// restarts the window right after the latest verified change. Indices in the
// results are global; a change re-detected by an overlapping window (within
// twice min_gap of an already-reported one) is reported only on first
// emission, and windows with nothing new emit nothing.
std::vector<DetectionResult> online_detect(const TimeSeries& series,
                                           const OnlineConfig& cfg,
                                           const RatioProvider& ratios,
                                           const SegmentationConfig& seg,
                                           double a_clip, RandomSource& rng);

}  // namespace drcusum
