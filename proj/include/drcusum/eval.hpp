#pragma once

#include "drcusum/detect.hpp"
#include "drcusum/distributions.hpp"

#include <nlohmann/json.hpp>

#include <cstdint>
#include <string>
#include <vector>

namespace drcusum {

struct MeanRange {
  double low = 0.0;
  double high = 0.0;
};

enum class CovarianceKind { Identity, DiagonalFromSigmaRange };

// Recipe for a piecewise-stationary Gaussian series: per-segment mean vectors
// drawn once from their ranges, then i.i.d. samples within segments. The
// covariance is shared by all segments; DiagonalFromSigmaRange draws one
// standard deviation per coordinate from [sigma_low, sigma_high].
struct SyntheticSpec {
  int d = 0;
  std::vector<int> segment_bounds;   // ascending, last entry = n
  std::vector<MeanRange> mean_ranges;  // one per segment
  CovarianceKind covariance = CovarianceKind::Identity;
  double sigma_low = 1.0;
  double sigma_high = 1.0;
  std::uint64_t seed = 0;

  int n() const { return segment_bounds.empty() ? 0 : segment_bounds.back(); }
  void validate() const;  // throws UsageError on a malformed recipe
};

// Benchmark recipes. Change indices follow the convention that x_c is the
// first sample of the new segment.
SyntheticSpec fig2b_spec();            // 10-dim, n=500, change at 150
SyntheticSpec fig3b_spec();            // 10-dim, n=600, changes at 150, 450
SyntheticSpec fig5a_spec(int t_star);  // 10-dim, n=1000, change near the edge
SyntheticSpec table1_spec();           // 50-dim, n=2000, 7 changes

struct SyntheticData {
  TimeSeries series;
  GroundTruth truth;
  std::vector<SegmentDensity> segments;  // the drawn generating laws
};

SyntheticData generate_synthetic(const SyntheticSpec& spec, RandomSource& rng);
// Convenience: seeds the rng from spec.seed.
SyntheticData generate_synthetic(const SyntheticSpec& spec);

// Mean-shift sweep: mu1 ~ Unif[-1,1]^10, mu2 = mu1 + delta_mu on every
// coordinate, change at 350 of 1000, identity covariance.
SyntheticData generate_fig5b(double delta_mu, RandomSource& rng);

struct ConfusionCounts {
  int tp = 0;
  int fp = 0;
  int fn = 0;
  int tn = 0;
  int tolerance = 0;
};

// Scoring tolerance when none is given: max(5, ceil(0.02 n)).
int default_delta(int n);

// Greedy one-to-one matching in ascending index order: an estimate within
// delta of a still-unmatched true change is a TP (nearest truth wins), other
// estimates are FPs, unmatched truths are FNs. Negatives are the instants
// not within delta of any truth, so tn = n - |union of truth windows| - fp.
ConfusionCounts match_detections(const std::vector<int>& estimates,
                                 const GroundTruth& truth, int delta, int n);

struct Metrics {
  double far = 0.0;  // fp / (fp + tn), 0 when the denominator is 0
  double mdr = 0.0;  // fn / (fn + tp), same convention
};

Metrics far_mdr(const ConfusionCounts& counts);

struct AccuracyRow {
  double beta = 0.0;
  double alpha = 0.0;       // deviation bound claimed for this beta
  double exceedance = 0.0;  // empirical P[|est - t_star| >= alpha]
  double a_bound = 0.0;
  double c_min = 0.0;
  int trials = 0;
};

// Monte-Carlo check of the deviation bound: per trial, sample a series with
// one change at t_star, clip the exact log-ratios at a_clip, take the argmax
// estimate, and record |est - t_star|. Each row compares the empirical
// exceedance against its beta; the bound is loose, so exceedances sit near 0.
// c_min is estimated once by Monte Carlo from the slope closed forms.
std::vector<AccuracyRow> empirical_accuracy(const GaussianSpec& p1,
                                            const GaussianSpec& p2, int n,
                                            int t_star, int t_split, int trials,
                                            const std::vector<double>& betas,
                                            double a_clip, RandomSource& rng);

// Builds a SyntheticSpec from its JSON object form, the same schema the
// experiment config uses under generator.spec: {d, segment_bounds,
// mean_ranges: [[low,high],...], covariance: "identity"|"diagonal",
// sigma_range: [low,high]}. Schema problems raise DataError with the
// offending key's path appended to path_prefix.
SyntheticSpec synthetic_spec_from_json(const nlohmann::json& j,
                                       const std::string& path_prefix);

// Batch harness: reads a JSON config listing generator + detector + scorer
// combos with seed lists, runs them, and returns the report (per-seed counts
// and metrics plus mean/min/max aggregates). Schema problems raise DataError
// naming the offending key's path. With output_dir set, writes one CUSUM CSV
// per analyzed split per seed.
nlohmann::json run_experiment(const std::string& config_path);

}  // namespace drcusum
