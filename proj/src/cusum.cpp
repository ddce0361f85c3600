#include "drcusum/cusum.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace drcusum {

namespace {

struct LineFit {
  double slope = 0.0;
  double intercept = 0.0;
  double sse = 0.0;
};

// Least-squares line over y[l..r] (0-based, inclusive) against x = l..r.
// Centered accumulation keeps the SSE exact enough for the zero tests.
LineFit fit_line(const Eigen::VectorXd& y, int l, int r) {
  const int m = r - l + 1;
  LineFit f;
  if (m <= 1) {
    f.intercept = m == 1 ? y[l] : 0.0;
    return f;
  }
  const double x_mean = 0.5 * (l + r);
  double y_mean = 0.0;
  for (int i = l; i <= r; ++i) y_mean += y[i];
  y_mean /= m;
  double sxx = 0.0, sxy = 0.0;
  for (int i = l; i <= r; ++i) {
    const double dx = i - x_mean;
    sxx += dx * dx;
    sxy += dx * (y[i] - y_mean);
  }
  f.slope = sxy / sxx;
  f.intercept = y_mean - f.slope * x_mean;
  double sse = 0.0;
  for (int i = l; i <= r; ++i) {
    const double res = y[i] - (f.intercept + f.slope * i);
    sse += res * res;
  }
  f.sse = sse;
  return f;
}

Eigen::VectorXd moving_average(const Eigen::VectorXd& y, int window) {
  if (window <= 1) return y;
  const int n = static_cast<int>(y.size());
  const int h = window / 2;
  Eigen::VectorXd out(n);
  Eigen::VectorXd prefix(n + 1);
  prefix[0] = 0.0;
  for (int i = 0; i < n; ++i) prefix[i + 1] = prefix[i] + y[i];
  for (int i = 0; i < n; ++i) {
    const int a = std::max(0, i - h);
    const int b = std::min(n - 1, i + h);
    out[i] = (prefix[b + 1] - prefix[a]) / (b - a + 1);
  }
  return out;
}

// Local slope around a 1-based index over a min_gap-sized window on one side.
double side_slope(const Eigen::VectorXd& y, int idx0, int gap, bool before) {
  const int n = static_cast<int>(y.size());
  int l, r;
  if (before) {
    r = idx0;
    l = std::max(0, idx0 - gap + 1);
  } else {
    l = idx0;
    r = std::min(n - 1, idx0 + gap - 1);
  }
  if (r - l < 1) return 0.0;
  return fit_line(y, l, r).slope;
}

}  // namespace

CusumSeries compute_cusum(const Eigen::VectorXd& log_ratios, int t_split,
                          double a_clip, RatioSource source) {
  if (!log_ratios.allFinite()) {
    throw std::invalid_argument("compute_cusum: non-finite log-ratio");
  }
  if (a_clip <= 0.0) {
    throw std::invalid_argument("compute_cusum: a_clip must be positive");
  }
  CusumSeries s;
  s.source = source;
  s.t_split = t_split;
  s.values.resize(log_ratios.size());
  double acc = 0.0;
  for (int i = 0; i < log_ratios.size(); ++i) {
    acc += std::clamp(log_ratios[i], -a_clip, a_clip);
    s.values[i] = acc;
  }
  return s;
}

ArgmaxResult argmax_estimator(const CusumSeries& series,
                              const SegmentationConfig& config) {
  const int n = series.n();
  if (n < 1) {
    throw std::invalid_argument("argmax_estimator: empty series");
  }
  int best = 0;
  for (int i = 1; i < n; ++i) {
    if (series.values[i] > series.values[best]) best = i;
  }
  const int gap = config.effective_min_gap(n);
  ArgmaxResult r;
  r.estimate.index = best + 1;
  r.estimate.slope_before = side_slope(series.values, best, gap, true);
  r.estimate.slope_after = side_slope(series.values, best, gap, false);
  r.estimate.magnitude =
      std::abs(r.estimate.slope_after - r.estimate.slope_before);
  r.degenerate = (best == 0 || best == n - 1);
  return r;
}

namespace {

struct Segment {
  int l = 0;  // 0-based inclusive
  int r = 0;
  double sse = 0.0;
};

// Greedy bottom-up merge on the smoothed series; returns 0-based boundary
// positions (last index of each segment except the final one).
std::vector<int> merge_segments(const Eigen::VectorXd& ys, int gap,
                                double threshold) {
  const int n = static_cast<int>(ys.size());
  std::vector<Segment> segs;
  for (int start = 0; start < n; start += gap) {
    Segment s;
    s.l = start;
    s.r = std::min(n - 1, start + gap - 1);
    if (n - 1 - s.r < gap) s.r = n - 1;  // final block absorbs the remainder
    s.sse = fit_line(ys, s.l, s.r).sse;
    segs.push_back(s);
    if (s.r == n - 1) break;
  }
  while (segs.size() > 1) {
    double best_delta = std::numeric_limits<double>::infinity();
    std::size_t best_i = 0;
    double best_sse = 0.0;
    for (std::size_t i = 0; i + 1 < segs.size(); ++i) {
      const double merged = fit_line(ys, segs[i].l, segs[i + 1].r).sse;
      const double delta = merged - segs[i].sse - segs[i + 1].sse;
      if (delta < best_delta) {
        best_delta = delta;
        best_i = i;
        best_sse = merged;
      }
    }
    if (best_delta > threshold) break;
    segs[best_i].r = segs[best_i + 1].r;
    segs[best_i].sse = best_sse;
    segs.erase(segs.begin() + best_i + 1);
  }
  std::vector<int> boundaries;
  for (std::size_t i = 0; i + 1 < segs.size(); ++i) {
    boundaries.push_back(segs[i].r);
  }
  return boundaries;
}

// Re-places boundary b (0-based) on the raw series within +/- radius by
// minimizing the SSE of two lines that share the corner sample. An exact
// piecewise-linear corner gives SSE 0 only at the true corner.
int refine_boundary(const Eigen::VectorXd& y, int left_end, int right_end,
                    int b, int radius) {
  const int lo = std::max(left_end + 1, b - radius);
  const int hi = std::min(right_end - 1, b + radius);
  int best = b;
  // Seeding with the incumbent cost keeps b on ties instead of drifting.
  double best_cost =
      fit_line(y, left_end, b).sse + fit_line(y, b, right_end).sse;
  for (int c = lo; c <= hi; ++c) {
    const double cost =
        fit_line(y, left_end, c).sse + fit_line(y, c, right_end).sse;
    if (cost < best_cost - 1e-15 * (1.0 + best_cost)) {
      best_cost = cost;
      best = c;
    }
  }
  return best;
}

}  // namespace

std::vector<SlopeChange> detect_slope_changes(const CusumSeries& series,
                                              const SegmentationConfig& config,
                                              bool filter_t_split) {
  const int n = series.n();
  const int gap = config.effective_min_gap(n);
  if (n < 3 * gap) {
    throw std::invalid_argument("detect_slope_changes: series too short (" +
                                std::to_string(n) + " < 3*min_gap)");
  }
  const int smooth = config.effective_smoothing(n);
  const Eigen::VectorXd ys = moving_average(series.values, smooth);

  const double global_sse = fit_line(ys, 0, n - 1).sse;
  const double sigma_sq = global_sse / n;
  // The tiny floor absorbs floating-point residue so exactly-collinear
  // segments always merge.
  const double floor = 1e-9 * (1.0 + ys.squaredNorm() / n);
  const double threshold =
      config.penalty_scale * sigma_sq * std::log(static_cast<double>(n)) + floor;

  std::vector<int> bounds = merge_segments(ys, gap, threshold);
  if (bounds.empty()) return {};

  // Refinement on the raw series; radius covers the grid quantization plus the
  // smoothing blur.
  const int radius = gap + smooth / 2;
  const auto& y = series.values;
  for (std::size_t i = 0; i < bounds.size(); ++i) {
    const int left_end = i == 0 ? 0 : bounds[i - 1];
    const int right_end = i + 1 < bounds.size() ? bounds[i + 1] : n - 1;
    bounds[i] = refine_boundary(y, left_end, right_end, bounds[i], radius);
  }

  // Refinement can pull neighbors together; drop the boundary whose removal
  // costs less until all gaps are >= min_gap again.
  auto removal_cost = [&](std::size_t i) {
    const int left_end = i == 0 ? 0 : bounds[i - 1];
    const int right_end = i + 1 < bounds.size() ? bounds[i + 1] : n - 1;
    const double joined = fit_line(y, left_end, right_end).sse;
    const double split =
        fit_line(y, left_end, bounds[i]).sse + fit_line(y, bounds[i], right_end).sse;
    return joined - split;
  };
  bool changed = true;
  while (changed && bounds.size() > 1) {
    changed = false;
    for (std::size_t i = 0; i + 1 < bounds.size(); ++i) {
      if (bounds[i + 1] - bounds[i] < gap) {
        bounds.erase(bounds.begin() +
                     (removal_cost(i) <= removal_cost(i + 1) ? i : i + 1));
        changed = true;
        break;
      }
    }
  }

  // Slopes from the raw series over the final segments (corners shared).
  std::vector<SlopeChange> out;
  std::vector<double> slopes;
  std::vector<int> seg_len;
  double inc_sse = 0.0;
  int inc_count = 0;
  for (std::size_t i = 0; i <= bounds.size(); ++i) {
    const int l = i == 0 ? 0 : bounds[i - 1];
    const int r = i < bounds.size() ? bounds[i] : n - 1;
    slopes.push_back(fit_line(y, l, r).slope);
    seg_len.push_back(std::max(1, r - l));
    double mean = 0.0;
    for (int t = l + 1; t <= r; ++t) mean += y[t] - y[t - 1];
    if (r > l) mean /= (r - l);
    for (int t = l + 1; t <= r; ++t) {
      const double d = y[t] - y[t - 1] - mean;
      inc_sse += d * d;
    }
    inc_count += r - l;
  }
  // A segment's slope is (up to least-squares weighting) the mean of its
  // increments, so a corner is a two-sample mean difference. The automatic
  // floor keeps only corners that clear three standard errors of the pooled
  // increment noise; it is what separates real slope changes from the random
  // walk a changeless window produces.
  const int dof = inc_count - static_cast<int>(bounds.size()) - 1;
  const double inc_sd = dof > 0 ? std::sqrt(inc_sse / dof) : 0.0;
  for (std::size_t i = 0; i < bounds.size(); ++i) {
    SlopeChange c;
    c.index = bounds[i] + 1;  // back to 1-based
    c.slope_before = slopes[i];
    c.slope_after = slopes[i + 1];
    c.magnitude = std::abs(c.slope_after - c.slope_before);
    if (c.magnitude <= 0.0) continue;
    if (config.min_magnitude > 0.0) {
      if (c.magnitude < config.min_magnitude) continue;
    } else {
      const double se =
          inc_sd * std::sqrt(1.0 / seg_len[i] + 1.0 / seg_len[i + 1]);
      if (c.magnitude < 3.0 * se) continue;
    }
    if (c.index <= 1 || c.index >= n) continue;
    out.push_back(c);
  }

  // Boundary-proximity filter: near-edge and near-split breakpoints are kept
  // unless an interior breakpoint at least as strong exists (the split itself
  // commonly shows up as a spurious slope change).
  auto near = [&](const SlopeChange& c) {
    if (c.index - 1 <= gap || n - c.index <= gap) return true;
    if (filter_t_split && std::abs(c.index - series.t_split) <= gap) return true;
    return false;
  };
  double strongest_interior = 0.0;
  for (const auto& c : out) {
    if (!near(c)) strongest_interior = std::max(strongest_interior, c.magnitude);
  }
  std::vector<SlopeChange> kept;
  for (const auto& c : out) {
    if (near(c) && strongest_interior >= c.magnitude) continue;
    kept.push_back(c);
  }
  return kept;
}

int verification_split(int candidate, int n, int min_gap) {
  int t_split = candidate;
  if (t_split == n / 2) {
    t_split = (t_split + min_gap <= n - 1) ? t_split + min_gap : t_split - min_gap;
  }
  return std::clamp(t_split, 2, n - 1);
}

VerifyResult verify_change(const TimeSeries& series, int candidate,
                           const RatioProvider& ratios,
                           const SegmentationConfig& seg, double a_clip,
                           RandomSource& rng) {
  const int n = series.n();
  const int gap = seg.effective_min_gap(n);
  if (candidate <= 1 || candidate >= n) {
    throw std::invalid_argument("verify_change: candidate must be interior");
  }
  const int t_split = verification_split(candidate, n, gap);

  const Eigen::VectorXd lr = ratios.fn(series.data, 1, t_split, rng);
  VerifyResult v;
  v.cusum = compute_cusum(lr, t_split, a_clip, ratios.source);

  const auto changes = detect_slope_changes(v.cusum, seg, false);
  std::vector<SlopeChange> interior;
  for (const auto& c : changes) {
    if (c.index - 1 > gap && n - c.index > gap) interior.push_back(c);
  }
  const ArgmaxResult am = argmax_estimator(v.cusum, seg);
  v.refined = am.estimate;
  v.verified = !am.degenerate && interior.size() == 1 &&
               std::abs(interior[0].index - am.estimate.index) <= gap;
  v.refined.verified = v.verified;
  return v;
}

}  // namespace drcusum
