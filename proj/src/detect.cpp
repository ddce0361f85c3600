#include "drcusum/detect.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <utility>

namespace drcusum {
namespace {

ChangePointEstimate estimate_from(const SlopeChange& c, bool verified) {
  ChangePointEstimate e;
  e.index = c.index;
  e.slope_before = c.slope_before;
  e.slope_after = c.slope_after;
  e.magnitude = c.magnitude;
  e.verified = verified;
  return e;
}

// Sort ascending and collapse runs closer than min_gap, keeping the strongest.
std::vector<ChangePointEstimate> coalesce(std::vector<ChangePointEstimate> pts,
                                          int min_gap) {
  std::sort(pts.begin(), pts.end(),
            [](const auto& a, const auto& b) { return a.index < b.index; });
  std::vector<ChangePointEstimate> out;
  for (const auto& p : pts) {
    if (!out.empty() && p.index - out.back().index < min_gap) {
      if (p.magnitude > out.back().magnitude) out.back() = p;
    } else {
      out.push_back(p);
    }
  }
  return out;
}

nlohmann::json seg_echo(const SegmentationConfig& seg, int n) {
  return {{"smoothing_window", seg.effective_smoothing(n)},
          {"min_gap", seg.effective_min_gap(n)},
          {"penalty_scale", seg.penalty_scale},
          {"min_magnitude", seg.min_magnitude}};
}

struct InitialDetection {
  int t_split = 0;
  CusumSeries cusum;
  std::vector<SlopeChange> candidates;
};

InitialDetection initial_detection(const TimeSeries& series,
                                   const SplitConfig& split,
                                   const RatioProvider& ratios,
                                   const SegmentationConfig& seg, double a_clip,
                                   RandomSource& rng) {
  const int n = series.n();
  InitialDetection d;
  d.t_split = resolve_t_split(split.t_split, n);
  SplitConfig resolved = split;
  resolved.t_split = d.t_split;
  resolved.validate(n);

  RandomSource main_rng = rng.fork(0);
  const Eigen::VectorXd lr = ratios.fn(series.data, 1, d.t_split, main_rng);
  if (lr.size() != n)
    throw std::runtime_error("ratio provider returned " +
                             std::to_string(lr.size()) + " values for " +
                             std::to_string(n) + " samples");
  d.cusum = compute_cusum(lr, d.t_split, a_clip, ratios.source);
  d.candidates = detect_slope_changes(d.cusum, seg, true);
  return d;
}

}  // namespace

int resolve_t_split(int requested, int n) {
  return requested > 0 ? requested : n / 2;
}

RatioProvider make_oracle_ratio_provider(std::vector<SegmentDensity> segments) {
  if (segments.empty())
    throw UsageError("oracle ratio provider needs at least one segment");
  if (segments.front().start != 1)
    throw UsageError("the first segment must start at index 1");
  for (std::size_t i = 1; i < segments.size(); ++i) {
    if (segments[i].start <= segments[i - 1].start)
      throw UsageError("segment starts must be strictly increasing");
    if (segments[i].density.dim() != segments.front().density.dim())
      throw UsageError("all segment densities must share one dimension");
  }

  RatioProvider p;
  p.source = RatioSource::OracleRatio;
  p.config = {{"ratio", "oracle"}, {"segments", segments.size()}};
  p.fn = [segs = std::move(segments)](const Eigen::MatrixXd& window,
                                      int global_start, int t_split,
                                      RandomSource&) {
    const int len = static_cast<int>(window.rows());
    // log pdf of the empirical mixture generating global indices [from, to]
    auto part = [&](int from, int to) {
      std::vector<std::pair<double, const Density*>> comps;  // (log weight, pdf)
      const double total = to - from + 1;
      for (std::size_t i = 0; i < segs.size(); ++i) {
        const int seg_lo = segs[i].start;
        const int seg_hi = i + 1 < segs.size()
                               ? segs[i + 1].start - 1
                               : std::numeric_limits<int>::max();
        const int lo = std::max(from, seg_lo);
        const int hi = std::min(to, seg_hi);
        if (lo <= hi)
          comps.emplace_back(std::log((hi - lo + 1) / total), &segs[i].density);
      }
      return comps;
    };
    const auto left = part(global_start, global_start + t_split - 1);
    const auto right = part(global_start + t_split, global_start + len - 1);
    auto mix_log_pdf = [](const std::vector<std::pair<double, const Density*>>& m,
                          const Eigen::VectorXd& x) {
      double best = -std::numeric_limits<double>::infinity();
      std::vector<double> terms;
      terms.reserve(m.size());
      for (const auto& [lw, dens] : m) {
        terms.push_back(lw + dens->log_pdf(x));
        best = std::max(best, terms.back());
      }
      double acc = 0.0;
      for (double t : terms) acc += std::exp(t - best);
      return best + std::log(acc);
    };
    Eigen::VectorXd out(len);
    for (int t = 0; t < len; ++t) {
      const Eigen::VectorXd x = window.row(t);
      out[t] = mix_log_pdf(left, x) - mix_log_pdf(right, x);
    }
    return out;
  };
  return p;
}

RatioProvider make_dre_ratio_provider(const DreConfig& config) {
  RatioProvider p;
  p.source = RatioSource::EstimatedRatio;
  p.config = dre_config_json(config);
  p.fn = [config](const Eigen::MatrixXd& window, int /*global_start*/,
                  int t_split, RandomSource& rng) {
    const Eigen::Index rows = window.rows();
    TrainResult res = train(config, window.topRows(t_split),
                            window.bottomRows(rows - t_split), rng);
    return res.model->predict_log_batch(window);
  };
  return p;
}

DetectionResult detect_single(const TimeSeries& series, const SplitConfig& split,
                              const RatioProvider& ratios,
                              const SegmentationConfig& seg, double a_clip,
                              RandomSource& rng) {
  const int n = series.n();
  const int gap = seg.effective_min_gap(n);
  InitialDetection d = initial_detection(series, split, ratios, seg, a_clip, rng);

  DetectionResult result;
  result.seed = rng.seed();
  result.cusums.push_back(d.cusum);
  result.config_echo = {{"pipeline", "single"},
                        {"t_split", d.t_split},
                        {"a_clip", a_clip},
                        {"detector", ratios.config},
                        {"segmentation", seg_echo(seg, n)}};

  std::vector<ChangePointEstimate> verified;
  const SlopeChange* strongest = nullptr;
  for (std::size_t i = 0; i < d.candidates.size(); ++i) {
    RandomSource vr = rng.fork(i + 1);
    bool ok = false;
    ChangePointEstimate refined;
    try {
      VerifyResult v =
          verify_change(series, d.candidates[i].index, ratios, seg, a_clip, vr);
      ok = v.verified;
      refined = v.refined;
    } catch (const DataError&) {
      ok = false;  // candidate too close to an edge to retrain on; unverifiable
    }
    if (ok) {
      verified.push_back(refined);
    } else if (!strongest || d.candidates[i].magnitude > strongest->magnitude) {
      strongest = &d.candidates[i];
    }
  }
  result.change_points = coalesce(std::move(verified), gap);
  if (result.change_points.empty() && strongest)
    result.strongest_unverified = estimate_from(*strongest, false);
  return result;
}

DetectionResult detect_multi(const TimeSeries& series, const SplitConfig& split,
                             const RatioProvider& ratios,
                             const SegmentationConfig& seg, double a_clip,
                             RandomSource& rng) {
  const int n = series.n();
  const int gap = seg.effective_min_gap(n);
  InitialDetection d = initial_detection(series, split, ratios, seg, a_clip, rng);

  DetectionResult result;
  result.seed = rng.seed();
  result.cusums.push_back(d.cusum);
  result.config_echo = {{"pipeline", "multi"},
                        {"t_split", d.t_split},
                        {"a_clip", a_clip},
                        {"detector", ratios.config},
                        {"segmentation", seg_echo(seg, n)}};

  std::vector<ChangePointEstimate> kept;
  const SlopeChange* strongest = nullptr;
  for (std::size_t i = 0; i < d.candidates.size(); ++i) {
    const SlopeChange& c = d.candidates[i];
    RandomSource vr = rng.fork(i + 1);
    bool reappeared = false;
    try {
      const int re_split = verification_split(c.index, n, gap);
      const Eigen::VectorXd lr = ratios.fn(series.data, 1, re_split, vr);
      const CusumSeries cs = compute_cusum(lr, re_split, a_clip, ratios.source);
      // The re-split sits on the candidate, so the split-adjacency filter must
      // stay off here or it would erase the very corner being checked. Each of
      // the two runs localizes a corner to within ~min_gap, so their estimates
      // of one change can sit up to twice that apart.
      for (const auto& rc : detect_slope_changes(cs, seg, false)) {
        if (std::abs(rc.index - c.index) <= 2 * gap) {
          reappeared = true;
          break;
        }
      }
    } catch (const DataError&) {
      reappeared = false;
    }
    if (reappeared) {
      kept.push_back(estimate_from(c, true));
    } else if (!strongest || c.magnitude > strongest->magnitude) {
      strongest = &c;
    }
  }
  result.change_points = coalesce(std::move(kept), gap);
  if (result.change_points.empty() && strongest)
    result.strongest_unverified = estimate_from(*strongest, false);
  return result;
}

DetectionResult ensemble_detect(const TimeSeries& series, const EnsembleConfig& cfg,
                                const RatioProvider& ratios,
                                const SegmentationConfig& seg, double a_clip,
                                RandomSource& rng) {
  const int n = series.n();
  const int gap = seg.effective_min_gap(n);
  std::vector<int> splits = cfg.split_points;
  if (splits.empty()) splits = {n / 4, n / 2, 3 * n / 4};
  const int r = static_cast<int>(splits.size());
  if (r < 2) throw UsageError("ensemble needs at least 2 split points");
  for (int s : splits)
    if (s < 2 || s > n - 1)
      throw UsageError("split point " + std::to_string(s) +
                       " is not interior to a series of length " +
                       std::to_string(n));
  const int tol = cfg.vote_tolerance > 0 ? cfg.vote_tolerance : gap;
  const int threshold = cfg.vote_threshold > 0 ? cfg.vote_threshold : (r + 1) / 2;

  struct Member {
    ChangePointEstimate est;
    int split_id;
  };
  std::vector<Member> members;
  DetectionResult result;
  result.seed = rng.seed();
  for (int i = 0; i < r; ++i) {
    SplitConfig sc;
    sc.t_split = splits[i];
    RandomSource sr = rng.fork(i);
    DetectionResult one = detect_multi(series, sc, ratios, seg, a_clip, sr);
    for (const auto& e : one.change_points) members.push_back({e, i});
    result.cusums.push_back(std::move(one.cusums.front()));
  }
  std::sort(members.begin(), members.end(), [](const auto& a, const auto& b) {
    return a.est.index < b.est.index;
  });

  struct Cluster {
    std::vector<Member> members;
    double score = 0.0;
    int votes = 0;
  };
  std::vector<Cluster> clusters;
  for (const auto& m : members) {
    if (clusters.empty() ||
        m.est.index - clusters.back().members.back().est.index > tol)
      clusters.emplace_back();
    clusters.back().members.push_back(m);
  }
  for (auto& c : clusters) {
    std::vector<int> ids;
    for (const auto& m : c.members) {
      c.score += m.est.magnitude;
      ids.push_back(m.split_id);
    }
    std::sort(ids.begin(), ids.end());
    c.votes = static_cast<int>(std::unique(ids.begin(), ids.end()) - ids.begin());
  }

  double median_score = 0.0;
  if (cfg.strategy == VoteStrategy::WeightedSum && !clusters.empty()) {
    std::vector<double> scores;
    for (const auto& c : clusters) scores.push_back(c.score);
    auto mid = scores.begin() + (scores.size() - 1) / 2;
    std::nth_element(scores.begin(), mid, scores.end());
    median_score = *mid;
  }

  std::vector<ChangePointEstimate> kept;
  for (const auto& c : clusters) {
    const bool keep = cfg.strategy == VoteStrategy::MajorityVote
                          ? c.votes >= threshold
                          : c.score >= median_score;
    if (!keep) continue;
    double sum_idx = 0.0;
    const Member* best = &c.members.front();
    for (const auto& m : c.members) {
      sum_idx += m.est.index;
      if (m.est.magnitude > best->est.magnitude) best = &m;
    }
    ChangePointEstimate e = best->est;
    e.index = static_cast<int>(std::llround(sum_idx / c.members.size()));
    e.verified = true;
    kept.push_back(e);
  }
  result.change_points = coalesce(std::move(kept), gap);
  result.config_echo = {{"pipeline", "ensemble"},
                        {"splits", splits},
                        {"strategy", cfg.strategy == VoteStrategy::MajorityVote
                                         ? "majority_vote"
                                         : "weighted_sum"},
                        {"vote_tolerance", tol},
                        {"vote_threshold", threshold},
                        {"a_clip", a_clip},
                        {"detector", ratios.config},
                        {"segmentation", seg_echo(seg, n)}};
  return result;
}

std::vector<DetectionResult> online_detect(const TimeSeries& series,
                                           const OnlineConfig& cfg,
                                           const RatioProvider& ratios,
                                           const SegmentationConfig& seg,
                                           double a_clip, RandomSource& rng) {
  const int n = series.n();
  const int len = cfg.window_len;
  if (len < 1) throw UsageError("window_len must be positive");
  const int gap = seg.effective_min_gap(len);
  if (len < 4 * gap)
    throw UsageError("window_len " + std::to_string(len) +
                     " is shorter than 4*min_gap = " + std::to_string(4 * gap));
  const int stride = cfg.stride > 0 ? cfg.stride : len / 2;
  if (stride < 1) throw UsageError("stride must be positive");

  std::vector<DetectionResult> out;
  if (n < len) return out;  // stream too short: nothing to analyze, not an error

  std::vector<int> reported;
  int start = 1;
  int analysis = 0;
  while (start + len - 1 <= n) {
    TimeSeries window(series.data.middleRows(start - 1, len));
    RandomSource wr = rng.fork(analysis);
    SplitConfig sc;  // midpoint split within the window
    DetectionResult local = detect_multi(window, sc, ratios, seg, a_clip, wr);

    int latest = -1;
    DetectionResult emit;
    emit.seed = rng.seed();
    emit.cusums = std::move(local.cusums);
    emit.config_echo = std::move(local.config_echo);
    emit.config_echo["pipeline"] = "online";
    emit.config_echo["window_start"] = start;
    emit.config_echo["window_end"] = start + len - 1;
    emit.config_echo["mode"] =
        cfg.mode == WindowMode::FixedWindow ? "fixed" : "adaptive";
    for (ChangePointEstimate e : local.change_points) {
      e.index += start - 1;
      latest = std::max(latest, e.index);
      // Two windows localize one change to within ~min_gap each, so their
      // global estimates can sit up to twice that apart.
      bool duplicate = false;
      for (int seen : reported)
        if (std::abs(e.index - seen) <= 2 * gap) {
          duplicate = true;
          break;
        }
      if (!duplicate) {
        reported.push_back(e.index);
        emit.change_points.push_back(e);
      }
    }
    if (!emit.change_points.empty()) out.push_back(std::move(emit));
    ++analysis;
    if (cfg.mode == WindowMode::AdaptiveWindow && latest > 0)
      start = latest + 1;  // drop everything up to the newest change
    else
      start += stride;
  }
  return out;
}

}  // namespace drcusum
