#include "drcusum/eval.hpp"

#include "drcusum/io.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace drcusum {

void SyntheticSpec::validate() const {
  if (d < 1) throw UsageError("synthetic spec: dimension must be positive");
  if (segment_bounds.empty()) {
    throw UsageError("synthetic spec: segment_bounds is empty");
  }
  for (std::size_t i = 0; i < segment_bounds.size(); ++i) {
    if (segment_bounds[i] < 1) {
      throw UsageError("synthetic spec: segment bounds must be positive");
    }
    if (i > 0 && segment_bounds[i] <= segment_bounds[i - 1]) {
      throw UsageError("synthetic spec: segment bounds must be ascending");
    }
  }
  // Every bound except the last is a change index, and a change marks the
  // first sample of a new segment, so it cannot be the first sample overall.
  if (segment_bounds.size() > 1 && segment_bounds.front() < 2) {
    throw UsageError("synthetic spec: first change must be at index 2 or later");
  }
  if (mean_ranges.size() != segment_bounds.size()) {
    throw UsageError("synthetic spec: need one mean range per segment (" +
                     std::to_string(mean_ranges.size()) + " ranges, " +
                     std::to_string(segment_bounds.size()) + " segments)");
  }
  for (const auto& r : mean_ranges) {
    if (!(r.low <= r.high)) {
      throw UsageError("synthetic spec: mean range low must not exceed high");
    }
  }
  if (covariance == CovarianceKind::DiagonalFromSigmaRange) {
    if (!(sigma_low > 0.0) || !(sigma_low <= sigma_high)) {
      throw UsageError("synthetic spec: sigma range must satisfy 0 < low <= high");
    }
  }
}

SyntheticSpec fig2b_spec() {
  SyntheticSpec s;
  s.d = 10;
  s.segment_bounds = {150, 500};
  s.mean_ranges = {{0.0, 0.4}, {0.6, 1.0}};
  return s;
}

SyntheticSpec fig3b_spec() {
  SyntheticSpec s;
  s.d = 10;
  s.segment_bounds = {150, 450, 600};
  s.mean_ranges = {{0.0, 0.4}, {0.6, 1.0}, {1.6, 2.0}};
  return s;
}

SyntheticSpec fig5a_spec(int t_star) {
  SyntheticSpec s;
  s.d = 10;
  s.segment_bounds = {t_star, 1000};
  s.mean_ranges = {{-1.0, 1.0}, {-2.0, 2.0}};
  return s;
}

SyntheticSpec table1_spec() {
  SyntheticSpec s;
  s.d = 50;
  s.segment_bounds = {150, 200, 450, 525, 700, 725, 1200, 2000};
  s.mean_ranges = {{-1.0, 1.0}, {-2.0, 2.0},   {-3.0, 3.0},   {-4.0, 4.0},
                   {-3.0, 3.0}, {-10.0, 10.0}, {-20.0, 20.0}, {-1.0, 1.0}};
  s.covariance = CovarianceKind::DiagonalFromSigmaRange;
  s.sigma_low = 1.0;
  s.sigma_high = 3.0;
  return s;
}

SyntheticData generate_synthetic(const SyntheticSpec& spec, RandomSource& rng) {
  spec.validate();
  const int n = spec.n();
  const int d = spec.d;
  const int k = static_cast<int>(spec.segment_bounds.size());

  // Draw order is part of the contract: shared sigmas first, then the
  // per-segment means, then samples in time order.
  Eigen::VectorXd sigma = Eigen::VectorXd::Ones(d);
  if (spec.covariance == CovarianceKind::DiagonalFromSigmaRange) {
    for (int j = 0; j < d; ++j) sigma[j] = rng.uniform(spec.sigma_low, spec.sigma_high);
  }
  std::vector<Eigen::VectorXd> means(k);
  for (int s = 0; s < k; ++s) {
    means[s] = Eigen::VectorXd(d);
    for (int j = 0; j < d; ++j) {
      means[s][j] = rng.uniform(spec.mean_ranges[s].low, spec.mean_ranges[s].high);
    }
  }

  Eigen::MatrixXd x(n, d);
  int seg = 0;
  for (int t = 1; t <= n; ++t) {
    while (seg < k - 1 && t >= spec.segment_bounds[seg]) ++seg;
    for (int j = 0; j < d; ++j) x(t - 1, j) = means[seg][j] + sigma[j] * rng.normal();
  }

  SyntheticData out;
  out.series = TimeSeries(std::move(x));
  out.truth.change_indices.assign(spec.segment_bounds.begin(),
                                  spec.segment_bounds.end() - 1);
  out.truth.validate(n);
  for (int s = 0; s < k; ++s) {
    const int start = s == 0 ? 1 : spec.segment_bounds[s - 1];
    if (spec.covariance == CovarianceKind::Identity) {
      out.segments.push_back({start, Density(GaussianSpec::isotropic(means[s]))});
    } else {
      out.segments.push_back(
          {start, Density(GaussianSpec::diagonal(means[s], sigma.array().square()))});
    }
  }
  return out;
}

SyntheticData generate_synthetic(const SyntheticSpec& spec) {
  RandomSource rng(spec.seed);
  return generate_synthetic(spec, rng);
}

SyntheticData generate_fig5b(double delta_mu, RandomSource& rng) {
  const int n = 1000, d = 10, t_star = 350;
  Eigen::VectorXd m1(d);
  for (int j = 0; j < d; ++j) m1[j] = rng.uniform(-1.0, 1.0);
  const Eigen::VectorXd m2 = m1.array() + delta_mu;

  Eigen::MatrixXd x(n, d);
  for (int t = 1; t <= n; ++t) {
    const Eigen::VectorXd& m = t < t_star ? m1 : m2;
    for (int j = 0; j < d; ++j) x(t - 1, j) = m[j] + rng.normal();
  }

  SyntheticData out;
  out.series = TimeSeries(std::move(x));
  out.truth.change_indices = {t_star};
  out.segments.push_back({1, Density(GaussianSpec::isotropic(m1))});
  out.segments.push_back({t_star, Density(GaussianSpec::isotropic(m2))});
  return out;
}

int default_delta(int n) {
  return std::max(5, static_cast<int>(std::ceil(0.02 * n)));
}

ConfusionCounts match_detections(const std::vector<int>& estimates,
                                 const GroundTruth& truth, int delta, int n) {
  if (delta < 0) throw UsageError("match_detections: tolerance must be >= 0");
  ConfusionCounts c;
  c.tolerance = delta;

  std::vector<int> est = estimates;
  std::sort(est.begin(), est.end());
  const auto& tr = truth.change_indices;
  std::vector<bool> used(tr.size(), false);
  for (int e : est) {
    int best = -1;
    int best_dist = delta + 1;
    for (std::size_t i = 0; i < tr.size(); ++i) {
      if (used[i]) continue;
      const int dist = std::abs(e - tr[i]);
      if (dist < best_dist) {
        best_dist = dist;
        best = static_cast<int>(i);
      }
    }
    if (best >= 0) {
      used[best] = true;
      ++c.tp;
    } else {
      ++c.fp;
    }
  }
  c.fn = static_cast<int>(tr.size()) - c.tp;

  // Negatives are the instants not within delta of any truth; truth indices
  // are ascending, so the windows merge in one pass.
  int covered = 0;
  int cur_lo = 0, cur_hi = -1;
  for (int t : tr) {
    const int lo = std::max(1, t - delta);
    const int hi = std::min(n, t + delta);
    if (cur_hi < 0) {
      cur_lo = lo;
      cur_hi = hi;
    } else if (lo <= cur_hi + 1) {
      cur_hi = std::max(cur_hi, hi);
    } else {
      covered += cur_hi - cur_lo + 1;
      cur_lo = lo;
      cur_hi = hi;
    }
  }
  if (cur_hi >= 0) covered += cur_hi - cur_lo + 1;
  c.tn = std::max(0, n - covered - c.fp);
  return c;
}

Metrics far_mdr(const ConfusionCounts& counts) {
  Metrics m;
  const double far_den = counts.fp + counts.tn;
  const double mdr_den = counts.fn + counts.tp;
  m.far = far_den > 0 ? counts.fp / far_den : 0.0;
  m.mdr = mdr_den > 0 ? counts.fn / mdr_den : 0.0;
  return m;
}

std::vector<AccuracyRow> empirical_accuracy(const GaussianSpec& p1,
                                            const GaussianSpec& p2, int n,
                                            int t_star, int t_split, int trials,
                                            const std::vector<double>& betas,
                                            double a_clip, RandomSource& rng) {
  if (trials < 100) {
    throw UsageError("empirical_accuracy: needs at least 100 trials");
  }
  if (p1.same_as(p2)) {
    throw DataError("empirical_accuracy: distributions coincide, the slope "
                    "constant C is zero");
  }
  if (t_star < 2 || t_star > n) {
    throw UsageError("empirical_accuracy: t_star out of range");
  }
  if (!(a_clip > 0.0)) {
    throw UsageError("empirical_accuracy: a_clip must be positive");
  }

  const SplitGeometry geom = split_geometry(n, t_star, t_split);
  EstimatorOptions opts;
  const McEstimate c_min = min_slope_c(geom, p1, p2, opts, rng);

  std::vector<SegmentDensity> segs;
  segs.push_back({1, Density(p1)});
  segs.push_back({t_star, Density(p2)});
  const RatioProvider prov = make_oracle_ratio_provider(std::move(segs));

  const int d = static_cast<int>(p1.mean().size());
  std::vector<int> deviation(trials);
  for (int i = 0; i < trials; ++i) {
    RandomSource trial_rng = rng.fork(static_cast<std::uint64_t>(i));
    Eigen::MatrixXd x(n, d);
    for (int t = 1; t <= n; ++t) {
      x.row(t - 1) = (t < t_star ? p1 : p2).sample(trial_rng).transpose();
    }
    Eigen::VectorXd lr = prov.fn(x, 1, t_split, trial_rng);
    for (int t = 0; t < n; ++t) lr[t] = std::clamp(lr[t], -a_clip, a_clip);
    const ArgmaxResult am = argmax_estimator(compute_cusum(lr, t_split));
    deviation[i] = std::abs(am.estimate.index - t_star);
  }

  std::vector<AccuracyRow> rows;
  for (double beta : betas) {
    const AccuracyBound bound = theorem_alpha(a_clip, c_min.value, beta);
    int exceed = 0;
    for (int dev : deviation) {
      if (dev >= bound.alpha) ++exceed;
    }
    AccuracyRow row;
    row.beta = beta;
    row.alpha = bound.alpha;
    row.exceedance = static_cast<double>(exceed) / trials;
    row.a_bound = a_clip;
    row.c_min = c_min.value;
    row.trials = trials;
    rows.push_back(row);
  }
  return rows;
}

// ---------------------------------------------------------------------------
// Experiment harness.

namespace {

using nlohmann::json;

[[noreturn]] void config_fail(const std::string& path, const std::string& what) {
  throw DataError("config error at " + path + ": " + what);
}

const json* find_key(const json& obj, const char* key) {
  if (!obj.is_object()) return nullptr;
  auto it = obj.find(key);
  return it == obj.end() ? nullptr : &*it;
}

void expect_object(const json& v, const std::string& path) {
  if (!v.is_object()) config_fail(path, "expected an object");
}

const json& require_key(const json& obj, const std::string& path, const char* key) {
  expect_object(obj, path);
  auto it = obj.find(key);
  if (it == obj.end()) config_fail(path, std::string("missing key '") + key + "'");
  return *it;
}

// Unknown keys are schema violations; silent typos would mis-run experiments.
void check_keys(const json& obj, const std::string& path,
                std::initializer_list<const char*> allowed) {
  expect_object(obj, path);
  for (auto it = obj.begin(); it != obj.end(); ++it) {
    bool ok = false;
    for (const char* k : allowed) {
      if (it.key() == k) {
        ok = true;
        break;
      }
    }
    if (!ok) config_fail(path + "/" + it.key(), "unknown key");
  }
}

int as_int(const json& v, const std::string& path) {
  if (!v.is_number_integer()) config_fail(path, "expected an integer");
  return v.get<int>();
}

double as_real(const json& v, const std::string& path) {
  if (!v.is_number()) config_fail(path, "expected a number");
  return v.get<double>();
}

std::string as_string(const json& v, const std::string& path) {
  if (!v.is_string()) config_fail(path, "expected a string");
  return v.get<std::string>();
}

bool as_bool(const json& v, const std::string& path) {
  if (!v.is_boolean()) config_fail(path, "expected a boolean");
  return v.get<bool>();
}

int opt_int(const json& obj, const std::string& path, const char* key, int fb) {
  const json* v = find_key(obj, key);
  return v ? as_int(*v, path + "/" + key) : fb;
}

double opt_real(const json& obj, const std::string& path, const char* key,
                double fb) {
  const json* v = find_key(obj, key);
  return v ? as_real(*v, path + "/" + key) : fb;
}

std::string opt_string(const json& obj, const std::string& path, const char* key,
                       const std::string& fb) {
  const json* v = find_key(obj, key);
  return v ? as_string(*v, path + "/" + key) : fb;
}

bool opt_bool(const json& obj, const std::string& path, const char* key, bool fb) {
  const json* v = find_key(obj, key);
  return v ? as_bool(*v, path + "/" + key) : fb;
}

std::vector<int> as_int_array(const json& v, const std::string& path) {
  if (!v.is_array()) config_fail(path, "expected an array");
  std::vector<int> out;
  for (std::size_t i = 0; i < v.size(); ++i) {
    out.push_back(as_int(v[i], path + "/" + std::to_string(i)));
  }
  return out;
}

struct GeneratorPlan {
  bool fig5b = false;
  double delta_mu = 1.0;
  SyntheticSpec spec;

  int n() const { return fig5b ? 1000 : spec.n(); }
};

GeneratorPlan parse_generator(const json& g, const std::string& path) {
  expect_object(g, path);
  GeneratorPlan plan;
  if (const json* p = find_key(g, "preset")) {
    const std::string name = as_string(*p, path + "/preset");
    if (name == "fig2b") {
      check_keys(g, path, {"preset"});
      plan.spec = fig2b_spec();
    } else if (name == "fig3b") {
      check_keys(g, path, {"preset"});
      plan.spec = fig3b_spec();
    } else if (name == "fig5a") {
      check_keys(g, path, {"preset", "t_star"});
      plan.spec = fig5a_spec(opt_int(g, path, "t_star", 50));
    } else if (name == "fig5b") {
      check_keys(g, path, {"preset", "delta_mu"});
      plan.fig5b = true;
      plan.delta_mu = opt_real(g, path, "delta_mu", 1.0);
    } else if (name == "table1") {
      check_keys(g, path, {"preset"});
      plan.spec = table1_spec();
    } else {
      config_fail(path + "/preset", "unknown preset '" + name + "'");
    }
    return plan;
  }
  if (const json* s = find_key(g, "spec")) {
    check_keys(g, path, {"spec"});
    plan.spec = synthetic_spec_from_json(*s, path + "/spec");
    return plan;
  }
  config_fail(path, "needs either 'preset' or 'spec'");
}

struct DetectorPlan {
  std::string pipeline = "single";
  bool oracle = false;
  DreConfig dre = MlpConfig{};
  SplitConfig split;
  SegmentationConfig seg;
  double a_clip = 10.0;
  EnsembleConfig ensemble;
  OnlineConfig online;
};

DetectorPlan parse_detector(const json& dj, const std::string& path) {
  expect_object(dj, path);
  check_keys(dj, path,
             {"pipeline", "ratio", "model", "objective", "swap_lsif_measures",
              "hidden_widths", "n_centers", "bandwidth", "learning_rate",
              "iterations", "batch", "t_split", "a_clip", "segmentation",
              "splits", "vote_strategy", "vote_tolerance", "vote_threshold",
              "window_len", "stride", "window_mode"});
  DetectorPlan plan;
  plan.pipeline = opt_string(dj, path, "pipeline", "single");
  if (plan.pipeline != "single" && plan.pipeline != "multi" &&
      plan.pipeline != "ensemble" && plan.pipeline != "online") {
    config_fail(path + "/pipeline",
                "expected 'single', 'multi', 'ensemble', or 'online'");
  }

  const std::string ratio = opt_string(dj, path, "ratio", "model");
  if (ratio == "oracle") {
    plan.oracle = true;
  } else if (ratio != "model") {
    config_fail(path + "/ratio", "expected 'oracle' or 'model'");
  }

  const std::string objective_name = opt_string(dj, path, "objective", "kliep");
  Objective objective;
  if (objective_name == "kliep") {
    objective = Objective::Kliep;
  } else if (objective_name == "lsif") {
    objective = Objective::Lsif;
  } else {
    config_fail(path + "/objective", "expected 'kliep' or 'lsif'");
  }
  // Detection needs w ~ p_left/p_right. The verbatim LSIF form optimizes the
  // inverted ratio, so the harness defaults to the swapped form.
  const bool swap = opt_bool(dj, path, "swap_lsif_measures", true);

  const std::string model = opt_string(dj, path, "model", "mlp");
  if (model == "mlp") {
    MlpConfig m;
    m.objective = objective;
    m.swap_lsif_measures = swap;
    if (const json* h = find_key(dj, "hidden_widths")) {
      m.hidden_widths = as_int_array(*h, path + "/hidden_widths");
    }
    m.learning_rate = opt_real(dj, path, "learning_rate", m.learning_rate);
    m.iterations = opt_int(dj, path, "iterations", m.iterations);
    const int batch = opt_int(dj, path, "batch", 0);
    if (batch > 0) m.batch_left = m.batch_right = batch;
    plan.dre = m;
  } else if (model == "kernel") {
    KernelConfig k;
    k.objective = objective;
    k.swap_lsif_measures = swap;
    k.n_centers = opt_int(dj, path, "n_centers", k.n_centers);
    k.bandwidth = opt_real(dj, path, "bandwidth", k.bandwidth);
    k.learning_rate = opt_real(dj, path, "learning_rate", k.learning_rate);
    k.iterations = opt_int(dj, path, "iterations", k.iterations);
    const int batch = opt_int(dj, path, "batch", 0);
    if (batch > 0) k.batch_left = k.batch_right = batch;
    plan.dre = k;
  } else {
    config_fail(path + "/model", "expected 'mlp' or 'kernel'");
  }

  plan.split.t_split = opt_int(dj, path, "t_split", 0);
  plan.a_clip = opt_real(dj, path, "a_clip", 10.0);

  if (const json* sg = find_key(dj, "segmentation")) {
    const std::string sp = path + "/segmentation";
    check_keys(*sg, sp,
               {"smoothing_window", "min_gap", "penalty_scale", "min_magnitude"});
    plan.seg.smoothing_window = opt_int(*sg, sp, "smoothing_window", 0);
    plan.seg.min_gap = opt_int(*sg, sp, "min_gap", 0);
    plan.seg.penalty_scale = opt_real(*sg, sp, "penalty_scale", plan.seg.penalty_scale);
    plan.seg.min_magnitude = opt_real(*sg, sp, "min_magnitude", 0.0);
  }

  if (plan.pipeline == "ensemble") {
    if (const json* s = find_key(dj, "splits")) {
      plan.ensemble.split_points = as_int_array(*s, path + "/splits");
    }
    const std::string vs = opt_string(dj, path, "vote_strategy", "majority");
    if (vs == "majority") {
      plan.ensemble.strategy = VoteStrategy::MajorityVote;
    } else if (vs == "weighted") {
      plan.ensemble.strategy = VoteStrategy::WeightedSum;
    } else {
      config_fail(path + "/vote_strategy", "expected 'majority' or 'weighted'");
    }
    plan.ensemble.vote_tolerance = opt_int(dj, path, "vote_tolerance", 0);
    plan.ensemble.vote_threshold = opt_int(dj, path, "vote_threshold", 0);
  }

  if (plan.pipeline == "online") {
    plan.online.window_len =
        as_int(require_key(dj, path, "window_len"), path + "/window_len");
    plan.online.stride = opt_int(dj, path, "stride", 0);
    const std::string wm = opt_string(dj, path, "window_mode", "fixed");
    if (wm == "fixed") {
      plan.online.mode = WindowMode::FixedWindow;
    } else if (wm == "adaptive") {
      plan.online.mode = WindowMode::AdaptiveWindow;
    } else {
      config_fail(path + "/window_mode", "expected 'fixed' or 'adaptive'");
    }
  }
  return plan;
}

struct SeedOutcome {
  json row;
  double far = 0.0;
  double mdr = 0.0;
};

SeedOutcome run_seed(const GeneratorPlan& gen, const DetectorPlan& det,
                     std::uint64_t seed, int delta, const std::string& output_dir,
                     const std::string& exp_name) {
  RandomSource root(seed);
  RandomSource gen_rng = root.fork(0);
  SyntheticData data = gen.fig5b ? generate_fig5b(gen.delta_mu, gen_rng)
                                 : generate_synthetic(gen.spec, gen_rng);

  RatioProvider prov = det.oracle ? make_oracle_ratio_provider(data.segments)
                                  : make_dre_ratio_provider(det.dre);
  RandomSource det_rng = root.fork(1);

  std::vector<DetectionResult> results;
  if (det.pipeline == "online") {
    results =
        online_detect(data.series, det.online, prov, det.seg, det.a_clip, det_rng);
  } else if (det.pipeline == "single") {
    results.push_back(
        detect_single(data.series, det.split, prov, det.seg, det.a_clip, det_rng));
  } else if (det.pipeline == "multi") {
    results.push_back(
        detect_multi(data.series, det.split, prov, det.seg, det.a_clip, det_rng));
  } else {
    results.push_back(ensemble_detect(data.series, det.ensemble, prov, det.seg,
                                      det.a_clip, det_rng));
  }

  // Online emissions are already globally indexed and deduplicated.
  std::vector<int> estimates;
  for (const auto& r : results) {
    for (const auto& e : r.change_points) estimates.push_back(e.index);
  }
  std::sort(estimates.begin(), estimates.end());

  const ConfusionCounts cc =
      match_detections(estimates, data.truth, delta, data.series.n());
  const Metrics m = far_mdr(cc);
  json row;
  row["seed"] = seed;
  row["estimates"] = estimates;
  row["tp"] = cc.tp;
  row["fp"] = cc.fp;
  row["fn"] = cc.fn;
  row["tn"] = cc.tn;
  row["far"] = m.far;
  row["mdr"] = m.mdr;

  if (!output_dir.empty()) {
    std::filesystem::create_directories(output_dir);
    int file_index = 0;
    for (const auto& r : results) {
      for (const auto& cs : r.cusums) {
        write_cusum_csv(output_dir + "/" + exp_name + "_seed" +
                            std::to_string(seed) + "_split" +
                            std::to_string(file_index++) + ".csv",
                        cs.values);
      }
    }
  }
  return {row, m.far, m.mdr};
}

json aggregate_stats(const std::vector<double>& values) {
  json a;
  if (values.empty()) return a;
  double sum = 0.0, lo = values[0], hi = values[0];
  for (double v : values) {
    sum += v;
    lo = std::min(lo, v);
    hi = std::max(hi, v);
  }
  a["mean"] = sum / static_cast<double>(values.size());
  a["min"] = lo;
  a["max"] = hi;
  return a;
}

}  // namespace

SyntheticSpec synthetic_spec_from_json(const nlohmann::json& j,
                                       const std::string& path_prefix) {
  const std::string& sp = path_prefix;
  check_keys(j, sp,
             {"d", "segment_bounds", "mean_ranges", "covariance", "sigma_range"});
  SyntheticSpec spec;
  spec.d = as_int(require_key(j, sp, "d"), sp + "/d");
  spec.segment_bounds =
      as_int_array(require_key(j, sp, "segment_bounds"), sp + "/segment_bounds");
  const json& mr = require_key(j, sp, "mean_ranges");
  const std::string mrp = sp + "/mean_ranges";
  if (!mr.is_array()) config_fail(mrp, "expected an array of [low, high] pairs");
  for (std::size_t i = 0; i < mr.size(); ++i) {
    const std::string ip = mrp + "/" + std::to_string(i);
    if (!mr[i].is_array() || mr[i].size() != 2) {
      config_fail(ip, "expected a [low, high] pair");
    }
    spec.mean_ranges.push_back(
        {as_real(mr[i][0], ip + "/0"), as_real(mr[i][1], ip + "/1")});
  }
  const std::string cov = opt_string(j, sp, "covariance", "identity");
  if (cov == "identity") {
    spec.covariance = CovarianceKind::Identity;
  } else if (cov == "diagonal") {
    spec.covariance = CovarianceKind::DiagonalFromSigmaRange;
    const json& sr = require_key(j, sp, "sigma_range");
    const std::string srp = sp + "/sigma_range";
    if (!sr.is_array() || sr.size() != 2) config_fail(srp, "expected [low, high]");
    spec.sigma_low = as_real(sr[0], srp + "/0");
    spec.sigma_high = as_real(sr[1], srp + "/1");
  } else {
    config_fail(sp + "/covariance", "expected 'identity' or 'diagonal'");
  }
  try {
    spec.validate();
  } catch (const UsageError& e) {
    config_fail(sp, e.what());
  }
  return spec;
}

nlohmann::json run_experiment(const std::string& config_path) {
  std::ifstream in(config_path);
  if (!in) throw DataError("cannot read experiment config: " + config_path);
  json cfg;
  try {
    in >> cfg;
  } catch (const json::parse_error& e) {
    throw DataError(std::string("experiment config is not valid JSON: ") +
                    e.what());
  }

  check_keys(cfg, "/", {"experiments"});
  const json& exps = require_key(cfg, "/", "experiments");
  if (!exps.is_array()) config_fail("/experiments", "expected an array");

  json report;
  report["experiments"] = json::array();
  for (std::size_t i = 0; i < exps.size(); ++i) {
    const std::string path = "/experiments/" + std::to_string(i);
    const json& e = exps[i];
    expect_object(e, path);
    check_keys(e, path,
               {"name", "generator", "detector", "scorer", "seeds", "delta",
                "output_dir"});
    const std::string name =
        opt_string(e, path, "name", "experiment_" + std::to_string(i));
    const GeneratorPlan gen =
        parse_generator(require_key(e, path, "generator"), path + "/generator");
    const DetectorPlan det =
        parse_detector(require_key(e, path, "detector"), path + "/detector");

    const json& seeds_json = require_key(e, path, "seeds");
    const std::string seeds_path = path + "/seeds";
    if (!seeds_json.is_array()) config_fail(seeds_path, "expected an array");
    std::vector<std::uint64_t> seeds;
    for (std::size_t s = 0; s < seeds_json.size(); ++s) {
      const std::string sp = seeds_path + "/" + std::to_string(s);
      const json& v = seeds_json[s];
      if (!v.is_number_integer() ||
          (!v.is_number_unsigned() && v.get<long long>() < 0)) {
        config_fail(sp, "expected a non-negative integer");
      }
      seeds.push_back(v.get<std::uint64_t>());
    }

    int delta = opt_int(e, path, "delta", 0);
    if (const json* sc = find_key(e, "scorer")) {
      const std::string scp = path + "/scorer";
      check_keys(*sc, scp, {"kind", "delta"});
      const std::string kind = opt_string(*sc, scp, "kind", "far_mdr");
      if (kind != "far_mdr") config_fail(scp + "/kind", "expected 'far_mdr'");
      delta = opt_int(*sc, scp, "delta", delta);
    }
    if (delta < 0) config_fail(path, "tolerance delta must be >= 0");
    if (delta == 0) delta = default_delta(gen.n());
    const std::string output_dir = opt_string(e, path, "output_dir", "");

    json entry;
    entry["name"] = name;
    entry["delta"] = delta;
    entry["per_seed"] = json::array();
    std::vector<double> fars, mdrs;
    for (std::uint64_t seed : seeds) {
      SeedOutcome out = run_seed(gen, det, seed, delta, output_dir, name);
      entry["per_seed"].push_back(std::move(out.row));
      fars.push_back(out.far);
      mdrs.push_back(out.mdr);
    }
    json agg;
    agg["far"] = aggregate_stats(fars);
    agg["mdr"] = aggregate_stats(mdrs);
    entry["aggregate"] = agg;
    report["experiments"].push_back(std::move(entry));
  }
  return report;
}

}  // namespace drcusum
