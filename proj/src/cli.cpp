#include "drcusum/cli.hpp"

#include "drcusum/detect.hpp"
#include "drcusum/distributions.hpp"
#include "drcusum/eval.hpp"
#include "drcusum/io.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <map>
#include <ostream>
#include <string>
#include <vector>

namespace drcusum::cli {
namespace {

using nlohmann::json;

const char* kUsage = R"(usage: drcusum <subcommand> [flags]

subcommands:
  detect         locate change points in a CSV time series
                   --input CSV (required), --t-split INT|auto,
                   --model mlp|kernel, --objective kliep|lsif, --seed INT,
                   --ensemble "i,j,k", --out JSON, --cusum-out CSV
  detect-online  scan a CSV stream with a sliding window
                   --input CSV (required), --window INT (required),
                   --stride INT, --mode fixed|adaptive, --model mlp|kernel,
                   --objective kliep|lsif, --seed INT, --out JSON
  simulate       generate a synthetic series with ground truth
                   --preset fig2b|fig3b|fig5a|fig5b|table1 | --spec JSON,
                   --t-star INT (fig5a), --delta-mu REAL (fig5b), --seed INT,
                   --out CSV (required), --truth-out FILE (required)
  evaluate       run an experiment config and report FAR/MDR
                   --config JSON (required), --out JSON
  oracle-check   closed-form vs Monte-Carlo expected slopes plus argmax
                 frequency; exits 3 when a check fails
                   --setup JSON, --trials INT, --seed INT
  theorem-check  empirical exceedance against the deviation bound; exits 3
                 when a check fails
                   --setup JSON, --betas "0.05,0.1,0.2", --trials INT,
                   --seed INT
)";

using FlagMap = std::map<std::string, std::string>;

FlagMap parse_flags(const std::vector<std::string>& args, std::size_t first,
                    std::initializer_list<const char*> allowed) {
  FlagMap flags;
  for (std::size_t i = first; i < args.size(); ++i) {
    const std::string& a = args[i];
    if (a.rfind("--", 0) != 0 || a.size() == 2) {
      throw UsageError("unexpected argument '" + a + "'");
    }
    const std::string name = a.substr(2);
    bool known = false;
    for (const char* k : allowed) {
      if (name == k) {
        known = true;
        break;
      }
    }
    if (!known) throw UsageError("unknown flag --" + name);
    if (flags.count(name)) throw UsageError("flag --" + name + " given twice");
    if (i + 1 >= args.size()) {
      throw UsageError("flag --" + name + " needs a value");
    }
    flags[name] = args[++i];
  }
  return flags;
}

std::string get_flag(const FlagMap& flags, const std::string& name,
                     const std::string& fallback) {
  auto it = flags.find(name);
  return it == flags.end() ? fallback : it->second;
}

std::string require_flag(const FlagMap& flags, const std::string& name) {
  auto it = flags.find(name);
  if (it == flags.end()) throw UsageError("missing required flag --" + name);
  return it->second;
}

long long parse_int(const std::string& s, const std::string& what) {
  char* end = nullptr;
  const long long v = std::strtoll(s.c_str(), &end, 10);
  if (end == s.c_str() || *end != '\0') {
    throw UsageError(what + ": '" + s + "' is not an integer");
  }
  return v;
}

double parse_real(const std::string& s, const std::string& what) {
  char* end = nullptr;
  const double v = std::strtod(s.c_str(), &end);
  if (end == s.c_str() || *end != '\0') {
    throw UsageError(what + ": '" + s + "' is not a number");
  }
  return v;
}

std::vector<int> parse_int_list(const std::string& s, const std::string& what) {
  std::vector<int> out;
  std::string item;
  for (std::size_t i = 0; i <= s.size(); ++i) {
    if (i == s.size() || s[i] == ',') {
      if (item.empty()) throw UsageError(what + ": empty entry in '" + s + "'");
      out.push_back(static_cast<int>(parse_int(item, what)));
      item.clear();
    } else {
      item += s[i];
    }
  }
  return out;
}

std::vector<double> parse_real_list(const std::string& s, const std::string& what) {
  std::vector<double> out;
  std::string item;
  for (std::size_t i = 0; i <= s.size(); ++i) {
    if (i == s.size() || s[i] == ',') {
      if (item.empty()) throw UsageError(what + ": empty entry in '" + s + "'");
      out.push_back(parse_real(item, what));
      item.clear();
    } else {
      item += s[i];
    }
  }
  return out;
}

std::uint64_t parse_seed(const FlagMap& flags) {
  const std::string s = get_flag(flags, "seed", "0");
  const long long v = parse_int(s, "--seed");
  if (v < 0) throw UsageError("--seed must be non-negative");
  return static_cast<std::uint64_t>(v);
}

// Detection wants w ~ p_left/p_right; the verbatim LSIF form learns the
// inverse, so command-line detection always uses the swapped form.
DreConfig dre_from_flags(const FlagMap& flags) {
  const std::string model = get_flag(flags, "model", "mlp");
  const std::string objective_name = get_flag(flags, "objective", "kliep");
  Objective objective;
  if (objective_name == "kliep") {
    objective = Objective::Kliep;
  } else if (objective_name == "lsif") {
    objective = Objective::Lsif;
  } else {
    throw UsageError("--objective must be 'kliep' or 'lsif'");
  }
  if (model == "mlp") {
    MlpConfig m;
    m.objective = objective;
    m.swap_lsif_measures = true;
    return m;
  }
  if (model == "kernel") {
    KernelConfig k;
    k.objective = objective;
    k.swap_lsif_measures = true;
    return k;
  }
  throw UsageError("--model must be 'mlp' or 'kernel'");
}

json estimate_json(const ChangePointEstimate& e) {
  json j;
  j["index"] = e.index;
  j["slope_before"] = e.slope_before;
  j["slope_after"] = e.slope_after;
  j["magnitude"] = e.magnitude;
  j["verified"] = e.verified;
  return j;
}

json result_json(const DetectionResult& r) {
  json j;
  j["change_points"] = json::array();
  for (const auto& e : r.change_points) {
    j["change_points"].push_back(estimate_json(e));
  }
  j["strongest_unverified"] =
      r.strongest_unverified ? estimate_json(*r.strongest_unverified) : json();
  j["config"] = r.config_echo;
  j["seed"] = r.seed;
  return j;
}

void emit_json(const json& j, const FlagMap& flags, std::ostream& out) {
  if (flags.count("out")) {
    std::ofstream f(flags.at("out"));
    if (!f) throw DataError("cannot write '" + flags.at("out") + "'");
    f << j.dump(2) << "\n";
  } else {
    out << j.dump(2) << "\n";
  }
}

// first cusum goes to the given path, extras get _1, _2, ... before the
// extension.
void write_cusums(const std::string& path, const std::vector<CusumSeries>& cs) {
  for (std::size_t i = 0; i < cs.size(); ++i) {
    std::string p = path;
    if (i > 0) {
      const std::size_t dot = path.find_last_of('.');
      p = dot == std::string::npos
              ? path + "_" + std::to_string(i)
              : path.substr(0, dot) + "_" + std::to_string(i) + path.substr(dot);
    }
    write_cusum_csv(p, cs[i].values);
  }
}

int cmd_detect(const FlagMap& flags, std::ostream& out) {
  const TimeSeries series = read_time_series_csv(require_flag(flags, "input"));

  SplitConfig split;
  const std::string ts = get_flag(flags, "t-split", "auto");
  if (ts != "auto") {
    split.t_split = static_cast<int>(parse_int(ts, "--t-split"));
    if (split.t_split <= 0) {
      throw UsageError("--t-split must be positive (or 'auto')");
    }
  }

  const RatioProvider prov = make_dre_ratio_provider(dre_from_flags(flags));
  const SegmentationConfig seg;
  RandomSource rng(parse_seed(flags));

  DetectionResult r;
  if (flags.count("ensemble")) {
    EnsembleConfig ens;
    ens.split_points = parse_int_list(flags.at("ensemble"), "--ensemble");
    r = ensemble_detect(series, ens, prov, seg, 10.0, rng);
  } else {
    r = detect_single(series, split, prov, seg, 10.0, rng);
  }

  emit_json(result_json(r), flags, out);
  if (flags.count("cusum-out")) write_cusums(flags.at("cusum-out"), r.cusums);
  return 0;
}

int cmd_detect_online(const FlagMap& flags, std::ostream& out) {
  const TimeSeries series = read_time_series_csv(require_flag(flags, "input"));

  OnlineConfig online;
  online.window_len =
      static_cast<int>(parse_int(require_flag(flags, "window"), "--window"));
  online.stride =
      static_cast<int>(parse_int(get_flag(flags, "stride", "0"), "--stride"));
  const std::string mode = get_flag(flags, "mode", "fixed");
  if (mode == "fixed") {
    online.mode = WindowMode::FixedWindow;
  } else if (mode == "adaptive") {
    online.mode = WindowMode::AdaptiveWindow;
  } else {
    throw UsageError("--mode must be 'fixed' or 'adaptive'");
  }

  const RatioProvider prov = make_dre_ratio_provider(dre_from_flags(flags));
  const SegmentationConfig seg;
  RandomSource rng(parse_seed(flags));

  const std::vector<DetectionResult> results =
      online_detect(series, online, prov, seg, 10.0, rng);

  json j;
  j["emissions"] = json::array();
  std::vector<int> indices;
  for (const auto& r : results) {
    j["emissions"].push_back(result_json(r));
    for (const auto& e : r.change_points) indices.push_back(e.index);
  }
  std::sort(indices.begin(), indices.end());
  j["change_points"] = indices;
  emit_json(j, flags, out);
  return 0;
}

int cmd_simulate(const FlagMap& flags, std::ostream& out) {
  const std::string out_path = require_flag(flags, "out");
  const std::string truth_path = require_flag(flags, "truth-out");
  const std::uint64_t seed = parse_seed(flags);

  const bool has_preset = flags.count("preset") > 0;
  const bool has_spec = flags.count("spec") > 0;
  if (has_preset == has_spec) {
    throw UsageError("simulate needs exactly one of --preset or --spec");
  }

  SyntheticData data;
  if (has_preset) {
    const std::string preset = flags.at("preset");
    if (preset == "fig5b") {
      RandomSource rng(seed);
      data = generate_fig5b(
          parse_real(get_flag(flags, "delta-mu", "1.0"), "--delta-mu"), rng);
    } else {
      SyntheticSpec spec;
      if (preset == "fig2b") {
        spec = fig2b_spec();
      } else if (preset == "fig3b") {
        spec = fig3b_spec();
      } else if (preset == "fig5a") {
        spec = fig5a_spec(
            static_cast<int>(parse_int(get_flag(flags, "t-star", "50"), "--t-star")));
      } else if (preset == "table1") {
        spec = table1_spec();
      } else {
        throw UsageError("unknown preset '" + preset + "'");
      }
      spec.seed = seed;
      data = generate_synthetic(spec);
    }
  } else {
    std::ifstream f(flags.at("spec"));
    if (!f) throw DataError("cannot read '" + flags.at("spec") + "'");
    json j;
    try {
      f >> j;
    } catch (const json::parse_error& e) {
      throw DataError(std::string("spec file is not valid JSON: ") + e.what());
    }
    SyntheticSpec spec = synthetic_spec_from_json(j, "/");
    spec.seed = seed;
    data = generate_synthetic(spec);
  }

  write_time_series_csv(out_path, data.series);
  write_ground_truth(truth_path, data.truth);
  out << "wrote " << data.series.n() << "x" << data.series.d() << " series to "
      << out_path << ", " << data.truth.change_indices.size()
      << " change(s) to " << truth_path << "\n";
  return 0;
}

int cmd_evaluate(const FlagMap& flags, std::ostream& out) {
  const json report = run_experiment(require_flag(flags, "config"));
  if (flags.count("out")) {
    std::ofstream f(flags.at("out"));
    if (!f) throw DataError("cannot write '" + flags.at("out") + "'");
    f << report.dump(2) << "\n";
  }

  const auto& exps = report.at("experiments");
  if (exps.empty()) {
    out << "no experiments\n";
    return 0;
  }
  char line[256];
  std::snprintf(line, sizeof(line), "%-24s %5s %27s %27s\n", "experiment",
                "delta", "far mean/min/max", "mdr mean/min/max");
  out << line;
  for (const auto& e : exps) {
    const auto& far = e.at("aggregate").at("far");
    const auto& mdr = e.at("aggregate").at("mdr");
    auto stat = [](const json& s, const char* k) {
      return s.contains(k) ? s.at(k).get<double>() : 0.0;
    };
    std::snprintf(line, sizeof(line),
                  "%-24s %5d %9.4f/%8.4f/%8.4f %9.4f/%8.4f/%8.4f\n",
                  e.at("name").get<std::string>().c_str(),
                  e.at("delta").get<int>(), stat(far, "mean"), stat(far, "min"),
                  stat(far, "max"), stat(mdr, "mean"), stat(mdr, "min"),
                  stat(mdr, "max"));
    out << line;
  }
  return 0;
}

// --- oracle-check ---

struct OracleSetup {
  int d = 10;
  int n = 500;
  int t_star = 150;
  std::vector<int> t_splits = {100, 250, 400};
  MeanRange range1 = {0.0, 0.4};
  MeanRange range2 = {0.6, 1.0};
  double a_clip = 10.0;
  double tolerance_se = 3.0;
};

json load_json_file(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw DataError("cannot read '" + path + "'");
  json j;
  try {
    f >> j;
  } catch (const json::parse_error& e) {
    throw DataError(std::string("setup file is not valid JSON: ") + e.what());
  }
  return j;
}

MeanRange range_from_json(const json& j, const std::string& what) {
  if (!j.is_array() || j.size() != 2 || !j[0].is_number() || !j[1].is_number()) {
    throw DataError(what + ": expected [low, high]");
  }
  return {j[0].get<double>(), j[1].get<double>()};
}

OracleSetup oracle_setup_from_flags(const FlagMap& flags) {
  OracleSetup s;
  if (!flags.count("setup")) return s;
  const json j = load_json_file(flags.at("setup"));
  if (!j.is_object()) throw DataError("setup: expected a JSON object");
  for (auto it = j.begin(); it != j.end(); ++it) {
    const std::string& k = it.key();
    if (k == "d") {
      s.d = it->get<int>();
    } else if (k == "n") {
      s.n = it->get<int>();
    } else if (k == "t_star") {
      s.t_star = it->get<int>();
    } else if (k == "t_splits") {
      s.t_splits.clear();
      for (const auto& v : *it) s.t_splits.push_back(v.get<int>());
    } else if (k == "mean_range1") {
      s.range1 = range_from_json(*it, "setup/mean_range1");
    } else if (k == "mean_range2") {
      s.range2 = range_from_json(*it, "setup/mean_range2");
    } else if (k == "a_clip") {
      s.a_clip = it->get<double>();
    } else if (k == "tolerance_se") {
      s.tolerance_se = it->get<double>();
    } else {
      throw DataError("setup: unknown key '" + k + "'");
    }
  }
  if (s.d < 1 || s.n < 4 || s.t_star < 2 || s.t_star > s.n || s.t_splits.empty()) {
    throw DataError("setup: degenerate geometry");
  }
  for (int t : s.t_splits) {
    if (t < 2 || t > s.n - 1) throw DataError("setup: t_split out of range");
  }
  if (s.a_clip <= 0.0 || s.tolerance_se <= 0.0) {
    throw DataError("setup: a_clip and tolerance_se must be positive");
  }
  return s;
}

GaussianSpec draw_gaussian(int d, const MeanRange& r, RandomSource& rng) {
  Eigen::VectorXd m(d);
  for (int j = 0; j < d; ++j) m[j] = rng.uniform(r.low, r.high);
  return GaussianSpec::isotropic(std::move(m));
}

// Window law for one side of the split, mixed with the same weights the
// closed-form expressions assume (the geometry's alpha fractions, not the
// discrete row counts, which differ by O(1/window) and would push a 200k
// sample comparison outside its standard error).
Density window_mixture(const GaussianSpec& p1, const GaussianSpec& p2,
                       double lambda_p1) {
  if (lambda_p1 >= 1.0) return Density(p1);
  if (lambda_p1 <= 0.0) return Density(p2);
  return Density(MixtureSpec(lambda_p1, p1, p2));
}

McEstimate direct_region_mean(const Density& left, const Density& right,
                              const GaussianSpec& region_law, int samples,
                              RandomSource& rng) {
  double sum = 0.0, sum_sq = 0.0;
  for (int i = 0; i < samples; ++i) {
    const double v = oracle_log_ratio(left, right, region_law.sample(rng));
    sum += v;
    sum_sq += v * v;
  }
  const double mean = sum / samples;
  const double var = std::max(0.0, sum_sq / samples - mean * mean);
  return {mean, std::sqrt(var / samples)};
}

int cmd_oracle_check(const FlagMap& flags, std::ostream& out) {
  const OracleSetup setup = oracle_setup_from_flags(flags);
  const int trials =
      static_cast<int>(parse_int(get_flag(flags, "trials", "20"), "--trials"));
  if (trials < 1) throw UsageError("--trials must be positive");
  RandomSource rng(parse_seed(flags));
  const EstimatorOptions opts;
  const int direct_samples = 200000;

  bool all_pass = true;
  auto verdict = [&](bool ok) {
    all_pass = all_pass && ok;
    return ok ? "PASS" : "FAIL";
  };

  for (int t_split : setup.t_splits) {
    const SplitGeometry geom = split_geometry(setup.n, setup.t_star, t_split);
    const GaussianSpec p1 = draw_gaussian(setup.d, setup.range1, rng);
    const GaussianSpec p2 = draw_gaussian(setup.d, setup.range2, rng);
    if (p1.same_as(p2)) {
      throw DataError("degenerate setup: the two distributions coincide");
    }

    const McEstimate pre_closed =
        expected_log_ratio(geom, p1, p2, Region::PreChange, opts, rng);
    const McEstimate post_closed =
        expected_log_ratio(geom, p1, p2, Region::PostChange, opts, rng);

    // Direct estimate: average the pointwise oracle log-ratio over fresh
    // samples from the region's law.
    const bool left_of_change = geom.side == SplitSide::LeftOfChange;
    const double lam_left = left_of_change ? 1.0 : *geom.alpha2;
    const double lam_right = left_of_change ? 1.0 - *geom.alpha1 : 0.0;
    const Density left = window_mixture(p1, p2, lam_left);
    const Density right = window_mixture(p1, p2, lam_right);
    const McEstimate pre_direct =
        direct_region_mean(left, right, p1, direct_samples, rng);
    const McEstimate post_direct =
        direct_region_mean(left, right, p2, direct_samples, rng);

    auto match = [&](const McEstimate& a, const McEstimate& b) {
      const double se = std::sqrt(a.std_error * a.std_error +
                                  b.std_error * b.std_error);
      return std::abs(a.value - b.value) <= setup.tolerance_se * se;
    };
    char line[256];
    std::snprintf(line, sizeof(line),
                  "t_split=%d pre:  closed=%+.5f mc=%+.5f (se %.5f) sign %s "
                  "match %s\n",
                  t_split, pre_closed.value, pre_direct.value,
                  pre_direct.std_error, verdict(pre_closed.value > 0.0),
                  verdict(match(pre_closed, pre_direct)));
    out << line;
    std::snprintf(line, sizeof(line),
                  "t_split=%d post: closed=%+.5f mc=%+.5f (se %.5f) sign %s "
                  "match %s\n",
                  t_split, post_closed.value, post_direct.value,
                  post_direct.std_error, verdict(post_closed.value < 0.0),
                  verdict(match(post_closed, post_direct)));
    out << line;

    // Argmax frequency: fresh mean pair per trial, oracle CUSUM, peak near
    // the true change.
    int hits = 0;
    for (int trial = 0; trial < trials; ++trial) {
      RandomSource trial_rng = rng.fork(static_cast<std::uint64_t>(trial));
      const GaussianSpec q1 = draw_gaussian(setup.d, setup.range1, trial_rng);
      const GaussianSpec q2 = draw_gaussian(setup.d, setup.range2, trial_rng);
      Eigen::MatrixXd x(setup.n, setup.d);
      for (int t = 1; t <= setup.n; ++t) {
        x.row(t - 1) =
            (t < setup.t_star ? q1 : q2).sample(trial_rng).transpose();
      }
      std::vector<SegmentDensity> segs;
      segs.push_back({1, Density(q1)});
      segs.push_back({setup.t_star, Density(q2)});
      const RatioProvider prov = make_oracle_ratio_provider(std::move(segs));
      const Eigen::VectorXd lr = prov.fn(x, 1, t_split, trial_rng);
      const ArgmaxResult am =
          argmax_estimator(compute_cusum(lr, t_split, setup.a_clip));
      if (std::abs(am.estimate.index - setup.t_star) <= 10) ++hits;
    }
    const bool freq_ok = hits >= static_cast<int>(std::ceil(0.95 * trials));
    char line2[128];
    std::snprintf(line2, sizeof(line2),
                  "t_split=%d argmax: %d/%d within +-10 of %d %s\n", t_split,
                  hits, trials, setup.t_star, verdict(freq_ok));
    out << line2;
  }
  out << (all_pass ? "OVERALL PASS\n" : "OVERALL FAIL\n");
  return all_pass ? 0 : 3;
}

// --- theorem-check ---

struct TheoremSetup {
  int d = 10;
  int n = 500;
  int t_star = 150;
  int t_split = 250;
  Eigen::VectorXd mean1;
  Eigen::VectorXd mean2;
  double a_clip = 10.0;
};

Eigen::VectorXd mean_from_json(const json& v, int d, const std::string& what) {
  if (v.is_number()) return Eigen::VectorXd::Constant(d, v.get<double>());
  if (v.is_array()) {
    Eigen::VectorXd m(v.size());
    for (std::size_t i = 0; i < v.size(); ++i) {
      if (!v[i].is_number()) throw DataError(what + ": expected numbers");
      m[static_cast<int>(i)] = v[i].get<double>();
    }
    return m;
  }
  throw DataError(what + ": expected a number or an array");
}

TheoremSetup theorem_setup_from_flags(const FlagMap& flags) {
  TheoremSetup s;
  json j = json::object();
  if (flags.count("setup")) j = load_json_file(flags.at("setup"));
  if (!j.is_object()) throw DataError("setup: expected a JSON object");
  for (auto it = j.begin(); it != j.end(); ++it) {
    const std::string& k = it.key();
    if (k == "d") {
      s.d = it->get<int>();
    } else if (k == "n") {
      s.n = it->get<int>();
    } else if (k == "t_star") {
      s.t_star = it->get<int>();
    } else if (k == "t_split") {
      s.t_split = it->get<int>();
    } else if (k == "a_clip") {
      s.a_clip = it->get<double>();
    } else if (k != "mean1" && k != "mean2") {
      throw DataError("setup: unknown key '" + k + "'");
    }
  }
  s.mean1 = j.contains("mean1") ? mean_from_json(j["mean1"], s.d, "setup/mean1")
                                : Eigen::VectorXd::Zero(s.d);
  s.mean2 = j.contains("mean2") ? mean_from_json(j["mean2"], s.d, "setup/mean2")
                                : Eigen::VectorXd::Ones(s.d);
  if (s.mean1.size() != s.mean2.size()) {
    throw DataError("setup: mean1 and mean2 disagree on dimension");
  }
  if (s.n < 4 || s.t_star < 2 || s.t_star > s.n || s.t_split < 2 ||
      s.t_split > s.n - 1) {
    throw DataError("setup: degenerate geometry");
  }
  if (s.a_clip <= 0.0) throw DataError("setup: a_clip must be positive");
  return s;
}

int cmd_theorem_check(const FlagMap& flags, std::ostream& out) {
  const TheoremSetup setup = theorem_setup_from_flags(flags);
  const int trials =
      static_cast<int>(parse_int(get_flag(flags, "trials", "200"), "--trials"));
  const std::vector<double> betas =
      parse_real_list(get_flag(flags, "betas", "0.05,0.1,0.2"), "--betas");
  RandomSource rng(parse_seed(flags));

  const GaussianSpec p1 = GaussianSpec::isotropic(setup.mean1);
  const GaussianSpec p2 = GaussianSpec::isotropic(setup.mean2);
  const std::vector<AccuracyRow> rows =
      empirical_accuracy(p1, p2, setup.n, setup.t_star, setup.t_split, trials,
                         betas, setup.a_clip, rng);

  bool all_pass = true;
  out << "A=" << setup.a_clip << " C=" << rows.front().c_min
      << " trials=" << trials << "\n";
  for (const auto& r : rows) {
    const bool ok = r.exceedance <= r.beta;
    all_pass = all_pass && ok;
    char line[128];
    std::snprintf(line, sizeof(line),
                  "beta=%.3f alpha=%.1f exceedance=%.4f %s\n", r.beta, r.alpha,
                  r.exceedance, ok ? "PASS" : "FAIL");
    out << line;
  }
  out << (all_pass ? "OVERALL PASS\n" : "OVERALL FAIL\n");
  return all_pass ? 0 : 3;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out,
        std::ostream& err) {
  if (args.empty()) {
    err << kUsage;
    return 1;
  }
  const std::string& cmd = args[0];
  if (cmd == "help" || cmd == "--help" || cmd == "-h") {
    out << kUsage;
    return 0;
  }
  try {
    if (cmd == "detect") {
      return cmd_detect(
          parse_flags(args, 1,
                      {"input", "t-split", "model", "objective", "seed",
                       "ensemble", "out", "cusum-out"}),
          out);
    }
    if (cmd == "detect-online") {
      return cmd_detect_online(
          parse_flags(args, 1,
                      {"input", "window", "stride", "mode", "model",
                       "objective", "seed", "out"}),
          out);
    }
    if (cmd == "simulate") {
      return cmd_simulate(
          parse_flags(args, 1,
                      {"preset", "spec", "t-star", "delta-mu", "seed", "out",
                       "truth-out"}),
          out);
    }
    if (cmd == "evaluate") {
      return cmd_evaluate(parse_flags(args, 1, {"config", "out"}), out);
    }
    if (cmd == "oracle-check") {
      return cmd_oracle_check(parse_flags(args, 1, {"setup", "trials", "seed"}),
                              out);
    }
    if (cmd == "theorem-check") {
      return cmd_theorem_check(
          parse_flags(args, 1, {"setup", "betas", "trials", "seed"}), out);
    }
    err << "unknown subcommand '" << cmd << "'\n" << kUsage;
    return 1;
  } catch (const UsageError& e) {
    err << "error: " << e.what() << "\n" << kUsage;
    return 1;
  } catch (const DataError& e) {
    err << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return 3;
  }
}

}  // namespace drcusum::cli
