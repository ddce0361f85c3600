#pragma once

#include "drcusum/core.hpp"

#include <nlohmann/json.hpp>

#include <memory>
#include <string>
#include <variant>
#include <vector>

namespace drcusum {

enum class Objective { Kliep, Lsif };

// How the training objective is evaluated. swap_lsif_measures switches the
// LSIF form from the verbatim one (w^2 averaged over the left batch) to the
// conventional one (w^2 over the right batch); see lsif_objective.
struct ObjectiveSpec {
  Objective kind = Objective::Kliep;
  double lagrange = 1.0;
  bool swap_lsif_measures = false;
};

struct KernelConfig {
  int n_centers = 100;
  double bandwidth = 0.0;  // 0 = median heuristic
  Objective objective = Objective::Kliep;
  double learning_rate = 1e-2;
  int iterations = 500;
  int batch_left = 64;
  int batch_right = 64;
  double lagrange = 1.0;
  bool swap_lsif_measures = false;
  double clamp_eps = 1e-6;
};

struct MlpConfig {
  std::vector<int> hidden_widths = {256, 512, 128};
  Objective objective = Objective::Kliep;
  double learning_rate = 1e-2;
  int iterations = 500;
  int batch_left = 64;
  int batch_right = 64;
  double lagrange = 1.0;
  bool swap_lsif_measures = false;
  double clamp_eps = 1e-6;
};

using DreConfig = std::variant<KernelConfig, MlpConfig>;

struct TrainReport {
  double final_objective = 0.0;
  int iterations_run = 0;
  double normalization_residual = 0.0;  // |E_right[w] - 1| on held-out data
  std::vector<double> objective_trace;  // per-iteration minibatch values
};

// A trained ratio estimate w(x) ~ p_left(x)/p_right(x). Outputs are clamped to
// [clamp_eps, 1/clamp_eps] so downstream logs stay finite; the clamp's
// subgradient is zero, which the analytic gradients honor exactly.
class DensityRatioModel {
 public:
  virtual ~DensityRatioModel() = default;

  virtual std::string kind() const = 0;
  virtual int input_dim() const = 0;
  double clamp_eps() const { return clamp_eps_; }

  virtual Eigen::VectorXd parameters() const = 0;
  virtual void set_parameters(const Eigen::VectorXd& p) = 0;

  // Softplus output before clamping, one row of X per sample.
  virtual Eigen::VectorXd raw_batch(const Eigen::MatrixXd& X) const = 0;

  double predict_ratio(const Eigen::VectorXd& x) const;
  Eigen::VectorXd predict_ratio_batch(const Eigen::MatrixXd& X) const;
  Eigen::VectorXd predict_log_batch(const Eigen::MatrixXd& X) const;

  // Objective value on the two batches plus d(objective)/d(parameters).
  virtual double objective_and_gradient(const Eigen::MatrixXd& left,
                                        const Eigen::MatrixXd& right,
                                        const ObjectiveSpec& spec,
                                        Eigen::VectorXd& grad) const = 0;

  virtual nlohmann::json to_json() const = 0;

  // Echoed verbatim into to_json() under "config"; train() fills it with the
  // settings the model was fitted under.
  nlohmann::json config_echo = nlohmann::json::object();

 protected:
  double clamp_eps_ = 1e-6;
};

// w(x) = softplus(theta_0 + sum_k theta_k exp(-|x - c_k|^2 / (2 sigma^2))),
// centers drawn from the left-side sample.
class KernelModel : public DensityRatioModel {
 public:
  KernelModel(Eigen::MatrixXd centers, double bandwidth, double clamp_eps);

  std::string kind() const override { return "kernel_basis"; }
  int input_dim() const override { return static_cast<int>(centers_.cols()); }
  Eigen::VectorXd parameters() const override { return theta_; }
  void set_parameters(const Eigen::VectorXd& p) override;
  Eigen::VectorXd raw_batch(const Eigen::MatrixXd& X) const override;
  double objective_and_gradient(const Eigen::MatrixXd& left,
                                const Eigen::MatrixXd& right,
                                const ObjectiveSpec& spec,
                                Eigen::VectorXd& grad) const override;
  nlohmann::json to_json() const override;

  const Eigen::MatrixXd& centers() const { return centers_; }
  double bandwidth() const { return bandwidth_; }

 private:
  Eigen::MatrixXd features(const Eigen::MatrixXd& X) const;

  Eigen::MatrixXd centers_;  // k x d
  double bandwidth_;
  Eigen::VectorXd theta_;  // [theta_0, theta_1..theta_k]
};

// Feed-forward network: sigmoid hidden layers, softplus output. Weights start
// Glorot-uniform, biases zero except the output bias ln(e-1), so the initial
// ratio estimate is ~1 everywhere.
class MlpModel : public DensityRatioModel {
 public:
  MlpModel(int input_dim, const std::vector<int>& hidden_widths,
           double clamp_eps, RandomSource& rng);

  // Reassemble a persisted network without touching an rng.
  static std::unique_ptr<MlpModel> from_layers(
      int input_dim, const std::vector<int>& hidden_widths, double clamp_eps,
      std::vector<Eigen::MatrixXd> weights, std::vector<Eigen::VectorXd> biases);

  std::string kind() const override { return "feed_forward"; }
  int input_dim() const override { return input_dim_; }
  Eigen::VectorXd parameters() const override;
  void set_parameters(const Eigen::VectorXd& p) override;
  Eigen::VectorXd raw_batch(const Eigen::MatrixXd& X) const override;
  double objective_and_gradient(const Eigen::MatrixXd& left,
                                const Eigen::MatrixXd& right,
                                const ObjectiveSpec& spec,
                                Eigen::VectorXd& grad) const override;
  nlohmann::json to_json() const override;

  const std::vector<int>& widths() const { return widths_; }

 private:
  struct Forward {
    std::vector<Eigen::MatrixXd> activations;  // [X, A_1..A_{L-1}]
    Eigen::VectorXd z;                         // output pre-activation
  };
  Forward forward(const Eigen::MatrixXd& X) const;

  MlpModel() = default;

  int input_dim_ = 0;
  std::vector<int> widths_;  // [d, hidden..., 1]
  std::vector<Eigen::MatrixXd> w_;
  std::vector<Eigen::VectorXd> b_;
};

// Median pairwise distance over a subsample of at most 500 points.
double median_bandwidth(const Eigen::MatrixXd& samples, RandomSource& rng);

const char* objective_name(Objective o);
Objective objective_from_name(const std::string& s);

// The JSON form a trained model echoes; also used to describe detector
// configurations in detection results before any model exists.
nlohmann::json dre_config_json(const DreConfig& config);

// Empirical objectives. KLIEP (to be maximized):
//   (1/N1) sum_left log w - lagrange ((1/N2) sum_right w - 1)
// LSIF (to be minimized), verbatim form:
//   (1/N1) sum_left w^2 - (2/N2) sum_right w
// The verbatim form weights w^2 by the left measure, whose pointwise optimum is
// the inverted ratio p_right/p_left; swap_measures=true evaluates the
// conventional form with the measures exchanged.
double kliep_objective(const DensityRatioModel& model,
                       const Eigen::MatrixXd& left, const Eigen::MatrixXd& right,
                       double lagrange);
double lsif_objective(const DensityRatioModel& model, const Eigen::MatrixXd& left,
                      const Eigen::MatrixXd& right, bool swap_measures = false);

struct TrainResult {
  std::unique_ptr<DensityRatioModel> model;
  TrainReport report;
};

// Algorithm: repeat for the configured iterations; sample N1/N2 minibatches
// (with replacement) from the two sides, take one constant-rate gradient step
// on the configured objective (ascent for KLIEP, descent for LSIF). 10% of each
// side is held out for the report diagnostics. Deterministic given the rng.
TrainResult train(const KernelConfig& config, const Eigen::MatrixXd& left,
                  const Eigen::MatrixXd& right, RandomSource& rng);
TrainResult train(const MlpConfig& config, const Eigen::MatrixXd& left,
                  const Eigen::MatrixXd& right, RandomSource& rng);
TrainResult train(const DreConfig& config, const Eigen::MatrixXd& left,
                  const Eigen::MatrixXd& right, RandomSource& rng);

void save_model(const DensityRatioModel& model, const std::string& path);
std::unique_ptr<DensityRatioModel> load_model(const std::string& path);
std::unique_ptr<DensityRatioModel> model_from_json(const nlohmann::json& j);

}  // namespace drcusum
