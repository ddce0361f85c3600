#include "drcusum/dre.hpp"

#include "support.hpp"

#include <cmath>
#include <memory>

using namespace drcusum;

namespace {

Eigen::MatrixXd normal_matrix(int rows, int cols, RandomSource& rng) {
  Eigen::MatrixXd m(rows, cols);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = rng.normal();
  return m;
}

Eigen::MatrixXd shifted(const Eigen::MatrixXd& m, double delta) {
  return m.array() + delta;
}

// A kernel model whose output is the same everywhere: zero weights on the
// centers, bias chosen so softplus(bias) hits the requested constant.
std::unique_ptr<KernelModel> constant_model(int d, double value) {
  auto m = std::make_unique<KernelModel>(Eigen::MatrixXd::Zero(1, d), 1.0, 1e-6);
  Eigen::VectorXd theta = Eigen::VectorXd::Zero(2);
  theta[0] = std::log(std::expm1(value));  // softplus inverse
  m->set_parameters(theta);
  return m;
}

std::unique_ptr<KernelModel> random_kernel_model(int d, int k, RandomSource& rng) {
  auto m = std::make_unique<KernelModel>(normal_matrix(k, d, rng), 1.5, 1e-6);
  Eigen::VectorXd theta(k + 1);
  for (Eigen::Index i = 0; i < theta.size(); ++i) theta[i] = 0.5 * rng.normal();
  m->set_parameters(theta);
  return m;
}

double max_relative_gradient_gap(DensityRatioModel& model,
                                 const Eigen::MatrixXd& left,
                                 const Eigen::MatrixXd& right,
                                 const ObjectiveSpec& spec) {
  Eigen::VectorXd analytic;
  model.objective_and_gradient(left, right, spec, analytic);

  const Eigen::VectorXd theta = model.parameters();
  Eigen::VectorXd fd(theta.size());
  const double h = 1e-5;
  Eigen::VectorXd probe = theta;
  Eigen::VectorXd unused;
  for (Eigen::Index i = 0; i < theta.size(); ++i) {
    probe[i] = theta[i] + h;
    model.set_parameters(probe);
    const double up = model.objective_and_gradient(left, right, spec, unused);
    probe[i] = theta[i] - h;
    model.set_parameters(probe);
    const double down = model.objective_and_gradient(left, right, spec, unused);
    probe[i] = theta[i];
    fd[i] = (up - down) / (2.0 * h);
  }
  model.set_parameters(theta);

  const double scale = std::max(1e-6, analytic.cwiseAbs().maxCoeff());
  return (fd - analytic).cwiseAbs().maxCoeff() / scale;
}

}  // namespace

TEST_CASE(median_bandwidth_reference_values) {
  RandomSource rng(5);
  Eigen::MatrixXd two(2, 1);
  two << 0.0, 1.0;
  CHECK_CLOSE(median_bandwidth(two, rng), 1.0, 1e-15);

  Eigen::MatrixXd three(3, 1);
  three << 0.0, 1.0, 2.0;
  CHECK_CLOSE(median_bandwidth(three, rng), 1.0, 1e-15);
}

TEST_CASE(median_bandwidth_is_scale_homogeneous) {
  RandomSource rng(8);
  const Eigen::MatrixXd X = normal_matrix(40, 3, rng);
  RandomSource r1(9), r2(9);
  const double base = median_bandwidth(X, r1);
  const double scaled = median_bandwidth((3.0 * X).eval(), r2);
  CHECK_CLOSE(scaled, 3.0 * base, 1e-12);
  CHECK(base > 0.0);
}

TEST_CASE(median_bandwidth_degenerate_inputs) {
  RandomSource rng(5);
  Eigen::MatrixXd one(1, 2);
  one << 0.0, 0.0;
  CHECK_THROWS(UsageError, median_bandwidth(one, rng));
  const Eigen::MatrixXd same = Eigen::MatrixXd::Constant(6, 2, 1.5);
  CHECK_THROWS(DataError, median_bandwidth(same, rng));
}

TEST_CASE(objective_names_round_trip) {
  CHECK(std::string(objective_name(Objective::Kliep)) == "kliep");
  CHECK(std::string(objective_name(Objective::Lsif)) == "lsif");
  CHECK(objective_from_name("kliep") == Objective::Kliep);
  CHECK(objective_from_name("lsif") == Objective::Lsif);
  CHECK_THROWS(DataError, objective_from_name("ulsif"));
}

TEST_CASE(constant_model_objective_values) {
  RandomSource rng(21);
  const Eigen::MatrixXd left = normal_matrix(17, 2, rng);
  const Eigen::MatrixXd right = normal_matrix(23, 2, rng);

  const auto unit = constant_model(2, 1.0);
  CHECK_CLOSE(kliep_objective(*unit, left, right, 1.0), 0.0, 1e-12);
  CHECK_CLOSE(kliep_objective(*unit, left, right, 2.5), 0.0, 1e-12);
  CHECK_CLOSE(lsif_objective(*unit, left, right), -1.0, 1e-12);

  const auto e_model = constant_model(2, std::exp(1.0));
  CHECK_CLOSE(kliep_objective(*e_model, left, right, 1.0), 2.0 - std::exp(1.0),
              1e-12);

  const auto half = constant_model(2, 0.5);
  CHECK_CLOSE(lsif_objective(*half, left, right), -0.75, 1e-12);
}

TEST_CASE(objectives_match_naive_reimplementation) {
  RandomSource rng(33);
  for (int trial = 0; trial < 5; ++trial) {
    const auto model = random_kernel_model(2, 3, rng);
    const Eigen::MatrixXd left = normal_matrix(16, 2, rng);
    const Eigen::MatrixXd right = shifted(normal_matrix(12, 2, rng), 0.5);
    const Eigen::VectorXd wl = model->predict_ratio_batch(left);
    const Eigen::VectorXd wr = model->predict_ratio_batch(right);

    const double lam = 0.7;
    const double kliep_naive =
        wl.array().log().mean() - lam * (wr.mean() - 1.0);
    CHECK_CLOSE(kliep_objective(*model, left, right, lam), kliep_naive, 1e-12);

    const double lsif_naive = wl.array().square().mean() - 2.0 * wr.mean();
    CHECK_CLOSE(lsif_objective(*model, left, right, false), lsif_naive, 1e-12);

    const double lsif_swapped = wr.array().square().mean() - 2.0 * wl.mean();
    CHECK_CLOSE(lsif_objective(*model, left, right, true), lsif_swapped, 1e-12);

    // objective_and_gradient must report the same value as the standalone
    // evaluators on identical batches.
    Eigen::VectorXd g;
    CHECK_CLOSE(model->objective_and_gradient(
                    left, right, ObjectiveSpec{Objective::Kliep, lam, false}, g),
                kliep_naive, 1e-12);
    CHECK_CLOSE(model->objective_and_gradient(
                    left, right, ObjectiveSpec{Objective::Lsif, 1.0, false}, g),
                lsif_naive, 1e-12);
  }
}

TEST_CASE(lsif_swap_flag_exchanges_the_batches) {
  RandomSource rng(41);
  const auto model = random_kernel_model(3, 4, rng);
  const Eigen::MatrixXd a = normal_matrix(10, 3, rng);
  const Eigen::MatrixXd b = shifted(normal_matrix(14, 3, rng), 1.0);
  CHECK_CLOSE(lsif_objective(*model, a, b, true),
              lsif_objective(*model, b, a, false), 1e-15);
}

TEST_CASE(kernel_model_single_center_formula) {
  Eigen::MatrixXd center(1, 1);
  center << 0.0;
  KernelModel m(center, 2.0, 1e-6);
  Eigen::VectorXd theta(2);
  theta << 0.3, 1.1;
  m.set_parameters(theta);

  Eigen::VectorXd x(1);
  x << 1.0;
  const double z = 0.3 + 1.1 * std::exp(-1.0 / 8.0);
  CHECK_CLOSE(m.predict_ratio(x), std::log1p(std::exp(z)), 1e-12);
}

TEST_CASE(kernel_model_validates_construction) {
  CHECK_THROWS(UsageError, KernelModel(Eigen::MatrixXd(0, 2), 1.0, 1e-6));
  CHECK_THROWS(UsageError, KernelModel(Eigen::MatrixXd::Zero(1, 2), 0.0, 1e-6));
  CHECK_THROWS(UsageError, KernelModel(Eigen::MatrixXd::Zero(1, 2), 1.0, 0.0));
  KernelModel ok(Eigen::MatrixXd::Zero(2, 3), 1.0, 1e-6);
  CHECK_THROWS(UsageError, ok.set_parameters(Eigen::VectorXd::Zero(2)));
  CHECK_THROWS(UsageError, ok.raw_batch(Eigen::MatrixXd::Zero(4, 2)));
}

TEST_CASE(mlp_forward_matches_hand_formula) {
  std::vector<Eigen::MatrixXd> w;
  std::vector<Eigen::VectorXd> b;
  w.push_back(Eigen::MatrixXd::Constant(1, 1, 2.0));
  b.push_back(Eigen::VectorXd::Constant(1, 0.5));
  w.push_back(Eigen::MatrixXd::Constant(1, 1, 3.0));
  b.push_back(Eigen::VectorXd::Constant(1, -1.0));
  const auto m = MlpModel::from_layers(1, {1}, 1e-6, w, b);

  Eigen::VectorXd x(1);
  x << 0.0;
  const double hidden = 1.0 / (1.0 + std::exp(-0.5));
  const double z = 3.0 * hidden - 1.0;
  CHECK_CLOSE(m->predict_ratio(x), std::log1p(std::exp(z)), 1e-12);
}

TEST_CASE(mlp_validates_construction) {
  RandomSource rng(1);
  CHECK_THROWS(UsageError, MlpModel(0, {4}, 1e-6, rng));
  CHECK_THROWS(UsageError, MlpModel(2, {}, 1e-6, rng));
  CHECK_THROWS(UsageError, MlpModel(2, {4, 0}, 1e-6, rng));
  CHECK_THROWS(UsageError, MlpModel(2, {4}, 1.5, rng));

  MlpModel ok(2, {4}, 1e-6, rng);
  CHECK_THROWS(UsageError, ok.set_parameters(Eigen::VectorXd::Zero(3)));
  CHECK_THROWS(UsageError, ok.raw_batch(Eigen::MatrixXd::Zero(4, 3)));

  std::vector<Eigen::MatrixXd> w{Eigen::MatrixXd::Zero(2, 3)};
  std::vector<Eigen::VectorXd> b{Eigen::VectorXd::Zero(3)};
  CHECK_THROWS(DataError, MlpModel::from_layers(2, {3}, 1e-6, w, b));
}

TEST_CASE(parameter_round_trip_is_exact) {
  RandomSource rng(17);
  MlpModel m(3, {5, 4}, 1e-6, rng);
  const Eigen::VectorXd p = m.parameters();
  Eigen::VectorXd q = p;
  for (Eigen::Index i = 0; i < q.size(); ++i) q[i] += 0.01 * (i % 7);
  m.set_parameters(q);
  CHECK((m.parameters() - q).cwiseAbs().maxCoeff() == 0.0);

  const Eigen::MatrixXd X = normal_matrix(6, 3, rng);
  const Eigen::VectorXd before = m.raw_batch(X);
  m.set_parameters(p);
  m.set_parameters(q);
  CHECK((m.raw_batch(X) - before).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE(kernel_gradient_matches_finite_differences) {
  RandomSource rng(55);
  const Eigen::MatrixXd left = normal_matrix(14, 2, rng);
  const Eigen::MatrixXd right = shifted(normal_matrix(11, 2, rng), 0.8);
  for (const ObjectiveSpec spec :
       {ObjectiveSpec{Objective::Kliep, 0.7, false},
        ObjectiveSpec{Objective::Kliep, 1.0, false},
        ObjectiveSpec{Objective::Lsif, 1.0, false},
        ObjectiveSpec{Objective::Lsif, 1.0, true}}) {
    const auto model = random_kernel_model(2, 4, rng);
    CHECK(max_relative_gradient_gap(*model, left, right, spec) <= 1e-4);
  }
}

TEST_CASE(mlp_gradient_matches_finite_differences) {
  RandomSource rng(56);
  const Eigen::MatrixXd left = normal_matrix(12, 3, rng);
  const Eigen::MatrixXd right = shifted(normal_matrix(9, 3, rng), 0.6);
  for (const ObjectiveSpec spec :
       {ObjectiveSpec{Objective::Kliep, 1.0, false},
        ObjectiveSpec{Objective::Lsif, 1.0, false},
        ObjectiveSpec{Objective::Lsif, 1.0, true}}) {
    MlpModel model(3, {4, 3}, 1e-6, rng);
    CHECK(max_relative_gradient_gap(model, left, right, spec) <= 1e-4);
  }
}

TEST_CASE(predictions_respect_the_clamp) {
  const auto m = std::make_unique<KernelModel>(Eigen::MatrixXd::Zero(1, 2), 1.0,
                                               1e-4);
  Eigen::VectorXd theta = Eigen::VectorXd::Zero(2);

  theta[0] = 1e7;  // softplus ~ 1e7, far above 1/clamp_eps
  m->set_parameters(theta);
  Eigen::MatrixXd X = Eigen::MatrixXd::Zero(3, 2);
  CHECK_CLOSE(m->predict_ratio_batch(X).maxCoeff(), 1e4, 1e-9);

  theta[0] = -40.0;  // softplus ~ 4e-18, far below clamp_eps
  m->set_parameters(theta);
  CHECK_CLOSE(m->predict_ratio_batch(X).minCoeff(), 1e-4, 1e-18);
  CHECK_CLOSE(m->predict_log_batch(X)[0], std::log(1e-4), 1e-12);
}

TEST_CASE(training_is_deterministic) {
  RandomSource data_rng(71);
  const Eigen::MatrixXd left = normal_matrix(60, 4, data_rng);
  const Eigen::MatrixXd right = shifted(normal_matrix(60, 4, data_rng), 0.7);

  KernelConfig cfg;
  cfg.n_centers = 20;
  cfg.iterations = 50;

  RandomSource r1(4), r2(4);
  const TrainResult a = train(cfg, left, right, r1);
  const TrainResult b = train(cfg, left, right, r2);
  CHECK((a.model->parameters() - b.model->parameters()).cwiseAbs().maxCoeff() ==
        0.0);
  CHECK(a.report.final_objective == b.report.final_objective);
  CHECK(a.report.objective_trace == b.report.objective_trace);
  CHECK(a.report.iterations_run == 50);
}

TEST_CASE(training_validates_inputs) {
  RandomSource rng(3);
  const Eigen::MatrixXd ok = normal_matrix(20, 2, rng);
  const Eigen::MatrixXd tiny = normal_matrix(3, 2, rng);
  const Eigen::MatrixXd wide = normal_matrix(20, 3, rng);

  KernelConfig cfg;
  cfg.n_centers = 10;  // valid baseline so each broken knob fails alone
  cfg.iterations = 5;
  CHECK_THROWS(DataError, train(cfg, tiny, ok, rng));
  CHECK_THROWS(DataError, train(cfg, ok, wide, rng));

  KernelConfig bad = cfg;
  bad.iterations = 0;
  CHECK_THROWS(UsageError, train(bad, ok, ok, rng));
  bad = cfg;
  bad.learning_rate = 0.0;
  CHECK_THROWS(UsageError, train(bad, ok, ok, rng));
  bad = cfg;
  bad.batch_left = 0;
  CHECK_THROWS(UsageError, train(bad, ok, ok, rng));
  bad = cfg;
  bad.lagrange = -1.0;
  CHECK_THROWS(UsageError, train(bad, ok, ok, rng));
  bad = cfg;
  bad.n_centers = 200;  // more centers than left-side samples
  CHECK_THROWS(UsageError, train(bad, ok, ok, rng));
}

TEST_CASE(full_batch_kliep_ascends_its_objective) {
  RandomSource rng(81);
  const Eigen::MatrixXd left = shifted(normal_matrix(60, 2, rng), 0.8);
  const Eigen::MatrixXd right = normal_matrix(60, 2, rng);

  KernelConfig cfg;
  cfg.n_centers = 15;
  cfg.iterations = 200;
  cfg.batch_left = 1000;  // >= side count, so every step sees the same batch
  cfg.batch_right = 1000;
  cfg.learning_rate = 5e-3;

  const TrainResult r = train(cfg, left, right, rng);
  const auto& trace = r.report.objective_trace;
  CHECK(static_cast<int>(trace.size()) == cfg.iterations);
  int up = 0;
  for (std::size_t i = 1; i < trace.size(); ++i) {
    if (trace[i] >= trace[i - 1] - 1e-12) ++up;
  }
  CHECK(up >= static_cast<int>(0.9 * (trace.size() - 1)));
  CHECK(trace.back() > trace.front());
}

TEST_CASE(full_batch_lsif_descends_its_objective) {
  RandomSource rng(82);
  const Eigen::MatrixXd left = shifted(normal_matrix(60, 2, rng), 0.8);
  const Eigen::MatrixXd right = normal_matrix(60, 2, rng);

  KernelConfig cfg;
  cfg.n_centers = 15;
  cfg.objective = Objective::Lsif;
  cfg.iterations = 200;
  cfg.batch_left = 1000;
  cfg.batch_right = 1000;
  cfg.learning_rate = 5e-3;

  const TrainResult r = train(cfg, left, right, rng);
  const auto& trace = r.report.objective_trace;
  int down = 0;
  for (std::size_t i = 1; i < trace.size(); ++i) {
    if (trace[i] <= trace[i - 1] + 1e-12) ++down;
  }
  CHECK(down >= static_cast<int>(0.9 * (trace.size() - 1)));
  CHECK(trace.back() < trace.front());
}

TEST_CASE(identity_problem_learns_a_flat_ratio) {
  RandomSource rng(91);
  const Eigen::MatrixXd left = normal_matrix(200, 10, rng);
  const Eigen::MatrixXd right = normal_matrix(200, 10, rng);

  KernelConfig cfg;
  cfg.n_centers = 50;
  cfg.iterations = 300;
  RandomSource train_rng(1);
  const TrainResult r = train(cfg, left, right, train_rng);

  const Eigen::MatrixXd fresh = normal_matrix(300, 10, rng);
  const double mean_abs_log =
      r.model->predict_log_batch(fresh).cwiseAbs().mean();
  CHECK(mean_abs_log < 0.2);
  CHECK(r.report.normalization_residual < 0.15);
}

TEST_CASE(mean_shift_ratio_has_the_right_sign) {
  RandomSource rng(92);
  const Eigen::MatrixXd left = normal_matrix(200, 10, rng);
  const Eigen::MatrixXd right = shifted(normal_matrix(200, 10, rng), 0.8);

  MlpConfig cfg;
  cfg.hidden_widths = {16, 8};
  cfg.iterations = 400;
  RandomSource train_rng(2);
  const TrainResult r = train(cfg, left, right, train_rng);

  const Eigen::MatrixXd fresh_left = normal_matrix(300, 10, rng);
  const Eigen::MatrixXd fresh_right = shifted(normal_matrix(300, 10, rng), 0.8);
  const double on_left = r.model->predict_log_batch(fresh_left).mean();
  const double on_right = r.model->predict_log_batch(fresh_right).mean();
  CHECK(on_left > 0.0);
  CHECK(on_right < 0.0);
  CHECK(on_left > on_right);
}

TEST_CASE(model_save_load_round_trip) {
  RandomSource rng(61);
  const Eigen::MatrixXd left = normal_matrix(40, 3, rng);
  const Eigen::MatrixXd right = shifted(normal_matrix(40, 3, rng), 0.5);
  const Eigen::MatrixXd probe = normal_matrix(25, 3, rng);

  KernelConfig kc;
  kc.n_centers = 10;
  kc.iterations = 30;
  RandomSource kr(7);
  const TrainResult kernel = train(kc, left, right, kr);

  MlpConfig mc;
  mc.hidden_widths = {6, 4};
  mc.iterations = 30;
  RandomSource mr(7);
  const TrainResult mlp = train(mc, left, right, mr);

  for (const DensityRatioModel* m : {kernel.model.get(), mlp.model.get()}) {
    const std::string path =
        (testsupport::scratch_dir() / (m->kind() + ".json")).string();
    save_model(*m, path);
    const auto back = load_model(path);
    CHECK(back->kind() == m->kind());
    CHECK(back->input_dim() == m->input_dim());
    CHECK((back->parameters() - m->parameters()).cwiseAbs().maxCoeff() == 0.0);
    CHECK((back->predict_ratio_batch(probe) - m->predict_ratio_batch(probe))
              .cwiseAbs()
              .maxCoeff() == 0.0);
    CHECK(back->config_echo == m->config_echo);
  }
}

TEST_CASE(model_json_rejects_garbage) {
  CHECK_THROWS(DataError, model_from_json(nlohmann::json::array()));
  nlohmann::json j;
  j["kind"] = "decision_stump";
  CHECK_THROWS(DataError, model_from_json(j));
  j["kind"] = "kernel_basis";
  CHECK_THROWS(DataError, model_from_json(j));  // missing everything else
  CHECK_THROWS(DataError, load_model("/nonexistent/model.json"));
}

TEST_CASE(train_echoes_its_configuration) {
  RandomSource rng(62);
  const Eigen::MatrixXd left = normal_matrix(30, 2, rng);
  const Eigen::MatrixXd right = shifted(normal_matrix(30, 2, rng), 0.4);

  KernelConfig cfg;
  cfg.n_centers = 8;
  cfg.iterations = 10;
  cfg.learning_rate = 5e-3;
  RandomSource tr(3);
  const TrainResult r = train(cfg, left, right, tr);
  const nlohmann::json& echo = r.model->config_echo;
  CHECK(echo.at("model") == "kernel_basis");
  CHECK(echo.at("objective") == "kliep");
  CHECK(echo.at("iterations") == 10);
  CHECK(echo.at("learning_rate") == 5e-3);

  const DreConfig variant = cfg;
  RandomSource tr2(3);
  const TrainResult same = train(variant, left, right, tr2);
  CHECK((same.model->parameters() - r.model->parameters())
            .cwiseAbs()
            .maxCoeff() == 0.0);
}
