#include "drcusum/dre.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <stdexcept>
#include <utility>

namespace drcusum {
namespace {

double softplus(double z) {
  if (z > 30.0) return z;
  if (z < -30.0) return std::exp(z);
  return std::log1p(std::exp(z));
}

double sigmoid(double z) { return 1.0 / (1.0 + std::exp(-z)); }

Eigen::VectorXd softplus_vec(const Eigen::VectorXd& z) {
  return z.unaryExpr([](double v) { return softplus(v); });
}

Eigen::VectorXd clamp_vec(const Eigen::VectorXd& raw, double eps) {
  const double hi = 1.0 / eps;
  return raw.unaryExpr([eps, hi](double v) { return std::clamp(v, eps, hi); });
}

// dw/dz where w = clamp(softplus(z)); zero once the clamp is active.
Eigen::VectorXd clamp_mask_sigmoid(const Eigen::VectorXd& z,
                                   const Eigen::VectorXd& raw, double eps) {
  const double hi = 1.0 / eps;
  Eigen::VectorXd u(z.size());
  for (Eigen::Index i = 0; i < z.size(); ++i)
    u[i] = (raw[i] < eps || raw[i] > hi) ? 0.0 : sigmoid(z[i]);
  return u;
}

double objective_value(const Eigen::VectorXd& wl, const Eigen::VectorXd& wr,
                       const ObjectiveSpec& spec) {
  const double n1 = static_cast<double>(wl.size());
  const double n2 = static_cast<double>(wr.size());
  if (spec.kind == Objective::Kliep) {
    const double left = wl.array().log().sum() / n1;
    return left - spec.lagrange * (wr.sum() / n2 - 1.0);
  }
  if (spec.swap_lsif_measures)
    return wr.array().square().sum() / n2 - 2.0 * wl.sum() / n1;
  return wl.array().square().sum() / n1 - 2.0 * wr.sum() / n2;
}

// d(objective)/dz per sample, with the clamp mask already folded into u.
void objective_coeffs(const Eigen::VectorXd& wl, const Eigen::VectorXd& wr,
                      const Eigen::VectorXd& ul, const Eigen::VectorXd& ur,
                      const ObjectiveSpec& spec, Eigen::VectorXd& cl,
                      Eigen::VectorXd& cr) {
  const double n1 = static_cast<double>(wl.size());
  const double n2 = static_cast<double>(wr.size());
  if (spec.kind == Objective::Kliep) {
    cl = (ul.array() / wl.array() / n1).matrix();
    cr = (-spec.lagrange / n2) * ur;
  } else if (spec.swap_lsif_measures) {
    cl = (-2.0 / n1) * ul;
    cr = (2.0 / n2) * (wr.array() * ur.array()).matrix();
  } else {
    cl = (2.0 / n1) * (wl.array() * ul.array()).matrix();
    cr = (-2.0 / n2) * ur;
  }
}

std::vector<int> shuffled_indices(int n, RandomSource& rng) {
  std::vector<int> idx(n);
  for (int i = 0; i < n; ++i) idx[i] = i;
  for (int i = n - 1; i > 0; --i) {
    const int j = static_cast<int>(rng.uniform_index(i + 1));
    std::swap(idx[i], idx[j]);
  }
  return idx;
}

Eigen::MatrixXd gather_rows(const Eigen::MatrixXd& X, const std::vector<int>& rows,
                            int count) {
  Eigen::MatrixXd out(count, X.cols());
  for (int i = 0; i < count; ++i) out.row(i) = X.row(rows[i]);
  return out;
}

nlohmann::json matrix_to_json(const Eigen::MatrixXd& m) {
  nlohmann::json rows = nlohmann::json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    nlohmann::json row = nlohmann::json::array();
    for (Eigen::Index j = 0; j < m.cols(); ++j) row.push_back(m(i, j));
    rows.push_back(std::move(row));
  }
  return rows;
}

Eigen::MatrixXd matrix_from_json(const nlohmann::json& j, const std::string& what) {
  if (!j.is_array() || j.empty())
    throw DataError(what + ": expected a non-empty array of rows");
  const auto cols = j[0].size();
  Eigen::MatrixXd m(j.size(), cols);
  for (std::size_t i = 0; i < j.size(); ++i) {
    if (!j[i].is_array() || j[i].size() != cols)
      throw DataError(what + ": row " + std::to_string(i) + " has inconsistent width");
    for (std::size_t c = 0; c < cols; ++c) {
      if (!j[i][c].is_number())
        throw DataError(what + ": non-numeric entry in row " + std::to_string(i));
      m(i, c) = j[i][c].get<double>();
    }
  }
  return m;
}

Eigen::VectorXd vector_from_json(const nlohmann::json& j, const std::string& what) {
  if (!j.is_array()) throw DataError(what + ": expected an array");
  Eigen::VectorXd v(j.size());
  for (std::size_t i = 0; i < j.size(); ++i) {
    if (!j[i].is_number())
      throw DataError(what + ": non-numeric entry at position " + std::to_string(i));
    v[static_cast<Eigen::Index>(i)] = j[i].get<double>();
  }
  return v;
}

nlohmann::json vector_to_json(const Eigen::VectorXd& v) {
  nlohmann::json a = nlohmann::json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) a.push_back(v[i]);
  return a;
}

}  // namespace

const char* objective_name(Objective o) {
  return o == Objective::Kliep ? "kliep" : "lsif";
}

Objective objective_from_name(const std::string& s) {
  if (s == "kliep") return Objective::Kliep;
  if (s == "lsif") return Objective::Lsif;
  throw DataError("unknown objective '" + s + "'");
}

double DensityRatioModel::predict_ratio(const Eigen::VectorXd& x) const {
  Eigen::MatrixXd row(1, x.size());
  row.row(0) = x.transpose();
  return clamp_vec(raw_batch(row), clamp_eps_)[0];
}

Eigen::VectorXd DensityRatioModel::predict_ratio_batch(const Eigen::MatrixXd& X) const {
  return clamp_vec(raw_batch(X), clamp_eps_);
}

Eigen::VectorXd DensityRatioModel::predict_log_batch(const Eigen::MatrixXd& X) const {
  return predict_ratio_batch(X).array().log().matrix();
}

KernelModel::KernelModel(Eigen::MatrixXd centers, double bandwidth, double clamp_eps)
    : centers_(std::move(centers)), bandwidth_(bandwidth) {
  if (centers_.rows() < 1) throw UsageError("kernel model needs at least one center");
  if (!(bandwidth_ > 0.0)) throw UsageError("kernel bandwidth must be positive");
  if (!(clamp_eps > 0.0 && clamp_eps < 1.0))
    throw UsageError("clamp_eps must lie in (0, 1)");
  clamp_eps_ = clamp_eps;
  theta_ = Eigen::VectorXd::Zero(centers_.rows() + 1);
}

void KernelModel::set_parameters(const Eigen::VectorXd& p) {
  if (p.size() != theta_.size())
    throw UsageError("kernel model expects " + std::to_string(theta_.size()) +
                     " parameters, got " + std::to_string(p.size()));
  theta_ = p;
}

Eigen::MatrixXd KernelModel::features(const Eigen::MatrixXd& X) const {
  // |x - c|^2 = |x|^2 + |c|^2 - 2 x.c, computed as one product.
  Eigen::VectorXd xn = X.rowwise().squaredNorm();
  Eigen::VectorXd cn = centers_.rowwise().squaredNorm();
  Eigen::MatrixXd sq = (-2.0 * (X * centers_.transpose())).colwise() + xn;
  sq.rowwise() += cn.transpose();
  return (sq / (-2.0 * bandwidth_ * bandwidth_)).array().exp();
}

Eigen::VectorXd KernelModel::raw_batch(const Eigen::MatrixXd& X) const {
  if (X.cols() != centers_.cols())
    throw UsageError("input dimension mismatch: model expects " +
                     std::to_string(centers_.cols()) + " columns");
  Eigen::VectorXd z =
      (features(X) * theta_.tail(theta_.size() - 1)).array() + theta_[0];
  return softplus_vec(z);
}

double KernelModel::objective_and_gradient(const Eigen::MatrixXd& left,
                                           const Eigen::MatrixXd& right,
                                           const ObjectiveSpec& spec,
                                           Eigen::VectorXd& grad) const {
  const Eigen::MatrixXd phi_l = features(left);
  const Eigen::MatrixXd phi_r = features(right);
  const Eigen::VectorXd tail = theta_.tail(theta_.size() - 1);
  const Eigen::VectorXd zl = (phi_l * tail).array() + theta_[0];
  const Eigen::VectorXd zr = (phi_r * tail).array() + theta_[0];
  const Eigen::VectorXd raw_l = softplus_vec(zl);
  const Eigen::VectorXd raw_r = softplus_vec(zr);
  const Eigen::VectorXd wl = clamp_vec(raw_l, clamp_eps_);
  const Eigen::VectorXd wr = clamp_vec(raw_r, clamp_eps_);
  const Eigen::VectorXd ul = clamp_mask_sigmoid(zl, raw_l, clamp_eps_);
  const Eigen::VectorXd ur = clamp_mask_sigmoid(zr, raw_r, clamp_eps_);

  Eigen::VectorXd cl, cr;
  objective_coeffs(wl, wr, ul, ur, spec, cl, cr);
  grad.resize(theta_.size());
  grad[0] = cl.sum() + cr.sum();
  grad.tail(theta_.size() - 1) = phi_l.transpose() * cl + phi_r.transpose() * cr;
  return objective_value(wl, wr, spec);
}

nlohmann::json KernelModel::to_json() const {
  nlohmann::json j;
  j["kind"] = kind();
  j["input_dim"] = input_dim();
  j["clamp_eps"] = clamp_eps_;
  j["bandwidth"] = bandwidth_;
  j["centers"] = matrix_to_json(centers_);
  j["parameters"] = vector_to_json(theta_);
  j["config"] = config_echo;
  return j;
}

MlpModel::MlpModel(int input_dim, const std::vector<int>& hidden_widths,
                   double clamp_eps, RandomSource& rng) {
  if (input_dim < 1) throw UsageError("network input dimension must be positive");
  if (hidden_widths.empty()) throw UsageError("network needs at least one hidden layer");
  for (int w : hidden_widths)
    if (w < 1) throw UsageError("hidden widths must be positive");
  if (!(clamp_eps > 0.0 && clamp_eps < 1.0))
    throw UsageError("clamp_eps must lie in (0, 1)");
  clamp_eps_ = clamp_eps;
  input_dim_ = input_dim;
  widths_.push_back(input_dim);
  widths_.insert(widths_.end(), hidden_widths.begin(), hidden_widths.end());
  widths_.push_back(1);

  for (std::size_t l = 0; l + 1 < widths_.size(); ++l) {
    const int fan_in = widths_[l];
    const int fan_out = widths_[l + 1];
    const double limit = std::sqrt(6.0 / (fan_in + fan_out));
    Eigen::MatrixXd w(fan_in, fan_out);
    for (Eigen::Index i = 0; i < w.size(); ++i)
      w.data()[i] = rng.uniform(-limit, limit);
    w_.push_back(std::move(w));
    b_.push_back(Eigen::VectorXd::Zero(fan_out));
  }
  // softplus(ln(e - 1)) = 1, so the untrained network outputs a unit ratio.
  b_.back()[0] = std::log(std::expm1(1.0));
}

std::unique_ptr<MlpModel> MlpModel::from_layers(int input_dim,
                                                const std::vector<int>& hidden_widths,
                                                double clamp_eps,
                                                std::vector<Eigen::MatrixXd> weights,
                                                std::vector<Eigen::VectorXd> biases) {
  if (!(clamp_eps > 0.0 && clamp_eps < 1.0))
    throw DataError("clamp_eps must lie in (0, 1)");
  std::vector<int> widths;
  widths.push_back(input_dim);
  widths.insert(widths.end(), hidden_widths.begin(), hidden_widths.end());
  widths.push_back(1);
  if (weights.size() != widths.size() - 1 || biases.size() != weights.size())
    throw DataError("layer count does not match the declared widths");
  for (std::size_t l = 0; l + 1 < widths.size(); ++l) {
    if (weights[l].rows() != widths[l] || weights[l].cols() != widths[l + 1] ||
        biases[l].size() != widths[l + 1])
      throw DataError("layer " + std::to_string(l) + " has shape " +
                      std::to_string(weights[l].rows()) + "x" +
                      std::to_string(weights[l].cols()) + ", expected " +
                      std::to_string(widths[l]) + "x" + std::to_string(widths[l + 1]));
  }
  auto model = std::unique_ptr<MlpModel>(new MlpModel());
  model->clamp_eps_ = clamp_eps;
  model->input_dim_ = input_dim;
  model->widths_ = std::move(widths);
  model->w_ = std::move(weights);
  model->b_ = std::move(biases);
  return model;
}

Eigen::VectorXd MlpModel::parameters() const {
  Eigen::Index total = 0;
  for (std::size_t l = 0; l < w_.size(); ++l) total += w_[l].size() + b_[l].size();
  Eigen::VectorXd p(total);
  Eigen::Index off = 0;
  for (std::size_t l = 0; l < w_.size(); ++l) {
    Eigen::Map<Eigen::MatrixXd>(p.data() + off, w_[l].rows(), w_[l].cols()) = w_[l];
    off += w_[l].size();
    p.segment(off, b_[l].size()) = b_[l];
    off += b_[l].size();
  }
  return p;
}

void MlpModel::set_parameters(const Eigen::VectorXd& p) {
  Eigen::Index total = 0;
  for (std::size_t l = 0; l < w_.size(); ++l) total += w_[l].size() + b_[l].size();
  if (p.size() != total)
    throw UsageError("network expects " + std::to_string(total) +
                     " parameters, got " + std::to_string(p.size()));
  Eigen::Index off = 0;
  for (std::size_t l = 0; l < w_.size(); ++l) {
    w_[l] = Eigen::Map<const Eigen::MatrixXd>(p.data() + off, w_[l].rows(),
                                              w_[l].cols());
    off += w_[l].size();
    b_[l] = p.segment(off, b_[l].size());
    off += b_[l].size();
  }
}

MlpModel::Forward MlpModel::forward(const Eigen::MatrixXd& X) const {
  Forward f;
  f.activations.reserve(w_.size());
  f.activations.push_back(X);
  for (std::size_t l = 0; l + 1 < w_.size(); ++l) {
    Eigen::MatrixXd z = (f.activations.back() * w_[l]).rowwise() + b_[l].transpose();
    f.activations.push_back((1.0 / (1.0 + (-z.array()).exp())).matrix());
  }
  f.z = (f.activations.back() * w_.back()).col(0).array() + b_.back()[0];
  return f;
}

Eigen::VectorXd MlpModel::raw_batch(const Eigen::MatrixXd& X) const {
  if (X.cols() != input_dim_)
    throw UsageError("input dimension mismatch: model expects " +
                     std::to_string(input_dim_) + " columns");
  return softplus_vec(forward(X).z);
}

double MlpModel::objective_and_gradient(const Eigen::MatrixXd& left,
                                        const Eigen::MatrixXd& right,
                                        const ObjectiveSpec& spec,
                                        Eigen::VectorXd& grad) const {
  const Forward fl = forward(left);
  const Forward fr = forward(right);
  const Eigen::VectorXd raw_l = softplus_vec(fl.z);
  const Eigen::VectorXd raw_r = softplus_vec(fr.z);
  const Eigen::VectorXd wl = clamp_vec(raw_l, clamp_eps_);
  const Eigen::VectorXd wr = clamp_vec(raw_r, clamp_eps_);
  const Eigen::VectorXd ul = clamp_mask_sigmoid(fl.z, raw_l, clamp_eps_);
  const Eigen::VectorXd ur = clamp_mask_sigmoid(fr.z, raw_r, clamp_eps_);

  Eigen::VectorXd cl, cr;
  objective_coeffs(wl, wr, ul, ur, spec, cl, cr);

  std::vector<Eigen::MatrixXd> gw;
  std::vector<Eigen::VectorXd> gb;
  for (std::size_t l = 0; l < w_.size(); ++l) {
    gw.emplace_back(Eigen::MatrixXd::Zero(w_[l].rows(), w_[l].cols()));
    gb.emplace_back(Eigen::VectorXd::Zero(b_[l].size()));
  }
  auto accumulate = [&](const Forward& f, const Eigen::VectorXd& coeff) {
    const std::size_t last = w_.size() - 1;
    gw[last].noalias() += f.activations[last].transpose() * coeff;
    gb[last][0] += coeff.sum();
    Eigen::MatrixXd delta = coeff * w_[last].transpose();  // B x widths_[last]
    for (std::size_t l = last; l-- > 0;) {
      const Eigen::MatrixXd& a = f.activations[l + 1];
      delta.array() *= a.array() * (1.0 - a.array());
      gw[l].noalias() += f.activations[l].transpose() * delta;
      gb[l] += delta.colwise().sum().transpose();
      if (l > 0) delta = (delta * w_[l].transpose()).eval();
    }
  };
  accumulate(fl, cl);
  accumulate(fr, cr);

  Eigen::Index total = 0;
  for (std::size_t l = 0; l < w_.size(); ++l) total += w_[l].size() + b_[l].size();
  grad.resize(total);
  Eigen::Index off = 0;
  for (std::size_t l = 0; l < w_.size(); ++l) {
    Eigen::Map<Eigen::MatrixXd>(grad.data() + off, gw[l].rows(), gw[l].cols()) = gw[l];
    off += gw[l].size();
    grad.segment(off, gb[l].size()) = gb[l];
    off += gb[l].size();
  }
  return objective_value(wl, wr, spec);
}

nlohmann::json MlpModel::to_json() const {
  nlohmann::json j;
  j["kind"] = kind();
  j["input_dim"] = input_dim_;
  j["clamp_eps"] = clamp_eps_;
  nlohmann::json hidden = nlohmann::json::array();
  for (std::size_t l = 1; l + 1 < widths_.size(); ++l) hidden.push_back(widths_[l]);
  j["hidden_widths"] = hidden;
  nlohmann::json layers = nlohmann::json::array();
  for (std::size_t l = 0; l < w_.size(); ++l) {
    nlohmann::json layer;
    layer["weights"] = matrix_to_json(w_[l]);
    layer["bias"] = vector_to_json(b_[l]);
    layers.push_back(std::move(layer));
  }
  j["layers"] = std::move(layers);
  j["config"] = config_echo;
  return j;
}

double median_bandwidth(const Eigen::MatrixXd& samples, RandomSource& rng) {
  const int n = static_cast<int>(samples.rows());
  if (n < 2) throw UsageError("median bandwidth needs at least 2 samples");
  const int sub = std::min(n, 500);
  std::vector<int> idx(n);
  for (int i = 0; i < n; ++i) idx[i] = i;
  for (int i = 0; i < sub; ++i) {
    const int j = i + static_cast<int>(rng.uniform_index(n - i));
    std::swap(idx[i], idx[j]);
  }
  std::vector<double> dists;
  dists.reserve(static_cast<std::size_t>(sub) * (sub - 1) / 2);
  for (int i = 0; i < sub; ++i)
    for (int j = i + 1; j < sub; ++j)
      dists.push_back((samples.row(idx[i]) - samples.row(idx[j])).norm());
  auto mid = dists.begin() + static_cast<std::ptrdiff_t>(dists.size() / 2);
  std::nth_element(dists.begin(), mid, dists.end());
  if (!(*mid > 0.0))
    throw DataError("median pairwise distance is zero; cannot pick a bandwidth");
  return *mid;
}

double kliep_objective(const DensityRatioModel& model, const Eigen::MatrixXd& left,
                       const Eigen::MatrixXd& right, double lagrange) {
  ObjectiveSpec spec{Objective::Kliep, lagrange, false};
  return objective_value(model.predict_ratio_batch(left),
                         model.predict_ratio_batch(right), spec);
}

double lsif_objective(const DensityRatioModel& model, const Eigen::MatrixXd& left,
                      const Eigen::MatrixXd& right, bool swap_measures) {
  ObjectiveSpec spec{Objective::Lsif, 1.0, swap_measures};
  return objective_value(model.predict_ratio_batch(left),
                         model.predict_ratio_batch(right), spec);
}

namespace {

struct SplitData {
  Eigen::MatrixXd train;
  Eigen::MatrixXd held;
};

SplitData hold_out_tenth(const Eigen::MatrixXd& X, RandomSource& rng) {
  const int n = static_cast<int>(X.rows());
  const int k = n / 10;
  std::vector<int> idx = shuffled_indices(n, rng);
  SplitData s;
  s.held = gather_rows(X, idx, k);
  std::vector<int> rest(idx.begin() + k, idx.end());
  s.train = gather_rows(X, rest, n - k);
  return s;
}

void check_train_inputs(const Eigen::MatrixXd& left, const Eigen::MatrixXd& right,
                        int iterations, double lr, int batch_left, int batch_right,
                        double lagrange) {
  if (left.rows() < 4 || right.rows() < 4)
    throw DataError("each side needs at least 4 samples to fit a ratio model");
  if (left.cols() != right.cols())
    throw DataError("the two sides disagree on dimension: " +
                    std::to_string(left.cols()) + " vs " +
                    std::to_string(right.cols()));
  if (iterations < 1) throw UsageError("iterations must be positive");
  if (!(lr > 0.0)) throw UsageError("learning_rate must be positive");
  if (batch_left < 1 || batch_right < 1) throw UsageError("batch sizes must be positive");
  if (lagrange < 0.0) throw UsageError("lagrange must be non-negative");
}

TrainResult run_training(std::unique_ptr<DensityRatioModel> model,
                         const ObjectiveSpec& spec, double lr, int iterations,
                         int batch_left, int batch_right,
                         const SplitData& left, const SplitData& right,
                         RandomSource& rng) {
  const int nl = static_cast<int>(left.train.rows());
  const int nr = static_cast<int>(right.train.rows());
  const double direction = spec.kind == Objective::Kliep ? 1.0 : -1.0;

  TrainReport report;
  report.objective_trace.reserve(iterations);
  // A batch size >= the side's sample count means full-batch steps: use the
  // whole side verbatim instead of resampling it.
  const bool full_left = batch_left >= nl;
  const bool full_right = batch_right >= nr;
  Eigen::MatrixXd bl(full_left ? nl : batch_left, left.train.cols());
  Eigen::MatrixXd br(full_right ? nr : batch_right, right.train.cols());
  if (full_left) bl = left.train;
  if (full_right) br = right.train;
  Eigen::VectorXd grad;
  for (int it = 0; it < iterations; ++it) {
    if (!full_left)
      for (int i = 0; i < batch_left; ++i)
        bl.row(i) = left.train.row(static_cast<Eigen::Index>(rng.uniform_index(nl)));
    if (!full_right)
      for (int i = 0; i < batch_right; ++i)
        br.row(i) = right.train.row(static_cast<Eigen::Index>(rng.uniform_index(nr)));
    const double value = model->objective_and_gradient(bl, br, spec, grad);
    if (!std::isfinite(value) || !grad.allFinite())
      throw std::runtime_error("training diverged at iteration " +
                               std::to_string(it + 1) +
                               "; try a smaller learning rate");
    report.objective_trace.push_back(value);
    model->set_parameters(model->parameters() + (direction * lr) * grad);
    ++report.iterations_run;
  }

  Eigen::VectorXd g_unused;
  report.final_objective =
      model->objective_and_gradient(left.train, right.train, spec, g_unused);
  const Eigen::MatrixXd& norm_src = right.held.rows() > 0 ? right.held : right.train;
  report.normalization_residual =
      std::abs(model->predict_ratio_batch(norm_src).mean() - 1.0);
  return TrainResult{std::move(model), std::move(report)};
}

nlohmann::json common_echo(Objective obj, double lr, int iterations, int batch_left,
                           int batch_right, double lagrange, bool swap, double eps) {
  nlohmann::json j;
  j["objective"] = objective_name(obj);
  j["learning_rate"] = lr;
  j["iterations"] = iterations;
  j["batch_left"] = batch_left;
  j["batch_right"] = batch_right;
  j["lagrange"] = lagrange;
  j["swap_lsif_measures"] = swap;
  j["clamp_eps"] = eps;
  return j;
}

}  // namespace

nlohmann::json dre_config_json(const DreConfig& config) {
  return std::visit(
      [](const auto& c) {
        nlohmann::json echo =
            common_echo(c.objective, c.learning_rate, c.iterations, c.batch_left,
                        c.batch_right, c.lagrange, c.swap_lsif_measures,
                        c.clamp_eps);
        if constexpr (std::is_same_v<std::decay_t<decltype(c)>, KernelConfig>) {
          echo["model"] = "kernel_basis";
          echo["n_centers"] = c.n_centers;
          echo["bandwidth"] = c.bandwidth;
        } else {
          echo["model"] = "feed_forward";
          echo["hidden_widths"] = c.hidden_widths;
        }
        return echo;
      },
      config);
}

TrainResult train(const KernelConfig& config, const Eigen::MatrixXd& left,
                  const Eigen::MatrixXd& right, RandomSource& rng) {
  check_train_inputs(left, right, config.iterations, config.learning_rate,
                     config.batch_left, config.batch_right, config.lagrange);
  if (config.n_centers < 1) throw UsageError("n_centers must be positive");
  if (config.n_centers > left.rows())
    throw UsageError("n_centers (" + std::to_string(config.n_centers) +
                     ") exceeds the left-side sample count (" +
                     std::to_string(left.rows()) + ")");
  if (config.bandwidth < 0.0) throw UsageError("bandwidth must be positive (or 0 for the median heuristic)");

  SplitData l = hold_out_tenth(left, rng);
  SplitData r = hold_out_tenth(right, rng);

  double sigma = config.bandwidth;
  if (sigma == 0.0) {
    Eigen::MatrixXd combined(l.train.rows() + r.train.rows(), left.cols());
    combined << l.train, r.train;
    sigma = median_bandwidth(combined, rng);
  }

  const int k = std::min<int>(config.n_centers, static_cast<int>(l.train.rows()));
  std::vector<int> order = shuffled_indices(static_cast<int>(l.train.rows()), rng);
  Eigen::MatrixXd centers = gather_rows(l.train, order, k);

  auto model = std::make_unique<KernelModel>(std::move(centers), sigma,
                                             config.clamp_eps);
  model->config_echo = dre_config_json(config);

  ObjectiveSpec spec{config.objective, config.lagrange, config.swap_lsif_measures};
  return run_training(std::move(model), spec, config.learning_rate,
                      config.iterations, config.batch_left, config.batch_right, l,
                      r, rng);
}

TrainResult train(const MlpConfig& config, const Eigen::MatrixXd& left,
                  const Eigen::MatrixXd& right, RandomSource& rng) {
  check_train_inputs(left, right, config.iterations, config.learning_rate,
                     config.batch_left, config.batch_right, config.lagrange);

  SplitData l = hold_out_tenth(left, rng);
  SplitData r = hold_out_tenth(right, rng);

  auto model = std::make_unique<MlpModel>(static_cast<int>(left.cols()),
                                          config.hidden_widths, config.clamp_eps,
                                          rng);
  model->config_echo = dre_config_json(config);

  ObjectiveSpec spec{config.objective, config.lagrange, config.swap_lsif_measures};
  return run_training(std::move(model), spec, config.learning_rate,
                      config.iterations, config.batch_left, config.batch_right, l,
                      r, rng);
}

TrainResult train(const DreConfig& config, const Eigen::MatrixXd& left,
                  const Eigen::MatrixXd& right, RandomSource& rng) {
  return std::visit(
      [&](const auto& c) { return train(c, left, right, rng); }, config);
}

void save_model(const DensityRatioModel& model, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw DataError(path + ": cannot open for writing");
  out << model.to_json().dump(2) << '\n';
  if (!out) throw DataError(path + ": write failed");
}

std::unique_ptr<DensityRatioModel> model_from_json(const nlohmann::json& j) {
  if (!j.is_object() || !j.contains("kind") || !j["kind"].is_string())
    throw DataError("model JSON is missing its 'kind' field");
  const std::string kind = j["kind"].get<std::string>();
  const auto need = [&](const char* key) -> const nlohmann::json& {
    if (!j.contains(key))
      throw DataError(std::string("model JSON is missing '") + key + "'");
    return j[key];
  };
  const double eps = need("clamp_eps").get<double>();
  const int input_dim = need("input_dim").get<int>();

  if (kind == "kernel_basis") {
    Eigen::MatrixXd centers = matrix_from_json(need("centers"), "centers");
    if (centers.cols() != input_dim)
      throw DataError("centers have " + std::to_string(centers.cols()) +
                      " columns but input_dim is " + std::to_string(input_dim));
    const double bandwidth = need("bandwidth").get<double>();
    if (!(bandwidth > 0.0)) throw DataError("bandwidth must be positive");
    auto model = std::make_unique<KernelModel>(std::move(centers), bandwidth, eps);
    Eigen::VectorXd theta = vector_from_json(need("parameters"), "parameters");
    if (theta.size() != model->parameters().size())
      throw DataError("parameter count does not match the center count");
    model->set_parameters(theta);
    if (j.contains("config")) model->config_echo = j["config"];
    return model;
  }
  if (kind == "feed_forward") {
    std::vector<int> hidden;
    for (const auto& h : need("hidden_widths")) hidden.push_back(h.get<int>());
    const auto& layers = need("layers");
    if (!layers.is_array()) throw DataError("'layers' must be an array");
    std::vector<Eigen::MatrixXd> weights;
    std::vector<Eigen::VectorXd> biases;
    for (std::size_t l = 0; l < layers.size(); ++l) {
      const std::string tag = "layer " + std::to_string(l);
      if (!layers[l].contains("weights") || !layers[l].contains("bias"))
        throw DataError(tag + " is missing 'weights' or 'bias'");
      weights.push_back(matrix_from_json(layers[l]["weights"], tag + " weights"));
      biases.push_back(vector_from_json(layers[l]["bias"], tag + " bias"));
    }
    auto model = MlpModel::from_layers(input_dim, hidden, eps, std::move(weights),
                                       std::move(biases));
    if (j.contains("config")) model->config_echo = j["config"];
    return model;
  }
  throw DataError("unknown model kind '" + kind + "'");
}

std::unique_ptr<DensityRatioModel> load_model(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError(path + ": cannot open");
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw DataError(path + ": not valid JSON (" + e.what() + ")");
  }
  try {
    return model_from_json(j);
  } catch (const DataError& e) {
    throw DataError(path + ": " + e.what());
  } catch (const nlohmann::json::exception& e) {
    throw DataError(path + ": malformed model file (" + e.what() + ")");
  }
}

}  // namespace drcusum
