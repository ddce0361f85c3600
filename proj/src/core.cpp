#include "drcusum/core.hpp"

#include <cmath>

namespace drcusum {

TimeSeries::TimeSeries(Eigen::MatrixXd m) : data(std::move(m)) {
  if (data.rows() < 2) {
    throw DataError("time series needs at least 2 samples, got " +
                    std::to_string(data.rows()));
  }
  if (data.cols() < 1) {
    throw DataError("time series needs at least 1 dimension");
  }
  if (!data.allFinite()) {
    throw DataError("time series contains a non-finite value");
  }
}

void SplitConfig::validate(int n) const {
  if (t_split < 2 || t_split > n - 1) {
    throw UsageError("t_split " + std::to_string(t_split) +
                     " out of range [2, " + std::to_string(n - 1) + "]");
  }
  for (int v : verification_splits) {
    if (v < 2 || v > n - 1) {
      throw UsageError("verification split " + std::to_string(v) +
                       " out of range [2, " + std::to_string(n - 1) + "]");
    }
  }
}

SplitGeometry split_geometry(int n, int t_star, int t_split) {
  if (n < 2) {
    throw std::out_of_range("n must be >= 2, got " + std::to_string(n));
  }
  if (t_star < 1 || t_star > n) {
    throw std::out_of_range("t_star " + std::to_string(t_star) +
                            " out of range [1, " + std::to_string(n) + "]");
  }
  if (t_split < 2 || t_split > n - 1) {
    throw std::out_of_range("t_split " + std::to_string(t_split) +
                            " out of range [2, " + std::to_string(n - 1) + "]");
  }
  SplitGeometry g;
  g.n = n;
  g.t_star = t_star;
  g.t_split = t_split;
  // Tie (t_split == t_star) resolves to LeftOfChange; both alphas stay exposed
  // so no caller depends on the tie direction.
  g.side = (t_split <= t_star) ? SplitSide::LeftOfChange : SplitSide::RightOfChange;
  if (t_split <= t_star && t_star < n) {
    g.alpha1 = static_cast<double>(n - t_star) / static_cast<double>(n - t_split);
  }
  if (t_split >= t_star) {
    g.alpha2 = static_cast<double>(t_star) / static_cast<double>(t_split);
  }
  return g;
}

void GroundTruth::validate(int n) const {
  int prev = 1;
  for (int c : change_indices) {
    if (c < 2 || c > n) {
      throw DataError("change index " + std::to_string(c) +
                      " out of range [2, " + std::to_string(n) + "]");
    }
    if (c <= prev) {
      throw DataError("change indices must be strictly increasing");
    }
    prev = c;
  }
}

namespace {

inline std::uint64_t mix64(std::uint64_t z) {
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

}  // namespace

std::uint64_t RandomSource::next_u64() {
  state_ += 0x9E3779B97F4A7C15ULL;
  return mix64(state_);
}

double RandomSource::uniform01() {
  return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
}

double RandomSource::uniform(double lo, double hi) {
  return lo + (hi - lo) * uniform01();
}

double RandomSource::normal() {
  // 1 - u keeps the log argument in (0, 1].
  const double u1 = 1.0 - uniform01();
  const double u2 = uniform01();
  const double r = std::sqrt(-2.0 * std::log(u1));
  return r * std::cos(2.0 * M_PI * u2);
}

std::size_t RandomSource::uniform_index(std::size_t m) {
  if (m == 0) {
    throw std::invalid_argument("uniform_index needs m >= 1");
  }
  return static_cast<std::size_t>(
      (static_cast<unsigned __int128>(next_u64()) * m) >> 64);
}

RandomSource RandomSource::fork(std::uint64_t stream) const {
  return RandomSource(mix64(seed_ ^ (0x9E3779B97F4A7C15ULL * (stream + 1))));
}

}  // namespace drcusum
