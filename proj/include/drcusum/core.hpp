#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace drcusum {

// Error taxonomy used by the CLI exit-code mapping: UsageError -> 1,
// DataError -> 2, anything else -> 3.
struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct DataError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Observations are rows. Time is 1-based everywhere: row 1 of the matrix is t=1,
// and every index in the public API and in files on disk follows that convention.
struct TimeSeries {
  Eigen::MatrixXd data;

  TimeSeries() = default;
  explicit TimeSeries(Eigen::MatrixXd m);

  int n() const { return static_cast<int>(data.rows()); }
  int d() const { return static_cast<int>(data.cols()); }
  Eigen::VectorXd at(int t) const { return data.row(t - 1); }
};

struct SplitConfig {
  int t_split = 0;
  std::vector<int> verification_splits;

  // Both sides must be non-empty: 2 <= t_split <= n-1.
  void validate(int n) const;
};

enum class SplitSide { LeftOfChange, RightOfChange };

// Geometry of a (split, true change) pair. alpha1 is defined when the split is
// at or left of the change and the change is interior (t_star < n; at t_star == n
// the formula degenerates to 0, outside (0,1]). alpha2 is defined when the split
// is at or right of the change.
struct SplitGeometry {
  int n = 0;
  int t_star = 0;
  int t_split = 0;
  SplitSide side = SplitSide::LeftOfChange;
  std::optional<double> alpha1;
  std::optional<double> alpha2;
};

SplitGeometry split_geometry(int n, int t_star, int t_split);

struct ChangePointEstimate {
  int index = 0;
  double slope_before = 0.0;
  double slope_after = 0.0;
  double magnitude = 0.0;
  bool verified = false;
};

struct GroundTruth {
  std::vector<int> change_indices;

  // Strictly increasing, all within [2, n].
  void validate(int n) const;
};

// Deterministic seeded randomness (splitmix64). Every stochastic operation in
// the toolkit takes one of these explicitly; there is no ambient global RNG.
// Equal seeds produce bitwise-identical draw sequences.
class RandomSource {
 public:
  explicit RandomSource(std::uint64_t seed) : seed_(seed), state_(seed) {}

  std::uint64_t seed() const { return seed_; }

  std::uint64_t next_u64();

  // Uniform on [0, 1) with 53 random bits.
  double uniform01();

  double uniform(double lo, double hi);

  // Standard normal via Box-Muller; two fresh uniforms per draw, nothing cached,
  // so the draw sequence is a pure function of the call sequence.
  double normal();

  // Uniform index in [0, m), m >= 1.
  std::size_t uniform_index(std::size_t m);

  // Independent stream derived from the original seed (not the current state),
  // so forks are order-independent and replayable.
  RandomSource fork(std::uint64_t stream) const;

 private:
  std::uint64_t seed_;
  std::uint64_t state_;
};

}  // namespace drcusum
