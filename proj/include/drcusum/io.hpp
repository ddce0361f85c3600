#pragma once

#include "drcusum/core.hpp"

#include <string>

namespace drcusum {

// Time-series CSV: UTF-8, no header row, one row per time step, d comma-separated
// decimal fields with '.' as the decimal separator; row 1 is t=1.
TimeSeries read_time_series_csv(const std::string& path);
void write_time_series_csv(const std::string& path, const TimeSeries& series);

// Ground-truth file: one integer change index per line, ascending.
GroundTruth read_ground_truth(const std::string& path);
void write_ground_truth(const std::string& path, const GroundTruth& truth);

// CUSUM export for external plotting: one "t,S(t)" row per time step, no header.
void write_cusum_csv(const std::string& path, const Eigen::VectorXd& values);

// Shortest representation that round-trips the exact double.
std::string format_double(double v);

}  // namespace drcusum
