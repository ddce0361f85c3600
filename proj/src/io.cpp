#include "drcusum/io.hpp"

#include <charconv>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <vector>

namespace drcusum {

namespace {

// Strips a trailing '\r' so CRLF files parse like LF files.
void chomp(std::string& line) {
  if (!line.empty() && line.back() == '\r') {
    line.pop_back();
  }
}

double parse_field(const std::string& field, int row, int col) {
  double v = 0.0;
  const char* b = field.data();
  const char* e = b + field.size();
  auto [ptr, ec] = std::from_chars(b, e, v);
  if (ec != std::errc() || ptr != e || field.empty()) {
    throw DataError("row " + std::to_string(row) + ", column " +
                    std::to_string(col) + ": '" + field + "' is not a number");
  }
  return v;
}

}  // namespace

TimeSeries read_time_series_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) {
    throw DataError("cannot open '" + path + "'");
  }
  std::vector<std::vector<double>> rows;
  std::string line;
  int row_no = 0;
  int width = -1;
  while (std::getline(in, line)) {
    ++row_no;
    chomp(line);
    if (line.empty()) {
      // A blank final line is a newline artifact; blank interior lines are not.
      if (in.peek() == EOF) break;
      throw DataError("row " + std::to_string(row_no) + ": empty line");
    }
    std::vector<double> fields;
    std::size_t start = 0;
    int col = 0;
    while (true) {
      std::size_t comma = line.find(',', start);
      std::string field = line.substr(
          start, comma == std::string::npos ? std::string::npos : comma - start);
      ++col;
      fields.push_back(parse_field(field, row_no, col));
      if (comma == std::string::npos) break;
      start = comma + 1;
    }
    if (width < 0) {
      width = static_cast<int>(fields.size());
    } else if (static_cast<int>(fields.size()) != width) {
      throw DataError("row " + std::to_string(row_no) + ": expected " +
                      std::to_string(width) + " columns, got " +
                      std::to_string(fields.size()));
    }
    rows.push_back(std::move(fields));
  }
  if (rows.size() < 2) {
    throw DataError("'" + path + "': need at least 2 data rows, got " +
                    std::to_string(rows.size()));
  }
  Eigen::MatrixXd m(static_cast<int>(rows.size()), width);
  for (int i = 0; i < m.rows(); ++i) {
    for (int j = 0; j < width; ++j) {
      m(i, j) = rows[i][j];
    }
  }
  try {
    return TimeSeries(std::move(m));
  } catch (const DataError& e) {
    throw DataError("'" + path + "': " + e.what());
  }
}

std::string format_double(double v) {
  char buf[32];
  // %.17g always round-trips; trim it when a shorter form reparses exactly.
  for (int prec = 1; prec < 17; ++prec) {
    std::snprintf(buf, sizeof(buf), "%.*g", prec, v);
    if (std::strtod(buf, nullptr) == v) {
      return buf;
    }
  }
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

void write_time_series_csv(const std::string& path, const TimeSeries& series) {
  std::ofstream out(path);
  if (!out) {
    throw DataError("cannot write '" + path + "'");
  }
  for (int i = 0; i < series.n(); ++i) {
    for (int j = 0; j < series.d(); ++j) {
      if (j) out << ',';
      out << format_double(series.data(i, j));
    }
    out << '\n';
  }
  if (!out) {
    throw DataError("write failed for '" + path + "'");
  }
}

GroundTruth read_ground_truth(const std::string& path) {
  std::ifstream in(path);
  if (!in) {
    throw DataError("cannot open '" + path + "'");
  }
  GroundTruth truth;
  std::string line;
  int row_no = 0;
  while (std::getline(in, line)) {
    ++row_no;
    chomp(line);
    if (line.empty()) {
      if (in.peek() == EOF) break;
      throw DataError("row " + std::to_string(row_no) + ": empty line");
    }
    int v = 0;
    const char* b = line.data();
    const char* e = b + line.size();
    auto [ptr, ec] = std::from_chars(b, e, v);
    if (ec != std::errc() || ptr != e) {
      throw DataError("row " + std::to_string(row_no) + ": '" + line +
                      "' is not an integer");
    }
    truth.change_indices.push_back(v);
  }
  for (std::size_t i = 1; i < truth.change_indices.size(); ++i) {
    if (truth.change_indices[i] <= truth.change_indices[i - 1]) {
      throw DataError("'" + path + "': indices must be ascending");
    }
  }
  return truth;
}

void write_ground_truth(const std::string& path, const GroundTruth& truth) {
  std::ofstream out(path);
  if (!out) {
    throw DataError("cannot write '" + path + "'");
  }
  for (int c : truth.change_indices) {
    out << c << '\n';
  }
  if (!out) {
    throw DataError("write failed for '" + path + "'");
  }
}

void write_cusum_csv(const std::string& path, const Eigen::VectorXd& values) {
  std::ofstream out(path);
  if (!out) {
    throw DataError("cannot write '" + path + "'");
  }
  for (int t = 1; t <= values.size(); ++t) {
    out << t << ',' << format_double(values[t - 1]) << '\n';
  }
  if (!out) {
    throw DataError("write failed for '" + path + "'");
  }
}

}  // namespace drcusum
