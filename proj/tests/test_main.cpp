#include "support.hpp"

#include <unistd.h>

#include <cmath>
#include <cstdio>
#include <exception>
#include <filesystem>
#include <iostream>
#include <sstream>
#include <stdexcept>
#include <string>

namespace testsupport {

struct Failure : std::runtime_error {
  using std::runtime_error::runtime_error;
};

std::vector<Case>& cases() {
  static std::vector<Case> all;
  return all;
}

Register::Register(const char* name, void (*fn)()) {
  cases().push_back({name, fn});
}

void check(bool ok, const char* expr, const char* file, int line) {
  if (ok) return;
  std::ostringstream oss;
  oss << file << ":" << line << ": CHECK failed: " << expr;
  throw Failure(oss.str());
}

void check_close(double a, double b, double tol, const char* ea, const char* eb,
                 const char* file, int line) {
  if (std::isfinite(a) && std::isfinite(b) && std::abs(a - b) <= tol) return;
  std::ostringstream oss;
  oss << file << ":" << line << ": CHECK_CLOSE failed: " << ea << " = " << a
      << " vs " << eb << " = " << b << " (tol " << tol << ")";
  throw Failure(oss.str());
}

std::string scratch_dir() {
  static const std::string dir = [] {
    auto p = std::filesystem::temp_directory_path() /
             ("drcusum_tests_" + std::to_string(::getpid()));
    std::filesystem::create_directories(p);
    return p.string();
  }();
  return dir;
}

}  // namespace testsupport

int main(int argc, char** argv) {
  const std::string filter = argc > 1 ? argv[1] : "";
  int failures = 0;
  int ran = 0;
  for (const auto& c : testsupport::cases()) {
    if (!filter.empty() && std::string(c.name).find(filter) == std::string::npos)
      continue;
    ++ran;
    try {
      c.fn();
      std::cout << "ok " << c.name << "\n";
    } catch (const std::exception& e) {
      ++failures;
      std::cout << "FAILED " << c.name << "\n  " << e.what() << "\n";
    }
  }
  std::cout << ran << " tests, " << failures << " failures\n";
  std::error_code ec;
  std::filesystem::remove_all(testsupport::scratch_dir(), ec);
  return failures == 0 ? 0 : 1;
}
