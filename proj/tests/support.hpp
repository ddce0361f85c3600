#pragma once

// Minimal test harness: TEST_CASE registers a function, test_main runs every
// registered case and reports failures with file:line positions.

#include <string>
#include <vector>

namespace testsupport {

struct Case {
  const char* name;
  void (*fn)();
};

std::vector<Case>& cases();

struct Register {
  Register(const char* name, void (*fn)());
};

void check(bool ok, const char* expr, const char* file, int line);
void check_close(double a, double b, double tol, const char* ea, const char* eb,
                 const char* file, int line);

// Directory for scratch files, created once per run and removed at exit.
std::string scratch_dir();

}  // namespace testsupport

#define TEST_CASE(id)                                     \
  static void test_##id();                                \
  static testsupport::Register reg_##id(#id, &test_##id); \
  static void test_##id()

#define CHECK(expr) testsupport::check((expr), #expr, __FILE__, __LINE__)

#define CHECK_CLOSE(a, b, tol) \
  testsupport::check_close((a), (b), (tol), #a, #b, __FILE__, __LINE__)

#define CHECK_THROWS(Ex, expr)                                                \
  do {                                                                       \
    bool caught_ = false;                                                    \
    try {                                                                    \
      (void)(expr);                                                          \
    } catch (const Ex&) {                                                    \
      caught_ = true;                                                        \
    }                                                                        \
    testsupport::check(caught_, "throws " #Ex ": " #expr, __FILE__, __LINE__); \
  } while (0)
