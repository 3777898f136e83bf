#pragma once

#include <doctest.h>

#include <cmath>
#include <functional>
#include <random>
#include <vector>

#include "rtpc/core.hpp"
#include "rtpc/error.hpp"

// Checks that `expr` throws rtpc::Error with the given code.
#define CHECK_THROWS_CODE(expr, error_code)                                   \
  do {                                                                        \
    bool rtpc_thrown_ = false;                                                \
    try {                                                                     \
      (void)(expr);                                                           \
    } catch (const ::rtpc::Error& rtpc_e_) {                                  \
      rtpc_thrown_ = true;                                                    \
      CHECK_MESSAGE(rtpc_e_.code() == (error_code), rtpc_e_.what());          \
    }                                                                         \
    CHECK_MESSAGE(rtpc_thrown_, "expected an rtpc::Error from " #expr);       \
  } while (false)

namespace rtpc::testing {

inline SeriesHeader small_header(std::size_t n_frames = 4, std::size_t rows = 8, std::size_t cols = 8,
                                 double venc = 5.0, double frame_ms = 96.0) {
  SeriesHeader h;
  h.n_frames = n_frames;
  h.rows = rows;
  h.cols = cols;
  h.pixel_spacing_mm = {1.0, 1.0};
  h.frame_duration_ms = frame_ms;
  h.venc_cm_s = venc;
  return h;
}

/// Series with samples f(t, row, col).
inline std::vector<double> fill(const SeriesHeader& h, const std::function<double(std::size_t, std::size_t, std::size_t)>& f) {
  std::vector<double> v(h.sample_count());
  for (std::size_t t = 0; t < h.n_frames; ++t)
    for (std::size_t r = 0; r < h.rows; ++r)
      for (std::size_t c = 0; c < h.cols; ++c) v[(t * h.rows + r) * h.cols + c] = f(t, r, c);
  return v;
}

inline Mask disk_mask(std::size_t rows, std::size_t cols, double cr, double cc, double radius) {
  Mask m(rows, cols);
  for (std::size_t r = 0; r < rows; ++r)
    for (std::size_t c = 0; c < cols; ++c) {
      const double dr = static_cast<double>(r) - cr;
      const double dc = static_cast<double>(c) - cc;
      if (dr * dr + dc * dc < radius * radius) m.set(r, c);
    }
  return m;
}

/// Seeded generator for property tests.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}
  double uniform(double lo = 0.0, double hi = 1.0) { return std::uniform_real_distribution<double>(lo, hi)(engine_); }
  std::size_t below(std::size_t n) { return std::uniform_int_distribution<std::size_t>(0, n - 1)(engine_); }

 private:
  std::mt19937_64 engine_;
};

}  // namespace rtpc::testing
