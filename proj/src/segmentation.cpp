#include "rtpc/segmentation.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <string>

#include "rtpc/error.hpp"

namespace rtpc::seg {

namespace {

constexpr int kDr4[4] = {-1, 1, 0, 0};
constexpr int kDc4[4] = {0, 0, -1, 1};

double median_of(std::vector<double> v) {
  if (v.empty()) return 0.0;
  const std::size_t mid = v.size() / 2;
  std::nth_element(v.begin(), v.begin() + static_cast<long>(mid), v.end());
  double m = v[mid];
  if (v.size() % 2 == 0) {
    const double lower = *std::max_element(v.begin(), v.begin() + static_cast<long>(mid));
    m = 0.5 * (m + lower);
  }
  return m;
}

double neighborhood_mean(std::span<const double> frame, std::size_t rows, std::size_t cols, PixelIndex p) {
  double sum = 0.0;
  int n = 0;
  for (int dr = -1; dr <= 1; ++dr) {
    for (int dc = -1; dc <= 1; ++dc) {
      const long r = p.row + dr;
      const long c = p.col + dc;
      if (r < 0 || c < 0 || r >= static_cast<long>(rows) || c >= static_cast<long>(cols)) continue;
      sum += frame[static_cast<std::size_t>(r) * cols + static_cast<std::size_t>(c)];
      ++n;
    }
  }
  return sum / n;
}

struct Ball {
  PixelIndex center;
  double radius_mm;
  PixelSpacing spacing;

  bool contains(long r, long c) const {
    const double dy = static_cast<double>(r - center.row) * spacing.row_mm;
    const double dx = static_cast<double>(c - center.col) * spacing.col_mm;
    return dy * dy + dx * dx <= radius_mm * radius_mm;
  }
};

struct Fill {
  Mask region;
  Mask radius_blocked;  // bright enough, rejected only by the ball
};

Fill flood_fill(std::span<const double> frame, std::size_t rows, std::size_t cols, const Ball& ball, double threshold) {
  Fill f{Mask(rows, cols), Mask(rows, cols)};
  const PixelIndex s = ball.center;
  if (frame[static_cast<std::size_t>(s.row) * cols + static_cast<std::size_t>(s.col)] < threshold) return f;
  std::deque<PixelIndex> queue{s};
  f.region.set(static_cast<std::size_t>(s.row), static_cast<std::size_t>(s.col));
  while (!queue.empty()) {
    const PixelIndex p = queue.front();
    queue.pop_front();
    for (int k = 0; k < 4; ++k) {
      const long r = p.row + kDr4[k];
      const long c = p.col + kDc4[k];
      if (!f.region.in_bounds(r, c)) continue;
      const auto ur = static_cast<std::size_t>(r);
      const auto uc = static_cast<std::size_t>(c);
      if (f.region.at(ur, uc)) continue;
      if (frame[ur * cols + uc] < threshold) continue;
      if (!ball.contains(r, c)) {
        f.radius_blocked.set(ur, uc);
        continue;
      }
      f.region.set(ur, uc);
      queue.push_back({static_cast<int>(r), static_cast<int>(c)});
    }
  }
  return f;
}

bool escaped(const Fill& f) {
  std::size_t boundary = 0;
  std::size_t touching = 0;
  const Mask& m = f.region;
  for (std::size_t r = 0; r < m.rows(); ++r) {
    for (std::size_t c = 0; c < m.cols(); ++c) {
      if (!m.at(r, c)) continue;
      bool on_boundary = false;
      bool blocked = false;
      for (int k = 0; k < 4; ++k) {
        const long rr = static_cast<long>(r) + kDr4[k];
        const long cc = static_cast<long>(c) + kDc4[k];
        if (!m.in_bounds(rr, cc)) {
          on_boundary = true;
          continue;
        }
        if (!m.at(static_cast<std::size_t>(rr), static_cast<std::size_t>(cc))) {
          on_boundary = true;
          blocked = blocked || f.radius_blocked.at(static_cast<std::size_t>(rr), static_cast<std::size_t>(cc));
        }
      }
      boundary += on_boundary ? 1 : 0;
      touching += blocked ? 1 : 0;
    }
  }
  return boundary > 0 && 2 * touching > boundary;
}

// Clockwise 8-neighborhood in (row, col), starting west.
constexpr int kDr8[8] = {0, -1, -1, -1, 0, 1, 1, 1};
constexpr int kDc8[8] = {-1, -1, 0, 1, 1, 1, 0, -1};

int direction_of(int dr, int dc) {
  for (int k = 0; k < 8; ++k) {
    if (kDr8[k] == dr && kDc8[k] == dc) return k;
  }
  return 0;
}

bool on_segment(double px, double py, double ax, double ay, double bx, double by) {
  const double cross = (bx - ax) * (py - ay) - (by - ay) * (px - ax);
  if (std::abs(cross) > 1e-9) return false;
  return px >= std::min(ax, bx) - 1e-9 && px <= std::max(ax, bx) + 1e-9 && py >= std::min(ay, by) - 1e-9 &&
         py <= std::max(ay, by) + 1e-9;
}

}  // namespace

void GrowParams::validate(const SeriesHeader& header) const {
  if (seed.row < 0 || seed.col < 0 || static_cast<std::size_t>(seed.row) >= header.rows ||
      static_cast<std::size_t>(seed.col) >= header.cols)
    fail(ErrorCode::InvalidArgument, "seed outside the image");
  if (!(magnitude_fraction > 0.0 && magnitude_fraction <= 1.0))
    fail(ErrorCode::InvalidArgument, "magnitude_fraction must lie in (0, 1]");
  if (!(max_radius_mm > 0.0)) fail(ErrorCode::InvalidArgument, "max_radius_mm must be > 0");
  if (!(contour_alpha >= 0.0) || !(contour_beta >= 0.0))
    fail(ErrorCode::InvalidArgument, "contour weights must be non-negative");
}

void FreqSegParams::validate() const {
  if (!(cardiac_band.lo_hz > 0.0 && cardiac_band.lo_hz < cardiac_band.hi_hz))
    fail(ErrorCode::InvalidArgument, "cardiac band must satisfy 0 < lo < hi");
  if (!(coherence_threshold > 0.0 && coherence_threshold < 1.0))
    fail(ErrorCode::InvalidArgument, "coherence_threshold must lie in (0, 1)");
}

Mask connected_component(const Mask& mask, PixelIndex start) {
  Mask out(mask.rows(), mask.cols());
  if (!mask.in_bounds(start.row, start.col) || !mask.at(static_cast<std::size_t>(start.row), static_cast<std::size_t>(start.col)))
    return out;
  std::deque<PixelIndex> queue{start};
  out.set(static_cast<std::size_t>(start.row), static_cast<std::size_t>(start.col));
  while (!queue.empty()) {
    const PixelIndex p = queue.front();
    queue.pop_front();
    for (int k = 0; k < 4; ++k) {
      const long r = p.row + kDr4[k];
      const long c = p.col + kDc4[k];
      if (!mask.in_bounds(r, c)) continue;
      const auto ur = static_cast<std::size_t>(r);
      const auto uc = static_cast<std::size_t>(c);
      if (!mask.at(ur, uc) || out.at(ur, uc)) continue;
      out.set(ur, uc);
      queue.push_back({static_cast<int>(r), static_cast<int>(c)});
    }
  }
  return out;
}

std::vector<PixelIndex> trace_boundary(const Mask& mask) {
  std::vector<PixelIndex> contour;
  long start_index = -1;
  for (std::size_t i = 0; i < mask.size(); ++i) {
    if (mask[i]) {
      start_index = static_cast<long>(i);
      break;
    }
  }
  if (start_index < 0) return contour;
  const PixelIndex start{static_cast<int>(start_index / static_cast<long>(mask.cols())),
                         static_cast<int>(start_index % static_cast<long>(mask.cols()))};
  auto inside = [&](long r, long c) {
    return mask.in_bounds(r, c) && mask.at(static_cast<std::size_t>(r), static_cast<std::size_t>(c));
  };
  // Returns the next boundary pixel and updates the backtrack direction.
  auto step = [&](PixelIndex cur, int& backtrack, PixelIndex& next) {
    for (int i = 1; i <= 8; ++i) {
      const int d = (backtrack + i) % 8;
      const long r = cur.row + kDr8[d];
      const long c = cur.col + kDc8[d];
      if (inside(r, c)) {
        const int prev = (backtrack + i - 1) % 8;
        const int pr = cur.row + kDr8[prev];
        const int pc = cur.col + kDc8[prev];
        next = {static_cast<int>(r), static_cast<int>(c)};
        backtrack = direction_of(pr - next.row, pc - next.col);
        return true;
      }
    }
    return false;
  };

  contour.push_back(start);
  int backtrack = 0;
  PixelIndex first_next;
  if (!step(start, backtrack, first_next)) return contour;
  PixelIndex cur = first_next;
  const std::size_t limit = 4 * mask.size() + 8;
  while (contour.size() < limit) {
    PixelIndex next;
    step(cur, backtrack, next);
    if (cur == start && next == first_next) break;
    contour.push_back(cur);
    cur = next;
  }
  return contour;
}

Mask rasterize_polygon(const std::vector<std::array<double, 2>>& vertices, std::size_t rows, std::size_t cols) {
  Mask out(rows, cols);
  if (vertices.empty()) return out;
  double min_x = vertices[0][0], max_x = min_x, min_y = vertices[0][1], max_y = min_y;
  for (const auto& v : vertices) {
    min_x = std::min(min_x, v[0]);
    max_x = std::max(max_x, v[0]);
    min_y = std::min(min_y, v[1]);
    max_y = std::max(max_y, v[1]);
  }
  const long r0 = std::max(0L, static_cast<long>(std::floor(min_y)));
  const long r1 = std::min(static_cast<long>(rows) - 1, static_cast<long>(std::ceil(max_y)));
  const long c0 = std::max(0L, static_cast<long>(std::floor(min_x)));
  const long c1 = std::min(static_cast<long>(cols) - 1, static_cast<long>(std::ceil(max_x)));
  const std::size_t n = vertices.size();
  for (long r = r0; r <= r1; ++r) {
    for (long c = c0; c <= c1; ++c) {
      const double px = static_cast<double>(c);
      const double py = static_cast<double>(r);
      int winding = 0;
      bool on_edge = false;
      for (std::size_t i = 0; i < n && !on_edge; ++i) {
        const auto& a = vertices[i];
        const auto& b = vertices[(i + 1) % n];
        if (on_segment(px, py, a[0], a[1], b[0], b[1])) {
          on_edge = true;
          break;
        }
        const double cross = (b[0] - a[0]) * (py - a[1]) - (px - a[0]) * (b[1] - a[1]);
        if (a[1] <= py) {
          if (b[1] > py && cross > 0) ++winding;
        } else if (b[1] <= py && cross < 0) {
          --winding;
        }
      }
      if (on_edge || winding != 0) out.set(static_cast<std::size_t>(r), static_cast<std::size_t>(c));
    }
  }
  return out;
}

Mask refine_active_contour(const Mask& mask, std::span<const double> magnitude_frame, std::size_t iters,
                           double alpha, double beta) {
  const std::size_t rows = mask.rows();
  const std::size_t cols = mask.cols();
  if (magnitude_frame.size() != rows * cols) fail(ErrorCode::GeometryMismatch, "magnitude frame does not match mask");
  std::vector<PixelIndex> pts = trace_boundary(mask);
  if (pts.size() < 4) fail(ErrorCode::DegenerateContour, "boundary has " + std::to_string(pts.size()) + " vertices");

  std::vector<double> edge(rows * cols, 0.0);
  for (std::size_t r = 0; r < rows; ++r) {
    for (std::size_t c = 0; c < cols; ++c) {
      const double here = magnitude_frame[r * cols + c];
      double g = 0.0;
      for (int k = 0; k < 4; ++k) {
        const long rr = static_cast<long>(r) + kDr4[k];
        const long cc = static_cast<long>(c) + kDc4[k];
        if (!mask.in_bounds(rr, cc)) continue;
        g = std::max(g, here - magnitude_frame[static_cast<std::size_t>(rr) * cols + static_cast<std::size_t>(cc)]);
      }
      edge[r * cols + c] = g;
    }
  }
  // Edges at half the strongest drop of the frame or more count as full
  // edges, so pixel noise along a boundary does not drag vertices around.
  const double saturation = 0.5 * *std::max_element(edge.begin(), edge.end());
  for (double& g : edge) g = saturation > 0.0 ? std::min(1.0, g / saturation) : 0.0;

  const std::size_t n = pts.size();
  bool ever_moved = false;
  for (std::size_t it = 0; it < iters; ++it) {
    double mean_spacing = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      const auto& a = pts[i];
      const auto& b = pts[(i + 1) % n];
      mean_spacing += std::hypot(a.row - b.row, a.col - b.col);
    }
    mean_spacing /= static_cast<double>(n);

    bool moved = false;
    for (std::size_t i = 0; i < n; ++i) {
      const PixelIndex prev = pts[(i + n - 1) % n];
      const PixelIndex next = pts[(i + 1) % n];
      struct Candidate {
        PixelIndex p;
        double cont, curv, img;
      };
      std::vector<Candidate> cands;
      cands.reserve(9);
      // The current position goes first; ties keep it.
      for (int k = -1; k < 8; ++k) {
        const PixelIndex p = k < 0 ? pts[i] : PixelIndex{pts[i].row + kDr8[k], pts[i].col + kDc8[k]};
        if (!mask.in_bounds(p.row, p.col)) continue;
        if (k >= 0 && (p == prev || p == next)) continue;
        const double cont = std::abs(mean_spacing - std::hypot(p.row - prev.row, p.col - prev.col));
        const double kr = prev.row - 2.0 * p.row + next.row;
        const double kc = prev.col - 2.0 * p.col + next.col;
        cands.push_back({p, cont, kr * kr + kc * kc,
                         edge[static_cast<std::size_t>(p.row) * cols + static_cast<std::size_t>(p.col)]});
      }
      double max_cont = 0.0, max_curv = 0.0;
      for (const auto& c : cands) {
        max_cont = std::max(max_cont, c.cont);
        max_curv = std::max(max_curv, c.curv);
      }
      auto energy = [&](const Candidate& c) {
        const double ec = max_cont > 0.0 ? c.cont / max_cont : 0.0;
        const double ek = max_curv > 0.0 ? c.curv / max_curv : 0.0;
        return alpha * ec + beta * ek - c.img;
      };
      std::size_t best = 0;
      double best_e = energy(cands[0]);
      for (std::size_t k = 1; k < cands.size(); ++k) {
        const double e = energy(cands[k]);
        if (e < best_e - 1e-12) {
          best_e = e;
          best = k;
        }
      }
      if (best != 0) {
        pts[i] = cands[best].p;
        moved = true;
      }
    }
    if (!moved) break;
    ever_moved = true;
  }
  if (!ever_moved) return mask;

  std::vector<std::array<double, 2>> poly;
  poly.reserve(n);
  for (const auto& p : pts) poly.push_back({static_cast<double>(p.col), static_cast<double>(p.row)});
  return rasterize_polygon(poly, rows, cols);
}

GrowResult grow_regions(const MagnitudeSeries& mag, const VelocitySeries& vel, const GrowParams& p) {
  const SeriesHeader& h = mag.header();
  if (!h.same_geometry(vel.header())) fail(ErrorCode::GeometryMismatch, "magnitude and velocity differ in geometry");
  p.validate(h);
  const std::size_t rows = h.rows;
  const std::size_t cols = h.cols;

  {
    const auto f0 = mag.frame(0);
    std::vector<double> values(f0.begin(), f0.end());
    const double med = median_of(values);
    for (double& v : values) v = std::abs(v - med);
    const double robust_sigma = 1.4826 * median_of(values);
    const double seed_level = neighborhood_mean(f0, rows, cols, p.seed);
    if (!(seed_level > med + robust_sigma))
      fail(ErrorCode::SeedBelowThreshold, "seed (" + std::to_string(p.seed.row) + "," + std::to_string(p.seed.col) +
                                              ") magnitude " + std::to_string(seed_level) +
                                              " is not above the frame median " + std::to_string(med));
  }

  std::vector<Mask> masks;
  std::vector<PixelIndex> seeds;
  masks.reserve(h.n_frames);
  PixelIndex seed = p.seed;
  for (std::size_t t = 0; t < h.n_frames; ++t) {
    const auto frame = mag.frame(t);
    const Ball ball{seed, p.max_radius_mm, h.pixel_spacing_mm};
    const double threshold = p.magnitude_fraction * neighborhood_mean(frame, rows, cols, seed);
    Fill fill = flood_fill(frame, rows, cols, ball, threshold);
    if (fill.region.empty()) fail(ErrorCode::EmptyFrame, "frame " + std::to_string(t) + ": seed below threshold");
    if (escaped(fill)) fail(ErrorCode::RegionEscaped, "frame " + std::to_string(t) + ": region leaks past max_radius_mm");

    Mask refined = fill.region;
    if (p.contour_iters > 0 && fill.region.count() >= 4) {
      refined = refine_active_contour(fill.region, frame, p.contour_iters, p.contour_alpha, p.contour_beta);
    }
    for (std::size_t r = 0; r < rows; ++r) {
      for (std::size_t c = 0; c < cols; ++c) {
        if (refined.at(r, c) && !ball.contains(static_cast<long>(r), static_cast<long>(c))) refined.set(r, c, false);
      }
    }
    if (refined.empty()) fail(ErrorCode::EmptyFrame, "frame " + std::to_string(t) + ": contour collapsed");

    seeds.push_back(seed);
    double sr = 0.0, sc = 0.0;
    std::size_t count = 0;
    for (std::size_t r = 0; r < rows; ++r) {
      for (std::size_t c = 0; c < cols; ++c) {
        if (!refined.at(r, c)) continue;
        sr += static_cast<double>(r);
        sc += static_cast<double>(c);
        ++count;
      }
    }
    seed = {static_cast<int>(std::lround(sr / static_cast<double>(count))),
            static_cast<int>(std::lround(sc / static_cast<double>(count)))};
    masks.push_back(std::move(refined));
  }
  return {Roi::make_dynamic(std::move(masks), h.n_frames), std::move(seeds)};
}

Roi segment_region_growing(const MagnitudeSeries& mag, const VelocitySeries& vel, const GrowParams& p) {
  return grow_regions(mag, vel, p).roi;
}

CoherenceMap cardiac_coherence(const VelocitySeries& vel, signal::Band band) {
  const SeriesHeader& h = vel.header();
  const std::size_t npix = h.frame_pixels();
  const std::size_t nt = h.n_frames;

  std::vector<double> mean_abs(nt);
  std::vector<double> scratch(npix);
  for (std::size_t t = 0; t < nt; ++t) {
    const auto f = vel.frame(t);
    for (std::size_t i = 0; i < npix; ++i) scratch[i] = std::abs(f[i]);
    mean_abs[t] = pairwise_sum(scratch) / static_cast<double>(npix);
  }
  const signal::Spectrum global = signal::fft_magnitude(Signal1D(std::move(mean_abs), h.frame_period_s()));
  std::vector<double> in_band;
  for (std::size_t k = 0; k < global.bin_amplitudes.size(); ++k) {
    const double f = global.frequency(k);
    if (f >= band.lo_hz && f <= band.hi_hz) in_band.push_back(global.bin_amplitudes[k]);
  }
  if (in_band.empty()) fail(ErrorCode::EmptyBand, "no spectrum bin inside the cardiac band");
  const double peak = *std::max_element(in_band.begin(), in_band.end());
  const double med = median_of(in_band);
  if (!(peak > 0.0) || peak < 2.0 * med)
    fail(ErrorCode::NoCardiacPeak, "in-band peak " + std::to_string(peak) + " is below twice the median " + std::to_string(med));

  CoherenceMap map;
  map.cardiac_hz = signal::estimate_fundamental_hz(global, band);
  map.cardiac_bin = static_cast<std::size_t>(std::lround(map.cardiac_hz / global.bin_width_hz));
  map.coherence.assign(npix, 0.0);

  signal::FftWorkspace ws(nt);
  std::vector<double> trace(nt);
  std::vector<double> amp(ws.n_bins());
  std::vector<double> power(ws.n_bins());
  const std::size_t lo = map.cardiac_bin == 0 ? 0 : map.cardiac_bin - 1;
  const std::size_t hi = std::min(map.cardiac_bin + 1, ws.n_bins() - 1);
  const auto s = vel.samples();
  for (std::size_t i = 0; i < npix; ++i) {
    for (std::size_t t = 0; t < nt; ++t) trace[t] = s[t * npix + i];
    ws.amplitudes(trace, amp);
    for (std::size_t k = 0; k < amp.size(); ++k) power[k] = amp[k] * amp[k];
    const double total = pairwise_sum(power);
    if (!(total > 0.0)) continue;
    double band_power = 0.0;
    for (std::size_t k = lo; k <= hi; ++k) band_power += power[k];
    map.coherence[i] = band_power / total;
  }
  return map;
}

Roi segment_cardiac_frequency(const VelocitySeries& vel, const FreqSegParams& p) {
  p.validate();
  const SeriesHeader& h = vel.header();
  if (h.n_frames < 64) fail(ErrorCode::TooShort, "frequency segmentation needs at least 64 frames");
  if (p.hint && (p.hint->row < 0 || p.hint->col < 0 || static_cast<std::size_t>(p.hint->row) >= h.rows ||
                 static_cast<std::size_t>(p.hint->col) >= h.cols))
    fail(ErrorCode::InvalidArgument, "hint outside the image");
  const CoherenceMap map = cardiac_coherence(vel, p.cardiac_band);

  Mask candidates(h.rows, h.cols);
  std::size_t best = map.coherence.size();
  for (std::size_t i = 0; i < map.coherence.size(); ++i) {
    if (map.coherence[i] < p.coherence_threshold) continue;
    candidates.set_index(i);
    if (best == map.coherence.size() || map.coherence[i] > map.coherence[best]) best = i;
  }
  PixelIndex start{-1, -1};
  if (p.hint) {
    start = *p.hint;
  } else if (best < map.coherence.size()) {
    start = {static_cast<int>(best / h.cols), static_cast<int>(best % h.cols)};
  }
  Mask component = connected_component(candidates, start);
  if (component.count() < std::max<std::size_t>(p.min_component_px, 1))
    fail(ErrorCode::ComponentTooSmall, "coherent component has " + std::to_string(component.count()) + " pixels (minimum " +
                                           std::to_string(p.min_component_px) + ")");
  return Roi::make_static(std::move(component));
}

std::string to_pgm(const Mask& mask) {
  std::string out = "P5\n" + std::to_string(mask.cols()) + " " + std::to_string(mask.rows()) + "\n255\n";
  out.reserve(out.size() + mask.size());
  for (std::size_t i = 0; i < mask.size(); ++i) out.push_back(mask[i] ? static_cast<char>(255) : '\0');
  return out;
}

}  // namespace rtpc::seg
