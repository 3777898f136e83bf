#pragma once

#include <array>
#include <optional>
#include <string>
#include <vector>

#include "rtpc/core.hpp"
#include "rtpc/signal.hpp"

namespace rtpc::seg {

struct GrowParams {
  PixelIndex seed;
  double magnitude_fraction = 0.5;
  double max_radius_mm = 10.0;
  std::size_t contour_iters = 20;
  double contour_alpha = 0.1;
  double contour_beta = 0.1;

  /// Throws InvalidArgument (seed outside the image, bad fraction or radius).
  void validate(const SeriesHeader& header) const;
};

struct FreqSegParams {
  signal::Band cardiac_band = signal::kCardiacBand;
  double coherence_threshold = 0.3;
  std::size_t min_component_px = 4;
  std::optional<PixelIndex> hint;

  void validate() const;
};

/// Region growing plus the per-frame seeds it used.
struct GrowResult {
  Roi roi;
  std::vector<PixelIndex> seeds;
};

/// Seeded 4-connected region growing on every frame, each mask refined by
/// the active contour and clipped to the max_radius_mm ball around that
/// frame's seed. Frame t+1 is seeded at the rounded centroid of mask t.
///
/// The acceptance threshold of frame t is magnitude_fraction times the mean
/// magnitude of the 3x3 neighborhood of its seed. The seed is rejected with
/// SeedBelowThreshold unless that neighborhood on frame 0 is brighter than
/// the frame median by at least one robust standard deviation
/// (1.4826 * MAD). RegionEscaped fires when more than half of the region's
/// boundary pixels touch a pixel excluded only by the radius limit.
GrowResult grow_regions(const MagnitudeSeries& mag, const VelocitySeries& vel, const GrowParams& p);
Roi segment_region_growing(const MagnitudeSeries& mag, const VelocitySeries& vel, const GrowParams& p);

/// Closed boundary of the mask's first component (raster order), as pixel
/// centers in clockwise Moore-neighbor order.
std::vector<PixelIndex> trace_boundary(const Mask& mask);

/// Pixels whose centers lie inside or on the closed polygon (nonzero winding).
/// Vertices are (x, y) = (col, row).
Mask rasterize_polygon(const std::vector<std::array<double, 2>>& vertices, std::size_t rows, std::size_t cols);

/// Greedy snake over the traced boundary. Every iteration moves each vertex
/// to the point of its 3x3 neighborhood minimizing
///   alpha * continuity + beta * curvature - edge,
/// where continuity is |mean spacing - distance to the previous vertex|,
/// curvature is |prev - 2 p + next|^2 and edge is the largest drop of
/// magnitude from p to a 4-neighbor. Continuity and curvature are scaled to
/// [0, 1] over the neighborhood; edge is divided by half the strongest drop
/// in the frame and capped at 1. A vertex never lands on its neighbors'
/// positions, and ties keep it in place. Stops after `iters`
/// iterations or when nothing moves; an untouched contour returns `mask`.
/// Throws DegenerateContour when the boundary has fewer than 4 vertices.
Mask refine_active_contour(const Mask& mask, std::span<const double> magnitude_frame, std::size_t iters,
                           double alpha, double beta);

/// Per-pixel cardiac coherence and the global cardiac frequency it used.
struct CoherenceMap {
  double cardiac_hz = 0.0;
  std::size_t cardiac_bin = 0;
  std::vector<double> coherence;  // rows * cols
};

/// Coherence is the spectral power within one bin of the cardiac bin
/// divided by the total power of the mean-removed pixel trace.
/// Throws NoCardiacPeak when the in-band peak of the spatial-mean |v|
/// spectrum is below twice the in-band median.
CoherenceMap cardiac_coherence(const VelocitySeries& vel, signal::Band band);

/// Static ROI: the 4-connected component of {coherence >= threshold}
/// holding the hint (or the most coherent pixel). Requires n_frames >= 64.
/// Throws NoCardiacPeak, ComponentTooSmall.
Roi segment_cardiac_frequency(const VelocitySeries& vel, const FreqSegParams& p);

/// Binary PGM (P5, maxval 255, 255 inside).
std::string to_pgm(const Mask& mask);

/// 4-connected component of `mask` containing `start` (empty if start is unset).
Mask connected_component(const Mask& mask, PixelIndex start);

}  // namespace rtpc::seg
