#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "riskfield/geom.hpp"

namespace riskfield {

/// Which scalar field of a patch to sample.
enum class Field { SoftRisk, Sdf };

/// Result of a bilinear query: the interpolated value, the exact gradient of
/// the bilinear surface, and the mixed second derivative (the only nonzero
/// Hessian entry of a bilinear cell).
struct FieldSample {
  double value = 0.0;
  Vec2 grad;
  double hess_xy = 0.0;
  bool clamped = false;  // query fell outside the patch and was clamped
};

/// Raw authoring layers for a patch. Generators write these; the derived
/// fields (blurred risk, signed distance, anchors) are rebuilt from them.
struct PatchLayers {
  int width = 0;
  int height = 0;
  double resolution = 0.25;
  Vec2 origin;                  // world position of cell (0,0)
  std::vector<double> risk;     // unsmoothed soft risk, row-major [iy*width+ix]
  std::vector<uint8_t> hazard;  // hard-hazard mask
  std::vector<uint8_t> traversable;
};

/// One scheduled world change: overwrite a cell rectangle. Fields left unset
/// keep their previous values. Applied atomically between integration steps.
struct PatchMutation {
  int t_event = 0;
  int x0 = 0, y0 = 0, x1 = 0, y1 = 0;  // inclusive cell ranges
  std::optional<double> set_risk;
  std::optional<bool> set_hazard;
  std::optional<bool> set_traversable;
};

struct EventSchedule {
  std::vector<PatchMutation> events;  // sorted by t_event
  std::optional<int> t_escape;

  bool empty() const { return events.empty(); }
  void sort_events();
};

/// Discretized local world: smoothed soft-risk field in [0,1], signed
/// distance to hard hazards (positive = clear), and a traversability mask.
/// Immutable after construction; apply_events returns a new value.
class RiskPatch {
 public:
  /// Builds the derived fields from raw layers: double 3x3 box blur on the
  /// risk channel, exact Euclidean distance transform for the SDF (negative
  /// inside hazards, capped at the patch diagonal), and point anchors on the
  /// hazard boundary for the contact barrier.
  static RiskPatch build(PatchLayers layers);

  int width() const { return layers_.width; }
  int height() const { return layers_.height; }
  double resolution() const { return layers_.resolution; }
  const Vec2& origin() const { return layers_.origin; }

  double soft_risk_at(int ix, int iy) const { return soft_risk_[idx(ix, iy)]; }
  double sdf_at(int ix, int iy) const { return sdf_[idx(ix, iy)]; }
  bool traversable_at(int ix, int iy) const { return layers_.traversable[idx(ix, iy)] != 0; }
  bool hazard_at(int ix, int iy) const { return layers_.hazard[idx(ix, iy)] != 0; }

  const std::vector<double>& soft_risk() const { return soft_risk_; }
  const std::vector<double>& sdf() const { return sdf_; }
  const std::vector<Vec2>& hazard_anchors() const { return hazard_anchors_; }
  const PatchLayers& layers() const { return layers_; }

  Vec2 cell_center(int ix, int iy) const {
    return {layers_.origin.x + ix * layers_.resolution, layers_.origin.y + iy * layers_.resolution};
  }

  Vec2 world_min() const { return layers_.origin; }
  Vec2 world_max() const {
    return cell_center(layers_.width - 1, layers_.height - 1);
  }

  /// True when pos lies at least one cell inside the sampled node lattice.
  bool interior(const Vec2& pos) const;

  /// Bilinear interpolation of the requested field with its exact spatial
  /// derivative. Out-of-bounds positions clamp to the boundary and set the
  /// `clamped` flag; callers decide what that means (rollouts terminate).
  FieldSample sample(const Vec2& pos, Field field) const;

  /// Nearest-cell traversability lookup (boolean channels do not
  /// interpolate).
  bool traversable(const Vec2& pos) const;

  /// Writes one CSV file per field (row-major) named <stem>_risk.csv,
  /// <stem>_sdf.csv, <stem>_traversable.csv under dir.
  void export_csv(const std::string& dir, const std::string& stem) const;

  double sdf_cap() const { return sdf_cap_; }

 private:
  int idx(int ix, int iy) const { return iy * layers_.width + ix; }
  const std::vector<double>& grid(Field f) const {
    return f == Field::SoftRisk ? soft_risk_ : sdf_;
  }

  PatchLayers layers_;
  std::vector<double> soft_risk_;  // blurred, clamped to [0,1]
  std::vector<double> sdf_;
  std::vector<Vec2> hazard_anchors_;
  double sdf_cap_ = 0.0;
};

/// Applies every mutation with t_event <= t to the patch's raw layers exactly
/// once and rebuilds the derived fields. Idempotent for fixed t: the result
/// depends only on (base patch, schedule, t).
RiskPatch apply_events(const RiskPatch& base, const EventSchedule& schedule, int t);

}  // namespace riskfield
