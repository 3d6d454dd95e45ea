#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <utility>

#include "riskfield/gate.hpp"
#include "riskfield/patch.hpp"

namespace riskfield {

enum class Regime { R1, R2, R3, DelayedEscape };

const char* regime_name(Regime r);
Regime regime_from_name(const std::string& name);

/// Knobs of the synthetic world family. All lengths in meters; the defaults
/// fit a 16 m patch.
struct ScenarioGeometry {
  int grid = 64;
  double resolution = 0.25;
  double ramp_slope = 0.30;      // lateral soft-risk slope at the agent's path
  double corridor_risk = 0.55;   // soft risk on the path
  double risk_floor = 0.03;
  double risk_cap = 0.90;
  double wall_offset_min = 0.50;  // removable wall, lateral offset from path
  double wall_offset_max = 0.62;
  double wall_thickness = 0.50;
  double front_wall_x = 8.5;     // permanent wall blocking the straight route
  double front_passage = 1.6;    // lateral clearance of the bypass over the wall
  int t_escape_min = 25;
  int t_escape_max = 75;
  double difficulty = 0.0;  // curriculum knob in [0,1]: later escapes, tighter walls
};

/// Everything that determines one episode's world. (regime, seed) fully
/// determine the grids; start/goal/d_safe are filled in by the generator.
struct ScenarioSpec {
  Regime regime = Regime::R1;
  uint64_t seed = 0;
  Vec2 start;
  Vec2 goal;
  ScenarioGeometry geometry;
  std::optional<Vec2> d_safe;  // known safer direction; R1 and DelayedEscape only
};

struct ScenarioBundle {
  ScenarioSpec spec;  // with start/goal/d_safe resolved
  RiskPatch patch;
  EventSchedule schedule;
};

class ScenarioError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Builds the world for any regime. Generators are self-certifying: each
/// construction re-checks its regime guarantees (enumerated primitives for
/// R1, flood-fill seal for R2, constant risk for R3, blocked-then-open
/// primitives for DelayedEscape) and throws ScenarioError on violation.
ScenarioBundle make_scenario(const ScenarioSpec& spec, const GateParams& gate = GateParams{});

/// Static-regime constructor (R1/R2/R3).
RiskPatch make_regime_patch(const ScenarioSpec& spec, const GateParams& gate = GateParams{});

/// Delayed-required-escape: a walled corridor toward the goal, a lateral
/// low-risk bypass sealed until t_escape, and a schedule that opens it.
std::pair<RiskPatch, EventSchedule> make_delayed_escape(const ScenarioSpec& spec,
                                                        const GateParams& gate = GateParams{});

/// Deterministic per-episode spec: hashes (base_seed, index) into the
/// episode seed and picks the regime from the requested mixture.
ScenarioSpec episode_spec(Regime regime, uint64_t base_seed, uint64_t index,
                          const ScenarioGeometry& geometry);

}  // namespace riskfield
