#include "riskfield/scenario.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <random>

#include "riskfield/energy.hpp"

namespace riskfield {
namespace {

// splitmix64; used to derive independent episode seeds.
uint64_t mix64(uint64_t z) {
  z += 0x9e3779b97f4a7c15ULL;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

struct Rng {
  std::mt19937_64 gen;
  explicit Rng(uint64_t seed) : gen(seed) {}
  double uniform(double lo, double hi) {
    const double u = (gen() >> 11) * (1.0 / 9007199254740992.0);
    return lo + u * (hi - lo);
  }
  int uniform_int(int lo, int hi) {  // inclusive
    return lo + static_cast<int>(gen() % static_cast<uint64_t>(hi - lo + 1));
  }
  int sign() { return (gen() & 1) ? 1 : -1; }
};

struct Frame {
  double y0 = 8.0;   // path height
  int side = 1;      // which lateral side holds the lower-risk region
  Vec2 start;
  Vec2 goal;
};

Frame make_frame(Rng& rng, const ScenarioGeometry& g) {
  Frame f;
  const double span = (g.grid - 1) * g.resolution;
  f.y0 = 0.5 * span + rng.uniform(-0.5, 0.5);
  f.side = rng.sign();
  f.start = {2.0 + rng.uniform(-0.2, 0.2), f.y0};
  f.goal = {span - 2.0 + rng.uniform(-0.2, 0.2), f.y0};
  return f;
}

PatchLayers blank_layers(const ScenarioGeometry& g, double risk) {
  PatchLayers l;
  l.width = g.grid;
  l.height = g.grid;
  l.resolution = g.resolution;
  l.origin = {0.0, 0.0};
  const size_t n = static_cast<size_t>(g.grid) * g.grid;
  l.risk.assign(n, risk);
  l.hazard.assign(n, 0);
  l.traversable.assign(n, 1);
  return l;
}

void fill_ramp(PatchLayers& l, const Frame& f, const ScenarioGeometry& g) {
  for (int iy = 0; iy < l.height; ++iy) {
    const double y = l.origin.y + iy * l.resolution;
    const double r =
        std::clamp(g.corridor_risk - g.ramp_slope * f.side * (y - f.y0), g.risk_floor, g.risk_cap);
    for (int ix = 0; ix < l.width; ++ix) l.risk[iy * l.width + ix] = r;
  }
}

void stamp_rect(PatchLayers& l, double x0, double y0, double x1, double y1, bool hazard,
                std::optional<double> risk = std::nullopt) {
  const auto cx = [&](double x) {
    return std::clamp(static_cast<int>(std::lround(x / l.resolution)), 0, l.width - 1);
  };
  const auto cy = [&](double y) {
    return std::clamp(static_cast<int>(std::lround(y / l.resolution)), 0, l.height - 1);
  };
  for (int iy = cy(std::min(y0, y1)); iy <= cy(std::max(y0, y1)); ++iy) {
    for (int ix = cx(std::min(x0, x1)); ix <= cx(std::max(x0, x1)); ++ix) {
      const int i = iy * l.width + ix;
      if (hazard) {
        l.hazard[i] = 1;
        l.traversable[i] = 0;
      }
      if (risk) l.risk[i] = *risk;
    }
  }
}

void stamp_disc(PatchLayers& l, const Vec2& center, double radius, bool hazard) {
  for (int iy = 0; iy < l.height; ++iy) {
    for (int ix = 0; ix < l.width; ++ix) {
      const Vec2 c{l.origin.x + ix * l.resolution, l.origin.y + iy * l.resolution};
      if ((c - center).norm() <= radius) {
        const int i = iy * l.width + ix;
        if (hazard) {
          l.hazard[i] = 1;
          l.traversable[i] = 0;
        }
      }
    }
  }
}

GateResult gate_at_start(const ScenarioSpec& spec, const RiskPatch& patch, const GateParams& gate) {
  const Vec2 heading = (spec.goal - spec.start).normalized();
  // Geometry-only force direction with no nearby obstacles reduces to the
  // goal heading; the generators keep the start clear of barrier range.
  return evaluate_gate_at(spec.start, spec.goal, heading, patch, gate, false).result;
}

// Reachability over clear traversable cells (4-connected).
bool min_risk_cell_sealed(const RiskPatch& patch, const Vec2& start) {
  const int w = patch.width();
  const int h = patch.height();
  int best_ix = 0, best_iy = 0;
  double best = std::numeric_limits<double>::infinity();
  for (int iy = 0; iy < h; ++iy) {
    for (int ix = 0; ix < w; ++ix) {
      if (patch.soft_risk_at(ix, iy) < best) {
        best = patch.soft_risk_at(ix, iy);
        best_ix = ix;
        best_iy = iy;
      }
    }
  }
  if (!patch.traversable_at(best_ix, best_iy)) return true;

  const int sx = std::clamp(static_cast<int>(std::lround((start.x - patch.origin().x) / patch.resolution())), 0, w - 1);
  const int sy = std::clamp(static_cast<int>(std::lround((start.y - patch.origin().y) / patch.resolution())), 0, h - 1);
  std::vector<uint8_t> seen(static_cast<size_t>(w) * h, 0);
  std::deque<std::pair<int, int>> queue;
  const auto passable = [&](int ix, int iy) {
    return patch.traversable_at(ix, iy) && patch.sdf_at(ix, iy) > 0.0;
  };
  if (!passable(sx, sy)) return true;
  queue.emplace_back(sx, sy);
  seen[sy * w + sx] = 1;
  while (!queue.empty()) {
    const auto [ix, iy] = queue.front();
    queue.pop_front();
    if (ix == best_ix && iy == best_iy) return false;
    const int nbr[4][2] = {{1, 0}, {-1, 0}, {0, 1}, {0, -1}};
    for (const auto& d : nbr) {
      const int nx = ix + d[0];
      const int ny = iy + d[1];
      if (nx < 0 || ny < 0 || nx >= w || ny >= h) continue;
      if (seen[ny * w + nx] || !passable(nx, ny)) continue;
      seen[ny * w + nx] = 1;
      queue.emplace_back(nx, ny);
    }
  }
  return true;
}

ScenarioBundle build_r1(const ScenarioSpec& in, const GateParams& gate) {
  ScenarioSpec spec = in;
  Rng rng(mix64(spec.seed));
  const Frame f = make_frame(rng, spec.geometry);
  spec.start = f.start;
  spec.goal = f.goal;
  spec.d_safe = Vec2{0.0, static_cast<double>(f.side)};

  PatchLayers layers = blank_layers(spec.geometry, spec.geometry.corridor_risk);
  fill_ramp(layers, f, spec.geometry);
  // Decorative hazard away from the start so the SDF has structure.
  stamp_disc(layers, {10.0 + rng.uniform(-1.0, 1.0), f.y0 - f.side * 4.0}, 0.6, true);

  ScenarioBundle bundle{spec, RiskPatch::build(std::move(layers)), EventSchedule{}};

  const GateResult g = gate_at_start(spec, bundle.patch, gate);
  bool improving = false;
  for (const PrimitiveScore& s : g.scores) {
    improving = improving || (s.feasible &&
                              s.risk_integral < g.scores[g.k_geo].risk_integral - gate.rho_risk &&
                              s.min_clearance > gate.delta_phi);
  }
  if (!improving) throw ScenarioError("R1 construction: no improving feasible primitive");
  if (g.m_feas < 0.5) throw ScenarioError("R1 construction: gate below activation threshold");
  return bundle;
}

ScenarioBundle build_r2(const ScenarioSpec& in, const GateParams& gate) {
  ScenarioSpec spec = in;
  Rng rng(mix64(spec.seed));
  const Frame f = make_frame(rng, spec.geometry);
  spec.start = f.start;
  spec.goal = f.goal;
  spec.d_safe.reset();

  // Low-risk pocket directly ahead, sealed by a square ring. Half the seeds
  // seal with hard hazard, half with non-traversable ground only.
  const Vec2 pc{f.start.x + rng.uniform(2.2, 2.5), f.y0};
  const double outer = 1.45 + rng.uniform(-0.05, 0.05);
  const double inner = outer - 0.30;
  const double slope = rng.uniform(0.25, 0.30);
  const bool hard_seal = (rng.gen() & 1) != 0;

  PatchLayers layers = blank_layers(spec.geometry, 0.5);
  for (int iy = 0; iy < layers.height; ++iy) {
    for (int ix = 0; ix < layers.width; ++ix) {
      const Vec2 c{layers.origin.x + ix * layers.resolution, layers.origin.y + iy * layers.resolution};
      layers.risk[iy * layers.width + ix] =
          std::clamp(0.08 + slope * (c - pc).norm(), 0.08, 0.80);
      const double dx = std::abs(c.x - pc.x);
      const double dy = std::abs(c.y - pc.y);
      const double box = std::max(dx, dy);
      if (box >= inner && box <= outer) {
        const int i = iy * layers.width + ix;
        layers.traversable[i] = 0;
        if (hard_seal) layers.hazard[i] = 1;
      }
    }
  }

  ScenarioBundle bundle{spec, RiskPatch::build(std::move(layers)), EventSchedule{}};

  if (!min_risk_cell_sealed(bundle.patch, spec.start))
    throw ScenarioError("R2 construction: lowest-risk region is reachable");
  const GateResult g = gate_at_start(spec, bundle.patch, gate);
  if (g.m_feas > 0.05) throw ScenarioError("R2 construction: gate not suppressed");
  return bundle;
}

ScenarioBundle build_r3(const ScenarioSpec& in) {
  ScenarioSpec spec = in;
  Rng rng(mix64(spec.seed));
  const Frame f = make_frame(rng, spec.geometry);
  spec.start = f.start;
  spec.goal = f.goal;
  spec.d_safe.reset();

  PatchLayers layers = blank_layers(spec.geometry, 0.4);
  ScenarioBundle bundle{spec, RiskPatch::build(std::move(layers)), EventSchedule{}};

  const auto& risk = bundle.patch.soft_risk();
  for (double r : risk) {
    if (std::abs(r - risk.front()) > 1e-12)
      throw ScenarioError("R3 construction: soft risk not constant");
  }
  return bundle;
}

ScenarioBundle build_delayed_escape(const ScenarioSpec& in, const GateParams& gate) {
  ScenarioSpec spec = in;
  const ScenarioGeometry& g = spec.geometry;
  Rng rng(mix64(spec.seed));
  const Frame f = make_frame(rng, g);
  spec.start = f.start;
  spec.goal = f.goal;
  spec.d_safe = Vec2{0.0, static_cast<double>(f.side)};

  const double diff = std::clamp(g.difficulty, 0.0, 1.0);
  const double w_lo = g.wall_offset_min - 0.05 * diff;
  const double w_hi = g.wall_offset_max - 0.05 * diff;
  const double wall_offset = rng.uniform(w_lo, w_hi);
  if (wall_offset < 0.35 || wall_offset + g.wall_thickness > g.front_passage)
    throw ScenarioError("delayed escape: pocket overlaps corridor");
  const int te_lo = g.t_escape_min + static_cast<int>(15 * diff);
  const int te_hi = std::min(g.t_escape_max + static_cast<int>(15 * diff), 95);
  const int t_escape = rng.uniform_int(te_lo, te_hi);

  PatchLayers layers = blank_layers(g, g.corridor_risk);
  fill_ramp(layers, f, g);

  const double span = (g.grid - 1) * g.resolution;
  // Permanent wall across the straight route; bypass opens beyond
  // front_passage on the pocket side.
  const double fw0 = g.front_wall_x;
  const double fw1 = g.front_wall_x + 0.4;
  if (f.side > 0) {
    stamp_rect(layers, fw0, 0.0, fw1, f.y0 + g.front_passage, true);
  } else {
    stamp_rect(layers, fw0, f.y0 - g.front_passage, fw1, span, true);
  }

  // Removable wall sealing the bypass along the corridor.
  const double wy0 = f.y0 + f.side * wall_offset;
  const double wy1 = f.y0 + f.side * (wall_offset + g.wall_thickness);
  const double wx0 = 0.5;
  const double wx1 = fw0 - 0.1;
  PatchLayers sealed = layers;
  stamp_rect(sealed, wx0, std::min(wy0, wy1), wx1, std::max(wy0, wy1), true);

  EventSchedule schedule;
  PatchMutation open;
  open.t_event = t_escape;
  open.x0 = static_cast<int>(std::lround(wx0 / g.resolution));
  open.x1 = static_cast<int>(std::lround(wx1 / g.resolution));
  open.y0 = static_cast<int>(std::lround(std::min(wy0, wy1) / g.resolution));
  open.y1 = static_cast<int>(std::lround(std::max(wy0, wy1) / g.resolution));
  open.set_hazard = false;
  open.set_traversable = true;
  schedule.events.push_back(open);
  schedule.t_escape = t_escape;
  schedule.sort_events();

  ScenarioBundle bundle{spec, RiskPatch::build(std::move(sealed)), EventSchedule{schedule}};

  // Certify: primitives crossing the sealed band are in contact before the
  // event and at least one is clear after it.
  const Vec2 heading = (spec.goal - spec.start).normalized();
  const std::vector<Primitive> prims = sample_primitives(spec.start, heading, gate, bundle.patch);
  const double band_near = wall_offset;
  const auto crosses_band = [&](const Primitive& p) {
    for (const Vec2& s : p.samples) {
      if (f.side * (s.y - f.y0) > band_near + g.wall_thickness) return true;
    }
    return false;
  };
  bool any_crossing = false;
  for (const Primitive& p : prims) {
    if (!crosses_band(p)) continue;
    any_crossing = true;
    const PrimitiveScore s = score_primitive(p, bundle.patch, gate);
    if (s.min_clearance > 0.0)
      throw ScenarioError("delayed escape: sealed bypass reachable before t_escape");
  }
  if (!any_crossing) throw ScenarioError("delayed escape: no primitive reaches the bypass");

  const RiskPatch opened = apply_events(bundle.patch, bundle.schedule, t_escape);
  bool any_open = false;
  for (const Primitive& p : sample_primitives(spec.start, heading, gate, opened)) {
    if (!crosses_band(p)) continue;
    const PrimitiveScore s = score_primitive(p, opened, gate);
    any_open = any_open || s.min_clearance > gate.delta_phi;
  }
  if (!any_open) throw ScenarioError("delayed escape: bypass still blocked after t_escape");
  return bundle;
}

}  // namespace

const char* regime_name(Regime r) {
  switch (r) {
    case Regime::R1: return "R1";
    case Regime::R2: return "R2";
    case Regime::R3: return "R3";
    case Regime::DelayedEscape: return "DelayedEscape";
  }
  return "?";
}

Regime regime_from_name(const std::string& name) {
  if (name == "R1") return Regime::R1;
  if (name == "R2") return Regime::R2;
  if (name == "R3") return Regime::R3;
  if (name == "DelayedEscape") return Regime::DelayedEscape;
  throw std::invalid_argument("unknown regime: " + name);
}

ScenarioBundle make_scenario(const ScenarioSpec& spec, const GateParams& gate) {
  switch (spec.regime) {
    case Regime::R1: return build_r1(spec, gate);
    case Regime::R2: return build_r2(spec, gate);
    case Regime::R3: return build_r3(spec);
    case Regime::DelayedEscape: return build_delayed_escape(spec, gate);
  }
  throw std::invalid_argument("unknown regime");
}

RiskPatch make_regime_patch(const ScenarioSpec& spec, const GateParams& gate) {
  if (spec.regime == Regime::DelayedEscape)
    throw std::invalid_argument("make_regime_patch expects a static regime");
  return make_scenario(spec, gate).patch;
}

std::pair<RiskPatch, EventSchedule> make_delayed_escape(const ScenarioSpec& spec,
                                                        const GateParams& gate) {
  if (spec.regime != Regime::DelayedEscape)
    throw std::invalid_argument("make_delayed_escape expects regime DelayedEscape");
  ScenarioBundle b = make_scenario(spec, gate);
  return {std::move(b.patch), std::move(b.schedule)};
}

ScenarioSpec episode_spec(Regime regime, uint64_t base_seed, uint64_t index,
                          const ScenarioGeometry& geometry) {
  ScenarioSpec spec;
  spec.regime = regime;
  spec.seed = mix64(base_seed + 0x9e3779b97f4a7c15ULL * (index + 1));
  spec.geometry = geometry;
  return spec;
}

}  // namespace riskfield
