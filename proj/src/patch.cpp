#include "riskfield/patch.hpp"

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <stdexcept>

namespace riskfield {
namespace {

// One pass of a 3x3 box blur with edge clamping.
std::vector<double> box_blur(const std::vector<double>& in, int w, int h) {
  std::vector<double> out(in.size());
  for (int iy = 0; iy < h; ++iy) {
    for (int ix = 0; ix < w; ++ix) {
      double acc = 0.0;
      for (int dy = -1; dy <= 1; ++dy) {
        for (int dx = -1; dx <= 1; ++dx) {
          const int cx = std::clamp(ix + dx, 0, w - 1);
          const int cy = std::clamp(iy + dy, 0, h - 1);
          acc += in[cy * w + cx];
        }
      }
      out[iy * w + ix] = acc / 9.0;
    }
  }
  return out;
}

// 1D squared-distance transform (lower envelope of parabolas), the
// Felzenszwalb-Huttenlocher construction.
void edt_1d(const std::vector<double>& f, std::vector<double>& d, int n) {
  static constexpr double kInf = std::numeric_limits<double>::infinity();
  std::vector<int> v(n);
  std::vector<double> z(n + 1);
  int k = 0;
  v[0] = 0;
  z[0] = -kInf;
  z[1] = kInf;
  for (int q = 1; q < n; ++q) {
    if (f[q] == kInf && f[v[k]] == kInf) {
      // both parabolas at infinity: keep the previous vertex
      continue;
    }
    double s = ((f[q] + q * q) - (f[v[k]] + v[k] * v[k])) / (2.0 * q - 2.0 * v[k]);
    while (k > 0 && s <= z[k]) {
      --k;
      s = ((f[q] + q * q) - (f[v[k]] + v[k] * v[k])) / (2.0 * q - 2.0 * v[k]);
    }
    ++k;
    v[k] = q;
    z[k] = s;
    z[k + 1] = kInf;
  }
  k = 0;
  for (int q = 0; q < n; ++q) {
    while (z[k + 1] < q) ++k;
    const double dq = q - v[k];
    d[q] = dq * dq + f[v[k]];
  }
}

// Exact squared Euclidean distance (in cell units) to the nearest set cell.
std::vector<double> edt_sq(const std::vector<uint8_t>& mask, int w, int h) {
  static constexpr double kInf = std::numeric_limits<double>::infinity();
  std::vector<double> g(static_cast<size_t>(w) * h);
  std::vector<double> col(h), cold(h);
  for (int ix = 0; ix < w; ++ix) {
    for (int iy = 0; iy < h; ++iy) col[iy] = mask[iy * w + ix] ? 0.0 : kInf;
    edt_1d(col, cold, h);
    for (int iy = 0; iy < h; ++iy) g[iy * w + ix] = cold[iy];
  }
  std::vector<double> row(w), rowd(w), out(static_cast<size_t>(w) * h);
  for (int iy = 0; iy < h; ++iy) {
    for (int ix = 0; ix < w; ++ix) row[ix] = g[iy * w + ix];
    edt_1d(row, rowd, w);
    for (int ix = 0; ix < w; ++ix) out[iy * w + ix] = rowd[ix];
  }
  return out;
}

void write_grid_csv(const std::string& path, const std::vector<double>& grid, int w, int h) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path);
  for (int iy = 0; iy < h; ++iy) {
    for (int ix = 0; ix < w; ++ix) {
      out << grid[iy * w + ix];
      out << (ix + 1 < w ? ',' : '\n');
    }
  }
}

}  // namespace

void EventSchedule::sort_events() {
  std::stable_sort(events.begin(), events.end(),
                   [](const PatchMutation& a, const PatchMutation& b) { return a.t_event < b.t_event; });
}

RiskPatch RiskPatch::build(PatchLayers layers) {
  const int w = layers.width;
  const int h = layers.height;
  const size_t n = static_cast<size_t>(w) * h;
  if (w < 4 || h < 4) throw std::invalid_argument("patch must be at least 4x4 cells");
  if (layers.resolution <= 0.0) throw std::invalid_argument("resolution must be positive");
  if (layers.risk.size() != n || layers.hazard.size() != n || layers.traversable.size() != n)
    throw std::invalid_argument("layer size mismatch");

  RiskPatch p;
  p.layers_ = std::move(layers);

  // Soft risk: blur twice so the gradient is meaningful, then clamp.
  p.soft_risk_ = box_blur(box_blur(p.layers_.risk, w, h), w, h);
  for (double& r : p.soft_risk_) r = std::clamp(r, 0.0, 1.0);

  // Signed distance: exact EDT over the hazard mask, negative inside.
  const double res = p.layers_.resolution;
  p.sdf_cap_ = std::hypot(w * res, h * res);
  bool any_hazard = false;
  for (uint8_t hz : p.layers_.hazard) any_hazard |= (hz != 0);
  p.sdf_.assign(n, p.sdf_cap_);
  if (any_hazard) {
    const std::vector<double> d_out = edt_sq(p.layers_.hazard, w, h);
    std::vector<uint8_t> inv(n);
    for (size_t i = 0; i < n; ++i) inv[i] = p.layers_.hazard[i] ? 0 : 1;
    const std::vector<double> d_in = edt_sq(inv, w, h);
    for (size_t i = 0; i < n; ++i) {
      const double d = p.layers_.hazard[i] ? -std::sqrt(d_in[i]) : std::sqrt(d_out[i]);
      p.sdf_[i] = std::clamp(d * res, -p.sdf_cap_, p.sdf_cap_);
    }
    // Contact anchors: hazard cells with at least one clear 4-neighbor.
    for (int iy = 0; iy < h; ++iy) {
      for (int ix = 0; ix < w; ++ix) {
        if (!p.layers_.hazard[iy * w + ix]) continue;
        const bool boundary = (ix > 0 && !p.layers_.hazard[iy * w + ix - 1]) ||
                              (ix + 1 < w && !p.layers_.hazard[iy * w + ix + 1]) ||
                              (iy > 0 && !p.layers_.hazard[(iy - 1) * w + ix]) ||
                              (iy + 1 < h && !p.layers_.hazard[(iy + 1) * w + ix]);
        if (boundary) p.hazard_anchors_.push_back(p.cell_center(ix, iy));
      }
    }
  }
  return p;
}

bool RiskPatch::interior(const Vec2& pos) const {
  const double res = layers_.resolution;
  const Vec2 lo = layers_.origin;
  return pos.x >= lo.x + res && pos.y >= lo.y + res &&
         pos.x <= lo.x + (layers_.width - 2) * res && pos.y <= lo.y + (layers_.height - 2) * res;
}

FieldSample RiskPatch::sample(const Vec2& pos, Field field) const {
  const std::vector<double>& g = grid(field);
  const int w = layers_.width;
  const int h = layers_.height;
  const double res = layers_.resolution;

  double u = (pos.x - layers_.origin.x) / res;
  double v = (pos.y - layers_.origin.y) / res;
  FieldSample s;
  const double u_max = static_cast<double>(w - 1);
  const double v_max = static_cast<double>(h - 1);
  if (u < 0.0 || v < 0.0 || u > u_max || v > v_max) {
    s.clamped = true;
    u = std::clamp(u, 0.0, u_max);
    v = std::clamp(v, 0.0, v_max);
  }
  int i0 = std::min(static_cast<int>(u), w - 2);
  int j0 = std::min(static_cast<int>(v), h - 2);
  const double fx = u - i0;
  const double fy = v - j0;
  const double v00 = g[j0 * w + i0];
  const double v10 = g[j0 * w + i0 + 1];
  const double v01 = g[(j0 + 1) * w + i0];
  const double v11 = g[(j0 + 1) * w + i0 + 1];

  s.value = (1.0 - fy) * ((1.0 - fx) * v00 + fx * v10) + fy * ((1.0 - fx) * v01 + fx * v11);
  s.grad.x = ((1.0 - fy) * (v10 - v00) + fy * (v11 - v01)) / res;
  s.grad.y = ((1.0 - fx) * (v01 - v00) + fx * (v11 - v10)) / res;
  s.hess_xy = (v11 - v10 - v01 + v00) / (res * res);
  return s;
}

bool RiskPatch::traversable(const Vec2& pos) const {
  const double res = layers_.resolution;
  int ix = static_cast<int>(std::lround((pos.x - layers_.origin.x) / res));
  int iy = static_cast<int>(std::lround((pos.y - layers_.origin.y) / res));
  ix = std::clamp(ix, 0, layers_.width - 1);
  iy = std::clamp(iy, 0, layers_.height - 1);
  return layers_.traversable[iy * layers_.width + ix] != 0;
}

void RiskPatch::export_csv(const std::string& dir, const std::string& stem) const {
  std::filesystem::create_directories(dir);
  const std::string base = dir + "/" + stem;
  write_grid_csv(base + "_risk.csv", soft_risk_, layers_.width, layers_.height);
  write_grid_csv(base + "_sdf.csv", sdf_, layers_.width, layers_.height);
  std::vector<double> trav(layers_.traversable.begin(), layers_.traversable.end());
  write_grid_csv(base + "_traversable.csv", trav, layers_.width, layers_.height);
}

RiskPatch apply_events(const RiskPatch& base, const EventSchedule& schedule, int t) {
  PatchLayers layers = base.layers();
  const int w = layers.width;
  const int h = layers.height;
  for (const PatchMutation& m : schedule.events) {
    if (m.t_event > t) continue;
    const int x0 = std::clamp(m.x0, 0, w - 1);
    const int x1 = std::clamp(m.x1, 0, w - 1);
    const int y0 = std::clamp(m.y0, 0, h - 1);
    const int y1 = std::clamp(m.y1, 0, h - 1);
    for (int iy = y0; iy <= y1; ++iy) {
      for (int ix = x0; ix <= x1; ++ix) {
        const int i = iy * w + ix;
        if (m.set_risk) layers.risk[i] = *m.set_risk;
        if (m.set_hazard) layers.hazard[i] = *m.set_hazard ? 1 : 0;
        if (m.set_traversable) layers.traversable[i] = *m.set_traversable ? 1 : 0;
      }
    }
  }
  return RiskPatch::build(std::move(layers));
}

}  // namespace riskfield
