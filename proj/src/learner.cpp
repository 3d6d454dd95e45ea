#include "riskfield/learner.hpp"

#include <algorithm>
#include <cmath>
#include <future>
#include <thread>

namespace riskfield {
namespace {

constexpr int kHeadDim = HeadFeatures::kFeatureCount;
constexpr int kParamDim = 2 * kHeadDim;  // soft head weights then hard head weights

int worker_count(int requested) {
  if (requested > 0) return requested;
  const unsigned hc = std::thread::hardware_concurrency();
  return hc == 0 ? 1 : static_cast<int>(hc);
}

// Solves (A) x = b for a small dense symmetric positive system in place.
std::vector<double> solve_dense(std::vector<std::vector<double>> a, std::vector<double> b) {
  const size_t n = b.size();
  for (size_t col = 0; col < n; ++col) {
    size_t pivot = col;
    for (size_t r = col + 1; r < n; ++r) {
      if (std::abs(a[r][col]) > std::abs(a[pivot][col])) pivot = r;
    }
    std::swap(a[col], a[pivot]);
    std::swap(b[col], b[pivot]);
    const double diag = a[col][col];
    if (std::abs(diag) < 1e-14) continue;  // defer to the damping term
    for (size_t r = col + 1; r < n; ++r) {
      const double f = a[r][col] / diag;
      for (size_t c = col; c < n; ++c) a[r][c] -= f * a[col][c];
      b[r] -= f * b[col];
    }
  }
  std::vector<double> x(n, 0.0);
  for (size_t i = n; i-- > 0;) {
    double acc = b[i];
    for (size_t c = i + 1; c < n; ++c) acc -= a[i][c] * x[c];
    x[i] = std::abs(a[i][i]) < 1e-14 ? 0.0 : acc / a[i][i];
  }
  return x;
}

// Smallest eigenvalue of a small symmetric matrix by cyclic Jacobi sweeps.
double min_eigenvalue_sym(std::vector<std::vector<double>> m) {
  const size_t n = m.size();
  if (n == 0) return 0.0;
  for (int sweep = 0; sweep < 64; ++sweep) {
    double off = 0.0;
    for (size_t i = 0; i < n; ++i)
      for (size_t j = i + 1; j < n; ++j) off += m[i][j] * m[i][j];
    if (off < 1e-24) break;
    for (size_t p = 0; p < n; ++p) {
      for (size_t q = p + 1; q < n; ++q) {
        if (std::abs(m[p][q]) < 1e-18) continue;
        const double theta = 0.5 * std::atan2(2.0 * m[p][q], m[q][q] - m[p][p]);
        const double c = std::cos(theta);
        const double s = std::sin(theta);
        for (size_t k = 0; k < n; ++k) {
          const double mp = m[p][k];
          const double mq = m[q][k];
          m[p][k] = c * mp - s * mq;
          m[q][k] = s * mp + c * mq;
        }
        for (size_t k = 0; k < n; ++k) {
          const double mp = m[k][p];
          const double mq = m[k][q];
          m[k][p] = c * mp - s * mq;
          m[k][q] = s * mp + c * mq;
        }
      }
    }
  }
  double lo = m[0][0];
  for (size_t i = 1; i < n; ++i) lo = std::min(lo, m[i][i]);
  return lo;
}

struct EpisodeResult {
  double cost = 0.0;
  std::vector<double> grad;  // over head weights
  double lambda_s = 0.0;
  double lambda_h = 0.0;
  bool violated = false;
  bool reached = false;
};

EpisodeResult run_episode(const TrainState& state, const ScenarioBundle& bundle) {
  const HeadFeatures features =
      HeadFeatures::compute(bundle.patch, bundle.spec.start, bundle.spec.goal);
  const PredictedCoefficients pred =
      predict_coefficients(features, state.heads, state.params.lambda_max);

  FieldParams params = state.params;
  params.lambda_s = pred.lambda_s;
  params.lambda_h = pred.lambda_h;

  RolloutOptions options;
  options.gate_mode = state.gate_mode;
  options.gate = state.gate;
  options.track_sensitivities = true;

  const RolloutRecord rec = rollout(bundle, params, state.integrator, options);
  const std::array<double, 2> grad_lambda = cost_gradient(rec, state.weights, bundle.spec.goal);

  EpisodeResult res;
  res.cost = episode_cost(rec, state.weights, bundle.spec.goal);
  res.lambda_s = pred.lambda_s;
  res.lambda_h = pred.lambda_h;
  res.violated = rec.hard_count > 0;
  res.reached = rec.status == RolloutStatus::Reached;
  res.grad.resize(kParamDim);
  for (int k = 0; k < kHeadDim; ++k) {
    res.grad[k] = grad_lambda[0] * pred.dls_dw[k];
    res.grad[kHeadDim + k] = grad_lambda[1] * pred.dlh_dw[k];
  }
  return res;
}

}  // namespace

void TrainConfig::validate() const {
  if (batch < 2) throw std::invalid_argument("batch must be at least 2");
  if (alpha < 0.0 || alpha >= 1.0) throw std::invalid_argument("alpha must lie in [0, 1)");
  if (lr < 0.0 || grad_clip <= 0.0) throw std::invalid_argument("bad optimizer settings");
  const double total = frac_delayed + frac_r1 + frac_r2;
  if (total <= 0.0) throw std::invalid_argument("scenario mixture is empty");
}

TrainState TrainState::init(const TrainConfig& config, const FieldParams& geometry_checkpoint,
                            const ScenarioGeometry& geometry) {
  config.validate();
  TrainState s;
  s.config = config;
  s.params = geometry_checkpoint;
  s.params.lambda_s = 0.0;
  s.params.lambda_h = 0.0;
  s.heads = CoefficientHeads::init_near_zero(config.head_init_logit);
  s.geometry = geometry;
  return s;
}

ScenarioSampler mixture_sampler(const TrainState& state) {
  const TrainConfig cfg = state.config;
  const ScenarioGeometry geometry = state.geometry;
  const double total = cfg.frac_delayed + cfg.frac_r1 + cfg.frac_r2;
  const double p_delayed = cfg.frac_delayed / total;
  const double p_r1 = cfg.frac_r1 / total;
  return [cfg, geometry, p_delayed, p_r1](uint64_t index) {
    // Low bits pick the regime, the rest seeds the world.
    const uint64_t h = index * 0x9e3779b97f4a7c15ULL + cfg.seed;
    const double u = ((h >> 11) & 0x1fffffULL) / 2097152.0;
    Regime regime = Regime::DelayedEscape;
    if (u >= p_delayed) regime = (u < p_delayed + p_r1) ? Regime::R1 : Regime::R2;
    return make_scenario(episode_spec(regime, cfg.seed, index, geometry));
  };
}

EpochDiagnostics episode_update(TrainState& state, const ScenarioSampler& sampler, int batch,
                                double alpha) {
  if (batch < 2) throw std::invalid_argument("episode_update needs B >= 2");
  const uint64_t base_index = state.episode_counter;
  state.episode_counter += batch;

  std::vector<EpisodeResult> results(batch);
  const int workers = worker_count(state.config.workers);
  std::atomic<int> next{0};
  auto work = [&]() {
    for (;;) {
      const int i = next.fetch_add(1);
      if (i >= batch) return;
      results[i] = run_episode(state, sampler(base_index + i));
    }
  };
  if (workers > 1) {
    std::vector<std::thread> pool;
    for (int w = 0; w < workers; ++w) pool.emplace_back(work);
    for (std::thread& th : pool) th.join();
  } else {
    work();
  }

  EpisodeBatch ep;
  ep.alpha = alpha;
  for (const EpisodeResult& r : results) {
    ep.costs.push_back(r.cost);
    ep.gradients.push_back(r.grad);
  }
  const CvarResult cvar = empirical_cvar(ep.costs, alpha);
  const std::vector<double> grad = cvar_gradient(ep);

  EpochDiagnostics diag;
  diag.cvar = cvar.value;
  double mean = 0.0, ls = 0.0, lh = 0.0, viol = 0.0, reach = 0.0;
  for (const EpisodeResult& r : results) {
    mean += r.cost;
    ls += r.lambda_s;
    lh += r.lambda_h;
    viol += r.violated ? 1.0 : 0.0;
    reach += r.reached ? 1.0 : 0.0;
  }
  diag.mean_cost = mean / batch;
  diag.lambda_s_mean = ls / batch;
  diag.lambda_h_mean = lh / batch;
  diag.violation_rate = viol / batch;
  diag.success_rate = reach / batch;
  for (uint8_t m : cvar.tail_mask) diag.tail_size += m;

  double norm2 = 0.0;
  for (double g : grad) norm2 += g * g;
  diag.grad_norm_pre = std::sqrt(norm2);
  if (!std::isfinite(diag.grad_norm_pre)) {
    diag.stepped = false;  // skip the step, keep the diagnostics
    state.epoch += 1;
    state.violation_history.push_back(diag.violation_rate);
    return diag;
  }
  const double scale =
      diag.grad_norm_pre > state.config.grad_clip ? state.config.grad_clip / diag.grad_norm_pre : 1.0;
  diag.grad_norm_post = diag.grad_norm_pre * scale;

  for (int k = 0; k < kHeadDim; ++k) {
    state.heads.w_soft[k] -= state.config.lr * scale * grad[k];
    state.heads.w_hard[k] -= state.config.lr * scale * grad[kHeadDim + k];
  }
  state.epoch += 1;
  state.violation_history.push_back(diag.violation_rate);
  return diag;
}

SegmentCorrector SegmentCorrector::identity(int y_dim, int z_dim, double mu, double rho) {
  SegmentCorrector c;
  c.mu = mu;
  c.rho = rho;
  c.j_hat.assign(y_dim, std::vector<double>(z_dim, 0.0));
  for (int i = 0; i < std::min(y_dim, z_dim); ++i) c.j_hat[i][i] = 1.0;
  return c;
}

std::vector<double> segment_correct(SegmentCorrector& corrector, const std::vector<double>& delta_y,
                                    const std::vector<double>& delta_zeta,
                                    const std::vector<double>& y_target,
                                    const std::vector<double>& y) {
  const size_t ny = corrector.j_hat.size();
  const size_t nz = corrector.j_hat.front().size();
  if (delta_y.size() != ny || y_target.size() != ny || y.size() != ny || delta_zeta.size() != nz)
    throw std::invalid_argument("segment_correct: dimension mismatch");

  double dz2 = 0.0;
  for (double z : delta_zeta) dz2 += z * z;
  if (dz2 > 0.0) {
    for (size_t i = 0; i < ny; ++i) {
      for (size_t j = 0; j < nz; ++j) {
        corrector.j_hat[i][j] = corrector.mu * corrector.j_hat[i][j] +
                                (1.0 - corrector.mu) * delta_y[i] * delta_zeta[j] / dz2;
      }
    }
  }

  // Damped least squares: (J^T J + rho I) dz = J^T (y_tgt - y).
  std::vector<std::vector<double>> jtj(nz, std::vector<double>(nz, 0.0));
  std::vector<double> rhs(nz, 0.0);
  for (size_t a = 0; a < nz; ++a) {
    for (size_t b = 0; b < nz; ++b) {
      double acc = 0.0;
      for (size_t i = 0; i < ny; ++i) acc += corrector.j_hat[i][a] * corrector.j_hat[i][b];
      jtj[a][b] = acc;
    }
    jtj[a][a] += corrector.rho;
    double acc = 0.0;
    for (size_t i = 0; i < ny; ++i) acc += corrector.j_hat[i][a] * (y_target[i] - y[i]);
    rhs[a] = acc;
  }
  return solve_dense(std::move(jtj), std::move(rhs));
}

std::vector<double> project_nonnegative(std::vector<double> zeta) {
  for (double& z : zeta) z = std::max(0.0, z);
  return zeta;
}

bool curriculum_check(const std::vector<double>& violation_history, double eta_tol, int window) {
  if (window < 1) throw std::invalid_argument("window must be positive");
  if (static_cast<int>(violation_history.size()) < window)
    throw std::invalid_argument("curriculum_check: not enough history");
  for (size_t i = violation_history.size() - window; i < violation_history.size(); ++i) {
    if (!(violation_history[i] < eta_tol)) return false;
  }
  return true;
}

bool curriculum_advance(TrainState& state) {
  if (static_cast<int>(state.violation_history.size()) < state.config.window) return false;
  if (!curriculum_check(state.violation_history, state.config.eta_tol, state.config.window))
    return false;
  state.phase += 1;
  state.geometry.difficulty = std::min(1.0, state.geometry.difficulty + 0.25);
  state.violation_history.clear();
  return true;
}

double gram_excitation_check(const std::vector<RolloutRecord>& rollouts,
                             const ObstacleSet& obstacles, double d_hat) {
  if (rollouts.size() < 2) throw std::invalid_argument("gram check needs at least 2 rollouts");
  const size_t n = obstacles.anchors.size();
  if (n == 0) return 0.0;
  std::vector<std::vector<double>> gram(n, std::vector<double>(n, 0.0));
  size_t visits = 0;
  for (const RolloutRecord& rec : rollouts) {
    for (const PhaseState& x : rec.states) {
      ++visits;
      std::vector<Vec2> cols(n, Vec2{0.0, 0.0});
      for (size_t j = 0; j < n; ++j) {
        const Vec2 diff = x.q - obstacles.anchors[j];
        const double d = diff.norm();
        if (d <= 0.0 || d >= d_hat) continue;
        cols[j] = ipc_barrier_deriv(d, d_hat) / d * diff;
      }
      for (size_t a = 0; a < n; ++a)
        for (size_t b = 0; b < n; ++b) gram[a][b] += cols[a].dot(cols[b]);
    }
  }
  if (visits == 0) return 0.0;
  for (auto& row : gram)
    for (double& v : row) v /= static_cast<double>(visits);
  return min_eigenvalue_sym(std::move(gram));
}

FieldParams fit_geometry_checkpoint(const FieldParams& base, const ScenarioGeometry& geometry,
                                    const IntegratorConfig& integrator, const CostWeights& weights,
                                    uint64_t seed, int episodes) {
  FieldParams best = base;
  best.lambda_s = 0.0;
  best.lambda_h = 0.0;
  double best_cost = std::numeric_limits<double>::infinity();
  const double betas[] = {0.8, 1.2, 1.5, 2.0};
  const double gammas[] = {0.5, 0.7, 0.9, 1.2};
  RolloutOptions options;
  options.gate_mode = GateMode::AlwaysOpen;
  for (double beta : betas) {
    for (double gamma : gammas) {
      FieldParams candidate = best;
      candidate.beta = beta;
      candidate.gamma = gamma;
      double total = 0.0;
      for (int i = 0; i < episodes; ++i) {
        const ScenarioBundle bundle =
            make_scenario(episode_spec(Regime::R3, seed, static_cast<uint64_t>(i), geometry));
        const RolloutRecord rec = rollout(bundle, candidate, integrator, options);
        total += episode_cost(rec, weights, bundle.spec.goal);
      }
      if (total < best_cost) {
        best_cost = total;
        best.beta = beta;
        best.gamma = gamma;
      }
    }
  }
  return best;
}

}  // namespace riskfield
