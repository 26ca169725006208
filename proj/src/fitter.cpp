#include "phrec/fitter.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <numeric>

#include "phrec/error.hpp"
#include "phrec/parallel.hpp"
#include "phrec/rng.hpp"

namespace phrec {

namespace {

constexpr std::string_view kModule = "fitter";
constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr double kEdge = 1e-9;

// Smooth bijection between the free coordinates of the box and R^d.
class BoxMap {
 public:
  BoxMap(const BoundsTable& bounds, const std::vector<int>& frozen, int n) : bounds_(bounds), n_(n) {
    for (int j = 0; j < HeartParams::kCount; ++j) {
      const bool is_frozen = std::find(frozen.begin(), frozen.end(), j) != frozen.end();
      fixed_[j] = is_frozen ? 0.0 : bounds[j].lo;
      if (!is_frozen && bounds[j].hi > bounds[j].lo) free_.push_back(j);
    }
  }

  int dim() const { return static_cast<int>(free_.size()); }

  HeartParams unpack(const Vector& z) const {
    std::vector<double> v(fixed_.begin(), fixed_.end());
    for (int k = 0; k < dim(); ++k) {
      const ParamBounds& b = bounds_[free_[k]];
      const double u = 1.0 / (1.0 + std::exp(-z(k)));
      double value = b.log_scale ? std::exp(std::log(b.lo) + (std::log(b.hi) - std::log(b.lo)) * u)
                                 : b.lo + (b.hi - b.lo) * u;
      v[free_[k]] = std::clamp(value, b.lo, b.hi);
    }
    return HeartParams::from_vector(v, n_);
  }

  Vector pack(const HeartParams& theta) const {
    const auto v = theta.to_vector();
    Vector z(dim());
    for (int k = 0; k < dim(); ++k) {
      const ParamBounds& b = bounds_[free_[k]];
      const double x = std::clamp(v[free_[k]], b.lo, b.hi);
      double u = b.log_scale ? (std::log(x) - std::log(b.lo)) / (std::log(b.hi) - std::log(b.lo))
                             : (x - b.lo) / (b.hi - b.lo);
      u = std::clamp(u, kEdge, 1.0 - kEdge);
      z(k) = std::log(u / (1.0 - u));
    }
    return z;
  }

  // Point of the box at unit-cube coordinates u (one per free coordinate).
  HeartParams from_unit(const std::vector<double>& u) const {
    Vector z(dim());
    for (int k = 0; k < dim(); ++k) {
      const double c = std::clamp(u[k], kEdge, 1.0 - kEdge);
      z(k) = std::log(c / (1.0 - c));
    }
    return unpack(z);
  }

 private:
  BoundsTable bounds_;
  int n_;
  std::array<double, HeartParams::kCount> fixed_{};
  std::vector<int> free_;
};

Vector unit_box(const Vector& z) { return (1.0 + (-z.array()).exp()).inverse().matrix(); }

struct NmOutcome {
  Vector z;
  double f = kInf;
  long evals = 0;
  bool converged = false;
};

// Nelder-Mead with dimension-adapted coefficients.
NmOutcome nelder_mead(const std::function<double(const Vector&)>& f, const Vector& z0, double step,
                      long max_evals, double xtol, double ftol) {
  const int d = static_cast<int>(z0.size());
  NmOutcome out;
  const auto eval = [&](const Vector& z) {
    ++out.evals;
    const double v = f(z);
    return std::isnan(v) ? kInf : v;
  };
  if (d == 0) {
    out.z = z0;
    out.f = eval(z0);
    out.converged = true;
    return out;
  }
  const double rho = 1.0, chi = 1.0 + 2.0 / d, psi = 0.75 - 1.0 / (2.0 * d), sigma = 1.0 - 1.0 / d;
  std::vector<Vector> x(d + 1, z0);
  std::vector<double> fx(d + 1);
  fx[0] = eval(z0);
  for (int i = 0; i < d; ++i) {
    x[i + 1](i) += step;
    fx[i + 1] = eval(x[i + 1]);
  }
  std::vector<int> order(d + 1);
  while (true) {
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](int a, int b) { return fx[a] < fx[b]; });
    std::vector<Vector> xs;
    std::vector<double> fs;
    for (const int o : order) {
      xs.push_back(x[o]);
      fs.push_back(fx[o]);
    }
    x = std::move(xs);
    fx = std::move(fs);

    // Simplex spread in unit-box coordinates.
    double fspread = 0.0, xspread = 0.0;
    const Vector u0 = unit_box(x[0]);
    for (int i = 1; i <= d; ++i) {
      fspread = std::max(fspread, std::abs(fx[i] - fx[0]));
      xspread = std::max(xspread, (unit_box(x[i]) - u0).cwiseAbs().maxCoeff());
    }
    if (std::isfinite(fx[0]) && fspread <= ftol && xspread <= xtol) {
      out.converged = true;
      break;
    }
    if (out.evals >= max_evals) break;

    Vector centroid = Vector::Zero(d);
    for (int i = 0; i < d; ++i) centroid += x[i];
    centroid /= d;
    const Vector& worst = x[d];
    const Vector xr = centroid + rho * (centroid - worst);
    const double fr = eval(xr);
    bool shrink = false;
    if (fr < fx[0]) {
      const Vector xe = centroid + rho * chi * (centroid - worst);
      const double fe = eval(xe);
      if (fe < fr) {
        x[d] = xe;
        fx[d] = fe;
      } else {
        x[d] = xr;
        fx[d] = fr;
      }
    } else if (fr < fx[d - 1]) {
      x[d] = xr;
      fx[d] = fr;
    } else if (fr < fx[d]) {
      const Vector xc = centroid + psi * rho * (centroid - worst);
      const double fc = eval(xc);
      if (fc <= fr) {
        x[d] = xc;
        fx[d] = fc;
      } else {
        shrink = true;
      }
    } else {
      const Vector xcc = centroid - psi * (centroid - worst);
      const double fcc = eval(xcc);
      if (fcc < fx[d]) {
        x[d] = xcc;
        fx[d] = fcc;
      } else {
        shrink = true;
      }
    }
    if (shrink) {
      for (int i = 1; i <= d; ++i) {
        x[i] = x[0] + sigma * (x[i] - x[0]);
        fx[i] = eval(x[i]);
      }
    }
  }
  const auto best = std::min_element(fx.begin(), fx.end()) - fx.begin();
  out.z = x[best];
  out.f = fx[best];
  return out;
}

double radical_inverse(std::uint64_t index, int base) {
  double result = 0.0, scale = 1.0 / base;
  while (index > 0) {
    result += static_cast<double>(index % base) * scale;
    index /= base;
    scale /= base;
  }
  return result;
}

// Halton point `index` (1-based) rotated by a seed-dependent shift.
std::vector<double> shifted_halton(std::uint64_t index, int dim, std::uint64_t seed) {
  static constexpr int kPrimes[] = {2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31};
  Rng rng(derive_seed(seed, 0x4a17));
  std::vector<double> u(dim);
  for (int k = 0; k < dim; ++k) {
    const double shifted = radical_inverse(index, kPrimes[k]) + rng.uniform();
    u[k] = shifted - std::floor(shifted);
  }
  return u;
}

HeartParams central_guess(int n) {
  HeartParams g;
  g.a = 1e-3;
  g.b = 1e-3;
  g.q = 1e-6;
  g.p = 5.0;
  g.lambda0 = 0.5;
  g.lambda1 = 0.01;
  g.n = n;
  return g;
}

void check_config(const FitConfig& config) {
  if (config.n_states < 1) throw Error(ErrorCode::InvalidConfig, kModule, "n_states must be >= 1");
  if (config.starts < 0 || (config.starts == 0 && config.initial.empty() && !config.central_start)) {
    throw Error(ErrorCode::InvalidConfig, kModule, "need at least one start");
  }
  if (config.max_evals < 1) throw Error(ErrorCode::InvalidConfig, kModule, "max_evals must be >= 1");
  for (int j = 0; j < HeartParams::kCount; ++j) {
    const ParamBounds& b = config.bounds[j];
    if (!(b.lo <= b.hi) || !std::isfinite(b.lo) || !std::isfinite(b.hi) || (b.log_scale && b.lo <= 0.0)) {
      throw Error(ErrorCode::InvalidConfig, kModule, std::string("bad bounds for ") + HeartParams::name(j));
    }
  }
}

double quantile(std::vector<double> values, double prob) {
  std::sort(values.begin(), values.end());
  const double pos = prob * static_cast<double>(values.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const auto hi = std::min(lo + 1, values.size() - 1);
  return values[lo] + (pos - static_cast<double>(lo)) * (values[hi] - values[lo]);
}

}  // namespace

BoundsTable default_bounds() {
  return {{{1e-12, 1.0, true},
           {1e-12, 1.0, true},
           {1e-12, 1.0, true},
           {0.0, 20.0, false},
           {1e-12, 5.0, true},
           {1e-12, 5.0, true},
           {-5.0, 5.0, false},
           {-5.0, 5.0, false},
           {-5.0, 5.0, false}}};
}

int param_index(const std::string& name) {
  for (int j = 0; j < HeartParams::kCount; ++j) {
    if (name == HeartParams::name(j)) return j;
  }
  throw Error(ErrorCode::InvalidConfig, kModule, "unknown parameter '" + name + "'");
}

FitResult fit_restricted(const std::vector<PatientRecord>& patients, const FitConfig& config,
                         const std::vector<int>& frozen) {
  check_config(config);
  if (patients.empty()) throw Error(ErrorCode::InvalidConfig, kModule, "no patients");
  for (const int j : frozen) {
    if (j < 0 || j >= HeartParams::kCount) {
      throw Error(ErrorCode::InvalidConfig, kModule, "frozen index " + std::to_string(j));
    }
  }
  const BoxMap box(config.bounds, frozen, config.n_states);
  const auto objective = [&](const Vector& z) {
    try {
      return -log_likelihood(box.unpack(z), patients, config.heart);
    } catch (const Error& e) {
      if (e.code() == ErrorCode::NonPositiveLikelihood || e.code() == ErrorCode::NonFiniteRate) return kInf;
      throw;
    }
  };

  std::vector<Vector> starts;
  for (HeartParams warm : config.initial) {
    warm.n = config.n_states;
    starts.push_back(box.pack(warm));
  }
  if (config.central_start) starts.push_back(box.pack(central_guess(config.n_states)));
  // Quasi-random starts skip points where the likelihood vanishes, since the
  // simplex cannot move off a flat infinite plateau.
  const int quasi = config.starts - (config.central_start ? 1 : 0);
  const std::uint64_t max_scan = 100 * static_cast<std::uint64_t>(std::max(quasi, 1));
  std::uint64_t index = 1;
  for (int r = 0; r < quasi; ++r) {
    Vector z = box.pack(box.from_unit(shifted_halton(index++, box.dim(), config.seed)));
    while (!std::isfinite(objective(z)) && index <= max_scan) {
      z = box.pack(box.from_unit(shifted_halton(index++, box.dim(), config.seed)));
    }
    starts.push_back(std::move(z));
  }

  std::vector<NmOutcome> runs(starts.size());
  parallel_for(starts.size(), config.threads, [&](std::size_t s) {
    NmOutcome best = nelder_mead(objective, starts[s], config.initial_step, config.max_evals, config.xtol,
                                 config.ftol);
    for (int r = 0; r < config.max_restarts && best.evals < config.max_evals && std::isfinite(best.f); ++r) {
      NmOutcome again = nelder_mead(objective, best.z, config.initial_step, config.max_evals - best.evals,
                                    config.xtol, config.ftol);
      const bool improved = again.f < best.f - config.ftol;
      again.evals += best.evals;
      if (again.f <= best.f) {
        best = std::move(again);
      } else {
        best.evals = again.evals;
      }
      if (!improved) break;
    }
    runs[s] = std::move(best);
  });

  FitResult result;
  int best_index = -1;
  for (std::size_t s = 0; s < runs.size(); ++s) {
    result.evals += runs[s].evals;
    result.start_logliks.push_back(-runs[s].f);
    if (!std::isfinite(runs[s].f)) {
      ++result.failed_starts;
      continue;
    }
    if (best_index < 0 || runs[s].f < runs[best_index].f) best_index = static_cast<int>(s);
  }
  if (best_index < 0) {
    throw Error(ErrorCode::AllStartsFailed, kModule,
                "none of " + std::to_string(runs.size()) + " starts reached a finite likelihood");
  }
  result.theta = box.unpack(runs[best_index].z);
  result.loglik = log_likelihood(result.theta, patients, config.heart);
  result.converged = runs[best_index].converged;
  result.best_start = best_index;
  return result;
}

FitResult fit(const std::vector<PatientRecord>& patients, const FitConfig& config) {
  return fit_restricted(patients, config, {});
}

std::vector<std::size_t> resample_indices(std::size_t count, std::uint64_t seed) {
  Rng rng(seed);
  std::vector<std::size_t> idx(count);
  for (auto& i : idx) i = static_cast<std::size_t>(rng.below(count));
  return idx;
}

BootstrapResult bootstrap(const std::vector<PatientRecord>& patients, const FitConfig& config,
                          const BootstrapConfig& boot, const HeartParams& point) {
  if (boot.replicates < 2) throw Error(ErrorCode::InvalidConfig, kModule, "replicates must be >= 2");
  if (!boot.seed_table.empty() && static_cast<int>(boot.seed_table.size()) != boot.replicates) {
    throw Error(ErrorCode::InvalidConfig, kModule, "seed table must have one seed per replicate");
  }
  if (patients.empty()) throw Error(ErrorCode::InvalidConfig, kModule, "no patients");

  std::vector<std::optional<FitResult>> fits(boot.replicates);
  parallel_for(static_cast<std::size_t>(boot.replicates), boot.threads, [&](std::size_t r) {
    const std::uint64_t seed = boot.seed_table.empty() ? derive_seed(boot.seed, r) : boot.seed_table[r];
    std::vector<PatientRecord> sample;
    sample.reserve(patients.size());
    for (const std::size_t i : resample_indices(patients.size(), seed)) sample.push_back(patients[i]);
    FitConfig cfg = config;
    cfg.initial = {point};
    cfg.central_start = false;
    cfg.starts = 1;
    cfg.seed = seed;
    cfg.threads = 1;
    try {
      fits[r] = fit_restricted(sample, cfg, boot.frozen);
    } catch (const Error& e) {
      if (e.code() != ErrorCode::AllStartsFailed) throw;
    }
  });

  BootstrapResult result;
  for (int r = 0; r < boot.replicates; ++r) {
    if (fits[r]) {
      result.replicates.push_back(std::move(*fits[r]));
    } else {
      result.failed.push_back(r);
    }
  }
  if (10 * result.failed.size() > static_cast<std::size_t>(boot.replicates) || result.replicates.size() < 2) {
    throw Error(ErrorCode::BootstrapFailed, kModule,
                std::to_string(result.failed.size()) + " of " + std::to_string(boot.replicates) +
                    " replicates failed");
  }
  for (int j = 0; j < HeartParams::kCount; ++j) {
    std::vector<double> values;
    for (const auto& rep : result.replicates) values.push_back(rep.theta.to_vector()[j]);
    const double mean = std::accumulate(values.begin(), values.end(), 0.0) / values.size();
    double ss = 0.0;
    for (const double v : values) ss += (v - mean) * (v - mean);
    result.std[j] = std::sqrt(ss / static_cast<double>(values.size() - 1));
    result.ci95[j] = {quantile(values, 0.025), quantile(values, 0.975)};
    result.median[j] = quantile(values, 0.5);
  }
  return result;
}

nlohmann::json to_json(const HeartParams& theta) {
  nlohmann::json doc = nlohmann::json::object();
  const auto v = theta.to_vector();
  for (int j = 0; j < HeartParams::kCount; ++j) doc[HeartParams::name(j)] = v[j];
  return doc;
}

nlohmann::json to_json(const FitResult& result) {
  return {{"theta", to_json(result.theta)},
          {"n", result.theta.n},
          {"loglik", result.loglik},
          {"converged", result.converged},
          {"evals", result.evals},
          {"failed_starts", result.failed_starts}};
}

nlohmann::json to_json(const BootstrapResult& result, const FitResult& point) {
  nlohmann::json doc = to_json(point);
  nlohmann::json std_doc = nlohmann::json::object();
  nlohmann::json ci_doc = nlohmann::json::object();
  for (int j = 0; j < HeartParams::kCount; ++j) {
    std_doc[HeartParams::name(j)] = result.std[j];
    ci_doc[HeartParams::name(j)] = {result.ci95[j][0], result.ci95[j][1]};
  }
  doc["std"] = std_doc;
  doc["ci95"] = ci_doc;
  doc["replicates"] = result.replicates.size();
  doc["failed_replicates"] = result.failed.size();
  long converged = 0;
  for (const auto& rep : result.replicates) converged += rep.converged ? 1 : 0;
  doc["converged_replicates"] = converged;
  return doc;
}

}  // namespace phrec
