#include "redda/eigen_constraints.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

#include "redda/errors.hpp"

namespace redda {

namespace {

constexpr int kOuterMaxIter = 500;
constexpr double kFixedPointTol = 1e-9;
constexpr double kGoldenTol = 1e-10;
constexpr int kCpcMaxIter = 200;
constexpr double kCpcTol = 1e-8;

double clip(double x, double lo, double hi) { return std::min(std::max(x, lo), hi); }

double geo_mean(const std::vector<double>& d) {
  double acc = 0.0;
  for (double x : d) {
    if (!(x > 0.0)) throw DegenerateFitError("eigen constraint: non-positive eigenvalue");
    acc += std::log(x);
  }
  return std::exp(acc / static_cast<double>(d.size()));
}

EigenvalueTable table_from(const std::vector<CovarianceDecomposition>& covs,
                           const std::vector<double>& weights) {
  EigenvalueTable t;
  t.weights = weights;
  t.values.reserve(covs.size());
  for (const auto& c : covs) t.values.push_back(c.eigenvalues());
  return t;
}

double deviance_at(const EigenvalueTable& t, double c, double m) {
  const double hi = c * m;
  double acc = 0.0;
  for (std::size_t g = 0; g < t.groups(); ++g) {
    if (t.weights[g] <= 0.0) continue;
    double inner = 0.0;
    for (double d : t.values[g]) {
      const double td = clip(d, m, hi);
      inner += std::log(td) + d / td;
    }
    acc += t.weights[g] * inner;
  }
  return acc;
}

template <typename F>
double golden_min(F f, double a, double b, double tol) {
  const double invphi = (std::sqrt(5.0) - 1.0) / 2.0;
  while (b - a > tol) {
    const double x1 = b - invphi * (b - a);
    const double x2 = a + invphi * (b - a);
    if (f(x1) < f(x2))
      b = x2;
    else
      a = x1;
  }
  return 0.5 * (a + b);
}

double max_rel_change(const std::vector<std::vector<double>>& a,
                      const std::vector<std::vector<double>>& b) {
  double m = 0.0;
  for (std::size_t g = 0; g < a.size(); ++g)
    for (std::size_t l = 0; l < a[g].size(); ++l) {
      const double denom = std::max(std::abs(a[g][l]), 1e-300);
      m = std::max(m, std::abs(a[g][l] - b[g][l]) / denom);
    }
  return m;
}

double tr_d_ashape_inv_dt_w(const Matrix& d, const std::vector<double>& shape,
                            const SymMatrix& w) {
  const std::size_t p = shape.size();
  double acc = 0.0;
  for (std::size_t l = 0; l < p; ++l) {
    double quad = 0.0;
    for (std::size_t i = 0; i < p; ++i) {
      double wi = 0.0;
      for (std::size_t j = 0; j < p; ++j) wi += w(i, j) * d(j, l);
      quad += d(i, l) * wi;
    }
    acc += quad / shape[l];
  }
  return acc;
}

}  // namespace

double er_ratio(const EigenvalueTable& t) {
  double lo = std::numeric_limits<double>::infinity();
  double hi = 0.0;
  for (const auto& group : t.values)
    for (double d : group) {
      lo = std::min(lo, d);
      hi = std::max(hi, d);
    }
  return hi / lo;
}

double er_ratio(const std::vector<CovarianceDecomposition>& covs) {
  double lo = std::numeric_limits<double>::infinity();
  double hi = 0.0;
  for (const auto& c : covs)
    for (double d : c.eigenvalues()) {
      lo = std::min(lo, d);
      hi = std::max(hi, d);
    }
  return hi / lo;
}

double truncation_deviance(const EigenvalueTable& original, const EigenvalueTable& truncated) {
  double acc = 0.0;
  for (std::size_t g = 0; g < original.groups(); ++g) {
    if (original.weights[g] <= 0.0) continue;
    double inner = 0.0;
    for (std::size_t l = 0; l < original.values[g].size(); ++l) {
      const double td = truncated.values[g][l];
      inner += std::log(td) + original.values[g][l] / td;
    }
    acc += original.weights[g] * inner;
  }
  return acc;
}

EigenvalueTable optimal_truncation(const EigenvalueTable& t, double c) {
  if (c < 1.0) throw std::invalid_argument("optimal_truncation: c must be >= 1");
  if (t.groups() == 0) throw std::invalid_argument("optimal_truncation: empty table");
  double weight_sum = 0.0;
  for (double w : t.weights) weight_sum += w;
  if (!(weight_sum > 0.0)) throw std::invalid_argument("optimal_truncation: all weights zero");

  for (const auto& g : t.values)
    for (double d : g)
      if (!(d > 0.0)) throw std::invalid_argument("optimal_truncation: non-positive entry");

  if (er_ratio(t) <= c + kErSlack) return t;

  // Candidate interval endpoints {d} and {d/c} from weighted entries, plus
  // midpoints of consecutive candidates; the winner's bracket is then
  // polished by golden-section search.
  std::vector<double> cand;
  for (std::size_t g = 0; g < t.groups(); ++g) {
    if (t.weights[g] <= 0.0) continue;
    for (double d : t.values[g]) {
      cand.push_back(d);
      cand.push_back(d / c);
    }
  }
  std::sort(cand.begin(), cand.end());
  cand.erase(std::unique(cand.begin(), cand.end()), cand.end());
  std::vector<double> points;
  points.reserve(2 * cand.size());
  for (std::size_t i = 0; i < cand.size(); ++i) {
    points.push_back(cand[i]);
    if (i + 1 < cand.size()) points.push_back(0.5 * (cand[i] + cand[i + 1]));
  }

  auto obj = [&](double m) { return deviance_at(t, c, m); };

  std::size_t best = 0;
  double best_val = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < points.size(); ++i) {
    const double v = obj(points[i]);
    if (v < best_val) {
      best_val = v;
      best = i;
    }
  }
  const double lo = points[best > 0 ? best - 1 : 0];
  const double hi = points[std::min(best + 1, points.size() - 1)];
  double m = best == 0 && lo == hi ? points[best]
                                   : golden_min(obj, lo, hi, kGoldenTol * std::max(1.0, hi));
  if (obj(points[best]) < obj(m)) m = points[best];

  EigenvalueTable out = t;
  const double top = c * m;
  for (auto& g : out.values)
    for (double& d : g) d = clip(d, m, top);
  return out;
}

Matrix common_principal_components(const ScatterMatrices& scatter,
                                   const std::vector<std::vector<double>>& shapes,
                                   const std::vector<double>& volumes, const Matrix& d_init) {
  const std::size_t n_groups = scatter.groups();
  const std::size_t p = scatter.dim();
  if (shapes.size() != n_groups || volumes.size() != n_groups)
    throw std::invalid_argument("common_principal_components: group count mismatch");

  std::vector<SymMatrix> b(n_groups, SymMatrix(p));
  std::vector<double> omega(n_groups);
  for (std::size_t g = 0; g < n_groups; ++g) {
    b[g] = scatter.w[g];
    b[g] *= 1.0 / volumes[g];
    const auto dec = sym_eigen(b[g]);
    omega[g] = dec.values[0] * (1.0 + 1e-12) + 1e-300;
  }

  auto objective = [&](const Matrix& d) {
    double acc = 0.0;
    for (std::size_t g = 0; g < n_groups; ++g) acc += tr_d_ashape_inv_dt_w(d, shapes[g], b[g]);
    return acc;
  };

  Matrix d = d_init;
  double f_prev = objective(d);
  for (int iter = 0; iter < kCpcMaxIter; ++iter) {
    // Majorization surrogate: maximize tr(D' T) over orthogonal D.
    Matrix trial(p, p);
    for (std::size_t g = 0; g < n_groups; ++g) {
      for (std::size_t l = 0; l < p; ++l) {
        const double inv_a = 1.0 / shapes[g][l];
        for (std::size_t i = 0; i < p; ++i) {
          double acc = omega[g] * d(i, l);
          for (std::size_t j = 0; j < p; ++j) acc -= b[g](i, j) * d(j, l);
          trial(i, l) += acc * inv_a;
        }
      }
    }
    SvdResult sv = svd(trial);
    Matrix d_new = sv.u * sv.v.transposed();
    const double f_new = objective(d_new);
    if (f_new > f_prev + 1e-12 * std::max(1.0, std::abs(f_prev))) break;
    const bool converged = std::abs(f_new - f_prev) <= kCpcTol * std::max(1.0, std::abs(f_prev));
    d = d_new;
    f_prev = f_new;
    if (converged) break;
  }
  return d;
}

namespace {

// VII, VVI, VVV and the first stage of VVE: one truncation, per-class
// renormalization, orientation untouched.
std::vector<CovarianceDecomposition> truncate_per_class(
    const std::vector<CovarianceDecomposition>& unc, const ScatterMatrices& scatter, double c) {
  EigenvalueTable t = table_from(unc, scatter.n);
  EigenvalueTable tt = optimal_truncation(t, c);
  std::vector<CovarianceDecomposition> out = unc;
  for (std::size_t g = 0; g < unc.size(); ++g) {
    const double lambda = geo_mean(tt.values[g]);
    out[g].lambda = lambda;
    for (std::size_t l = 0; l < tt.values[g].size(); ++l)
      out[g].shape[l] = tt.values[g][l] / lambda;
  }
  return out;
}

// EVI/EVV/EVE: alternate truncation with renormalization to a common
// determinant until the restriction holds.
std::vector<CovarianceDecomposition> constrain_equal_volume(
    const std::vector<CovarianceDecomposition>& unc, const ScatterMatrices& scatter, double c) {
  const std::size_t n_groups = unc.size();
  const std::size_t p = unc[0].dim();
  EigenvalueTable t = table_from(unc, scatter.n);
  const double n_total = scatter.total_weight();

  double lambda_star = unc[0].lambda;
  std::vector<std::vector<double>> shapes(n_groups);
  for (int iter = 0; iter < kOuterMaxIter; ++iter) {
    const auto prev = t.values;
    EigenvalueTable tt = optimal_truncation(t, c);
    double lam = 0.0;
    for (std::size_t g = 0; g < n_groups; ++g) {
      const double gm = geo_mean(tt.values[g]);
      shapes[g].resize(p);
      for (std::size_t l = 0; l < p; ++l) shapes[g][l] = tt.values[g][l] / gm;
      lam += scatter.n[g] * gm;
    }
    lambda_star = lam / n_total;
    for (std::size_t g = 0; g < n_groups; ++g)
      for (std::size_t l = 0; l < p; ++l) t.values[g][l] = lambda_star * shapes[g][l];

    if (er_ratio(t) <= c + kErSlack) break;
    if (max_rel_change(prev, t.values) < kFixedPointTol)
      throw ConstraintConvergenceError(
          "equal-volume constraint loop reached a fixed point with the restriction unmet "
          "(ratio " + std::to_string(er_ratio(t)) + " vs c " + std::to_string(c) +
          " after " + std::to_string(iter + 1) + " iterations)");
    if (iter + 1 == kOuterMaxIter)
      throw ConstraintConvergenceError(
          "equal-volume constraint loop did not satisfy the restriction in 500 iterations "
          "(final ratio " + std::to_string(er_ratio(t)) + " vs c " + std::to_string(c) + ")");
  }

  std::vector<CovarianceDecomposition> out = unc;
  for (std::size_t g = 0; g < n_groups; ++g) {
    out[g].lambda = lambda_star;
    out[g].shape = shapes[g];
  }
  return out;
}

// Terminal projection used when a shared-shape loop stalls at the boundary:
// the pooled shape is kept (its internal ratio never exceeds c, being a sum
// of truncated tables) and the volumes are optimally clipped into a band
// narrow enough that shape and volume spreads jointly respect c. Always
// feasible, so these families never fail to satisfy the restriction.
void clip_volumes_for_shape(const std::vector<std::vector<double>>& original_evals,
                            const std::vector<double>& weights,
                            const std::vector<double>& shared_shape, double c,
                            std::vector<double>& lambda) {
  const std::size_t n_groups = original_evals.size();
  const std::size_t p = shared_shape.size();
  double a_min = shared_shape[0], a_max = shared_shape[0];
  for (double a : shared_shape) {
    a_min = std::min(a_min, a);
    a_max = std::max(a_max, a);
  }
  const double c_lambda = std::max(1.0, c / (a_max / a_min));

  // Deviance in lambda_g alone is n_g p [log lambda + e_g / lambda] with
  // e_g = tr(Delta_g^U A*^{-1}) / p, the truncation objective once more.
  EigenvalueTable vol;
  vol.weights = weights;
  vol.values.resize(n_groups);
  for (std::size_t g = 0; g < n_groups; ++g) {
    double e = 0.0;
    for (std::size_t l = 0; l < p; ++l) e += original_evals[g][l] / shared_shape[l];
    vol.values[g] = {e / static_cast<double>(p)};
  }
  const EigenvalueTable clipped = optimal_truncation(vol, c_lambda);
  lambda.resize(n_groups);
  for (std::size_t g = 0; g < n_groups; ++g) lambda[g] = clipped.values[g][0];
}

// VEI/VEV: fixed-point loop of truncation, pooled shape, per-class volume.
std::vector<CovarianceDecomposition> constrain_shared_shape(
    const std::vector<CovarianceDecomposition>& unc, const ScatterMatrices& scatter, double c) {
  const std::size_t n_groups = unc.size();
  const std::size_t p = unc[0].dim();
  EigenvalueTable t = table_from(unc, scatter.n);
  const auto original = t.values;

  std::vector<double> lambda(n_groups);
  for (std::size_t g = 0; g < n_groups; ++g) lambda[g] = unc[g].lambda;
  std::vector<double> shared_shape(p, 1.0);

  for (int iter = 0; iter < kOuterMaxIter; ++iter) {
    const auto prev = t.values;
    EigenvalueTable tt = optimal_truncation(t, c);
    std::vector<double> pooled(p, 0.0);
    for (std::size_t g = 0; g < n_groups; ++g)
      for (std::size_t l = 0; l < p; ++l) pooled[l] += tt.values[g][l] / lambda[g];
    const double norm = geo_mean(pooled);
    for (std::size_t l = 0; l < p; ++l) shared_shape[l] = pooled[l] / norm;
    for (std::size_t g = 0; g < n_groups; ++g) {
      double tr = 0.0;
      for (std::size_t l = 0; l < p; ++l) tr += tt.values[g][l] / shared_shape[l];
      lambda[g] = tr / static_cast<double>(p);
      for (std::size_t l = 0; l < p; ++l) t.values[g][l] = lambda[g] * shared_shape[l];
    }

    if (er_ratio(t) <= c + kErSlack) break;
    if (max_rel_change(prev, t.values) < kFixedPointTol || iter + 1 == kOuterMaxIter) {
      clip_volumes_for_shape(original, scatter.n, shared_shape, c, lambda);
      break;
    }
  }

  std::vector<CovarianceDecomposition> out = unc;
  for (std::size_t g = 0; g < n_groups; ++g) {
    out[g].lambda = lambda[g];
    out[g].shape = shared_shape;
  }
  return out;
}

// VEE: the shared-shape loop on composed matrices K_g, with a spectral
// decomposition of the pooled matrix at the end.
std::vector<CovarianceDecomposition> constrain_vee(
    const std::vector<CovarianceDecomposition>& unc, const ScatterMatrices& scatter, double c) {
  const std::size_t n_groups = unc.size();
  const std::size_t p = unc[0].dim();

  // K_g tracked in spectral form: orientation q_g, eigenvalues kv_g.
  std::vector<Matrix> q(n_groups);
  EigenvalueTable t;
  t.weights = scatter.n;
  t.values.resize(n_groups);
  std::vector<double> lambda(n_groups);
  for (std::size_t g = 0; g < n_groups; ++g) {
    q[g] = unc[g].orientation;
    t.values[g] = unc[g].eigenvalues();
    lambda[g] = unc[g].lambda;
  }

  Matrix pooled_vecs = Matrix::identity(p);
  std::vector<double> pooled_shape(p, 1.0);
  for (int iter = 0; iter < kOuterMaxIter; ++iter) {
    const auto prev = t.values;
    EigenvalueTable tt = optimal_truncation(t, c);

    SymMatrix pooled(p);
    for (std::size_t g = 0; g < n_groups; ++g) {
      for (std::size_t i = 0; i < p; ++i)
        for (std::size_t j = i; j < p; ++j) {
          double acc = 0.0;
          for (std::size_t l = 0; l < p; ++l)
            acc += q[g](i, l) * q[g](j, l) * tt.values[g][l];
          pooled.set(i, j, pooled(i, j) + acc / lambda[g]);
        }
    }
    EigenDecomposition dec = sym_eigen(pooled);
    const double norm = geo_mean(dec.values);
    for (std::size_t l = 0; l < p; ++l) dec.values[l] /= norm;
    pooled_vecs = dec.vectors;
    pooled_shape = dec.values;

    for (std::size_t g = 0; g < n_groups; ++g) {
      // tr(K_g* C*^{-1}) / p with both factors in spectral form.
      double tr = 0.0;
      for (std::size_t l = 0; l < p; ++l) {
        for (std::size_t ll = 0; ll < p; ++ll) {
          double dot = 0.0;
          for (std::size_t i = 0; i < p; ++i) dot += q[g](i, l) * pooled_vecs(i, ll);
          tr += tt.values[g][l] * dot * dot / pooled_shape[ll];
        }
      }
      lambda[g] = tr / static_cast<double>(p);
      q[g] = pooled_vecs;
      for (std::size_t l = 0; l < p; ++l) t.values[g][l] = lambda[g] * pooled_shape[l];
    }

    if (er_ratio(t) <= c + kErSlack) break;
    if (max_rel_change(prev, t.values) < kFixedPointTol || iter + 1 == kOuterMaxIter) {
      // Same terminal projection as the diagonal shared-shape families,
      // with K_g^U expressed in the pooled eigenbasis.
      std::vector<std::vector<double>> original(n_groups, std::vector<double>(p, 0.0));
      for (std::size_t g = 0; g < n_groups; ++g) {
        for (std::size_t ll = 0; ll < p; ++ll) {
          double acc = 0.0;
          for (std::size_t l = 0; l < p; ++l) {
            double dot = 0.0;
            for (std::size_t i = 0; i < p; ++i)
              dot += unc[g].orientation(i, l) * pooled_vecs(i, ll);
            acc += unc[g].lambda * unc[g].shape[l] * dot * dot;
          }
          original[g][ll] = acc;  // (D* ' Sigma_g^U D*)_{ll}
        }
      }
      clip_volumes_for_shape(original, scatter.n, pooled_shape, c, lambda);
      break;
    }
  }

  std::vector<CovarianceDecomposition> out = unc;
  for (std::size_t g = 0; g < n_groups; ++g) {
    out[g].lambda = lambda[g];
    out[g].orientation = pooled_vecs;
    out[g].shape = pooled_shape;
  }
  return out;
}

}  // namespace

std::vector<CovarianceDecomposition> constrain_mstep(
    PatternedModel model, const std::vector<CovarianceDecomposition>& unconstrained,
    const ScatterMatrices& scatter, double c) {
  if (unconstrained.empty()) throw std::invalid_argument("constrain_mstep: no classes");
  if (er_ratio(unconstrained) <= c + kErSlack) return unconstrained;
  if (!er_required(model))
    throw std::invalid_argument("constrain_mstep: " + model_name(model) +
                                " does not admit the eigenvalue-ratio restriction");

  switch (model) {
    case PatternedModel::VII:
    case PatternedModel::VVI:
    case PatternedModel::VVV:
      return truncate_per_class(unconstrained, scatter, c);
    case PatternedModel::VVE: {
      auto out = truncate_per_class(unconstrained, scatter, c);
      std::vector<std::vector<double>> shapes(out.size());
      std::vector<double> volumes(out.size());
      for (std::size_t g = 0; g < out.size(); ++g) {
        shapes[g] = out[g].shape;
        volumes[g] = out[g].lambda;
      }
      const Matrix d = common_principal_components(scatter, shapes, volumes,
                                                   unconstrained[0].orientation);
      for (auto& o : out) o.orientation = d;
      return out;
    }
    case PatternedModel::EVI:
    case PatternedModel::EVV:
      return constrain_equal_volume(unconstrained, scatter, c);
    case PatternedModel::EVE: {
      auto out = constrain_equal_volume(unconstrained, scatter, c);
      std::vector<std::vector<double>> shapes(out.size());
      std::vector<double> volumes(out.size());
      for (std::size_t g = 0; g < out.size(); ++g) {
        shapes[g] = out[g].shape;
        volumes[g] = out[g].lambda;
      }
      const Matrix d = common_principal_components(scatter, shapes, volumes,
                                                   unconstrained[0].orientation);
      for (auto& o : out) o.orientation = d;
      return out;
    }
    case PatternedModel::VEI:
    case PatternedModel::VEV:
      return constrain_shared_shape(unconstrained, scatter, c);
    case PatternedModel::VEE:
      return constrain_vee(unconstrained, scatter, c);
    default:
      throw std::logic_error("constrain_mstep: unreachable");
  }
}

}  // namespace redda
