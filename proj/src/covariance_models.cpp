#include "redda/covariance_models.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <stdexcept>

#include "redda/eigen_constraints.hpp"
#include "redda/errors.hpp"

namespace redda {

namespace {

constexpr double kInnerTol = 1e-8;
constexpr int kInnerMaxIter = 50;

const std::array<std::string, 14> kNames = {
    "EII", "VII", "EEI", "VEI", "EVI", "VVI", "EEE",
    "VEE", "EVE", "EEV", "VVE", "VEV", "EVV", "VVV",
};

std::vector<double> diag_of(const SymMatrix& m) {
  std::vector<double> d(m.dim());
  for (std::size_t i = 0; i < m.dim(); ++i) d[i] = m(i, i);
  return d;
}

// (prod d)^(1/p) through logs; throws on non-positive entries.
double geo_mean(const std::vector<double>& d, const char* what) {
  double acc = 0.0;
  for (double x : d) {
    if (!(x > 0.0)) throw DegenerateFitError(std::string("singular scatter in ") + what);
    acc += std::log(x);
  }
  return std::exp(acc / static_cast<double>(d.size()));
}

CovarianceDecomposition from_eigenvalues(const std::vector<double>& evals, const Matrix& d,
                                         const char* what) {
  CovarianceDecomposition out;
  out.lambda = geo_mean(evals, what);
  out.orientation = d;
  out.shape.resize(evals.size());
  for (std::size_t l = 0; l < evals.size(); ++l) out.shape[l] = evals[l] / out.lambda;
  return out;
}

CovarianceDecomposition spherical(std::size_t p, double lambda) {
  CovarianceDecomposition out;
  out.lambda = lambda;
  out.orientation = Matrix::identity(p);
  out.shape.assign(p, 1.0);
  return out;
}

CovarianceDecomposition diagonal_from(const std::vector<double>& evals, const char* what) {
  return from_eigenvalues(evals, Matrix::identity(evals.size()), what);
}

// tr(D diag(1/a) D' W)
double tr_inv_shape(const Matrix& d, const std::vector<double>& shape, const SymMatrix& w) {
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

void check_weights(const ScatterMatrices& s) {
  if (s.w.size() != s.n.size() || s.w.empty())
    throw std::invalid_argument("mstep: malformed scatter input");
  for (double ng : s.n)
    if (!(ng > 0.0)) throw DegenerateFitError("mstep: class with non-positive weight");
}

// Shared iterative core for VEI (diagonal) and VEV (per-group orientations):
// alternate a pooled shape against per-group volumes, on per-group eigenvalue
// vectors omega_g of the scatters.
void pooled_shape_volume_loop(const std::vector<std::vector<double>>& omega,
                              const std::vector<double>& n, std::vector<double>& shape,
                              std::vector<double>& lambda,
                              const std::vector<double>* warm_lambda) {
  const std::size_t n_groups = omega.size();
  const std::size_t p = omega[0].size();
  lambda.resize(n_groups);
  if (warm_lambda && warm_lambda->size() == n_groups) {
    lambda = *warm_lambda;
  } else {
    for (std::size_t g = 0; g < n_groups; ++g) {
      std::vector<double> scaled(p);
      for (std::size_t l = 0; l < p; ++l) scaled[l] = omega[g][l] / n[g];
      lambda[g] = geo_mean(scaled, "pooled-shape family");
    }
  }
  shape.assign(p, 1.0);

  double prev_obj = 0.0;
  for (int iter = 0; iter < kInnerMaxIter; ++iter) {
    std::vector<double> pooled(p, 0.0);
    for (std::size_t g = 0; g < n_groups; ++g)
      for (std::size_t l = 0; l < p; ++l) pooled[l] += omega[g][l] / lambda[g];
    const double norm = geo_mean(pooled, "pooled-shape family");
    for (std::size_t l = 0; l < p; ++l) shape[l] = pooled[l] / norm;

    double obj = 0.0;
    for (std::size_t g = 0; g < n_groups; ++g) {
      double tr = 0.0;
      for (std::size_t l = 0; l < p; ++l) tr += omega[g][l] / shape[l];
      lambda[g] = tr / (static_cast<double>(p) * n[g]);
      if (!(lambda[g] > 0.0)) throw DegenerateFitError("pooled-shape family: zero volume");
      obj += n[g] * static_cast<double>(p) * std::log(lambda[g]) + tr / lambda[g];
    }
    if (iter > 0 && std::abs(obj - prev_obj) <= kInnerTol * std::max(1.0, std::abs(prev_obj)))
      break;
    prev_obj = obj;
  }
}

}  // namespace

const std::string& model_name(PatternedModel m) { return kNames[static_cast<std::size_t>(m)]; }

PatternedModel parse_model(const std::string& name) {
  for (std::size_t i = 0; i < kNames.size(); ++i)
    if (kNames[i] == name) return static_cast<PatternedModel>(i);
  throw std::invalid_argument("unknown patterned model: " + name);
}

bool er_required(PatternedModel m) {
  switch (m) {
    case PatternedModel::EII:
    case PatternedModel::EEI:
    case PatternedModel::EEE:
    case PatternedModel::EEV:
      return false;
    default:
      return true;
  }
}

ParameterCount parameter_count(PatternedModel m, std::size_t n_groups, std::size_t p) {
  const std::size_t rot_one = p * (p - 1) / 2;
  const std::size_t rot_all = n_groups * rot_one;
  switch (m) {
    case PatternedModel::EII: return {0, 1};
    case PatternedModel::VII: return {0, n_groups};
    case PatternedModel::EEI: return {0, p};
    case PatternedModel::VEI: return {0, n_groups + p - 1};
    case PatternedModel::EVI: return {0, n_groups * p - (n_groups - 1)};
    case PatternedModel::VVI: return {0, n_groups * p};
    case PatternedModel::EEE: return {rot_one, p};
    case PatternedModel::VEE: return {rot_one, n_groups + p - 1};
    case PatternedModel::EVE: return {rot_one, n_groups * p - (n_groups - 1)};
    case PatternedModel::EEV: return {rot_all, p};
    case PatternedModel::VVE: return {rot_one, n_groups * p};
    case PatternedModel::VEV: return {rot_all, n_groups + p - 1};
    case PatternedModel::EVV: return {rot_all, n_groups * p - (n_groups - 1)};
    case PatternedModel::VVV: return {rot_all, n_groups * p};
  }
  throw std::logic_error("parameter_count: unreachable");
}

std::vector<double> CovarianceDecomposition::eigenvalues() const {
  std::vector<double> out(shape.size());
  for (std::size_t l = 0; l < shape.size(); ++l) out[l] = lambda * shape[l];
  return out;
}

SymMatrix compose_sigma(const CovarianceDecomposition& d) {
  const std::size_t p = d.dim();
  Matrix m(p, p);
  for (std::size_t i = 0; i < p; ++i)
    for (std::size_t j = i; j < p; ++j) {
      double acc = 0.0;
      for (std::size_t l = 0; l < p; ++l)
        acc += d.orientation(i, l) * d.orientation(j, l) * d.lambda * d.shape[l];
      m(i, j) = acc;
      m(j, i) = acc;
    }
  return SymMatrix(m);
}

CovarianceDecomposition decompose_sigma(const SymMatrix& sigma) {
  EigenDecomposition dec = sym_eigen(sigma);
  return from_eigenvalues(dec.values, dec.vectors, "decompose_sigma");
}

double ScatterMatrices::total_weight() const {
  double t = 0.0;
  for (double x : n) t += x;
  return t;
}

double mstep_objective(const std::vector<CovarianceDecomposition>& covs,
                       const ScatterMatrices& s) {
  double obj = 0.0;
  const double p = static_cast<double>(s.dim());
  for (std::size_t g = 0; g < covs.size(); ++g) {
    obj += s.n[g] * p * std::log(covs[g].lambda) +
           tr_inv_shape(covs[g].orientation, covs[g].shape, s.w[g]) / covs[g].lambda;
  }
  return obj;
}

std::vector<CovarianceDecomposition> mstep_unconstrained(
    PatternedModel model, const ScatterMatrices& s,
    const std::vector<CovarianceDecomposition>* warm) {
  check_weights(s);
  if (warm && warm->size() != s.groups()) warm = nullptr;
  const std::size_t n_groups = s.groups();
  const std::size_t p = s.dim();
  const double pd = static_cast<double>(p);
  const double n_total = s.total_weight();
  std::vector<CovarianceDecomposition> out(n_groups);

  switch (model) {
    case PatternedModel::EII: {
      double tr = 0.0;
      for (const auto& w : s.w) tr += w.trace();
      const double lambda = tr / (n_total * pd);
      if (!(lambda > 0.0)) throw DegenerateFitError("EII: zero pooled trace");
      for (auto& o : out) o = spherical(p, lambda);
      return out;
    }
    case PatternedModel::VII: {
      for (std::size_t g = 0; g < n_groups; ++g) {
        const double lambda = s.w[g].trace() / (s.n[g] * pd);
        if (!(lambda > 0.0)) throw DegenerateFitError("VII: zero class trace");
        out[g] = spherical(p, lambda);
      }
      return out;
    }
    case PatternedModel::EEI: {
      std::vector<double> d(p, 0.0);
      for (const auto& w : s.w)
        for (std::size_t l = 0; l < p; ++l) d[l] += w(l, l);
      for (double& x : d) x /= n_total;
      const auto dec = diagonal_from(d, "EEI");
      for (auto& o : out) o = dec;
      return out;
    }
    case PatternedModel::VEI: {
      std::vector<std::vector<double>> omega(n_groups);
      for (std::size_t g = 0; g < n_groups; ++g) omega[g] = diag_of(s.w[g]);
      std::vector<double> warm_lambda;
      if (warm)
        for (const auto& cov : *warm) warm_lambda.push_back(cov.lambda);
      std::vector<double> shape, lambda;
      pooled_shape_volume_loop(omega, s.n, shape, lambda, warm ? &warm_lambda : nullptr);
      for (std::size_t g = 0; g < n_groups; ++g) {
        out[g].lambda = lambda[g];
        out[g].orientation = Matrix::identity(p);
        out[g].shape = shape;
      }
      return out;
    }
    case PatternedModel::EVI: {
      double lambda = 0.0;
      std::vector<std::vector<double>> shapes(n_groups);
      for (std::size_t g = 0; g < n_groups; ++g) {
        std::vector<double> d = diag_of(s.w[g]);
        const double gm = geo_mean(d, "EVI");
        shapes[g].resize(p);
        for (std::size_t l = 0; l < p; ++l) shapes[g][l] = d[l] / gm;
        lambda += gm;
      }
      lambda /= n_total;
      for (std::size_t g = 0; g < n_groups; ++g) {
        out[g].lambda = lambda;
        out[g].orientation = Matrix::identity(p);
        out[g].shape = shapes[g];
      }
      return out;
    }
    case PatternedModel::VVI: {
      for (std::size_t g = 0; g < n_groups; ++g) {
        std::vector<double> d = diag_of(s.w[g]);
        for (double& x : d) x /= s.n[g];
        out[g] = diagonal_from(d, "VVI");
      }
      return out;
    }
    case PatternedModel::EEE: {
      SymMatrix pooled = s.w[0];
      for (std::size_t g = 1; g < n_groups; ++g) pooled += s.w[g];
      pooled *= 1.0 / n_total;
      const auto dec = decompose_sigma(pooled);
      for (auto& o : out) o = dec;
      return out;
    }
    case PatternedModel::VEE: {
      std::vector<double> lambda(n_groups);
      for (std::size_t g = 0; g < n_groups; ++g)
        lambda[g] = warm ? (*warm)[g].lambda : s.w[g].trace() / (s.n[g] * pd);
      SymMatrix c = SymMatrix::identity(p);
      Matrix c_vecs = Matrix::identity(p);
      double prev_obj = 0.0;
      for (int iter = 0; iter < kInnerMaxIter; ++iter) {
        SymMatrix acc(p);
        for (std::size_t g = 0; g < n_groups; ++g) {
          for (std::size_t i = 0; i < p; ++i)
            for (std::size_t j = 0; j < p; ++j) acc(i, j) += s.w[g](i, j) / lambda[g];
        }
        EigenDecomposition dec = sym_eigen(acc);
        const double norm = geo_mean(dec.values, "VEE");
        for (std::size_t l = 0; l < p; ++l) dec.values[l] /= norm;
        c_vecs = dec.vectors;
        std::vector<double> c_shape(p);
        for (std::size_t l = 0; l < p; ++l) c_shape[l] = dec.values[l];
        double obj = 0.0;
        for (std::size_t g = 0; g < n_groups; ++g) {
          const double tr = tr_inv_shape(c_vecs, c_shape, s.w[g]);
          lambda[g] = tr / (pd * s.n[g]);
          if (!(lambda[g] > 0.0)) throw DegenerateFitError("VEE: zero volume");
          obj += s.n[g] * pd * std::log(lambda[g]) + tr / lambda[g];
        }
        c = SymMatrix(p);
        for (std::size_t i = 0; i < p; ++i)
          for (std::size_t j = i; j < p; ++j) {
            double v = 0.0;
            for (std::size_t l = 0; l < p; ++l)
              v += c_vecs(i, l) * c_vecs(j, l) * c_shape[l];
            c.set(i, j, v);
          }
        if (iter > 0 && std::abs(obj - prev_obj) <= kInnerTol * std::max(1.0, std::abs(prev_obj)))
          break;
        prev_obj = obj;
      }
      const auto shared = decompose_sigma(c);
      for (std::size_t g = 0; g < n_groups; ++g) {
        out[g].lambda = lambda[g];
        out[g].orientation = shared.orientation;
        out[g].shape = shared.shape;
        // |C| = 1 by construction, so shared.lambda == 1 up to roundoff.
      }
      return out;
    }
    case PatternedModel::EVE:
    case PatternedModel::VVE: {
      // Shared orientation, per-group shapes; D refined by the MM scheme.
      Matrix d;
      if (warm) {
        d = (*warm)[0].orientation;
      } else {
        SymMatrix pooled = s.w[0];
        for (std::size_t g = 1; g < n_groups; ++g) pooled += s.w[g];
        d = sym_eigen(pooled).vectors;
      }
      std::vector<std::vector<double>> shapes(n_groups, std::vector<double>(p, 1.0));
      std::vector<double> lambda(n_groups, 1.0);
      const bool equal_volume = (model == PatternedModel::EVE);

      double prev_obj = 0.0;
      for (int iter = 0; iter < kInnerMaxIter; ++iter) {
        for (std::size_t g = 0; g < n_groups; ++g) {
          std::vector<double> proj(p);
          for (std::size_t l = 0; l < p; ++l) {
            double quad = 0.0;
            for (std::size_t i = 0; i < p; ++i) {
              double wi = 0.0;
              for (std::size_t j = 0; j < p; ++j) wi += s.w[g](i, j) * d(j, l);
              quad += d(i, l) * wi;
            }
            proj[l] = quad;
          }
          const double gm = geo_mean(proj, equal_volume ? "EVE" : "VVE");
          for (std::size_t l = 0; l < p; ++l) shapes[g][l] = proj[l] / gm;
          if (!equal_volume) lambda[g] = gm / s.n[g];
        }
        if (equal_volume) {
          double acc = 0.0;
          for (std::size_t g = 0; g < n_groups; ++g)
            acc += tr_inv_shape(d, shapes[g], s.w[g]);
          const double shared = acc / (n_total * pd);
          for (std::size_t g = 0; g < n_groups; ++g) lambda[g] = shared;
        }
        d = common_principal_components(s, shapes, lambda, d);

        double obj = 0.0;
        for (std::size_t g = 0; g < n_groups; ++g)
          obj += s.n[g] * pd * std::log(lambda[g]) +
                 tr_inv_shape(d, shapes[g], s.w[g]) / lambda[g];
        if (iter > 0 && std::abs(obj - prev_obj) <= kInnerTol * std::max(1.0, std::abs(prev_obj)))
          break;
        prev_obj = obj;
      }
      for (std::size_t g = 0; g < n_groups; ++g) {
        out[g].lambda = lambda[g];
        out[g].orientation = d;
        out[g].shape = shapes[g];
      }
      return out;
    }
    case PatternedModel::EEV: {
      std::vector<double> pooled(p, 0.0);
      std::vector<Matrix> vecs(n_groups);
      for (std::size_t g = 0; g < n_groups; ++g) {
        EigenDecomposition dec = sym_eigen(s.w[g]);
        vecs[g] = dec.vectors;
        for (std::size_t l = 0; l < p; ++l) pooled[l] += dec.values[l];
      }
      const double gm = geo_mean(pooled, "EEV");
      const double lambda = gm / n_total;
      for (std::size_t g = 0; g < n_groups; ++g) {
        out[g].lambda = lambda;
        out[g].orientation = vecs[g];
        out[g].shape.resize(p);
        for (std::size_t l = 0; l < p; ++l) out[g].shape[l] = pooled[l] / gm;
      }
      return out;
    }
    case PatternedModel::VEV: {
      std::vector<std::vector<double>> omega(n_groups);
      std::vector<Matrix> vecs(n_groups);
      for (std::size_t g = 0; g < n_groups; ++g) {
        EigenDecomposition dec = sym_eigen(s.w[g]);
        omega[g] = dec.values;
        vecs[g] = dec.vectors;
      }
      std::vector<double> warm_lambda;
      if (warm)
        for (const auto& cov : *warm) warm_lambda.push_back(cov.lambda);
      std::vector<double> shape, lambda;
      pooled_shape_volume_loop(omega, s.n, shape, lambda, warm ? &warm_lambda : nullptr);
      for (std::size_t g = 0; g < n_groups; ++g) {
        out[g].lambda = lambda[g];
        out[g].orientation = vecs[g];
        out[g].shape = shape;
      }
      return out;
    }
    case PatternedModel::EVV: {
      double lambda = 0.0;
      for (std::size_t g = 0; g < n_groups; ++g) {
        EigenDecomposition dec = sym_eigen(s.w[g]);
        const double gm = geo_mean(dec.values, "EVV");
        out[g].orientation = dec.vectors;
        out[g].shape.resize(p);
        for (std::size_t l = 0; l < p; ++l) out[g].shape[l] = dec.values[l] / gm;
        lambda += gm;
      }
      lambda /= n_total;
      for (auto& o : out) o.lambda = lambda;
      return out;
    }
    case PatternedModel::VVV: {
      for (std::size_t g = 0; g < n_groups; ++g) {
        SymMatrix scaled = s.w[g];
        scaled *= 1.0 / s.n[g];
        out[g] = decompose_sigma(scaled);
      }
      return out;
    }
  }
  throw std::logic_error("mstep_unconstrained: unreachable");
}

}  // namespace redda
