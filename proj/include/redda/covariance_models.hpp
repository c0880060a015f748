#pragma once

// The 14 patterned covariance structures: nomenclature, free-parameter
// counts, eigenvalue-ratio requirement, composition between Sigma_g and its
// (volume, orientation, shape) factors, and the per-family unconstrained
// M-step estimators driven by class scatter matrices.

#include <cstddef>
#include <string>
#include <vector>

#include "redda/numerics.hpp"

namespace redda {

enum class PatternedModel {
  EII, VII, EEI, VEI, EVI, VVI,
  EEE, VEE, EVE, EEV, VVE, VEV, EVV, VVV,
};

inline constexpr PatternedModel kAllModels[] = {
    PatternedModel::EII, PatternedModel::VII, PatternedModel::EEI, PatternedModel::VEI,
    PatternedModel::EVI, PatternedModel::VVI, PatternedModel::EEE, PatternedModel::VEE,
    PatternedModel::EVE, PatternedModel::EEV, PatternedModel::VVE, PatternedModel::VEV,
    PatternedModel::EVV, PatternedModel::VVV,
};

const std::string& model_name(PatternedModel m);
PatternedModel parse_model(const std::string& name);  // throws on unknown name

// Whether the eigenvalue-ratio constraint applies: every family except
// EII, EEI, EEE and EEV.
bool er_required(PatternedModel m);

struct ParameterCount {
  std::size_t gamma;  // orthogonal-rotation parameters
  std::size_t delta;  // eigenvalue parameters
};

ParameterCount parameter_count(PatternedModel m, std::size_t n_groups, std::size_t p);

// Sigma = lambda * D * diag(shape) * D', with |diag(shape)| = 1 and
// lambda = |Sigma|^(1/p).
struct CovarianceDecomposition {
  double lambda = 1.0;
  Matrix orientation;         // orthonormal columns (D)
  std::vector<double> shape;  // diagonal of A, unit product

  std::size_t dim() const { return shape.size(); }
  // Eigenvalues of Sigma: lambda * shape[l].
  std::vector<double> eigenvalues() const;
};

SymMatrix compose_sigma(const CovarianceDecomposition& d);
// Inverse of compose_sigma; eigenvalues sorted descending, deterministic signs.
CovarianceDecomposition decompose_sigma(const SymMatrix& sigma);

// Weighted class scatters W_g (labelled plus unlabelled contributions summed)
// and effective retained weight n_g per class.
struct ScatterMatrices {
  std::vector<SymMatrix> w;
  std::vector<double> n;

  std::size_t groups() const { return w.size(); }
  std::size_t dim() const { return w.empty() ? 0 : w[0].dim(); }
  double total_weight() const;
};

// Unconstrained patterned M-step: one decomposition per class, pattern
// equalities baked in (shared factors are shared objects value-wise).
// Families without closed forms iterate to relative objective change < 1e-8
// or 50 inner iterations; passing the previous estimates as `warm` seeds
// those alternations so consecutive EM iterations never lose ground.
// Throws DegenerateFitError when a scatter is singular under a family that
// needs its inverse.
std::vector<CovarianceDecomposition> mstep_unconstrained(
    PatternedModel model, const ScatterMatrices& s,
    const std::vector<CovarianceDecomposition>* warm = nullptr);

// The (lambda, A, D)-dependent part of the Q function this M-step maximizes,
// negated: sum_g [ n_g p log(lambda_g) + tr(Sigma_g^{-1} W_g) ]. Exposed for
// the optimality spot checks.
double mstep_objective(const std::vector<CovarianceDecomposition>& covs,
                       const ScatterMatrices& s);

}  // namespace redda
