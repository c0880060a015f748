#pragma once

// Eigenvalue-ratio restriction machinery: the optimal truncation operator,
// the MM solver for common principal components, and the per-family
// constrained M-step dispatch.

#include <cstddef>
#include <vector>

#include "redda/covariance_models.hpp"
#include "redda/numerics.hpp"

namespace redda {

// Slack applied when testing max/min <= c, absorbing clip roundoff.
inline constexpr double kErSlack = 1e-10;

// Per-class eigenvalue entries d_lg of Delta_g = lambda_g * A_g, with class
// weights n_g. Zero-weight classes are legal: they are excluded from the
// truncation deviance but their entries are still clipped.
struct EigenvalueTable {
  std::vector<std::vector<double>> values;
  std::vector<double> weights;

  std::size_t groups() const { return values.size(); }
};

// max over all (g,l) divided by min over all (g,l).
double er_ratio(const EigenvalueTable& t);
double er_ratio(const std::vector<CovarianceDecomposition>& covs);

// Weighted deviance sum_g n_g sum_l [log t_lg + d_lg / t_lg] of a truncated
// table against the original entries.
double truncation_deviance(const EigenvalueTable& original, const EigenvalueTable& truncated);

// Clips every entry into [m, c*m] with m chosen to minimize the deviance.
// Tables already satisfying the restriction are returned unchanged.
EigenvalueTable optimal_truncation(const EigenvalueTable& t, double c);

// Minimizes f(D) = sum_g (1/lambda_g) tr(D A_g^{-1} D' W_g) over orthonormal
// D by majorization-minimization, starting at d_init. Stops at relative
// objective change < 1e-8 or 200 iterations; never returns a D with a larger
// objective than d_init.
Matrix common_principal_components(const ScatterMatrices& scatter,
                                   const std::vector<std::vector<double>>& shapes,
                                   const std::vector<double>& volumes, const Matrix& d_init);

// Enforces the eigenvalue-ratio restriction on unconstrained M-step output,
// dispatching the family-specific algorithm. Returns the input unchanged
// when the restriction already holds. Throws ConstraintConvergenceError when
// an iterative family exceeds 500 outer iterations without satisfying it.
std::vector<CovarianceDecomposition> constrain_mstep(
    PatternedModel model, const std::vector<CovarianceDecomposition>& unconstrained,
    const ScatterMatrices& scatter, double c);

}  // namespace redda
