#pragma once

// Trimmed, eigenvalue-constrained EM for semi-supervised Gaussian mixture
// classification: robust subset initialization with concentration steps,
// impartial trimming of labelled and unlabelled units, patterned M-steps,
// Aitken-based convergence, and MAP prediction. EDDA and UPCLASS are the
// exact alpha = 0, unconstrained special cases.

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "redda/covariance_models.hpp"
#include "redda/numerics.hpp"

namespace redda {

// Rows are observations. Labels are 0-based class indices; every class in
// [0, n_groups) must appear at least once.
struct LabelledData {
  Matrix x;
  std::vector<std::size_t> labels;
  std::size_t n_groups = 0;

  std::size_t size() const { return x.rows(); }
  std::size_t dim() const { return x.cols(); }
  void validate() const;  // throws DataError on violations
};

struct UnlabelledData {
  Matrix y;  // may have zero rows (supervised-only mode)

  std::size_t size() const { return y.rows(); }
  std::size_t dim() const { return y.cols(); }
};

// 0-1 retention indicators. sum(zeta) == N - floor(N * alpha_l) and
// sum(phi) == M - floor(M * alpha_u) after every concentration step.
struct TrimMask {
  std::vector<std::uint8_t> zeta;
  std::vector<std::uint8_t> phi;
  double alpha_labelled = 0.0;
  double alpha_unlabelled = 0.0;

  std::size_t retained_labelled() const;
  std::size_t retained_unlabelled() const;
};

// floor(n * alpha) with protection against binary representation of alpha
// nudging an exact product below its integer value.
std::size_t trim_count(std::size_t n, double alpha);

struct GaussianMixtureParams {
  std::vector<double> tau;
  std::vector<std::vector<double>> mu;
  std::vector<CovarianceDecomposition> cov;
  PatternedModel model = PatternedModel::VVV;
  double c = 0.0;  // infinity when the restriction is not enforced

  std::size_t groups() const { return tau.size(); }
  std::size_t dim() const { return mu.empty() ? 0 : mu[0].size(); }
};

enum class FitMode { EDDA, UPCLASS, REDDA, RUPCLASS };

const std::string& mode_name(FitMode m);
FitMode parse_mode(const std::string& name);

bool mode_is_robust(FitMode m);        // REDDA, RUPCLASS
bool mode_is_semisupervised(FitMode m);  // UPCLASS, RUPCLASS

struct FitOptions {
  FitMode mode = FitMode::RUPCLASS;
  double alpha_labelled = 0.0;
  double alpha_unlabelled = 0.0;
  double c = 20.0;
  std::size_t nsamp = 50;
  std::size_t max_iter = 500;
  double epsilon = 1e-5;
  bool classify_trimmed = true;
  uint64_t seed = 1;
  std::size_t threads = 1;
  // Explicit per-restart, per-class initial subsets; overrides seeded draws.
  std::optional<std::vector<std::vector<std::vector<std::size_t>>>> init_subsets;
};

struct ModelFit {
  GaussianMixtureParams params;
  TrimMask mask;
  Matrix z;  // M x G posteriors; trimmed rows zeroed and flagged via mask
  std::vector<double> loglik_trajectory;
  double rbic = 0.0;
  // MAP class per unlabelled unit; trimmed units hold n_groups as an
  // unassigned sentinel when classify_trimmed was off.
  std::vector<std::size_t> labels_unlabelled;
  std::vector<std::uint8_t> outlier_labelled;   // 1 - zeta
  std::vector<std::uint8_t> outlier_unlabelled; // 1 - phi
  std::size_t iterations = 0;
  bool converged = false;

  FitMode mode = FitMode::RUPCLASS;
  // Diagnostics recorded along the EM trajectory (one entry per iteration).
  std::vector<std::uint8_t> mask_changed;
  std::vector<double> er_after_mstep;
  // Log marginal density of the lowest retained unlabelled unit; the
  // prediction-time outlier cutoff. NaN when no unlabelled trimming happened.
  double unlabelled_cutoff_logdensity = 0.0;
  std::size_t restart_used = 0;
};

struct Prediction {
  std::vector<std::size_t> labels;
  Matrix posterior;                  // rows sum to 1
  std::vector<double> log_marginal;  // log sum_g tau_g phi_g
};

// --- operations ---

double trimmed_loglik(const GaussianMixtureParams& params, const LabelledData& labelled,
                      const UnlabelledData& unlabelled, const TrimMask& mask);

GaussianMixtureParams robust_init(const LabelledData& labelled, PatternedModel model,
                                  double alpha_labelled, double c, std::size_t nsamp,
                                  uint64_t seed, std::size_t threads = 1);

TrimMask concentration_step(const GaussianMixtureParams& params, const LabelledData& labelled,
                            const UnlabelledData& unlabelled, double alpha_labelled,
                            double alpha_unlabelled);

Matrix e_step(const GaussianMixtureParams& params, const UnlabelledData& unlabelled,
              const TrimMask& mask);

GaussianMixtureParams m_step(const LabelledData& labelled, const UnlabelledData& unlabelled,
                             const TrimMask& mask, const Matrix& z, PatternedModel model,
                             double c);

bool aitken_converged(double l_prev, double l_curr, double l_next, double epsilon);

ModelFit fit(const LabelledData& labelled, const UnlabelledData& unlabelled,
             PatternedModel model, const FitOptions& options);

Prediction predict(const GaussianMixtureParams& params, const Matrix& newdata);

}  // namespace redda
