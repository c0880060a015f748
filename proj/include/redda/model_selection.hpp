#pragma once

// Robust information criterion and best-model search over the 14 patterned
// structures and a grid of constraint constants.

#include <cstddef>
#include <string>
#include <vector>

#include "redda/covariance_models.hpp"
#include "redda/trimmed_em.hpp"

namespace redda {

// v = Gp + G - 1 + gamma + (delta - 1)(1 - 1/c) + 1. An infinite c yields
// the classical parameter count and the criterion reduces to BIC.
double penalty(PatternedModel model, std::size_t n_groups, std::size_t p, double c);

double rbic_value(double trimmed_loglik, PatternedModel model, std::size_t n_groups,
                  std::size_t p, double c, std::size_t retained_count);

// 2 l_trim - v log(retained). Throws on a non-converged fit: an undefined
// likelihood cannot be ranked.
double rbic(const ModelFit& fit);

struct SelectionCandidate {
  PatternedModel model;
  double c = 0.0;
  bool fitted = false;
  bool converged = false;
  double rbic = 0.0;
  double loglik = 0.0;
  std::size_t iterations = 0;
  std::string failure;
};

struct SelectionReport {
  std::vector<SelectionCandidate> candidates;  // ranked, best first
  std::size_t winner = 0;                      // index into candidates
};

// Fits every (model, c) pair and ranks by RBIC descending; ties break by
// fewer free parameters, then model-name order. Candidates that fail or do
// not converge are excluded from the ranking but kept in the report.
SelectionReport select(const LabelledData& labelled, const UnlabelledData& unlabelled,
                       const std::vector<PatternedModel>& models,
                       const std::vector<double>& c_grid, const FitOptions& fit_config);

}  // namespace redda
