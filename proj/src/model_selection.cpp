#include "redda/model_selection.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "redda/errors.hpp"
#include "redda/threading.hpp"

namespace redda {

double penalty(PatternedModel model, std::size_t n_groups, std::size_t p, double c) {
  if (!(c >= 1.0) && std::isfinite(c)) throw std::invalid_argument("penalty: c must be >= 1");
  const ParameterCount pc = parameter_count(model, n_groups, p);
  const double shrink = std::isfinite(c) ? 1.0 - 1.0 / c : 1.0;
  return static_cast<double>(n_groups * p) + static_cast<double>(n_groups) - 1.0 +
         static_cast<double>(pc.gamma) + (static_cast<double>(pc.delta) - 1.0) * shrink + 1.0;
}

double rbic_value(double trimmed_loglik, PatternedModel model, std::size_t n_groups,
                  std::size_t p, double c, std::size_t retained_count) {
  return 2.0 * trimmed_loglik -
         penalty(model, n_groups, p, c) * std::log(static_cast<double>(retained_count));
}

double rbic(const ModelFit& fit) {
  if (!fit.converged)
    throw std::invalid_argument("rbic: fit did not converge; criterion undefined");
  return fit.rbic;
}

SelectionReport select(const LabelledData& labelled, const UnlabelledData& unlabelled,
                       const std::vector<PatternedModel>& models,
                       const std::vector<double>& c_grid, const FitOptions& fit_config) {
  if (models.empty() || c_grid.empty())
    throw std::invalid_argument("select: empty candidate grid");

  // ER-free models ignore c, so fit them once.
  struct Cell {
    PatternedModel model;
    double c;
  };
  std::vector<Cell> cells;
  for (PatternedModel m : models) {
    if (er_required(m) && mode_is_robust(fit_config.mode)) {
      for (double c : c_grid) cells.push_back({m, c});
    } else {
      cells.push_back({m, c_grid.front()});
    }
  }

  std::vector<SelectionCandidate> cands(cells.size());
  parallel_for(cells.size(), fit_config.threads, [&](std::size_t i) {
    SelectionCandidate& cand = cands[i];
    cand.model = cells[i].model;
    cand.c = cells[i].c;
    FitOptions opt = fit_config;
    opt.c = cells[i].c;
    opt.threads = 1;
    try {
      ModelFit f = fit(labelled, unlabelled, cells[i].model, opt);
      cand.fitted = true;
      cand.converged = f.converged;
      cand.rbic = f.rbic;
      cand.loglik = f.loglik_trajectory.empty() ? 0.0 : f.loglik_trajectory.back();
      cand.iterations = f.iterations;
      if (!f.converged) cand.failure = "not converged within max-iter";
    } catch (const std::exception& e) {
      cand.failure = e.what();
    }
  });

  auto params_of = [&](const SelectionCandidate& cand) {
    const ParameterCount pc = parameter_count(cand.model, labelled.n_groups, labelled.dim());
    return pc.gamma + pc.delta;
  };
  std::stable_sort(cands.begin(), cands.end(),
                   [&](const SelectionCandidate& a, const SelectionCandidate& b) {
                     const bool va = a.fitted && a.converged && std::isfinite(a.rbic);
                     const bool vb = b.fitted && b.converged && std::isfinite(b.rbic);
                     if (va != vb) return va;
                     if (!va) return false;
                     if (a.rbic != b.rbic) return a.rbic > b.rbic;
                     if (params_of(a) != params_of(b)) return params_of(a) < params_of(b);
                     return model_name(a.model) < model_name(b.model);
                   });

  SelectionReport report;
  report.candidates = std::move(cands);
  report.winner = 0;
  const auto& top = report.candidates.front();
  if (!(top.fitted && top.converged && std::isfinite(top.rbic))) {
    std::string detail;
    for (const auto& cand : report.candidates)
      detail += "\n  " + model_name(cand.model) + ": " + cand.failure;
    throw DegenerateFitError("no selection candidate produced a converged fit:" + detail);
  }
  return report;
}

}  // namespace redda
