#include "redda/trimmed_em.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>

#include "redda/eigen_constraints.hpp"
#include "redda/errors.hpp"
#include "redda/model_selection.hpp"
#include "redda/rng.hpp"
#include "redda/threading.hpp"

namespace redda {

// Internal M-step with warm-started covariance alternations; the public
// operation delegates with no warm start.
GaussianMixtureParams m_step_impl(const LabelledData& labelled,
                                  const UnlabelledData& unlabelled, const TrimMask& mask,
                                  const Matrix& z, PatternedModel model, double c,
                                  const std::vector<CovarianceDecomposition>* warm);

namespace {

constexpr uint64_t kPurposeInitSubset = 0x5eedu;
constexpr int kCstepMaxIter = 100;
constexpr int kSubsetRedrawLimit = 100;
constexpr double kInf = std::numeric_limits<double>::infinity();

double log_sum_exp(const std::vector<double>& v) {
  double m = -kInf;
  for (double x : v) m = std::max(m, x);
  if (m == -kInf) return -kInf;
  double acc = 0.0;
  for (double x : v) acc += std::exp(x - m);
  return m + std::log(acc);
}

std::vector<MvnEvaluator> make_evaluators(const GaussianMixtureParams& params) {
  std::vector<MvnEvaluator> evals;
  evals.reserve(params.groups());
  for (std::size_t g = 0; g < params.groups(); ++g)
    evals.emplace_back(params.mu[g], params.cov[g].eigenvalues(), params.cov[g].orientation);
  return evals;
}

std::vector<double> log_tau(const GaussianMixtureParams& params) {
  std::vector<double> lt(params.groups());
  for (std::size_t g = 0; g < params.groups(); ++g)
    lt[g] = params.tau[g] > 0.0 ? std::log(params.tau[g]) : -kInf;
  return lt;
}

// Indices of the k smallest values, ties resolved by original index so the
// discarded set is deterministic.
std::vector<std::size_t> lowest_k(const std::vector<double>& values, std::size_t k) {
  std::vector<std::size_t> idx(values.size());
  std::iota(idx.begin(), idx.end(), 0);
  std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) {
    if (values[a] != values[b]) return values[a] < values[b];
    return a < b;
  });
  idx.resize(k);
  std::sort(idx.begin(), idx.end());
  return idx;
}

std::vector<std::vector<std::size_t>> class_member_indices(const LabelledData& labelled) {
  std::vector<std::vector<std::size_t>> members(labelled.n_groups);
  for (std::size_t n = 0; n < labelled.size(); ++n) members[labelled.labels[n]].push_back(n);
  return members;
}

struct WeightedMoments {
  std::vector<double> class_weight;            // labelled + posterior mass
  std::vector<std::vector<double>> mean;
  ScatterMatrices scatter;
};

// Weighted moments: means first, scatters around those means.
WeightedMoments weighted_moments(const LabelledData& labelled, const UnlabelledData& unlabelled,
                                 const TrimMask& mask, const Matrix& z) {
  const std::size_t n_groups = labelled.n_groups;
  const std::size_t p = labelled.dim();
  WeightedMoments m;
  m.class_weight.assign(n_groups, 0.0);
  m.mean.assign(n_groups, std::vector<double>(p, 0.0));

  for (std::size_t n = 0; n < labelled.size(); ++n) {
    if (!mask.zeta[n]) continue;
    const std::size_t g = labelled.labels[n];
    m.class_weight[g] += 1.0;
    for (std::size_t j = 0; j < p; ++j) m.mean[g][j] += labelled.x(n, j);
  }
  for (std::size_t u = 0; u < unlabelled.size(); ++u) {
    if (!mask.phi[u]) continue;
    for (std::size_t g = 0; g < n_groups; ++g) {
      const double w = z(u, g);
      if (w == 0.0) continue;
      m.class_weight[g] += w;
      for (std::size_t j = 0; j < p; ++j) m.mean[g][j] += w * unlabelled.y(u, j);
    }
  }
  for (std::size_t g = 0; g < n_groups; ++g) {
    if (m.class_weight[g] <= 0.0)
      throw DegenerateFitError("class " + std::to_string(g + 1) + " emptied during estimation");
    for (double& v : m.mean[g]) v /= m.class_weight[g];
  }

  m.scatter.n = m.class_weight;
  m.scatter.w.assign(n_groups, SymMatrix(p));
  std::vector<double> diff(p);
  for (std::size_t n = 0; n < labelled.size(); ++n) {
    if (!mask.zeta[n]) continue;
    const std::size_t g = labelled.labels[n];
    for (std::size_t j = 0; j < p; ++j) diff[j] = labelled.x(n, j) - m.mean[g][j];
    for (std::size_t i = 0; i < p; ++i)
      for (std::size_t j = i; j < p; ++j)
        m.scatter.w[g].set(i, j, m.scatter.w[g](i, j) + diff[i] * diff[j]);
  }
  for (std::size_t u = 0; u < unlabelled.size(); ++u) {
    if (!mask.phi[u]) continue;
    for (std::size_t g = 0; g < n_groups; ++g) {
      const double w = z(u, g);
      if (w == 0.0) continue;
      for (std::size_t j = 0; j < p; ++j) diff[j] = unlabelled.y(u, j) - m.mean[g][j];
      for (std::size_t i = 0; i < p; ++i)
        for (std::size_t j = i; j < p; ++j)
          m.scatter.w[g].set(i, j, m.scatter.w[g](i, j) + w * diff[i] * diff[j]);
    }
  }
  return m;
}

std::vector<CovarianceDecomposition> patterned_covariances(
    const ScatterMatrices& scatter, PatternedModel model, double c,
    const std::vector<CovarianceDecomposition>* warm = nullptr);

std::vector<CovarianceDecomposition> patterned_covariances(
    const ScatterMatrices& scatter, PatternedModel model, double c,
    const std::vector<CovarianceDecomposition>* warm) {
  auto covs = mstep_unconstrained(model, scatter, warm);
  if (std::isfinite(c) && er_required(model) && er_ratio(covs) > c + kErSlack) {
    // The per-family constrained updates are not guaranteed to beat a
    // feasible incumbent, so fall back to it whenever it scores better
    // (or when the equal-volume loop fails to converge at all).
    const bool warm_feasible = warm && er_ratio(*warm) <= c + kErSlack;
    try {
      covs = constrain_mstep(model, covs, scatter, c);
      if (warm_feasible && mstep_objective(*warm, scatter) < mstep_objective(covs, scatter))
        covs = *warm;
    } catch (const ConstraintConvergenceError&) {
      if (!warm_feasible) throw;
      covs = *warm;
    }
  }
  return covs;
}

struct InitCandidate {
  GaussianMixtureParams params;
  TrimMask mask;
  double objective = -kInf;  // labelled trimmed log-likelihood
  std::vector<double> trajectory;  // objective after each concentration pass
  bool ok = false;
  std::string failure;
};

// Steps 1-5 of the robust initialization for one restart.
InitCandidate run_init_restart(const LabelledData& labelled,
                               const std::vector<std::vector<std::size_t>>& members,
                               PatternedModel model, double alpha_labelled, Rng rng,
                               const std::vector<std::vector<std::size_t>>* fixed_subsets) {
  const std::size_t n_groups = labelled.n_groups;
  const std::size_t p = labelled.dim();
  const std::size_t n = labelled.size();
  const std::size_t n_trim = trim_count(n, alpha_labelled);
  const std::size_t n_keep = n - n_trim;

  InitCandidate cand;
  cand.mask.alpha_labelled = alpha_labelled;

  GaussianMixtureParams params;
  params.model = model;
  params.c = kInf;
  params.tau.assign(n_groups, 1.0 / static_cast<double>(n_groups));
  params.mu.assign(n_groups, std::vector<double>(p, 0.0));

  // Subset moments under the pattern; redraw on singular subsets, then fall
  // back to a ridge.
  ScatterMatrices subset_scatter;
  subset_scatter.n.assign(n_groups, 0.0);
  subset_scatter.w.assign(n_groups, SymMatrix(p));
  for (std::size_t g = 0; g < n_groups; ++g) {
    const auto& pool = members[g];
    bool done = false;
    const int redraws = fixed_subsets ? 0 : kSubsetRedrawLimit;
    for (int attempt = 0; attempt <= redraws && !done; ++attempt) {
      std::vector<std::size_t> subset;
      if (fixed_subsets) {
        subset = (*fixed_subsets)[g];
      } else {
        auto local = rng.sample_without_replacement(pool.size(), p + 1);
        subset.reserve(local.size());
        for (std::size_t i : local) subset.push_back(pool[i]);
      }
      std::vector<double> mean(p, 0.0);
      for (std::size_t idx : subset)
        for (std::size_t j = 0; j < p; ++j) mean[j] += labelled.x(idx, j);
      for (double& v : mean) v /= static_cast<double>(subset.size());
      SymMatrix w(p);
      std::vector<double> diff(p);
      for (std::size_t idx : subset) {
        for (std::size_t j = 0; j < p; ++j) diff[j] = labelled.x(idx, j) - mean[j];
        for (std::size_t i = 0; i < p; ++i)
          for (std::size_t j = i; j < p; ++j) w.set(i, j, w(i, j) + diff[i] * diff[j]);
      }
      // Probe the class scatter for usability under the requested pattern;
      // on the final attempt fall back to a small ridge before giving up.
      const bool last_chance = attempt == redraws;
      for (int ridged = 0; ridged < 2 && !done; ++ridged) {
        if (ridged) {
          if (!last_chance) break;
          const double ridge = 1e-6 * std::max(w.trace(), 1.0) / static_cast<double>(p);
          for (std::size_t i = 0; i < p; ++i) w.set(i, i, w(i, i) + ridge);
        }
        ScatterMatrices probe;
        probe.n = {static_cast<double>(subset.size())};
        probe.w = {w};
        try {
          (void)mstep_unconstrained(model, probe);
          params.mu[g] = mean;
          subset_scatter.n[g] = static_cast<double>(subset.size());
          subset_scatter.w[g] = w;
          done = true;
        } catch (const DegenerateFitError&) {
          if (last_chance && ridged) {
            cand.failure = "singular subset covariance for class " + std::to_string(g + 1);
            return cand;
          }
        }
      }
    }
    if (!done) {
      cand.failure = "singular subset covariance for class " + std::to_string(g + 1);
      return cand;
    }
  }
  try {
    params.cov = mstep_unconstrained(model, subset_scatter);
  } catch (const DegenerateFitError& e) {
    cand.failure = e.what();
    return cand;
  }

  // Concentration steps on the labelled conditional densities until the
  // discarded set repeats.
  std::vector<std::size_t> prev_discard;
  UnlabelledData no_unlabelled;
  no_unlabelled.y = Matrix(0, p);
  TrimMask mask;
  mask.alpha_labelled = alpha_labelled;
  mask.zeta.assign(n, 1);

  try {
    for (int iter = 0; iter < kCstepMaxIter; ++iter) {
      auto evals = make_evaluators(params);
      std::vector<double> cond(n);
      for (std::size_t i = 0; i < n; ++i)
        cond[i] = evals[labelled.labels[i]].logdensity(labelled.x.row(i));
      auto discard = lowest_k(cond, n_trim);
      mask.zeta.assign(n, 1);
      for (std::size_t i : discard) mask.zeta[i] = 0;
      const bool stable = (iter > 0 && discard == prev_discard);
      prev_discard = std::move(discard);
      if (stable) break;

      // Update tau, mu, Sigma from the retained units.
      std::vector<double> counts(n_groups, 0.0);
      for (std::size_t i = 0; i < n; ++i)
        if (mask.zeta[i]) counts[labelled.labels[i]] += 1.0;
      for (std::size_t g = 0; g < n_groups; ++g) {
        if (counts[g] < static_cast<double>(p + 1)) {
          cand.failure = "class " + std::to_string(g + 1) + " depleted in concentration step";
          return cand;
        }
        params.tau[g] = counts[g] / static_cast<double>(n_keep);
      }
      Matrix dummy_z(0, n_groups);
      WeightedMoments m = weighted_moments(labelled, no_unlabelled, mask, dummy_z);
      params.mu = m.mean;
      params.cov = mstep_unconstrained(model, m.scatter, &params.cov);
      cand.trajectory.push_back(trimmed_loglik(params, labelled, no_unlabelled, mask));
    }
  } catch (const DegenerateFitError& e) {
    cand.failure = e.what();
    return cand;
  }

  cand.params = std::move(params);
  cand.mask = std::move(mask);
  cand.mask.phi.clear();
  cand.objective = trimmed_loglik(cand.params, labelled, no_unlabelled, cand.mask);
  cand.ok = std::isfinite(cand.objective);
  if (!cand.ok) cand.failure = "non-finite initialization objective";
  return cand;
}

std::vector<InitCandidate> robust_init_candidates(const LabelledData& labelled,
                                                  PatternedModel model, double alpha_labelled,
                                                  std::size_t nsamp, uint64_t seed,
                                                  std::size_t threads,
                                                  const FitOptions* options) {
  const std::size_t p = labelled.dim();
  auto members = class_member_indices(labelled);
  for (std::size_t g = 0; g < members.size(); ++g) {
    if (members[g].size() < p + 1)
      throw InfeasibleConfigError(
          "class " + std::to_string(g + 1) + " has " + std::to_string(members[g].size()) +
          " labelled units but p + 1 = " + std::to_string(p + 1) +
          " are required to seed a covariance; a diagonal-family model (EII...VVI) needs "
          "fewer observations per class");
  }

  std::vector<InitCandidate> cands(nsamp);
  parallel_for(nsamp, threads, [&](std::size_t r) {
    const std::vector<std::vector<std::size_t>>* fixed = nullptr;
    if (options && options->init_subsets) fixed = &(*options->init_subsets)[r];
    cands[r] = run_init_restart(labelled, members, model, alpha_labelled,
                                Rng::stream(seed, r, kPurposeInitSubset), fixed);
  });
  return cands;
}

// Order candidates best-first; deterministic by (objective, index).
std::vector<std::size_t> rank_candidates(const std::vector<InitCandidate>& cands) {
  std::vector<std::size_t> order;
  for (std::size_t i = 0; i < cands.size(); ++i)
    if (cands[i].ok) order.push_back(i);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return cands[a].objective > cands[b].objective;
  });
  return order;
}

// End-of-initialization constraint enforcement on the winning restart.
void enforce_init_constraint(InitCandidate& cand, const LabelledData& labelled,
                             PatternedModel model, double c) {
  cand.params.c = c;
  if (!std::isfinite(c) || !er_required(model)) return;
  if (er_ratio(cand.params.cov) <= c + kErSlack) return;
  UnlabelledData no_unlabelled;
  no_unlabelled.y = Matrix(0, labelled.dim());
  Matrix dummy_z(0, labelled.n_groups);
  WeightedMoments m = weighted_moments(labelled, no_unlabelled, cand.mask, dummy_z);
  cand.params.cov = constrain_mstep(model, cand.params.cov, m.scatter, c);
}

GaussianMixtureParams edda_estimates(const LabelledData& labelled, PatternedModel model) {
  const std::size_t n_groups = labelled.n_groups;
  GaussianMixtureParams params;
  params.model = model;
  params.c = kInf;
  TrimMask mask;
  mask.zeta.assign(labelled.size(), 1);
  UnlabelledData no_unlabelled;
  no_unlabelled.y = Matrix(0, labelled.dim());
  Matrix dummy_z(0, n_groups);
  WeightedMoments m = weighted_moments(labelled, no_unlabelled, mask, dummy_z);
  params.tau.resize(n_groups);
  for (std::size_t g = 0; g < n_groups; ++g)
    params.tau[g] = m.class_weight[g] / static_cast<double>(labelled.size());
  params.mu = m.mean;
  params.cov = mstep_unconstrained(model, m.scatter);
  return params;
}

struct EmOutcome {
  GaussianMixtureParams params;
  TrimMask mask;
  Matrix z;
  std::vector<double> trajectory;
  std::vector<std::uint8_t> mask_changed;
  std::vector<double> er_after_mstep;
  std::size_t iterations = 0;
  bool converged = false;
};

EmOutcome run_em(const GaussianMixtureParams& start, const LabelledData& labelled,
                 const UnlabelledData& unlabelled, PatternedModel model,
                 const FitOptions& opt, double alpha_l, double alpha_u, double c) {
  EmOutcome out;
  out.params = start;
  const std::size_t p = labelled.dim();
  TrimMask prev_mask;
  bool have_prev_mask = false;

  for (std::size_t k = 0; k < opt.max_iter; ++k) {
    TrimMask mask = concentration_step(out.params, labelled, unlabelled, alpha_l, alpha_u);
    const bool changed =
        !have_prev_mask || mask.zeta != prev_mask.zeta || mask.phi != prev_mask.phi;
    Matrix z = e_step(out.params, unlabelled, mask);

    // Emptied-class guard before committing to the M-step.
    std::vector<double> weight(labelled.n_groups, 0.0);
    for (std::size_t n = 0; n < labelled.size(); ++n)
      if (mask.zeta[n]) weight[labelled.labels[n]] += 1.0;
    for (std::size_t u = 0; u < unlabelled.size(); ++u)
      if (mask.phi[u])
        for (std::size_t g = 0; g < labelled.n_groups; ++g) weight[g] += z(u, g);
    for (std::size_t g = 0; g < labelled.n_groups; ++g)
      if (weight[g] < static_cast<double>(p + 1))
        throw DegenerateFitError("class " + std::to_string(g + 1) +
                                 " fell below p + 1 effective weight during EM");

    out.params = m_step_impl(labelled, unlabelled, mask, z, model, c, &out.params.cov);
    const double ll = trimmed_loglik(out.params, labelled, unlabelled, mask);
    if (!std::isfinite(ll)) throw DegenerateFitError("non-finite trimmed log-likelihood");

    out.trajectory.push_back(ll);
    out.mask_changed.push_back(changed ? 1 : 0);
    out.er_after_mstep.push_back(er_ratio(out.params.cov));
    prev_mask = mask;
    have_prev_mask = true;
    out.mask = std::move(mask);
    out.z = std::move(z);
    out.iterations = k + 1;

    const std::size_t t = out.trajectory.size();
    if (t >= 3 && aitken_converged(out.trajectory[t - 3], out.trajectory[t - 2],
                                   out.trajectory[t - 1], opt.epsilon)) {
      out.converged = true;
      break;
    }
  }
  return out;
}

std::size_t map_label(const std::vector<double>& log_post) {
  std::size_t best = 0;
  for (std::size_t g = 1; g < log_post.size(); ++g)
    if (log_post[g] > log_post[best]) best = g;  // ties keep the lowest index
  return best;
}

}  // namespace

void LabelledData::validate() const {
  if (labels.size() != x.rows()) throw DataError("labelled data: label count != row count");
  if (n_groups == 0) throw DataError("labelled data: no classes");
  std::vector<std::size_t> counts(n_groups, 0);
  for (std::size_t l : labels) {
    if (l >= n_groups) throw DataError("labelled data: label out of range");
    ++counts[l];
  }
  for (std::size_t g = 0; g < n_groups; ++g)
    if (counts[g] == 0)
      throw DataError("labelled data: class " + std::to_string(g + 1) + " has no members");
}

std::size_t TrimMask::retained_labelled() const {
  return static_cast<std::size_t>(std::count(zeta.begin(), zeta.end(), 1));
}

std::size_t TrimMask::retained_unlabelled() const {
  return static_cast<std::size_t>(std::count(phi.begin(), phi.end(), 1));
}

std::size_t trim_count(std::size_t n, double alpha) {
  if (alpha < 0.0 || alpha >= 1.0) throw std::invalid_argument("trimming level outside [0, 1)");
  return static_cast<std::size_t>(std::floor(static_cast<double>(n) * alpha + 1e-9));
}

const std::string& mode_name(FitMode m) {
  static const std::array<std::string, 4> names = {"edda", "upclass", "redda", "rupclass"};
  return names[static_cast<std::size_t>(m)];
}

FitMode parse_mode(const std::string& name) {
  for (std::size_t i = 0; i < 4; ++i)
    if (mode_name(static_cast<FitMode>(i)) == name) return static_cast<FitMode>(i);
  throw std::invalid_argument("unknown mode: " + name);
}

bool mode_is_robust(FitMode m) { return m == FitMode::REDDA || m == FitMode::RUPCLASS; }

bool mode_is_semisupervised(FitMode m) { return m == FitMode::UPCLASS || m == FitMode::RUPCLASS; }

double trimmed_loglik(const GaussianMixtureParams& params, const LabelledData& labelled,
                      const UnlabelledData& unlabelled, const TrimMask& mask) {
  auto evals = make_evaluators(params);
  const auto lt = log_tau(params);
  double acc = 0.0;
  for (std::size_t n = 0; n < labelled.size(); ++n) {
    if (!mask.zeta[n]) continue;
    const std::size_t g = labelled.labels[n];
    acc += lt[g] + evals[g].logdensity(labelled.x.row(n));
  }
  std::vector<double> terms(params.groups());
  for (std::size_t u = 0; u < unlabelled.size(); ++u) {
    if (u >= mask.phi.size() || !mask.phi[u]) continue;
    for (std::size_t g = 0; g < params.groups(); ++g)
      terms[g] = lt[g] + evals[g].logdensity(unlabelled.y.row(u));
    acc += log_sum_exp(terms);
  }
  return acc;
}

GaussianMixtureParams robust_init(const LabelledData& labelled, PatternedModel model,
                                  double alpha_labelled, double c, std::size_t nsamp,
                                  uint64_t seed, std::size_t threads) {
  labelled.validate();
  if (nsamp < 1) throw std::invalid_argument("robust_init: nsamp must be >= 1");
  auto cands =
      robust_init_candidates(labelled, model, alpha_labelled, nsamp, seed, threads, nullptr);
  auto order = rank_candidates(cands);
  if (order.empty())
    throw DegenerateFitError("all " + std::to_string(nsamp) +
                             " initialization restarts failed; last failure: " +
                             cands.back().failure);
  InitCandidate best = cands[order.front()];
  enforce_init_constraint(best, labelled, model, c);
  return best.params;
}

TrimMask concentration_step(const GaussianMixtureParams& params, const LabelledData& labelled,
                            const UnlabelledData& unlabelled, double alpha_labelled,
                            double alpha_unlabelled) {
  auto evals = make_evaluators(params);
  const auto lt = log_tau(params);
  TrimMask mask;
  mask.alpha_labelled = alpha_labelled;
  mask.alpha_unlabelled = alpha_unlabelled;

  const std::size_t n = labelled.size();
  mask.zeta.assign(n, 1);
  const std::size_t n_trim = trim_count(n, alpha_labelled);
  if (n_trim > 0) {
    std::vector<double> cond(n);
    for (std::size_t i = 0; i < n; ++i)
      cond[i] = evals[labelled.labels[i]].logdensity(labelled.x.row(i));
    for (std::size_t i : lowest_k(cond, n_trim)) mask.zeta[i] = 0;
  }

  const std::size_t m = unlabelled.size();
  mask.phi.assign(m, 1);
  const std::size_t m_trim = trim_count(m, alpha_unlabelled);
  if (m_trim > 0) {
    std::vector<double> marg(m);
    std::vector<double> terms(params.groups());
    for (std::size_t u = 0; u < m; ++u) {
      for (std::size_t g = 0; g < params.groups(); ++g)
        terms[g] = lt[g] + evals[g].logdensity(unlabelled.y.row(u));
      marg[u] = log_sum_exp(terms);
    }
    for (std::size_t u : lowest_k(marg, m_trim)) mask.phi[u] = 0;
  }
  return mask;
}

Matrix e_step(const GaussianMixtureParams& params, const UnlabelledData& unlabelled,
              const TrimMask& mask) {
  const std::size_t m = unlabelled.size();
  const std::size_t n_groups = params.groups();
  Matrix z(m, n_groups);
  if (m == 0) return z;
  auto evals = make_evaluators(params);
  const auto lt = log_tau(params);
  std::vector<double> terms(n_groups);
  for (std::size_t u = 0; u < m; ++u) {
    if (!mask.phi[u]) continue;  // trimmed rows stay zero
    for (std::size_t g = 0; g < n_groups; ++g)
      terms[g] = lt[g] + evals[g].logdensity(unlabelled.y.row(u));
    const double denom = log_sum_exp(terms);
    for (std::size_t g = 0; g < n_groups; ++g) z(u, g) = std::exp(terms[g] - denom);
  }
  return z;
}

GaussianMixtureParams m_step_impl(const LabelledData& labelled,
                                  const UnlabelledData& unlabelled, const TrimMask& mask,
                                  const Matrix& z, PatternedModel model, double c,
                                  const std::vector<CovarianceDecomposition>* warm) {
  WeightedMoments m = weighted_moments(labelled, unlabelled, mask, z);
  const double denom =
      static_cast<double>(mask.retained_labelled() + mask.retained_unlabelled());

  GaussianMixtureParams params;
  params.model = model;
  params.c = c;
  params.tau.resize(labelled.n_groups);
  for (std::size_t g = 0; g < labelled.n_groups; ++g)
    params.tau[g] = m.class_weight[g] / denom;
  params.mu = m.mean;
  params.cov = patterned_covariances(m.scatter, model, c, warm);
  return params;
}

GaussianMixtureParams m_step(const LabelledData& labelled, const UnlabelledData& unlabelled,
                             const TrimMask& mask, const Matrix& z, PatternedModel model,
                             double c) {
  return m_step_impl(labelled, unlabelled, mask, z, model, c, nullptr);
}

bool aitken_converged(double l_prev, double l_curr, double l_next, double epsilon) {
  const double d1 = l_curr - l_prev;
  const double d2 = l_next - l_curr;
  if (d1 == 0.0 || d2 == 0.0) return true;  // exact plateau
  const double a = d2 / d1;
  if (a >= 1.0) return false;  // not (yet) a contracting sequence
  const double l_inf = l_curr + d2 / (1.0 - a);
  return std::abs(l_inf - l_curr) < epsilon;
}

ModelFit fit(const LabelledData& labelled, const UnlabelledData& unlabelled,
             PatternedModel model, const FitOptions& options) {
  labelled.validate();
  const std::size_t p = labelled.dim();
  const std::size_t n = labelled.size();
  const std::size_t n_groups = labelled.n_groups;
  if (unlabelled.size() > 0 && unlabelled.dim() != p)
    throw DataError("unlabelled data dimension differs from labelled data");

  const bool robust = mode_is_robust(options.mode);
  const bool semisup = mode_is_semisupervised(options.mode);
  const double alpha_l = robust ? options.alpha_labelled : 0.0;
  const double alpha_u = robust ? options.alpha_unlabelled : 0.0;
  const double c = robust ? options.c : kInf;
  if (robust && !(options.c >= 1.0))
    throw InfeasibleConfigError("constraint constant c must be >= 1");
  if (alpha_l < 0.0 || alpha_l >= 1.0 || alpha_u < 0.0 || alpha_u >= 1.0)
    throw InfeasibleConfigError("trimming levels must lie in [0, 1)");
  const std::size_t retained = n - trim_count(n, alpha_l);
  if (retained < n_groups * (p + 1))
    throw InfeasibleConfigError("retained labelled count " + std::to_string(retained) +
                                " is below G(p+1) = " + std::to_string(n_groups * (p + 1)));

  UnlabelledData empty;
  empty.y = Matrix(0, p);
  const UnlabelledData& est_unlabelled = semisup ? unlabelled : empty;

  ModelFit out;
  out.mode = options.mode;

  if (options.mode == FitMode::EDDA || options.mode == FitMode::UPCLASS) {
    GaussianMixtureParams start = edda_estimates(labelled, model);
    if (options.mode == FitMode::EDDA) {
      out.params = std::move(start);
      out.mask.alpha_labelled = 0.0;
      out.mask.zeta.assign(n, 1);
      out.mask.phi.assign(unlabelled.size(), 1);
      out.z = e_step(out.params, unlabelled, out.mask);
      out.loglik_trajectory = {trimmed_loglik(out.params, labelled, empty, out.mask)};
      out.iterations = 1;
      out.converged = true;
    } else {
      EmOutcome em = run_em(start, labelled, est_unlabelled, model, options, 0.0, 0.0, kInf);
      out.params = std::move(em.params);
      out.mask = std::move(em.mask);
      out.z = std::move(em.z);
      out.loglik_trajectory = std::move(em.trajectory);
      out.mask_changed = std::move(em.mask_changed);
      out.er_after_mstep = std::move(em.er_after_mstep);
      out.iterations = em.iterations;
      out.converged = em.converged;
    }
  } else {
    auto cands = robust_init_candidates(labelled, model, alpha_l, options.nsamp, options.seed,
                                        options.threads, &options);
    auto order = rank_candidates(cands);
    if (order.empty())
      throw DegenerateFitError("all initialization restarts failed; last failure: " +
                               cands.back().failure);

    bool fitted = false;
    std::string last_error;
    for (std::size_t rank = 0; rank < order.size() && !fitted; ++rank) {
      InitCandidate cand = cands[order[rank]];
      try {
        enforce_init_constraint(cand, labelled, model, c);
        if (options.mode == FitMode::REDDA) {
          out.params = cand.params;
          out.mask = cand.mask;
          out.mask.alpha_unlabelled = 0.0;
          out.mask.phi.assign(unlabelled.size(), 1);
          out.z = e_step(out.params, unlabelled, out.mask);
          out.loglik_trajectory = cand.trajectory;
          out.loglik_trajectory.push_back(trimmed_loglik(out.params, labelled, empty, out.mask));
          out.iterations = out.loglik_trajectory.size();
          out.converged = true;
        } else {
          EmOutcome em = run_em(cand.params, labelled, est_unlabelled, model, options, alpha_l,
                                alpha_u, c);
          out.params = std::move(em.params);
          out.mask = std::move(em.mask);
          out.z = std::move(em.z);
          out.loglik_trajectory = std::move(em.trajectory);
          out.mask_changed = std::move(em.mask_changed);
          out.er_after_mstep = std::move(em.er_after_mstep);
          out.iterations = em.iterations;
          out.converged = em.converged;
        }
        out.restart_used = order[rank];
        fitted = true;
      } catch (const DegenerateFitError& e) {
        last_error = e.what();
      } catch (const ConstraintConvergenceError& e) {
        last_error = e.what();
      }
    }
    if (!fitted)
      throw DegenerateFitError("every initialization led to a degenerate fit; last failure: " +
                               last_error);
  }

  // Final classification of the unlabelled set, trimmed units included
  // (a-posteriori Bayes rule) when requested.
  const std::size_t m = unlabelled.size();
  if (out.mask.phi.size() != m) out.mask.phi.assign(m, 1);
  if (out.z.rows() != m) out.z = e_step(out.params, unlabelled, out.mask);
  out.labels_unlabelled.assign(m, 0);
  out.outlier_unlabelled.assign(m, 0);
  if (m > 0) {
    Prediction pred = predict(out.params, unlabelled.y);
    for (std::size_t u = 0; u < m; ++u) {
      out.outlier_unlabelled[u] = out.mask.phi[u] ? 0 : 1;
      if (out.mask.phi[u] || options.classify_trimmed)
        out.labels_unlabelled[u] = pred.labels[u];
      else
        out.labels_unlabelled[u] = n_groups;  // sentinel: left unassigned
    }
    double cutoff = kInf;
    for (std::size_t u = 0; u < m; ++u)
      if (out.mask.phi[u]) cutoff = std::min(cutoff, pred.log_marginal[u]);
    const bool any_trimmed =
        std::any_of(out.outlier_unlabelled.begin(), out.outlier_unlabelled.end(),
                    [](std::uint8_t f) { return f != 0; });
    out.unlabelled_cutoff_logdensity =
        any_trimmed ? cutoff : std::numeric_limits<double>::quiet_NaN();
  } else {
    out.unlabelled_cutoff_logdensity = std::numeric_limits<double>::quiet_NaN();
  }
  out.outlier_labelled.assign(n, 0);
  if (out.mask.zeta.size() == n)
    for (std::size_t i = 0; i < n; ++i) out.outlier_labelled[i] = out.mask.zeta[i] ? 0 : 1;
  else
    out.mask.zeta.assign(n, 1);

  const std::size_t retained_total =
      out.mask.retained_labelled() + (semisup ? out.mask.retained_unlabelled() : 0);
  const double ll_for_rbic =
      semisup ? trimmed_loglik(out.params, labelled, unlabelled, out.mask)
              : trimmed_loglik(out.params, labelled, empty, out.mask);
  out.rbic = rbic_value(ll_for_rbic, model, n_groups, p, out.params.c, retained_total);
  return out;
}

Prediction predict(const GaussianMixtureParams& params, const Matrix& newdata) {
  if (newdata.cols() != params.dim())
    throw DataError("prediction data has dimension " + std::to_string(newdata.cols()) +
                    " but the model expects " + std::to_string(params.dim()));
  const std::size_t m = newdata.rows();
  const std::size_t n_groups = params.groups();
  Prediction pred;
  pred.labels.assign(m, 0);
  pred.posterior = Matrix(m, n_groups);
  pred.log_marginal.assign(m, 0.0);
  auto evals = make_evaluators(params);
  const auto lt = log_tau(params);
  std::vector<double> terms(n_groups);
  for (std::size_t u = 0; u < m; ++u) {
    for (std::size_t g = 0; g < n_groups; ++g)
      terms[g] = lt[g] + evals[g].logdensity(newdata.row(u));
    const double denom = log_sum_exp(terms);
    pred.log_marginal[u] = denom;
    for (std::size_t g = 0; g < n_groups; ++g)
      pred.posterior(u, g) = std::exp(terms[g] - denom);
    pred.labels[u] = map_label(terms);
  }
  return pred;
}

}  // namespace redda
