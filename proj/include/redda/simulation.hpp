#pragma once

// Synthetic benchmark studies: bivariate 3-component Gaussian mixture with
// label switching and uniform outliers at a configurable contamination rate,
// and a 10-dimensional 4-component multivariate-t mixture with fixed
// contamination counts. Includes the misclassification / trimming metrics
// and the Monte Carlo aggregation harness.

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "redda/covariance_models.hpp"
#include "redda/rng.hpp"
#include "redda/trimmed_em.hpp"

namespace redda {

inline constexpr std::size_t kNoTrueClass = static_cast<std::size_t>(-1);

// Ground-truth mixture a study draws from.
struct GeneratingMixture {
  std::vector<double> tau;
  std::vector<std::vector<double>> mu;
  std::vector<SymMatrix> sigma;  // scale matrices for the t study
};

const GeneratingMixture& study1_mixture();
const GeneratingMixture& study2_mixture();

struct StudyIConfig {
  std::size_t n_labelled = 200;
  std::size_t m_unlabelled = 400;
  double eta = 0.0;  // contamination rate in [0, 0.25]
};

struct StudyIIConfig {
  std::size_t n_labelled = 250;
  std::size_t m_unlabelled = 750;
  std::size_t n_label_flips = 10;
  std::size_t n_outliers = 15;
  int t_dof = 6;
};

// One generated replicate plus the contamination bookkeeping needed by the
// evaluation metrics.
struct GeneratedData {
  LabelledData labelled;
  UnlabelledData unlabelled;
  std::vector<std::size_t> true_class_labelled;   // kNoTrueClass for planted outliers
  std::vector<std::uint8_t> label_noise;          // flipped labels
  std::vector<std::uint8_t> attribute_noise;      // uniform replacements
  std::vector<std::size_t> true_class_unlabelled;

  std::size_t contaminated_count() const;
};

// Draws N+M units, splits, flips ceil(eta/2 N) third-group labels to class 1
// and replaces ceil(eta/2 N) further labelled units by uniform draws on
// [-20, 20]^2 with random labels.
GeneratedData gen_study1(const StudyIConfig& config, Rng& rng);

// Draws from the t mixture, flips n_label_flips labels to random wrong
// classes and replaces n_outliers labelled units by uniform draws on
// [10, 15]^10 with random labels.
GeneratedData gen_study2(const StudyIIConfig& config, Rng& rng);

struct ReplicateMetrics {
  double error = 0.0;                 // misclassification on the unlabelled set
  double label_noise_trimmed = 0.0;   // share of flipped units with zeta = 0
  double label_noise_assigned = 0.0;  // of those, share reassigned to the true class
  double contaminated_trimmed = 0.0;  // share of all planted contamination trimmed
  bool has_label_noise = false;
  bool has_assigned = false;  // at least one flipped unit was trimmed
  bool has_contamination = false;
};

ReplicateMetrics metrics(const ModelFit& fit, const GeneratedData& data);

struct MethodConfig {
  std::string name;
  FitMode mode = FitMode::EDDA;
  PatternedModel model = PatternedModel::VVV;
  double alpha_labelled = 0.0;
  double alpha_unlabelled = 0.0;
  double c = 20.0;
};

struct BenchmarkConfig {
  int study = 1;
  std::vector<double> etas = {0.0};  // study 1 only
  std::vector<MethodConfig> methods;
  std::size_t replicates = 100;
  uint64_t seed = 1;
  std::size_t threads = 1;
  std::size_t nsamp = 50;
  std::size_t max_iter = 500;
  double epsilon = 1e-5;
  StudyIConfig study1;
  StudyIIConfig study2;
};

struct BenchmarkRow {
  std::string method;
  double eta = 0.0;
  std::string metric;
  double mean = 0.0;
  double sd = 0.0;
  std::size_t count = 0;     // replicates contributing
  std::size_t failures = 0;  // fit failures in the cell
};

struct BenchmarkReport {
  std::vector<BenchmarkRow> rows;

  // Mean of a cell; NaN when absent.
  double mean_of(const std::string& method, double eta, const std::string& metric) const;
};

// B independent replicates per cell, all methods evaluated on the same
// replicate draws; deterministic for a fixed seed.
BenchmarkReport run_benchmark(const BenchmarkConfig& config);

// Long-format CSV: method,eta,metric,mean,sd,B,failures.
void write_benchmark_csv(const BenchmarkReport& report, std::ostream& os);
// Human-readable grid keyed on the error metric.
void write_benchmark_table(const BenchmarkReport& report, std::ostream& os);

std::vector<MethodConfig> default_methods_study1();
std::vector<MethodConfig> default_methods_study2();

}  // namespace redda
