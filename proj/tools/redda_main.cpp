// Command-line front end: fitting, prediction, model selection, study
// generation and Monte Carlo benchmarking for the robust updating
// classification rules.

#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "redda/artifact.hpp"
#include "redda/dataset_io.hpp"
#include "redda/errors.hpp"
#include "redda/model_selection.hpp"
#include "redda/simulation.hpp"
#include "redda/threading.hpp"
#include "redda/trimmed_em.hpp"

namespace {

using namespace redda;

constexpr int kExitUsage = 2;
constexpr int kExitData = 3;
constexpr int kExitInfeasible = 4;
constexpr int kExitDegenerate = 5;

struct FitFlags {
  std::string input;
  std::string output;
  std::string model = "VVV";
  std::string mode = "rupclass";
  double alpha_labelled = 0.0;
  double alpha_unlabelled = 0.0;
  double c = 20.0;
  std::size_t nsamp = 50;
  std::size_t max_iter = 500;
  double tol = 1e-5;
  uint64_t seed = 1;
  bool classify_trimmed = true;
  std::size_t threads = 0;
};

FitOptions make_options(const FitFlags& flags) {
  FitOptions opt;
  opt.mode = parse_mode(flags.mode);
  opt.alpha_labelled = flags.alpha_labelled;
  opt.alpha_unlabelled = flags.alpha_unlabelled;
  opt.c = flags.c;
  opt.nsamp = flags.nsamp;
  opt.max_iter = flags.max_iter;
  opt.epsilon = flags.tol;
  opt.classify_trimmed = flags.classify_trimmed;
  opt.seed = flags.seed;
  opt.threads = flags.threads == 0 ? default_threads() : flags.threads;
  return opt;
}

void add_fit_flags(CLI::App* cmd, FitFlags& flags, bool with_model) {
  cmd->add_option("-i,--input", flags.input, "dataset CSV")->required();
  if (with_model) cmd->add_option("--model", flags.model, "patterned model name (default VVV)");
  cmd->add_option("--mode", flags.mode, "edda|upclass|redda|rupclass");
  cmd->add_option("--alpha-labelled", flags.alpha_labelled, "labelled trimming level");
  cmd->add_option("--alpha-unlabelled", flags.alpha_unlabelled, "unlabelled trimming level");
  cmd->add_option("--c", flags.c, "eigenvalue-ratio constant (>= 1)");
  cmd->add_option("--nsamp", flags.nsamp, "robust initialization restarts");
  cmd->add_option("--max-iter", flags.max_iter, "EM iteration cap");
  cmd->add_option("--tol", flags.tol, "Aitken convergence threshold");
  cmd->add_option("--seed", flags.seed, "random seed");
  cmd->add_flag("--classify-trimmed,!--no-classify-trimmed", flags.classify_trimmed,
                "Bayes-classify trimmed units a posteriori (default on)");
  cmd->add_option("--threads", flags.threads, "worker threads (0 = auto)");
}

int run_fit(const FitFlags& flags) {
  Dataset ds = read_dataset_file(flags.input);
  ds.labelled.validate();
  const FitOptions opt = make_options(flags);
  const PatternedModel model = parse_model(flags.model);

  ModelFit f = fit(ds.labelled, ds.unlabelled, model, opt);

  ModelArtifact artifact;
  artifact.mode = opt.mode;
  artifact.seed = opt.seed;
  artifact.class_names = ds.class_names;
  artifact.fit = f;
  if (!flags.output.empty()) save_artifact_file(artifact, flags.output);

  std::ostream& os = std::cout;
  os << "mode: " << mode_name(opt.mode) << "  model: " << model_name(model) << '\n';
  os << "labelled: " << ds.labelled.size() << " (retained " << f.mask.retained_labelled()
     << ", trimmed " << ds.labelled.size() - f.mask.retained_labelled() << ")\n";
  os << "unlabelled: " << ds.unlabelled.size() << " (retained " << f.mask.retained_unlabelled()
     << ", trimmed " << ds.unlabelled.size() - f.mask.retained_unlabelled() << ")\n";
  os << "iterations: " << f.iterations << (f.converged ? " (converged)" : " (iteration cap hit)")
     << '\n';
  os << "trimmed log-likelihood: " << format_double(f.loglik_trajectory.back()) << '\n';
  os << "RBIC: " << format_double(f.rbic) << '\n';
  os << "class sizes (retained labelled";
  if (!ds.unlabelled_rows.empty()) os << " / MAP-assigned unlabelled";
  os << "):\n";
  std::vector<std::size_t> lab_counts(ds.class_names.size(), 0);
  for (std::size_t i = 0; i < ds.labelled.size(); ++i)
    if (f.mask.zeta[i]) ++lab_counts[ds.labelled.labels[i]];
  std::vector<std::size_t> unl_counts(ds.class_names.size(), 0);
  for (std::size_t u = 0; u < f.labels_unlabelled.size(); ++u)
    if (f.labels_unlabelled[u] < unl_counts.size()) ++unl_counts[f.labels_unlabelled[u]];
  for (std::size_t g = 0; g < ds.class_names.size(); ++g) {
    os << "  " << ds.class_names[g] << ": " << lab_counts[g];
    if (!ds.unlabelled_rows.empty()) os << " / " << unl_counts[g];
    os << '\n';
  }
  if (!flags.output.empty()) os << "artifact written to " << flags.output << '\n';
  return 0;
}

int run_predict(const std::string& artifact_path, const std::string& input,
                const std::string& output) {
  const ModelArtifact artifact = load_artifact_file(artifact_path);
  Dataset ds = read_dataset_file(input);
  if (ds.p != artifact.fit.params.dim())
    throw DataError("dataset has " + std::to_string(ds.p) + " features but the artifact expects " +
                    std::to_string(artifact.fit.params.dim()));
  const Matrix features = ds.all_features();
  const Prediction pred = predict(artifact.fit.params, features);
  const double cutoff = artifact.fit.unlabelled_cutoff_logdensity;

  std::ofstream out(output);
  if (!out) throw DataError("cannot open output file: " + output);
  out << "id,predicted,max_posterior";
  for (const auto& name : artifact.class_names) out << ",posterior_" << name;
  out << ",outlier\n";
  for (std::size_t i = 0; i < features.rows(); ++i) {
    const std::size_t g = pred.labels[i];
    out << (i + 1) << ',' << artifact.class_names[g] << ','
        << format_double(pred.posterior(i, g));
    for (std::size_t k = 0; k < artifact.class_names.size(); ++k)
      out << ',' << format_double(pred.posterior(i, k));
    const bool flagged = !std::isnan(cutoff) && pred.log_marginal[i] < cutoff;
    out << ',' << (flagged ? 1 : 0) << '\n';
  }
  std::cout << "predictions for " << features.rows() << " rows written to " << output << '\n';
  return 0;
}

int run_select(const FitFlags& flags, const std::vector<std::string>& model_names,
               const std::vector<double>& c_grid, const std::string& output) {
  Dataset ds = read_dataset_file(flags.input);
  ds.labelled.validate();
  FitOptions opt = make_options(flags);

  std::vector<PatternedModel> models;
  if (model_names.empty())
    models.assign(std::begin(kAllModels), std::end(kAllModels));
  else
    for (const auto& name : model_names) models.push_back(parse_model(name));

  SelectionReport report = select(ds.labelled, ds.unlabelled, models, c_grid, opt);

  std::ofstream out(output);
  if (!out) throw DataError("cannot open output file: " + output);
  out << "model,c,rbic,loglik,iterations,converged,winner,failure\n";
  for (std::size_t i = 0; i < report.candidates.size(); ++i) {
    const auto& cand = report.candidates[i];
    out << model_name(cand.model) << ',' << format_double(cand.c) << ','
        << (cand.fitted && cand.converged ? format_double(cand.rbic) : "") << ','
        << (cand.fitted ? format_double(cand.loglik) : "") << ',' << cand.iterations << ','
        << (cand.converged ? 1 : 0) << ',' << (i == report.winner ? 1 : 0) << ','
        << cand.failure << '\n';
  }
  const auto& best = report.candidates[report.winner];
  std::cout << "winner: " << model_name(best.model) << " (c = " << format_double(best.c)
            << ", RBIC = " << format_double(best.rbic) << ")\n"
            << "report written to " << output << '\n';
  return 0;
}

int run_simulate(int study, double eta, std::size_t n, std::size_t m, uint64_t seed,
                 const std::string& output) {
  Rng rng(seed);
  GeneratedData data;
  if (study == 1) {
    StudyIConfig config;
    if (n > 0) config.n_labelled = n;
    if (m > 0) config.m_unlabelled = m;
    config.eta = eta;
    data = gen_study1(config, rng);
  } else if (study == 2) {
    StudyIIConfig config;
    if (n > 0) config.n_labelled = n;
    if (m > 0) config.m_unlabelled = m;
    data = gen_study2(config, rng);
  } else {
    throw std::invalid_argument("study must be 1 or 2");
  }
  std::ofstream out(output);
  if (!out) throw DataError("cannot open output file: " + output);
  write_generated_csv(data, out);
  std::cout << "study " << study << ": " << data.labelled.size() << " labelled + "
            << data.unlabelled.size() << " unlabelled rows (" << data.contaminated_count()
            << " contaminated) written to " << output << '\n';
  return 0;
}

struct BenchFlags {
  int study = 1;
  std::vector<double> etas;
  std::vector<std::string> methods;
  std::size_t replicates = 100;
  uint64_t seed = 1;
  std::string model = "VVV";
  double alpha_labelled = -1.0;  // default depends on study
  double alpha_unlabelled = 0.05;
  double c = 20.0;
  std::size_t nsamp = 50;
  std::size_t max_iter = 500;
  std::size_t threads = 0;
  std::string output;
};

int run_bench(const BenchFlags& flags) {
  BenchmarkConfig config;
  config.study = flags.study;
  config.replicates = flags.replicates;
  config.seed = flags.seed;
  config.threads = flags.threads == 0 ? default_threads() : flags.threads;
  config.nsamp = flags.nsamp;
  config.max_iter = flags.max_iter;
  config.etas = flags.etas.empty()
                    ? std::vector<double>{0.0, 0.05, 0.10, 0.15, 0.20, 0.25}
                    : flags.etas;

  const double alpha_l = flags.alpha_labelled >= 0.0 ? flags.alpha_labelled
                                                     : (flags.study == 1 ? 0.15 : 0.1);
  const PatternedModel model = parse_model(flags.model);
  std::vector<std::string> names = flags.methods;
  if (names.empty()) names = {"edda", "upclass", "redda", "rupclass"};
  for (const auto& raw : names) {
    const FitMode mode = parse_mode(raw);
    MethodConfig mc;
    mc.mode = mode;
    mc.model = model;
    mc.c = flags.c;
    if (mode_is_robust(mode)) {
      mc.alpha_labelled = alpha_l;
      mc.alpha_unlabelled = mode == FitMode::RUPCLASS ? flags.alpha_unlabelled : 0.0;
    }
    std::string display = mode_name(mode);
    for (char& ch : display) ch = static_cast<char>(std::toupper(ch));
    mc.name = display;
    config.methods.push_back(std::move(mc));
  }

  BenchmarkReport report = run_benchmark(config);
  if (!flags.output.empty()) {
    std::ofstream out(flags.output);
    if (!out) throw DataError("cannot open output file: " + flags.output);
    write_benchmark_csv(report, out);
  }
  write_benchmark_table(report, std::cout);
  if (!flags.output.empty()) std::cout << "report written to " << flags.output << '\n';
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"robust semi-supervised Gaussian mixture classification"};
  app.set_version_flag("--version", kToolVersion);
  app.require_subcommand(1);

  FitFlags fit_flags;
  auto* cmd_fit = app.add_subcommand("fit", "fit a classifier and write a model artifact");
  add_fit_flags(cmd_fit, fit_flags, true);
  cmd_fit->add_option("-o,--output", fit_flags.output, "artifact path (JSON)");

  std::string predict_artifact, predict_input, predict_output;
  auto* cmd_predict = app.add_subcommand("predict", "classify rows with a saved artifact");
  cmd_predict->add_option("-a,--artifact", predict_artifact, "artifact path")->required();
  cmd_predict->add_option("-i,--input", predict_input, "dataset CSV")->required();
  cmd_predict->add_option("-o,--output", predict_output, "predictions CSV")->required();

  FitFlags select_flags;
  std::vector<std::string> select_models;
  std::vector<double> select_c_grid = {4.0, 20.0, 100.0};
  std::string select_output;
  auto* cmd_select = app.add_subcommand("select", "rank patterned models by RBIC");
  add_fit_flags(cmd_select, select_flags, false);
  cmd_select->add_option("--models", select_models, "candidate models (default: all 14)")
      ->delimiter(',');
  cmd_select->add_option("--c-grid", select_c_grid, "constraint constants to try")
      ->delimiter(',');
  cmd_select->add_option("-o,--output", select_output, "report CSV")->required();

  int sim_study = 1;
  double sim_eta = 0.0;
  std::size_t sim_n = 0, sim_m = 0;
  uint64_t sim_seed = 1;
  std::string sim_output;
  auto* cmd_sim = app.add_subcommand("simulate", "generate a study dataset");
  cmd_sim->add_option("--study", sim_study, "1 or 2")->required();
  cmd_sim->add_option("--eta", sim_eta, "contamination rate (study 1)");
  cmd_sim->add_option("--n", sim_n, "labelled size override");
  cmd_sim->add_option("--m", sim_m, "unlabelled size override");
  cmd_sim->add_option("--seed", sim_seed, "random seed");
  cmd_sim->add_option("-o,--output", sim_output, "dataset CSV")->required();

  BenchFlags bench_flags;
  auto* cmd_bench = app.add_subcommand("bench", "Monte Carlo benchmark of the study designs");
  cmd_bench->add_option("--study", bench_flags.study, "1 or 2");
  cmd_bench->add_option("--etas", bench_flags.etas, "contamination rates (study 1)")
      ->delimiter(',');
  cmd_bench->add_option("--methods", bench_flags.methods, "methods (default: all four)")
      ->delimiter(',');
  cmd_bench->add_option("--B", bench_flags.replicates, "Monte Carlo replicates");
  cmd_bench->add_option("--seed", bench_flags.seed, "master seed");
  cmd_bench->add_option("--model", bench_flags.model, "patterned model for every method");
  cmd_bench->add_option("--alpha-labelled", bench_flags.alpha_labelled,
                        "labelled trimming level for robust methods");
  cmd_bench->add_option("--alpha-unlabelled", bench_flags.alpha_unlabelled,
                        "unlabelled trimming level for rupclass");
  cmd_bench->add_option("--c", bench_flags.c, "eigenvalue-ratio constant");
  cmd_bench->add_option("--nsamp", bench_flags.nsamp, "initialization restarts");
  cmd_bench->add_option("--max-iter", bench_flags.max_iter, "EM iteration cap");
  cmd_bench->add_option("--threads", bench_flags.threads, "worker threads (0 = auto)");
  cmd_bench->add_option("-o,--output", bench_flags.output, "long-format report CSV");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitUsage;
  }

  try {
    if (cmd_fit->parsed()) return run_fit(fit_flags);
    if (cmd_predict->parsed()) return run_predict(predict_artifact, predict_input, predict_output);
    if (cmd_select->parsed())
      return run_select(select_flags, select_models, select_c_grid, select_output);
    if (cmd_sim->parsed())
      return run_simulate(sim_study, sim_eta, sim_n, sim_m, sim_seed, sim_output);
    if (cmd_bench->parsed()) return run_bench(bench_flags);
    std::cerr << "no subcommand given\n";
    return kExitUsage;
  } catch (const DataError& e) {
    std::cerr << "data error: " << e.what() << '\n';
    return kExitData;
  } catch (const InfeasibleConfigError& e) {
    std::cerr << "infeasible configuration: " << e.what() << '\n';
    return kExitInfeasible;
  } catch (const DegenerateFitError& e) {
    std::cerr << "degenerate fit: " << e.what() << '\n';
    return kExitDegenerate;
  } catch (const ConstraintConvergenceError& e) {
    std::cerr << "degenerate fit: " << e.what() << '\n';
    return kExitDegenerate;
  } catch (const std::invalid_argument& e) {
    std::cerr << "usage error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
}
