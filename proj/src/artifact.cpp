#include "redda/artifact.hpp"

#include <fstream>
#include <limits>

#include <json.hpp>

#include "redda/errors.hpp"

namespace redda {

namespace {

using nlohmann::json;

json matrix_to_json(const Matrix& m) {
  json rows = json::array();
  for (std::size_t i = 0; i < m.rows(); ++i) {
    json row = json::array();
    for (std::size_t j = 0; j < m.cols(); ++j) row.push_back(m(i, j));
    rows.push_back(std::move(row));
  }
  return rows;
}

Matrix matrix_from_json(const json& j) {
  const std::size_t rows = j.size();
  const std::size_t cols = rows == 0 ? 0 : j.at(0).size();
  Matrix m(rows, cols);
  for (std::size_t i = 0; i < rows; ++i)
    for (std::size_t jj = 0; jj < cols; ++jj) m(i, jj) = j.at(i).at(jj).get<double>();
  return m;
}

// Infinity is not representable in JSON; the unconstrained case is stored
// as null.
json finite_or_null(double x) {
  if (std::isfinite(x)) return x;
  return nullptr;
}

double finite_or(const json& j, double fallback) {
  if (j.is_null()) return fallback;
  return j.get<double>();
}

}  // namespace

void save_artifact(const ModelArtifact& artifact, std::ostream& os) {
  const ModelFit& f = artifact.fit;
  json j;
  j["tool"] = "redda";
  j["version"] = artifact.version;
  j["mode"] = mode_name(artifact.mode);
  j["seed"] = artifact.seed;
  j["model"] = model_name(f.params.model);
  j["c"] = finite_or_null(f.params.c);
  j["alpha_labelled"] = f.mask.alpha_labelled;
  j["alpha_unlabelled"] = f.mask.alpha_unlabelled;
  j["class_names"] = artifact.class_names;
  j["tau"] = f.params.tau;
  json mus = json::array();
  for (const auto& mu : f.params.mu) mus.push_back(mu);
  j["mu"] = mus;
  json covs = json::array();
  for (const auto& cov : f.params.cov) {
    json cj;
    cj["lambda"] = cov.lambda;
    cj["shape"] = cov.shape;
    cj["orientation"] = matrix_to_json(cov.orientation);
    covs.push_back(std::move(cj));
  }
  j["covariances"] = covs;
  j["zeta"] = f.mask.zeta;
  j["phi"] = f.mask.phi;
  j["rbic"] = f.rbic;
  j["loglik_trajectory"] = f.loglik_trajectory;
  j["iterations"] = f.iterations;
  j["converged"] = f.converged;
  j["labels_unlabelled"] = f.labels_unlabelled;
  j["unlabelled_cutoff_logdensity"] =
      std::isnan(f.unlabelled_cutoff_logdensity) ? json(nullptr)
                                                 : json(f.unlabelled_cutoff_logdensity);
  os << j.dump(2) << '\n';
}

void save_artifact_file(const ModelArtifact& artifact, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot open artifact file for writing: " + path);
  save_artifact(artifact, out);
}

ModelArtifact load_artifact(std::istream& is, const std::string& origin) {
  json j;
  try {
    is >> j;
  } catch (const json::exception& e) {
    throw DataError(origin + ": malformed artifact: " + e.what());
  }
  try {
    ModelArtifact a;
    a.version = j.at("version").get<std::string>();
    a.mode = parse_mode(j.at("mode").get<std::string>());
    a.seed = j.at("seed").get<uint64_t>();
    a.class_names = j.at("class_names").get<std::vector<std::string>>();

    ModelFit& f = a.fit;
    f.mode = a.mode;
    f.params.model = parse_model(j.at("model").get<std::string>());
    f.params.c = finite_or(j.at("c"), std::numeric_limits<double>::infinity());
    f.params.tau = j.at("tau").get<std::vector<double>>();
    for (const auto& mu : j.at("mu")) f.params.mu.push_back(mu.get<std::vector<double>>());
    for (const auto& cj : j.at("covariances")) {
      CovarianceDecomposition cov;
      cov.lambda = cj.at("lambda").get<double>();
      cov.shape = cj.at("shape").get<std::vector<double>>();
      cov.orientation = matrix_from_json(cj.at("orientation"));
      f.params.cov.push_back(std::move(cov));
    }
    f.mask.alpha_labelled = j.at("alpha_labelled").get<double>();
    f.mask.alpha_unlabelled = j.at("alpha_unlabelled").get<double>();
    f.mask.zeta = j.at("zeta").get<std::vector<std::uint8_t>>();
    f.mask.phi = j.at("phi").get<std::vector<std::uint8_t>>();
    f.rbic = j.at("rbic").get<double>();
    f.loglik_trajectory = j.at("loglik_trajectory").get<std::vector<double>>();
    f.iterations = j.at("iterations").get<std::size_t>();
    f.converged = j.at("converged").get<bool>();
    f.labels_unlabelled = j.at("labels_unlabelled").get<std::vector<std::size_t>>();
    const auto& cutoff = j.at("unlabelled_cutoff_logdensity");
    f.unlabelled_cutoff_logdensity = cutoff.is_null()
                                         ? std::numeric_limits<double>::quiet_NaN()
                                         : cutoff.get<double>();
    for (std::uint8_t zi : f.mask.zeta) f.outlier_labelled.push_back(zi ? 0 : 1);
    for (std::uint8_t ph : f.mask.phi) f.outlier_unlabelled.push_back(ph ? 0 : 1);
    return a;
  } catch (const json::exception& e) {
    throw DataError(origin + ": artifact is missing fields: " + e.what());
  }
}

ModelArtifact load_artifact_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open artifact file: " + path);
  return load_artifact(in, path);
}

}  // namespace redda
