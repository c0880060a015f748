#pragma once

// Human-readable fit persistence: a JSON document holding the fitted
// parameters, configuration, masks and summaries. Numeric values round-trip
// exactly, so a reloaded artifact predicts bit-identically.

#include <iosfwd>
#include <string>
#include <vector>

#include "redda/trimmed_em.hpp"

namespace redda {

inline constexpr const char* kToolVersion = "0.1.0";

struct ModelArtifact {
  std::string version = kToolVersion;
  FitMode mode = FitMode::RUPCLASS;
  uint64_t seed = 0;
  std::vector<std::string> class_names;
  ModelFit fit;
};

void save_artifact(const ModelArtifact& artifact, std::ostream& os);
void save_artifact_file(const ModelArtifact& artifact, const std::string& path);

ModelArtifact load_artifact(std::istream& is, const std::string& origin);
ModelArtifact load_artifact_file(const std::string& path);

}  // namespace redda
