#pragma once

// Delimited-text dataset format: header row, feature columns named x1..xp,
// a `label` column where unlabelled units carry the sentinel "?", and
// optional bookkeeping columns (set, true_class, contaminated) that the
// fitting commands ignore.

#include <iosfwd>
#include <string>
#include <vector>

#include "redda/simulation.hpp"
#include "redda/trimmed_em.hpp"

namespace redda {

struct Dataset {
  std::size_t p = 0;
  LabelledData labelled;
  UnlabelledData unlabelled;
  std::vector<std::string> class_names;       // sorted label alphabet
  std::vector<std::size_t> labelled_rows;     // original row index per labelled unit
  std::vector<std::size_t> unlabelled_rows;

  // Bookkeeping parsed when present (empty otherwise).
  std::vector<std::size_t> true_class_labelled;
  std::vector<std::size_t> true_class_unlabelled;
  std::vector<std::uint8_t> contaminated_labelled;

  std::size_t rows() const { return labelled.size() + unlabelled.size(); }
  Matrix all_features() const;  // original row order
};

Dataset read_dataset(std::istream& is, const std::string& origin);
Dataset read_dataset_file(const std::string& path);

// Serializes a generated study replicate with bookkeeping columns.
void write_generated_csv(const GeneratedData& data, std::ostream& os);

// 17-significant-digit float formatting used by every CSV writer.
std::string format_double(double x);

}  // namespace redda
