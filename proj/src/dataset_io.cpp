#include "redda/dataset_io.hpp"

#include <algorithm>
#include <charconv>
#include <cstdio>
#include <fstream>
#include <istream>
#include <map>
#include <ostream>
#include <sstream>

#include "redda/errors.hpp"

namespace redda {

namespace {

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::string cur;
  for (char ch : line) {
    if (ch == ',') {
      out.push_back(cur);
      cur.clear();
    } else if (ch != '\r') {
      cur += ch;
    }
  }
  out.push_back(cur);
  return out;
}

double parse_number(const std::string& tok, std::size_t row, const std::string& origin) {
  double value = 0.0;
  const char* begin = tok.data();
  const char* end = tok.data() + tok.size();
  auto [ptr, ec] = std::from_chars(begin, end, value);
  if (ec != std::errc() || ptr != end)
    throw DataError(origin + ": row " + std::to_string(row) + ": cannot parse number '" + tok +
                    "'");
  return value;
}

}  // namespace

std::string format_double(double x) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", x);
  return buf;
}

Matrix Dataset::all_features() const {
  Matrix m(rows(), p);
  for (std::size_t i = 0; i < labelled_rows.size(); ++i)
    for (std::size_t j = 0; j < p; ++j) m(labelled_rows[i], j) = labelled.x(i, j);
  for (std::size_t i = 0; i < unlabelled_rows.size(); ++i)
    for (std::size_t j = 0; j < p; ++j) m(unlabelled_rows[i], j) = unlabelled.y(i, j);
  return m;
}

Dataset read_dataset(std::istream& is, const std::string& origin) {
  std::string line;
  if (!std::getline(is, line)) throw DataError(origin + ": empty file");
  const auto header = split_csv_line(line);

  // Feature columns are x1..xp in numeric order; their header positions may
  // be arbitrary. A `label` column is mandatory.
  std::map<std::size_t, std::size_t> feature_cols;  // feature index -> column
  std::ptrdiff_t label_col = -1, true_class_col = -1, contaminated_col = -1;
  for (std::size_t c = 0; c < header.size(); ++c) {
    const std::string& h = header[c];
    if (h == "label") {
      label_col = static_cast<std::ptrdiff_t>(c);
    } else if (h == "true_class") {
      true_class_col = static_cast<std::ptrdiff_t>(c);
    } else if (h == "contaminated") {
      contaminated_col = static_cast<std::ptrdiff_t>(c);
    } else if (h.size() >= 2 && h[0] == 'x') {
      bool digits = true;
      for (std::size_t k = 1; k < h.size(); ++k) digits = digits && std::isdigit(h[k]);
      if (digits) {
        const std::size_t idx = std::stoul(h.substr(1));
        if (idx == 0) throw DataError(origin + ": feature columns start at x1");
        feature_cols[idx - 1] = c;
      }
    }
  }
  if (label_col < 0) throw DataError(origin + ": no `label` column in header");
  if (feature_cols.empty()) throw DataError(origin + ": no feature columns x1..xp in header");
  const std::size_t p = feature_cols.rbegin()->first + 1;
  for (std::size_t j = 0; j < p; ++j)
    if (!feature_cols.count(j))
      throw DataError(origin + ": feature column x" + std::to_string(j + 1) + " missing");

  struct Row {
    std::vector<double> x;
    std::string label;
    std::string true_class;
    std::uint8_t contaminated = 0;
  };
  std::vector<Row> rows;
  std::size_t lineno = 1;
  while (std::getline(is, line)) {
    ++lineno;
    if (line.empty()) continue;
    const auto tok = split_csv_line(line);
    if (tok.size() != header.size())
      throw DataError(origin + ": row " + std::to_string(lineno) + " has " +
                      std::to_string(tok.size()) + " columns, header has " +
                      std::to_string(header.size()));
    Row r;
    r.x.resize(p);
    for (std::size_t j = 0; j < p; ++j)
      r.x[j] = parse_number(tok[feature_cols[j]], lineno, origin);
    r.label = tok[static_cast<std::size_t>(label_col)];
    if (true_class_col >= 0) r.true_class = tok[static_cast<std::size_t>(true_class_col)];
    if (contaminated_col >= 0)
      r.contaminated = tok[static_cast<std::size_t>(contaminated_col)] == "1" ? 1 : 0;
    rows.push_back(std::move(r));
  }
  if (rows.empty()) throw DataError(origin + ": no data rows");

  std::vector<std::string> alphabet;
  for (const auto& r : rows)
    if (r.label != "?") alphabet.push_back(r.label);
  std::sort(alphabet.begin(), alphabet.end());
  alphabet.erase(std::unique(alphabet.begin(), alphabet.end()), alphabet.end());

  auto class_of = [&](const std::string& name) {
    const auto it = std::lower_bound(alphabet.begin(), alphabet.end(), name);
    return static_cast<std::size_t>(it - alphabet.begin());
  };

  Dataset ds;
  ds.p = p;
  ds.class_names = alphabet;
  std::size_t n_lab = 0, n_unl = 0;
  for (const auto& r : rows) (r.label == "?" ? n_unl : n_lab)++;
  ds.labelled.x = Matrix(n_lab, p);
  ds.labelled.n_groups = alphabet.size();
  ds.unlabelled.y = Matrix(n_unl, p);

  std::size_t il = 0, iu = 0;
  const bool has_truth = true_class_col >= 0;
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const Row& r = rows[i];
    std::size_t truth = kNoTrueClass;
    if (has_truth && !r.true_class.empty() && r.true_class != "?") {
      const std::size_t k = class_of(r.true_class);
      if (k < alphabet.size() && alphabet[k] == r.true_class) truth = k;
    }
    if (r.label == "?") {
      for (std::size_t j = 0; j < p; ++j) ds.unlabelled.y(iu, j) = r.x[j];
      ds.unlabelled_rows.push_back(i);
      if (has_truth) ds.true_class_unlabelled.push_back(truth);
      ++iu;
    } else {
      for (std::size_t j = 0; j < p; ++j) ds.labelled.x(il, j) = r.x[j];
      ds.labelled.labels.push_back(class_of(r.label));
      ds.labelled_rows.push_back(i);
      if (has_truth) ds.true_class_labelled.push_back(truth);
      if (contaminated_col >= 0) ds.contaminated_labelled.push_back(r.contaminated);
      ++il;
    }
  }
  return ds;
}

Dataset read_dataset_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open dataset file: " + path);
  return read_dataset(in, path);
}

void write_generated_csv(const GeneratedData& data, std::ostream& os) {
  const std::size_t p = data.labelled.dim();
  os << "id";
  for (std::size_t j = 0; j < p; ++j) os << ",x" << (j + 1);
  os << ",label,set,true_class,contaminated\n";
  std::size_t id = 0;
  for (std::size_t i = 0; i < data.labelled.size(); ++i) {
    os << ++id;
    for (std::size_t j = 0; j < p; ++j) os << ',' << format_double(data.labelled.x(i, j));
    os << ',' << (data.labelled.labels[i] + 1) << ",labelled,";
    if (data.true_class_labelled[i] == kNoTrueClass)
      os << '?';
    else
      os << (data.true_class_labelled[i] + 1);
    os << ',' << (data.label_noise[i] || data.attribute_noise[i] ? 1 : 0) << '\n';
  }
  for (std::size_t u = 0; u < data.unlabelled.size(); ++u) {
    os << ++id;
    for (std::size_t j = 0; j < p; ++j) os << ',' << format_double(data.unlabelled.y(u, j));
    os << ",?,unlabelled," << (data.true_class_unlabelled[u] + 1) << ",0\n";
  }
}

}  // namespace redda
