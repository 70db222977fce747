#include "crowdpair/io.h"

#include <algorithm>
#include <charconv>
#include <cstdlib>
#include <fstream>
#include <iomanip>
#include <sstream>

#include <json.hpp>

namespace crowdpair {
namespace {

using nlohmann::json;

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> fields;
  std::string field;
  std::istringstream ss(line);
  while (std::getline(ss, field, ',')) fields.push_back(trim(field));
  if (!line.empty() && line.back() == ',') fields.emplace_back();
  return fields;
}

[[noreturn]] void fail(const std::string& where, std::size_t line,
                       const std::string& what) {
  std::ostringstream msg;
  msg << "io: " << where << " line " << line << ": " << what;
  throw Error(msg.str());
}

int parse_int(const std::string& field, const std::string& where,
              std::size_t line) {
  int value = 0;
  const char* begin = field.data();
  const char* end = begin + field.size();
  auto [ptr, ec] = std::from_chars(begin, end, value);
  if (field.empty() || ec != std::errc() || ptr != end) {
    fail(where, line, "expected integer, got '" + field + "'");
  }
  return value;
}

double parse_real(const std::string& field, const std::string& where,
                  std::size_t line) {
  char* end = nullptr;
  const double value = std::strtod(field.c_str(), &end);
  if (field.empty() || end != field.c_str() + field.size()) {
    fail(where, line, "expected number, got '" + field + "'");
  }
  return value;
}

// Reads the header and returns the remaining non-blank lines with their
// 1-based line numbers.
std::vector<std::pair<std::size_t, std::vector<std::string>>> read_csv(
    std::istream& in, const std::string& where,
    const std::vector<std::string>& expected_prefix) {
  std::string line;
  std::size_t line_no = 0;
  bool have_header = false;
  std::vector<std::pair<std::size_t, std::vector<std::string>>> rows;
  while (std::getline(in, line)) {
    ++line_no;
    if (line_no == 1 && line.size() >= 3 &&
        line.compare(0, 3, "\xEF\xBB\xBF") == 0) {
      line.erase(0, 3);
    }
    if (trim(line).empty()) continue;
    auto fields = split_csv(line);
    if (!have_header) {
      if (fields.size() < expected_prefix.size() ||
          !std::equal(expected_prefix.begin(), expected_prefix.end(),
                      fields.begin())) {
        std::string want;
        for (const auto& f : expected_prefix) want += (want.empty() ? "" : ",") + f;
        fail(where, line_no, "expected header '" + want + "'");
      }
      have_header = true;
      continue;
    }
    rows.emplace_back(line_no, std::move(fields));
  }
  if (!have_header) fail(where, line_no, "missing header");
  return rows;
}

std::ifstream open_in(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error("io: cannot open '" + path + "' for reading");
  return in;
}

std::ofstream open_out(const std::string& path) {
  std::ofstream out(path);
  if (!out) throw Error("io: cannot open '" + path + "' for writing");
  out << std::setprecision(17);
  return out;
}

}  // namespace

LabelDataset read_dataset(std::istream& in, const DatasetShape& shape) {
  const std::string where = "dataset";
  if (shape.n_classes < 2) throw Error("io: dataset needs K >= 2");
  auto rows = read_csv(in, where, {"item", "annotator", "label"});
  std::vector<Response> responses;
  responses.reserve(rows.size());
  int max_item = 0;
  int max_annotator = 0;
  for (const auto& [line, fields] : rows) {
    if (fields.size() != 3) fail(where, line, "expected 3 fields");
    Response r{parse_int(fields[0], where, line), parse_int(fields[1], where, line),
               parse_int(fields[2], where, line)};
    if (r.label == 0) {
      fail(where, line, "label 0 is reserved for absence and is never written");
    }
    max_item = std::max(max_item, r.item);
    max_annotator = std::max(max_annotator, r.annotator);
    responses.push_back(r);
  }
  const int n = shape.n_items > 0 ? shape.n_items : max_item;
  const int m = shape.n_annotators > 0 ? shape.n_annotators : max_annotator;
  LabelDataset dataset(n, m, shape.n_classes, std::move(responses));
  if (auto issue = validate_dataset(dataset)) {
    throw Error("io: dataset: " + issue->message);
  }
  return dataset;
}

LabelDataset load_dataset(const std::string& path, const DatasetShape& shape) {
  auto in = open_in(path);
  return read_dataset(in, shape);
}

void write_dataset(std::ostream& out, const LabelDataset& dataset) {
  out << "item,annotator,label\n";
  for (const Response& r : dataset.responses()) {
    out << r.item << ',' << r.annotator << ',' << r.label << '\n';
  }
}

void save_dataset(const LabelDataset& dataset, const std::string& path) {
  auto out = open_out(path);
  write_dataset(out, dataset);
}

std::vector<int> load_truth_labels(const std::string& path) {
  const std::string where = "truth";
  auto in = open_in(path);
  auto rows = read_csv(in, where, {"item", "label"});
  std::vector<int> labels;
  for (const auto& [line, fields] : rows) {
    if (fields.size() != 2) fail(where, line, "expected 2 fields");
    const int item = parse_int(fields[0], where, line);
    const int label = parse_int(fields[1], where, line);
    if (item < 1) fail(where, line, "item index must be >= 1");
    if (label < 1) fail(where, line, "label must be >= 1");
    if (static_cast<std::size_t>(item) > labels.size()) labels.resize(item, 0);
    if (labels[item - 1] != 0) fail(where, line, "duplicate item");
    labels[item - 1] = label;
  }
  return labels;
}

void save_truth_labels(const std::vector<int>& labels, const std::string& path) {
  auto out = open_out(path);
  out << "item,label\n";
  for (std::size_t i = 0; i < labels.size(); ++i) {
    out << i + 1 << ',' << labels[i] << '\n';
  }
}

std::string model_to_json(const ModelEstimate& model) {
  const int k = model.n_classes();
  json doc;
  doc["k"] = k;
  doc["m"] = model.n_annotators();
  doc["prior"] = std::vector<double>(model.prior.probs().data(),
                                     model.prior.probs().data() + k);
  json confusions = json::array();
  for (const auto& a : model.confusions) {
    json columns = json::array();
    for (int col = 0; col < k; ++col) {
      std::vector<double> column(k);
      for (int row = 0; row < k; ++row) column[row] = a(row, col);
      columns.push_back(column);
    }
    confusions.push_back(columns);
  }
  doc["confusions"] = confusions;
  return doc.dump(2) + "\n";
}

ModelEstimate model_from_json(const std::string& text) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::exception& e) {
    throw Error(std::string("io: malformed model file: ") + e.what());
  }
  try {
    const int k = doc.at("k").get<int>();
    const int m = doc.at("m").get<int>();
    if (k < 1 || m < 0) throw Error("io: model: bad dimensions");
    const auto prior = doc.at("prior").get<std::vector<double>>();
    if (static_cast<int>(prior.size()) != k) {
      throw Error("io: model: prior length does not match k");
    }
    const auto& confusions = doc.at("confusions");
    if (!confusions.is_array() || static_cast<int>(confusions.size()) != m) {
      throw Error("io: model: number of confusion matrices does not match m");
    }
    std::vector<ConfusionMatrix> matrices;
    matrices.reserve(m);
    for (int a = 0; a < m; ++a) {
      const auto columns = confusions[a].get<std::vector<std::vector<double>>>();
      if (static_cast<int>(columns.size()) != k) {
        throw Error("io: model: confusion matrix " + std::to_string(a + 1) +
                    " does not have k columns");
      }
      MatrixXd entries(k, k);
      for (int col = 0; col < k; ++col) {
        if (static_cast<int>(columns[col].size()) != k) {
          throw Error("io: model: confusion matrix " + std::to_string(a + 1) +
                      " column " + std::to_string(col + 1) +
                      " does not have k entries");
        }
        for (int row = 0; row < k; ++row) entries(row, col) = columns[col][row];
      }
      matrices.emplace_back(std::move(entries));
    }
    return ModelEstimate(std::move(matrices),
                         PriorPMF(Eigen::Map<const VectorXd>(prior.data(), k)));
  } catch (const json::exception& e) {
    throw Error(std::string("io: malformed model file: ") + e.what());
  }
}

void save_model(const ModelEstimate& model, const std::string& path) {
  auto out = open_out(path);
  out << model_to_json(model);
  if (!out) throw Error("io: failed writing '" + path + "'");
}

ModelEstimate load_model(const std::string& path) {
  auto in = open_in(path);
  std::stringstream buffer;
  buffer << in.rdbuf();
  return model_from_json(buffer.str());
}

void save_predictions(const PredictionTable& table, const std::string& path) {
  auto out = open_out(path);
  out << "item,label";
  for (Eigen::Index k = 0; k < table.posteriors.cols(); ++k) {
    out << ",posterior_" << k + 1;
  }
  out << '\n';
  for (std::size_t i = 0; i < table.items.size(); ++i) {
    out << table.items[i] << ',' << table.labels[i];
    for (Eigen::Index k = 0; k < table.posteriors.cols(); ++k) {
      out << ',' << table.posteriors(static_cast<Eigen::Index>(i), k);
    }
    out << '\n';
  }
}

PredictionTable load_predictions(const std::string& path) {
  const std::string where = "predictions";
  auto in = open_in(path);
  auto rows = read_csv(in, where, {"item", "label"});
  PredictionTable table;
  const std::size_t width = rows.empty() ? 2 : rows.front().second.size();
  if (width < 2) fail(where, 1, "expected at least 2 fields");
  table.posteriors.resize(static_cast<Eigen::Index>(rows.size()),
                          static_cast<Eigen::Index>(width - 2));
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const auto& [line, fields] = rows[i];
    if (fields.size() != width) fail(where, line, "inconsistent field count");
    table.items.push_back(parse_int(fields[0], where, line));
    table.labels.push_back(parse_int(fields[1], where, line));
    for (std::size_t k = 2; k < width; ++k) {
      table.posteriors(static_cast<Eigen::Index>(i),
                       static_cast<Eigen::Index>(k - 2)) =
          parse_real(fields[k], where, line);
    }
  }
  return table;
}

}  // namespace crowdpair
