// File formats.
//
//   dataset CSV      header "item,annotator,label"; one present response per
//                    line; 1-based integers; absent responses are not written.
//   truth CSV        header "item,label".
//   predictions CSV  header "item,label,posterior_1,...,posterior_K".
//   model file       JSON document {"k": K, "m": M, "prior": [K reals],
//                    "confusions": [M x K x K reals]} where confusions[m][k]
//                    is column k of the confusion matrix of annotator m+1.

#ifndef CROWDPAIR_IO_H_
#define CROWDPAIR_IO_H_

#include <istream>
#include <ostream>
#include <string>
#include <vector>

#include "crowdpair/data_model.h"

namespace crowdpair {

struct DatasetShape {
  int n_classes = 0;
  // Zero means "infer from the largest index present".
  int n_items = 0;
  int n_annotators = 0;
};

LabelDataset read_dataset(std::istream& in, const DatasetShape& shape);
LabelDataset load_dataset(const std::string& path, const DatasetShape& shape);
void write_dataset(std::ostream& out, const LabelDataset& dataset);
void save_dataset(const LabelDataset& dataset, const std::string& path);

// Labels are 1-based; index i holds the label of item i+1.
std::vector<int> load_truth_labels(const std::string& path);
void save_truth_labels(const std::vector<int>& labels, const std::string& path);

std::string model_to_json(const ModelEstimate& model);
ModelEstimate model_from_json(const std::string& text);
void save_model(const ModelEstimate& model, const std::string& path);
ModelEstimate load_model(const std::string& path);

struct PredictionTable {
  std::vector<int> items;   // 1-based
  std::vector<int> labels;  // 1-based
  MatrixXd posteriors;      // one row per entry of items; may have 0 columns
};

void save_predictions(const PredictionTable& table, const std::string& path);
PredictionTable load_predictions(const std::string& path);

}  // namespace crowdpair

#endif  // CROWDPAIR_IO_H_
