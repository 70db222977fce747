#include "crowdpair/data_model.h"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>
#include <utility>

namespace crowdpair {

LabelDataset::LabelDataset(int n_items, int n_annotators, int n_classes,
                           std::vector<Response> responses)
    : n_items_(n_items),
      n_annotators_(n_annotators),
      n_classes_(n_classes),
      responses_(std::move(responses)) {}

std::optional<DatasetIssue> validate_dataset(const LabelDataset& dataset) {
  using Kind = DatasetIssue::Kind;
  if (dataset.n_items() < 1 || dataset.n_annotators() < 1 ||
      dataset.n_classes() < 2) {
    std::ostringstream msg;
    msg << "bad dimensions: N=" << dataset.n_items()
        << " M=" << dataset.n_annotators() << " K=" << dataset.n_classes()
        << " (need N>=1, M>=1, K>=2)";
    return DatasetIssue{Kind::kBadDimensions, 0, msg.str()};
  }

  const auto& responses = dataset.responses();
  for (std::size_t row = 0; row < responses.size(); ++row) {
    const Response& r = responses[row];
    std::ostringstream msg;
    if (r.item < 1 || r.item > dataset.n_items()) {
      msg << "item index out of range at row " << row + 1 << ": item "
          << r.item << " not in 1.." << dataset.n_items();
      return DatasetIssue{Kind::kItemOutOfRange, row, msg.str()};
    }
    if (r.annotator < 1 || r.annotator > dataset.n_annotators()) {
      msg << "annotator index out of range at row " << row + 1
          << ": annotator " << r.annotator << " not in 1.."
          << dataset.n_annotators();
      return DatasetIssue{Kind::kAnnotatorOutOfRange, row, msg.str()};
    }
    if (r.label < 1 || r.label > dataset.n_classes()) {
      msg << "label out of range at row " << row + 1 << ": label " << r.label
          << " not in 1.." << dataset.n_classes();
      return DatasetIssue{Kind::kLabelOutOfRange, row, msg.str()};
    }
  }

  // Duplicates: sort row indices by (item, annotator) and report the later
  // row of the first colliding pair in file order.
  std::vector<std::size_t> order(responses.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) {
                     const Response& ra = responses[a];
                     const Response& rb = responses[b];
                     return std::pair(ra.item, ra.annotator) <
                            std::pair(rb.item, rb.annotator);
                   });
  std::optional<std::size_t> first_dup;
  for (std::size_t i = 1; i < order.size(); ++i) {
    const Response& a = responses[order[i - 1]];
    const Response& b = responses[order[i]];
    if (a.item == b.item && a.annotator == b.annotator) {
      if (!first_dup || order[i] < *first_dup) first_dup = order[i];
    }
  }
  if (first_dup) {
    const Response& r = responses[*first_dup];
    std::ostringstream msg;
    msg << "duplicate response at row " << *first_dup + 1 << ": item "
        << r.item << ", annotator " << r.annotator;
    return DatasetIssue{Kind::kDuplicateResponse, *first_dup, msg.str()};
  }
  return std::nullopt;
}

void require_valid(const LabelDataset& dataset) {
  if (auto issue = validate_dataset(dataset)) {
    throw Error("data_model: " + issue->message);
  }
}

ItemView build_item_view(const LabelDataset& dataset) {
  const int n = dataset.n_items();
  ItemView view;
  view.offsets.assign(n + 1, 0);
  for (const Response& r : dataset.responses()) ++view.offsets[r.item];
  std::partial_sum(view.offsets.begin(), view.offsets.end(),
                   view.offsets.begin());

  const std::size_t total = dataset.responses().size();
  view.annotators.resize(total);
  view.labels.resize(total);
  std::vector<std::size_t> cursor(view.offsets.begin(), view.offsets.end() - 1);
  for (const Response& r : dataset.responses()) {
    const std::size_t at = cursor[r.item - 1]++;
    view.annotators[at] = r.annotator - 1;
    view.labels[at] = r.label - 1;
  }
  for (int item = 0; item < n; ++item) {
    const std::size_t lo = view.offsets[item];
    const std::size_t hi = view.offsets[item + 1];
    std::vector<std::pair<int, int>> entries;
    entries.reserve(hi - lo);
    for (std::size_t i = lo; i < hi; ++i) {
      entries.emplace_back(view.annotators[i], view.labels[i]);
    }
    std::sort(entries.begin(), entries.end());
    for (std::size_t i = lo; i < hi; ++i) {
      view.annotators[i] = entries[i - lo].first;
      view.labels[i] = entries[i - lo].second;
    }
  }
  return view;
}

ConfusionMatrix::ConfusionMatrix(MatrixXd entries) : entries_(std::move(entries)) {
  if (entries_.rows() != entries_.cols() || entries_.rows() < 1) {
    throw Error("data_model: confusion matrix must be square and non-empty");
  }
  if (!entries_.allFinite() || entries_.minCoeff() < 0.0) {
    throw Error("data_model: confusion matrix has negative or non-finite entries");
  }
  for (Eigen::Index k = 0; k < entries_.cols(); ++k) {
    const double sum = entries_.col(k).sum();
    if (std::abs(sum - 1.0) > kSimplexTolerance) {
      std::ostringstream msg;
      msg << "data_model: confusion matrix column " << k + 1 << " sums to "
          << sum;
      throw Error(msg.str());
    }
  }
}

ConfusionMatrix ConfusionMatrix::identity(int k) {
  return ConfusionMatrix(MatrixXd::Identity(k, k));
}

PriorPMF::PriorPMF(VectorXd probs) : probs_(std::move(probs)) {
  if (probs_.size() < 1) throw Error("data_model: empty prior");
  if (!probs_.allFinite() || probs_.minCoeff() < 0.0) {
    throw Error("data_model: prior has negative or non-finite entries");
  }
  if (std::abs(probs_.sum() - 1.0) > kSimplexTolerance) {
    std::ostringstream msg;
    msg << "data_model: prior sums to " << probs_.sum();
    throw Error(msg.str());
  }
}

PriorPMF PriorPMF::uniform(int k) {
  return PriorPMF(VectorXd::Constant(k, 1.0 / k));
}

ModelEstimate::ModelEstimate(std::vector<ConfusionMatrix> confusions_in,
                             PriorPMF prior_in)
    : confusions(std::move(confusions_in)), prior(std::move(prior_in)) {
  for (const auto& a : confusions) {
    if (a.n_classes() != prior.n_classes()) {
      throw Error("data_model: confusion matrix size does not match prior length");
    }
  }
}

VectorXd clamp_and_normalize(const VectorXd& v) {
  VectorXd out = v.cwiseMax(0.0);
  const double sum = out.sum();
  if (!(sum > 0.0)) return VectorXd::Constant(v.size(), 1.0 / v.size());
  return out / sum;
}

VectorXd floor_and_normalize(const VectorXd& v, double floor) {
  VectorXd out = v.cwiseMax(floor);
  return out / out.sum();
}

MatrixXd clamp_and_normalize_columns(const MatrixXd& a) {
  MatrixXd out(a.rows(), a.cols());
  for (Eigen::Index k = 0; k < a.cols(); ++k) {
    out.col(k) = clamp_and_normalize(a.col(k));
  }
  return out;
}

MatrixXd floor_and_normalize_columns(const MatrixXd& a, double floor) {
  MatrixXd out(a.rows(), a.cols());
  for (Eigen::Index k = 0; k < a.cols(); ++k) {
    out.col(k) = floor_and_normalize(a.col(k), floor);
  }
  return out;
}

ModelEstimate floor_model(const ModelEstimate& model, double floor) {
  std::vector<ConfusionMatrix> confusions;
  confusions.reserve(model.confusions.size());
  for (const auto& a : model.confusions) {
    confusions.emplace_back(floor_and_normalize_columns(a.entries(), floor));
  }
  return ModelEstimate(std::move(confusions),
                       PriorPMF(floor_and_normalize(model.prior.probs(), floor)));
}

}  // namespace crowdpair
