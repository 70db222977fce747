#include "crowdpair/predict_eval.h"

#include <cmath>
#include <sstream>

#include "crowdpair/assignment.h"
#include "crowdpair/parallel.h"

namespace crowdpair {
namespace {

MatrixXd column_distance(const MatrixXd& truth, const MatrixXd& estimated) {
  const Eigen::Index k = truth.cols();
  MatrixXd cost(k, k);
  for (Eigen::Index i = 0; i < k; ++i) {
    for (Eigen::Index j = 0; j < k; ++j) {
      cost(i, j) = (truth.col(i) - estimated.col(j)).squaredNorm();
    }
  }
  return cost;
}

int first_argmax(const VectorXd& v) {
  int best = 0;
  for (int k = 1; k < v.size(); ++k) {
    if (v(k) > v(best)) best = k;
  }
  return best;
}

}  // namespace

Prediction map_predict(const ModelEstimate& model, const LabelDataset& dataset,
                       double delta, int threads) {
  require_valid(dataset);
  if (model.n_classes() != dataset.n_classes() ||
      model.n_annotators() != dataset.n_annotators()) {
    throw Error("predict_eval: model dimensions do not match the dataset");
  }
  const int k = model.n_classes();
  const int n = dataset.n_items();
  std::vector<MatrixXd> log_a(model.n_annotators());
  for (int m = 0; m < model.n_annotators(); ++m) {
    log_a[m] = model.confusion(m).cwiseMax(delta).array().log().matrix();
  }
  const VectorXd& d = model.prior.probs();
  const VectorXd log_d = d.cwiseMax(delta).array().log().matrix();
  const int prior_label = first_argmax(d);
  const ItemView view = build_item_view(dataset);

  Prediction out;
  out.labels.assign(n, prior_label + 1);
  out.posteriors.resize(n, k);
  parallel_for(static_cast<std::size_t>(n), threads, [&](std::size_t idx) {
    const int item = static_cast<int>(idx);
    if (view.size(item) == 0) {
      out.posteriors.row(item) = d.transpose();
      return;
    }
    VectorXd score = log_d;
    for (std::size_t i = view.offsets[item]; i < view.offsets[item + 1]; ++i) {
      score += log_a[view.annotators[i]].row(view.labels[i]).transpose();
    }
    const double top = score.maxCoeff();
    if (!std::isfinite(top)) {
      out.posteriors.row(item) = d.transpose();
      return;
    }
    VectorXd post = (score.array() - top).exp().matrix();
    post /= post.sum();
    out.posteriors.row(item) = post.transpose();
    out.labels[item] = first_argmax(score) + 1;
  });
  return out;
}

double mse(const MatrixXd& estimated, const MatrixXd& truth) {
  if (estimated.rows() != truth.rows() || estimated.cols() != truth.cols() ||
      truth.rows() != truth.cols()) {
    throw Error("predict_eval: mse needs two K x K matrices of the same size");
  }
  const MatrixXd cost = column_distance(truth, estimated);
  const auto assignment = solve_assignment(cost);
  return assignment_cost(cost, assignment) / static_cast<double>(truth.cols());
}

ModelMse model_mse(const ModelEstimate& estimated, const ModelEstimate& truth,
                   PermutationMode mode) {
  if (estimated.n_classes() != truth.n_classes() ||
      estimated.n_annotators() != truth.n_annotators()) {
    throw Error("predict_eval: model_mse dimension mismatch");
  }
  const int m_total = truth.n_annotators();
  const int k = truth.n_classes();
  ModelMse out;
  out.per_annotator.resize(m_total);
  if (m_total == 0) return out;

  if (mode == PermutationMode::kPerAnnotator) {
    for (int m = 0; m < m_total; ++m) {
      out.per_annotator[m] = mse(estimated.confusion(m), truth.confusion(m));
    }
  } else {
    MatrixXd total = MatrixXd::Zero(k, k);
    for (int m = 0; m < m_total; ++m) {
      total += column_distance(truth.confusion(m), estimated.confusion(m));
    }
    // assignment[i] = estimated column matched to truth column i.
    const auto assignment = solve_assignment(total);
    out.permutation.assign(k, 0);
    for (int i = 0; i < k; ++i) out.permutation[assignment[i]] = i;
    for (int m = 0; m < m_total; ++m) {
      double sum = 0.0;
      for (int i = 0; i < k; ++i) {
        sum += (truth.confusion(m).col(i) - estimated.confusion(m).col(assignment[i]))
                   .squaredNorm();
      }
      out.per_annotator[m] = sum / k;
    }
  }
  double sum = 0.0;
  for (double v : out.per_annotator) sum += v;
  out.average = sum / m_total;
  return out;
}

ModelEstimate relabel_classes(const ModelEstimate& model,
                              const std::vector<int>& permutation) {
  const int k = model.n_classes();
  std::vector<bool> seen(k, false);
  for (int v : permutation) {
    if (static_cast<int>(permutation.size()) != k || v < 0 || v >= k || seen[v]) {
      throw Error("predict_eval: relabel_classes needs a permutation of 0..K-1");
    }
    seen[v] = true;
  }
  std::vector<ConfusionMatrix> confusions;
  confusions.reserve(model.n_annotators());
  for (int m = 0; m < model.n_annotators(); ++m) {
    MatrixXd a(k, k);
    for (int c = 0; c < k; ++c) a.col(permutation[c]) = model.confusion(m).col(c);
    confusions.emplace_back(a);
  }
  VectorXd d(k);
  for (int c = 0; c < k; ++c) d(permutation[c]) = model.prior.probs()(c);
  return ModelEstimate(std::move(confusions), PriorPMF(d));
}

double classification_error(const std::vector<std::optional<int>>& predicted,
                            const std::vector<int>& truth) {
  if (predicted.empty()) throw Error("predict_eval: no items to evaluate");
  std::size_t wrong = 0;
  for (std::size_t i = 0; i < predicted.size(); ++i) {
    if (i >= truth.size() || truth[i] < 1) {
      std::ostringstream msg;
      msg << "predict_eval: missing truth for item " << i + 1;
      throw Error(msg.str());
    }
    if (!predicted[i] || *predicted[i] != truth[i]) ++wrong;
  }
  return 100.0 * static_cast<double>(wrong) / static_cast<double>(predicted.size());
}

double classification_error(const std::vector<int>& predicted,
                            const std::vector<int>& truth) {
  std::vector<std::optional<int>> wrapped(predicted.begin(), predicted.end());
  return classification_error(wrapped, truth);
}

}  // namespace crowdpair
