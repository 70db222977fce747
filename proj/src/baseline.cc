#include "crowdpair/baseline.h"

#include <cmath>
#include <limits>

#include "crowdpair/parallel.h"

namespace crowdpair {
namespace {

void check_model_matches(const ModelEstimate& model, const LabelDataset& dataset) {
  if (model.n_classes() != dataset.n_classes() ||
      model.n_annotators() != dataset.n_annotators()) {
    throw Error("baseline: model dimensions do not match the dataset");
  }
}

double log_sum_exp(const VectorXd& v) {
  const double top = v.maxCoeff();
  if (!std::isfinite(top)) return top;
  return top + std::log((v.array() - top).exp().sum());
}

// Fills posterior rows for labeled items and returns the log-likelihood.
double e_step(const ModelEstimate& model, const ItemView& view, int n_items,
              int threads, MatrixXd& posteriors) {
  const int k = model.n_classes();
  std::vector<MatrixXd> log_a(model.n_annotators());
  for (int m = 0; m < model.n_annotators(); ++m) {
    log_a[m] = model.confusion(m).array().log().matrix();
  }
  const VectorXd log_d = model.prior.probs().array().log().matrix();

  posteriors.setZero(n_items, k);
  std::vector<double> item_ll(n_items, 0.0);
  parallel_for(static_cast<std::size_t>(n_items), threads, [&](std::size_t n) {
    const int item = static_cast<int>(n);
    if (view.size(item) == 0) return;
    VectorXd score = log_d;
    for (std::size_t i = view.offsets[item]; i < view.offsets[item + 1]; ++i) {
      score += log_a[view.annotators[i]].row(view.labels[i]).transpose();
    }
    const double norm = log_sum_exp(score);
    item_ll[n] = norm;
    posteriors.row(item) = (score.array() - norm).exp().matrix().transpose();
  });
  double total = 0.0;
  for (double v : item_ll) total += v;
  return total;
}

ModelEstimate m_step(const MatrixXd& posteriors, const ItemView& view,
                     int n_annotators) {
  const Eigen::Index k = posteriors.cols();
  std::vector<MatrixXd> counts(n_annotators, MatrixXd::Zero(k, k));
  for (Eigen::Index item = 0; item < posteriors.rows(); ++item) {
    for (std::size_t i = view.offsets[item]; i < view.offsets[item + 1]; ++i) {
      counts[view.annotators[i]].row(view.labels[i]) += posteriors.row(item);
    }
  }
  std::vector<ConfusionMatrix> confusions;
  confusions.reserve(n_annotators);
  for (auto& c : counts) {
    for (Eigen::Index col = 0; col < k; ++col) {
      const double mass = c.col(col).sum();
      if (mass > 0.0) {
        c.col(col) /= mass;
      } else {
        c.col(col).setConstant(1.0 / static_cast<double>(k));
      }
    }
    confusions.emplace_back(std::move(c));
  }
  VectorXd d = posteriors.colwise().sum().transpose();
  const double total = d.sum();
  d = total > 0.0 ? VectorXd(d / total) : VectorXd::Constant(k, 1.0 / k);
  return ModelEstimate(std::move(confusions), PriorPMF(std::move(d)));
}

}  // namespace

std::vector<std::optional<int>> majority_vote(const LabelDataset& dataset) {
  require_valid(dataset);
  const int k = dataset.n_classes();
  const ItemView view = build_item_view(dataset);
  std::vector<std::optional<int>> out(dataset.n_items());
  std::vector<int> tally(k);
  for (int item = 0; item < dataset.n_items(); ++item) {
    if (view.size(item) == 0) continue;
    std::fill(tally.begin(), tally.end(), 0);
    for (std::size_t i = view.offsets[item]; i < view.offsets[item + 1]; ++i) {
      ++tally[view.labels[i]];
    }
    int best = 0;
    for (int c = 1; c < k; ++c) {
      if (tally[c] > tally[best]) best = c;
    }
    out[item] = best + 1;
  }
  return out;
}

double log_likelihood(const ModelEstimate& model, const LabelDataset& dataset) {
  require_valid(dataset);
  check_model_matches(model, dataset);
  MatrixXd posteriors;
  return e_step(model, build_item_view(dataset), dataset.n_items(), 1, posteriors);
}

EmResult em_fit(const LabelDataset& dataset, const ModelEstimate& init,
                const EmConfig& config) {
  require_valid(dataset);
  check_model_matches(init, dataset);
  if (dataset.responses().empty()) {
    throw Error("baseline: em_fit needs at least one labeled item");
  }
  if (config.max_iterations < 0 || !(config.tolerance >= 0.0) ||
      !(config.delta > 0.0)) {
    throw Error("baseline: invalid EM configuration");
  }
  const ItemView view = build_item_view(dataset);
  const int n = dataset.n_items();

  EmResult result{floor_model(init, config.delta), MatrixXd(), {}, 0};
  double ll = e_step(result.model, view, n, config.threads, result.posteriors);
  result.log_likelihood.push_back(ll);
  for (int iter = 0; iter < config.max_iterations; ++iter) {
    result.model = m_step(result.posteriors, view, dataset.n_annotators());
    const double next = e_step(result.model, view, n, config.threads, result.posteriors);
    result.log_likelihood.push_back(next);
    result.iterations = iter + 1;
    const bool small_change = next - ll < config.tolerance * std::abs(ll);
    ll = next;
    if (small_change) break;
  }
  return result;
}

ModelEstimate mv_initialize(const LabelDataset& dataset, double delta) {
  const auto votes = majority_vote(dataset);
  const int k = dataset.n_classes();
  const ItemView view = build_item_view(dataset);
  MatrixXd posteriors = MatrixXd::Zero(dataset.n_items(), k);
  for (int item = 0; item < dataset.n_items(); ++item) {
    if (votes[item]) posteriors(item, *votes[item] - 1) = 1.0;
  }
  // Items without a vote contribute no rows, so the M-step only counts voted
  // items.
  return floor_model(m_step(posteriors, view, dataset.n_annotators()), delta);
}

}  // namespace crowdpair
