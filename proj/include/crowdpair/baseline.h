// Majority voting and Dawid-Skene expectation maximization.

#ifndef CROWDPAIR_BASELINE_H_
#define CROWDPAIR_BASELINE_H_

#include <optional>
#include <vector>

#include "crowdpair/data_model.h"

namespace crowdpair {

// Modal response per item (1-based label, lowest class wins ties); nullopt
// for items nobody labeled.
std::vector<std::optional<int>> majority_vote(const LabelDataset& dataset);

struct EmConfig {
  int max_iterations = 100;
  double tolerance = 1e-7;  // relative log-likelihood improvement
  double delta = 1e-6;      // floor applied to the initial model
  int threads = 1;
};

struct EmResult {
  ModelEstimate model;
  MatrixXd posteriors;                 // N x K; zero rows for unlabeled items
  std::vector<double> log_likelihood;  // at the floored init, then per M-step
  int iterations = 0;
};

// Observed-data log-likelihood sum_n log sum_k d(k) prod_m A_m(x_mn, k) over
// labeled items.
double log_likelihood(const ModelEstimate& model, const LabelDataset& dataset);

EmResult em_fit(const LabelDataset& dataset, const ModelEstimate& init,
                const EmConfig& config = {});

// Confusions and prior counted against majority-vote labels, floored at delta.
// Unlabeled items are skipped; a column without mass becomes uniform.
ModelEstimate mv_initialize(const LabelDataset& dataset, double delta = 1e-6);

}  // namespace crowdpair

#endif  // CROWDPAIR_BASELINE_H_
