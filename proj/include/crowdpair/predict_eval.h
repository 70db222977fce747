// MAP label prediction and evaluation metrics.

#ifndef CROWDPAIR_PREDICT_EVAL_H_
#define CROWDPAIR_PREDICT_EVAL_H_

#include <optional>
#include <vector>

#include "crowdpair/data_model.h"

namespace crowdpair {

struct Prediction {
  std::vector<int> labels;  // 1-based, one per item
  MatrixXd posteriors;      // N x K
};

// posterior(k) ∝ d(k) prod_m A_m(x_m, k), evaluated in the log domain with
// model entries floored at delta. Ties go to the lowest class; items without
// responses (or with no posterior mass) take argmax d.
Prediction map_predict(const ModelEstimate& model, const LabelDataset& dataset,
                       double delta = 1e-6, int threads = 1);

// Minimum over column permutations of (1/K) sum_k ||A(:,pi(k)) - Ahat(:,k)||^2.
double mse(const MatrixXd& estimated, const MatrixXd& truth);

enum class PermutationMode { kShared, kPerAnnotator };

struct ModelMse {
  double average = 0.0;
  std::vector<double> per_annotator;
  // Shared mode: estimated column k corresponds to truth column
  // permutation[k]. Empty in per-annotator mode.
  std::vector<int> permutation;
};

ModelMse model_mse(const ModelEstimate& estimated, const ModelEstimate& truth,
                   PermutationMode mode = PermutationMode::kShared);

// Reorders latent classes: column k of every estimated confusion (and d(k))
// moves to position permutation[k]. Response rows are untouched.
ModelEstimate relabel_classes(const ModelEstimate& model,
                              const std::vector<int>& permutation);

// Percentage of predicted items whose label differs from the truth.
// Unlabeled (nullopt) predictions count as errors. truth[i] is the 1-based
// label of item i+1; a prediction for an item outside truth (or with truth
// label 0) throws Error.
double classification_error(const std::vector<std::optional<int>>& predicted,
                            const std::vector<int>& truth);
double classification_error(const std::vector<int>& predicted,
                            const std::vector<int>& truth);

}  // namespace crowdpair

#endif  // CROWDPAIR_PREDICT_EVAL_H_
