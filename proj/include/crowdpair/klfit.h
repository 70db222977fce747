// Coupled KL-divergence fitting of all pairwise statistics:
//
//   minimize  sum over pairs (m,l)  KL(R_{m,l} || A_m Diag(d) A_l^T)
//   s.t.      every column of every A_m and d lie on the probability simplex
//
// solved by block-coordinate descent (A_1, ..., A_M, then d), each block by
// exponentiated-gradient steps with backtracking. Initialized from MultiSPA.

#ifndef CROWDPAIR_KLFIT_H_
#define CROWDPAIR_KLFIT_H_

#include <vector>

#include "crowdpair/cooccurrence.h"
#include "crowdpair/data_model.h"
#include "crowdpair/multispa.h"

namespace crowdpair {

struct FitConfig {
  int max_outer_sweeps = 100;
  int inner_iterations = 50;
  double tolerance = 1e-6;  // relative objective decrease per sweep
  double delta = 1e-6;      // probability floor, also used inside logarithms
  bool weight_by_count = false;
  // Exponentiated-gradient step, in units of the inverse gradient scale of
  // each column. The first trial step of an inner iteration is
  // min(max_step, 2 * last accepted step); failures halve it.
  double initial_step = 1.0;
  double max_step = 8.0;
  int max_halvings = 30;
  MultiSpaConfig init;

  // Throws Error when a field is outside its documented range for K classes.
  void validate(int k) const;
};

// Sum over stored pairs of KL(R_hat || A_m D A_l^T) with 0 ln 0 = 0 and model
// entries floored at delta inside the logarithm. With weight_by_count each
// pair is scaled by count / mean count.
double kl_objective(const ModelEstimate& model, const CooccurrenceSet& cooc,
                    double delta = 1e-6, bool weight_by_count = false);

// One block update of A_m with everything else fixed. Never increases the
// objective; returns the input when no step improves it.
ConfusionMatrix update_confusion(int m, const ModelEstimate& model,
                                 const CooccurrenceSet& cooc,
                                 const FitConfig& config = {});

// Block update of d with every A_m fixed.
PriorPMF update_prior(const ModelEstimate& model, const CooccurrenceSet& cooc,
                      const FitConfig& config = {});

struct KlFitResult {
  ModelEstimate model;
  ModelEstimate initial;            // MultiSPA output before flooring
  std::vector<double> objective;    // at start and after every sweep
  int sweeps = 0;
  bool converged = false;
};

// Runs sweeps from `init` (floored at delta first).
KlFitResult fit_kl(const ModelEstimate& init, const CooccurrenceSet& cooc,
                   const FitConfig& config = {});

KlFitResult multispa_kl(const CooccurrenceSet& cooc, const FitConfig& config = {});
KlFitResult multispa_kl(const LabelDataset& dataset, const FitConfig& config = {});

}  // namespace crowdpair

#endif  // CROWDPAIR_KLFIT_H_
