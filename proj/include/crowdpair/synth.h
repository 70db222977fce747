// Seeded synthetic crowdsourcing data under the Dawid-Skene model.

#ifndef CROWDPAIR_SYNTH_H_
#define CROWDPAIR_SYNTH_H_

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "crowdpair/data_model.h"

namespace crowdpair {

enum class Regime {
  kCase1,      // one random annotator is perfect (identity confusion)
  kCase2,      // one random annotator is diagonally dominant
  kAllRandom,  // every confusion column uniform on (0,1), l1-normalized
};

Regime parse_regime(const std::string& name);
std::string regime_name(Regime regime);

struct SynthConfig {
  int n_items = 10000;
  int n_annotators = 25;
  int n_classes = 3;
  std::optional<VectorXd> prior;  // uniform when unset
  double p = 1.0;                 // probability that a response is kept
  Regime regime = Regime::kCase1;
  std::uint64_t seed = 0;
  int threads = 1;  // output does not depend on this

  void validate() const;
};

struct SynthData {
  LabelDataset dataset;
  ModelEstimate truth;
  std::vector<int> labels;        // 1-based ground truth per item
  std::optional<int> special;     // 0-based annotator given the special matrix
};

SynthData generate(const SynthConfig& config);

// Draws N items from a given model: truth labels from d, then each of the M
// responses kept with probability p. generate() is sample() on its random
// model, so the same seed gives the same draws.
SynthData sample(const ModelEstimate& truth, int n_items, double p, std::uint64_t seed,
                 int threads = 1);

// Counter-based uniform draw in [0, 1): a pure function of its arguments, so
// any subset of draws can be produced in any order or in parallel.
double uniform01(std::uint64_t seed, std::uint64_t stream, std::uint64_t index);

// Random column-stochastic K x K matrix (columns uniform on (0,1) then
// l1-normalized) drawn from the given stream.
MatrixXd random_confusion(int k, std::uint64_t seed, std::uint64_t stream);

// As random_confusion, then in every column the largest entry is swapped onto
// the diagonal.
MatrixXd diagonally_dominant_confusion(int k, std::uint64_t seed,
                                       std::uint64_t stream);

}  // namespace crowdpair

#endif  // CROWDPAIR_SYNTH_H_
