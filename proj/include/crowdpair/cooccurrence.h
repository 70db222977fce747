// Pairwise co-occurrence statistics R_{m,l}(i, j) = Pr(X_m = i, X_l = j).

#ifndef CROWDPAIR_COOCCURRENCE_H_
#define CROWDPAIR_COOCCURRENCE_H_

#include <map>
#include <optional>
#include <utility>
#include <vector>

#include "crowdpair/data_model.h"

namespace crowdpair {

struct PairStat {
  MatrixXd joint;      // K x K, rows indexed by the lower annotator's label
  long long count = 0; // number of co-labeled items
};

// Joint PMFs for unordered annotator pairs. Keys are 0-based (m, l) with
// m < l; only pairs with a positive count are stored.
class CooccurrenceSet {
 public:
  using Key = std::pair<int, int>;

  CooccurrenceSet(int n_annotators, int n_classes);

  // Inserts or replaces the statistic of pair (m, l) oriented as R_{m,l}.
  // Throws Error if m == l, the count is not positive, or the matrix is not a
  // K x K joint PMF.
  void set(int m, int l, MatrixXd joint, long long count);

  // R_{m,l}, transposing the stored block when m > l.
  std::optional<MatrixXd> joint(int m, int l) const;
  long long count(int m, int l) const;  // 0 when absent
  bool has(int m, int l) const { return count(m, l) > 0; }

  // Partners of m in ascending order.
  std::vector<int> partners(int m) const;

  int n_annotators() const { return n_annotators_; }
  int n_classes() const { return n_classes_; }
  const std::map<Key, PairStat>& pairs() const { return pairs_; }
  bool empty() const { return pairs_.empty(); }

 private:
  int n_annotators_;
  int n_classes_;
  std::map<Key, PairStat> pairs_;
  std::vector<std::vector<int>> partners_;
};

// Empirical co-occurrence PMFs of every annotator pair that shares at least
// one item.
CooccurrenceSet count_pairs(const LabelDataset& dataset);

// A_m Diag(d) A_l^T. Throws Error when m == l.
MatrixXd population_cooccurrence(const ModelEstimate& model, int m, int l);

// Population statistics for every pair, each with the given nominal count.
CooccurrenceSet population_cooccurrences(const ModelEstimate& model,
                                         long long nominal_count = 1);

}  // namespace crowdpair

#endif  // CROWDPAIR_COOCCURRENCE_H_
