#include "crowdpair/cooccurrence.h"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <unordered_map>

namespace crowdpair {

CooccurrenceSet::CooccurrenceSet(int n_annotators, int n_classes)
    : n_annotators_(n_annotators),
      n_classes_(n_classes),
      partners_(static_cast<std::size_t>(n_annotators)) {}

void CooccurrenceSet::set(int m, int l, MatrixXd joint, long long count) {
  if (m == l) throw Error("cooccurrence: pair needs two distinct annotators");
  if (m < 0 || l < 0 || m >= n_annotators_ || l >= n_annotators_) {
    throw Error("cooccurrence: annotator index out of range");
  }
  if (count <= 0) throw Error("cooccurrence: pair count must be positive");
  if (joint.rows() != n_classes_ || joint.cols() != n_classes_) {
    throw Error("cooccurrence: joint PMF must be K x K");
  }
  if (!joint.allFinite() || joint.minCoeff() < 0.0 ||
      std::abs(joint.sum() - 1.0) > kSimplexTolerance) {
    throw Error("cooccurrence: joint PMF must be nonnegative and sum to 1");
  }
  if (m > l) {
    std::swap(m, l);
    joint.transposeInPlace();
  }
  const bool fresh = pairs_.find({m, l}) == pairs_.end();
  pairs_[{m, l}] = PairStat{std::move(joint), count};
  if (fresh) {
    auto insert_sorted = [](std::vector<int>& v, int x) {
      v.insert(std::lower_bound(v.begin(), v.end(), x), x);
    };
    insert_sorted(partners_[m], l);
    insert_sorted(partners_[l], m);
  }
}

std::optional<MatrixXd> CooccurrenceSet::joint(int m, int l) const {
  if (m == l) return std::nullopt;
  const bool flipped = m > l;
  auto it = pairs_.find(flipped ? Key{l, m} : Key{m, l});
  if (it == pairs_.end()) return std::nullopt;
  if (flipped) return MatrixXd(it->second.joint.transpose());
  return it->second.joint;
}

long long CooccurrenceSet::count(int m, int l) const {
  if (m == l) return 0;
  auto it = pairs_.find(m < l ? Key{m, l} : Key{l, m});
  return it == pairs_.end() ? 0 : it->second.count;
}

std::vector<int> CooccurrenceSet::partners(int m) const {
  return partners_.at(static_cast<std::size_t>(m));
}

CooccurrenceSet count_pairs(const LabelDataset& dataset) {
  require_valid(dataset);
  const int k = dataset.n_classes();
  const long long m_total = dataset.n_annotators();
  const ItemView view = build_item_view(dataset);

  // Integer tallies keyed by m * M + l (m < l), row-major K x K.
  std::unordered_map<long long, std::vector<long long>> tallies;
  for (int item = 0; item < dataset.n_items(); ++item) {
    const std::size_t lo = view.offsets[item];
    const std::size_t hi = view.offsets[item + 1];
    for (std::size_t a = lo; a < hi; ++a) {
      for (std::size_t b = a + 1; b < hi; ++b) {
        // Annotators are sorted within an item, so annotators[a] < annotators[b].
        const long long key = view.annotators[a] * m_total + view.annotators[b];
        auto& cells = tallies[key];
        if (cells.empty()) cells.assign(static_cast<std::size_t>(k * k), 0);
        ++cells[static_cast<std::size_t>(view.labels[a] * k + view.labels[b])];
      }
    }
  }

  CooccurrenceSet out(dataset.n_annotators(), k);
  for (const auto& [key, cells] : tallies) {
    long long total = 0;
    for (long long c : cells) total += c;
    MatrixXd joint(k, k);
    for (int i = 0; i < k; ++i) {
      for (int j = 0; j < k; ++j) {
        joint(i, j) = static_cast<double>(cells[i * k + j]) /
                      static_cast<double>(total);
      }
    }
    out.set(static_cast<int>(key / m_total), static_cast<int>(key % m_total),
            std::move(joint), total);
  }
  return out;
}

MatrixXd population_cooccurrence(const ModelEstimate& model, int m, int l) {
  if (m == l) {
    std::ostringstream msg;
    msg << "cooccurrence: population co-occurrence needs distinct annotators, got "
        << m + 1 << " twice";
    throw Error(msg.str());
  }
  return model.confusion(m) * model.prior.probs().asDiagonal() *
         model.confusion(l).transpose();
}

CooccurrenceSet population_cooccurrences(const ModelEstimate& model,
                                         long long nominal_count) {
  CooccurrenceSet out(model.n_annotators(), model.n_classes());
  for (int m = 0; m < model.n_annotators(); ++m) {
    for (int l = m + 1; l < model.n_annotators(); ++l) {
      out.set(m, l, population_cooccurrence(model, m, l), nominal_count);
    }
  }
  return out;
}

}  // namespace crowdpair
