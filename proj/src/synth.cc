#include "crowdpair/synth.h"

#include <algorithm>
#include <sstream>

#include "crowdpair/parallel.h"

namespace crowdpair {
namespace {

// Stream ids. Annotator-specific streams are offset by the annotator index.
constexpr std::uint64_t kSpecialStream = 1;
constexpr std::uint64_t kTruthLabelStream = 2;
constexpr std::uint64_t kResponseStream = 3;
constexpr std::uint64_t kRetainStream = 4;
constexpr std::uint64_t kConfusionStreamBase = 1000;

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

int draw_categorical(const VectorXd& probs, double u) {
  double cumulative = 0.0;
  const int k = static_cast<int>(probs.size());
  for (int c = 0; c < k - 1; ++c) {
    cumulative += probs(c);
    if (u < cumulative) return c;
  }
  return k - 1;
}

}  // namespace

Regime parse_regime(const std::string& name) {
  if (name == "case1") return Regime::kCase1;
  if (name == "case2") return Regime::kCase2;
  if (name == "all_random") return Regime::kAllRandom;
  throw Error("synth: unknown regime '" + name + "' (case1, case2, all_random)");
}

std::string regime_name(Regime regime) {
  switch (regime) {
    case Regime::kCase1: return "case1";
    case Regime::kCase2: return "case2";
    case Regime::kAllRandom: return "all_random";
  }
  return "unknown";
}

void SynthConfig::validate() const {
  std::ostringstream msg;
  if (n_items < 1 || n_annotators < 1 || n_classes < 2) {
    msg << "synth: need N >= 1, M >= 1, K >= 2";
  } else if (!(p > 0.0 && p <= 1.0)) {
    msg << "synth: p must lie in (0, 1], got " << p;
  } else if (prior && prior->size() != n_classes) {
    msg << "synth: prior length " << prior->size() << " does not match K";
  }
  if (!msg.str().empty()) throw Error(msg.str());
  if (prior) PriorPMF check(*prior);
}

double uniform01(std::uint64_t seed, std::uint64_t stream, std::uint64_t index) {
  std::uint64_t h = splitmix64(seed);
  h = splitmix64(h ^ stream);
  h = splitmix64(h ^ index);
  return static_cast<double>(h >> 11) * 0x1.0p-53;
}

MatrixXd random_confusion(int k, std::uint64_t seed, std::uint64_t stream) {
  MatrixXd a(k, k);
  for (int col = 0; col < k; ++col) {
    for (int row = 0; row < k; ++row) {
      // (0, 1): shift the [0, 1) draw off zero by half a grid step.
      a(row, col) = uniform01(seed, stream, static_cast<std::uint64_t>(col * k + row)) +
                    0x1.0p-54;
    }
    a.col(col) /= a.col(col).sum();
  }
  return a;
}

MatrixXd diagonally_dominant_confusion(int k, std::uint64_t seed,
                                       std::uint64_t stream) {
  MatrixXd a = random_confusion(k, seed, stream);
  for (int col = 0; col < k; ++col) {
    Eigen::Index top = 0;
    a.col(col).maxCoeff(&top);
    std::swap(a(top, col), a(col, col));
    a.col(col) /= a.col(col).sum();
  }
  return a;
}

SynthData generate(const SynthConfig& config) {
  config.validate();
  const int n = config.n_items;
  const int m_total = config.n_annotators;
  const int k = config.n_classes;
  const std::uint64_t seed = config.seed;
  const VectorXd prior =
      config.prior ? *config.prior : VectorXd::Constant(k, 1.0 / k);

  std::optional<int> special;
  if (config.regime != Regime::kAllRandom) {
    special = std::min(m_total - 1,
                       static_cast<int>(uniform01(seed, kSpecialStream, 0) * m_total));
  }
  std::vector<ConfusionMatrix> confusions;
  confusions.reserve(m_total);
  for (int m = 0; m < m_total; ++m) {
    const std::uint64_t stream = kConfusionStreamBase + static_cast<std::uint64_t>(m);
    if (special && *special == m && config.regime == Regime::kCase1) {
      confusions.push_back(ConfusionMatrix::identity(k));
    } else if (special && *special == m) {
      confusions.emplace_back(diagonally_dominant_confusion(k, seed, stream));
    } else {
      confusions.emplace_back(random_confusion(k, seed, stream));
    }
  }
  ModelEstimate truth(std::move(confusions), PriorPMF(prior));
  SynthData out = sample(truth, n, config.p, seed, config.threads);
  out.special = special;
  return out;
}

SynthData sample(const ModelEstimate& truth, int n_items, double p, std::uint64_t seed,
                 int threads) {
  if (n_items < 1) throw Error("synth: need N >= 1");
  if (!(p > 0.0 && p <= 1.0)) {
    std::ostringstream msg;
    msg << "synth: p must lie in (0, 1], got " << p;
    throw Error(msg.str());
  }
  const int n = n_items;
  const int m_total = truth.n_annotators();
  const VectorXd& prior = truth.prior.probs();

  std::vector<int> labels(n);
  for (int item = 0; item < n; ++item) {
    labels[item] =
        draw_categorical(prior, uniform01(seed, kTruthLabelStream,
                                          static_cast<std::uint64_t>(item))) +
        1;
  }

  // Per-item response slots filled independently, then concatenated in item
  // order.
  std::vector<std::vector<Response>> per_item(n);
  parallel_for(static_cast<std::size_t>(n), threads, [&](std::size_t idx) {
    const int item = static_cast<int>(idx);
    for (int m = 0; m < m_total; ++m) {
      const std::uint64_t slot =
          static_cast<std::uint64_t>(item) * static_cast<std::uint64_t>(m_total) +
          static_cast<std::uint64_t>(m);
      if (p < 1.0 && uniform01(seed, kRetainStream, slot) >= p) continue;
      const int response = draw_categorical(
          truth.confusion(m).col(labels[item] - 1), uniform01(seed, kResponseStream, slot));
      per_item[idx].push_back({item + 1, m + 1, response + 1});
    }
  });
  std::vector<Response> responses;
  responses.reserve(static_cast<std::size_t>(n * m_total * p) + 16);
  for (auto& r : per_item) responses.insert(responses.end(), r.begin(), r.end());

  return SynthData{LabelDataset(n, m_total, truth.n_classes(), std::move(responses)), truth,
                   std::move(labels), std::nullopt};
}

}  // namespace crowdpair
