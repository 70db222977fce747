#include "crowdpair/multispa.h"

#include <deque>
#include <limits>
#include <map>
#include <optional>
#include <sstream>

#include "crowdpair/assignment.h"
#include "crowdpair/parallel.h"

namespace crowdpair {
namespace {

std::string annotator_name(int m) {
  return "annotator " + std::to_string(m + 1);
}

bool invertible(const MatrixXd& a) {
  return condition_number(a) < kMaxConditionNumber;
}

MatrixXd permute_columns(const MatrixXd& a, const std::vector<int>& order) {
  MatrixXd out(a.rows(), a.cols());
  for (std::size_t i = 0; i < order.size(); ++i) {
    out.col(static_cast<Eigen::Index>(i)) = a.col(order[i]);
  }
  return out;
}

std::vector<int> match_columns(const MatrixXd& target, const MatrixXd& estimate) {
  const Eigen::Index k = target.cols();
  MatrixXd cost(k, k);
  for (Eigen::Index i = 0; i < k; ++i) {
    for (Eigen::Index j = 0; j < k; ++j) {
      cost(i, j) = (target.col(i) - estimate.col(j)).squaredNorm();
    }
  }
  return solve_assignment(cost);
}

std::vector<int> diagonal_order(const MatrixXd& estimate) {
  return solve_assignment(-estimate);
}

// Re-aligns every non-reference annotator by a count-weighted vote: each
// aligned, well-conditioned partner proposes the permutation it implies on
// its own, and the heaviest proposal wins (the current one on ties, then the
// lexicographically smallest). Each pass reads the previous pass's ordering,
// so the result does not depend on annotator numbering. Stops early once no
// permutation changes.
void refine_alignment(const std::vector<MatrixXd>& estimates, const CooccurrenceSet& cooc,
                      int reference, int passes, AlignmentResult& result) {
  const int m_total = static_cast<int>(estimates.size());
  for (int pass = 0; pass < passes; ++pass) {
    std::vector<std::optional<Eigen::FullPivLU<MatrixXd>>> lus(m_total);
    for (int m = 0; m < m_total; ++m) {
      if (invertible(result.confusions[m])) lus[m].emplace(result.confusions[m]);
    }
    std::vector<std::vector<int>> next = result.permutations;
    for (int l = 0; l < m_total; ++l) {
      if (l == reference) continue;
      std::map<std::vector<int>, double> votes;
      for (int r : cooc.partners(l)) {
        if (!lus[r]) continue;
        const MatrixXd implied =
            clamp_and_normalize_columns(lus[r]->solve(*cooc.joint(r, l)).transpose());
        votes[match_columns(implied, estimates[l])] += static_cast<double>(cooc.count(r, l));
      }
      if (votes.empty()) continue;
      const auto current = votes.find(result.permutations[l]);
      double best = current == votes.end() ? -1.0 : current->second;
      for (const auto& [perm, weight] : votes) {
        if (weight > best) {
          best = weight;
          next[l] = perm;
        }
      }
    }
    if (next == result.permutations) return;
    result.permutations = std::move(next);
    for (int l = 0; l < m_total; ++l) {
      result.confusions[l] = permute_columns(estimates[l], result.permutations[l]);
    }
  }
}

}  // namespace

double condition_number(const MatrixXd& a) {
  Eigen::JacobiSVD<MatrixXd> svd(a);
  const auto& s = svd.singularValues();
  if (s.size() == 0) return std::numeric_limits<double>::infinity();
  const double smallest = s(s.size() - 1);
  if (!(smallest > 0.0)) return std::numeric_limits<double>::infinity();
  return s(0) / smallest;
}

StackedBlock build_stacked(int m, const CooccurrenceSet& cooc) {
  const std::vector<int> partners = cooc.partners(m);
  if (partners.empty()) {
    throw Error("multispa: isolated annotator: " + annotator_name(m) +
                " shares no items with any other annotator");
  }
  const int k = cooc.n_classes();
  StackedBlock block;
  block.annotator = m;
  block.matrix.resize(k, static_cast<Eigen::Index>(k * partners.size()));
  Eigen::Index col = 0;
  for (int l : partners) {
    block.matrix.middleCols(col, k) = *cooc.joint(m, l);
    for (int j = 0; j < k; ++j) block.origin.push_back({l, j});
    col += k;
  }
  block.kept_mask.assign(block.origin.size(), true);
  return block;
}

StackedBlock normalize_columns(const StackedBlock& block, double eta, int k) {
  if (!(eta > 0.0)) throw Error("multispa: eta must be positive");
  StackedBlock out;
  out.annotator = block.annotator;
  out.kept_mask = block.kept_mask;

  std::vector<Eigen::Index> keep;
  std::size_t mask_pos = 0;
  for (Eigen::Index q = 0; q < block.matrix.cols(); ++q) {
    while (!out.kept_mask[mask_pos]) ++mask_pos;
    if (block.matrix.col(q).lpNorm<1>() >= eta) {
      keep.push_back(q);
    } else {
      out.kept_mask[mask_pos] = false;
    }
    ++mask_pos;
  }
  if (static_cast<int>(keep.size()) < k) {
    std::ostringstream msg;
    msg << "multispa: insufficient mass for " << annotator_name(block.annotator)
        << ": only " << keep.size() << " stacked columns reach l1 norm " << eta
        << ", need " << k;
    throw Error(msg.str());
  }
  out.matrix.resize(block.matrix.rows(), static_cast<Eigen::Index>(keep.size()));
  for (std::size_t i = 0; i < keep.size(); ++i) {
    const auto column = block.matrix.col(keep[i]);
    out.matrix.col(static_cast<Eigen::Index>(i)) = column / column.lpNorm<1>();
    out.origin.push_back(block.origin[keep[i]]);
  }
  return out;
}

SpaResult spa(const StackedBlock& normalized, int k) {
  const MatrixXd& z = normalized.matrix;
  if (k < 2) throw Error("multispa: spa needs K >= 2");
  if (z.cols() < k) {
    throw Error("multispa: spa needs at least K columns for " +
                annotator_name(normalized.annotator));
  }
  MatrixXd residual = z;
  SpaResult result;
  result.vertices.resize(z.rows(), k);
  for (int step = 0; step < k; ++step) {
    const VectorXd norms = residual.colwise().squaredNorm().transpose();
    Eigen::Index best = 0;
    for (Eigen::Index q = 1; q < norms.size(); ++q) {
      if (norms(q) > norms(best)) best = q;
    }
    if (std::sqrt(norms(best)) < 1e-12) {
      std::ostringstream msg;
      msg << "multispa: degenerate block for " << annotator_name(normalized.annotator)
          << ": stacked columns span only " << step << " of " << k
          << " dimensions";
      throw Error(msg.str());
    }
    result.chosen.push_back(static_cast<int>(best));
    result.vertices.col(step) = z.col(best);
    const VectorXd u = residual.col(best) / std::sqrt(norms(best));
    residual -= u * (u.transpose() * residual);
  }
  return result;
}

AlignmentResult align_permutations(const std::vector<MatrixXd>& estimates,
                                   const CooccurrenceSet& cooc, int reference,
                                   AlignMethod method, int consensus_passes) {
  const int m_total = static_cast<int>(estimates.size());
  AlignmentResult out;
  out.confusions.resize(m_total);
  out.permutations.resize(m_total);

  if (method == AlignMethod::kDiagonalDominance) {
    for (int m = 0; m < m_total; ++m) {
      out.permutations[m] = diagonal_order(estimates[m]);
      out.confusions[m] = permute_columns(estimates[m], out.permutations[m]);
    }
    return out;
  }

  if (reference < 0 || reference >= m_total) {
    throw Error("multispa: reference annotator out of range");
  }
  if (!invertible(estimates[reference])) {
    throw Error("multispa: reference not invertible: " + annotator_name(reference) +
                " has condition number above 1e8");
  }

  const int k = cooc.n_classes();
  std::vector<int> identity(k);
  for (int i = 0; i < k; ++i) identity[i] = i;
  std::vector<bool> aligned(m_total, false);
  aligned[reference] = true;
  out.confusions[reference] = estimates[reference];
  out.permutations[reference] = identity;

  std::deque<int> queue{reference};
  while (!queue.empty()) {
    const int r = queue.front();
    queue.pop_front();
    if (!invertible(out.confusions[r])) continue;
    const Eigen::FullPivLU<MatrixXd> lu(out.confusions[r]);
    for (int l : cooc.partners(r)) {
      if (aligned[l]) continue;
      // A_r^{-1} R_{r,l} = Pi^T D A_l^T, so its transpose has the columns of
      // A_l scaled by d in the reference ordering.
      const MatrixXd implied =
          clamp_and_normalize_columns(lu.solve(*cooc.joint(r, l)).transpose());
      out.permutations[l] = match_columns(implied, estimates[l]);
      out.confusions[l] = permute_columns(estimates[l], out.permutations[l]);
      aligned[l] = true;
      queue.push_back(l);
    }
  }

  std::vector<int> missing;
  for (int m = 0; m < m_total; ++m) {
    if (!aligned[m]) missing.push_back(m);
  }
  if (missing.empty()) {
    refine_alignment(estimates, cooc, reference, consensus_passes, out);
  }
  if (!missing.empty()) {
    std::ostringstream msg;
    msg << "multispa: disconnected pair graph: annotators";
    for (int m : missing) msg << ' ' << m + 1;
    msg << " cannot be reached from reference annotator " << reference + 1;
    throw Error(msg.str());
  }
  return out;
}

PriorPMF estimate_prior(const std::vector<MatrixXd>& aligned,
                        const CooccurrenceSet& cooc, long long s_min) {
  const int k = cooc.n_classes();
  std::vector<std::optional<Eigen::FullPivLU<MatrixXd>>> lus(aligned.size());
  for (std::size_t m = 0; m < aligned.size(); ++m) {
    if (invertible(aligned[m])) lus[m].emplace(aligned[m]);
  }

  VectorXd accum = VectorXd::Zero(k);
  double weight = 0.0;
  for (const auto& [key, stat] : cooc.pairs()) {
    const auto [m, l] = key;
    if (stat.count < s_min || !lus[m] || !lus[l]) continue;
    // D = A_m^{-1} R A_l^{-T}; the right factor is applied as a solve on the
    // transpose.
    const MatrixXd left = lus[m]->solve(stat.joint);
    const MatrixXd d_hat = lus[l]->solve(left.transpose()).transpose();
    const double w = static_cast<double>(stat.count);
    accum += w * d_hat.diagonal().cwiseMax(0.0);
    weight += w;
  }
  if (weight == 0.0) {
    throw Error("multispa: no annotator pair qualifies for prior estimation");
  }
  accum /= weight;
  const double total = accum.sum();
  if (!(total > 0.0)) throw Error("multispa: degenerate prior");
  return PriorPMF(accum / total);
}

int default_reference(const CooccurrenceSet& cooc) {
  std::vector<long long> totals(cooc.n_annotators(), 0);
  for (const auto& [key, stat] : cooc.pairs()) {
    totals[key.first] += stat.count;
    totals[key.second] += stat.count;
  }
  int best = 0;
  for (int m = 1; m < cooc.n_annotators(); ++m) {
    if (totals[m] > totals[best]) best = m;
  }
  return best;
}

ModelEstimate multispa(const CooccurrenceSet& cooc, const MultiSpaConfig& config) {
  const int m_total = cooc.n_annotators();
  const int k = cooc.n_classes();
  for (int m = 0; m < m_total; ++m) {
    if (cooc.partners(m).empty()) {
      throw Error("multispa: isolated annotator: " + annotator_name(m) +
                  " shares no items with any other annotator");
    }
  }

  std::vector<MatrixXd> estimates(m_total);
  parallel_for(static_cast<std::size_t>(m_total), config.threads, [&](std::size_t i) {
    const int m = static_cast<int>(i);
    const StackedBlock normalized =
        normalize_columns(build_stacked(m, cooc), config.eta, k);
    estimates[i] = spa(normalized, k).vertices;
  });

  const int reference = config.reference.value_or(default_reference(cooc));
  AlignmentResult aligned =
      align_permutations(estimates, cooc, reference, config.align,
                         config.consensus_passes);
  const PriorPMF prior = estimate_prior(aligned.confusions, cooc, config.s_min);

  std::vector<ConfusionMatrix> confusions;
  confusions.reserve(m_total);
  for (const auto& a : aligned.confusions) {
    confusions.emplace_back(clamp_and_normalize_columns(a));
  }
  return ModelEstimate(std::move(confusions), prior);
}

ModelEstimate multispa(const LabelDataset& dataset, const MultiSpaConfig& config) {
  return multispa(count_pairs(dataset), config);
}

}  // namespace crowdpair
