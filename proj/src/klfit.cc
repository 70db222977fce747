#include "crowdpair/klfit.h"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace crowdpair {
namespace {

double kl_term(const MatrixXd& p, const MatrixXd& q, double delta) {
  double total = 0.0;
  for (Eigen::Index j = 0; j < p.cols(); ++j) {
    for (Eigen::Index i = 0; i < p.rows(); ++i) {
      const double pij = p(i, j);
      if (pij > 0.0) total += pij * std::log(pij / std::max(q(i, j), delta));
    }
  }
  return total;
}

// dKL/dQ = -P / Q where Q is above the floor, 0 where the floor is active.
MatrixXd ratio(const MatrixXd& p, const MatrixXd& q, double delta) {
  MatrixXd w(p.rows(), p.cols());
  for (Eigen::Index j = 0; j < p.cols(); ++j) {
    for (Eigen::Index i = 0; i < p.rows(); ++i) {
      w(i, j) = (p(i, j) > 0.0 && q(i, j) > delta) ? p(i, j) / q(i, j) : 0.0;
    }
  }
  return w;
}

std::vector<double> pair_weights(const CooccurrenceSet& cooc, bool by_count) {
  std::vector<double> weights;
  weights.reserve(cooc.pairs().size());
  double mean = 0.0;
  for (const auto& [key, stat] : cooc.pairs()) {
    weights.push_back(static_cast<double>(stat.count));
    mean += static_cast<double>(stat.count);
  }
  if (!by_count || weights.empty()) {
    std::fill(weights.begin(), weights.end(), 1.0);
    return weights;
  }
  mean /= static_cast<double>(weights.size());
  for (double& w : weights) w /= mean;
  return weights;
}

// Multiplies v elementwise by exp(step * g / scale), renormalizes, then floors.
VectorXd exponentiated_step(const VectorXd& v, const VectorXd& neg_grad,
                            double scale, double step, double delta) {
  VectorXd expo = (step / scale) * neg_grad;
  expo.array() -= expo.maxCoeff();
  VectorXd out = v.array() * expo.array().exp();
  const double sum = out.sum();
  if (!(sum > 0.0) || !std::isfinite(sum)) return v;
  return floor_and_normalize(out / sum, delta);
}

struct PartnerTerm {
  MatrixXd joint;     // R_{m,l}
  MatrixXd scaled;    // A_l D, so that Q = A_m (A_l D)^T
  double weight = 1.0;
};

}  // namespace

void FitConfig::validate(int k) const {
  std::ostringstream msg;
  if (max_outer_sweeps < 1 || inner_iterations < 1 || max_halvings < 1) {
    msg << "klfit: iteration counts must be >= 1";
  } else if (!(tolerance > 0.0)) {
    msg << "klfit: tolerance must be positive";
  } else if (!(delta > 0.0) || !(delta < 1.0 / k)) {
    msg << "klfit: delta must lie in (0, 1/K), got " << delta;
  } else if (!(initial_step > 0.0) || !(max_step >= initial_step)) {
    msg << "klfit: need 0 < initial_step <= max_step";
  }
  if (!msg.str().empty()) throw Error(msg.str());
}

double kl_objective(const ModelEstimate& model, const CooccurrenceSet& cooc,
                    double delta, bool weight_by_count) {
  const std::vector<double> weights = pair_weights(cooc, weight_by_count);
  const MatrixXd d = model.prior.probs().asDiagonal();
  double total = 0.0;
  std::size_t idx = 0;
  for (const auto& [key, stat] : cooc.pairs()) {
    const MatrixXd q =
        model.confusion(key.first) * d * model.confusion(key.second).transpose();
    total += weights[idx++] * kl_term(stat.joint, q, delta);
  }
  return total;
}

ConfusionMatrix update_confusion(int m, const ModelEstimate& model,
                                 const CooccurrenceSet& cooc,
                                 const FitConfig& config) {
  const int k = model.n_classes();
  config.validate(k);
  const std::vector<double> weights = pair_weights(cooc, config.weight_by_count);
  const VectorXd& d = model.prior.probs();

  std::vector<PartnerTerm> terms;
  std::size_t idx = 0;
  for (const auto& [key, stat] : cooc.pairs()) {
    const double w = weights[idx++];
    if (key.first == m) {
      terms.push_back({stat.joint, model.confusion(key.second) * d.asDiagonal(), w});
    } else if (key.second == m) {
      terms.push_back({stat.joint.transpose(),
                       model.confusion(key.first) * d.asDiagonal(), w});
    }
  }
  if (terms.empty()) return model.confusions[m];

  auto objective = [&](const MatrixXd& a) {
    double total = 0.0;
    for (const auto& t : terms) {
      total += t.weight * kl_term(t.joint, a * t.scaled.transpose(), config.delta);
    }
    return total;
  };

  MatrixXd current = model.confusion(m);
  double value = objective(current);
  double last_step = config.initial_step / 2.0;
  for (int iter = 0; iter < config.inner_iterations; ++iter) {
    // Negative gradient: sum_l w_l (R ./ Q) A_l D.
    MatrixXd neg_grad = MatrixXd::Zero(k, k);
    for (const auto& t : terms) {
      const MatrixXd q = current * t.scaled.transpose();
      neg_grad += t.weight * ratio(t.joint, q, config.delta) * t.scaled;
    }

    bool accepted = false;
    double step = std::min(config.max_step, 2.0 * last_step);
    for (int h = 0; h <= config.max_halvings && !accepted; ++h, step /= 2.0) {
      MatrixXd trial = current;
      for (int col = 0; col < k; ++col) {
        const double scale = current.col(col).dot(neg_grad.col(col));
        if (!(scale > 0.0)) continue;
        trial.col(col) = exponentiated_step(current.col(col), neg_grad.col(col),
                                            scale, step, config.delta);
      }
      const double trial_value = objective(trial);
      if (trial_value <= value) {
        const double gain = value - trial_value;
        current = std::move(trial);
        value = trial_value;
        last_step = step;
        accepted = true;
        if (gain <= 1e-15 * std::max(1.0, std::abs(value))) {
          iter = config.inner_iterations;  // stalled
        }
      }
    }
    if (!accepted) break;
  }
  if (current == model.confusion(m)) return model.confusions[m];
  return ConfusionMatrix(std::move(current));
}

PriorPMF update_prior(const ModelEstimate& model, const CooccurrenceSet& cooc,
                      const FitConfig& config) {
  const int k = model.n_classes();
  config.validate(k);
  if (cooc.empty()) return model.prior;
  const std::vector<double> weights = pair_weights(cooc, config.weight_by_count);

  auto objective = [&](const VectorXd& d) {
    double total = 0.0;
    std::size_t idx = 0;
    for (const auto& [key, stat] : cooc.pairs()) {
      const MatrixXd q = model.confusion(key.first) * d.asDiagonal() *
                         model.confusion(key.second).transpose();
      total += weights[idx++] * kl_term(stat.joint, q, config.delta);
    }
    return total;
  };

  VectorXd current = model.prior.probs();
  double value = objective(current);
  double last_step = config.initial_step / 2.0;
  for (int iter = 0; iter < config.inner_iterations; ++iter) {
    VectorXd neg_grad = VectorXd::Zero(k);
    std::size_t idx = 0;
    for (const auto& [key, stat] : cooc.pairs()) {
      const MatrixXd& am = model.confusion(key.first);
      const MatrixXd& al = model.confusion(key.second);
      const MatrixXd q = am * current.asDiagonal() * al.transpose();
      neg_grad += weights[idx++] *
                  (am.transpose() * ratio(stat.joint, q, config.delta) * al).diagonal();
    }
    const double scale = current.dot(neg_grad);
    if (!(scale > 0.0)) break;

    bool accepted = false;
    double step = std::min(config.max_step, 2.0 * last_step);
    for (int h = 0; h <= config.max_halvings && !accepted; ++h, step /= 2.0) {
      VectorXd trial = exponentiated_step(current, neg_grad, scale, step, config.delta);
      const double trial_value = objective(trial);
      if (trial_value <= value) {
        const double gain = value - trial_value;
        current = std::move(trial);
        value = trial_value;
        last_step = step;
        accepted = true;
        if (gain <= 1e-15 * std::max(1.0, std::abs(value))) {
          iter = config.inner_iterations;
        }
      }
    }
    if (!accepted) break;
  }
  if (current == model.prior.probs()) return model.prior;
  return PriorPMF(std::move(current));
}

KlFitResult fit_kl(const ModelEstimate& init, const CooccurrenceSet& cooc,
                   const FitConfig& config) {
  config.validate(init.n_classes());
  if (cooc.empty()) throw Error("klfit: no co-occurrence pairs to fit");
  KlFitResult result{floor_model(init, config.delta), init, {}, 0, false};
  ModelEstimate& model = result.model;

  double value = kl_objective(model, cooc, config.delta, config.weight_by_count);
  result.objective.push_back(value);
  for (int sweep = 0; sweep < config.max_outer_sweeps; ++sweep) {
    for (int m = 0; m < model.n_annotators(); ++m) {
      model.confusions[m] = update_confusion(m, model, cooc, config);
    }
    model.prior = update_prior(model, cooc, config);

    const double next = kl_objective(model, cooc, config.delta, config.weight_by_count);
    result.objective.push_back(next);
    result.sweeps = sweep + 1;
    const bool small_change = value - next <= config.tolerance * std::abs(value);
    value = next;
    if (small_change) {
      result.converged = true;
      break;
    }
  }
  return result;
}

KlFitResult multispa_kl(const CooccurrenceSet& cooc, const FitConfig& config) {
  config.validate(cooc.n_classes());
  return fit_kl(multispa(cooc, config.init), cooc, config);
}

KlFitResult multispa_kl(const LabelDataset& dataset, const FitConfig& config) {
  return multispa_kl(count_pairs(dataset), config);
}

}  // namespace crowdpair
