#include <doctest.h>

#include <cmath>

#include "crowdpair/cooccurrence.h"
#include "crowdpair/klfit.h"
#include "crowdpair/predict_eval.h"
#include "crowdpair/synth.h"
#include "test_support.h"

using namespace crowdpair;

namespace {

CooccurrenceSet single_pair(const MatrixXd& r) {
  CooccurrenceSet c(2, static_cast<int>(r.rows()));
  c.set(0, 1, r, 100);
  return c;
}

void check_feasible(const ModelEstimate& model) {
  for (int m = 0; m < model.n_annotators(); ++m) {
    CHECK(model.confusion(m).minCoeff() >= 0.0);
    CHECK((model.confusion(m).colwise().sum().array() - 1.0).abs().maxCoeff() <= 1e-9);
  }
  CHECK(model.prior.probs().minCoeff() >= 0.0);
  CHECK(std::abs(model.prior.probs().sum() - 1.0) <= 1e-9);
}

}  // namespace

TEST_CASE("objective is zero at an exact fit") {
  std::mt19937_64 rng(1);
  const ModelEstimate model = testing::random_model(5, 3, rng);
  CHECK(std::abs(kl_objective(model, population_cooccurrences(model))) <= 1e-12);
}

TEST_CASE("objective hand value ln 2") {
  MatrixXd r(2, 2);
  r << 0.5, 0.0, 0.0, 0.5;
  // Uniform confusions give Q = 1/4 everywhere.
  const MatrixXd half = MatrixXd::Constant(2, 2, 0.5);
  const ModelEstimate model({ConfusionMatrix(half), ConfusionMatrix(half)},
                            PriorPMF::uniform(2));
  CHECK(kl_objective(model, single_pair(r)) == doctest::Approx(std::log(2.0)).epsilon(1e-14));
}

TEST_CASE("objective is nonnegative up to the floor") {
  std::mt19937_64 rng(2);
  SynthConfig sc;
  sc.n_items = 500;
  sc.n_annotators = 6;
  sc.p = 0.4;
  for (int t = 0; t < 10; ++t) {
    sc.seed = t;
    const CooccurrenceSet c = count_pairs(generate(sc).dataset);
    CHECK(kl_objective(testing::random_model(6, 3, rng), c) >= -1e-6);
    CHECK(kl_objective(testing::random_model(6, 3, rng), c, 1e-6, true) >= -1e-6);
  }
}

TEST_CASE("block updates leave the truth fixed under population statistics") {
  std::mt19937_64 rng(3);
  const ModelEstimate truth = testing::random_model(4, 3, rng);
  const CooccurrenceSet pop = population_cooccurrences(truth);
  for (int m = 0; m < 4; ++m) {
    CHECK(testing::max_abs_diff(update_confusion(m, truth, pop).entries(),
                                truth.confusion(m)) <= 1e-9);
  }
  CHECK((update_prior(truth, pop).probs() - truth.prior.probs()).cwiseAbs().maxCoeff() <=
        1e-9);
}

TEST_CASE("A update on a single pair matches a grid search") {
  MatrixXd r(2, 2);
  r << 0.4, 0.1, 0.1, 0.4;
  const ModelEstimate start({ConfusionMatrix(MatrixXd::Constant(2, 2, 0.5)),
                             ConfusionMatrix::identity(2)},
                            PriorPMF::uniform(2));
  const CooccurrenceSet c = single_pair(r);
  FitConfig config;
  config.inner_iterations = 500;
  const MatrixXd a = update_confusion(0, start, c, config).entries();

  // Grid over the two free parameters A(0,0) and A(0,1).
  double best = INFINITY;
  MatrixXd best_a;
  for (int i = 1; i < 500; ++i) {
    for (int j = 1; j < 500; ++j) {
      MatrixXd g(2, 2);
      g << i / 500.0, j / 500.0, 1 - i / 500.0, 1 - j / 500.0;
      const ModelEstimate trial({ConfusionMatrix(g), ConfusionMatrix::identity(2)},
                                PriorPMF::uniform(2));
      const double f = kl_objective(trial, c);
      if (f < best) {
        best = f;
        best_a = g;
      }
    }
  }
  MatrixXd expected(2, 2);
  expected << 0.8, 0.2, 0.2, 0.8;
  CHECK(testing::max_abs_diff(best_a, expected) <= 1e-3);
  CHECK(testing::max_abs_diff(a, expected) <= 1e-3);
}

TEST_CASE("d update on a single pair matches a grid search") {
  MatrixXd r(2, 2);
  r << 0.7, 0.0, 0.0, 0.3;
  const ModelEstimate start({ConfusionMatrix::identity(2), ConfusionMatrix::identity(2)},
                            PriorPMF::uniform(2));
  const CooccurrenceSet c = single_pair(r);
  FitConfig config;
  config.inner_iterations = 500;
  const VectorXd d = update_prior(start, c, config).probs();
  double best = INFINITY;
  double best_x = 0.0;
  for (int i = 1; i < 10000; ++i) {
    VectorXd g(2);
    g << i / 10000.0, 1 - i / 10000.0;
    const double f = kl_objective(
        ModelEstimate({ConfusionMatrix::identity(2), ConfusionMatrix::identity(2)},
                      PriorPMF(g)),
        c);
    if (f < best) {
      best = f;
      best_x = g(0);
    }
  }
  CHECK(best_x == doctest::Approx(0.7).epsilon(1e-3));
  CHECK(d(0) == doctest::Approx(0.7).epsilon(1e-3));
  CHECK(d(1) == doctest::Approx(0.3).epsilon(1e-3));
}

TEST_CASE("updates never increase the objective and stay feasible") {
  std::mt19937_64 rng(4);
  SynthConfig sc;
  sc.n_items = 800;
  sc.n_annotators = 5;
  sc.p = 0.6;
  sc.regime = Regime::kCase2;
  for (int t = 0; t < 10; ++t) {
    sc.seed = 40 + t;
    const CooccurrenceSet c = count_pairs(generate(sc).dataset);
    ModelEstimate model = testing::random_model(5, 3, rng);
    for (int m = 0; m < 5; ++m) {
      const double before = kl_objective(model, c);
      model.confusions[m] = update_confusion(m, model, c);
      CHECK(kl_objective(model, c) <= before * (1 + 1e-12));
      check_feasible(model);
    }
    const double before = kl_objective(model, c);
    model.prior = update_prior(model, c);
    CHECK(kl_objective(model, c) <= before * (1 + 1e-12));
    check_feasible(model);
  }
}

TEST_CASE("fit from a perturbed truth approaches the exact optimum") {
  std::mt19937_64 rng(5);
  const ModelEstimate truth = testing::random_model(6, 3, rng);
  const CooccurrenceSet pop = population_cooccurrences(truth);
  std::vector<ConfusionMatrix> noisy;
  for (int m = 0; m < 6; ++m) {
    noisy.emplace_back(clamp_and_normalize_columns(truth.confusion(m) +
                                                    0.02 * testing::random_stochastic(3, 3, rng)));
  }
  const ModelEstimate start(noisy, truth.prior);
  FitConfig config;
  config.max_outer_sweeps = 2000;
  config.tolerance = 1e-14;
  const KlFitResult r = fit_kl(start, pop, config);
  MESSAGE("objective " << r.objective.back() << " after " << r.sweeps << " sweeps");
  CHECK(r.objective.back() <= 1e-10);
  CHECK(model_mse(r.model, truth).average <= 1e-6);
}

TEST_CASE("outer objective is monotone and the result feasible") {
  SynthConfig sc;
  sc.n_items = 2000;
  sc.n_annotators = 8;
  sc.p = 0.5;
  sc.regime = Regime::kCase2;
  for (int t = 0; t < 5; ++t) {
    sc.seed = 70 + t;
    const KlFitResult r = multispa_kl(generate(sc).dataset);
    for (std::size_t i = 1; i < r.objective.size(); ++i) {
      CHECK(r.objective[i] <= r.objective[i - 1] * (1 + 1e-9));
    }
    CHECK(r.objective.size() == static_cast<std::size_t>(r.sweeps) + 1);
    check_feasible(r.model);
  }
}

TEST_CASE("fit improves on the MultiSPA start in at least 9 of 10 Case 2 trials") {
  int improved = 0;
  for (int t = 0; t < 10; ++t) {
    SynthConfig sc;
    sc.n_items = 10000;
    sc.n_annotators = 25;
    sc.p = 0.5;
    sc.regime = Regime::kCase2;
    sc.seed = 300 + t;
    const SynthData data = generate(sc);
    const KlFitResult r = multispa_kl(data.dataset);
    if (model_mse(r.model, data.truth).average <= model_mse(r.initial, data.truth).average) {
      ++improved;
    }
  }
  CHECK(improved >= 9);
}

TEST_CASE("weighted objective scales pairs by relative count") {
  std::mt19937_64 rng(8);
  const ModelEstimate model = testing::random_model(3, 2, rng);
  const ModelEstimate other = testing::random_model(3, 2, rng);
  CooccurrenceSet c(3, 2);
  c.set(0, 1, population_cooccurrence(other, 0, 1), 10);
  c.set(0, 2, population_cooccurrence(other, 0, 2), 30);
  CooccurrenceSet only01(3, 2), only02(3, 2);
  only01.set(0, 1, population_cooccurrence(other, 0, 1), 10);
  only02.set(0, 2, population_cooccurrence(other, 0, 2), 30);
  const double expected =
      0.5 * kl_objective(model, only01) + 1.5 * kl_objective(model, only02);
  CHECK(kl_objective(model, c, 1e-6, true) == doctest::Approx(expected).epsilon(1e-12));
}

TEST_CASE("config validation") {
  FitConfig config;
  CHECK_NOTHROW(config.validate(3));
  config.delta = 0.5;
  CHECK_THROWS_AS(config.validate(3), Error);
  config = FitConfig{};
  config.tolerance = 0.0;
  CHECK_THROWS_AS(config.validate(3), Error);
  config = FitConfig{};
  config.inner_iterations = 0;
  CHECK_THROWS_AS(config.validate(3), Error);
}
