#include <doctest.h>

#include <functional>

#include "crowdpair/predict_eval.h"
#include "crowdpair/synth.h"
#include "test_support.h"

using namespace crowdpair;

namespace {

// MAP label by brute force: the joint Pr(Y = k, observed responses) is the
// sum over every completion of the unobserved responses of
// d(k) prod_m A_m(x_m, k); ties to the lowest k. Products only, no logs.
int brute_force_map(const ModelEstimate& model, const std::vector<int>& observed) {
  const int k_total = model.n_classes();
  const int m_total = model.n_annotators();
  std::vector<double> joint(k_total, 0.0);
  std::vector<int> x(m_total, 0);
  std::function<void(int)> rec = [&](int m) {
    if (m == m_total) {
      for (int k = 0; k < k_total; ++k) {
        double p = model.prior(k);
        for (int a = 0; a < m_total; ++a) p *= model.confusions[a](x[a], k);
        joint[k] += p;
      }
      return;
    }
    if (observed[m] >= 0) {
      x[m] = observed[m];
      rec(m + 1);
      return;
    }
    for (int j = 0; j < k_total; ++j) {
      x[m] = j;
      rec(m + 1);
    }
  };
  rec(0);
  int best = 0;
  for (int k = 1; k < k_total; ++k)
    if (joint[k] > joint[best]) best = k;
  return best + 1;
}

}  // namespace

TEST_CASE("single identity annotator predicts its own labels") {
  const ModelEstimate model({ConfusionMatrix::identity(3)}, PriorPMF::uniform(3));
  LabelDataset ds(3, 1, 3, {{1, 1, 3}, {2, 1, 1}, {3, 1, 2}});
  CHECK(map_predict(model, ds).labels == std::vector<int>{3, 1, 2});
}

TEST_CASE("uniform model ties to class 1; unlabeled items take argmax d") {
  const MatrixXd u = MatrixXd::Constant(3, 3, 1.0 / 3);
  const ModelEstimate flat({ConfusionMatrix(u), ConfusionMatrix(u)}, PriorPMF::uniform(3));
  LabelDataset ds(3, 2, 3, {{1, 1, 3}, {2, 2, 2}, {2, 1, 3}});
  CHECK(map_predict(flat, ds).labels == std::vector<int>{1, 1, 1});

  VectorXd d(3);
  d << 0.2, 0.1, 0.7;
  const ModelEstimate skewed({ConfusionMatrix(u), ConfusionMatrix(u)}, PriorPMF(d));
  const Prediction p = map_predict(skewed, ds);
  CHECK(p.labels[2] == 3);
  CHECK(p.posteriors.row(2).transpose() == d);
}

TEST_CASE("MAP equals brute-force enumeration, K=3 M=4, 50 items") {
  std::mt19937_64 rng(31);
  const ModelEstimate model = testing::random_model(4, 3, rng);
  std::uniform_int_distribution<int> label(0, 3);  // 0 = absent
  std::vector<Response> rs;
  std::vector<std::vector<int>> observed(50, std::vector<int>(4, -1));
  for (int n = 0; n < 50; ++n)
    for (int m = 0; m < 4; ++m) {
      const int x = label(rng);
      if (x == 0) continue;
      rs.push_back({n + 1, m + 1, x});
      observed[n][m] = x - 1;
    }
  const Prediction p = map_predict(model, LabelDataset(50, 4, 3, rs));
  for (int n = 0; n < 50; ++n) CHECK(p.labels[n] == brute_force_map(model, observed[n]));
}

TEST_CASE("posteriors match scaled direct products; threads do not matter") {
  std::mt19937_64 rng(32);
  const ModelEstimate model = testing::random_model(5, 4, rng);
  SynthConfig sc;
  sc.n_items = 300;
  sc.n_annotators = 5;
  sc.n_classes = 4;
  sc.p = 0.6;
  sc.seed = 2;
  const LabelDataset ds = generate(sc).dataset;
  const Prediction p = map_predict(model, ds);
  CHECK((p.posteriors.rowwise().sum().array() - 1.0).abs().maxCoeff() < 1e-12);

  // Unnormalized products times an arbitrary positive per-item constant
  // normalize to the same posterior and share its argmax.
  std::uniform_real_distribution<double> scale(1e-3, 1e3);
  MatrixXd direct = MatrixXd::Zero(300, 4);
  for (int n = 0; n < 300; ++n) direct.row(n) = scale(rng) * model.prior.probs().transpose();
  for (const Response& r : ds.responses()) {
    direct.row(r.item - 1).array() *= model.confusion(r.annotator - 1).row(r.label - 1).array();
  }
  for (int n = 0; n < 300; ++n) {
    const VectorXd row = direct.row(n).transpose() / direct.row(n).sum();
    CHECK((row - p.posteriors.row(n).transpose()).cwiseAbs().maxCoeff() < 1e-12);
    Eigen::Index arg = 0;
    direct.row(n).maxCoeff(&arg);
    CHECK(p.labels[n] == arg + 1);
  }

  const Prediction q = map_predict(model, ds, 1e-6, 4);
  CHECK(p.labels == q.labels);
  CHECK(p.posteriors == q.posteriors);
}

TEST_CASE("mse hand value and permutation invariance") {
  MatrixXd a(2, 2);
  a << 0.9, 0.1, 0.1, 0.9;
  CHECK(std::abs(mse(a, MatrixXd::Identity(2, 2)) - 0.02) <= 1e-12);
  std::mt19937_64 rng(33);
  for (int t = 0; t < 20; ++t) {
    const int k = 2 + t % 4;
    const MatrixXd truth = testing::random_stochastic(k, k, rng);
    const MatrixXd est = testing::random_stochastic(k, k, rng);
    CHECK(mse(truth, truth) == 0.0);
    auto perms = testing::all_permutations(k);
    const auto& pi = perms[(t * 7) % perms.size()];
    CHECK(mse(testing::permute_cols(truth, pi), truth) == 0.0);
    CHECK(mse(est, truth) == doctest::Approx(testing::brute_force_mse(est, truth)));
    CHECK(mse(testing::permute_cols(est, pi), testing::permute_cols(truth, pi)) ==
          doctest::Approx(mse(est, truth)));
  }
  CHECK_THROWS_AS(mse(MatrixXd::Identity(2, 2), MatrixXd::Identity(3, 3)), Error);
}

TEST_CASE("model_mse shares one permutation; per-annotator mode does not") {
  std::mt19937_64 rng(34);
  const ModelEstimate truth = testing::random_model(3, 3, rng);
  std::vector<ConfusionMatrix> shifted;
  for (int m = 0; m < 3; ++m)
    shifted.emplace_back(testing::permute_cols(truth.confusion(m), {2, 0, 1}));
  const ModelEstimate est(shifted, truth.prior);
  const ModelMse shared = model_mse(est, truth);
  CHECK(shared.average <= 1e-30);
  CHECK(shared.permutation == std::vector<int>{2, 0, 1});
  const ModelEstimate back = relabel_classes(est, shared.permutation);
  for (int m = 0; m < 3; ++m) CHECK(back.confusion(m) == truth.confusion(m));

  // One annotator out of step: shared mode charges it, per-annotator does not.
  shifted[1] = ConfusionMatrix(truth.confusion(1));
  const ModelEstimate mixed(shifted, truth.prior);
  CHECK(model_mse(mixed, truth).average > 1e-6);
  CHECK(model_mse(mixed, truth, PermutationMode::kPerAnnotator).average <= 1e-30);
}

TEST_CASE("classification error arithmetic") {
  const std::vector<int> truth = {1, 2, 3, 1, 2, 3, 1, 2, 3, 1};
  CHECK(classification_error(truth, truth) == 0.0);
  std::vector<int> wrong = truth;
  for (int& v : wrong) v = v % 3 + 1;
  CHECK(classification_error(wrong, truth) == 100.0);
  std::vector<int> three = truth;
  three[0] = 2;
  three[4] = 1;
  three[9] = 3;
  CHECK(classification_error(three, truth) == doctest::Approx(30.0));
  std::vector<std::optional<int>> flagged(truth.begin(), truth.end());
  flagged[3].reset();
  CHECK(classification_error(flagged, truth) == doctest::Approx(10.0));
  CHECK_THROWS_AS(classification_error(std::vector<int>{1, 2}, std::vector<int>{1}), Error);
}
