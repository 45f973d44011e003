#include <gtest/gtest.h>

#include <cmath>
#include <numeric>
#include <random>

#include "hierage/errors.hpp"
#include "hierage/grad_check.hpp"
#include "hierage/head.hpp"
#include "hierage/losses.hpp"
#include "test_support.hpp"

using namespace hierage;
using hierage::testing::random_matrix;
using hierage::testing::random_values;

namespace {

Tensor row_softmax(const Tensor& logits) {
  Tape t(false);
  return t.softmax(logits);
}

Tensor one_hot_rows(std::size_t n, std::size_t c, const std::vector<std::size_t>& hot) {
  std::vector<double> v(n * c, 0.0);
  for (std::size_t i = 0; i < n; ++i) v[i * c + hot[i]] = 1.0;
  return Tensor::matrix(n, c, v);
}

HeadParams random_head(std::size_t d, std::size_t c, std::uint64_t seed, std::size_t hidden = 0) {
  std::mt19937_64 rng(seed);
  HeadConfig cfg;
  cfg.hidden_layers = hidden;
  HeadParams p = HeadParams::init(d, c, cfg, rng);
  std::normal_distribution<double> n(0.0, 0.2);
  for (auto& [name, t] : p.named())
    for (double& x : Tensor(t).mutable_values()) x += n(rng);
  return p;
}

}  // namespace

TEST(AgeBins, Validation) {
  EXPECT_THROW(AgeBins({1.0}), ContractError);
  EXPECT_THROW(AgeBins({1.0, 1.0}), ContractError);
  EXPECT_THROW(AgeBins({2.0, 1.0}), ContractError);
  const AgeBins b = AgeBins::uniform(1, 1, 75);
  EXPECT_EQ(b.size(), 75u);
  EXPECT_EQ(b[74], 75.0);
  EXPECT_EQ(b.nearest(30.4), 29u);
  EXPECT_EQ(b.nearest(30.5), 29u);  // ties go to the lower bin
  EXPECT_EQ(b.nearest(-4.0), 0u);
  EXPECT_EQ(b.nearest(99.0), 74u);
}

TEST(AgePosterior, Validation) {
  EXPECT_NO_THROW(AgePosterior({0.25, 0.75}));
  EXPECT_THROW(AgePosterior({0.5, 0.6}), ContractError);
  EXPECT_THROW(AgePosterior({-0.1, 1.1}), ContractError);
}

TEST(Classify, ZeroWeightsGiveUniformPosterior) {
  HeadParams p = random_head(6, 4, 1);
  for (auto& [name, t] : p.named())
    for (double& x : Tensor(t).mutable_values()) x = 0.0;
  Tape tape(false);
  const Tensor logits = classify(tape, Tensor::vector({1, 2, 3, 4, 5, 6}), p);
  for (double z : logits.values()) EXPECT_EQ(z, 0.0);
  const AgePosterior post = AgePosterior::from_logits(logits.values());
  for (double q : post.values()) EXPECT_DOUBLE_EQ(q, 0.25);
  const Tensor r = residuals(tape, Tensor::vector({1, 2, 3, 4, 5, 6}), p);
  for (double x : r.values()) EXPECT_EQ(x, 0.0);
}

TEST(Classify, LogitGapConcentratesPosterior) {
  std::vector<double> logits(5, 0.0);
  logits[2] = 50.0;
  const AgePosterior post = AgePosterior::from_logits(logits);
  EXPECT_NEAR(post[2], 1.0, 1e-15);
  for (std::size_t c : {0u, 1u, 3u, 4u}) EXPECT_LT(post[c], 1e-20);
}

TEST(Residuals, BiasOnlyAndAffineOracle) {
  HeadParams p = random_head(4, 3, 2);
  std::mt19937_64 rng(3);
  const Tensor x = Tensor::vector(random_values(4, rng));
  Tape tape(false);
  const Tensor r = residuals(tape, x, p);
  for (std::size_t c = 0; c < 3; ++c) {
    double expect = p.regressor.bias[c];
    for (std::size_t j = 0; j < 4; ++j) expect += x[j] * p.regressor.weight.at(j, c);
    EXPECT_NEAR(r[c], expect, 1e-14);
  }
  auto w = p.regressor.weight.mutable_values();
  std::fill(w.begin(), w.end(), 0.0);
  const Tensor b = residuals(tape, Tensor::vector(random_values(4, rng)), p);
  for (std::size_t c = 0; c < 3; ++c) EXPECT_EQ(b[c], p.regressor.bias[c]);
}

TEST(Classify, CrossEntropyGradient) {
  HeadParams p = random_head(6, 5, 4);
  std::mt19937_64 rng(5);
  const Tensor x = random_matrix(4, 6, rng);
  const std::vector<std::size_t> y{0, 4, 2, 2};
  auto named = p.named();
  std::vector<Tensor> params;
  for (auto& [n, t] : named) params.push_back(t);
  const auto loss = [&](Tape& t) { return cross_entropy(t, classify(t, x, p), y); };
  EXPECT_LT(grad_check(loss, params, 1e-6), 1e-5);
}

TEST(LocalEstimate, Examples) {
  const AgeBins bins = AgeBins::uniform(16, 1, 20);  // a_14 = 30
  EXPECT_EQ(local_estimate(14, 0.0, bins), 30.0);
  EXPECT_DOUBLE_EQ(local_estimate(14, -0.4, bins), 29.6);
  EXPECT_THROW(local_estimate(20, 0.0, bins), ContractError);
  std::mt19937_64 rng(6);
  const auto r = random_values(20, rng);
  for (std::size_t c = 0; c < 20; ++c) EXPECT_EQ(local_estimate(c, r[c], bins), 16.0 + c + r[c]);
}

TEST(InferAge, Examples) {
  const AgeBins bins = AgeBins::uniform(1, 1, 75);
  const std::vector<double> zero(75, 0.0);
  EXPECT_NEAR(infer_age(AgePosterior(std::vector<double>(75, 1.0 / 75.0)), zero, bins), 38.0, 1e-12);

  std::mt19937_64 rng(7);
  const auto r = random_values(75, rng);
  std::vector<double> hot(75, 0.0);
  hot[30] = 1.0;
  EXPECT_EQ(infer_age(AgePosterior(hot), r, bins), bins[30] + r[30]);
  EXPECT_THROW(infer_age(AgePosterior(hot), std::vector<double>(74, 0.0), bins), ShapeError);
}

TEST(InferAge, ConvexCombinationAndShiftInvariance) {
  const AgeBins bins = AgeBins::uniform(10, 5, 8);
  std::mt19937_64 rng(8);
  for (int trial = 0; trial < 200; ++trial) {
    auto logits = random_values(8, rng, 3.0);
    const auto r = random_values(8, rng, 2.0);
    const double a = infer_age(AgePosterior::from_logits(logits), r, bins);
    double lo = 1e300, hi = -1e300;
    for (std::size_t c = 0; c < 8; ++c) {
      lo = std::min(lo, bins[c] + r[c]);
      hi = std::max(hi, bins[c] + r[c]);
    }
    EXPECT_GE(a, lo - 1e-12);
    EXPECT_LE(a, hi + 1e-12);
    for (double& z : logits) z += 17.25;
    EXPECT_NEAR(infer_age(AgePosterior::from_logits(logits), r, bins), a, 1e-12);

    const auto post = AgePosterior::from_logits(logits);
    double expected_bin = 0.0;
    for (std::size_t c = 0; c < 8; ++c) expected_bin += post[c] * bins[c];
    EXPECT_NEAR(infer_age(post, std::vector<double>(8, 0.0), bins), expected_bin, 1e-12);
  }
}

TEST(InferAge, TapeFormMatchesAndReachesBothBranches) {
  const std::size_t d = 6, c = 5;
  HeadParams p = random_head(d, c, 9, 1);
  const AgeBins bins = AgeBins::uniform(20, 2, c);
  std::mt19937_64 rng(10);
  const Tensor x = random_matrix(3, d, rng);
  auto named = p.named();
  for (auto& [n, t] : named) t.set_requires_grad(true);
  Tape tape;
  const Tensor post = tape.softmax(classify(tape, x, p));
  const Tensor r = residuals(tape, x, p);
  const Tensor age = infer_age(tape, post, r, bins);
  for (std::size_t i = 0; i < 3; ++i) {
    std::vector<double> pi(c), ri(c);
    for (std::size_t k = 0; k < c; ++k) {
      pi[k] = post.at(i, k);
      ri[k] = r.at(i, k);
    }
    EXPECT_NEAR(age[i], infer_age(AgePosterior(pi), ri, bins), 1e-12);
  }
  tape.backward(tape.sum(tape.mul(age, age)));
  for (const Tensor* w : {&p.classifier.weight, &p.regressor.weight}) {
    double norm = 0.0;
    for (double g : w->grad()) norm += g * g;
    EXPECT_GT(norm, 0.0);
  }
}

TEST(CrossEntropy, Examples) {
  Tape tape(false);
  const std::vector<std::size_t> y{1};
  EXPECT_NEAR(cross_entropy(tape, Tensor::matrix(1, 3, {0, 0, 0}), y).item(), std::log(3.0), 1e-15);
  EXPECT_LT(cross_entropy(tape, Tensor::matrix(1, 3, {0, 50, 0}), y).item(), 1e-20);
  const std::vector<std::size_t> bad{3};
  EXPECT_THROW(cross_entropy(tape, Tensor::matrix(1, 3, {0, 0, 0}), bad), ContractError);

  std::mt19937_64 rng(11);
  const Tensor logits = random_matrix(4, 5, rng, false, 2.0);
  const std::vector<std::size_t> labels{0, 3, 4, 1};
  double oracle = 0.0;
  for (std::size_t i = 0; i < 4; ++i) {
    double z = 0.0;
    for (std::size_t c = 0; c < 5; ++c) z += std::exp(logits.at(i, c));
    oracle += -(logits.at(i, labels[i]) - std::log(z)) / 4.0;
  }
  EXPECT_NEAR(cross_entropy(tape, logits, labels).item(), oracle, 1e-13);
}

TEST(MeanVariance, WorkedExample) {
  const AgeBins bins({1, 2, 3});
  const Tensor post = Tensor::matrix(1, 3, {0.5, 0.25, 0.25});
  const std::vector<double> ages{2.0};
  Tape tape(false);
  const double expectation = 0.5 * 1 + 0.25 * 2 + 0.25 * 3;
  EXPECT_NEAR(mean_loss(tape, post, bins, ages).item(), (expectation - 2.0) * (expectation - 2.0) / 2.0,
              1e-12);
  EXPECT_NEAR(mean_loss(tape, post, bins, ages).item(), 0.03125, 1e-12);
  double var = 0.0;
  for (int c = 0; c < 3; ++c) var += post[c] * (bins[c] - expectation) * (bins[c] - expectation);
  EXPECT_NEAR(variance_loss(tape, post, bins).item(), var, 1e-12);
  EXPECT_NEAR(variance_loss(tape, post, bins).item(), 0.6875, 1e-12);
}

TEST(MeanVariance, OneHotIdentities) {
  const AgeBins bins = AgeBins::uniform(17, 1, 60);
  const std::vector<std::size_t> hot{0, 13, 59, 30};
  const Tensor post = one_hot_rows(4, 60, hot);
  std::vector<double> ages;
  for (std::size_t h : hot) ages.push_back(bins[h]);
  Tape tape(false);
  EXPECT_EQ(mean_loss(tape, post, bins, ages).item(), 0.0);
  EXPECT_EQ(variance_loss(tape, post, bins).item(), 0.0);
}

TEST(MeanVariance, NonNegativeAndPermutationInvariant) {
  std::mt19937_64 rng(12);
  const AgeBins bins({3, 7, 8, 15, 21, 30});
  std::vector<std::size_t> perm(6);
  std::iota(perm.begin(), perm.end(), 0);
  for (int trial = 0; trial < 100; ++trial) {
    const Tensor post = row_softmax(random_matrix(3, 6, rng, false, 2.0));
    const std::vector<double> ages = random_values(3, rng, 10.0);
    Tape tape(false);
    const double lm = mean_loss(tape, post, bins, ages).item();
    const double lv = variance_loss(tape, post, bins).item();
    EXPECT_GE(lm, 0.0);
    EXPECT_GT(lv, 0.0);

    std::shuffle(perm.begin(), perm.end(), rng);
    std::vector<double> centers(6), cols(18);
    for (std::size_t c = 0; c < 6; ++c) {
      centers[c] = bins[perm[c]];
      for (std::size_t i = 0; i < 3; ++i) cols[i * 6 + c] = post.at(i, perm[c]);
    }
    // Permuted centers need not be increasing, so evaluate the expectation directly.
    double oracle = 0.0;
    for (std::size_t i = 0; i < 3; ++i) {
      double e = 0.0;
      for (std::size_t c = 0; c < 6; ++c) e += cols[i * 6 + c] * centers[c];
      oracle += (e - ages[i]) * (e - ages[i]) / 6.0;
    }
    EXPECT_NEAR(lm, oracle, 1e-9 * std::max(1.0, oracle));
  }
}

TEST(MeanVariance, VarianceZeroOnlyForOneHot) {
  const AgeBins bins = AgeBins::uniform(1, 1, 5);
  Tape tape(false);
  // Tiny off-hot mass still shows up above 1e-9.
  const Tensor almost = Tensor::matrix(1, 5, {0.0, 1.0 - 1e-6, 1e-6, 0.0, 0.0});
  EXPECT_GT(variance_loss(tape, almost, bins).item(), 1e-9);
}

TEST(EnsembleL2, Examples) {
  Tape tape(false);
  const AgeBins bins({10, 20});
  const BatchLabels labels = BatchLabels::from_ages({15.0}, bins);
  EXPECT_NEAR(ensemble_l2(tape, Tensor::matrix(1, 2, {0.5, 0.5}), Tensor::matrix(1, 2, {0, 0}), bins, labels)
                  .item(),
              25.0, 1e-12);

  const AgeBins b3({10, 20, 30});
  const BatchLabels l3 = BatchLabels::from_ages({22.5}, b3);
  ASSERT_EQ(l3.bins[0], 1u);
  EXPECT_EQ(ensemble_l2(tape, Tensor::matrix(1, 3, {0, 1, 0}), Tensor::matrix(1, 3, {4, 2.5, -1}), b3, l3)
                .item(),
            0.0);
}

TEST(EnsembleL2, GradientSparsityBySoftAndHardMode) {
  const AgeBins bins = AgeBins::uniform(1, 1, 5);
  std::mt19937_64 rng(13);
  const Tensor post = row_softmax(random_matrix(1, 5, rng));
  const BatchLabels labels = BatchLabels::from_ages({3.2}, bins);
  for (EnsembleMode mode : {EnsembleMode::kSoft, EnsembleMode::kHard}) {
    Tensor r = Tensor::matrix(1, 5, random_values(5, rng), true);
    Tape tape;
    tape.backward(ensemble_l2(tape, post, r, bins, labels, mode));
    std::size_t nonzero = 0;
    for (double g : r.grad()) nonzero += g != 0.0;
    EXPECT_EQ(nonzero, mode == EnsembleMode::kSoft ? 5u : 1u);
  }
}

TEST(TotalLoss, WeightsAndErrors) {
  Tape tape(false);
  const auto s = [](double v) { return Tensor::scalar(v); };
  const LossWeights defaults;
  EXPECT_DOUBLE_EQ(total_loss(tape, {s(1), s(1), s(1), s(1)}, defaults).item(), 2.25);
  EXPECT_EQ(total_loss(tape, {s(0), s(0), s(0), s(0)}, defaults).item(), 0.0);
  LossWeights doubled = defaults;
  doubled.ensemble *= 2.0;
  const LossTerms terms{s(0.3), s(1.7), s(0.9), s(4.1)};
  EXPECT_DOUBLE_EQ(total_loss(tape, terms, doubled).item() - total_loss(tape, terms, defaults).item(),
                   defaults.ensemble * 4.1);
  try {
    total_loss(tape, {s(1), s(NAN), s(1), s(1)}, defaults);
    FAIL() << "expected NumericError";
  } catch (const NumericError& e) {
    EXPECT_NE(std::string(e.what()).find("mean"), std::string::npos) << e.what();
  }
  LossWeights negative = defaults;
  negative.variance = -1.0;
  EXPECT_THROW(negative.validate(), ContractError);
}

TEST(Losses, GradientsMatchFiniteDifferences) {
  std::mt19937_64 rng(14);
  const AgeBins bins({2, 3, 5, 8, 9, 12, 13});
  for (int trial = 0; trial < 5; ++trial) {
    Tensor logits = random_matrix(4, 7, rng, true);
    Tensor r = random_matrix(4, 7, rng, true);
    const BatchLabels labels = BatchLabels::from_ages(random_values(4, rng, 3.0), bins);
    std::vector<double> ages = labels.ages;
    for (double& a : ages) a += 7.0;
    const BatchLabels shifted = BatchLabels::from_ages(ages, bins);
    std::vector<Tensor> params{logits, r};
    const auto post = [&](Tape& t) { return t.softmax(logits); };
    EXPECT_LT(grad_check([&](Tape& t) { return cross_entropy(t, logits, shifted.bins); }, params, 1e-6), 1e-5);
    EXPECT_LT(grad_check([&](Tape& t) { return mean_loss(t, post(t), bins, shifted.ages); }, params, 1e-6),
              1e-5);
    EXPECT_LT(grad_check([&](Tape& t) { return variance_loss(t, post(t), bins); }, params, 1e-6), 1e-4);
    for (EnsembleMode mode : {EnsembleMode::kSoft, EnsembleMode::kHard}) {
      EXPECT_LT(grad_check([&](Tape& t) { return ensemble_l2(t, post(t), r, bins, shifted, mode); }, params,
                           1e-6),
                1e-4);
    }
    EXPECT_LT(grad_check(
                  [&](Tape& t) {
                    const Tensor p = post(t);
                    return total_loss(t,
                                      {cross_entropy(t, logits, shifted.bins), mean_loss(t, p, bins, shifted.ages),
                                       variance_loss(t, p, bins), ensemble_l2(t, p, r, bins, shifted)},
                                      LossWeights{});
                  },
                  params, 1e-6),
              1e-4);
  }
}
