#include <gtest/gtest.h>

#include "playtest/policy.hpp"

using namespace playtest;

namespace {

Eigen::MatrixXd random_matrix(SplitMix64& rng, Eigen::Index rows, Eigen::Index cols) {
  Eigen::MatrixXd m(rows, cols);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = 2.0 * rng.uniform() - 1.0;
  return m;
}

double max_relative_error(PolicyNet net, const Eigen::MatrixXd& x, const std::vector<int>& y) {
  Gradients g;
  loss_and_gradient(net, x, y, &g);
  const double eps = 1e-5;
  double worst = 0.0;
  auto check = [&](auto& param, const auto& analytic) {
    for (Eigen::Index i = 0; i < param.size(); ++i) {
      double saved = param.data()[i];
      param.data()[i] = saved + eps;
      double up = loss_and_gradient(net, x, y, nullptr);
      param.data()[i] = saved - eps;
      double down = loss_and_gradient(net, x, y, nullptr);
      param.data()[i] = saved;
      double numeric = (up - down) / (2 * eps);
      double a = analytic.data()[i];
      double denom = std::max(1e-7, std::abs(a) + std::abs(numeric));
      worst = std::max(worst, std::abs(a - numeric) / denom);
    }
  };
  check(net.w1, g.w1);
  check(net.b1, g.b1);
  check(net.w2, g.w2);
  check(net.b2, g.b2);
  return worst;
}

// Runs right across the first hole and falls in.
Trace hole_trace() { return replay(default_script(), 4, actions_from_letters("RRRRRNNNNNNN")); }

}  // namespace

TEST(Featurize, InitialFrameByHand) {
  Eigen::VectorXd v = featurize(observe(new_world(default_script(), default_level(), 0)));
  Eigen::VectorXd want(kFeatureCount);
  want << 1.0 / 32, 1.0 / 8, 1.0 / 32, 0.0, 1.0, 10.0 / 32, 0.0, 0.0, 0.0;
  EXPECT_TRUE(v.isApprox(want)) << v.transpose();
}

TEST(Featurize, GameOverAndNoCoins) {
  Trace t = hole_trace();
  ASSERT_TRUE(t.frames.back().game_over);
  EXPECT_EQ(featurize(t.frames.back())(8), 1.0);
  ObservationFrame f = t.initial;
  for (auto& a : f.actors)
    if (a.kind == ActorKind::Coin) a.alive = false;
  Eigen::VectorXd v = featurize(f);
  EXPECT_EQ(v(2), 0.0);
  EXPECT_EQ(v(3), 0.0);
  EXPECT_EQ(v(4), 0.0);
}

TEST(Policy, SoftmaxSumsToOne) {
  SplitMix64 rng(1);
  for (int i = 0; i < 500; ++i) {
    PolicyNet net = PolicyNet::random(kFeatureCount, 16, 4, rng.next());
    Eigen::VectorXd x = random_matrix(rng, kFeatureCount, 1) * 5.0;
    Eigen::VectorXd p = net.probabilities(x);
    EXPECT_NEAR(p.sum(), 1.0, 1e-9);
    EXPECT_GE(p.minCoeff(), 0.0);
  }
}

TEST(Policy, GradientMatchesFiniteDifferencesSmallNet) {
  SplitMix64 rng(2);
  for (int trial = 0; trial < 20; ++trial) {
    PolicyNet net = PolicyNet::random(6, 3, 4, rng.next());
    net.b1 = random_matrix(rng, 3, 1);
    net.b2 = random_matrix(rng, 4, 1);
    Eigen::MatrixXd x = random_matrix(rng, 6, 5);
    std::vector<int> y;
    for (int j = 0; j < 5; ++j) y.push_back(static_cast<int>(rng.below(4)));
    EXPECT_LT(max_relative_error(net, x, y), 1e-4);
  }
}

TEST(Train, OverfitsSingleExpertTrace) {
  Trace t = hole_trace();
  TrainConfig cfg;
  cfg.epochs = 800;
  PolicyNet net = train_policy({t}, stmt::kHole, cfg);
  Dataset d = build_dataset({t}, stmt::kHole, 32, 8);
  ASSERT_FALSE(d.labels.empty());
  std::size_t right = 0;
  for (Eigen::Index j = 0; j < d.inputs.cols(); ++j) right += net.act(d.inputs.col(j)) == d.labels[static_cast<std::size_t>(j)];
  EXPECT_GE(static_cast<double>(right) / static_cast<double>(d.labels.size()), 0.95);
  EXPECT_LE(net.loss_history.back(), net.loss_history.front());
  EXPECT_EQ(net.activation_store.size(), d.labels.size());
}

TEST(Train, NothingToLearnFrom) {
  EXPECT_THROW(train_policy({}, stmt::kCoin), PreconditionError);
  Trace idle = replay(default_script(), 0, std::vector<Action>(10, Action::NoOp));
  EXPECT_THROW(train_policy({idle}, stmt::kCoin), PreconditionError);
}

TEST(Train, DeterministicGivenSeed) {
  Trace t = hole_trace();
  EXPECT_EQ(serialize_policy(train_policy({t}, stmt::kHole)), serialize_policy(train_policy({t}, stmt::kHole)));
}

TEST(Train, CoveringCount) {
  std::vector<Trace> ts = {hole_trace(), replay(default_script(), 0, actions_from_letters("NN")), hole_trace()};
  EXPECT_EQ(traces_covering(ts, stmt::kHole), 2u);
  EXPECT_EQ(traces_covering(ts, stmt::kGoal), 0u);
}

TEST(Surprise, TrainingFrameIsZero) {
  PolicyNet net = train_policy({hole_trace()}, stmt::kHole);
  EXPECT_NEAR(surprise(net, hole_trace().initial), 0.0, 1e-12);
}

TEST(Surprise, SingleStoredVector) {
  SplitMix64 rng(5);
  PolicyNet net = PolicyNet::random(kFeatureCount, 16, 4, 9);
  Eigen::VectorXd v = random_matrix(rng, 16, 1);
  net.activation_store = {v};
  Eigen::VectorXd x = random_matrix(rng, kFeatureCount, 1);
  EXPECT_NEAR(surprise(net, x), (net.hidden_activation(x) - v).norm(), 1e-12);
  net.activation_store.clear();
  EXPECT_THROW(surprise(net, x), PreconditionError);
}

TEST(Surprise, NonIncreasingAsStoreGrows) {
  SplitMix64 rng(6);
  for (int trial = 0; trial < 50; ++trial) {
    PolicyNet net = PolicyNet::random(kFeatureCount, 16, 4, rng.next());
    Eigen::VectorXd x = random_matrix(rng, kFeatureCount, 1);
    double prev = std::numeric_limits<double>::infinity();
    for (int k = 0; k < 30; ++k) {
      net.activation_store.push_back(random_matrix(rng, 16, 1));
      double s = surprise(net, x);
      EXPECT_LE(s, prev);
      EXPECT_GE(s, 0.0);
      prev = s;
    }
  }
}

TEST(Dynamic, BudgetOfOneMissesDistantTarget) {
  PolicyNet net = train_policy({hole_trace()}, stmt::kHole);
  net.target_statement = stmt::kGoal;
  DynamicVerdict v = run_dynamic_test(net, default_script(), 1, 1, 10.0);
  EXPECT_FALSE(v.target_reached);
  EXPECT_EQ(v.trace.length(), 1u);
  EXPECT_THROW(run_dynamic_test(net, default_script(), 1, 0, 10.0), PreconditionError);
}

TEST(Dynamic, ReachesTrainedTargetAndEvaluatesAssertions) {
  TrainConfig cfg;
  cfg.epochs = 800;
  PolicyNet net = train_policy({hole_trace()}, stmt::kHole, cfg);
  DynamicVerdict v = run_dynamic_test(net, default_script(), 4, 50, 1e9,
                                      {parse_assertion("GLOBAL IF Compare(Attr(Player,y), <, 0) THEN GameOver")});
  EXPECT_TRUE(v.target_reached);
  EXPECT_FALSE(v.surprise_alarm);
  ASSERT_EQ(v.assertion_verdicts.size(), 1u);
  EXPECT_NE(v.assertion_verdicts[0].status, Verdict::Status::Violated);
  EXPECT_NEAR(v.max_surprise, 0.0, 1e-9);  // retraces its own training states
}

TEST(Export, PolicyRoundTrip) {
  PolicyNet net = train_policy({hole_trace()}, stmt::kHole);
  std::string text = serialize_policy(net);
  PolicyNet back = parse_policy(text);
  EXPECT_EQ(back.target_statement, stmt::kHole);
  EXPECT_EQ(back.activation_store.size(), net.activation_store.size());
  EXPECT_TRUE(back.w1.isApprox(net.w1, 1e-8));
  EXPECT_TRUE(back.w2.isApprox(net.w2, 1e-8));
  EXPECT_EQ(serialize_policy(back), text);
  EXPECT_THROW(parse_policy("POLICYNET\t9\t16\t4\n"), IntegrityError);
}

TEST(Export, TrainConfigFile) {
  TrainConfig c = parse_train_config("# defaults\nlearning_rate = 0.1\nepochs=5\nbatch=4\nhidden=8\nseed=3\n");
  EXPECT_EQ(c.learning_rate, 0.1);
  EXPECT_EQ(c.epochs, 5);
  EXPECT_EQ(c.hidden, 8);
  EXPECT_THROW(parse_train_config("momentum=0.9\n"), IntegrityError);
}
