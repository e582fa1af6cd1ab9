#include <gtest/gtest.h>

#include <cmath>

#include "cuber/network.hpp"
#include "support.hpp"

using namespace cuber;
using cuber::test::max_relative_error;
using cuber::test::numeric_gradient;
using cuber::test::random_matrix;

namespace {

Layer linear(Matrix w, std::vector<double> b, Activation act = Activation::identity) {
  return Layer{std::move(w), std::move(b), act};
}

/// Head-only network computing x W' + b.
Network single_linear(Matrix w, std::vector<double> b) {
  Network net({}, HeadMode::multi, w.cols());
  net.set_head(0, linear(std::move(w), std::move(b)));
  return net;
}

Network random_net(Rng& rng, std::size_t in, std::vector<std::size_t> hidden, std::size_t classes, HeadMode mode,
                   int heads = 1) {
  Network net = Network::create(in, hidden, mode, rng);
  for (int t = 0; t < heads; ++t) net.ensure_head(t, classes, rng);
  // Non-zero biases so the bias gradients are exercised.
  std::normal_distribution<double> n(0.0, 0.1);
  for (auto& l : net.body())
    for (double& b : l.bias) b = n(rng);
  return net;
}

Dataset make_random_data(Rng& rng, std::size_t n, std::size_t d, int classes) {
  Dataset out{random_matrix(n, d, rng), std::vector<int>(n)};
  std::uniform_int_distribution<int> y(0, classes - 1);
  for (int& v : out.labels) v = y(rng);
  return out;
}

double batch_loss(const Network& net, const Dataset& d, TaskId task, LossKind kind) {
  return detail::loss_and_logit_grad(predict(net, d.features, task), d.labels, kind, nullptr);
}

}  // namespace

TEST(Forward, IdentityLayerPassesInputThrough) {
  const Network net = single_linear(Matrix::identity(2), {0, 0});
  const Matrix x = Matrix::from_rows({{0.5, -2.0}});
  EXPECT_EQ(forward(net, x, 0).logits, x);
}

TEST(Forward, ZeroWeightsGiveZeroLogits) {
  const Network net = single_linear(Matrix(3, 2), {0, 0, 0});
  EXPECT_EQ(forward(net, Matrix::from_rows({{4, 5}}), 0).logits, Matrix(1, 3));
}

TEST(Forward, HandComputedTwoLayerRelu) {
  Network net({linear(Matrix::from_rows({{1, -1}, {2, 1}}), {0, 0.5}, Activation::relu)}, HeadMode::multi);
  net.set_head(0, linear(Matrix::from_rows({{1, 1}}), {-1}));
  // z1 = (1 - 2, 2 + 2 + 0.5) = (-1, 4.5) -> relu (0, 4.5) -> 4.5 - 1
  const ForwardTrace t = forward(net, Matrix::from_rows({{1, 2}}), 0);
  EXPECT_DOUBLE_EQ(t.logits(0, 0), 3.5);
  ASSERT_EQ(t.inputs.size(), 2u);
  EXPECT_EQ(t.inputs[1], Matrix::from_rows({{0, 4.5}}));
}

TEST(Forward, Errors) {
  Rng rng(1);
  const Network net = random_net(rng, 3, {4}, 2, HeadMode::multi);
  EXPECT_THROW(forward(net, Matrix(1, 2), 0), InvalidInput);
  EXPECT_THROW(forward(net, Matrix(1, 3), 7), InvalidInput);
}

TEST(Forward, Deterministic) {
  Rng a(5), b(5);
  const Network n1 = random_net(a, 4, {6, 5}, 3, HeadMode::multi);
  const Network n2 = random_net(b, 4, {6, 5}, 3, HeadMode::multi);
  Rng data_rng(6);
  const Matrix x = random_matrix(7, 4, data_rng);
  const ForwardTrace t1 = forward(n1, x, 0), t2 = forward(n2, x, 0);
  EXPECT_EQ(t1.logits, t2.logits);
  for (std::size_t l = 0; l < t1.inputs.size(); ++l) EXPECT_EQ(t1.inputs[l], t2.inputs[l]);
}

TEST(Forward, MultiHeadIsolation) {
  Rng rng(7);
  Network net = random_net(rng, 3, {5}, 2, HeadMode::multi, 2);
  const Matrix x = random_matrix(4, 3, rng);
  const Matrix before = predict(net, x, 0);
  for (double& w : net.head(1).weight.data()) w = std::numeric_limits<double>::quiet_NaN();
  EXPECT_EQ(predict(net, x, 0), before);
}

TEST(Forward, SingleHeadSharedAcrossTasks) {
  Rng rng(8);
  Network net = random_net(rng, 3, {5}, 2, HeadMode::single);
  EXPECT_TRUE(net.has_head(4));
  EXPECT_EQ(net.shared_depth(), 2u);
  const Matrix x = random_matrix(2, 3, rng);
  EXPECT_EQ(predict(net, x, 0), predict(net, x, 4));
}

TEST(Backward, MseZeroAtOneHotLogits) {
  const Network net = single_linear(Matrix::identity(3), {0, 0, 0});
  const ForwardTrace t = forward(net, Matrix::from_rows({{0, 1, 0}, {0, 0, 1}}), 0);
  const BackwardResult r = backward(net, t, std::vector<int>{1, 2}, LossKind::mse);
  EXPECT_EQ(r.loss, 0.0);
  EXPECT_EQ(r.grads.weight[0], Matrix(3, 3));
}

TEST(Backward, SingleLinearMseClosedForm) {
  const Matrix w = Matrix::from_rows({{0.5, -1.0}, {2.0, 0.25}});
  const Network net = single_linear(w, {0.1, -0.2});
  const Matrix x = Matrix::from_rows({{1.5, -0.5}});
  const BackwardResult r = backward(net, forward(net, x, 0), std::vector<int>{0}, LossKind::mse);
  // y_hat = W x + b = (0.75 + 0.5 + 0.1, 3 - 0.125 - 0.2); target (1, 0)
  const double e0 = 1.35 - 1.0, e1 = 2.675;
  EXPECT_NEAR(r.loss, e0 * e0 + e1 * e1, 1e-14);
  const Matrix expect = Matrix::from_rows({{2 * e0 * 1.5, 2 * e0 * -0.5}, {2 * e1 * 1.5, 2 * e1 * -0.5}});
  EXPECT_LE(max_abs_diff(r.grads.weight[0], expect), 1e-14);
  EXPECT_NEAR(r.grads.bias[0][0], 2 * e0, 1e-14);
  EXPECT_NEAR(r.grads.bias[0][1], 2 * e1, 1e-14);
}

TEST(Backward, LabelOutOfRangeThrows) {
  const Network net = single_linear(Matrix::identity(2), {0, 0});
  const ForwardTrace t = forward(net, Matrix(1, 2), 0);
  EXPECT_THROW(backward(net, t, std::vector<int>{2}, LossKind::cross_entropy), InvalidInput);
  EXPECT_THROW(backward(net, t, std::vector<int>{0, 1}, LossKind::cross_entropy), InvalidInput);
}

TEST(Backward, MatchesFiniteDifferencesOnRandomNets) {
  Rng rng(42);
  for (int trial = 0; trial < 24; ++trial) {
    const LossKind kind = trial % 2 ? LossKind::mse : LossKind::cross_entropy;
    const HeadMode mode = trial % 3 == 0 ? HeadMode::single : HeadMode::multi;
    std::vector<std::size_t> hidden;
    for (int l = 0; l < 1 + trial % 3; ++l) hidden.push_back(3 + (trial + l) % 4);
    Network net = random_net(rng, 4, hidden, 3, mode);
    const Dataset d = make_random_data(rng, 5, 4, 3);
    const BackwardResult r = backward(net, forward(net, d.features, 0), d.labels, kind);
    auto f = [&] { return batch_loss(net, d, 0, kind); };
    for (std::size_t l = 0; l < net.depth(); ++l) {
      Layer& layer = net.layer(l, 0);
      const Matrix num = numeric_gradient(layer.weight, f);
      EXPECT_LT(max_relative_error(r.grads.weight[l].data(), num.data()), 1e-4) << "trial " << trial << " layer " << l;
      const auto numb = numeric_gradient(layer.bias, f);
      EXPECT_LT(max_relative_error(r.grads.bias[l], numb), 1e-4) << "trial " << trial << " bias " << l;
    }
  }
}

TEST(SgdEpoch, ConvexMseLossDecreases) {
  Rng rng(9);
  const Matrix w_true = random_matrix(2, 3, rng);
  Dataset d{random_matrix(60, 3, rng), std::vector<int>(60)};
  const Matrix scores = matmul_nt(d.features, w_true);
  for (std::size_t i = 0; i < 60; ++i) d.labels[i] = scores(i, 0) > scores(i, 1) ? 0 : 1;
  Network net = single_linear(Matrix(2, 3), {0, 0});
  double prev = dataset_loss(net, d, 0, LossKind::mse);
  for (int e = 0; e < 20; ++e) {
    sgd_epoch(net, d, 0, 0.005, 60, LossKind::mse, rng);  // full batch: deterministic descent
    const double now = dataset_loss(net, d, 0, LossKind::mse);
    EXPECT_LE(now, prev + 1e-12);
    prev = now;
  }
}

TEST(SgdEpoch, ZeroingTransformAndZeroLrKeepWeights) {
  Rng rng(10);
  Network net = random_net(rng, 3, {4}, 2, HeadMode::multi);
  const Network before = net;
  const Dataset d = make_random_data(rng, 10, 3, 2);
  sgd_epoch(net, d, 0, 0.1, 4, LossKind::cross_entropy, rng, [](LayerGradients& g) { g *= 0.0; });
  EXPECT_EQ(net.body()[0].weight, before.body()[0].weight);
  EXPECT_EQ(net.head(0).weight, before.head(0).weight);
  sgd_epoch(net, d, 0, 0.0, 4, LossKind::cross_entropy, rng);
  EXPECT_EQ(net.body()[0].weight, before.body()[0].weight);
  EXPECT_THROW(sgd_epoch(net, Dataset{Matrix(0, 3), {}}, 0, 0.1, 4, LossKind::mse, rng), InvalidInput);
}

TEST(EarlyStop, DecreasingLossNeverDecays) {
  TrainSchedule s;
  s.max_epochs = 25;
  double v = 10.0;
  const TrainStats st = run_schedule(s, [](double) { return 0.0; }, [&] { return v -= 0.1; });
  EXPECT_EQ(st.epochs, 25);
  EXPECT_EQ(st.lr_decays, 0);
  EXPECT_DOUBLE_EQ(st.final_lr, s.init_lr);
}

TEST(EarlyStop, IncreasingLossDecaysEverySevenEpochs) {
  TrainSchedule s;  // init 1e-2, min 1e-5, decay 2, patience 6
  s.max_epochs = 1000;
  double v = 0.0;
  std::vector<double> lrs;
  const TrainStats st = run_schedule(
      s, [&](double lr) { lrs.push_back(lr); return 0.0; }, [&] { return v += 1.0; });
  // 1e-2 / 2^10 < 1e-5 <= 1e-2 / 2^9: ten decays, seven epochs each.
  EXPECT_EQ(st.lr_decays, 10);
  EXPECT_EQ(st.epochs, 70);
  EXPECT_DOUBLE_EQ(lrs[6], 1e-2);
  EXPECT_DOUBLE_EQ(lrs[7], 5e-3);
}

TEST(EarlyStop, MinLrEqualToInitStopsAtFirstDecay) {
  TrainSchedule s;
  s.min_lr = s.init_lr;
  double v = 0.0;
  const TrainStats st = run_schedule(s, [](double) { return 0.0; }, [&] { return v += 1.0; });
  EXPECT_EQ(st.epochs, 7);
  EXPECT_EQ(st.lr_decays, 1);
}

TEST(EarlyStop, EmptyValidationRejected) {
  Rng rng(3);
  Network net = single_linear(Matrix::identity(2), {0, 0});
  const Dataset train{Matrix::identity(2), {0, 1}};
  EXPECT_THROW(train_with_early_stop(net, train, Dataset{Matrix(0, 2), {}}, 0, TrainSchedule{}, 2,
                                     LossKind::cross_entropy, rng),
               InvalidInput);
}

TEST(Evaluate, Examples) {
  const Network net = single_linear(Matrix::identity(2), {0, 0});
  EXPECT_DOUBLE_EQ(evaluate(net, Dataset{Matrix::from_rows({{1, 0}, {0, 1}}), {0, 1}}, 0), 1.0);
  const Network constant = single_linear(Matrix(2, 2), {1, 0});
  EXPECT_DOUBLE_EQ(evaluate(constant, Dataset{Matrix(4, 2), {0, 1, 0, 1}}, 0), 0.5);
  const Dataset four{Matrix::from_rows({{1, 0}, {0, 1}, {2, 1}, {1, 3}}), {0, 1, 1, 1}};
  EXPECT_DOUBLE_EQ(evaluate(net, four, 0), 0.75);
  EXPECT_THROW(evaluate(net, Dataset{Matrix(0, 2), {}}, 0), InvalidInput);
}

TEST(ValidationSplit, TenPercentDeterministic) {
  Rng a(4), b(4);
  const Dataset d = make_random_data(a, 50, 2, 3);
  Rng s1(77), s2(77);
  const auto [t1, v1] = split_validation(d, 0.1, s1);
  const auto [t2, v2] = split_validation(d, 0.1, s2);
  EXPECT_EQ(v1.size(), 5u);
  EXPECT_EQ(t1.size(), 45u);
  EXPECT_EQ(v1.features, v2.features);
  EXPECT_EQ(t1.labels, t2.labels);
}

TEST(Init, UniformGlorotRange) {
  Rng rng(2);
  const Layer l = make_layer(30, 20, Activation::relu, rng);
  const double a = std::sqrt(6.0 / 50.0);
  for (double w : l.weight.data()) EXPECT_LE(std::abs(w), a);
  for (double b : l.bias) EXPECT_EQ(b, 0.0);
}
