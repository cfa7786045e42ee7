#include "frugalnn/dqn.hpp"
#include "frugalnn/qnetwork.hpp"

#include <gtest/gtest.h>

#include <algorithm>
#include <random>

using namespace frugalnn;

namespace {

using QD = QNetwork<double>;

QD random_net(int in, std::vector<int> hidden, int actions, std::uint64_t seed) {
  QD net(in, std::move(hidden), actions);
  std::mt19937_64 rng(seed);
  net.init_uniform(rng);
  return net;
}

QD::Mat random_inputs(int in, int batch, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  QD::Mat x(in, batch);
  for (Eigen::Index i = 0; i < x.size(); ++i) x.data()[i] = u(rng);
  return x;
}

// Straightforward per-sample forward pass written against the documented layout.
Eigen::VectorXd reference_q(const QD& net, const Eigen::VectorXd& x) {
  const auto& p = net.parameters();
  Eigen::VectorXd h = x;
  Eigen::Index off = 0;
  auto dense = [&](int rows, const Eigen::VectorXd& in) {
    Eigen::VectorXd out(rows);
    for (int r = 0; r < rows; ++r) {
      double s = 0.0;
      for (Eigen::Index c = 0; c < in.size(); ++c) s += p(off + c * rows + r) * in(c);
      out(r) = s;
    }
    off += rows * in.size();
    for (int r = 0; r < rows; ++r) out(r) += p(off + r);
    off += rows;
    return out;
  };
  for (int width : net.hidden()) {
    h = dense(width, h);
    for (Eigen::Index i = 0; i < h.size(); ++i) h(i) = h(i) > 0 ? h(i) : 0.0;
  }
  const double v = dense(1, h)(0);
  const Eigen::VectorXd a = dense(net.n_actions(), h);
  return (a.array() - a.mean() + v).matrix();
}

}  // namespace

TEST(QNetwork, ParameterLayout) {
  const QD net(3, {4, 5}, 2);
  EXPECT_EQ(net.parameter_count(), (4 * 3 + 4) + (5 * 4 + 5) + (1 * 5 + 1) + (2 * 5 + 2));
  EXPECT_EQ(net.layers().size(), 4u);
  EXPECT_THROW(QD(0, {}, 2), UsageError);
  EXPECT_THROW(QD(2, {0}, 2), UsageError);
}

TEST(QNetwork, ZeroParametersGiveZeroQ) {
  const QD net(4, {8, 8}, 5);
  std::mt19937_64 rng(1);
  const QD::Mat q = net.forward(random_inputs(4, 7, rng));
  EXPECT_EQ(q.cwiseAbs().maxCoeff(), 0.0);
}

TEST(QNetwork, MatchesReferenceForward) {
  std::mt19937_64 rng(2);
  for (int t = 0; t < 10; ++t) {
    const QD net = random_net(5, {6, 3}, 4, 100 + t);
    const QD::Mat x = random_inputs(5, 9, rng);
    const QD::Mat q = net.forward(x);
    for (int b = 0; b < 9; ++b) EXPECT_LE((q.col(b) - reference_q(net, x.col(b))).cwiseAbs().maxCoeff(), 1e-12);
  }
}

TEST(QNetwork, DuelingIdentity) {
  std::mt19937_64 rng(3);
  const QD net = random_net(6, {16, 12}, 7, 9);
  const QD::Mat x = random_inputs(6, 200, rng);
  const QD::Mat q = net.forward(x);
  const QD::Mat v = net.value(x);
  for (int b = 0; b < 200; ++b) EXPECT_NEAR(q.col(b).mean(), v(0, b), 1e-10);
}

TEST(QNetwork, GradientMatchesFiniteDifferences) {
  std::mt19937_64 rng(4);
  const int configs[][4] = {{2, 3, 0, 2}, {3, 4, 5, 3}, {5, 8, 6, 6}, {1, 2, 2, 2}};
  for (const auto& c : configs) {
    std::vector<int> hidden{c[1]};
    if (c[2] > 0) hidden.push_back(c[2]);
    QD net = random_net(c[0], hidden, c[3], rng());
    const QD::Mat x = random_inputs(c[0], 5, rng);
    std::vector<int> actions;
    for (int b = 0; b < 5; ++b) actions.push_back(static_cast<int>(rng() % c[3]));
    const QD::Vec y = QD::Vec::Random(5);

    QD::Vec grad;
    net.loss(x, actions, y, &grad);
    const double h = 1e-6;
    for (Eigen::Index i = 0; i < net.parameter_count(); ++i) {
      const double keep = net.parameters()(i);
      net.parameters()(i) = keep + h;
      const double up = net.loss(x, actions, y);
      net.parameters()(i) = keep - h;
      const double down = net.loss(x, actions, y);
      net.parameters()(i) = keep;
      const double fd = (up - down) / (2 * h);
      EXPECT_LE(std::abs(fd - grad(i)) / std::max({std::abs(fd), std::abs(grad(i)), 1e-6}), 1e-4) << "parameter " << i;
    }
  }
}

TEST(QNetwork, OneParameterSgdStep) {
  // no hidden layer, one action: Q = v + a - a = v, so only the value head matters
  QNetwork<float> net(1, {}, 1);
  net.parameters() << 0.5f, 0.1f, 0.0f, 0.0f;  // value weight, value bias, advantage weight, bias
  QNetwork<float>::Mat x(1, 1);
  x << 2.0f;
  QNetwork<float>::Vec y(1);
  y << 3.0f;
  const std::vector<int> a{0};
  QNetwork<float>::Vec g;
  net.loss(x, a, y, &g);
  Optimizer sgd(OptimizerKind::Sgd, 0.01);
  sgd.apply(net.parameters(), g);
  const double err = 0.5 * 2.0 + 0.1 - 3.0;
  EXPECT_NEAR(net.parameters()(0), 0.5 - 0.01 * 2 * err * 2.0, 1e-6);
  EXPECT_NEAR(net.parameters()(1), 0.1 - 0.01 * 2 * err, 1e-6);
  EXPECT_EQ(net.parameters()(2), 0.0f);
}

TEST(QNetwork, CastKeepsOutputs) {
  std::mt19937_64 rng(5);
  const QD net = random_net(3, {5}, 4, 11);
  const QNetwork<float> f = net.cast<float>();
  const QD::Mat x = random_inputs(3, 4, rng);
  const QD::Mat q = net.forward(x);
  const QNetwork<float>::Mat qf = f.forward(x.cast<float>());
  EXPECT_LE((q - qf.cast<double>()).cwiseAbs().maxCoeff(), 1e-5);
  EXPECT_EQ(f.cast<double>().parameter_count(), net.parameter_count());
}

TEST(MaskedArgmax, Examples) {
  Eigen::Vector3d q(0.1, 0.9, 0.3);
  ActionMask m(3);
  m << true, false, true;
  EXPECT_EQ(masked_argmax(q, m), 2);
  Eigen::Vector3d tie(0.5, 0.5, 0.5);
  EXPECT_EQ(masked_argmax(tie, ActionMask::Constant(3, true)), 0);
  EXPECT_THROW(masked_argmax(q, ActionMask::Constant(3, false)), UsageError);
}
