#include <doctest.h>

#include <cmath>
#include <random>
#include <sstream>

#include "platoon/mlp.hpp"

using namespace platoon;
using doctest::Approx;

namespace {

Mlp single_layer(Eigen::MatrixXd w, Eigen::VectorXd b, Activation act) {
  Mlp net;
  net.layers.push_back({std::move(w), std::move(b), act});
  return net;
}

double loss(const Mlp& net, const Eigen::MatrixXd& x, const Eigen::MatrixXd& up) {
  return forward(net, x).cwiseProduct(up).sum();
}

double rel_err(double a, double b) {
  return std::abs(a - b) / std::max({1e-6, std::abs(a), std::abs(b)});
}

}  // namespace

TEST_CASE("forward pass examples") {
  SUBCASE("zero network outputs zeros") {
    Mlp net = init_mlp(std::vector<int>{3, 4, 2},
                       std::vector<Activation>{Activation::Relu, Activation::Relu}, 1);
    for (auto& l : net.layers) {
      l.weights.setZero();
      l.bias.setZero();
    }
    const auto y = forward(net, std::vector<double>{1, -2, 3});
    CHECK(y == std::vector<double>{0.0, 0.0});
  }
  SUBCASE("identity layer") {
    const Mlp net = single_layer(Eigen::MatrixXd::Identity(3, 3), Eigen::VectorXd::Zero(3),
                                 Activation::Identity);
    CHECK(forward(net, std::vector<double>{1.5, -2, 0.25}) ==
          std::vector<double>{1.5, -2, 0.25});
  }
  SUBCASE("scalar tanh unit") {
    const Mlp net = single_layer(Eigen::MatrixXd::Constant(1, 1, 2.0),
                                 Eigen::VectorXd::Constant(1, 1.0), Activation::Tanh);
    CHECK(forward(net, std::vector<double>{0.0})[0] == Approx(0.76159).epsilon(1e-5));
    CHECK(forward(net, std::vector<double>{0.7})[0] == Approx(std::tanh(2.4)));
  }
  SUBCASE("dimension mismatch") {
    const Mlp net = single_layer(Eigen::MatrixXd::Identity(2, 2), Eigen::VectorXd::Zero(2),
                                 Activation::Identity);
    CHECK_THROWS_AS(forward(net, std::vector<double>{1, 2, 3}), std::invalid_argument);
  }
}

TEST_CASE("backward pass examples") {
  const Mlp net = single_layer(Eigen::MatrixXd::Identity(2, 2), Eigen::VectorXd::Zero(2),
                               Activation::Identity);
  Eigen::MatrixXd x(2, 1);
  x << 3.0, -4.0;
  ForwardCache cache;
  forward(net, x, &cache);
  Eigen::MatrixXd up(2, 1);
  up << 1.0, 1.0;
  const Gradients g = backward(net, cache, up);
  // Loss = sum of outputs: dW_ij = x_j, db = 1, d input = upstream.
  CHECK(g.weights[0](0, 0) == 3.0);
  CHECK(g.weights[0](0, 1) == -4.0);
  CHECK(g.weights[0](1, 1) == -4.0);
  CHECK(g.biases[0](0) == 1.0);
  CHECK(g.biases[0](1) == 1.0);
  CHECK(g.input.isApprox(up));
  CHECK_THROWS_AS(backward(net, cache, Eigen::MatrixXd::Ones(3, 1)), std::invalid_argument);
}

TEST_CASE("gradients match central differences on 100 random networks") {
  std::mt19937_64 rng(2024);
  std::uniform_int_distribution<int> dim(1, 8), depth(1, 3), act(0, 2), batch(1, 4);
  std::normal_distribution<double> normal(0.0, 1.0);
  const double h = 1e-5;
  double worst = 0.0;
  for (int trial = 0; trial < 100; ++trial) {
    const int layers = depth(rng);
    std::vector<int> dims{dim(rng)};
    std::vector<Activation> acts;
    for (int l = 0; l < layers; ++l) {
      dims.push_back(dim(rng));
      acts.push_back(static_cast<Activation>(act(rng)));
    }
    Mlp net = init_mlp(dims, acts, rng());
    for (auto& l : net.layers) {
      for (Eigen::Index i = 0; i < l.bias.size(); ++i) l.bias(i) = 0.3 * normal(rng);
    }
    const int b = batch(rng);
    Eigen::MatrixXd x(dims.front(), b), up(dims.back(), b);
    for (Eigen::Index i = 0; i < x.size(); ++i) x.data()[i] = normal(rng);
    for (Eigen::Index i = 0; i < up.size(); ++i) up.data()[i] = normal(rng);

    ForwardCache cache;
    forward(net, x, &cache);
    const Gradients g = backward(net, cache, up);

    // Relu kinks make differences meaningless within h of zero; skip those.
    const auto near_kink = [&](const Mlp& n) {
      Eigen::MatrixXd a = x;
      for (const auto& l : n.layers) {
        const Eigen::MatrixXd z = (l.weights * a).colwise() + l.bias;
        if (l.activation == Activation::Relu && (z.array().abs() < 1e-3).any()) return true;
        a = forward(Mlp{{l}}, a);
      }
      return false;
    };
    if (near_kink(net)) continue;

    for (std::size_t l = 0; l < net.layers.size(); ++l) {
      for (Eigen::Index i = 0; i < net.layers[l].weights.size(); ++i) {
        Mlp p = net, m = net;
        p.layers[l].weights.data()[i] += h;
        m.layers[l].weights.data()[i] -= h;
        const double fd = (loss(p, x, up) - loss(m, x, up)) / (2 * h);
        worst = std::max(worst, rel_err(fd, g.weights[l].data()[i]));
      }
      for (Eigen::Index i = 0; i < net.layers[l].bias.size(); ++i) {
        Mlp p = net, m = net;
        p.layers[l].bias(i) += h;
        m.layers[l].bias(i) -= h;
        const double fd = (loss(p, x, up) - loss(m, x, up)) / (2 * h);
        worst = std::max(worst, rel_err(fd, g.biases[l](i)));
      }
    }
    for (Eigen::Index i = 0; i < x.size(); ++i) {
      Eigen::MatrixXd xp = x, xm = x;
      xp.data()[i] += h;
      xm.data()[i] -= h;
      const double fd = (loss(net, xp, up) - loss(net, xm, up)) / (2 * h);
      worst = std::max(worst, rel_err(fd, g.input.data()[i]));
    }
  }
  CHECK(worst < 1e-4);
}

TEST_CASE("tanh outputs stay inside (-1, 1)") {
  const Mlp net = init_mlp(std::vector<int>{2, 16, 3},
                           std::vector<Activation>{Activation::Relu, Activation::Tanh}, 4);
  std::mt19937_64 rng(1);
  std::normal_distribution<double> big(0.0, 50.0);
  for (int k = 0; k < 1000; ++k) {
    for (double y : forward(net, std::vector<double>{big(rng), big(rng)})) {
      REQUIRE(std::abs(y) <= 1.0);
    }
  }
}

TEST_CASE("adam update") {
  Mlp net = single_layer(Eigen::MatrixXd::Constant(1, 1, 0.5),
                         Eigen::VectorXd::Constant(1, -0.25), Activation::Identity);
  SUBCASE("zero gradient is a no-op") {
    AdamState opt = make_adam_state(net, 1e-3);
    Gradients g{{Eigen::MatrixXd::Zero(1, 1)}, {Eigen::VectorXd::Zero(1)}, {}};
    adam_step(net, g, opt);
    CHECK(net.layers[0].weights(0, 0) == 0.5);
    CHECK(net.layers[0].bias(0) == -0.25);
  }
  SUBCASE("first step moves each parameter by the learning rate against the gradient") {
    AdamState opt = make_adam_state(net, 1e-3);
    Gradients g{{Eigen::MatrixXd::Constant(1, 1, 7.0)}, {Eigen::VectorXd::Constant(1, -0.02)}, {}};
    adam_step(net, g, opt);
    CHECK(net.layers[0].weights(0, 0) == Approx(0.5 - 1e-3).epsilon(1e-9));
    CHECK(net.layers[0].bias(0) == Approx(-0.25 + 1e-3).epsilon(1e-6));
    CHECK(opt.step == 1);
  }
  SUBCASE("identical runs are bit-identical and stay finite") {
    Mlp a = init_mlp(std::vector<int>{3, 5, 1},
                     std::vector<Activation>{Activation::Relu, Activation::Identity}, 8);
    Mlp b = a;
    AdamState oa = make_adam_state(a, 1e-2), ob = make_adam_state(b, 1e-2);
    Eigen::MatrixXd x = Eigen::MatrixXd::Random(3, 6);
    for (int k = 0; k < 50; ++k) {
      ForwardCache ca, cb;
      const Eigen::MatrixXd ya = forward(a, x, &ca);
      const Eigen::MatrixXd yb = forward(b, x, &cb);
      adam_step(a, backward(a, ca, ya), oa);
      adam_step(b, backward(b, cb, yb), ob);
    }
    for (std::size_t l = 0; l < a.layers.size(); ++l) {
      CHECK(a.layers[l].weights == b.layers[l].weights);
      CHECK(a.layers[l].bias == b.layers[l].bias);
      CHECK(a.layers[l].weights.allFinite());
    }
  }
}

TEST_CASE("initialization") {
  const std::vector<int> dims{256, 256, 1};
  const std::vector<Activation> acts{Activation::Relu, Activation::Tanh};
  const Mlp a = init_mlp(dims, acts, 5);
  const Mlp b = init_mlp(dims, acts, 5);
  const Mlp c = init_mlp(dims, acts, 6);
  CHECK(a.layers[0].weights == b.layers[0].weights);
  CHECK(a.layers[0].weights != c.layers[0].weights);
  CHECK(a.layers[0].weights.cwiseAbs().maxCoeff() <= 0.0625);
  CHECK(a.layers[1].weights.cwiseAbs().maxCoeff() <= 0.0625);
  CHECK(a.layers[0].bias.isZero());
  const Mlp small = init_mlp(dims, acts, 5, 3e-3);
  CHECK(small.layers[1].weights.cwiseAbs().maxCoeff() <= 3e-3);
  CHECK(small.layers[0].weights == a.layers[0].weights);
  CHECK(a.parameter_count() == 256 * 256 + 256 + 256 + 1);
  CHECK_THROWS_AS(init_mlp(std::vector<int>{0, 2}, std::vector<Activation>{Activation::Relu}, 1),
                  std::invalid_argument);
}

TEST_CASE("weights round-trip through the text format bit for bit") {
  Mlp net = init_mlp(std::vector<int>{3, 7, 2},
                     std::vector<Activation>{Activation::Relu, Activation::Tanh}, 12);
  net.layers[0].bias.setRandom();
  net.layers[1].weights(0, 0) = 1.0 / 3.0;
  net.layers[1].bias(1) = -1e-300;
  std::stringstream ss;
  save_mlp(ss, net);
  CHECK(ss.str().rfind("mlp v1 2\n7 3 relu\n", 0) == 0);
  const Mlp back = load_mlp(ss);
  REQUIRE(back.layers.size() == 2);
  for (std::size_t l = 0; l < 2; ++l) {
    CHECK(back.layers[l].weights == net.layers[l].weights);
    CHECK(back.layers[l].bias == net.layers[l].bias);
    CHECK(back.layers[l].activation == net.layers[l].activation);
  }
  std::stringstream bad("mlp v2 1\n");
  CHECK_THROWS(load_mlp(bad));
  std::stringstream truncated("mlp v1 1\n1 1 tanh\n0.5\n");
  CHECK_THROWS(load_mlp(truncated));
}
