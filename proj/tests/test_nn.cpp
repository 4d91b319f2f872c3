#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <cstdio>
#include <filesystem>

#include "flsim/checkpoint.hpp"
#include "flsim/mlp.hpp"
#include "flsim/policy.hpp"

using namespace flsim;
using namespace flsim::nn;

namespace {

// Central finite difference of a scalar function over every parameter.
template <typename Loss>
void check_gradients_fd(Mlp& net, const Gradients& analytic, Loss loss, double h = 1e-5,
                        double rtol = 1e-4, double atol = 1e-8) {
  for (int l = 0; l < net.num_layers(); ++l) {
    for (Eigen::Index i = 0; i < net.weights[l].rows(); ++i)
      for (Eigen::Index j = 0; j < net.weights[l].cols(); ++j) {
        const double saved = net.weights[l](i, j);
        net.weights[l](i, j) = saved + h;
        const double up = loss();
        net.weights[l](i, j) = saved - h;
        const double down = loss();
        net.weights[l](i, j) = saved;
        const double fd = (up - down) / (2 * h);
        const double an = analytic.d_weights[l](i, j);
        REQUIRE(std::abs(an - fd) <= atol + rtol * std::max(std::abs(an), std::abs(fd)));
      }
    for (Eigen::Index i = 0; i < net.biases[l].size(); ++i) {
      const double saved = net.biases[l](i);
      net.biases[l](i) = saved + h;
      const double up = loss();
      net.biases[l](i) = saved - h;
      const double down = loss();
      net.biases[l](i) = saved;
      const double fd = (up - down) / (2 * h);
      const double an = analytic.d_biases[l](i);
      REQUIRE(std::abs(an - fd) <= atol + rtol * std::max(std::abs(an), std::abs(fd)));
    }
  }
}

}  // namespace

TEST_CASE("identity layer passes input through") {
  Mlp net;
  net.weights.push_back(Eigen::MatrixXd::Identity(3, 3));
  net.biases.push_back(Eigen::VectorXd::Zero(3));
  net.activations.push_back(Activation::identity);
  const Eigen::VectorXd x = Eigen::Vector3d(0.5, -1.5, 2.0);
  CHECK((forward_vec(net, x) - x).norm() == 0.0);
}

TEST_CASE("zero weights yield the bias") {
  Mlp net;
  net.weights.push_back(Eigen::MatrixXd::Zero(2, 3));
  net.biases.push_back(Eigen::Vector2d(0.7, -0.3));
  net.activations.push_back(Activation::identity);
  const Eigen::VectorXd y = forward_vec(net, Eigen::Vector3d(1, 2, 3));
  CHECK(y(0) == Catch::Approx(0.7));
  CHECK(y(1) == Catch::Approx(-0.3));
}

TEST_CASE("forward pass replays an independent per-element evaluation") {
  RngStream rng(21);
  Mlp net = make_mlp({4, 6, 5, 2}, Activation::softplus, Activation::identity, rng);
  for (int trial = 0; trial < 20; ++trial) {
    Eigen::VectorXd x(4);
    for (int i = 0; i < 4; ++i) x(i) = rng.normal();
    // Scalar loop replay.
    std::vector<double> cur(x.data(), x.data() + 4);
    for (int l = 0; l < net.num_layers(); ++l) {
      std::vector<double> nxt(net.weights[l].rows());
      for (Eigen::Index r = 0; r < net.weights[l].rows(); ++r) {
        double acc = net.biases[l](r);
        for (Eigen::Index c = 0; c < net.weights[l].cols(); ++c)
          acc += net.weights[l](r, c) * cur[c];
        if (net.activations[l] == Activation::softplus)
          acc = std::max(acc, 0.0) + std::log1p(std::exp(-std::abs(acc)));
        nxt[r] = acc;
      }
      cur = nxt;
    }
    const Eigen::VectorXd y = forward_vec(net, x);
    for (int i = 0; i < 2; ++i) REQUIRE(y(i) == Catch::Approx(cur[i]).epsilon(1e-12).margin(1e-12));
  }
}

TEST_CASE("forward pass is deterministic and rejects shape mismatches") {
  RngStream rng(22);
  Mlp net = make_mlp({3, 8, 2}, Activation::tanh_act, Activation::identity, rng);
  const Eigen::VectorXd x = Eigen::Vector3d(0.1, 0.2, 0.3);
  CHECK((forward_vec(net, x) - forward_vec(net, x)).norm() == 0.0);
  CHECK_THROWS_AS(forward(net, Eigen::MatrixXd::Zero(1, 4)), std::invalid_argument);
  Trace trace;
  forward(net, Eigen::MatrixXd::Zero(2, 3), trace);
  Gradients g;
  CHECK_THROWS_AS(backward(net, trace, Eigen::MatrixXd::Zero(2, 3), g), std::invalid_argument);
}

TEST_CASE("linear net gradient of w.x is x") {
  Mlp net;
  net.weights.push_back(Eigen::MatrixXd::Zero(1, 3));
  net.weights[0] << 0.3, -0.2, 0.9;
  net.biases.push_back(Eigen::VectorXd::Zero(1));
  net.activations.push_back(Activation::identity);
  const Eigen::MatrixXd x = Eigen::RowVector3d(1.5, -2.0, 0.25);
  Trace trace;
  forward(net, x, trace);
  Gradients grads;
  backward(net, trace, Eigen::MatrixXd::Ones(1, 1), grads);
  CHECK(grads.d_weights[0](0, 0) == Catch::Approx(1.5));
  CHECK(grads.d_weights[0](0, 1) == Catch::Approx(-2.0));
  CHECK(grads.d_weights[0](0, 2) == Catch::Approx(0.25));
  CHECK(grads.d_biases[0](0) == Catch::Approx(1.0));
}

TEST_CASE("zero upstream gradient produces zero parameter gradients") {
  RngStream rng(23);
  Mlp net = make_mlp({3, 5, 2}, Activation::softplus, Activation::identity, rng);
  Trace trace;
  forward(net, Eigen::MatrixXd::Random(4, 3), trace);
  Gradients grads;
  backward(net, trace, Eigen::MatrixXd::Zero(4, 2), grads);
  for (int l = 0; l < net.num_layers(); ++l) {
    CHECK(grads.d_weights[l].norm() == 0.0);
    CHECK(grads.d_biases[l].norm() == 0.0);
  }
}

TEST_CASE("backward matches central differences over random nets") {
  RngStream rng(24);
  for (int trial = 0; trial < 6; ++trial) {
    const Activation hidden =
        trial % 2 == 0 ? Activation::softplus : Activation::tanh_act;
    Mlp net = make_mlp({3, 6, 4, 2}, hidden, Activation::identity, rng);
    const Eigen::MatrixXd x = Eigen::MatrixXd::Random(5, 3);
    const Eigen::MatrixXd target = Eigen::MatrixXd::Random(5, 2);

    // loss = mean((f(x) - target)^2)
    const auto loss = [&]() {
      const Eigen::MatrixXd y = forward(net, x);
      return (y - target).squaredNorm() / static_cast<double>(y.rows());
    };
    Trace trace;
    const Eigen::MatrixXd y = forward(net, x, trace);
    Gradients grads;
    backward(net, trace, Eigen::MatrixXd(2.0 / y.rows() * (y - target)), grads);
    check_gradients_fd(net, grads, loss);
  }
}

TEST_CASE("input gradients are exact for a quadratic head") {
  RngStream rng(25);
  Mlp net = make_mlp({4, 8, 1}, Activation::softplus, Activation::identity, rng);
  Eigen::MatrixXd x = Eigen::MatrixXd::Random(3, 4);
  Trace trace;
  forward(net, x, trace);
  Gradients grads;
  const Eigen::MatrixXd dx =
      backward(net, trace, Eigen::MatrixXd::Ones(3, 1), grads);
  const double h = 1e-6;
  for (Eigen::Index i = 0; i < x.rows(); ++i)
    for (Eigen::Index j = 0; j < x.cols(); ++j) {
      const double saved = x(i, j);
      x(i, j) = saved + h;
      const double up = forward(net, x).col(0).sum();
      x(i, j) = saved - h;
      const double down = forward(net, x).col(0).sum();
      x(i, j) = saved;
      const double fd = (up - down) / (2 * h);
      REQUIRE(std::abs(dx(i, j) - fd) <= 1e-7 + 1e-5 * std::abs(fd));
    }
}

TEST_CASE("sgd step: lr 0 is a no-op; quadratic descent works") {
  Mlp net;
  net.weights.push_back(Eigen::MatrixXd::Constant(1, 1, 1.0));
  net.biases.push_back(Eigen::VectorXd::Zero(1));
  net.activations.push_back(Activation::identity);

  // f(w) = w^2 evaluated through the net at x = 1: y = w, loss = y^2.
  Gradients grads = Gradients::zeros_like(net);
  grads.d_weights[0](0, 0) = 2.0 * net.weights[0](0, 0);
  sgd_step(net, grads, 0.0);
  CHECK(net.weights[0](0, 0) == 1.0);
  sgd_step(net, grads, 0.1);
  CHECK(net.weights[0](0, 0) == Catch::Approx(0.8));

  for (int i = 0; i < 200; ++i) {
    grads.d_weights[0](0, 0) = 2.0 * net.weights[0](0, 0);
    sgd_step(net, grads, 0.1);
  }
  CHECK(std::abs(net.weights[0](0, 0)) < 1e-6);
}

TEST_CASE("adam also drives a convex quadratic to the optimum") {
  Mlp net;
  net.weights.push_back(Eigen::MatrixXd::Constant(1, 1, 3.0));
  net.biases.push_back(Eigen::VectorXd::Zero(1));
  net.activations.push_back(Activation::identity);
  AdamState state = AdamState::zeros_like(net);
  Gradients grads = Gradients::zeros_like(net);
  for (int i = 0; i < 4000; ++i) {
    grads.d_weights[0](0, 0) = 2.0 * net.weights[0](0, 0);
    adam_step(net, grads, state, 1e-2);
  }
  CHECK(std::abs(net.weights[0](0, 0)) < 1e-6);
}

TEST_CASE("polyak update endpoints and geometric approach") {
  RngStream rng(26);
  Mlp online = make_mlp({2, 4, 1}, Activation::tanh_act, Activation::identity, rng);
  Mlp target = make_mlp({2, 4, 1}, Activation::tanh_act, Activation::identity, rng);

  Mlp frozen = target;
  polyak_update(frozen, online, 1.0);
  for (int l = 0; l < frozen.num_layers(); ++l)
    CHECK((frozen.weights[l] - target.weights[l]).norm() == 0.0);

  Mlp copied = target;
  polyak_update(copied, online, 0.0);
  for (int l = 0; l < copied.num_layers(); ++l)
    CHECK((copied.weights[l] - online.weights[l]).norm() == 0.0);

  // Constant online net: target approaches it geometrically,
  // t_n = rho^n t_0 + (1 - rho^n) o.
  Mlp t = target;
  const double rho = 0.995;
  const int n = 100;
  for (int i = 0; i < n; ++i) polyak_update(t, online, rho);
  const double rho_n = std::pow(rho, n);
  for (int l = 0; l < t.num_layers(); ++l) {
    const Eigen::MatrixXd expected =
        rho_n * target.weights[l] + (1.0 - rho_n) * online.weights[l];
    CHECK((t.weights[l] - expected).norm() < 1e-10);
  }

  Mlp mismatched = make_mlp({2, 5, 1}, Activation::tanh_act, Activation::identity, rng);
  CHECK_THROWS_AS(polyak_update(mismatched, online, 0.5), std::invalid_argument);
}

TEST_CASE("squashed gaussian: zero std collapses to tanh(mean)") {
  RngStream rng(27);
  Eigen::MatrixXd mean = Eigen::MatrixXd::Random(1, 3);
  Eigen::MatrixXd log_std = Eigen::MatrixXd::Constant(1, 3, -40.0);  // std ~ 4e-18
  const auto s = sample_squashed_gaussian(mean, log_std, rng);
  for (int j = 0; j < 3; ++j)
    CHECK(s.action(0, j) == Catch::Approx(std::tanh(mean(0, j))).margin(1e-12));
}

TEST_CASE("squashed log-prob matches an independent density evaluation") {
  RngStream rng(28);
  for (int trial = 0; trial < 1000; ++trial) {
    Eigen::MatrixXd mean = Eigen::MatrixXd::Random(1, 2);
    Eigen::MatrixXd log_std = Eigen::MatrixXd::Random(1, 2);  // in [-1, 1]
    const auto s = sample_squashed_gaussian(mean, log_std, rng);
    // Independent: log N(u; mean, std) - sum log(1 - tanh(u)^2), naive forms.
    double expected = 0.0;
    for (int j = 0; j < 2; ++j) {
      const double std = std::exp(log_std(0, j));
      const double u = s.pre(0, j);
      const double z = (u - mean(0, j)) / std;
      expected += -0.5 * z * z - std::log(std) - 0.5 * std::log(2.0 * M_PI);
      expected -= std::log(1.0 - std::tanh(u) * std::tanh(u));
    }
    REQUIRE(s.log_prob(0) == Catch::Approx(expected).epsilon(1e-9).margin(1e-9));
  }
}

TEST_CASE("pre-squash samples follow the configured gaussian") {
  RngStream rng(29);
  const int n = 20000;
  Eigen::MatrixXd mean = Eigen::MatrixXd::Constant(n, 1, 0.37);
  Eigen::MatrixXd log_std = Eigen::MatrixXd::Constant(n, 1, std::log(0.8));
  const auto s = sample_squashed_gaussian(mean, log_std, rng);
  const double sample_mean = s.pre.col(0).mean();
  const double se = 0.8 / std::sqrt(static_cast<double>(n));
  CHECK(std::abs(sample_mean - 0.37) < 4.0 * se);

  // Kolmogorov-Smirnov sanity against the normal CDF.
  std::vector<double> z(n);
  for (int i = 0; i < n; ++i) z[i] = (s.pre(i, 0) - 0.37) / 0.8;
  std::sort(z.begin(), z.end());
  double ks = 0.0;
  for (int i = 0; i < n; ++i) {
    const double cdf = 0.5 * std::erfc(-z[i] / std::sqrt(2.0));
    ks = std::max(ks, std::abs(cdf - (i + 1.0) / n));
    ks = std::max(ks, std::abs(cdf - static_cast<double>(i) / n));
  }
  CHECK(ks < 1.95 / std::sqrt(static_cast<double>(n)));  // ~1% critical value
}

TEST_CASE("log-std clamp keeps actions and densities finite") {
  RngStream rng(30);
  Mlp policy = make_mlp({2, 8, 4}, Activation::softplus, Activation::identity, rng);
  policy.weights.back() *= 1e6;  // blow up the head
  const LogStdClamp clamp;
  for (int trial = 0; trial < 50; ++trial) {
    Eigen::VectorXd obs = Eigen::VectorXd::Random(2) * 10.0;
    const auto out = sample_policy_single(policy, obs, clamp, rng);
    REQUIRE(std::isfinite(out.log_prob));
    for (int j = 0; j < out.pre_squash.size(); ++j) {
      REQUIRE(std::isfinite(out.pre_squash(j)));
      REQUIRE(out.log_std(j) >= clamp.lo);
      REQUIRE(out.log_std(j) <= clamp.hi);
    }
  }
}

TEST_CASE("checkpoint round trip is exact and checksummed") {
  RngStream rng(31);
  Mlp net = make_mlp({3, 5, 2}, Activation::softplus, Activation::identity, rng);
  std::vector<NamedTensor> tensors;
  append_mlp_tensors(tensors, "net", net);

  const std::string path = std::filesystem::temp_directory_path() / "flsim_ckpt_test.bin";
  save_checkpoint(path, tensors);
  const auto loaded = load_checkpoint(path);
  REQUIRE(loaded.size() == tensors.size());
  for (std::size_t i = 0; i < tensors.size(); ++i) {
    CHECK(loaded[i].name == tensors[i].name);
    CHECK((loaded[i].value - tensors[i].value).norm() == 0.0);
  }

  Mlp restored = make_mlp({3, 5, 2}, Activation::softplus, Activation::identity, rng);
  restore_mlp_tensors(loaded, "net", restored);
  for (int l = 0; l < net.num_layers(); ++l)
    CHECK((restored.weights[l] - net.weights[l]).norm() == 0.0);

  // Flip one payload byte: checksum must catch it.
  {
    std::fstream f(path, std::ios::in | std::ios::out | std::ios::binary);
    f.seekp(64);
    char byte = 0;
    f.read(&byte, 1);
    f.seekp(64);
    byte = static_cast<char>(byte ^ 0x40);
    f.write(&byte, 1);
  }
  CHECK_THROWS_AS(load_checkpoint(path), ValidationError);
  std::filesystem::remove(path);
}
