#include "helpers.hpp"
#include "oracles.hpp"
#include "xcond/error.hpp"
#include "xcond/nn.hpp"

#include <doctest.h>

#include <cstdlib>
#include <fstream>

using namespace xcond;
using namespace xcond::nn;

TEST_CASE("init is deterministic and seed dependent") {
  const auto a = init_decoder(3, 2, 4, 5, 9);
  const auto b = init_decoder(3, 2, 4, 5, 9);
  const auto c = init_decoder(3, 2, 4, 5, 10);
  CHECK(a.params() == b.params());
  CHECK(a.params() != c.params());
  const double bound = 1.0 / std::sqrt(3.0 * 5.0);
  CHECK(a.params().segment(a.range(ParamGroup::ConvWeight).offset, a.range(ParamGroup::ConvWeight).size)
            .cwiseAbs()
            .maxCoeff() <= bound);
  const auto tiny = init_decoder(1, 1, 1, 1, 0);
  CHECK(tiny.params().size() == 7);
  CHECK_NOTHROW(forward(tiny, Eigen::MatrixXd::Ones(1, 3)));
}

TEST_CASE("parameter groups tile the flat vector") {
  const NonlinearDecoder net(NetShape{3, 2, 4, 5});
  Eigen::Index expect = 0;
  for (auto g : kParamGroups) {
    CHECK(net.range(g).offset == expect);
    expect += net.range(g).size;
  }
  CHECK(expect == net.params().size());
  CHECK(net.range(ParamGroup::ConvWeight).size == 4 * 3 * 5);
  CHECK(net.range(ParamGroup::RecurrentWeight).size == 16);
  CHECK(net.range(ParamGroup::ReadoutWeight).size == 8);
}

TEST_CASE("forward special cases") {
  auto net = init_decoder(2, 3, 4, 3, 1);
  for (auto g : {ParamGroup::ConvBias, ParamGroup::RecurrentBias, ParamGroup::ReadoutBias}) {
    net.params().segment(net.range(g).offset, net.range(g).size).setZero();
  }
  CHECK(forward(net, Eigen::MatrixXd::Zero(2, 8)).isZero(0.0));

  auto ro = init_decoder(2, 3, 4, 3, 2);
  ro.readout_weight().setZero();
  std::mt19937_64 rng(3);
  const Eigen::MatrixXd y = forward(ro, oracle::random_matrix(2, 8, rng));
  for (Eigen::Index t = 0; t < 8; ++t) CHECK(y.col(t) == Eigen::VectorXd(ro.readout_bias()));

  CHECK_THROWS_AS(forward(net, Eigen::MatrixXd::Zero(3, 8)), DataError);
  CHECK_THROWS_AS(forward(net, Eigen::MatrixXd::Zero(2, 2)), DataError);
}

TEST_CASE("forward matches the scalar-loop oracle") {
  std::mt19937_64 rng(4);
  for (std::uint64_t seed : {1u, 2u, 3u}) {
    const auto net = init_decoder(2, 2, 3, 3, seed);
    const Eigen::MatrixXd x = oracle::random_matrix(2, 6, rng);
    CHECK((forward(net, x) - oracle::naive_forward(net, x)).cwiseAbs().maxCoeff() < 1e-12);
  }
  const auto even = init_decoder(3, 2, 5, 4, 7);
  const Eigen::MatrixXd x = oracle::random_matrix(3, 11, rng);
  CHECK((forward(even, x) - oracle::naive_forward(even, x)).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("gradient check") {
  std::mt19937_64 rng(5);
  SUBCASE("correct backward pass") {
    const auto net = init_decoder(3, 2, 6, 5, 11);
    const Eigen::MatrixXd x = oracle::random_matrix(3, 12, rng), y = oracle::random_matrix(2, 12, rng);
    const auto r = grad_check(net, x, y, 1e-5, 1, 10);
    CHECK(r.max_relative_error < 1e-4);
    CHECK(r.checked >= 50);
    for (double e : r.group_max_error) CHECK(e < 1e-4);
  }
  SUBCASE("dropping the recurrent backprop is caught") {
    const auto net = init_decoder(3, 2, 6, 5, 12);
    const Eigen::MatrixXd x = oracle::random_matrix(3, 12, rng), y = oracle::random_matrix(2, 12, rng);
    const auto r = grad_check(net, x, y, 1e-5, 1, 10, GradientFault::DropRecurrentBackprop);
    CHECK(r.max_relative_error > 1e-2);
  }
  SUBCASE("zero net, zero input, zero target") {
    const NonlinearDecoder net(NetShape{2, 2, 3, 3});
    const auto r = grad_check(net, Eigen::MatrixXd::Zero(2, 5), Eigen::MatrixXd::Zero(2, 5), 1e-5);
    CHECK(r.max_relative_error == 0.0);
  }
  SUBCASE("epsilon range") {
    const NonlinearDecoder net(NetShape{2, 2, 3, 3});
    CHECK_THROWS_AS(grad_check(net, Eigen::MatrixXd::Zero(2, 5), Eigen::MatrixXd::Zero(2, 5), 1e-2), ConfigError);
  }
}

namespace {

std::vector<SequencePair> linear_task(int n, Eigen::Index c, Eigen::Index f, Eigen::Index t, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::mt19937_64 map_rng(1234);
  const Eigen::MatrixXd w = 0.5 * oracle::random_matrix(f, c, map_rng);
  std::vector<SequencePair> out;
  for (int i = 0; i < n; ++i) {
    Eigen::MatrixXd x = oracle::random_matrix(c, t, rng);
    out.push_back({x, w * x});
  }
  return out;
}

}  // namespace

TEST_CASE("set MSE is frame weighted") {
  const auto net = init_decoder(2, 2, 3, 3, 1);
  std::mt19937_64 rng(6);
  std::vector<SequencePair> set{{oracle::random_matrix(2, 5, rng), oracle::random_matrix(2, 5, rng)},
                                {oracle::random_matrix(2, 15, rng), oracle::random_matrix(2, 15, rng)}};
  const double expect = (mse(net, set[0].input, set[0].target) * 10 + mse(net, set[1].input, set[1].target) * 30) / 40;
  CHECK(set_mse(net, set) == doctest::Approx(expect).epsilon(1e-14));
}

TEST_CASE("learning rate zero leaves weights unchanged") {
  const auto data = linear_task(4, 2, 2, 20, 7);
  const auto net = init_decoder(2, 2, 4, 3, 3);
  TrainConfig cfg;
  cfg.learning_rate = 0.0;
  cfg.epochs = 5;
  const auto r = train(net, data, {}, cfg);
  CHECK(r.decoder.params() == net.params());
  for (const auto& e : r.history) CHECK(e.train_mse == r.history.front().train_mse);
  CHECK(r.history.size() == 6);
}

TEST_CASE("a perfect fit is a fixed point") {
  auto net = init_decoder(2, 2, 4, 3, 3);
  std::mt19937_64 rng(8);
  std::vector<SequencePair> data;
  for (int i = 0; i < 3; ++i) {
    const Eigen::MatrixXd x = oracle::random_matrix(2, 15, rng);
    data.push_back({x, forward(net, x)});
  }
  TrainConfig cfg;
  cfg.epochs = 20;
  const auto r = train(net, data, {}, cfg);
  for (const auto& e : r.history) CHECK(e.train_mse < 1e-12);
}

TEST_CASE("training is reproducible across worker counts") {
  const auto data = linear_task(6, 3, 2, 25, 9);
  const auto net = init_decoder(3, 2, 6, 3, 4);
  TrainConfig cfg;
  cfg.epochs = 10;
  cfg.batch_trials = 3;
  cfg.learning_rate = 1e-2;
  cfg.seed = 5;
  setenv("XCOND_WORKERS", "1", 1);
  const auto a = train(net, data, data, cfg);
  setenv("XCOND_WORKERS", "4", 1);
  const auto b = train(net, data, data, cfg);
  unsetenv("XCOND_WORKERS");
  CHECK(a.decoder.params() == b.decoder.params());
  CHECK(a.best_epoch == b.best_epoch);
  REQUIRE(a.history.size() == b.history.size());
  for (std::size_t i = 0; i < a.history.size(); ++i) CHECK(a.history[i].val_mse == b.history[i].val_mse);
}

TEST_CASE("best validation snapshot is returned") {
  const auto data = linear_task(4, 2, 2, 20, 10);
  const auto val = linear_task(2, 2, 2, 20, 11);
  TrainConfig cfg;
  cfg.epochs = 30;
  cfg.learning_rate = 5e-2;
  const auto r = train(init_decoder(2, 2, 4, 3, 6), data, val, cfg);
  double best = r.history.front().val_mse;
  for (const auto& e : r.history) best = std::min(best, e.val_mse);
  CHECK(r.history[static_cast<std::size_t>(r.best_epoch)].val_mse == best);
  CHECK(set_mse(r.decoder, val) == doctest::Approx(best).epsilon(1e-12));
}

TEST_CASE("divergence is reported with its epoch") {
  const auto data = linear_task(2, 2, 2, 10, 12);
  std::vector<SequencePair> bad = data;
  bad[1].target(0, 0) = std::numeric_limits<double>::infinity();
  TrainConfig cfg;
  cfg.epochs = 3;
  try {
    train(init_decoder(2, 2, 3, 3, 1), bad, {}, cfg);
    FAIL("expected divergence");
  } catch (const Divergence& e) {
    CHECK(e.epoch() == 0);
  }
  CHECK_THROWS_AS(train(init_decoder(2, 2, 3, 3, 1), {}, {}, cfg), DataError);
}

TEST_CASE("checkpoint and loss log") {
  testutil::TempDir dir("ckpt");
  const auto net = init_decoder(3, 2, 5, 4, 13);
  save_checkpoint(dir.path() / "net.f64", net);
  CHECK(std::filesystem::exists(dir.path() / "net.f64.json"));
  const auto back = load_checkpoint(dir.path() / "net.f64");
  CHECK(back.shape() == net.shape());
  CHECK(back.params() == net.params());

  const std::vector<EpochLoss> h{{0, 1.0, 2.0}, {1, 0.5, 1.5}};
  append_loss_log(dir.path() / "loss.csv", h);
  append_loss_log(dir.path() / "loss.csv", std::vector<EpochLoss>{{2, 0.25, 1.0}});
  std::ifstream in(dir.path() / "loss.csv");
  std::string line;
  int lines = 0;
  std::getline(in, line);
  CHECK(line == "epoch,train_mse,val_mse");
  while (std::getline(in, line)) ++lines;
  CHECK(lines == 3);
}
