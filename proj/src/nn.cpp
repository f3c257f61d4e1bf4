#include "xcond/nn.hpp"

#include "xcond/error.hpp"
#include "xcond/matrix_io.hpp"
#include "xcond/parallel.hpp"
#include "xcond/rng.hpp"

#include <json.hpp>

#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <numeric>

namespace xcond::nn {

std::string_view to_string(ParamGroup g) {
  switch (g) {
    case ParamGroup::ConvWeight:
      return "conv_weight";
    case ParamGroup::ConvBias:
      return "conv_bias";
    case ParamGroup::RecurrentInput:
      return "recurrent_input";
    case ParamGroup::RecurrentWeight:
      return "recurrent_weight";
    case ParamGroup::RecurrentBias:
      return "recurrent_bias";
    case ParamGroup::ReadoutWeight:
      return "readout_weight";
    case ParamGroup::ReadoutBias:
      return "readout_bias";
  }
  return "unknown";
}

namespace {

void validate(const NetShape& s) {
  if (s.channels < 1 || s.freqs < 1 || s.hidden < 1 || s.kernel < 1) {
    throw ConfigError("network dimensions must all be positive");
  }
}

Eigen::Index group_size(const NetShape& s, ParamGroup g) {
  switch (g) {
    case ParamGroup::ConvWeight:
      return s.hidden * s.channels * s.kernel;
    case ParamGroup::ConvBias:
    case ParamGroup::RecurrentBias:
      return s.hidden;
    case ParamGroup::RecurrentInput:
    case ParamGroup::RecurrentWeight:
      return s.hidden * s.hidden;
    case ParamGroup::ReadoutWeight:
      return s.freqs * s.hidden;
    case ParamGroup::ReadoutBias:
      return s.freqs;
  }
  return 0;
}

}  // namespace

NonlinearDecoder::NonlinearDecoder(NetShape shape) : shape_(shape) {
  validate(shape_);
  Eigen::Index total = 0;
  for (auto g : kParamGroups) total += group_size(shape_, g);
  params_ = Eigen::VectorXd::Zero(total);
}

NonlinearDecoder::Range NonlinearDecoder::range(ParamGroup g) const {
  Eigen::Index offset = 0;
  for (auto other : kParamGroups) {
    if (other == g) return {offset, group_size(shape_, g)};
    offset += group_size(shape_, other);
  }
  return {offset, 0};
}

#define XCOND_MATRIX_VIEW(name, group, rows, cols)                                  \
  Eigen::Map<Eigen::MatrixXd> NonlinearDecoder::name() {                            \
    return {params_.data() + range(group).offset, rows, cols};                      \
  }                                                                                 \
  Eigen::Map<const Eigen::MatrixXd> NonlinearDecoder::name() const {                \
    return {params_.data() + range(group).offset, rows, cols};                      \
  }
#define XCOND_VECTOR_VIEW(name, group, size)                                        \
  Eigen::Map<Eigen::VectorXd> NonlinearDecoder::name() {                            \
    return {params_.data() + range(group).offset, size};                            \
  }                                                                                 \
  Eigen::Map<const Eigen::VectorXd> NonlinearDecoder::name() const {                \
    return {params_.data() + range(group).offset, size};                            \
  }

XCOND_VECTOR_VIEW(conv_bias, ParamGroup::ConvBias, shape_.hidden)
XCOND_MATRIX_VIEW(recurrent_input, ParamGroup::RecurrentInput, shape_.hidden, shape_.hidden)
XCOND_MATRIX_VIEW(recurrent_weight, ParamGroup::RecurrentWeight, shape_.hidden, shape_.hidden)
XCOND_VECTOR_VIEW(recurrent_bias, ParamGroup::RecurrentBias, shape_.hidden)
XCOND_MATRIX_VIEW(readout_weight, ParamGroup::ReadoutWeight, shape_.freqs, shape_.hidden)
XCOND_VECTOR_VIEW(readout_bias, ParamGroup::ReadoutBias, shape_.freqs)

#undef XCOND_MATRIX_VIEW
#undef XCOND_VECTOR_VIEW

Eigen::Map<Eigen::MatrixXd> NonlinearDecoder::conv_weight(Eigen::Index k) {
  return {params_.data() + range(ParamGroup::ConvWeight).offset + k * shape_.hidden * shape_.channels, shape_.hidden,
          shape_.channels};
}

Eigen::Map<const Eigen::MatrixXd> NonlinearDecoder::conv_weight(Eigen::Index k) const {
  return {params_.data() + range(ParamGroup::ConvWeight).offset + k * shape_.hidden * shape_.channels, shape_.hidden,
          shape_.channels};
}

NonlinearDecoder init_decoder(Eigen::Index channels, Eigen::Index freqs, Eigen::Index hidden, Eigen::Index kernel,
                              std::uint64_t seed) {
  NonlinearDecoder net(NetShape{channels, freqs, hidden, kernel});
  Rng rng(seed);
  std::uniform_real_distribution<double> unit(-1.0, 1.0);
  for (auto g : kParamGroups) {
    const double fan_in = (g == ParamGroup::ConvWeight || g == ParamGroup::ConvBias)
                              ? static_cast<double>(channels * kernel)
                              : static_cast<double>(hidden);
    const double scale = 1.0 / std::sqrt(fan_in);
    const auto r = net.range(g);
    for (Eigen::Index i = 0; i < r.size; ++i) net.params()[r.offset + i] = scale * unit(rng);
  }
  return net;
}

namespace {

struct Activations {
  Eigen::MatrixXd u;  // H x T conv output after tanh
  Eigen::MatrixXd h;  // H x T recurrent state
  Eigen::MatrixXd y;  // F x T
};

void check_input(const NonlinearDecoder& net, const Eigen::MatrixXd& input) {
  const auto& s = net.shape();
  if (input.rows() != s.channels) {
    throw DataError("network expects " + std::to_string(s.channels) + " channels, input has " +
                    std::to_string(input.rows()));
  }
  if (input.cols() < s.kernel) {
    throw DataError("input length " + std::to_string(input.cols()) + " is shorter than the kernel width " +
                    std::to_string(s.kernel));
  }
}

// Same-length convolution: tap k reads input column t + k - pad.
Eigen::Index pad_left(const NetShape& s) { return (s.kernel - 1) / 2; }

Activations run(const NonlinearDecoder& net, const Eigen::MatrixXd& x) {
  check_input(net, x);
  const auto& s = net.shape();
  const Eigen::Index t_count = x.cols();
  const Eigen::Index pad = pad_left(s);
  Activations a;
  Eigen::MatrixXd pre = net.conv_bias().replicate(1, t_count);
  for (Eigen::Index k = 0; k < s.kernel; ++k) {
    const Eigen::Index shift = k - pad;
    const Eigen::Index begin = std::max<Eigen::Index>(0, -shift);
    const Eigen::Index end = std::min(t_count, t_count - shift);
    if (end > begin) {
      pre.middleCols(begin, end - begin).noalias() += net.conv_weight(k) * x.middleCols(begin + shift, end - begin);
    }
  }
  a.u = pre.array().tanh();
  const Eigen::MatrixXd drive = (net.recurrent_input() * a.u).colwise() + net.recurrent_bias();
  a.h.resize(s.hidden, t_count);
  Eigen::VectorXd prev = Eigen::VectorXd::Zero(s.hidden);
  const auto w_rec = net.recurrent_weight();
  for (Eigen::Index t = 0; t < t_count; ++t) {
    a.h.col(t) = (drive.col(t) + w_rec * prev).array().tanh();
    prev = a.h.col(t);
  }
  a.y = (net.readout_weight() * a.h).colwise() + net.readout_bias();
  return a;
}

}  // namespace

Eigen::MatrixXd forward(const NonlinearDecoder& net, const Eigen::MatrixXd& input) { return run(net, input).y; }

double mse(const NonlinearDecoder& net, const Eigen::MatrixXd& input, const Eigen::MatrixXd& target) {
  const Eigen::MatrixXd y = forward(net, input);
  if (y.rows() != target.rows() || y.cols() != target.cols()) throw DataError("mse: target shape mismatch");
  return (y - target).squaredNorm() / static_cast<double>(y.size());
}

double sse_gradient(const NonlinearDecoder& net, const Eigen::MatrixXd& x, const Eigen::MatrixXd& target,
                    Eigen::VectorXd& grad, GradientFault fault) {
  const Activations a = run(net, x);
  if (a.y.rows() != target.rows() || a.y.cols() != target.cols()) throw DataError("gradient: target shape mismatch");
  const auto& s = net.shape();
  const Eigen::Index t_count = x.cols();
  NonlinearDecoder g(s);

  const Eigen::MatrixXd dy = 2.0 * (a.y - target);
  g.readout_weight().noalias() = dy * a.h.transpose();
  g.readout_bias() = dy.rowwise().sum();

  const Eigen::MatrixXd dh_out = net.readout_weight().transpose() * dy;
  const auto w_rec = net.recurrent_weight();
  Eigen::MatrixXd dz(s.hidden, t_count);
  Eigen::VectorXd carry = Eigen::VectorXd::Zero(s.hidden);
  for (Eigen::Index t = t_count - 1; t >= 0; --t) {
    const Eigen::VectorXd dh = dh_out.col(t) + carry;
    dz.col(t) = dh.array() * (1.0 - a.h.col(t).array().square());
    carry.noalias() = w_rec.transpose() * dz.col(t);
    if (fault == GradientFault::DropRecurrentBackprop) carry.setZero();
  }
  g.recurrent_input().noalias() = dz * a.u.transpose();
  if (t_count > 1) {
    g.recurrent_weight().noalias() = dz.rightCols(t_count - 1) * a.h.leftCols(t_count - 1).transpose();
  }
  g.recurrent_bias() = dz.rowwise().sum();

  const Eigen::MatrixXd da =
      (net.recurrent_input().transpose() * dz).array() * (1.0 - a.u.array().square());
  g.conv_bias() = da.rowwise().sum();
  const Eigen::Index pad = pad_left(s);
  for (Eigen::Index k = 0; k < s.kernel; ++k) {
    const Eigen::Index shift = k - pad;
    const Eigen::Index begin = std::max<Eigen::Index>(0, -shift);
    const Eigen::Index end = std::min(t_count, t_count - shift);
    if (end > begin) {
      g.conv_weight(k).noalias() =
          da.middleCols(begin, end - begin) * x.middleCols(begin + shift, end - begin).transpose();
    }
  }
  grad = std::move(g.params());
  return (a.y - target).squaredNorm();
}

double set_mse(const NonlinearDecoder& net, std::span<const SequencePair> set) {
  if (set.empty()) return std::numeric_limits<double>::quiet_NaN();
  std::vector<double> sse(set.size());
  std::vector<double> count(set.size());
  parallel_for(set.size(), [&](std::size_t i) {
    const Eigen::MatrixXd y = forward(net, set[i].input);
    if (y.rows() != set[i].target.rows() || y.cols() != set[i].target.cols()) {
      throw DataError("target shape mismatch for sequence " + std::to_string(i));
    }
    sse[i] = (y - set[i].target).squaredNorm();
    count[i] = static_cast<double>(y.size());
  });
  // Fixed summation order.
  return std::accumulate(sse.begin(), sse.end(), 0.0) / std::accumulate(count.begin(), count.end(), 0.0);
}

TrainResult train(const NonlinearDecoder& initial, std::span<const SequencePair> train_set,
                  std::span<const SequencePair> val_set, const TrainConfig& config) {
  if (train_set.empty()) throw DataError("nonlinear training needs a nonempty training set");
  if (!(config.learning_rate >= 0.0) || config.epochs < 1 || config.batch_trials < 1) {
    throw ConfigError("train config: learning_rate >= 0, epochs >= 1 and batch_trials >= 1 required");
  }
  if (!(config.beta1 >= 0.0 && config.beta1 < 1.0) || !(config.beta2 >= 0.0 && config.beta2 < 1.0) ||
      !(config.epsilon > 0.0)) {
    throw ConfigError("train config: betas must lie in [0, 1) and epsilon must be positive");
  }
  NonlinearDecoder net = initial;
  const Eigen::Index n_params = net.params().size();
  Eigen::VectorXd m = Eigen::VectorXd::Zero(n_params), v = Eigen::VectorXd::Zero(n_params);
  long step = 0;

  TrainResult result;
  auto record = [&](int epoch) {
    EpochLoss e;
    e.epoch = epoch;
    e.train_mse = set_mse(net, train_set);
    e.val_mse = val_set.empty() ? std::numeric_limits<double>::quiet_NaN() : set_mse(net, val_set);
    if (!std::isfinite(e.train_mse) || (!val_set.empty() && !std::isfinite(e.val_mse))) {
      throw Divergence("training diverged: non-finite loss at epoch " + std::to_string(epoch), epoch);
    }
    result.history.push_back(e);
    const double score = val_set.empty() ? e.train_mse : e.val_mse;
    const double best = val_set.empty() ? result.history[result.best_epoch].train_mse
                                        : result.history[result.best_epoch].val_mse;
    if (epoch == 0 || score < best) {
      result.best_epoch = epoch;
      result.decoder = net;
    }
  };
  record(0);

  std::vector<std::size_t> order(train_set.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  const std::size_t batch = static_cast<std::size_t>(config.batch_trials);
  std::vector<Eigen::VectorXd> grads;
  for (int epoch = 1; epoch <= config.epochs; ++epoch) {
    Rng rng(derive_seed(config.seed, static_cast<std::uint64_t>(epoch)));
    shuffle(order, rng);
    for (std::size_t start = 0; start < order.size(); start += batch) {
      const std::size_t count = std::min(batch, order.size() - start);
      grads.assign(count, Eigen::VectorXd());
      std::vector<double> frames(count);
      parallel_for(count, [&](std::size_t i) {
        const auto& pair = train_set[order[start + i]];
        sse_gradient(net, pair.input, pair.target, grads[i]);
        frames[i] = static_cast<double>(pair.target.size());
      });
      Eigen::VectorXd g = Eigen::VectorXd::Zero(n_params);
      double total = 0.0;
      for (std::size_t i = 0; i < count; ++i) {
        g += grads[i];
        total += frames[i];
      }
      g /= total;
      if (!g.allFinite()) {
        throw Divergence("training diverged: non-finite gradient at epoch " + std::to_string(epoch), epoch);
      }
      if (config.learning_rate == 0.0) continue;
      ++step;
      m = config.beta1 * m + (1.0 - config.beta1) * g;
      v = config.beta2 * v + (1.0 - config.beta2) * g.cwiseAbs2();
      const double c1 = 1.0 - std::pow(config.beta1, static_cast<double>(step));
      const double c2 = 1.0 - std::pow(config.beta2, static_cast<double>(step));
      net.params().array() -=
          config.learning_rate * (m.array() / c1) / ((v.array() / c2).sqrt() + config.epsilon);
    }
    record(epoch);
  }
  return result;
}

GradCheckResult grad_check(const NonlinearDecoder& net, const Eigen::MatrixXd& input, const Eigen::MatrixXd& target,
                           double epsilon, std::uint64_t seed, int per_group, GradientFault fault) {
  if (!(epsilon >= 1e-7 && epsilon <= 1e-3)) throw ConfigError("grad_check: epsilon must lie in [1e-7, 1e-3]");
  Eigen::VectorXd analytic;
  sse_gradient(net, input, target, analytic, fault);
  const double scale = 1.0 / static_cast<double>(target.size());
  analytic *= scale;

  GradCheckResult out;
  Rng rng(seed);
  NonlinearDecoder probe = net;
  for (std::size_t gi = 0; gi < kParamGroups.size(); ++gi) {
    const auto r = net.range(kParamGroups[gi]);
    std::vector<Eigen::Index> idx(static_cast<std::size_t>(r.size));
    std::iota(idx.begin(), idx.end(), r.offset);
    shuffle(idx, rng);
    if (static_cast<int>(idx.size()) > per_group) idx.resize(static_cast<std::size_t>(per_group));
    for (Eigen::Index p : idx) {
      const double saved = probe.params()[p];
      probe.params()[p] = saved + epsilon;
      const double plus = mse(probe, input, target);
      probe.params()[p] = saved - epsilon;
      const double minus = mse(probe, input, target);
      probe.params()[p] = saved;
      const double numeric = (plus - minus) / (2.0 * epsilon);
      const double a = analytic[p];
      const double denom = std::max(std::abs(a), std::abs(numeric));
      const double rel = denom == 0.0 ? 0.0 : std::abs(a - numeric) / std::max(denom, 1e-8);
      out.group_max_error[gi] = std::max(out.group_max_error[gi], rel);
      out.max_relative_error = std::max(out.max_relative_error, rel);
      ++out.checked;
    }
  }
  return out;
}

void save_checkpoint(const std::filesystem::path& path, const NonlinearDecoder& net) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError(path.string() + ": cannot open for writing");
  const auto& s = net.shape();
  nlohmann::json tensors = nlohmann::json::array();
  auto put = [&](const std::string& name, const Eigen::MatrixXd& m) {
    write_f64_block(out, m);
    tensors.push_back({{"name", name}, {"rows", m.rows()}, {"cols", m.cols()}});
  };
  for (Eigen::Index k = 0; k < s.kernel; ++k) put("conv_weight_tap" + std::to_string(k), net.conv_weight(k));
  put("conv_bias", net.conv_bias());
  put("recurrent_input", net.recurrent_input());
  put("recurrent_weight", net.recurrent_weight());
  put("recurrent_bias", net.recurrent_bias());
  put("readout_weight", net.readout_weight());
  put("readout_bias", net.readout_bias());
  if (!out) throw DataError(path.string() + ": write failed");
  const nlohmann::json manifest = {{"format", "xcond-nonlinear-decoder"},
                                   {"channels", s.channels},
                                   {"freqs", s.freqs},
                                   {"hidden", s.hidden},
                                   {"kernel", s.kernel},
                                   {"activation", "tanh"},
                                   {"tensors", tensors}};
  std::ofstream side(path.string() + ".json");
  if (!side) throw DataError(path.string() + ".json: cannot open for writing");
  side << manifest.dump(2) << '\n';
}

NonlinearDecoder load_checkpoint(const std::filesystem::path& path) {
  std::ifstream side(path.string() + ".json");
  if (!side) throw DataError(path.string() + ".json: cannot open shape manifest");
  nlohmann::json manifest;
  try {
    side >> manifest;
  } catch (const nlohmann::json::exception& e) {
    throw DataError(path.string() + ".json: " + e.what());
  }
  NetShape s{manifest.value("channels", 0), manifest.value("freqs", 0), manifest.value("hidden", 0),
             manifest.value("kernel", 0)};
  NonlinearDecoder net(s);
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError(path.string() + ": cannot open");
  auto take = [&](auto&& view, const std::string& name) {
    const Eigen::MatrixXd m = read_f64_block(in, path.string() + " (" + name + ")");
    if (m.rows() != view.rows() || m.cols() != view.cols()) throw DataError(path.string() + ": bad shape for " + name);
    view = m;
  };
  for (Eigen::Index k = 0; k < s.kernel; ++k) take(net.conv_weight(k), "conv_weight_tap" + std::to_string(k));
  take(net.conv_bias(), "conv_bias");
  take(net.recurrent_input(), "recurrent_input");
  take(net.recurrent_weight(), "recurrent_weight");
  take(net.recurrent_bias(), "recurrent_bias");
  take(net.readout_weight(), "readout_weight");
  take(net.readout_bias(), "readout_bias");
  return net;
}

void append_loss_log(const std::filesystem::path& path, std::span<const EpochLoss> history) {
  const bool fresh = !std::filesystem::exists(path);
  std::ofstream out(path, std::ios::app);
  if (!out) throw DataError(path.string() + ": cannot open for writing");
  if (fresh) out << "epoch,train_mse,val_mse\n";
  char buf[128];
  for (const auto& e : history) {
    std::snprintf(buf, sizeof buf, "%d,%.17g,%.17g\n", e.epoch, e.train_mse, e.val_mse);
    out << buf;
  }
}

}  // namespace xcond::nn
