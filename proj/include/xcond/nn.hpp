#pragma once

#include <Eigen/Dense>

#include <array>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string_view>
#include <vector>

namespace xcond::nn {

struct NetShape {
  Eigen::Index channels = 1;  // C
  Eigen::Index freqs = 1;     // F
  Eigen::Index hidden = 32;   // H
  Eigen::Index kernel = 9;    // K

  bool operator==(const NetShape&) const = default;
};

enum class ParamGroup {
  ConvWeight,
  ConvBias,
  RecurrentInput,
  RecurrentWeight,
  RecurrentBias,
  ReadoutWeight,
  ReadoutBias,
};

inline constexpr std::array<ParamGroup, 7> kParamGroups{
    ParamGroup::ConvWeight,      ParamGroup::ConvBias,      ParamGroup::RecurrentInput, ParamGroup::RecurrentWeight,
    ParamGroup::RecurrentBias,   ParamGroup::ReadoutWeight, ParamGroup::ReadoutBias};

std::string_view to_string(ParamGroup g);

// Temporal convolution (same-length, zero padded) -> tanh -> causal tanh recurrence
// -> per-frame linear readout. All parameters live in one flat vector; the accessors
// below are views into it.
class NonlinearDecoder {
 public:
  NonlinearDecoder() = default;
  explicit NonlinearDecoder(NetShape shape);  // zero parameters

  const NetShape& shape() const { return shape_; }
  Eigen::VectorXd& params() { return params_; }
  const Eigen::VectorXd& params() const { return params_; }

  struct Range {
    Eigen::Index offset;
    Eigen::Index size;
  };
  Range range(ParamGroup g) const;

  // Kernel tap k (0..K-1) of the convolution, H x C.
  Eigen::Map<Eigen::MatrixXd> conv_weight(Eigen::Index k);
  Eigen::Map<const Eigen::MatrixXd> conv_weight(Eigen::Index k) const;
  Eigen::Map<Eigen::VectorXd> conv_bias();
  Eigen::Map<const Eigen::VectorXd> conv_bias() const;
  Eigen::Map<Eigen::MatrixXd> recurrent_input();
  Eigen::Map<const Eigen::MatrixXd> recurrent_input() const;
  Eigen::Map<Eigen::MatrixXd> recurrent_weight();
  Eigen::Map<const Eigen::MatrixXd> recurrent_weight() const;
  Eigen::Map<Eigen::VectorXd> recurrent_bias();
  Eigen::Map<const Eigen::VectorXd> recurrent_bias() const;
  Eigen::Map<Eigen::MatrixXd> readout_weight();
  Eigen::Map<const Eigen::MatrixXd> readout_weight() const;
  Eigen::Map<Eigen::VectorXd> readout_bias();
  Eigen::Map<const Eigen::VectorXd> readout_bias() const;

 private:
  NetShape shape_;
  Eigen::VectorXd params_;
};

// Uniform(-1/sqrt(fan_in), 1/sqrt(fan_in)) per tensor; fan_in is C*K for the
// convolution, H for the recurrence and readout.
NonlinearDecoder init_decoder(Eigen::Index channels, Eigen::Index freqs, Eigen::Index hidden, Eigen::Index kernel,
                              std::uint64_t seed);

// F x T output for a C x T input. Throws DataError on channel mismatch or T < K.
Eigen::MatrixXd forward(const NonlinearDecoder& net, const Eigen::MatrixXd& input);

double mse(const NonlinearDecoder& net, const Eigen::MatrixXd& input, const Eigen::MatrixXd& target);

// Test hook for the gradient checker: deliberately broken backward passes.
enum class GradientFault { None, DropRecurrentBackprop };

// Gradient of the summed squared error over all F*T entries; returns that sum.
double sse_gradient(const NonlinearDecoder& net, const Eigen::MatrixXd& input, const Eigen::MatrixXd& target,
                    Eigen::VectorXd& grad, GradientFault fault = GradientFault::None);

struct SequencePair {
  Eigen::MatrixXd input;   // C x T
  Eigen::MatrixXd target;  // F x T
};

// Frame-weighted MSE over a set: sum of squared errors / sum of F*T.
double set_mse(const NonlinearDecoder& net, std::span<const SequencePair> set);

struct TrainConfig {
  double learning_rate = 1e-3;
  int epochs = 200;
  int batch_trials = 8;
  std::uint64_t seed = 0;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

struct EpochLoss {
  int epoch = 0;  // 0 is the untrained network
  double train_mse = 0.0;
  double val_mse = 0.0;  // NaN without a validation set
};

struct TrainResult {
  NonlinearDecoder decoder;  // snapshot with the lowest validation MSE (training MSE without validation data)
  int best_epoch = 0;
  std::vector<EpochLoss> history;
};

// Adam over mini-batches of whole trials. Per-trial gradients are reduced in trial
// order, so results do not depend on the worker count. Throws Divergence on a
// non-finite loss.
TrainResult train(const NonlinearDecoder& initial, std::span<const SequencePair> train_set,
                  std::span<const SequencePair> val_set, const TrainConfig& config);

struct GradCheckResult {
  double max_relative_error = 0.0;
  std::array<double, 7> group_max_error{};
  int checked = 0;
};

// Central finite differences of the per-trial MSE on `per_group` randomly chosen
// parameters from every group (all of a group when it is smaller).
GradCheckResult grad_check(const NonlinearDecoder& net, const Eigen::MatrixXd& input, const Eigen::MatrixXd& target,
                           double epsilon, std::uint64_t seed = 0, int per_group = 8,
                           GradientFault fault = GradientFault::None);

// Checkpoint: consecutive .f64 blocks (conv taps, conv bias, recurrent input, recurrent
// weight, recurrent bias, readout weight, readout bias) plus a JSON shape manifest at
// <path>.json.
void save_checkpoint(const std::filesystem::path& path, const NonlinearDecoder& net);
NonlinearDecoder load_checkpoint(const std::filesystem::path& path);
// Appends (or creates with header) epoch,train_mse,val_mse rows.
void append_loss_log(const std::filesystem::path& path, std::span<const EpochLoss> history);

}  // namespace xcond::nn
