#pragma once

#include "xcond/types.hpp"

#include <Eigen/Dense>

namespace xcond {

struct MelConfig {
  int window = 400;      // samples per frame
  int hop = 160;         // samples between frame starts
  int n_mels = 40;
  int n_fft = 0;         // 0: next power of two >= window
  double fmin_hz = 0.0;
  double fmax_hz = 0.0;  // 0: Nyquist
  double floor = 1e-10;  // power floor applied before the log
};

double hz_to_mel(double hz);
double mel_to_hz(double mel);

// Triangular filters (peak 1 at the band center) on the HTK mel scale, n_mels x (n_fft/2+1).
// `centers_hz` receives the band centers.
Eigen::MatrixXd mel_filterbank(const MelConfig& config, double sample_rate_hz, std::vector<double>* centers_hz = nullptr);

// Hann-windowed power spectrum of each frame projected on the filterbank, then
// log(max(energy, floor)). T = floor((len - window) / hop) + 1 frames at rate sr / hop.
StimulusSpectrogram compute_log_mel(const Eigen::VectorXd& waveform, double sample_rate_hz, const MelConfig& config);

int resolved_fft_size(const MelConfig& config);

}  // namespace xcond
