#include "xcond/melspec.hpp"

#include "xcond/error.hpp"

#include <fftw3.h>

#include <cmath>
#include <memory>
#include <mutex>
#include <numbers>

namespace xcond {

double hz_to_mel(double hz) { return 2595.0 * std::log10(1.0 + hz / 700.0); }

double mel_to_hz(double mel) { return 700.0 * (std::pow(10.0, mel / 2595.0) - 1.0); }

int resolved_fft_size(const MelConfig& config) {
  if (config.n_fft > 0) return config.n_fft;
  int n = 1;
  while (n < config.window) n <<= 1;
  return n;
}

namespace {

void validate(const MelConfig& c, double sample_rate_hz) {
  if (c.window < 1 || c.hop < 1 || c.n_mels < 1) throw ConfigError("mel config: window, hop and n_mels must be positive");
  if (!(c.floor > 0.0)) throw ConfigError("mel config: floor must be > 0");
  if (!(sample_rate_hz > 0.0)) throw ConfigError("mel config: sample rate must be positive");
  if (resolved_fft_size(c) < c.window) throw ConfigError("mel config: n_fft must be >= window");
  const double fmax = c.fmax_hz > 0.0 ? c.fmax_hz : sample_rate_hz / 2.0;
  if (!(c.fmin_hz >= 0.0) || !(fmax > c.fmin_hz) || fmax > sample_rate_hz / 2.0) {
    throw ConfigError("mel config: need 0 <= fmin < fmax <= Nyquist");
  }
}

// FFTW's planner is not reentrant.
std::mutex& planner_mutex() {
  static std::mutex m;
  return m;
}

struct PlanDeleter {
  void operator()(fftw_plan_s* p) const {
    std::lock_guard lock(planner_mutex());
    fftw_destroy_plan(p);
  }
};

fftw_plan_s* make_plan(int n_fft, double* in, fftw_complex* out) {
  std::lock_guard lock(planner_mutex());
  return fftw_plan_dft_r2c_1d(n_fft, in, out, FFTW_ESTIMATE);
}

}  // namespace

Eigen::MatrixXd mel_filterbank(const MelConfig& config, double sample_rate_hz, std::vector<double>* centers_hz) {
  validate(config, sample_rate_hz);
  const int n_fft = resolved_fft_size(config);
  const int n_bins = n_fft / 2 + 1;
  const double fmax = config.fmax_hz > 0.0 ? config.fmax_hz : sample_rate_hz / 2.0;
  const double mel_lo = hz_to_mel(config.fmin_hz);
  const double mel_hi = hz_to_mel(fmax);
  std::vector<double> edges(config.n_mels + 2);
  for (int i = 0; i < config.n_mels + 2; ++i) {
    edges[i] = mel_to_hz(mel_lo + (mel_hi - mel_lo) * i / (config.n_mels + 1));
  }
  Eigen::MatrixXd fb = Eigen::MatrixXd::Zero(config.n_mels, n_bins);
  for (int m = 0; m < config.n_mels; ++m) {
    const double lo = edges[m], center = edges[m + 1], hi = edges[m + 2];
    for (int k = 0; k < n_bins; ++k) {
      const double f = k * sample_rate_hz / n_fft;
      if (f > lo && f <= center) {
        fb(m, k) = (f - lo) / (center - lo);
      } else if (f > center && f < hi) {
        fb(m, k) = (hi - f) / (hi - center);
      }
    }
  }
  if (centers_hz) centers_hz->assign(edges.begin() + 1, edges.end() - 1);
  return fb;
}

StimulusSpectrogram compute_log_mel(const Eigen::VectorXd& waveform, double sample_rate_hz, const MelConfig& config) {
  validate(config, sample_rate_hz);
  if (waveform.size() < config.window) {
    throw DataError("waveform has " + std::to_string(waveform.size()) + " samples, shorter than one window (" +
                    std::to_string(config.window) + ")");
  }
  require_finite(waveform, "waveform");

  StimulusSpectrogram out;
  const Eigen::MatrixXd fb = mel_filterbank(config, sample_rate_hz, &out.freq_centers_hz);
  const int n_fft = resolved_fft_size(config);
  const int n_bins = n_fft / 2 + 1;
  const Eigen::Index n_frames = (waveform.size() - config.window) / config.hop + 1;

  Eigen::VectorXd hann(config.window);
  for (int i = 0; i < config.window; ++i) {
    hann[i] = 0.5 - 0.5 * std::cos(2.0 * std::numbers::pi * i / config.window);
  }

  std::unique_ptr<double, decltype(&fftw_free)> frame(fftw_alloc_real(n_fft), &fftw_free);
  std::unique_ptr<fftw_complex, decltype(&fftw_free)> spectrum(fftw_alloc_complex(n_bins), &fftw_free);
  std::unique_ptr<fftw_plan_s, PlanDeleter> plan(make_plan(n_fft, frame.get(), spectrum.get()));

  out.data.resize(config.n_mels, n_frames);
  out.sample_rate_hz = sample_rate_hz / config.hop;
  Eigen::VectorXd power(n_bins);
  for (Eigen::Index t = 0; t < n_frames; ++t) {
    const Eigen::Index start = t * config.hop;
    for (int i = 0; i < n_fft; ++i) {
      frame.get()[i] = i < config.window ? waveform[start + i] * hann[i] : 0.0;
    }
    fftw_execute(plan.get());
    for (int k = 0; k < n_bins; ++k) {
      const double re = spectrum.get()[k][0], im = spectrum.get()[k][1];
      power[k] = re * re + im * im;
    }
    const Eigen::VectorXd energy = fb * power;
    for (int m = 0; m < config.n_mels; ++m) out.data(m, t) = std::log(std::max(energy[m], config.floor));
  }
  return out;
}

}  // namespace xcond
