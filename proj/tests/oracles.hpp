#pragma once
// Independent reference implementations used only by the tests. They deliberately
// avoid the library's code paths: plain loops, no Eigen decompositions.

#include "xcond/nn.hpp"

#include <Eigen/Dense>

#include <cmath>
#include <complex>
#include <numbers>
#include <random>
#include <stdexcept>
#include <vector>

namespace oracle {

inline Eigen::MatrixXd random_matrix(Eigen::Index r, Eigen::Index c, std::mt19937_64& rng) {
  std::normal_distribution<double> n(0.0, 1.0);
  Eigen::MatrixXd m(r, c);
  for (Eigen::Index i = 0; i < r; ++i)
    for (Eigen::Index j = 0; j < c; ++j) m(i, j) = n(rng);
  return m;
}

// Gauss-Jordan elimination with partial pivoting: returns A^-1 B.
inline Eigen::MatrixXd gauss_jordan(Eigen::MatrixXd a, Eigen::MatrixXd b) {
  const Eigen::Index n = a.rows();
  for (Eigen::Index col = 0; col < n; ++col) {
    Eigen::Index piv = col;
    for (Eigen::Index r = col + 1; r < n; ++r)
      if (std::abs(a(r, col)) > std::abs(a(piv, col))) piv = r;
    if (a(piv, col) == 0.0) throw std::runtime_error("oracle: singular");
    if (piv != col) {
      for (Eigen::Index j = 0; j < n; ++j) std::swap(a(col, j), a(piv, j));
      for (Eigen::Index j = 0; j < b.cols(); ++j) std::swap(b(col, j), b(piv, j));
    }
    const double d = a(col, col);
    for (Eigen::Index j = 0; j < n; ++j) a(col, j) /= d;
    for (Eigen::Index j = 0; j < b.cols(); ++j) b(col, j) /= d;
    for (Eigen::Index r = 0; r < n; ++r) {
      if (r == col) continue;
      const double f = a(r, col);
      if (f == 0.0) continue;
      for (Eigen::Index j = 0; j < n; ++j) a(r, j) -= f * a(col, j);
      for (Eigen::Index j = 0; j < b.cols(); ++j) b(r, j) -= f * b(col, j);
    }
  }
  return b;
}

// Normal equations (X X^T + alpha I) G = X S^T assembled with explicit loops.
inline Eigen::MatrixXd ridge_normal_equations(const Eigen::MatrixXd& x, const Eigen::MatrixXd& s, double alpha) {
  const Eigen::Index p = x.rows(), t = x.cols(), f = s.rows();
  Eigen::MatrixXd a(p, p), b(p, f);
  for (Eigen::Index i = 0; i < p; ++i) {
    for (Eigen::Index j = 0; j < p; ++j) {
      double acc = 0.0;
      for (Eigen::Index k = 0; k < t; ++k) acc += x(i, k) * x(j, k);
      a(i, j) = acc + (i == j ? alpha : 0.0);
    }
    for (Eigen::Index j = 0; j < f; ++j) {
      double acc = 0.0;
      for (Eigen::Index k = 0; k < t; ++k) acc += x(i, k) * s(j, k);
      b(i, j) = acc;
    }
  }
  return gauss_jordan(a, b);
}

inline Eigen::MatrixXd brute_lag(const Eigen::MatrixXd& x, const std::vector<int>& lags) {
  const Eigen::Index c_count = x.rows(), t_count = x.cols();
  const Eigen::Index nl = static_cast<Eigen::Index>(lags.size());
  Eigen::MatrixXd d(c_count * nl, t_count);
  for (Eigen::Index c = 0; c < c_count; ++c)
    for (Eigen::Index li = 0; li < nl; ++li)
      for (Eigen::Index t = 0; t < t_count; ++t) {
        const Eigen::Index src = t - lags[static_cast<std::size_t>(li)];
        d(c * nl + li, t) = (src >= 0 && src < t_count) ? x(c, src) : 0.0;
      }
  return d;
}

inline double pearson(const std::vector<double>& a, const std::vector<double>& b) {
  const double n = static_cast<double>(a.size());
  double sa = 0, sb = 0, saa = 0, sbb = 0, sab = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    sa += a[i];
    sb += b[i];
    saa += a[i] * a[i];
    sbb += b[i] * b[i];
    sab += a[i] * b[i];
  }
  return (n * sab - sa * sb) / std::sqrt((n * saa - sa * sa) * (n * sbb - sb * sb));
}

// Power spectrum |X_k|^2, k = 0..n/2, of a zero-padded frame by direct summation.
inline std::vector<double> dft_power(const std::vector<double>& frame, int n) {
  std::vector<double> out(static_cast<std::size_t>(n / 2 + 1));
  for (int k = 0; k <= n / 2; ++k) {
    std::complex<double> acc = 0.0;
    for (int i = 0; i < static_cast<int>(frame.size()); ++i) {
      acc += frame[static_cast<std::size_t>(i)] * std::polar(1.0, -2.0 * std::numbers::pi * k * i / n);
    }
    out[static_cast<std::size_t>(k)] = std::norm(acc);
  }
  return out;
}

// Straight-line scalar re-implementation of the network forward pass.
inline Eigen::MatrixXd naive_forward(const xcond::nn::NonlinearDecoder& net, const Eigen::MatrixXd& x) {
  const auto& s = net.shape();
  const long C = s.channels, H = s.hidden, K = s.kernel, F = s.freqs, T = x.cols();
  const long pad = (K - 1) / 2;
  std::vector<double> u(static_cast<std::size_t>(H * T)), h(static_cast<std::size_t>(H * T));
  for (long t = 0; t < T; ++t) {
    for (long j = 0; j < H; ++j) {
      double acc = net.conv_bias()(j);
      for (long k = 0; k < K; ++k) {
        const long src = t + k - pad;
        if (src < 0 || src >= T) continue;
        for (long c = 0; c < C; ++c) acc += net.conv_weight(k)(j, c) * x(c, src);
      }
      u[static_cast<std::size_t>(j * T + t)] = std::tanh(acc);
    }
  }
  for (long t = 0; t < T; ++t) {
    for (long j = 0; j < H; ++j) {
      double acc = net.recurrent_bias()(j);
      for (long i = 0; i < H; ++i) {
        acc += net.recurrent_input()(j, i) * u[static_cast<std::size_t>(i * T + t)];
        if (t > 0) acc += net.recurrent_weight()(j, i) * h[static_cast<std::size_t>(i * T + t - 1)];
      }
      h[static_cast<std::size_t>(j * T + t)] = std::tanh(acc);
    }
  }
  Eigen::MatrixXd y(F, T);
  for (long t = 0; t < T; ++t)
    for (long f = 0; f < F; ++f) {
      double acc = net.readout_bias()(f);
      for (long j = 0; j < H; ++j) acc += net.readout_weight()(f, j) * h[static_cast<std::size_t>(j * T + t)];
      y(f, t) = acc;
    }
  return y;
}

}  // namespace oracle
