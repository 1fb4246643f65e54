#pragma once

#include <complex>
#include <numbers>
#include <stdexcept>
#include <vector>

namespace floquet {

// Iterative radix-2 FFT for power-of-two sizes with precomputed twiddle
// factors and bit-reversal table. Forward transform is unnormalized,
// X_m = sum_j x_j exp(-2*pi*i*j*m/n); inverse scales by 1/n. One instance
// per size; instances are immutable after construction.
class Fft {
 public:
  explicit Fft(int n) : n_(n) {
    if (n < 2 || (n & (n - 1)) != 0)
      throw std::invalid_argument("Fft: size must be a power of two >= 2");
    int log2n = 0;
    while ((1 << log2n) < n) ++log2n;
    bitrev_.resize(n);
    for (int i = 0; i < n; ++i) {
      int r = 0;
      for (int b = 0; b < log2n; ++b) r |= ((i >> b) & 1) << (log2n - 1 - b);
      bitrev_[i] = r;
    }
    roots_.resize(n / 2);
    for (int j = 0; j < n / 2; ++j) {
      const double ang = -2.0 * std::numbers::pi * j / n;
      roots_[j] = {std::cos(ang), std::sin(ang)};
    }
  }

  int size() const { return n_; }

  void forward(std::complex<double>* data) const { transform(data, false); }

  void inverse(std::complex<double>* data) const {
    transform(data, true);
    const double inv_n = 1.0 / n_;
    for (int i = 0; i < n_; ++i) data[i] *= inv_n;
  }

  void forward(std::vector<std::complex<double>>& data) const {
    check(data.size());
    forward(data.data());
  }

  void inverse(std::vector<std::complex<double>>& data) const {
    check(data.size());
    inverse(data.data());
  }

 private:
  void check(std::size_t m) const {
    if (static_cast<int>(m) != n_)
      throw std::invalid_argument("Fft: data size does not match plan size");
  }

  void transform(std::complex<double>* a, bool inv) const {
    for (int i = 0; i < n_; ++i) {
      const int j = bitrev_[i];
      if (i < j) std::swap(a[i], a[j]);
    }
    for (int len = 2; len <= n_; len <<= 1) {
      const int half = len / 2;
      const int step = n_ / len;
      for (int start = 0; start < n_; start += len) {
        for (int i = 0; i < half; ++i) {
          std::complex<double> w = roots_[i * step];
          if (inv) w = std::conj(w);
          const std::complex<double> u = a[start + i];
          const std::complex<double> v = a[start + i + half] * w;
          a[start + i] = u + v;
          a[start + i + half] = u - v;
        }
      }
    }
  }

  int n_;
  std::vector<int> bitrev_;
  std::vector<std::complex<double>> roots_;
};

}  // namespace floquet
