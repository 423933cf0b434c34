#pragma once

#include <complex>
#include <span>
#include <vector>

namespace gridsense {

/// Non-negative-frequency half of the DFT of a real sequence,
/// X_k = sum_t x_t e^{-2 pi i k t / N} for k = 0..N/2. Thread-safe.
std::vector<std::complex<double>> real_dft(std::span<const double> x);

}  // namespace gridsense
