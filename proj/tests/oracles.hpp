#pragma once

// Naive reference implementations used to check the production kernels.
// They favour directness over speed: O(N^2) transforms, brute-force pair
// counting, recursive Haar, normal-equation least squares.

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstddef>
#include <numeric>
#include <vector>

namespace oracle {

inline double mean(const std::vector<double>& x) {
    double s = 0.0;
    for (double v : x) s += v;
    return s / static_cast<double>(x.size());
}

inline double central_moment(const std::vector<double>& x, int k) {
    const double m = mean(x);
    double s = 0.0;
    for (double v : x) s += std::pow(v - m, k);
    return s / static_cast<double>(x.size());
}

inline double median(std::vector<double> x) {
    std::sort(x.begin(), x.end());
    const std::size_t n = x.size();
    return n % 2 ? x[n / 2] : 0.5 * (x[n / 2 - 1] + x[n / 2]);
}

inline double pop_std(const std::vector<double>& x) { return std::sqrt(central_moment(x, 2)); }

/// Direct-summation DFT, all N bins. The phase index is reduced mod N so the
/// angle stays accurate for large k*t.
inline std::vector<std::complex<double>> dft(const std::vector<double>& x) {
    const std::size_t n = x.size();
    std::vector<std::complex<double>> out(n);
    for (std::size_t k = 0; k < n; ++k) {
        double re = 0.0, im = 0.0;
        for (std::size_t t = 0; t < n; ++t) {
            const double angle = -2.0 * M_PI * static_cast<double>((k * t) % n) / static_cast<double>(n);
            re += x[t] * std::cos(angle);
            im += x[t] * std::sin(angle);
        }
        out[k] = {re, im};
    }
    return out;
}

inline std::vector<double> fft_coeffs(const std::vector<double>& x, int n_coeffs) {
    const auto X = dft(x);
    std::vector<double> out;
    for (int i = 1; i <= n_coeffs; ++i) out.push_back(2.0 * std::abs(X[static_cast<std::size_t>(i)]) / x.size());
    return out;
}

struct Spectral {
    double entropy = 0, centroid = 0, bandwidth = 0, mag_std = 0;
};

inline Spectral spectral(const std::vector<double>& x, double rate) {
    const auto X = dft(x);
    const std::size_t half = x.size() / 2;
    std::vector<double> power, mag, freq;
    for (std::size_t k = 1; k <= half; ++k) {
        mag.push_back(std::abs(X[k]));
        power.push_back(mag.back() * mag.back());
        freq.push_back(static_cast<double>(k) * rate / static_cast<double>(x.size()));
    }
    const double total = std::accumulate(power.begin(), power.end(), 0.0);
    Spectral s;
    if (total < 1e-24) return s;
    double h = 0.0;
    for (std::size_t i = 0; i < power.size(); ++i) {
        const double p = power[i] / total;
        if (p > 0) h -= p * std::log(p);
        s.centroid += freq[i] * p;
    }
    double spread = 0.0;
    for (std::size_t i = 0; i < power.size(); ++i) spread += std::pow(freq[i] - s.centroid, 2) * power[i] / total;
    s.entropy = h / std::log(static_cast<double>(half));
    s.bandwidth = std::sqrt(spread);
    s.mag_std = pop_std(mag);
    return s;
}

/// Histogram entropy in bits; a value belongs to the bin whose lower edge is
/// the largest edge not above it.
inline double shannon(const std::vector<double>& x, int n_bins) {
    const double lo = *std::min_element(x.begin(), x.end());
    const double hi = *std::max_element(x.begin(), x.end());
    if (hi == lo) return 0.0;
    const double width = (hi - lo) / n_bins;
    std::vector<double> counts(static_cast<std::size_t>(n_bins), 0.0);
    for (double v : x) {
        int b = 0;
        for (int e = 1; e < n_bins; ++e) {
            if (v >= lo + e * width) b = e;
        }
        counts[static_cast<std::size_t>(b)] += 1.0;
    }
    double h = 0.0;
    for (double c : counts) {
        if (c > 0) {
            const double p = c / static_cast<double>(x.size());
            h -= p * std::log2(p);
        }
    }
    return h;
}

/// Counts each of the m! ordinal patterns by explicit enumeration.
inline double permutation_entropy(const std::vector<double>& x, int m, int delay) {
    std::vector<std::vector<int>> patterns;
    std::vector<int> perm(static_cast<std::size_t>(m));
    std::iota(perm.begin(), perm.end(), 0);
    do patterns.push_back(perm);
    while (std::next_permutation(perm.begin(), perm.end()));

    std::vector<double> counts(patterns.size(), 0.0);
    const std::size_t span = static_cast<std::size_t>((m - 1) * delay);
    const std::size_t n_vec = x.size() - span;
    for (std::size_t t = 0; t < n_vec; ++t) {
        // rank[i] = position of element i in ascending order, ties by index.
        std::vector<int> order(static_cast<std::size_t>(m));
        for (int i = 0; i < m; ++i) {
            int rank = 0;
            const double vi = x[t + static_cast<std::size_t>(i * delay)];
            for (int j = 0; j < m; ++j) {
                const double vj = x[t + static_cast<std::size_t>(j * delay)];
                if (vj < vi || (vj == vi && j < i)) ++rank;
            }
            order[static_cast<std::size_t>(rank)] = i;
        }
        const auto it = std::find(patterns.begin(), patterns.end(), order);
        counts[static_cast<std::size_t>(it - patterns.begin())] += 1.0;
    }
    double h = 0.0;
    for (double c : counts) {
        if (c > 0) {
            const double p = c / static_cast<double>(n_vec);
            h -= p * std::log(p);
        }
    }
    return h / std::log(static_cast<double>(patterns.size()));
}

struct PairCounts {
    long long b = 0, a = 0;
};

inline PairCounts sampen_pairs(const std::vector<double>& x, int m, double r) {
    PairCounts c;
    const std::size_t templates = x.size() - static_cast<std::size_t>(m);
    for (std::size_t i = 0; i < templates; ++i) {
        for (std::size_t j = i + 1; j < templates; ++j) {
            double d = 0.0;
            for (int k = 0; k < m; ++k) d = std::max(d, std::abs(x[i + k] - x[j + k]));
            if (d > r) continue;
            ++c.b;
            if (std::max(d, std::abs(x[i + m] - x[j + m])) <= r) ++c.a;
        }
    }
    return c;
}

inline double sample_entropy(const std::vector<double>& x, int m, double r_mult) {
    const double r = r_mult * pop_std(x);
    const auto c = sampen_pairs(x, m, r);
    if (c.b == 0) return 0.0;
    if (c.a == 0) {
        const double t = static_cast<double>(x.size() - static_cast<std::size_t>(m));
        return std::log(t * (t - 1) / 2.0);
    }
    return -std::log(static_cast<double>(c.a) / static_cast<double>(c.b));
}

inline void haar_recurse(const std::vector<double>& approx, int level, int max_level, std::vector<double>& energies) {
    if (level > max_level) return;
    std::vector<double> next;
    double e = 0.0;
    for (std::size_t k = 0; k + 1 < approx.size(); k += 2) {
        const double d = (approx[k] - approx[k + 1]) / std::sqrt(2.0);
        e += d * d;
        next.push_back((approx[k] + approx[k + 1]) / std::sqrt(2.0));
    }
    energies.push_back(e);
    haar_recurse(next, level + 1, max_level, energies);
}

/// Haar detail energies on the trailing power-of-two part of x.
inline std::vector<double> haar_energies(const std::vector<double>& x, int max_levels) {
    std::size_t p = 1;
    int log2p = 0;
    while (p * 2 <= x.size()) {
        p *= 2;
        ++log2p;
    }
    const std::vector<double> tail(x.end() - static_cast<std::ptrdiff_t>(p), x.end());
    std::vector<double> energies;
    haar_recurse(tail, 1, std::min(max_levels, log2p - 1), energies);
    return energies;
}

inline double wavelet_entropy(const std::vector<double>& x, int max_levels) {
    const auto e = haar_energies(x, max_levels);
    const double total = std::accumulate(e.begin(), e.end(), 0.0);
    if (total < 1e-24) return 0.0;
    double h = 0.0;
    for (double v : e) {
        if (v > 0) h -= (v / total) * std::log(v / total);
    }
    return h;
}

/// Least-squares slope of y on x via normal equations.
inline double ls_slope(const std::vector<double>& x, const std::vector<double>& y) {
    const double n = static_cast<double>(x.size());
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        sx += x[i];
        sy += y[i];
        sxx += x[i] * x[i];
        sxy += x[i] * y[i];
    }
    return (n * sxy - sx * sy) / (n * sxx - sx * sx);
}

inline std::vector<int> dfa_scales(std::size_t n, int count) {
    const double lo = 4.0, hi = std::floor(n / 4.0);
    std::vector<int> out;
    for (int i = 0; i < count; ++i) {
        const int s = static_cast<int>(std::lround(lo * std::pow(hi / lo, static_cast<double>(i) / (count - 1))));
        if (out.empty() || out.back() != s) out.push_back(s);
    }
    return out;
}

inline double dfa_fluctuation(const std::vector<double>& profile, int scale) {
    const std::size_t n = static_cast<std::size_t>(scale);
    const std::size_t boxes = profile.size() / n;
    double rss = 0.0;
    for (std::size_t b = 0; b < boxes; ++b) {
        std::vector<double> t(n), y(n);
        for (std::size_t i = 0; i < n; ++i) {
            t[i] = static_cast<double>(i);
            y[i] = profile[b * n + i];
        }
        const double slope = ls_slope(t, y);
        const double intercept = mean(y) - slope * mean(t);
        for (std::size_t i = 0; i < n; ++i) rss += std::pow(y[i] - (intercept + slope * t[i]), 2);
    }
    return std::max(std::sqrt(rss / static_cast<double>(boxes * n)), 1e-12);
}

inline double dfa(const std::vector<double>& x, int n_scales) {
    const double m = mean(x);
    std::vector<double> profile;
    double acc = 0.0;
    for (double v : x) profile.push_back(acc += v - m);
    std::vector<double> ln_n, ln_f;
    for (int s : dfa_scales(x.size(), n_scales)) {
        ln_n.push_back(std::log(static_cast<double>(s)));
        ln_f.push_back(std::log(dfa_fluctuation(profile, s)));
    }
    return ls_slope(ln_n, ln_f);
}

inline std::vector<double> autocorr(const std::vector<double>& x, const std::vector<int>& lags) {
    const double m = mean(x);
    const double m2 = central_moment(x, 2);
    std::vector<double> out;
    for (int k : lags) {
        if (m2 < 1e-12) {
            out.push_back(0.0);
            continue;
        }
        double s = 0.0;
        for (std::size_t t = 0; t + static_cast<std::size_t>(k) < x.size(); ++t) s += (x[t] - m) * (x[t + k] - m);
        out.push_back(s / static_cast<double>(x.size()) / m2);
    }
    return out;
}

/// All 41 default per-channel features in schema order.
inline std::vector<double> channel_features(const std::vector<double>& x, double rate) {
    std::vector<double> f;
    const double m2 = central_moment(x, 2);
    f.push_back(mean(x));
    f.push_back(m2);
    f.push_back(m2 < 1e-12 ? 0.0 : central_moment(x, 3) / std::pow(m2, 1.5));
    f.push_back(m2 < 1e-12 ? 0.0 : central_moment(x, 4) / (m2 * m2) - 3.0);
    f.push_back(*std::min_element(x.begin(), x.end()));
    f.push_back(*std::max_element(x.begin(), x.end()));
    f.push_back(median(x));

    const std::size_t len = x.size() / 4;
    std::vector<std::vector<double>> blocks(4);
    for (std::size_t i = 0; i < x.size(); ++i) blocks[std::min<std::size_t>(i / len, 3)].push_back(x[i]);
    for (const auto& b : blocks) f.push_back(mean(b));
    for (const auto& b : blocks) f.push_back(pop_std(b));

    for (double c : fft_coeffs(x, 10)) f.push_back(c);
    const auto s = spectral(x, rate);
    f.insert(f.end(), {s.entropy, s.centroid, s.bandwidth, s.mag_std});
    f.push_back(shannon(x, 16));
    f.push_back(permutation_entropy(x, 3, 1));
    f.push_back(sample_entropy(x, 2, 0.2));
    f.push_back(wavelet_entropy(x, 6));

    double energy = 0.0;
    for (double v : x) energy += v * v;
    f.push_back(energy);
    f.push_back(std::sqrt(energy / static_cast<double>(x.size())));
    f.push_back(*std::max_element(x.begin(), x.end()) - *std::min_element(x.begin(), x.end()));
    f.push_back(dfa(x, 10));
    for (double c : autocorr(x, {1, 2, 3, 4})) f.push_back(c);
    return f;
}

}  // namespace oracle
