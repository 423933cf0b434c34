#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"

#include "gridsense/feature_matrix.hpp"
#include "gridsense/signal.hpp"

namespace gridsense {

/// Tunable extractor parameters. Defaults give the 41-feature channel schema.
struct FeatureParams {
    int n_blocks = 4;
    int n_fft = 10;
    int hist_bins = 16;
    int perm_order = 3;
    int perm_delay = 1;
    int sampen_m = 2;
    double sampen_r = 0.2;
    int dfa_scales = 10;
    int wavelet_levels = 6;
    std::vector<int> cov_lags{1, 2, 3, 4};
};

void to_json(nlohmann::json& j, const FeatureParams& p);
void from_json(const nlohmann::json& j, FeatureParams& p);

// --- extractors -------------------------------------------------------------

struct BasicStats {
    double mean = 0, var = 0, skewness = 0, kurtosis = 0, min = 0, max = 0, median = 0;
};

/// Population moments; kurtosis is excess. Needs at least 4 samples.
BasicStats stats_basic(std::span<const double> x);

struct BlockStats {
    std::vector<double> mean;
    std::vector<double> std;
};

/// Contiguous equal blocks (remainder goes to the last block), index 0 earliest.
BlockStats stats_blocks(std::span<const double> x, int n_blocks = 4);

/// 2|X_k|/N for k = 1..n (DC excluded).
std::vector<double> fft_coeffs(std::span<const double> x, int n = 10);

struct SpectralShape {
    double entropy = 0;    // normalized to [0, 1]
    double centroid = 0;   // Hz
    double bandwidth = 0;  // Hz
    double magnitude_std = 0;
};

SpectralShape spectral_shape(std::span<const double> x, double rate_hz);

/// Equal-width histogram entropy in bits.
double shannon_entropy(std::span<const double> x, int n_bins = 16);

/// Ordinal-pattern entropy normalized by ln(order!).
double permutation_entropy(std::span<const double> x, int order = 3, int delay = 1);

/// SampEn with tolerance r_mult * population std, Chebyshev distance, non-strict.
double sample_entropy(std::span<const double> x, int m = 2, double r_mult = 0.2);

/// Entropy of the relative Haar detail energy per level, computed on the
/// trailing power-of-two part of the window.
double wavelet_entropy(std::span<const double> x, int max_levels = 6);

/// Per-level Haar detail energies (level 1 first) used by wavelet_entropy.
std::vector<double> haar_detail_energies(std::span<const double> x, int max_levels = 6);

struct EnergyFeatures {
    double energy = 0, rms = 0, ptp = 0;
};

EnergyFeatures energy_features(std::span<const double> x);

struct DfaResult {
    double alpha = 0.0;
    std::vector<int> scales;
    std::vector<double> fluctuation;  // after flooring at 1e-12
    int floored = 0;                  // scales whose F(n) hit the floor
};

/// Scales: `n_scales` log-spaced integers in [4, N/4], deduplicated.
std::vector<int> dfa_scales(std::size_t n, int n_scales = 10);
DfaResult dfa(std::span<const double> x, int n_scales = 10);
inline double dfa_exponent(std::span<const double> x, int n_scales = 10) { return dfa(x, n_scales).alpha; }

/// Lag-k autocorrelation with 1/N normalization; all zeros for constant input.
std::vector<double> autocov(std::span<const double> x, std::span<const int> lags);

// --- schema -------------------------------------------------------------------

/// One per-channel feature: family key plus optional index (block, bin, lag).
struct FeatureEntry {
    std::string family;  // key used for exclusion ("mean", "block_std", "fft", ...)
    std::string base;    // printed name stem ("mean", "std", "fft", ...)
    int index = -1;

    std::string name(const std::string& channel) const;
};

struct FeatureSchema {
    std::vector<std::string> channels{kVoltageChannel, kCurrentChannel};
    std::vector<FeatureEntry> entries;  // per channel

    /// Full schema for the given parameters minus excluded families.
    static FeatureSchema build(const FeatureParams& params = {}, const std::vector<std::string>& exclude = {});
    /// Every valid family key.
    static std::vector<std::string> families();

    std::size_t size() const { return channels.size() * entries.size(); }
    /// Names in column order: channel-major, entries in schema order.
    std::vector<std::string> names() const;
    nlohmann::json to_json() const;
};

struct FeatureVector {
    std::vector<std::string> names;
    std::vector<double> values;
    double scale_s = 0.0;  // 0 for multi-scale vectors
    std::string terminal_id;
    SegmentLabel label;
    std::size_t event_index = 0;
};

/// Every per-channel feature value for one window, in full-schema order.
std::vector<double> channel_features(std::span<const double> window, double rate_hz, const FeatureParams& params);

FeatureVector extract_single_scale(const Segment& segment, double size_s, const FeatureParams& params = {},
                                   const FeatureSchema& schema = FeatureSchema::build());

/// Concatenated single-scale vectors with `__w<size>` suffixes.
FeatureVector extract_multiscale(const Segment& segment, const WindowSpec& spec, const FeatureParams& params = {},
                                 const FeatureSchema& schema = FeatureSchema::build());

std::string scale_suffix(double size_s);
std::vector<std::string> multiscale_names(const FeatureSchema& schema, const WindowSpec& spec);

/// Multi-scale feature rows for all segments; labels are segment classes and
/// row ids are Segment::id().
FeatureMatrix extract_matrix(const std::vector<Segment>& segments, const WindowSpec& spec,
                             const FeatureParams& params = {}, const FeatureSchema& schema = FeatureSchema::build(),
                             int threads = 1);

}  // namespace gridsense
