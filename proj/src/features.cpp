#include "gridsense/features.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <map>
#include <numeric>

#include "gridsense/common.hpp"
#include "gridsense/fft.hpp"

namespace gridsense {

void to_json(nlohmann::json& j, const FeatureParams& p) {
    j = {{"n_blocks", p.n_blocks},     {"n_fft", p.n_fft},           {"hist_bins", p.hist_bins},
         {"perm_order", p.perm_order}, {"perm_delay", p.perm_delay}, {"sampen_m", p.sampen_m},
         {"sampen_r", p.sampen_r},     {"dfa_scales", p.dfa_scales}, {"wavelet_levels", p.wavelet_levels},
         {"cov_lags", p.cov_lags}};
}

void from_json(const nlohmann::json& j, FeatureParams& p) {
    p = FeatureParams{};
    if (j.contains("n_blocks")) j.at("n_blocks").get_to(p.n_blocks);
    if (j.contains("n_fft")) j.at("n_fft").get_to(p.n_fft);
    if (j.contains("hist_bins")) j.at("hist_bins").get_to(p.hist_bins);
    if (j.contains("perm_order")) j.at("perm_order").get_to(p.perm_order);
    if (j.contains("perm_delay")) j.at("perm_delay").get_to(p.perm_delay);
    if (j.contains("sampen_m")) j.at("sampen_m").get_to(p.sampen_m);
    if (j.contains("sampen_r")) j.at("sampen_r").get_to(p.sampen_r);
    if (j.contains("dfa_scales")) j.at("dfa_scales").get_to(p.dfa_scales);
    if (j.contains("wavelet_levels")) j.at("wavelet_levels").get_to(p.wavelet_levels);
    if (j.contains("cov_lags")) j.at("cov_lags").get_to(p.cov_lags);
}

namespace {

double mean_of(std::span<const double> x) {
    double s = 0.0;
    for (double v : x) s += v;
    return s / static_cast<double>(x.size());
}

double population_std(std::span<const double> x) {
    const double m = mean_of(x);
    double s = 0.0;
    for (double v : x) s += (v - m) * (v - m);
    return std::sqrt(s / static_cast<double>(x.size()));
}

std::vector<double> centered(std::span<const double> x) {
    const double m = mean_of(x);
    std::vector<double> out(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) out[i] = x[i] - m;
    return out;
}

void require(bool ok, const std::string& what) {
    if (!ok) throw PreconditionError(what);
}

}  // namespace

// --- extractors -------------------------------------------------------------------

BasicStats stats_basic(std::span<const double> x) {
    require(x.size() >= 4, "stats_basic needs at least 4 samples");
    const double n = static_cast<double>(x.size());
    BasicStats s;
    s.mean = mean_of(x);
    double m2 = 0, m3 = 0, m4 = 0;
    for (double v : x) {
        const double d = v - s.mean;
        const double d2 = d * d;
        m2 += d2;
        m3 += d2 * d;
        m4 += d2 * d2;
    }
    m2 /= n;
    m3 /= n;
    m4 /= n;
    s.var = m2;
    if (m2 >= 1e-12) {
        s.skewness = m3 / std::pow(m2, 1.5);
        s.kurtosis = m4 / (m2 * m2) - 3.0;
    }
    const auto [lo, hi] = std::minmax_element(x.begin(), x.end());
    s.min = *lo;
    s.max = *hi;
    std::vector<double> sorted(x.begin(), x.end());
    const std::size_t mid = sorted.size() / 2;
    std::nth_element(sorted.begin(), sorted.begin() + static_cast<std::ptrdiff_t>(mid), sorted.end());
    const double upper = sorted[mid];
    if (sorted.size() % 2 == 1) {
        s.median = upper;
    } else {
        const double lower = *std::max_element(sorted.begin(), sorted.begin() + static_cast<std::ptrdiff_t>(mid));
        s.median = 0.5 * (lower + upper);
    }
    return s;
}

BlockStats stats_blocks(std::span<const double> x, int n_blocks) {
    require(n_blocks >= 1, "stats_blocks needs at least one block");
    require(x.size() >= static_cast<std::size_t>(n_blocks), "stats_blocks: window shorter than block count");
    const std::size_t blocks = static_cast<std::size_t>(n_blocks);
    const std::size_t len = x.size() / blocks;
    BlockStats out;
    for (std::size_t b = 0; b < blocks; ++b) {
        const std::size_t begin = b * len;
        const std::size_t end = b + 1 == blocks ? x.size() : begin + len;
        const auto block = x.subspan(begin, end - begin);
        out.mean.push_back(mean_of(block));
        out.std.push_back(population_std(block));
    }
    return out;
}

std::vector<double> fft_coeffs(std::span<const double> x, int n) {
    require(n >= 1, "fft_coeffs needs n >= 1");
    require(x.size() >= 2 * static_cast<std::size_t>(n + 1), "fft_coeffs: window too short");
    // Centering changes only the DC bin, which is excluded.
    const auto spectrum = real_dft(centered(x));
    const double scale = 2.0 / static_cast<double>(x.size());
    std::vector<double> out(static_cast<std::size_t>(n));
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = scale * std::abs(spectrum[i + 1]);
    return out;
}

SpectralShape spectral_shape(std::span<const double> x, double rate_hz) {
    require(x.size() >= 64, "spectral_shape needs at least 64 samples");
    require(rate_hz > 0.0, "spectral_shape needs a positive rate");
    const std::size_t n = x.size();
    const std::size_t half = n / 2;
    const auto spectrum = real_dft(centered(x));
    std::vector<double> mag(half), power(half);
    double total = 0.0;
    for (std::size_t k = 1; k <= half; ++k) {
        mag[k - 1] = std::abs(spectrum[k]);
        power[k - 1] = std::norm(spectrum[k]);
        total += power[k - 1];
    }
    SpectralShape s;
    if (total < 1e-24) return s;
    const double df = rate_hz / static_cast<double>(n);
    double h = 0.0;
    double centroid = 0.0;
    for (std::size_t k = 1; k <= half; ++k) {
        const double p = power[k - 1] / total;
        if (p > 0.0) h -= p * std::log(p);
        centroid += static_cast<double>(k) * df * p;
    }
    double spread = 0.0;
    for (std::size_t k = 1; k <= half; ++k) {
        const double d = static_cast<double>(k) * df - centroid;
        spread += d * d * power[k - 1] / total;
    }
    s.entropy = half > 1 ? h / std::log(static_cast<double>(half)) : 0.0;
    s.centroid = centroid;
    s.bandwidth = std::sqrt(spread);
    s.magnitude_std = population_std(mag);
    return s;
}

double shannon_entropy(std::span<const double> x, int n_bins) {
    require(n_bins >= 1, "shannon_entropy needs at least one bin");
    require(x.size() >= static_cast<std::size_t>(n_bins), "shannon_entropy: window shorter than bin count");
    const auto [lo_it, hi_it] = std::minmax_element(x.begin(), x.end());
    const double lo = *lo_it;
    const double range = *hi_it - lo;
    if (!(range > 0.0)) return 0.0;
    std::vector<std::size_t> counts(static_cast<std::size_t>(n_bins), 0);
    for (double v : x) {
        auto b = static_cast<long long>(std::floor((v - lo) / range * n_bins));
        b = std::clamp<long long>(b, 0, n_bins - 1);
        ++counts[static_cast<std::size_t>(b)];
    }
    double h = 0.0;
    const double n = static_cast<double>(x.size());
    for (std::size_t c : counts) {
        if (c == 0) continue;
        const double p = static_cast<double>(c) / n;
        h -= p * std::log2(p);
    }
    return h;
}

double permutation_entropy(std::span<const double> x, int order, int delay) {
    require(order >= 2 && order <= 10, "permutation_entropy order must be in [2, 10]");
    require(delay >= 1, "permutation_entropy delay must be >= 1");
    const std::size_t span = static_cast<std::size_t>((order - 1) * delay);
    require(x.size() >= span + 2, "permutation_entropy: window too short");
    const std::size_t m = static_cast<std::size_t>(order);
    const std::size_t vectors = x.size() - span;
    std::map<std::uint64_t, std::size_t> counts;
    std::vector<std::size_t> idx(m);
    for (std::size_t t = 0; t < vectors; ++t) {
        std::iota(idx.begin(), idx.end(), std::size_t{0});
        // Ties: the earlier element ranks lower.
        std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) {
            return x[t + a * static_cast<std::size_t>(delay)] < x[t + b * static_cast<std::size_t>(delay)];
        });
        std::uint64_t code = 0;
        for (std::size_t i = 0; i < m; ++i) code = code * m + idx[i];
        ++counts[code];
    }
    double h = 0.0;
    for (const auto& [code, c] : counts) {
        const double p = static_cast<double>(c) / static_cast<double>(vectors);
        h -= p * std::log(p);
    }
    double log_fact = 0.0;
    for (int i = 2; i <= order; ++i) log_fact += std::log(static_cast<double>(i));
    return h / log_fact;
}

double sample_entropy(std::span<const double> x, int m, double r_mult) {
    require(m >= 1, "sample_entropy needs m >= 1");
    require(r_mult >= 0.0, "sample_entropy needs r_mult >= 0");
    require(x.size() >= std::max<std::size_t>(16, static_cast<std::size_t>(m) + 2),
            "sample_entropy needs at least 16 samples");
    const double r = r_mult * population_std(x);
    const std::size_t mm = static_cast<std::size_t>(m);
    const std::size_t templates = x.size() - mm;

    // Pairs are visited in order of their first coordinate so only candidates
    // within r of each other on that coordinate are examined.
    std::vector<std::size_t> order(templates);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return x[a] < x[b]; });

    std::uint64_t b_count = 0;
    std::uint64_t a_count = 0;
    for (std::size_t p = 0; p < templates; ++p) {
        const std::size_t i = order[p];
        for (std::size_t q = p + 1; q < templates; ++q) {
            const std::size_t j = order[q];
            if (x[j] - x[i] > r) break;
            bool match = true;
            for (std::size_t k = 1; k < mm; ++k) {
                if (std::abs(x[i + k] - x[j + k]) > r) {
                    match = false;
                    break;
                }
            }
            if (!match) continue;
            ++b_count;
            if (std::abs(x[i + mm] - x[j + mm]) <= r) ++a_count;
        }
    }
    if (b_count == 0) return 0.0;
    if (a_count == 0) {
        const double pairs = static_cast<double>(templates) * static_cast<double>(templates - 1) / 2.0;
        return std::log(pairs);
    }
    return -std::log(static_cast<double>(a_count) / static_cast<double>(b_count));
}

std::vector<double> haar_detail_energies(std::span<const double> x, int max_levels) {
    require(x.size() >= 64, "wavelet_entropy needs at least 64 samples");
    require(max_levels >= 1, "wavelet_entropy needs at least one level");
    int log2n = 0;
    while ((std::size_t{2} << log2n) <= x.size()) ++log2n;
    const std::size_t pow2 = std::size_t{1} << log2n;
    const int levels = std::min(max_levels, log2n - 1);
    const auto tail = x.last(pow2);
    std::vector<double> approx(tail.begin(), tail.end());
    std::vector<double> energies;
    const double inv_sqrt2 = 1.0 / std::sqrt(2.0);
    for (int level = 0; level < levels; ++level) {
        const std::size_t half = approx.size() / 2;
        double e = 0.0;
        for (std::size_t k = 0; k < half; ++k) {
            const double a = approx[2 * k];
            const double b = approx[2 * k + 1];
            const double d = (a - b) * inv_sqrt2;
            e += d * d;
            approx[k] = (a + b) * inv_sqrt2;
        }
        approx.resize(half);
        energies.push_back(e);
    }
    return energies;
}

double wavelet_entropy(std::span<const double> x, int max_levels) {
    const auto energies = haar_detail_energies(x, max_levels);
    const double total = std::accumulate(energies.begin(), energies.end(), 0.0);
    if (total < 1e-24) return 0.0;
    double h = 0.0;
    for (double e : energies) {
        const double p = e / total;
        if (p > 0.0) h -= p * std::log(p);
    }
    return h;
}

EnergyFeatures energy_features(std::span<const double> x) {
    require(!x.empty(), "energy_features needs a non-empty window");
    EnergyFeatures f;
    for (double v : x) f.energy += v * v;
    f.rms = std::sqrt(f.energy / static_cast<double>(x.size()));
    const auto [lo, hi] = std::minmax_element(x.begin(), x.end());
    f.ptp = *hi - *lo;
    return f;
}

std::vector<int> dfa_scales(std::size_t n, int n_scales) {
    require(n_scales >= 2, "dfa needs at least 2 candidate scales");
    const double lo = 4.0;
    const double hi = std::floor(static_cast<double>(n) / 4.0);
    std::vector<int> scales;
    if (hi < lo) return scales;
    for (int i = 0; i < n_scales; ++i) {
        const double t = static_cast<double>(i) / static_cast<double>(n_scales - 1);
        const int s = static_cast<int>(std::lround(std::exp(std::log(lo) + t * (std::log(hi) - std::log(lo)))));
        if (scales.empty() || s != scales.back()) scales.push_back(s);
    }
    return scales;
}

DfaResult dfa(std::span<const double> x, int n_scales) {
    require(x.size() >= 64, "dfa needs at least 64 samples");
    DfaResult r;
    r.scales = dfa_scales(x.size(), n_scales);
    if (r.scales.size() < 3) throw PreconditionError("dfa: fewer than 3 usable scales");

    std::vector<double> profile(x.size());
    const double m = mean_of(x);
    double acc = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        acc += x[i] - m;
        profile[i] = acc;
    }

    std::vector<double> log_n, log_f;
    for (int scale : r.scales) {
        const std::size_t n = static_cast<std::size_t>(scale);
        const std::size_t boxes = x.size() / n;
        const double t_mean = static_cast<double>(n - 1) / 2.0;
        double t_var = 0.0;
        for (std::size_t t = 0; t < n; ++t) t_var += (static_cast<double>(t) - t_mean) * (static_cast<double>(t) - t_mean);
        double rss = 0.0;
        for (std::size_t b = 0; b < boxes; ++b) {
            const double* y = profile.data() + b * n;
            double y_mean = 0.0;
            for (std::size_t t = 0; t < n; ++t) y_mean += y[t];
            y_mean /= static_cast<double>(n);
            double cov = 0.0;
            for (std::size_t t = 0; t < n; ++t) cov += (static_cast<double>(t) - t_mean) * (y[t] - y_mean);
            const double slope = cov / t_var;
            for (std::size_t t = 0; t < n; ++t) {
                const double resid = (y[t] - y_mean) - slope * (static_cast<double>(t) - t_mean);
                rss += resid * resid;
            }
        }
        double f = std::sqrt(rss / static_cast<double>(boxes * n));
        if (f < 1e-12) {
            f = 1e-12;
            ++r.floored;
        }
        r.fluctuation.push_back(f);
        log_n.push_back(std::log(static_cast<double>(scale)));
        log_f.push_back(std::log(f));
    }
    const double mx = std::accumulate(log_n.begin(), log_n.end(), 0.0) / static_cast<double>(log_n.size());
    const double my = std::accumulate(log_f.begin(), log_f.end(), 0.0) / static_cast<double>(log_f.size());
    double sxy = 0.0, sxx = 0.0;
    for (std::size_t i = 0; i < log_n.size(); ++i) {
        sxy += (log_n[i] - mx) * (log_f[i] - my);
        sxx += (log_n[i] - mx) * (log_n[i] - mx);
    }
    r.alpha = sxy / sxx;
    return r;
}

std::vector<double> autocov(std::span<const double> x, std::span<const int> lags) {
    int max_lag = 0;
    for (int k : lags) {
        require(k >= 1, "autocov lags must be positive");
        max_lag = std::max(max_lag, k);
    }
    require(x.size() > static_cast<std::size_t>(max_lag) + 1, "autocov: window too short for the largest lag");
    const double n = static_cast<double>(x.size());
    const double m = mean_of(x);
    double m2 = 0.0;
    for (double v : x) m2 += (v - m) * (v - m);
    m2 /= n;
    std::vector<double> out(lags.size(), 0.0);
    if (m2 < 1e-12) return out;
    for (std::size_t i = 0; i < lags.size(); ++i) {
        const std::size_t k = static_cast<std::size_t>(lags[i]);
        double s = 0.0;
        for (std::size_t t = 0; t + k < x.size(); ++t) s += (x[t] - m) * (x[t + k] - m);
        out[i] = (s / n) / m2;
    }
    return out;
}

// --- schema ----------------------------------------------------------------------------

std::string FeatureEntry::name(const std::string& channel) const {
    std::string out = base + "_" + channel;
    if (index >= 0) out += "_" + std::to_string(index);
    return out;
}

std::vector<std::string> FeatureSchema::families() {
    return {"mean",     "var",        "skewness", "kurtosis",     "min",       "max",       "median",
            "block_mean", "block_std", "fft",      "s_entropy",    "s_centroid", "s_bandw",  "m_sp_std",
            "sh_entropy", "p_entropy", "samp_entropy", "w_entropy", "energy",    "rms",      "ptp",
            "dfa",        "cov"};
}

FeatureSchema FeatureSchema::build(const FeatureParams& params, const std::vector<std::string>& exclude) {
    const auto known = families();
    for (const auto& e : exclude) {
        if (std::find(known.begin(), known.end(), e) == known.end()) {
            throw PreconditionError("unknown feature family '" + e + "'");
        }
    }
    auto excluded = [&](const std::string& family) {
        return std::find(exclude.begin(), exclude.end(), family) != exclude.end();
    };
    FeatureSchema s;
    auto add = [&](const std::string& family, const std::string& base, int index = -1) {
        if (!excluded(family)) s.entries.push_back({family, base, index});
    };
    for (const char* f : {"mean", "var", "skewness", "kurtosis", "min", "max", "median"}) add(f, f);
    for (int i = 0; i < params.n_blocks; ++i) add("block_mean", "mean", i);
    for (int i = 0; i < params.n_blocks; ++i) add("block_std", "std", i);
    for (int i = 0; i < params.n_fft; ++i) add("fft", "fft", i);
    for (const char* f : {"s_entropy", "s_centroid", "s_bandw", "m_sp_std", "sh_entropy", "p_entropy", "samp_entropy",
                          "w_entropy", "energy", "rms", "ptp", "dfa"}) {
        add(f, f);
    }
    for (int lag : params.cov_lags) add("cov", "cov", lag);
    if (s.entries.empty()) throw PreconditionError("feature schema is empty after exclusions");
    return s;
}

std::vector<std::string> FeatureSchema::names() const {
    std::vector<std::string> out;
    out.reserve(size());
    for (const auto& ch : channels) {
        for (const auto& e : entries) out.push_back(e.name(ch));
    }
    return out;
}

nlohmann::json FeatureSchema::to_json() const {
    nlohmann::json entries_json = nlohmann::json::array();
    for (const auto& e : entries) {
        nlohmann::json j = {{"family", e.family}, {"base", e.base}};
        if (e.index >= 0) j["index"] = e.index;
        entries_json.push_back(j);
    }
    return {{"channels", channels}, {"per_channel", entries_json}, {"names", names()}, {"size", size()}};
}

// --- extraction ---------------------------------------------------------------------------

namespace {

template <class F>
auto guarded(const char* feature, const std::string& channel, F&& fn) {
    try {
        return fn();
    } catch (const PreconditionError& e) {
        throw PreconditionError("feature '" + std::string(feature) + "' on channel " + channel + ": " + e.what());
    }
}

std::vector<double> channel_features_named(std::span<const double> w, double rate, const FeatureParams& p,
                                           const std::string& channel) {
    std::vector<double> out;
    const auto basic = guarded("stats_basic", channel, [&] { return stats_basic(w); });
    out.insert(out.end(), {basic.mean, basic.var, basic.skewness, basic.kurtosis, basic.min, basic.max, basic.median});
    const auto blocks = guarded("block stats", channel, [&] { return stats_blocks(w, p.n_blocks); });
    out.insert(out.end(), blocks.mean.begin(), blocks.mean.end());
    out.insert(out.end(), blocks.std.begin(), blocks.std.end());
    const auto fft = guarded("fft", channel, [&] { return fft_coeffs(w, p.n_fft); });
    out.insert(out.end(), fft.begin(), fft.end());
    const auto spec = guarded("spectral shape", channel, [&] { return spectral_shape(w, rate); });
    out.insert(out.end(), {spec.entropy, spec.centroid, spec.bandwidth, spec.magnitude_std});
    out.push_back(guarded("sh_entropy", channel, [&] { return shannon_entropy(w, p.hist_bins); }));
    out.push_back(guarded("p_entropy", channel, [&] { return permutation_entropy(w, p.perm_order, p.perm_delay); }));
    out.push_back(guarded("samp_entropy", channel, [&] { return sample_entropy(w, p.sampen_m, p.sampen_r); }));
    out.push_back(guarded("w_entropy", channel, [&] { return wavelet_entropy(w, p.wavelet_levels); }));
    const auto energy = guarded("energy", channel, [&] { return energy_features(w); });
    out.insert(out.end(), {energy.energy, energy.rms, energy.ptp});
    out.push_back(guarded("dfa", channel, [&] { return dfa_exponent(w, p.dfa_scales); }));
    const auto cov = guarded("cov", channel, [&] { return autocov(w, p.cov_lags); });
    out.insert(out.end(), cov.begin(), cov.end());
    for (double v : out) {
        if (!std::isfinite(v)) throw PreconditionError("non-finite feature on channel " + channel);
    }
    return out;
}

/// Position of each schema entry inside the full per-channel value list.
std::vector<std::size_t> entry_positions(const FeatureSchema& schema, const FeatureParams& params) {
    const auto full = FeatureSchema::build(params);
    std::vector<std::size_t> pos;
    for (const auto& e : schema.entries) {
        const auto it = std::find_if(full.entries.begin(), full.entries.end(), [&](const FeatureEntry& f) {
            return f.family == e.family && f.index == e.index;
        });
        if (it == full.entries.end()) throw PreconditionError("schema entry '" + e.base + "' not produced by extractors");
        pos.push_back(static_cast<std::size_t>(it - full.entries.begin()));
    }
    return pos;
}

const std::span<const double> channel_window(const ChannelWindows& w, const std::string& channel) {
    if (channel == kVoltageChannel) return w.voltage;
    if (channel == kCurrentChannel) return w.current;
    throw PreconditionError("unknown channel '" + channel + "'");
}

}  // namespace

std::vector<double> channel_features(std::span<const double> window, double rate_hz, const FeatureParams& params) {
    return channel_features_named(window, rate_hz, params, "?");
}

FeatureVector extract_single_scale(const Segment& segment, double size_s, const FeatureParams& params,
                                   const FeatureSchema& schema) {
    const WindowSpec spec{{size_s}};
    const auto windows = slice_windows(segment, spec);
    const auto& w = windows.at(size_s);
    const auto positions = entry_positions(schema, params);
    FeatureVector fv;
    fv.names = schema.names();
    fv.scale_s = size_s;
    fv.terminal_id = segment.terminal_id;
    fv.label = segment.label;
    fv.event_index = segment.event_index;
    for (const auto& ch : schema.channels) {
        const auto all = channel_features_named(channel_window(w, ch), segment.rate_hz, params, ch);
        for (std::size_t p : positions) fv.values.push_back(all[p]);
    }
    return fv;
}

std::string scale_suffix(double size_s) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "__w%g", size_s);
    return buf;
}

std::vector<std::string> multiscale_names(const FeatureSchema& schema, const WindowSpec& spec) {
    std::vector<std::string> out;
    const auto base = schema.names();
    for (double size : spec.sizes_s) {
        const auto suffix = scale_suffix(size);
        for (const auto& n : base) out.push_back(n + suffix);
    }
    return out;
}

FeatureVector extract_multiscale(const Segment& segment, const WindowSpec& spec, const FeatureParams& params,
                                 const FeatureSchema& schema) {
    spec.validate(segment.rate_hz);
    FeatureVector fv;
    fv.names = multiscale_names(schema, spec);
    fv.terminal_id = segment.terminal_id;
    fv.label = segment.label;
    fv.event_index = segment.event_index;
    for (double size : spec.sizes_s) {
        const auto single = extract_single_scale(segment, size, params, schema);
        fv.values.insert(fv.values.end(), single.values.begin(), single.values.end());
    }
    return fv;
}

FeatureMatrix extract_matrix(const std::vector<Segment>& segments, const WindowSpec& spec, const FeatureParams& params,
                             const FeatureSchema& schema, int threads) {
    std::vector<FeatureVector> rows(segments.size());
    parallel_for(segments.size(), threads,
                 [&](std::size_t i) { rows[i] = extract_multiscale(segments[i], spec, params, schema); });
    FeatureMatrix m(multiscale_names(schema, spec));
    for (std::size_t i = 0; i < rows.size(); ++i) {
        m.add_row(rows[i].values, static_cast<int>(segments[i].label.cls), segments[i].id());
    }
    return m;
}

}  // namespace gridsense
