#pragma once

#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "gridsense/common.hpp"
#include "gridsense/feature_matrix.hpp"
#include "gridsense/signal.hpp"

namespace testutil {

inline std::vector<double> gaussian(std::size_t n, std::uint64_t seed, double sigma = 1.0) {
    gridsense::Rng rng(seed);
    std::vector<double> x(n);
    for (auto& v : x) v = sigma * rng.normal();
    return x;
}

inline std::vector<double> uniform(std::size_t n, std::uint64_t seed) {
    gridsense::Rng rng(seed);
    std::vector<double> x(n);
    for (auto& v : x) v = rng.uniform();
    return x;
}

inline std::vector<double> cumsum(std::vector<double> x) {
    for (std::size_t i = 1; i < x.size(); ++i) x[i] += x[i - 1];
    return x;
}

inline gridsense::Segment make_segment(std::vector<double> voltage, std::vector<double> current, double rate = 30.0) {
    gridsense::Segment s;
    s.terminal_id = "T01";
    s.rate_hz = rate;
    s.voltage = std::move(voltage);
    s.current = std::move(current);
    return s;
}

/// Three Gaussian blobs in 2-D, `per_class` rows each, well separated.
inline gridsense::FeatureMatrix blobs(std::size_t per_class, std::uint64_t seed, double spread = 0.3) {
    gridsense::Rng rng(seed);
    gridsense::FeatureMatrix m({"x", "y"});
    const double cx[3] = {0.0, 4.0, 0.0};
    const double cy[3] = {0.0, 0.0, 4.0};
    for (int c = 0; c < 3; ++c) {
        for (std::size_t i = 0; i < per_class; ++i) {
            const double row[2] = {cx[c] + spread * rng.normal(), cy[c] + spread * rng.normal()};
            m.add_row(row, c, "r" + std::to_string(c) + "_" + std::to_string(i));
        }
    }
    return m;
}

/// `informative` columns carrying the class index plus noise, the rest pure
/// noise. Informative columns are named "inf<i>", the others "z<i>".
inline gridsense::FeatureMatrix planted(std::size_t per_class, std::size_t informative, std::size_t total,
                                        std::uint64_t seed, double noise = 0.3) {
    gridsense::Rng rng(seed);
    std::vector<std::string> names;
    for (std::size_t i = 0; i < total; ++i) {
        names.push_back(i < informative ? "inf" + std::to_string(i) : "z" + std::to_string(i));
    }
    gridsense::FeatureMatrix m(names);
    std::vector<double> row(total);
    for (int c = 0; c < 3; ++c) {
        for (std::size_t r = 0; r < per_class; ++r) {
            for (std::size_t i = 0; i < total; ++i) {
                row[i] = i < informative ? c + noise * rng.normal() : rng.normal();
            }
            m.add_row(row, c);
        }
    }
    return m;
}

inline bool close_rel(double a, double b, double rel, double abs_floor = 1e-12) {
    return std::abs(a - b) <= std::max(abs_floor, rel * std::max(std::abs(a), std::abs(b)));
}

}  // namespace testutil
