#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "json.hpp"

#include "gridsense/signal.hpp"

namespace gridsense {

/// Seeded PMU-like scenario. Signals are nominal * (1 + r(t)) where r is an
/// AR(1) wander plus white noise plus the event signatures below.
struct ScenarioConfig {
    int n_events = 30;
    int n_terminals = 1;
    double rate_hz = 30.0;
    double spacing_min = 60.0;  // between consecutive events
    double lead_min = 55.0;     // data before the first event
    double tail_min = 5.0;      // data after the last event
    std::string start = "2024-01-01T00:00:00Z";

    double nominal_voltage = 1.0;
    double nominal_current = 0.6;
    /// Signature multiplier on the current channel relative to voltage.
    double current_coupling = -1.5;

    double white_sigma = 0.0015;
    double ar_coeff = 0.999;
    double ar_sigma = 0.004;  // stationary std of the wander

    // Pre-event: linear drift over drift_s, plus white-noise std ramping from
    // 1 to sqrt(burst_gain) over the last burst_s seconds.
    double drift = -0.003;
    double drift_s = 180.0;
    double burst_gain = 16.0;
    double burst_s = 20.0;

    // Post-event: exponentially recovering sag and decaying oscillation.
    double sag_depth = 0.02;
    double recovery_tau_s = 30.0;
    double osc_freq_hz = 1.2;
    double osc_amp = 0.004;

    // Background variance bursts at random times (decaying shape).
    double nuisance_rate_per_hour = 40.0;
    double nuisance_gain = 20.0;
    double nuisance_decay_s = 8.0;

    // Which signatures are injected.
    bool pre_drift = true;
    bool pre_burst = true;
    bool post_sag = true;
    bool post_oscillation = true;
    bool nuisance = true;

    std::uint64_t seed = 0;

    /// Throws PreconditionError naming the offending field.
    void validate() const;
    nlohmann::json to_json() const;
    /// Every field optional except `seed`.
    static ScenarioConfig from_json(const nlohmann::json& j);
};

ScenarioConfig default_scenario();

struct TruthSegment {
    std::string terminal_id;
    std::size_t event_index = 0;
    SegmentOrigin origin = SegmentOrigin::N50;
    Timestamp start{};
    Timestamp end{};
};

struct Scenario {
    ChannelSet channels;  // per terminal: VA_M then IA_M
    DisturbanceLog log;
    std::vector<TruthSegment> truth;
};

nlohmann::json truth_to_json(const std::vector<TruthSegment>& truth);

/// `segment_s` and `offsets_min` describe the segment scheme used for truth.
Scenario generate(const ScenarioConfig& config, const SegmentationOptions& segmentation = {});

}  // namespace gridsense
