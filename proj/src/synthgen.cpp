#include "gridsense/synthgen.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "gridsense/common.hpp"

namespace gridsense {

using nlohmann::json;

namespace {

void require_field(bool ok, const std::string& field, const std::string& what) {
    if (!ok) throw PreconditionError("scenario." + field + " " + what);
}

}  // namespace

void ScenarioConfig::validate() const {
    require_field(n_events >= 1, "n_events", "must be >= 1");
    require_field(n_terminals >= 1, "n_terminals", "must be >= 1");
    require_field(rate_hz > 0.0 && std::isfinite(rate_hz), "rate_hz", "must be positive");
    require_field(spacing_min >= 60.0, "spacing_min", "must be >= 60 so every N50..N10 segment exists");
    require_field(lead_min > 0.0, "lead_min", "must be positive");
    require_field(tail_min > 0.0, "tail_min", "must be positive");
    require_field(parse_rfc3339(start).has_value(), "start", "is not an RFC 3339 timestamp");
    require_field(std::isfinite(nominal_voltage) && nominal_voltage > 0.0, "nominal_voltage", "must be positive");
    require_field(std::isfinite(nominal_current) && nominal_current > 0.0, "nominal_current", "must be positive");
    require_field(std::isfinite(current_coupling), "current_coupling", "must be finite");
    require_field(white_sigma >= 0.0, "white_sigma", "must be >= 0");
    require_field(ar_coeff >= 0.0 && ar_coeff < 1.0, "ar_coeff", "must be in [0, 1)");
    require_field(ar_sigma >= 0.0, "ar_sigma", "must be >= 0");
    require_field(std::isfinite(drift) && std::abs(drift) < 1.0, "drift", "must be finite and below 1 in magnitude");
    require_field(drift_s > 0.0, "drift_s", "must be positive");
    require_field(burst_gain >= 1.0 && burst_gain <= 1e4, "burst_gain", "must be in [1, 1e4]");
    require_field(burst_s > 0.0 && burst_s <= drift_s, "burst_s", "must be positive and <= drift_s");
    require_field(sag_depth >= 0.0 && sag_depth < 1.0, "sag_depth", "must be in [0, 1)");
    require_field(recovery_tau_s > 0.0, "recovery_tau_s", "must be positive");
    require_field(osc_freq_hz >= 0.0 && osc_freq_hz < rate_hz / 2.0, "osc_freq_hz", "must be below Nyquist");
    require_field(osc_amp >= 0.0 && osc_amp < 1.0, "osc_amp", "must be in [0, 1)");
    require_field(nuisance_rate_per_hour >= 0.0, "nuisance_rate_per_hour", "must be >= 0");
    require_field(nuisance_gain >= 1.0 && nuisance_gain <= 1e4, "nuisance_gain", "must be in [1, 1e4]");
    require_field(nuisance_decay_s > 0.0, "nuisance_decay_s", "must be positive");
    const double samples = (lead_min + (n_events - 1) * spacing_min + tail_min) * 60.0 * rate_hz;
    require_field(samples < 4e9, "n_events", "gives an unreasonably long recording");
}

json ScenarioConfig::to_json() const {
    return {{"n_events", n_events},
            {"n_terminals", n_terminals},
            {"rate_hz", rate_hz},
            {"spacing_min", spacing_min},
            {"lead_min", lead_min},
            {"tail_min", tail_min},
            {"start", start},
            {"nominal_voltage", nominal_voltage},
            {"nominal_current", nominal_current},
            {"current_coupling", current_coupling},
            {"white_sigma", white_sigma},
            {"ar_coeff", ar_coeff},
            {"ar_sigma", ar_sigma},
            {"drift", drift},
            {"drift_s", drift_s},
            {"burst_gain", burst_gain},
            {"burst_s", burst_s},
            {"sag_depth", sag_depth},
            {"recovery_tau_s", recovery_tau_s},
            {"osc_freq_hz", osc_freq_hz},
            {"osc_amp", osc_amp},
            {"nuisance_rate_per_hour", nuisance_rate_per_hour},
            {"nuisance_gain", nuisance_gain},
            {"nuisance_decay_s", nuisance_decay_s},
            {"pre_drift", pre_drift},
            {"pre_burst", pre_burst},
            {"post_sag", post_sag},
            {"post_oscillation", post_oscillation},
            {"nuisance", nuisance},
            {"seed", seed}};
}

ScenarioConfig ScenarioConfig::from_json(const json& j) {
    if (!j.is_object()) throw PreconditionError("scenario must be a JSON object");
    if (!j.contains("seed")) throw PreconditionError("scenario.seed is mandatory");
    ScenarioConfig c = default_scenario();
    auto get = [&](const char* key, auto& field) {
        if (!j.contains(key)) return;
        try {
            j.at(key).get_to(field);
        } catch (const json::exception&) {
            throw PreconditionError(std::string("scenario.") + key + " has the wrong type");
        }
    };
    get("n_events", c.n_events);
    get("n_terminals", c.n_terminals);
    get("rate_hz", c.rate_hz);
    get("spacing_min", c.spacing_min);
    get("lead_min", c.lead_min);
    get("tail_min", c.tail_min);
    get("start", c.start);
    get("nominal_voltage", c.nominal_voltage);
    get("nominal_current", c.nominal_current);
    get("current_coupling", c.current_coupling);
    get("white_sigma", c.white_sigma);
    get("ar_coeff", c.ar_coeff);
    get("ar_sigma", c.ar_sigma);
    get("drift", c.drift);
    get("drift_s", c.drift_s);
    get("burst_gain", c.burst_gain);
    get("burst_s", c.burst_s);
    get("sag_depth", c.sag_depth);
    get("recovery_tau_s", c.recovery_tau_s);
    get("osc_freq_hz", c.osc_freq_hz);
    get("osc_amp", c.osc_amp);
    get("nuisance_rate_per_hour", c.nuisance_rate_per_hour);
    get("nuisance_gain", c.nuisance_gain);
    get("nuisance_decay_s", c.nuisance_decay_s);
    get("pre_drift", c.pre_drift);
    get("pre_burst", c.pre_burst);
    get("post_sag", c.post_sag);
    get("post_oscillation", c.post_oscillation);
    get("nuisance", c.nuisance);
    get("seed", c.seed);
    return c;
}

ScenarioConfig default_scenario() { return ScenarioConfig{}; }

json truth_to_json(const std::vector<TruthSegment>& truth) {
    json out = json::array();
    for (const auto& t : truth) {
        out.push_back({{"terminal", t.terminal_id},
                       {"event_index", t.event_index},
                       {"origin", std::string(to_string(t.origin))},
                       {"label", std::string(to_string(class_of(t.origin)))},
                       {"start", format_rfc3339(t.start)},
                       {"end", format_rfc3339(t.end)}});
    }
    return out;
}

namespace {

std::string terminal_name(int i) {
    char buf[16];
    std::snprintf(buf, sizeof buf, "T%02d", i + 1);
    return buf;
}

}  // namespace

Scenario generate(const ScenarioConfig& config, const SegmentationOptions& segmentation) {
    config.validate();
    const double rate = config.rate_hz;
    const double total_s = (config.lead_min + (config.n_events - 1) * config.spacing_min + config.tail_min) * 60.0;
    const auto n = static_cast<std::size_t>(std::llround(total_s * rate));
    const Timestamp t0 = *parse_rfc3339(config.start);

    Scenario sc;
    std::vector<double> event_s;
    for (int e = 0; e < config.n_events; ++e) {
        event_s.push_back((config.lead_min + e * config.spacing_min) * 60.0);
        sc.log.events.push_back(add_seconds(t0, event_s.back()));
    }

    // Deterministic signature shared by every terminal: relative offset and
    // white-noise std multiplier per sample.
    std::vector<double> signature(n, 0.0);
    std::vector<double> burst(n, 1.0);
    for (double ev : event_s) {
        const auto idx = [&](double s) {
            return static_cast<std::size_t>(std::clamp<double>(std::llround(s * rate), 0.0, static_cast<double>(n)));
        };
        const std::size_t drift_begin = idx(ev - config.drift_s);
        const std::size_t burst_begin = idx(ev - config.burst_s);
        const std::size_t event_idx = idx(ev);
        for (std::size_t i = drift_begin; i < event_idx; ++i) {
            const double t = static_cast<double>(i) / rate - (ev - config.drift_s);
            if (config.pre_drift) signature[i] += config.drift * t / config.drift_s;
        }
        if (config.pre_burst) {
            const double peak = std::sqrt(config.burst_gain);
            for (std::size_t i = burst_begin; i < event_idx; ++i) {
                const double u = (static_cast<double>(i) / rate - (ev - config.burst_s)) / config.burst_s;
                burst[i] = std::max(burst[i], 1.0 + (peak - 1.0) * u);
            }
        }
        const std::size_t post_end = idx(ev + 12.0 * config.recovery_tau_s);
        for (std::size_t i = event_idx; i < post_end; ++i) {
            const double t = static_cast<double>(i) / rate - ev;
            const double decay = std::exp(-t / config.recovery_tau_s);
            if (config.post_sag) signature[i] -= config.sag_depth * decay;
            if (config.post_oscillation) {
                signature[i] += config.osc_amp * decay * std::sin(2.0 * std::numbers::pi * config.osc_freq_hz * t);
            }
        }
    }

    for (int term = 0; term < config.n_terminals; ++term) {
        const std::string id = terminal_name(term);
        std::vector<double> mult = burst;
        if (config.nuisance && config.nuisance_rate_per_hour > 0.0) {
            Rng rng(mix_seed(config.seed, 0x6E75697300ULL + static_cast<std::uint64_t>(term)));
            const double mean_gap = 3600.0 / config.nuisance_rate_per_hour;
            const double peak = std::sqrt(config.nuisance_gain);
            double t = -mean_gap * std::log(1.0 - rng.uniform());
            while (t < total_s) {
                const auto begin = static_cast<std::size_t>(t * rate);
                const auto end = std::min(n, begin + static_cast<std::size_t>(8.0 * config.nuisance_decay_s * rate));
                for (std::size_t i = begin; i < end; ++i) {
                    const double dt = static_cast<double>(i) / rate - t;
                    mult[i] = std::max(mult[i], 1.0 + (peak - 1.0) * std::exp(-std::max(0.0, dt) / config.nuisance_decay_s));
                }
                t += -mean_gap * std::log(1.0 - rng.uniform());
            }
        }
        for (int ch = 0; ch < 2; ++ch) {
            Rng rng(mix_seed(config.seed, static_cast<std::uint64_t>(term) * 2 + static_cast<std::uint64_t>(ch)));
            const bool voltage = ch == 0;
            const double nominal = voltage ? config.nominal_voltage : config.nominal_current;
            const double coupling = voltage ? 1.0 : config.current_coupling;
            const double innovation = config.ar_sigma * std::sqrt(1.0 - config.ar_coeff * config.ar_coeff);
            PmuChannel pc;
            pc.terminal_id = id;
            pc.channel_name = voltage ? kVoltageChannel : kCurrentChannel;
            pc.rate_hz = rate;
            pc.t0 = t0;
            pc.samples.resize(n);
            double ar = config.ar_sigma * rng.normal();
            for (std::size_t i = 0; i < n; ++i) {
                ar = config.ar_coeff * ar + innovation * rng.normal();
                const double white = config.white_sigma * mult[i] * rng.normal();
                pc.samples[i] = nominal * (1.0 + ar + white + coupling * signature[i]);
            }
            sc.channels.push_back(std::move(pc));
        }

        for (std::size_t e = 0; e < event_s.size(); ++e) {
            const Timestamp ev = sc.log.events[e];
            for (double off : segmentation.offsets_min) {
                const auto origin = origin_for_offset(off);
                if (!origin) throw PreconditionError("normal-segment offset must be one of 10,20,30,40,50 minutes");
                const Timestamp end = add_seconds(ev, -60.0 * off);
                const Timestamp begin = add_seconds(end, -segmentation.segment_s);
                if (begin < t0) continue;
                sc.truth.push_back({id, e, *origin, begin, end});
            }
            if (add_seconds(ev, -segmentation.segment_s) >= t0) {
                sc.truth.push_back({id, e, SegmentOrigin::Pre, add_seconds(ev, -segmentation.segment_s), ev});
            }
            const Timestamp post_end = add_seconds(ev, segmentation.segment_s);
            if (seconds_between(t0, post_end) <= total_s) {
                sc.truth.push_back({id, e, SegmentOrigin::Post, ev, post_end});
            }
        }
    }
    return sc;
}

}  // namespace gridsense
