#include "gridsense/signal.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>

#include "gridsense/common.hpp"

namespace gridsense {

// --- basic types --------------------------------------------------------------

Timestamp PmuChannel::time_at(std::size_t i) const {
    return t0 + Microseconds(std::llround(static_cast<double>(i) * 1e6 / rate_hz));
}

long long PmuChannel::index_of(Timestamp t) const {
    return std::llround(static_cast<double>((t - t0).count()) * rate_hz / 1e6);
}

void DisturbanceLog::validate() const {
    for (std::size_t i = 1; i < events.size(); ++i) {
        if (events[i] <= events[i - 1]) {
            throw PreconditionError("disturbance log is not strictly increasing at entry " + std::to_string(i));
        }
    }
}

std::string_view to_string(SegmentOrigin o) {
    switch (o) {
        case SegmentOrigin::N50: return "N50";
        case SegmentOrigin::N40: return "N40";
        case SegmentOrigin::N30: return "N30";
        case SegmentOrigin::N20: return "N20";
        case SegmentOrigin::N10: return "N10";
        case SegmentOrigin::Pre: return "PRE";
        case SegmentOrigin::Post: return "POST";
    }
    return "?";
}

SegmentOrigin parse_segment_origin(std::string_view name) {
    for (auto o : {SegmentOrigin::N50, SegmentOrigin::N40, SegmentOrigin::N30, SegmentOrigin::N20, SegmentOrigin::N10,
                   SegmentOrigin::Pre, SegmentOrigin::Post}) {
        if (to_string(o) == name) return o;
    }
    throw PreconditionError("unknown segment origin '" + std::string(name) + "'");
}

SegmentClass class_of(SegmentOrigin o) {
    switch (o) {
        case SegmentOrigin::Pre: return SegmentClass::Pre;
        case SegmentOrigin::Post: return SegmentClass::Post;
        default: return SegmentClass::Nor;
    }
}

std::optional<SegmentOrigin> origin_for_offset(double minutes) {
    if (minutes == 50.0) return SegmentOrigin::N50;
    if (minutes == 40.0) return SegmentOrigin::N40;
    if (minutes == 30.0) return SegmentOrigin::N30;
    if (minutes == 20.0) return SegmentOrigin::N20;
    if (minutes == 10.0) return SegmentOrigin::N10;
    return std::nullopt;
}

std::string Segment::id() const {
    return terminal_id + "/e" + std::to_string(event_index) + "/" + std::string(to_string(label.origin));
}

void WindowSpec::validate(double rate_hz) const {
    if (!(rate_hz > 0.0)) throw PreconditionError("rate_hz must be positive");
    if (sizes_s.empty()) throw PreconditionError("window spec has no sizes");
    for (std::size_t i = 0; i < sizes_s.size(); ++i) {
        const double s = sizes_s[i];
        if (!(s > 0.0)) throw PreconditionError("window sizes must be positive");
        if (i > 0 && !(s > sizes_s[i - 1])) throw PreconditionError("window sizes must be ascending and unique");
        const double n = s * rate_hz;
        if (std::abs(n - std::round(n)) > 1e-9 * std::max(1.0, n)) {
            throw PreconditionError("window size " + std::to_string(s) + " s is not a whole number of samples");
        }
        if (std::round(n) < 64.0) {
            throw PreconditionError("window size " + std::to_string(s) + " s gives fewer than 64 samples");
        }
    }
}

std::size_t WindowSpec::samples_for(double size_s, double rate_hz) const {
    return static_cast<std::size_t>(std::llround(size_s * rate_hz));
}

std::size_t WindowSpec::max_samples(double rate_hz) const {
    return sizes_s.empty() ? 0 : samples_for(sizes_s.back(), rate_hz);
}

// --- ingestion ----------------------------------------------------------------

namespace {

std::vector<std::string_view> split_fields(std::string_view line) {
    std::vector<std::string_view> out;
    std::size_t start = 0;
    for (;;) {
        const std::size_t comma = line.find(',', start);
        if (comma == std::string_view::npos) {
            out.push_back(line.substr(start));
            return out;
        }
        out.push_back(line.substr(start, comma - start));
        start = comma + 1;
    }
}

std::string_view trim(std::string_view s) {
    while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
    while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
    return s;
}

struct ChannelBuilder {
    std::string terminal;
    std::string channel;
    std::vector<Timestamp> times;
    std::vector<double> values;
};

double estimate_rate(const std::vector<Timestamp>& times) {
    if (times.size() < 2) return kDefaultRateHz;
    std::vector<long long> dt;
    dt.reserve(times.size() - 1);
    for (std::size_t i = 1; i < times.size(); ++i) dt.push_back((times[i] - times[i - 1]).count());
    const auto mid = dt.begin() + static_cast<std::ptrdiff_t>(dt.size() / 2);
    std::nth_element(dt.begin(), mid, dt.end());
    const double rate = 1e6 / static_cast<double>(*mid);
    return std::round(rate * 1000.0) / 1000.0;
}

}  // namespace

IngestResult ingest_csv(const std::filesystem::path& path, const CsvSchema& schema) {
    std::ifstream in(path);
    if (!in) throw IngestError("cannot open " + path.string());
    return ingest_csv(in, schema);
}

IngestResult ingest_csv(std::istream& in, const CsvSchema& schema) {
    std::string line;
    if (!std::getline(in, line)) throw SchemaError("input CSV is empty");
    const auto header = split_fields(line);
    auto find_column = [&](const std::string& name) -> std::size_t {
        for (std::size_t i = 0; i < header.size(); ++i) {
            if (trim(header[i]) == name) return i;
        }
        throw SchemaError("missing column \"" + name + "\"");
    };
    const std::size_t c_time = find_column(schema.timestamp);
    const std::size_t c_term = find_column(schema.terminal);
    const std::size_t c_chan = find_column(schema.channel);
    const std::size_t c_val = find_column(schema.value);
    const std::size_t needed = std::max({c_time, c_term, c_chan, c_val}) + 1;

    std::map<std::pair<std::string, std::string>, ChannelBuilder> builders;
    ChannelBuilder* last = nullptr;
    std::size_t row = 0;
    while (std::getline(in, line)) {
        ++row;
        const std::string_view view = trim(line);
        if (view.empty()) continue;
        const auto fields = split_fields(view);
        const std::string where = "row " + std::to_string(row);
        if (fields.size() < needed) throw IngestError(where + ": expected at least " + std::to_string(needed) + " fields");
        const auto ts = parse_rfc3339(trim(fields[c_time]));
        if (!ts) throw IngestError(where + ": malformed timestamp '" + std::string(fields[c_time]) + "'");
        const auto vtext = trim(fields[c_val]);
        double value = 0.0;
        auto [p, ec] = std::from_chars(vtext.data(), vtext.data() + vtext.size(), value);
        if (ec != std::errc{} || p != vtext.data() + vtext.size()) {
            throw IngestError(where + ": malformed value '" + std::string(vtext) + "'");
        }
        if (!std::isfinite(value)) throw IngestError(where + ": non-finite value");
        const auto term = trim(fields[c_term]);
        const auto chan = trim(fields[c_chan]);
        if (last == nullptr || last->terminal != term || last->channel != chan) {
            auto key = std::make_pair(std::string(term), std::string(chan));
            auto [it, inserted] = builders.try_emplace(key);
            if (inserted) {
                it->second.terminal = key.first;
                it->second.channel = key.second;
            }
            last = &it->second;
        }
        if (!last->times.empty() && *ts <= last->times.back()) {
            throw IngestError(where + ": non-monotonic timestamp for " + last->terminal + "/" + last->channel);
        }
        last->times.push_back(*ts);
        last->values.push_back(value);
    }

    IngestResult result;
    for (auto& [key, b] : builders) {
        PmuChannel ch;
        ch.terminal_id = b.terminal;
        ch.channel_name = b.channel;
        ch.rate_hz = schema.rate_hz.value_or(estimate_rate(b.times));
        if (!(ch.rate_hz > 0.0)) throw IngestError("non-positive sample rate for " + b.terminal + "/" + b.channel);
        ch.t0 = b.times.front();
        const double max_gap_s = 2.0 / ch.rate_hz;
        for (std::size_t i = 1; i < b.times.size(); ++i) {
            const double dt = seconds_between(b.times[i - 1], b.times[i]);
            if (dt > max_gap_s) result.gaps.push_back({b.terminal, b.channel, b.times[i - 1], dt});
        }
        ch.samples = std::move(b.values);
        result.channels.push_back(std::move(ch));
    }
    return result;
}

DisturbanceLog read_disturbance_log(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw IngestError("cannot open " + path.string());
    return read_disturbance_log(in);
}

DisturbanceLog read_disturbance_log(std::istream& in) {
    std::string line;
    if (!std::getline(in, line)) throw SchemaError("disturbance log is empty");
    const auto header = split_fields(line);
    std::size_t column = header.size();
    for (std::size_t i = 0; i < header.size(); ++i) {
        if (trim(header[i]) == "event_time") column = i;
    }
    if (column == header.size()) throw SchemaError("missing column \"event_time\"");
    DisturbanceLog log;
    std::size_t row = 0;
    while (std::getline(in, line)) {
        ++row;
        const auto view = trim(line);
        if (view.empty()) continue;
        const auto fields = split_fields(view);
        if (fields.size() <= column) throw IngestError("log row " + std::to_string(row) + ": missing event_time");
        const auto ts = parse_rfc3339(trim(fields[column]));
        if (!ts) throw IngestError("log row " + std::to_string(row) + ": malformed timestamp");
        log.events.push_back(*ts);
    }
    try {
        log.validate();
    } catch (const PreconditionError& e) {
        throw IngestError(e.what());
    }
    return log;
}

void write_channels_csv(std::ostream& out, const ChannelSet& channels) {
    out << "timestamp,terminal,channel,value\n";
    char value[32];
    std::string buffer;
    for (const auto& ch : channels) {
        for (std::size_t i = 0; i < ch.samples.size(); ++i) {
            std::snprintf(value, sizeof value, "%.12g", ch.samples[i]);
            buffer.clear();
            buffer += format_rfc3339(ch.time_at(i));
            buffer += ',';
            buffer += ch.terminal_id;
            buffer += ',';
            buffer += ch.channel_name;
            buffer += ',';
            buffer += value;
            buffer += '\n';
            out << buffer;
        }
    }
}

void write_disturbance_log(std::ostream& out, const DisturbanceLog& log) {
    out << "event_time\n";
    for (const auto& e : log.events) out << format_rfc3339(e) << '\n';
}

// --- segmentation -----------------------------------------------------------------

Segment cut_segment(const PmuChannel& voltage, const PmuChannel& current, std::size_t voltage_offset,
                    std::size_t current_offset, std::size_t length, SegmentLabel label, std::size_t event_index) {
    if (voltage_offset + length > voltage.samples.size() || current_offset + length > current.samples.size()) {
        throw PreconditionError("segment exceeds channel coverage");
    }
    Segment s;
    s.terminal_id = voltage.terminal_id;
    s.label = label;
    s.rate_hz = voltage.rate_hz;
    const auto vbegin = voltage.samples.begin() + static_cast<std::ptrdiff_t>(voltage_offset);
    const auto cbegin = current.samples.begin() + static_cast<std::ptrdiff_t>(current_offset);
    s.voltage.assign(vbegin, vbegin + static_cast<std::ptrdiff_t>(length));
    s.current.assign(cbegin, cbegin + static_cast<std::ptrdiff_t>(length));
    s.start = voltage.time_at(voltage_offset);
    s.end = add_seconds(s.start, static_cast<double>(length) / voltage.rate_hz);
    s.event_index = event_index;
    s.voltage_offset = voltage_offset;
    s.current_offset = current_offset;
    return s;
}

SegmentationResult segment_by_events(const ChannelSet& channels, const DisturbanceLog& log,
                                     const SegmentationOptions& options) {
    if (log.events.empty()) throw PreconditionError("disturbance log is empty");
    log.validate();
    if (!(options.segment_s > 0.0)) throw PreconditionError("segment length must be positive");
    std::vector<SegmentOrigin> normal_origins;
    for (double off : options.offsets_min) {
        const auto o = origin_for_offset(off);
        if (!o) throw PreconditionError("normal-segment offset must be one of 10,20,30,40,50 minutes");
        normal_origins.push_back(*o);
    }

    std::map<std::string, std::pair<const PmuChannel*, const PmuChannel*>> terminals;
    for (const auto& ch : channels) {
        auto& slot = terminals[ch.terminal_id];
        if (ch.channel_name == kVoltageChannel) slot.first = &ch;
        if (ch.channel_name == kCurrentChannel) slot.second = &ch;
    }

    SegmentationResult result;
    for (const auto& [terminal, pair] : terminals) {
        const auto* va = pair.first;
        const auto* ia = pair.second;
        if (va == nullptr || ia == nullptr) {
            result.warnings.push_back("terminal " + terminal + " lacks " + (va ? kCurrentChannel : kVoltageChannel) +
                                      "; skipped");
            continue;
        }
        if (va->rate_hz != ia->rate_hz) {
            result.warnings.push_back("terminal " + terminal + " has mismatched channel rates; skipped");
            continue;
        }
        const double len_f = options.segment_s * va->rate_hz;
        if (std::abs(len_f - std::round(len_f)) > 1e-9 * std::max(1.0, len_f)) {
            throw PreconditionError("segment length is not a whole number of samples");
        }
        const auto length = static_cast<long long>(std::llround(len_f));

        for (std::size_t e = 0; e < log.events.size(); ++e) {
            const Timestamp event = log.events[e];
            auto emit = [&](SegmentOrigin origin, Timestamp anchor, bool anchor_is_end) {
                long long v0 = va->index_of(anchor);
                long long c0 = ia->index_of(anchor);
                if (anchor_is_end) {
                    v0 -= length;
                    c0 -= length;
                }
                const bool covered = v0 >= 0 && c0 >= 0 && v0 + length <= static_cast<long long>(va->samples.size()) &&
                                     c0 + length <= static_cast<long long>(ia->samples.size());
                if (!covered) {
                    result.warnings.push_back("terminal " + terminal + " event " + std::to_string(e) + " " +
                                              std::string(to_string(origin)) + ": span not covered by data; skipped");
                    return;
                }
                result.segments.push_back(cut_segment(*va, *ia, static_cast<std::size_t>(v0),
                                                      static_cast<std::size_t>(c0), static_cast<std::size_t>(length),
                                                      {class_of(origin), origin}, e));
            };
            for (std::size_t i = 0; i < normal_origins.size(); ++i) {
                emit(normal_origins[i], add_seconds(event, -60.0 * options.offsets_min[i]), true);
            }
            emit(SegmentOrigin::Pre, event, true);
            emit(SegmentOrigin::Post, event, false);
        }
    }
    return result;
}

// --- outliers -----------------------------------------------------------------------

namespace {

double rms(const std::vector<double>& x) {
    if (x.empty()) return 0.0;
    double s = 0.0;
    for (double v : x) s += v * v;
    return std::sqrt(s / static_cast<double>(x.size()));
}

}  // namespace

OutlierResult reject_outlier_segments(std::vector<Segment> segments, double k) {
    if (segments.size() < 2) throw PreconditionError("outlier rejection needs at least 2 segments");
    if (!(k > 0.0)) throw PreconditionError("outlier threshold k must be positive");
    const std::size_t n = segments.size();
    std::vector<std::string> reasons(n);

    auto check_channel = [&](const char* name, auto&& samples_of) {
        std::vector<double> values(n);
        for (std::size_t i = 0; i < n; ++i) values[i] = rms(samples_of(segments[i]));
        double mean = 0.0;
        for (double v : values) mean += v;
        mean /= static_cast<double>(n);
        double var = 0.0;
        for (double v : values) var += (v - mean) * (v - mean);
        const double sd = std::sqrt(var / static_cast<double>(n));
        if (!(sd > 0.0)) return;
        const double threshold = mean + k * sd;
        for (std::size_t i = 0; i < n; ++i) {
            if (values[i] - mean >= k * sd * (1.0 - 1e-9) && reasons[i].empty()) {
                char buf[160];
                std::snprintf(buf, sizeof buf, "%s rms %.6g >= mean + %.3g sd (%.6g)", name, values[i], k, threshold);
                reasons[i] = buf;
            }
        }
    };
    check_channel(kVoltageChannel, [](const Segment& s) -> const std::vector<double>& { return s.voltage; });
    check_channel(kCurrentChannel, [](const Segment& s) -> const std::vector<double>& { return s.current; });

    OutlierResult out;
    for (std::size_t i = 0; i < n; ++i) {
        if (reasons[i].empty()) {
            out.kept.push_back(std::move(segments[i]));
        } else {
            out.dropped.push_back({std::move(segments[i]), std::move(reasons[i])});
        }
    }
    return out;
}

nlohmann::json dropped_report(const std::vector<DroppedSegment>& dropped) {
    nlohmann::json arr = nlohmann::json::array();
    for (const auto& d : dropped) {
        arr.push_back({{"terminal", d.segment.terminal_id},
                       {"start", format_rfc3339(d.segment.start)},
                       {"reason", d.reason}});
    }
    return arr;
}

// --- windows ---------------------------------------------------------------------------

std::map<double, ChannelWindows> slice_windows(const Segment& segment, const WindowSpec& spec) {
    spec.validate(segment.rate_hz);
    const std::size_t needed = spec.max_samples(segment.rate_hz);
    if (segment.voltage.size() != segment.current.size()) {
        throw PreconditionError("segment channels differ in length");
    }
    if (segment.length() < needed) {
        throw PreconditionError("segment has " + std::to_string(segment.length()) + " samples but the largest window needs " +
                                std::to_string(needed) + " (deficit " + std::to_string(needed - segment.length()) + ")");
    }
    std::map<double, ChannelWindows> out;
    const std::span<const double> v(segment.voltage);
    const std::span<const double> c(segment.current);
    for (double size : spec.sizes_s) {
        const std::size_t n = spec.samples_for(size, segment.rate_hz);
        out[size] = {v.last(n), c.last(n)};
    }
    return out;
}

// --- scaling ------------------------------------------------------------------------------

std::pair<FeatureMatrix, MinMaxParams> minmax_scale_columns(const FeatureMatrix& matrix,
                                                            std::span<const std::size_t> fit_rows) {
    if (matrix.rows() == 0 || matrix.cols() == 0) throw PreconditionError("min-max scaling of an empty matrix");
    if (fit_rows.empty()) throw PreconditionError("min-max scaling needs at least one fit row");
    matrix.require_finite();
    MinMaxParams params;
    params.min.assign(matrix.cols(), 0.0);
    params.max.assign(matrix.cols(), 0.0);
    for (std::size_t c = 0; c < matrix.cols(); ++c) {
        double lo = matrix.at(fit_rows[0], c);
        double hi = lo;
        for (std::size_t r : fit_rows) {
            if (r >= matrix.rows()) throw PreconditionError("fit row index out of range");
            lo = std::min(lo, matrix.at(r, c));
            hi = std::max(hi, matrix.at(r, c));
        }
        params.min[c] = lo;
        params.max[c] = hi;
    }
    return {apply_minmax(matrix, params), params};
}

FeatureMatrix apply_minmax(const FeatureMatrix& matrix, const MinMaxParams& params) {
    if (params.min.size() != matrix.cols() || params.max.size() != matrix.cols()) {
        throw PreconditionError("min-max parameters do not match column count");
    }
    FeatureMatrix out = matrix;
    for (std::size_t r = 0; r < out.rows(); ++r) {
        for (std::size_t c = 0; c < out.cols(); ++c) {
            const double range = params.max[c] - params.min[c];
            out.at(r, c) = range < 1e-12 ? 0.0 : (out.at(r, c) - params.min[c]) / range;
        }
    }
    return out;
}

}  // namespace gridsense
