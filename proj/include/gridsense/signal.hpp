#pragma once

#include <cstddef>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "json.hpp"

#include "gridsense/feature_matrix.hpp"
#include "gridsense/time.hpp"

namespace gridsense {

inline constexpr const char* kVoltageChannel = "VA_M";
inline constexpr const char* kCurrentChannel = "IA_M";
inline constexpr double kDefaultRateHz = 30.0;

/// Uniformly sampled magnitude series of one terminal. Sample i sits at
/// t0 + i / rate_hz.
struct PmuChannel {
    std::string terminal_id;
    std::string channel_name;
    double rate_hz = kDefaultRateHz;
    Timestamp t0{};
    std::vector<double> samples;

    Timestamp time_at(std::size_t i) const;
    /// Instant one sample past the last.
    Timestamp end_time() const { return time_at(samples.size()); }
    /// Nearest sample index for an instant (may be negative or past the end).
    long long index_of(Timestamp t) const;
};

using ChannelSet = std::vector<PmuChannel>;

struct DisturbanceLog {
    std::vector<Timestamp> events;

    /// Throws PreconditionError unless strictly increasing.
    void validate() const;
};

enum class SegmentOrigin { N50, N40, N30, N20, N10, Pre, Post };

std::string_view to_string(SegmentOrigin o);
SegmentOrigin parse_segment_origin(std::string_view name);
SegmentClass class_of(SegmentOrigin o);
/// N-origin for a "minutes before event" offset; nullopt for offsets outside {10..50}.
std::optional<SegmentOrigin> origin_for_offset(double minutes);

struct SegmentLabel {
    SegmentClass cls = SegmentClass::Nor;
    SegmentOrigin origin = SegmentOrigin::N50;
};

/// A labeled, channel-aligned slice of one terminal's data.
struct Segment {
    std::string terminal_id;
    SegmentLabel label;
    double rate_hz = kDefaultRateHz;
    std::vector<double> voltage;  // VA_M
    std::vector<double> current;  // IA_M
    Timestamp start{};
    Timestamp end{};
    std::size_t event_index = 0;
    /// Sample offset of the slice start within each source channel.
    std::size_t voltage_offset = 0;
    std::size_t current_offset = 0;

    std::size_t length() const { return voltage.size(); }
    /// Stable identifier "terminal/e<event>/<origin>".
    std::string id() const;
};

/// Trailing-aligned multi-scale window sizes in seconds.
struct WindowSpec {
    std::vector<double> sizes_s{30.0, 60.0, 180.0};

    /// Sizes must be ascending, unique, and give integral sample counts >= 64.
    void validate(double rate_hz) const;
    std::size_t samples_for(double size_s, double rate_hz) const;
    std::size_t max_samples(double rate_hz) const;
};

// --- ingestion -------------------------------------------------------------

struct CsvSchema {
    std::string timestamp = "timestamp";
    std::string terminal = "terminal";
    std::string channel = "channel";
    std::string value = "value";
    /// When unset the rate is estimated from the median sample spacing.
    std::optional<double> rate_hz;
};

struct SampleGap {
    std::string terminal_id;
    std::string channel_name;
    Timestamp after{};
    double seconds = 0.0;
};

struct IngestResult {
    ChannelSet channels;
    /// Spacings larger than 2 / rate_hz, reported but not repaired.
    std::vector<SampleGap> gaps;
};

IngestResult ingest_csv(const std::filesystem::path& path, const CsvSchema& schema = {});
IngestResult ingest_csv(std::istream& in, const CsvSchema& schema = {});

/// Disturbance log CSV with header `event_time`.
DisturbanceLog read_disturbance_log(const std::filesystem::path& path);
DisturbanceLog read_disturbance_log(std::istream& in);

void write_channels_csv(std::ostream& out, const ChannelSet& channels);
void write_disturbance_log(std::ostream& out, const DisturbanceLog& log);

// --- segmentation ----------------------------------------------------------

struct SegmentationOptions {
    double segment_s = 180.0;
    std::vector<double> offsets_min{50.0, 40.0, 30.0, 20.0, 10.0};
};

struct SegmentationResult {
    std::vector<Segment> segments;
    std::vector<std::string> warnings;
};

/// Per terminal and event: Nor segments ending at event - offset, a Pre
/// segment ending at the event and a Post segment starting at it. Segments not
/// fully covered by both channels are skipped with a warning.
SegmentationResult segment_by_events(const ChannelSet& channels, const DisturbanceLog& log,
                                     const SegmentationOptions& options = {});

/// Cuts a segment back out of the source channels (used when restoring
/// segments from a manifest).
Segment cut_segment(const PmuChannel& voltage, const PmuChannel& current, std::size_t voltage_offset,
                    std::size_t current_offset, std::size_t length, SegmentLabel label, std::size_t event_index);

struct DroppedSegment {
    Segment segment;
    std::string reason;
};

struct OutlierResult {
    std::vector<Segment> kept;
    std::vector<DroppedSegment> dropped;
};

/// Drops segments whose RMS on either channel reaches mean + k * std of that
/// channel's RMS across all segments (population statistics).
OutlierResult reject_outlier_segments(std::vector<Segment> segments, double k = 3.0);

/// JSON array of {terminal, start, reason}.
nlohmann::json dropped_report(const std::vector<DroppedSegment>& dropped);

// --- windows ----------------------------------------------------------------

struct ChannelWindows {
    std::span<const double> voltage;
    std::span<const double> current;
};

/// One trailing-aligned window per size; keys are the sizes in seconds.
std::map<double, ChannelWindows> slice_windows(const Segment& segment, const WindowSpec& spec);

// --- scaling ----------------------------------------------------------------

struct MinMaxParams {
    std::vector<double> min;
    std::vector<double> max;
};

/// Scales every column to (x - min) / (max - min) with min/max taken over
/// fit_rows only. Columns with range < 1e-12 map to 0.
std::pair<FeatureMatrix, MinMaxParams> minmax_scale_columns(const FeatureMatrix& matrix,
                                                            std::span<const std::size_t> fit_rows);
FeatureMatrix apply_minmax(const FeatureMatrix& matrix, const MinMaxParams& params);

}  // namespace gridsense
