#include <gtest/gtest.h>

#include <cmath>
#include <set>
#include <sstream>

#include "gridsense/signal.hpp"
#include "test_util.hpp"

using namespace gridsense;

namespace {

Timestamp at(const char* text) { return *parse_rfc3339(text); }

PmuChannel channel(const std::string& name, Timestamp t0, std::size_t n, double rate = 30.0, double value = 1.0) {
    PmuChannel c;
    c.terminal_id = "T01";
    c.channel_name = name;
    c.rate_hz = rate;
    c.t0 = t0;
    c.samples.assign(n, value);
    for (std::size_t i = 0; i < n; ++i) c.samples[i] += 1e-3 * static_cast<double>(i % 7);
    return c;
}

ChannelSet covered(Timestamp t0, double seconds, double rate = 30.0) {
    const auto n = static_cast<std::size_t>(std::llround(seconds * rate));
    return {channel(kVoltageChannel, t0, n, rate), channel(kCurrentChannel, t0, n, rate, 0.5)};
}

Segment constant_segment(double value, std::size_t n = 64) {
    return testutil::make_segment(std::vector<double>(n, value), std::vector<double>(n, value));
}

}  // namespace

TEST(Time, RoundTrip) {
    const auto t = parse_rfc3339("2020-07-10T14:03:00.033333Z");
    ASSERT_TRUE(t);
    EXPECT_EQ(format_rfc3339(*t), "2020-07-10T14:03:00.033333Z");
    EXPECT_EQ(*parse_rfc3339("2020-07-10 16:03:00+02:00"), *parse_rfc3339("2020-07-10T14:03:00Z"));
    EXPECT_FALSE(parse_rfc3339("2020-13-10T14:03:00Z"));
    EXPECT_FALSE(parse_rfc3339("yesterday"));
}

TEST(Ingest, TwoRowFile) {
    std::istringstream in(
        "timestamp,terminal,channel,value\n"
        "2024-01-01T00:00:00Z,T01,VA_M,1.0\n"
        "2024-01-01T00:00:00.033333Z,T01,VA_M,1.1\n");
    const auto r = ingest_csv(in);
    ASSERT_EQ(r.channels.size(), 1u);
    EXPECT_EQ(r.channels[0].samples, (std::vector<double>{1.0, 1.1}));
    EXPECT_EQ(r.channels[0].terminal_id, "T01");
    EXPECT_EQ(r.channels[0].channel_name, "VA_M");
}

TEST(Ingest, MissingTimestampColumn) {
    std::istringstream in("terminal,channel,value\nT01,VA_M,1.0\n");
    try {
        ingest_csv(in);
        FAIL();
    } catch (const SchemaError& e) {
        EXPECT_NE(std::string(e.what()).find("timestamp"), std::string::npos);
    }
}

TEST(Ingest, ThirtyHertzRateAndLength) {
    std::ostringstream out;
    ChannelSet cs{channel(kVoltageChannel, at("2024-01-01T00:00:00Z"), 900)};
    write_channels_csv(out, cs);
    std::istringstream in(out.str());
    const auto r = ingest_csv(in);
    ASSERT_EQ(r.channels.size(), 1u);
    EXPECT_DOUBLE_EQ(r.channels[0].rate_hz, 30.0);
    EXPECT_EQ(r.channels[0].samples.size(), 900u);
    EXPECT_EQ(r.channels[0].samples, cs[0].samples);
    EXPECT_TRUE(r.gaps.empty());
}

TEST(Ingest, Errors) {
    std::istringstream nonmono(
        "timestamp,terminal,channel,value\n"
        "2024-01-01T00:00:01Z,T01,VA_M,1.0\n"
        "2024-01-01T00:00:00Z,T01,VA_M,1.0\n");
    EXPECT_THROW(ingest_csv(nonmono), IngestError);

    std::istringstream nan(
        "timestamp,terminal,channel,value\n"
        "2024-01-01T00:00:00Z,T01,VA_M,1.0\n"
        "2024-01-01T00:00:01Z,T01,VA_M,nan\n");
    try {
        ingest_csv(nan);
        FAIL();
    } catch (const IngestError& e) {
        EXPECT_NE(std::string(e.what()).find("row 2"), std::string::npos) << e.what();
    }
}

TEST(Ingest, ReportsGaps) {
    std::istringstream in(
        "timestamp,terminal,channel,value\n"
        "2024-01-01T00:00:00Z,T01,VA_M,1\n"
        "2024-01-01T00:00:01Z,T01,VA_M,1\n"
        "2024-01-01T00:00:02Z,T01,VA_M,1\n"
        "2024-01-01T00:00:03Z,T01,VA_M,1\n"
        "2024-01-01T00:00:09Z,T01,VA_M,1\n");
    const auto r = ingest_csv(in);
    ASSERT_EQ(r.gaps.size(), 1u);
    EXPECT_DOUBLE_EQ(r.gaps[0].seconds, 6.0);
}

TEST(DisturbanceLogCsv, RoundTripAndValidation) {
    DisturbanceLog log{{at("2024-01-01T01:00:00Z"), at("2024-01-01T02:00:00Z")}};
    std::ostringstream out;
    write_disturbance_log(out, log);
    std::istringstream in(out.str());
    EXPECT_EQ(read_disturbance_log(in).events, log.events);
    std::istringstream bad("event_time\n2024-01-01T02:00:00Z\n2024-01-01T01:00:00Z\n");
    EXPECT_THROW(read_disturbance_log(bad), IngestError);
    std::istringstream wrong("time\n2024-01-01T02:00:00Z\n");
    EXPECT_THROW(read_disturbance_log(wrong), SchemaError);
}

TEST(Segmentation, OneFullyCoveredEvent) {
    const auto t0 = at("2024-01-01T00:00:00Z");
    const auto channels = covered(t0, 60 * 60, 5.0);
    const DisturbanceLog log{{add_seconds(t0, 55 * 60)}};
    const auto r = segment_by_events(channels, log);
    ASSERT_EQ(r.segments.size(), 7u);
    std::map<SegmentClass, int> counts;
    for (const auto& s : r.segments) {
        ++counts[s.label.cls];
        EXPECT_EQ(s.length(), 900u);
        EXPECT_EQ(s.voltage.size(), s.current.size());
        EXPECT_EQ(class_of(s.label.origin), s.label.cls);
    }
    EXPECT_EQ(counts[SegmentClass::Nor], 5);
    EXPECT_EQ(counts[SegmentClass::Pre], 1);
    EXPECT_EQ(counts[SegmentClass::Post], 1);
    for (const auto& s : r.segments) {
        const auto ev = log.events[0];
        switch (s.label.origin) {
            case SegmentOrigin::Pre: EXPECT_EQ(s.end, ev); break;
            case SegmentOrigin::Post: EXPECT_EQ(s.start, ev); break;
            case SegmentOrigin::N10: EXPECT_EQ(s.end, add_seconds(ev, -600)); break;
            case SegmentOrigin::N50: EXPECT_EQ(s.end, add_seconds(ev, -3000)); break;
            default: break;
        }
    }
}

TEST(Segmentation, EarlyEventSkipsUncoveredSegments) {
    const auto t0 = at("2024-01-01T00:00:00Z");
    const auto channels = covered(t0, 20 * 60, 5.0);
    const auto r = segment_by_events(channels, DisturbanceLog{{add_seconds(t0, 5 * 60)}});
    ASSERT_EQ(r.segments.size(), 2u);
    EXPECT_EQ(r.segments[0].label.origin, SegmentOrigin::Pre);
    EXPECT_EQ(r.segments[1].label.origin, SegmentOrigin::Post);
    EXPECT_EQ(r.warnings.size(), 5u);
}

TEST(Segmentation, TwoEventsAndErrors) {
    const auto t0 = at("2024-01-01T00:00:00Z");
    const auto channels = covered(t0, 120 * 60, 5.0);
    const auto r = segment_by_events(channels, DisturbanceLog{{add_seconds(t0, 55 * 60), add_seconds(t0, 115 * 60)}});
    ASSERT_EQ(r.segments.size(), 14u);
    std::set<std::size_t> events;
    for (const auto& s : r.segments) events.insert(s.event_index);
    EXPECT_EQ(events, (std::set<std::size_t>{0, 1}));
    EXPECT_THROW(segment_by_events(channels, DisturbanceLog{}), PreconditionError);
}

TEST(Outliers, IdenticalSegmentsAllKept) {
    std::vector<Segment> segs(10, constant_segment(1.0));
    const auto r = reject_outlier_segments(segs);
    EXPECT_EQ(r.kept.size(), 10u);
    EXPECT_TRUE(r.dropped.empty());
    // Second pass on the kept set drops nothing.
    EXPECT_TRUE(reject_outlier_segments(r.kept).dropped.empty());
}

TEST(Outliers, SpikeDropped) {
    // RMS values: nine 1.0 and one 100.0. Population mean 10.9, std 29.7,
    // so mean + 3 std = 100.0 exactly; the spike sits on the threshold.
    std::vector<Segment> segs(9, constant_segment(1.0));
    segs.insert(segs.begin() + 4, constant_segment(100.0));
    for (std::size_t i = 0; i < segs.size(); ++i) segs[i].event_index = i;
    const auto r = reject_outlier_segments(segs);
    ASSERT_EQ(r.dropped.size(), 1u);
    EXPECT_EQ(r.dropped[0].segment.event_index, 4u);
    ASSERT_EQ(r.kept.size(), 9u);
    for (std::size_t i = 0; i + 1 < r.kept.size(); ++i) EXPECT_LT(r.kept[i].event_index, r.kept[i + 1].event_index);
    const auto report = dropped_report(r.dropped);
    ASSERT_EQ(report.size(), 1u);
    EXPECT_TRUE(report[0].contains("reason"));
    EXPECT_TRUE(report[0].contains("start"));
}

TEST(Outliers, Preconditions) {
    EXPECT_THROW(reject_outlier_segments({constant_segment(1.0)}), PreconditionError);
    EXPECT_THROW(reject_outlier_segments({constant_segment(1.0), constant_segment(2.0)}, 0.0), PreconditionError);
}

TEST(MinMax, Examples) {
    FeatureMatrix m({"a", "b"});
    m.add_row(std::vector<double>{2, 5}, 0);
    m.add_row(std::vector<double>{4, 5}, 0);
    m.add_row(std::vector<double>{6, 5}, 1);
    const std::vector<std::size_t> all{0, 1, 2};
    const auto [scaled, params] = minmax_scale_columns(m, all);
    EXPECT_DOUBLE_EQ(scaled.at(0, 0), 0.0);
    EXPECT_DOUBLE_EQ(scaled.at(1, 0), 0.5);
    EXPECT_DOUBLE_EQ(scaled.at(2, 0), 1.0);
    for (std::size_t r = 0; r < 3; ++r) EXPECT_EQ(scaled.at(r, 1), 0.0);

    FeatureMatrix h({"c"});
    for (double v : {0.0, 10.0, 20.0}) h.add_row(std::vector<double>{v}, 0);
    const std::vector<std::size_t> fit{0, 1};
    const auto [hs, hp] = minmax_scale_columns(h, fit);
    EXPECT_DOUBLE_EQ(hs.at(0, 0), 0.0);
    EXPECT_DOUBLE_EQ(hs.at(1, 0), 1.0);
    EXPECT_DOUBLE_EQ(hs.at(2, 0), 2.0);
    EXPECT_EQ(apply_minmax(h, hp).at(2, 0), 2.0);

    EXPECT_THROW(minmax_scale_columns(FeatureMatrix({"a"}), all), PreconditionError);
    EXPECT_THROW(minmax_scale_columns(m, std::vector<std::size_t>{}), PreconditionError);
}

TEST(MinMax, FitRowsLandInUnitInterval) {
    const auto m = testutil::planted(20, 3, 8, 11);
    std::vector<std::size_t> fit;
    for (std::size_t r = 0; r < m.rows(); r += 2) fit.push_back(r);
    const auto [s, p] = minmax_scale_columns(m, fit);
    for (std::size_t r : fit) {
        for (std::size_t c = 0; c < m.cols(); ++c) {
            EXPECT_GE(s.at(r, c), 0.0);
            EXPECT_LE(s.at(r, c), 1.0);
        }
    }
}

TEST(Windows, DefaultLengthsAndSuffix) {
    auto seg = testutil::make_segment(testutil::gaussian(5400, 1), testutil::gaussian(5400, 2));
    const WindowSpec spec;
    const auto w = slice_windows(seg, spec);
    ASSERT_EQ(w.size(), 3u);
    EXPECT_EQ(w.at(30.0).voltage.size(), 900u);
    EXPECT_EQ(w.at(60.0).voltage.size(), 1800u);
    EXPECT_EQ(w.at(180.0).current.size(), 5400u);
    const double sizes[3] = {30.0, 60.0, 180.0};
    for (int a = 0; a < 3; ++a) {
        for (int b = a + 1; b < 3; ++b) {
            const auto small = w.at(sizes[a]).voltage;
            const auto large = w.at(sizes[b]).voltage;
            EXPECT_TRUE(std::equal(small.begin(), small.end(), large.end() - static_cast<std::ptrdiff_t>(small.size())));
        }
    }
}

TEST(Windows, ShortSegmentErrorNamesDeficit) {
    auto seg = testutil::make_segment(testutil::gaussian(1000, 1), testutil::gaussian(1000, 2));
    try {
        slice_windows(seg, WindowSpec{});
        FAIL();
    } catch (const PreconditionError& e) {
        EXPECT_NE(std::string(e.what()).find("5400"), std::string::npos) << e.what();
    }
}

TEST(Windows, SpecValidation) {
    EXPECT_NO_THROW(WindowSpec{}.validate(30.0));
    EXPECT_THROW((WindowSpec{{60.0, 30.0}}).validate(30.0), PreconditionError);
    EXPECT_THROW((WindowSpec{{1.0}}).validate(30.0), PreconditionError);
    EXPECT_THROW((WindowSpec{{30.01}}).validate(30.0), PreconditionError);
}

TEST(FeatureMatrixCsv, RoundTrip) {
    FeatureMatrix m({"a", "b"});
    m.add_row(std::vector<double>{0.1, 1.0 / 3.0}, 0, "T01/e0/N50");
    m.add_row(std::vector<double>{-2e-17, 5.0}, 2, "T01/e0/POST");
    std::ostringstream out;
    write_feature_csv(out, m);
    EXPECT_EQ(out.str().substr(0, 20), "segment_id,label,a,b");
    std::istringstream in(out.str());
    const auto r = read_feature_csv(in);
    ASSERT_EQ(r.rows(), 2u);
    EXPECT_EQ(r.labels(), m.labels());
    EXPECT_EQ(r.ids(), m.ids());
    for (std::size_t i = 0; i < 2; ++i) {
        for (std::size_t c = 0; c < 2; ++c) EXPECT_EQ(r.at(i, c), m.at(i, c));
    }
}
