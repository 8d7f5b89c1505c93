#pragma once

#include "crosstalk/channels.hpp"
#include "crosstalk/detect.hpp"

#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace crosstalk::harness {

using sim::ChannelId;
using sim::RouterProfile;
using sim::SegmentId;

inline constexpr const char* kVersion = "0.1.0";

// ---------------------------------------------------------------------------
// matrix: behavioral support probe over the built-in models

struct MatrixCell {
    ChannelId channel;
    std::string profile;
    sim::DirectionSupport observed;
};

struct MatrixResult {
    std::vector<std::string> profiles;
    std::vector<MatrixCell> cells;

    const MatrixCell* cell(ChannelId c, const std::string& profile) const;
    std::string render() const;  // arrow grid
    std::string csv() const;     // channel,profile,support
};

// Attempts every channel on every built-in profile in both directions:
// direct channels by a tiny round trip, timing channels by calibration.
MatrixResult cmd_matrix(std::uint64_t seed, std::uint32_t calibration_probes = 300);

// ---------------------------------------------------------------------------
// ber-sweep

struct SweepPoint {
    double rate_bps = 0.0;
    double ber = 0.0;
    std::optional<double> p_value;  // timing channels only
};

struct ExperimentResult {
    std::string channel;
    std::string profile;
    std::uint64_t seed = 0;
    std::vector<SweepPoint> sweep;  // sorted by rate

    std::string csv() const;  // rate_bps,ber
};

// Transmits a seeded random payload per (rate, seed) and reports the mean
// bit error rate over n_seeds seeds per point.
ExperimentResult cmd_ber_sweep(ChannelId channel, const RouterProfile& profile,
                               std::vector<double> rates_bps, std::size_t payload_bytes,
                               std::uint64_t seed, int n_seeds = 5);

// ---------------------------------------------------------------------------
// timing-hist

struct HistogramRow {
    double load_pps = 0.0;
    double mean_us = 0.0;
    double stddev_us = 0.0;
    std::optional<double> p_vs_idle;
    std::vector<double> samples_us;
};

struct HistogramResult {
    std::string channel;
    std::string profile;
    std::uint64_t seed = 0;
    std::vector<HistogramRow> rows;

    std::string csv() const;          // load_pps,mean_us,stddev_us,p_vs_idle
    std::string samples_csv() const;  // load_pps,seq,rtt_us
};

// Probe RTT distributions under a continuous sender load, one simulation per
// load rate with a shared seed (arrival thinning keeps lower rates subsets
// of higher ones).
HistogramResult cmd_timing_histogram(ChannelId channel, const RouterProfile& profile,
                                     std::vector<double> load_rates_pps, std::uint32_t n_probes,
                                     std::uint64_t seed);

// ---------------------------------------------------------------------------
// quality

struct QualityRow {
    std::string channel;
    double pervasiveness = 0.0;  // supported profiles / 7
    double rate_bps = 0.0;       // max swept rate with BER < 0.05
    int covertness = 1;          // 3 = no logs & low pps, 2 = one, 1 = both
};

struct QualityResult {
    std::vector<QualityRow> rows;  // ranked by rate
    std::string csv() const;
    std::string render() const;
};

QualityResult cmd_quality(std::uint64_t seed);

// ---------------------------------------------------------------------------
// mitigate

struct MitigateReport {
    std::string channel;
    std::string profile;
    std::string mode;
    double rate_bps = 0.0;
    double ber_before = 0.0;
    double ber_after = 0.0;
    std::optional<double> p_before;
    std::optional<double> p_after;   // absent when calibration failed
    bool calibration_failed = false; // mitigation drove the pairing below significance

    std::string render() const;
    std::string csv() const;
};

MitigateReport cmd_mitigate(ChannelId channel, const RouterProfile& profile,
                            const detect::MitigationConfig& mitigation, double rate_bps,
                            std::uint64_t seed);

// ---------------------------------------------------------------------------
// chat

struct ChatLine {
    std::string text;
    double latency_s = 0.0;
    double ber = 0.0;
};

// One line across the covert channel on a fresh simulation.
ChatLine chat_roundtrip(ChannelId channel, const RouterProfile& profile,
                        const std::string& line, std::uint64_t seed);

// ---------------------------------------------------------------------------
// shared helpers

// Preferred transmit direction on this profile (guest-to-host when allowed).
SegmentId pick_sender_segment(ChannelId channel, const RouterProfile& profile);
bool channel_supported(ChannelId channel, const RouterProfile& profile);

std::vector<std::uint8_t> seeded_payload(std::size_t bytes, std::uint64_t seed);

void write_file(const std::string& path, const std::string& content);
// <out>.manifest.json next to every output: command, seed, profile hash,
// version, arguments. Deterministic for fixed inputs.
void write_manifest(const std::string& out_path, const std::string& command,
                    std::uint64_t seed, const RouterProfile* profile,
                    const std::map<std::string, std::string>& args);

std::string format_double(double v);

}  // namespace crosstalk::harness
