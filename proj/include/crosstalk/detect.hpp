#pragma once

#include "crosstalk/mitigation.hpp"
#include "crosstalk/sim.hpp"
#include "crosstalk/stats.hpp"

#include <string>
#include <vector>

namespace crosstalk::detect {

struct Alarm {
    sim::TimeUs window_start = 0;
    sim::SegmentId segment = sim::SegmentId::Host;
    enum class Kind { RateAnomaly, CrossSegmentCorrelation } kind = Kind::RateAnomaly;
    double score = 0.0;
};

std::string format_alarm(const Alarm& a);  // window_start_us,segment,kind,score

// Flags every (segment, window, protocol) whose inbound request rate is
// strictly above threshold_pps. Background ARP sits well under one packet
// per second; channel senders run orders of magnitude hotter.
std::vector<Alarm> rate_monitor(const std::vector<sim::TraceRecord>& trace,
                                sim::TimeUs window_us, double threshold_pps = 50.0);

struct CorrelationOptions {
    // Benign-trace baselines in requests/second; negative values fall back
    // to the 95th percentile of the trace's own window rates.
    double baseline_host_pps = -1.0;
    double baseline_guest_pps = -1.0;
    int min_run = 3;  // consecutive windows required
};

// Raises one alarm per window inside every run of >= min_run consecutive
// windows where both segments' inbound control-plane request rates exceed
// their baselines simultaneously.
std::vector<Alarm> correlate_segments(const std::vector<sim::TraceRecord>& host_trace,
                                      const std::vector<sim::TraceRecord>& guest_trace,
                                      sim::TimeUs window_us, CorrelationOptions opts = {});

inline void apply_mitigation(sim::Router& router, const MitigationConfig& config) {
    router.set_mitigation(config);
}

}  // namespace crosstalk::detect
