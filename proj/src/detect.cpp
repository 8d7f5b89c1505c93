#include "crosstalk/detect.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <map>

namespace crosstalk::detect {

using sim::SegmentId;
using sim::TimeUs;
using sim::TraceRecord;

std::string format_alarm(const Alarm& a) {
    std::string line = std::to_string(a.window_start);
    line += ',';
    line += segment_name(a.segment);
    line += ',';
    line += a.kind == Alarm::Kind::RateAnomaly ? "rate" : "correlation";
    line += ',';
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.3f", a.score);
    line += buf;
    return line;
}

std::vector<Alarm> rate_monitor(const std::vector<TraceRecord>& trace, TimeUs window_us,
                                double threshold_pps) {
    std::vector<Alarm> alarms;
    if (window_us == 0) return alarms;

    // (segment, proto, window) -> inbound count
    std::map<std::tuple<SegmentId, packet::Proto, TimeUs>, std::uint64_t> counts;
    for (const auto& r : trace) {
        if (r.direction != TraceRecord::Dir::In) continue;
        counts[{r.segment, r.proto, r.time_us / window_us}] += 1;
    }
    double window_s = static_cast<double>(window_us) / 1e6;
    for (const auto& [key, n] : counts) {
        double rate = static_cast<double>(n) / window_s;
        if (rate > threshold_pps) {
            Alarm a;
            a.window_start = std::get<2>(key) * window_us;
            a.segment = std::get<0>(key);
            a.kind = Alarm::Kind::RateAnomaly;
            a.score = rate;
            alarms.push_back(a);
        }
    }
    std::sort(alarms.begin(), alarms.end(), [](const Alarm& a, const Alarm& b) {
        if (a.window_start != b.window_start) return a.window_start < b.window_start;
        return a.segment < b.segment;
    });
    return alarms;
}

namespace {

std::vector<double> window_rates(const std::vector<TraceRecord>& trace, SegmentId segment,
                                 TimeUs window_us, TimeUs span_us) {
    std::size_t windows = static_cast<std::size_t>(span_us / window_us) + 1;
    std::vector<double> rates(windows, 0.0);
    for (const auto& r : trace) {
        if (r.direction != TraceRecord::Dir::In || r.segment != segment) continue;
        rates[r.time_us / window_us] += 1.0;
    }
    double window_s = static_cast<double>(window_us) / 1e6;
    for (auto& v : rates) v /= window_s;
    return rates;
}

TimeUs trace_span(const std::vector<TraceRecord>& trace) {
    TimeUs t = 0;
    for (const auto& r : trace) t = std::max(t, r.time_us);
    return t;
}

}  // namespace

std::vector<Alarm> correlate_segments(const std::vector<TraceRecord>& host_trace,
                                      const std::vector<TraceRecord>& guest_trace,
                                      TimeUs window_us, CorrelationOptions opts) {
    std::vector<Alarm> alarms;
    if (window_us == 0) return alarms;

    TimeUs span = std::max(trace_span(host_trace), trace_span(guest_trace));
    auto host = window_rates(host_trace, SegmentId::Host, window_us, span);
    auto guest = window_rates(guest_trace, SegmentId::Guest, window_us, span);

    double base_h = opts.baseline_host_pps >= 0 ? opts.baseline_host_pps
                                                : percentile(host, 0.95);
    double base_g = opts.baseline_guest_pps >= 0 ? opts.baseline_guest_pps
                                                 : percentile(guest, 0.95);

    std::size_t n = std::min(host.size(), guest.size());
    std::vector<bool> hot(n, false);
    for (std::size_t i = 0; i < n; ++i) hot[i] = host[i] > base_h && guest[i] > base_g;

    std::size_t i = 0;
    while (i < n) {
        if (!hot[i]) {
            ++i;
            continue;
        }
        std::size_t j = i;
        while (j < n && hot[j]) ++j;
        if (j - i >= static_cast<std::size_t>(opts.min_run)) {
            for (std::size_t w = i; w < j; ++w) {
                Alarm a;
                a.window_start = w * window_us;
                a.segment = SegmentId::Host;  // joint condition; reported once per window
                a.kind = Alarm::Kind::CrossSegmentCorrelation;
                double sh = base_h > 0 ? host[w] / base_h : host[w];
                double sg = base_g > 0 ? guest[w] / base_g : guest[w];
                a.score = std::min(sh, sg);
                alarms.push_back(a);
            }
        }
        i = j;
    }
    return alarms;
}

}  // namespace crosstalk::detect
