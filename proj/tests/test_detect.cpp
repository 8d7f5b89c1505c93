#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "crosstalk/channels.hpp"
#include "crosstalk/detect.hpp"
#include "crosstalk/gadgets.hpp"
#include "crosstalk/harness.hpp"

#include <sstream>

using namespace crosstalk;
using namespace crosstalk::detect;
using sim::SegmentId;
using sim::Simulation;
using sim::TimeUs;
using sim::TraceRecord;

namespace {

std::vector<TraceRecord> synthetic_arp_trace(SegmentId seg, double rate_pps, TimeUs span_us) {
    std::vector<TraceRecord> trace;
    if (rate_pps <= 0) return trace;
    auto step = static_cast<TimeUs>(1e6 / rate_pps);
    for (TimeUs t = 0; t < span_us; t += step)
        trace.push_back({t, seg, TraceRecord::Dir::In, packet::Proto::Arp, "op=request"});
    return trace;
}

}  // namespace

TEST_CASE("rate monitor: idle background traffic raises nothing") {
    auto trace = synthetic_arp_trace(SegmentId::Guest, 0.5, 10000000);
    CHECK(rate_monitor(trace, 1000000).empty());
}

TEST_CASE("rate monitor: a 1000 pps flood flags every window") {
    auto trace = synthetic_arp_trace(SegmentId::Guest, 1000.0, 10000000);
    auto alarms = rate_monitor(trace, 1000000);
    REQUIRE(alarms.size() == 10);
    for (std::size_t i = 0; i < alarms.size(); ++i) {
        CHECK(alarms[i].window_start == i * 1000000);
        CHECK(alarms[i].segment == SegmentId::Guest);
        CHECK(alarms[i].kind == Alarm::Kind::RateAnomaly);
        CHECK(alarms[i].score == doctest::Approx(1000.0));
    }
}

TEST_CASE("rate monitor: the threshold is a strict bound") {
    auto at = synthetic_arp_trace(SegmentId::Host, 50.0, 2000000);
    CHECK(rate_monitor(at, 1000000, 50.0).empty());
    auto above = synthetic_arp_trace(SegmentId::Host, 51.0, 2000000);
    CHECK_FALSE(rate_monitor(above, 1000000, 50.0).empty());
}

TEST_CASE("rate monitor counts per protocol") {
    auto arp = synthetic_arp_trace(SegmentId::Guest, 30.0, 4000000);
    std::vector<TraceRecord> icmp;
    for (TimeUs t = 0; t < 4000000; t += 25000)
        icmp.push_back({t, SegmentId::Guest, TraceRecord::Dir::In, packet::Proto::Icmp, ""});
    auto both = arp;
    both.insert(both.end(), icmp.begin(), icmp.end());
    // 30 + 40 pps overall, but no single protocol above 50
    CHECK(rate_monitor(both, 1000000, 50.0).empty());
}

TEST_CASE("correlation: one-sided activity never fires") {
    auto guest = synthetic_arp_trace(SegmentId::Guest, 500.0, 20000000);
    std::vector<TraceRecord> host;  // silent
    CorrelationOptions opts;
    opts.baseline_host_pps = 10.0;
    opts.baseline_guest_pps = 10.0;
    CHECK(correlate_segments(host, guest, 1000000, opts).empty());
}

TEST_CASE("correlation: joint sustained activity fires inside the hot span only") {
    std::vector<TraceRecord> host, guest;
    auto burst = [](std::vector<TraceRecord>& out, SegmentId seg, TimeUs from, TimeUs to) {
        for (TimeUs t = from; t < to; t += 10000)
            out.push_back({t, seg, TraceRecord::Dir::In, packet::Proto::Arp, ""});
    };
    burst(host, SegmentId::Host, 5000000, 12000000);
    burst(guest, SegmentId::Guest, 5000000, 12000000);
    CorrelationOptions opts;
    opts.baseline_host_pps = 20.0;
    opts.baseline_guest_pps = 20.0;
    auto alarms = correlate_segments(host, guest, 1000000, opts);
    REQUIRE(alarms.size() == 7);
    for (const auto& a : alarms) {
        CHECK(a.window_start >= 5000000);
        CHECK(a.window_start < 12000000);
        CHECK(a.kind == Alarm::Kind::CrossSegmentCorrelation);
        CHECK(a.score > 1.0);
    }
}

TEST_CASE("correlation: short coincidences below the persistence bar stay quiet") {
    std::vector<TraceRecord> host, guest;
    auto burst = [](std::vector<TraceRecord>& out, SegmentId seg, TimeUs from, TimeUs to) {
        for (TimeUs t = from; t < to; t += 10000)
            out.push_back({t, seg, TraceRecord::Dir::In, packet::Proto::Arp, ""});
    };
    burst(host, SegmentId::Host, 2000000, 4000000);    // 2 windows
    burst(guest, SegmentId::Guest, 2000000, 4000000);
    CorrelationOptions opts;
    opts.baseline_host_pps = 20.0;
    opts.baseline_guest_pps = 20.0;
    CHECK(correlate_segments(host, guest, 1000000, opts).empty());
}

TEST_CASE("correlation: constructed negative with non-overlapping bursts") {
    std::vector<TraceRecord> host, guest;
    auto burst = [](std::vector<TraceRecord>& out, SegmentId seg, TimeUs from, TimeUs to) {
        for (TimeUs t = from; t < to; t += 5000)
            out.push_back({t, seg, TraceRecord::Dir::In, packet::Proto::Arp, ""});
    };
    burst(guest, SegmentId::Guest, 1000000, 6000000);
    burst(host, SegmentId::Host, 8000000, 13000000);  // disjoint in time
    CorrelationOptions opts;
    opts.baseline_host_pps = 20.0;
    opts.baseline_guest_pps = 20.0;
    CHECK(correlate_segments(host, guest, 1000000, opts).empty());
}

TEST_CASE("alarm export format") {
    Alarm a{3000000, SegmentId::Guest, Alarm::Kind::RateAnomaly, 812.5};
    CHECK(format_alarm(a) == "3000000,guest,rate,812.500");
}

TEST_CASE("random delay never reduces or unboundedly reorders responses") {
    auto profile = sim::builtin_profile("TP2");
    constexpr TimeUs kMax = 2000;
    auto run = [&](bool mitigated) {
        Simulation s(profile, 21);
        if (mitigated) apply_mitigation(s.router(), MitigationConfig::random_delay(kMax));
        std::vector<TimeUs> times;
        for (int i = 0; i < 200; ++i) {
            packet::ArpMessage m;
            m.op = packet::ArpOp::Request;
            m.sender_ip = sim::station_ip(SegmentId::Host, 1);
            m.sender_mac = sim::station_mac(SegmentId::Host, 1);
            m.target_ip = sim::router_ip(SegmentId::Host);
            s.schedule_delivery(1000 + 2000 * i, SegmentId::Host,
                                packet::make_frame(m.sender_mac, packet::kBroadcastMac, m));
        }
        s.run_until_idle();
        for (const auto& e : s.emissions()) times.push_back(e.time);
        return times;
    };
    auto plain = run(false);
    auto delayed = run(true);
    REQUIRE(plain.size() == delayed.size());
    for (std::size_t i = 0; i < plain.size(); ++i) {
        CHECK(delayed[i] >= plain[i]);
        CHECK(delayed[i] <= plain[i] + kMax);
    }
}

TEST_CASE("time slicing pins every response inside its segment's slice") {
    auto profile = sim::builtin_profile("TP2");
    Simulation s(profile, 8);
    constexpr TimeUs kSlice = 50000;
    apply_mitigation(s.router(), MitigationConfig::time_slice(kSlice));
    gadgets::run_sender(s, {gadgets::SenderKind::ArpFlood, 300.0, SegmentId::Guest}, 0, 3000000);
    gadgets::run_sender(s, {gadgets::SenderKind::ArpFlood, 300.0, SegmentId::Host}, 0, 3000000);
    s.run_until_idle();
    REQUIRE(!s.emissions().empty());
    for (const auto& e : s.emissions()) {
        REQUIRE(e.dest != sim::EmittedFrame::Dest::Both);
        TimeUs pos = e.time % (2 * kSlice);
        bool host_slice = pos < kSlice;
        CHECK(host_slice == (e.dest == sim::EmittedFrame::Dest::Host));
    }
}

TEST_CASE("mitigation mode none leaves the trace byte-identical") {
    auto profile = sim::builtin_profile("TP2");
    auto run = [&](bool with_none) {
        Simulation s(profile, 13);
        if (with_none) apply_mitigation(s.router(), MitigationConfig::none());
        gadgets::run_sender(s, {gadgets::SenderKind::ArpFlood, 200.0, SegmentId::Guest}, 0,
                            2000000);
        s.run_until_idle();
        std::ostringstream os;
        s.export_trace(os);
        return os.str();
    };
    CHECK(run(false) == run(true));
}

TEST_CASE("random delay does not disturb direct-channel payload bits") {
    auto profile = sim::builtin_profile("DL2");
    auto payload = harness::seeded_payload(64, 3);
    auto res = channels::transfer(channels::ChannelId::DhcpDirect, SegmentId::Guest, profile,
                                  payload, 1000.0, 3, MitigationConfig::random_delay(2000));
    CHECK(res.ber == 0.0);
    CHECK(res.decoded == payload);
}
