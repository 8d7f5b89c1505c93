#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "crosstalk/gadgets.hpp"
#include "crosstalk/sim.hpp"

#include <algorithm>
#include <sstream>

using namespace crosstalk;
using namespace crosstalk::sim;
using packet::ArpMessage;
using packet::ArpOp;
using packet::DhcpMessage;
using packet::DhcpOp;
using packet::Frame;
using packet::IcmpMessage;
using packet::IcmpOp;
using packet::IgmpMessage;
using packet::IgmpOp;

namespace {

RouterProfile quiet(const std::string& id) {
    auto p = builtin_profile(id);
    p.jitter_stddev_us = 0.0;
    return p;
}

Frame arp_probe(SegmentId seg) {
    ArpMessage m;
    m.op = ArpOp::Request;
    m.sender_ip = station_ip(seg, 1);
    m.target_ip = router_ip(seg);
    m.sender_mac = station_mac(seg, 1);
    return packet::make_frame(m.sender_mac, packet::kBroadcastMac, m);
}

Frame invalid_dhcp_request(SegmentId seg, std::uint32_t xid) {
    DhcpMessage m;
    m.op = DhcpOp::Request;
    m.xid = xid;
    m.client_mac = station_mac(seg, 1);
    m.requested_ip = packet::ipv4(10, 99, 99, 99);
    return packet::make_frame(m.client_mac, packet::kBroadcastMac, m);
}

}  // namespace

TEST_CASE("events run in time order with insertion-order ties") {
    Simulation s(quiet("TP2"), 1);
    std::vector<int> order;
    s.schedule_fn(10, [&] { order.push_back(2); });
    s.schedule_fn(10, [&] { order.push_back(3); });
    s.schedule_fn(5, [&] { order.push_back(1); });
    s.schedule_fn(11, [&] { order.push_back(4); });
    s.run_until_idle();
    CHECK(order == std::vector<int>{1, 2, 3, 4});
    CHECK(s.now() == 11);
}

TEST_CASE("scheduling into the past fails") {
    Simulation s(quiet("TP2"), 1);
    s.schedule_fn(100, [] {});
    s.run_until_idle();
    CHECK_THROWS_AS(s.schedule_fn(99, [] {}), PastEvent);
    CHECK_NOTHROW(s.schedule_fn(100, [] {}));  // same instant is fine
}

TEST_CASE("sort oracle: 1e5 random events pop globally ordered") {
    Simulation s(quiet("TP2"), 1);
    SubStream rnd(42, "event-times");
    std::vector<TimeUs> fired;
    fired.reserve(100000);
    for (std::uint64_t i = 0; i < 100000; ++i) {
        TimeUs t = rnd.bits(i) % 1000000;
        s.schedule_fn(t, [&fired, &s] { fired.push_back(s.now()); });
    }
    s.run_until_idle();
    CHECK(fired.size() == 100000);
    CHECK(std::is_sorted(fired.begin(), fired.end()));
}

TEST_CASE("control plane: idle server with zero jitter responds in exactly the service time") {
    auto profile = quiet("TP2");
    Simulation s(profile, 1);
    auto d = s.router().service_response_time(RequestKind::Arp, SegmentId::Host, 1000);
    REQUIRE(d.has_value());
    CHECK(*d == profile.service_us(RequestKind::Arp));
}

TEST_CASE("control plane: single server FIFO makes a second request wait") {
    Simulation s(quiet("TP2"), 1);
    auto first = s.router().service_response_time(RequestKind::SshKex, SegmentId::Host, 0);
    REQUIRE(first.has_value());
    // An ARP request arriving mid-service waits for the key exchange.
    auto second = s.router().service_response_time(RequestKind::Arp, SegmentId::Host, 100);
    REQUIRE(second.has_value());
    CHECK(*second >= *first - 100);
}

TEST_CASE("control plane: disabled kinds raise DisabledService") {
    Simulation s(quiet("TP2"), 1);  // no ICMP on guest, no SSH on guest
    CHECK_THROWS_AS(
        (void)s.router().service_response_time(RequestKind::SshKex, SegmentId::Guest, 0),
        DisabledService);
    CHECK_THROWS_AS((void)s.router().service_response_time(RequestKind::Icmp, SegmentId::Guest, 0),
                    DisabledService);
    CHECK_NOTHROW((void)s.router().service_response_time(RequestKind::Icmp, SegmentId::Host, 0));
}

TEST_CASE("control plane: full class buffer drops the request") {
    Simulation s(quiet("TP2"), 1);
    // dhcp_nak has a single slot.
    auto first = s.router().service_response_time(RequestKind::DhcpNak, SegmentId::Guest, 0);
    REQUIRE(first.has_value());
    auto second = s.router().service_response_time(RequestKind::DhcpNak, SegmentId::Guest, 10);
    CHECK_FALSE(second.has_value());
    // After the first completes the slot frees up.
    auto third =
        s.router().service_response_time(RequestKind::DhcpNak, SegmentId::Guest, *first + 10);
    CHECK(third.has_value());
}

TEST_CASE("invalid dhcp request: NAK broadcast reaches both segments only on leaky directions") {
    SUBCASE("TP2 host-originated leaks to both (support matrix: host-to-guest)") {
        Simulation s(quiet("TP2"), 1);
        auto out = s.deliver_now(SegmentId::Host, invalid_dhcp_request(SegmentId::Host, 0xAB12));
        REQUIRE(out.size() == 1);
        CHECK(out[0].dest == EmittedFrame::Dest::Both);
        CHECK(std::get<DhcpMessage>(out[0].frame.payload).op == DhcpOp::Nak);
        CHECK(std::get<DhcpMessage>(out[0].frame.payload).xid == 0xAB12);
    }
    SUBCASE("TP2 guest-originated stays on the guest segment") {
        Simulation s(quiet("TP2"), 1);
        auto out = s.deliver_now(SegmentId::Guest, invalid_dhcp_request(SegmentId::Guest, 0xAB12));
        REQUIRE(out.size() == 1);
        CHECK(out[0].dest == EmittedFrame::Dest::Guest);
    }
    SUBCASE("DL2 guest-originated leaks (bidirectional model)") {
        Simulation s(quiet("DL2"), 1);
        auto out = s.deliver_now(SegmentId::Guest, invalid_dhcp_request(SegmentId::Guest, 0x77));
        REQUIRE(out.size() == 1);
        CHECK(out[0].dest == EmittedFrame::Dest::Both);
    }
    SUBCASE("DL1 never leaks") {
        Simulation s(quiet("DL1"), 1);
        auto out = s.deliver_now(SegmentId::Guest, invalid_dhcp_request(SegmentId::Guest, 0x77));
        REQUIRE(out.size() == 1);
        CHECK(out[0].dest == EmittedFrame::Dest::Guest);
    }
}

TEST_CASE("valid dhcp request is acked to the requesting segment with the same xid") {
    Simulation s(quiet("TP2"), 1);
    DhcpMessage m;
    m.op = DhcpOp::Request;
    m.xid = 0x5150;
    m.client_mac = station_mac(SegmentId::Guest, 1);
    m.requested_ip = station_ip(SegmentId::Guest, 1);
    auto out = s.deliver_now(SegmentId::Guest,
                             packet::make_frame(m.client_mac, packet::kBroadcastMac, m));
    REQUIRE(out.size() == 1);
    CHECK(out[0].dest == EmittedFrame::Dest::Guest);
    CHECK(std::get<DhcpMessage>(out[0].frame.payload).op == DhcpOp::Ack);
    CHECK(std::get<DhcpMessage>(out[0].frame.payload).xid == 0x5150);
}

TEST_CASE("igmp join/leave of the last member triggers a membership query") {
    SUBCASE("leak models broadcast the query to both segments") {
        Simulation s(quiet("TP2"), 1);  // igmp leak host->guest
        packet::Ipv4 group = packet::ipv4(224, 1, 2, 3);
        auto join = packet::make_frame(station_mac(SegmentId::Host, 1), packet::kBroadcastMac,
                                       IgmpMessage{IgmpOp::Join, group});
        auto leave = packet::make_frame(station_mac(SegmentId::Host, 1), packet::kBroadcastMac,
                                        IgmpMessage{IgmpOp::Leave, group});
        CHECK(s.deliver_now(SegmentId::Host, join).empty());
        auto out = s.deliver_now(SegmentId::Host, leave);
        REQUIRE(out.size() == 1);
        CHECK(out[0].dest == EmittedFrame::Dest::Both);
        CHECK(std::get<IgmpMessage>(out[0].frame.payload).op == IgmpOp::MembershipQuery);
        CHECK(std::get<IgmpMessage>(out[0].frame.payload).group_ip == group);
    }
    SUBCASE("leave without membership does nothing") {
        Simulation s(quiet("TP2"), 1);
        auto leave = packet::make_frame(station_mac(SegmentId::Host, 1), packet::kBroadcastMac,
                                        IgmpMessage{IgmpOp::Leave, packet::ipv4(224, 9, 9, 9)});
        CHECK(s.deliver_now(SegmentId::Host, leave).empty());
    }
    SUBCASE("non-leak models keep the query on the ingress segment") {
        Simulation s(quiet("LS1"), 1);
        packet::Ipv4 group = packet::ipv4(224, 1, 2, 3);
        s.deliver_now(SegmentId::Host,
                      packet::make_frame(station_mac(SegmentId::Host, 1), packet::kBroadcastMac,
                                         IgmpMessage{IgmpOp::Join, group}));
        auto out = s.deliver_now(
            SegmentId::Host, packet::make_frame(station_mac(SegmentId::Host, 1),
                                                packet::kBroadcastMac,
                                                IgmpMessage{IgmpOp::Leave, group}));
        REQUIRE(out.size() == 1);
        CHECK(out[0].dest == EmittedFrame::Dest::Host);
    }
}

TEST_CASE("broadcast arp forwarding follows the model's bridge behavior") {
    ArpMessage m;
    m.op = ArpOp::Request;
    m.sender_ip = station_ip(SegmentId::Host, 1);
    m.sender_mac = station_mac(SegmentId::Host, 1);

    SUBCASE("no forwarding: nothing crosses") {
        Simulation s(quiet("LS1"), 1);  // arp_broadcast_forwarding = none
        m.target_ip = packet::ipv4(192, 168, 2, 50);
        auto out = s.deliver_now(SegmentId::Host,
                                 packet::make_frame(m.sender_mac, packet::kBroadcastMac, m));
        CHECK(out.empty());
    }
    SUBCASE("subnet-restricted forwards only into the other segment's subnet") {
        Simulation s(quiet("TP2"), 1);
        m.target_ip = packet::ipv4(192, 168, 2, 50);  // guest subnet
        auto out = s.deliver_now(SegmentId::Host,
                                 packet::make_frame(m.sender_mac, packet::kBroadcastMac, m));
        REQUIRE(out.size() == 1);
        CHECK(out[0].dest == EmittedFrame::Dest::Guest);
        CHECK(std::get<ArpMessage>(out[0].frame.payload).target_ip == m.target_ip);

        m.target_ip = packet::ipv4(8, 8, 8, 8);  // outside both subnets
        auto dropped = s.deliver_now(SegmentId::Host,
                                     packet::make_frame(m.sender_mac, packet::kBroadcastMac, m));
        CHECK(dropped.empty());
    }
    SUBCASE("direction gate blocks the unsupported side") {
        Simulation s(quiet("TP2"), 1);  // arp-direct is host-to-guest only
        ArpMessage g;
        g.op = ArpOp::Request;
        g.sender_ip = station_ip(SegmentId::Guest, 1);
        g.sender_mac = station_mac(SegmentId::Guest, 1);
        g.target_ip = packet::ipv4(192, 168, 1, 50);
        auto out = s.deliver_now(SegmentId::Guest,
                                 packet::make_frame(g.sender_mac, packet::kBroadcastMac, g));
        CHECK(out.empty());
    }
    SUBCASE("unrestricted forwards arbitrary targets") {
        Simulation s(quiet("DL2"), 1);
        m.target_ip = packet::ipv4(8, 8, 8, 8);
        auto out = s.deliver_now(SegmentId::Host,
                                 packet::make_frame(m.sender_mac, packet::kBroadcastMac, m));
        REQUIRE(out.size() == 1);
        CHECK(out[0].dest == EmittedFrame::Dest::Guest);
    }
}

TEST_CASE("arp requests for the router ip are answered on the ingress segment") {
    Simulation s(quiet("TP2"), 1);
    auto out = s.deliver_now(SegmentId::Guest, arp_probe(SegmentId::Guest));
    REQUIRE(out.size() == 1);
    CHECK(out[0].dest == EmittedFrame::Dest::Guest);
    CHECK(std::get<ArpMessage>(out[0].frame.payload).op == ArpOp::Response);
    CHECK(out[0].time == s.now() + s.profile().service_us(RequestKind::Arp));
}

TEST_CASE("icmp echo is answered only where the profile exposes it") {
    IcmpMessage m;
    m.op = IcmpOp::EchoRequest;
    m.ident = 7;
    m.seq = 42;
    SUBCASE("TP2 guest: disabled, silently dropped") {
        Simulation s(quiet("TP2"), 1);
        auto out = s.deliver_now(SegmentId::Guest,
                                 packet::make_frame(station_mac(SegmentId::Guest, 1),
                                                    router_mac(), m));
        CHECK(out.empty());
    }
    SUBCASE("LS1 guest: enabled, reply echoes ident and seq") {
        Simulation s(quiet("LS1"), 1);
        auto out = s.deliver_now(SegmentId::Guest,
                                 packet::make_frame(station_mac(SegmentId::Guest, 1),
                                                    router_mac(), m));
        REQUIRE(out.size() == 1);
        const auto& reply = std::get<IcmpMessage>(out[0].frame.payload);
        CHECK(reply.op == IcmpOp::EchoReply);
        CHECK(reply.ident == 7);
        CHECK(reply.seq == 42);
    }
}

TEST_CASE("isolation baseline: no leak flags, ordinary traffic never crosses segments") {
    Simulation s(quiet("DL1"), 1);
    for (int i = 0; i < 50; ++i) {
        s.schedule_delivery(1000 + 100 * i, SegmentId::Host, arp_probe(SegmentId::Host));
        s.schedule_delivery(1050 + 100 * i, SegmentId::Guest, arp_probe(SegmentId::Guest));
    }
    s.run_until_idle();
    CHECK(!s.emissions().empty());
    for (const auto& e : s.emissions()) CHECK(e.dest != EmittedFrame::Dest::Both);
    // Host responses stay on host, guest on guest: ARP responses carry the
    // ingress router address.
    for (const auto& e : s.emissions()) {
        const auto& a = std::get<ArpMessage>(e.frame.payload);
        auto seg = static_cast<SegmentId>(e.dest);
        CHECK(a.sender_ip == router_ip(seg));
    }
}

TEST_CASE("conservation: every admitted request yields exactly one emission") {
    Simulation s(quiet("TP2"), 7);
    SubStream rnd(5, "mix");
    std::uint64_t sent = 0;
    for (std::uint64_t i = 0; i < 400; ++i) {
        TimeUs t = 1000 + i * 137;
        switch (rnd.bits(i) % 3) {
            case 0: s.schedule_delivery(t, SegmentId::Guest, arp_probe(SegmentId::Guest)); break;
            case 1: s.schedule_delivery(t, SegmentId::Host, arp_probe(SegmentId::Host)); break;
            default:
                s.schedule_delivery(t, SegmentId::Guest,
                                    invalid_dhcp_request(SegmentId::Guest, (std::uint32_t)i));
        }
        ++sent;
    }
    s.run_until_idle();
    auto& cp = s.router().control_plane();
    CHECK(cp.admitted_count() + cp.dropped_count() == sent);
    CHECK(s.emissions().size() == cp.admitted_count());
}

TEST_CASE("determinism: same profile, seed and schedule give identical traces") {
    auto run = [] {
        Simulation s(builtin_profile("TP2"), 99);
        for (int i = 0; i < 200; ++i) {
            s.schedule_delivery(500 + 97 * i, SegmentId::Guest, arp_probe(SegmentId::Guest));
            s.schedule_delivery(700 + 83 * i, SegmentId::Host,
                                invalid_dhcp_request(SegmentId::Host, 0xA000 + i));
        }
        s.run_until_idle();
        std::ostringstream os;
        s.export_trace(os);
        return os.str();
    };
    auto a = run();
    auto b = run();
    CHECK(!a.empty());
    CHECK(a == b);
}

TEST_CASE("monotone contention: probe response means are non-decreasing in load") {
    std::vector<double> means;
    for (double rate : {0.0, 100.0, 200.0, 400.0, 800.0}) {
        Simulation s(builtin_profile("TP2"), 4242);
        if (rate > 0)
            gadgets::run_sender(s, {gadgets::SenderKind::ArpFlood, rate, SegmentId::Guest}, 0,
                                4000000);
        auto trace = gadgets::run_receiver(
            s, {gadgets::ReceiverKind::ArpProbe, 0, SegmentId::Host}, 500, 10000);
        means.push_back(trace.mean_rtt_us());
    }
    for (std::size_t i = 1; i < means.size(); ++i) CHECK(means[i] >= means[i - 1]);
    CHECK(means.back() > means.front());
}

TEST_CASE("profile loading") {
    SUBCASE("builtins carry the documented flags") {
        auto ls1 = builtin_profile("LS1");
        CHECK(ls1.icmp_on_guest);
        CHECK_FALSE(ls1.dhcp_nak_broadcast_leak);
        auto dl1 = builtin_profile("DL1");
        CHECK_FALSE(dl1.dhcp_nak_broadcast_leak);
        CHECK_FALSE(dl1.igmp_query_leak);
        auto tp2 = builtin_profile("TP2");
        CHECK(tp2.ssh_enabled_on_host);
        CHECK(tp2.logs_dhcp);
        CHECK(tp2.service_us(RequestKind::DhcpNak) == 9000);  // base + log write
        auto ed1 = builtin_profile("ED1");
        CHECK(ed1.service_us(RequestKind::DhcpValid) == 3000);  // no logging
    }
    SUBCASE("canonical json round-trips") {
        auto p = builtin_profile("ED2");
        auto q = load_profile(p.to_json());
        CHECK(p.hash() == q.hash());
        CHECK(q.channel_support(ChannelId::DhcpDirect).guest_to_host);
    }
    SUBCASE("missing service map is a schema error with the field path") {
        CHECK_THROWS_WITH_AS(load_profile(R"({"model_id":"X"})"),
                             doctest::Contains("ssh_enabled_on_host"), SchemaError);
        auto p = builtin_profile("TP2");
        auto text = p.to_json();
        auto pos = text.find("\"service_time_us\"");
        REQUIRE(pos != std::string::npos);
        std::string broken = text.substr(0, pos) + "\"service_time_us_x\"" +
                             text.substr(pos + std::string("\"service_time_us\"").size());
        CHECK_THROWS_WITH_AS(load_profile(broken), doctest::Contains("service_time_us"),
                             SchemaError);
    }
    SUBCASE("inconsistent flag combinations are rejected") {
        auto p = builtin_profile("TP2");
        p.model_id = "X1";
        auto text = p.to_json();
        // icmp-icmp support without guest icmp exposure
        auto pos = text.find("\"icmp-icmp\":\"none\"");
        REQUIRE(pos != std::string::npos);
        std::string broken = text;
        broken.replace(pos, std::string("\"icmp-icmp\":\"none\"").size(),
                       "\"icmp-icmp\":\"both\"");
        CHECK_THROWS_AS(load_profile(broken), SchemaError);
    }
    SUBCASE("unknown builtin id") {
        CHECK_THROWS_AS(builtin_profile("TPX"), SchemaError);
    }
}

TEST_CASE("trace export format is line-oriented key=value records") {
    Simulation s(quiet("TP2"), 1);
    s.schedule_delivery(1000, SegmentId::Guest, arp_probe(SegmentId::Guest));
    s.run_until_idle();
    std::ostringstream os;
    s.export_trace(os);
    auto text = os.str();
    CHECK(text.find("1000 guest in arp op=request") != std::string::npos);
    CHECK(text.find("guest out arp op=response") != std::string::npos);
}
