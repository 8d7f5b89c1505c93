#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "crosstalk/packet.hpp"
#include "crosstalk/rng.hpp"

using namespace crosstalk;
using namespace crosstalk::packet;

namespace {

// Random message generator for the round-trip oracle.
ProtocolMessage random_message(const SubStream& s, std::uint64_t i) {
    switch (s.bits(i * 7) % 4) {
        case 0: {
            DhcpMessage m;
            m.op = static_cast<DhcpOp>(1 + s.bits(i * 7 + 1) % 5);
            m.xid = static_cast<std::uint32_t>(s.bits(i * 7 + 2));
            m.client_mac = s.bits(i * 7 + 3) & 0xFFFFFFFFFFFFULL;
            if (s.bits(i * 7 + 4) % 2)
                m.requested_ip = static_cast<Ipv4>(s.bits(i * 7 + 5)) | 1;  // nonzero
            if (m.is_client_message()) {
                m.src_ip = kAnyIp;
                m.dst_ip = kBroadcastIp;
            } else {
                m.src_ip = static_cast<Ipv4>(s.bits(i * 7 + 6));
                m.dst_ip = kBroadcastIp;
            }
            return m;
        }
        case 1: {
            ArpMessage m;
            m.op = static_cast<ArpOp>(1 + s.bits(i * 7 + 1) % 2);
            m.sender_ip = static_cast<Ipv4>(s.bits(i * 7 + 2));
            m.target_ip = static_cast<Ipv4>(s.bits(i * 7 + 3));
            m.sender_mac = s.bits(i * 7 + 4) & 0xFFFFFFFFFFFFULL;
            return m;
        }
        case 2: {
            IgmpMessage m;
            m.op = static_cast<IgmpOp>(1 + s.bits(i * 7 + 1) % 3);
            m.group_ip = 0xE0000000u | (static_cast<Ipv4>(s.bits(i * 7 + 2)) & 0x0FFFFFFF);
            return m;
        }
        default: {
            IcmpMessage m;
            m.op = static_cast<IcmpOp>(1 + s.bits(i * 7 + 1) % 2);
            m.ident = static_cast<std::uint16_t>(s.bits(i * 7 + 2));
            m.seq = static_cast<std::uint16_t>(s.bits(i * 7 + 3));
            return m;
        }
    }
}

}  // namespace

TEST_CASE("dhcp xid zero serializes to four zero bytes at its fixed offset") {
    DhcpMessage m;
    m.op = DhcpOp::Request;
    m.xid = 0;
    auto bytes = serialize(m);
    REQUIRE(bytes.size() == kDhcpWireSize);
    CHECK(bytes[0] == 3);  // request op
    CHECK(bytes[1] == 0);
    CHECK(bytes[2] == 0);
    CHECK(bytes[3] == 0);
    CHECK(bytes[4] == 0);
}

TEST_CASE("dhcp xid is big-endian at offset 1") {
    DhcpMessage m;
    m.op = DhcpOp::Request;
    m.xid = 0xDEADBEEF;
    auto bytes = serialize(m);
    CHECK(bytes[1] == 0xDE);
    CHECK(bytes[2] == 0xAD);
    CHECK(bytes[3] == 0xBE);
    CHECK(bytes[4] == 0xEF);
}

TEST_CASE("igmp leave group 224.0.0.1 serializes to E0 00 00 01") {
    IgmpMessage m;
    m.op = IgmpOp::Leave;
    m.group_ip = ipv4(224, 0, 0, 1);
    auto bytes = serialize(m);
    REQUIRE(bytes.size() == kIgmpWireSize);
    CHECK(bytes[1] == 0xE0);
    CHECK(bytes[2] == 0x00);
    CHECK(bytes[3] == 0x00);
    CHECK(bytes[4] == 0x01);
}

TEST_CASE("arp target_ip occupies bytes 5..8 big-endian") {
    ArpMessage m;
    m.op = ArpOp::Request;
    m.target_ip = ipv4(10, 0, 0, 5);
    auto bytes = serialize(m);
    REQUIRE(bytes.size() == kArpWireSize);
    CHECK(bytes[5] == 10);
    CHECK(bytes[6] == 0);
    CHECK(bytes[7] == 0);
    CHECK(bytes[8] == 5);
    auto back = parse(bytes, Proto::Arp);
    CHECK(std::get<ArpMessage>(back) == m);
}

TEST_CASE("empty byte sequence is rejected as truncated") {
    std::vector<std::uint8_t> empty;
    CHECK_THROWS_AS(parse(empty, Proto::Dhcp), TruncatedMessage);
    CHECK_THROWS_AS(parse(empty, Proto::Arp), TruncatedMessage);
    CHECK_THROWS_AS(parse(empty, Proto::Igmp), TruncatedMessage);
    CHECK_THROWS_AS(parse(empty, Proto::Icmp), TruncatedMessage);
}

TEST_CASE("round-trip oracle: parse(serialize(m)) == m over 10^4 random messages") {
    SubStream s(0xFEED, "roundtrip");
    for (std::uint64_t i = 0; i < 10000; ++i) {
        auto m = random_message(s, i);
        auto bytes = serialize(m);
        auto back = parse(bytes, proto_of(m));
        CHECK(back == m);
    }
}

TEST_CASE("covert fields are lossless for arbitrary values") {
    SubStream s(0xC0DE, "covert");
    for (std::uint64_t i = 0; i < 2000; ++i) {
        std::uint32_t word = static_cast<std::uint32_t>(s.bits(i));
        DhcpMessage d;
        d.op = DhcpOp::Request;
        d.xid = word;
        CHECK(std::get<DhcpMessage>(parse(serialize(d), Proto::Dhcp)).xid == word);

        IgmpMessage g;
        g.op = IgmpOp::MembershipQuery;
        g.group_ip = 0xE0000000u | (word & 0x0FFFFFFF);
        CHECK(std::get<IgmpMessage>(parse(serialize(g), Proto::Igmp)).group_ip == g.group_ip);
    }
}

TEST_CASE("fuzz oracle: 10^5 random buffers never crash the parser") {
    SubStream s(0xF422, "fuzz");
    Proto protos[] = {Proto::Dhcp, Proto::Arp, Proto::Igmp, Proto::Icmp};
    std::uint64_t parsed = 0, rejected = 0;
    for (std::uint64_t i = 0; i < 100000; ++i) {
        std::size_t len = s.bits(3 * i) % 64;
        std::vector<std::uint8_t> buf(len);
        for (std::size_t b = 0; b < len; ++b)
            buf[b] = static_cast<std::uint8_t>(s.bits(3 * i + 1) >> (8 * (b % 8)));
        try {
            (void)parse(buf, protos[s.bits(3 * i + 2) % 4]);
            ++parsed;
        } catch (const PacketError&) {
            ++rejected;
        }
    }
    CHECK(parsed + rejected == 100000);
    CHECK(rejected > 0);  // random noise mostly fails validation
}

TEST_CASE("invariant violations are rejected at serialization") {
    IgmpMessage g;
    g.op = IgmpOp::Join;
    g.group_ip = ipv4(10, 1, 2, 3);  // not multicast
    CHECK_THROWS_AS(serialize(g), InvariantViolation);

    DhcpMessage d;
    d.op = DhcpOp::Request;
    d.src_ip = ipv4(192, 168, 1, 55);  // client messages must come from 0.0.0.0
    CHECK_THROWS_AS(serialize(d), InvariantViolation);

    ControlRequest bad{ControlKind::SshKexInit, CostClass::Light};
    CHECK_THROWS_AS(validate(ProtocolMessage{bad}), InvariantViolation);
    ControlRequest ok{ControlKind::SshKexInit, CostClass::Heavy};
    CHECK_THROWS_AS(serialize(ProtocolMessage{ok}), InvariantViolation);  // no wire form
}

TEST_CASE("frames reject broadcast on unicast-only protocols and undersized frames") {
    IcmpMessage m;
    auto f = make_frame(0x02AA, kBroadcastMac, m);
    CHECK_THROWS_AS(validate_frame(f), InvariantViolation);

    ArpMessage a;
    a.op = ArpOp::Request;
    auto fa = make_frame(0x02AA, kBroadcastMac, a);
    CHECK_NOTHROW(validate_frame(fa));
    fa.size_bytes = 4;  // below the wire minimum
    CHECK_THROWS_AS(validate_frame(fa), InvariantViolation);
}
