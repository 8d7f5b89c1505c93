#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <variant>
#include <vector>

namespace crosstalk::packet {

using MacAddr = std::uint64_t;  // low 48 bits
using Ipv4 = std::uint32_t;

constexpr MacAddr kBroadcastMac = 0xFFFFFFFFFFFFULL;
constexpr Ipv4 kAnyIp = 0x00000000;          // 0.0.0.0
constexpr Ipv4 kBroadcastIp = 0xFFFFFFFF;    // 255.255.255.255

constexpr Ipv4 ipv4(std::uint8_t a, std::uint8_t b, std::uint8_t c, std::uint8_t d) {
    return (static_cast<Ipv4>(a) << 24) | (static_cast<Ipv4>(b) << 16) |
           (static_cast<Ipv4>(c) << 8) | d;
}

std::string ip_to_string(Ipv4 ip);

constexpr bool is_multicast(Ipv4 ip) { return (ip >> 28) == 0xE; }

// ---------------------------------------------------------------------------
// Message types

enum class DhcpOp : std::uint8_t { Discover = 1, Offer, Request, Ack, Nak };

struct DhcpMessage {
    DhcpOp op = DhcpOp::Discover;
    std::uint32_t xid = 0;
    MacAddr client_mac = 0;
    std::optional<Ipv4> requested_ip;  // serialized as 0.0.0.0 when absent
    Ipv4 src_ip = kAnyIp;
    Ipv4 dst_ip = kBroadcastIp;

    bool is_client_message() const {
        return op == DhcpOp::Discover || op == DhcpOp::Request;
    }
    bool operator==(const DhcpMessage&) const = default;
};

enum class ArpOp : std::uint8_t { Request = 1, Response };

struct ArpMessage {
    ArpOp op = ArpOp::Request;
    Ipv4 sender_ip = 0;
    Ipv4 target_ip = 0;
    MacAddr sender_mac = 0;

    bool operator==(const ArpMessage&) const = default;
};

enum class IgmpOp : std::uint8_t { Join = 1, Leave, MembershipQuery };

struct IgmpMessage {
    IgmpOp op = IgmpOp::Join;
    Ipv4 group_ip = ipv4(224, 0, 0, 1);

    bool operator==(const IgmpMessage&) const = default;
};

enum class IcmpOp : std::uint8_t { EchoRequest = 1, EchoReply };

struct IcmpMessage {
    IcmpOp op = IcmpOp::EchoRequest;
    std::uint16_t ident = 0;
    std::uint16_t seq = 0;

    bool operator==(const IcmpMessage&) const = default;
};

// SSH key-exchange initiation and management-page fetches are modeled as
// opaque control requests with a CPU cost class, not as wire bytes.
enum class ControlKind : std::uint8_t { SshKexInit = 1, SshAbort, HttpGet };
enum class CostClass : std::uint8_t { Heavy, Light };

struct ControlRequest {
    ControlKind kind = ControlKind::HttpGet;
    CostClass cost_class = CostClass::Light;

    bool operator==(const ControlRequest&) const = default;
};

struct ControlReply {
    ControlKind replies_to = ControlKind::HttpGet;

    bool operator==(const ControlReply&) const = default;
};

using ProtocolMessage = std::variant<DhcpMessage, ArpMessage, IgmpMessage,
                                     IcmpMessage, ControlRequest, ControlReply>;

enum class Proto { Dhcp, Arp, Igmp, Icmp, Control, ControlReplyTag };

Proto proto_of(const ProtocolMessage& msg);
const char* proto_name(Proto p);

struct Frame {
    MacAddr src_mac = 0;
    MacAddr dst_mac = 0;
    ProtocolMessage payload;
    std::uint32_t size_bytes = 0;  // link-layer size, for rate accounting

    bool is_broadcast() const { return dst_mac == kBroadcastMac; }
};

// ---------------------------------------------------------------------------
// Errors

struct PacketError : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct InvariantViolation : PacketError {
    using PacketError::PacketError;
};
struct TruncatedMessage : PacketError {
    using PacketError::PacketError;
};
struct MalformedField : PacketError {
    using PacketError::PacketError;
};

// ---------------------------------------------------------------------------
// Wire format
//
// Fixed layouts, all multi-byte fields big-endian:
//   DHCP: op:1  xid:4  client_mac:6  requested_ip:4  src_ip:4  dst_ip:4   (23)
//   ARP:  op:1  sender_ip:4  target_ip:4  sender_mac:6                    (15)
//   IGMP: op:1  group_ip:4                                                (5)
//   ICMP: op:1  ident:2  seq:2                                            (5)
// Control requests/replies are cost models, not wire protocols, and do not
// serialize.

constexpr std::size_t kDhcpWireSize = 23;
constexpr std::size_t kArpWireSize = 15;
constexpr std::size_t kIgmpWireSize = 5;
constexpr std::size_t kIcmpWireSize = 5;

std::size_t min_wire_size(Proto p);
std::uint32_t default_frame_bytes(Proto p);

// Throws InvariantViolation if the message breaks its own type invariants.
void validate(const ProtocolMessage& msg);

std::vector<std::uint8_t> serialize(const ProtocolMessage& msg);
ProtocolMessage parse(std::span<const std::uint8_t> bytes, Proto proto);

Frame make_frame(MacAddr src, MacAddr dst, ProtocolMessage msg);
void validate_frame(const Frame& frame);

}  // namespace crosstalk::packet
