#include "crosstalk/packet.hpp"

#include "crosstalk/bytes.hpp"

#include <array>

namespace crosstalk::packet {

std::string ip_to_string(Ipv4 ip) {
    return std::to_string(ip >> 24) + "." + std::to_string((ip >> 16) & 0xFF) + "." +
           std::to_string((ip >> 8) & 0xFF) + "." + std::to_string(ip & 0xFF);
}

Proto proto_of(const ProtocolMessage& msg) {
    switch (msg.index()) {
        case 0: return Proto::Dhcp;
        case 1: return Proto::Arp;
        case 2: return Proto::Igmp;
        case 3: return Proto::Icmp;
        case 4: return Proto::Control;
        default: return Proto::ControlReplyTag;
    }
}

const char* proto_name(Proto p) {
    switch (p) {
        case Proto::Dhcp: return "dhcp";
        case Proto::Arp: return "arp";
        case Proto::Igmp: return "igmp";
        case Proto::Icmp: return "icmp";
        case Proto::Control: return "control";
        case Proto::ControlReplyTag: return "control-reply";
    }
    return "?";
}

std::size_t min_wire_size(Proto p) {
    switch (p) {
        case Proto::Dhcp: return kDhcpWireSize;
        case Proto::Arp: return kArpWireSize;
        case Proto::Igmp: return kIgmpWireSize;
        case Proto::Icmp: return kIcmpWireSize;
        default: return 0;
    }
}

std::uint32_t default_frame_bytes(Proto p) {
    // Nominal on-air sizes including lower-layer headers; used only for
    // per-window rate accounting.
    switch (p) {
        case Proto::Dhcp: return 300;
        case Proto::Arp: return 60;
        case Proto::Igmp: return 60;
        case Proto::Icmp: return 74;
        case Proto::Control: return 120;
        case Proto::ControlReplyTag: return 120;
    }
    return 60;
}

namespace {

constexpr MacAddr kMacMask = 0xFFFFFFFFFFFFULL;

void validate_dhcp(const DhcpMessage& m) {
    if ((m.client_mac & ~kMacMask) != 0)
        throw InvariantViolation("dhcp: client_mac wider than 48 bits");
    if (m.is_client_message()) {
        if (m.src_ip != kAnyIp)
            throw InvariantViolation("dhcp: client message must use src_ip 0.0.0.0");
        if (m.dst_ip != kBroadcastIp)
            throw InvariantViolation("dhcp: client message must use dst_ip 255.255.255.255");
    }
}

void validate_igmp(const IgmpMessage& m) {
    if (!is_multicast(m.group_ip))
        throw InvariantViolation("igmp: group_ip outside 224.0.0.0/4");
}

void validate_arp(const ArpMessage& m) {
    if ((m.sender_mac & ~kMacMask) != 0)
        throw InvariantViolation("arp: sender_mac wider than 48 bits");
}

void validate_control(const ControlRequest& m) {
    if (m.kind == ControlKind::SshKexInit && m.cost_class != CostClass::Heavy)
        throw InvariantViolation("control: ssh kex must be Heavy");
    if (m.kind == ControlKind::HttpGet && m.cost_class != CostClass::Light)
        throw InvariantViolation("control: http get must be Light");
}

}  // namespace

void validate(const ProtocolMessage& msg) {
    std::visit(
        [](const auto& m) {
            using T = std::decay_t<decltype(m)>;
            if constexpr (std::is_same_v<T, DhcpMessage>) validate_dhcp(m);
            else if constexpr (std::is_same_v<T, ArpMessage>) validate_arp(m);
            else if constexpr (std::is_same_v<T, IgmpMessage>) validate_igmp(m);
            else if constexpr (std::is_same_v<T, ControlRequest>) validate_control(m);
        },
        msg);
}

std::vector<std::uint8_t> serialize(const ProtocolMessage& msg) {
    validate(msg);
    ByteWriter w;
    switch (proto_of(msg)) {
        case Proto::Dhcp: {
            const auto& m = std::get<DhcpMessage>(msg);
            w.u8(static_cast<std::uint8_t>(m.op));
            w.u32(m.xid);
            w.u48(m.client_mac);
            w.u32(m.requested_ip.value_or(kAnyIp));
            w.u32(m.src_ip);
            w.u32(m.dst_ip);
            break;
        }
        case Proto::Arp: {
            const auto& m = std::get<ArpMessage>(msg);
            w.u8(static_cast<std::uint8_t>(m.op));
            w.u32(m.sender_ip);
            w.u32(m.target_ip);
            w.u48(m.sender_mac);
            break;
        }
        case Proto::Igmp: {
            const auto& m = std::get<IgmpMessage>(msg);
            w.u8(static_cast<std::uint8_t>(m.op));
            w.u32(m.group_ip);
            break;
        }
        case Proto::Icmp: {
            const auto& m = std::get<IcmpMessage>(msg);
            w.u8(static_cast<std::uint8_t>(m.op));
            w.u16(m.ident);
            w.u16(m.seq);
            break;
        }
        default:
            throw InvariantViolation("control requests have no wire format");
    }
    return w.take();
}

ProtocolMessage parse(std::span<const std::uint8_t> bytes, Proto proto) {
    if (bytes.size() < min_wire_size(proto))
        throw TruncatedMessage("message shorter than protocol minimum");
    ByteReader r(bytes);
    switch (proto) {
        case Proto::Dhcp: {
            DhcpMessage m;
            std::uint8_t op = r.u8();
            if (op < 1 || op > 5) throw MalformedField("dhcp: bad op");
            m.op = static_cast<DhcpOp>(op);
            m.xid = r.u32();
            m.client_mac = r.u48();
            Ipv4 req = r.u32();
            m.requested_ip = req == kAnyIp ? std::nullopt : std::optional<Ipv4>(req);
            m.src_ip = r.u32();
            m.dst_ip = r.u32();
            if (m.is_client_message() && (m.src_ip != kAnyIp || m.dst_ip != kBroadcastIp))
                throw MalformedField("dhcp: client message with unicast addressing");
            return m;
        }
        case Proto::Arp: {
            ArpMessage m;
            std::uint8_t op = r.u8();
            if (op < 1 || op > 2) throw MalformedField("arp: bad op");
            m.op = static_cast<ArpOp>(op);
            m.sender_ip = r.u32();
            m.target_ip = r.u32();
            m.sender_mac = r.u48();
            return m;
        }
        case Proto::Igmp: {
            IgmpMessage m;
            std::uint8_t op = r.u8();
            if (op < 1 || op > 3) throw MalformedField("igmp: bad op");
            m.op = static_cast<IgmpOp>(op);
            m.group_ip = r.u32();
            if (!is_multicast(m.group_ip)) throw MalformedField("igmp: group outside multicast range");
            return m;
        }
        case Proto::Icmp: {
            IcmpMessage m;
            std::uint8_t op = r.u8();
            if (op < 1 || op > 2) throw MalformedField("icmp: bad op");
            m.op = static_cast<IcmpOp>(op);
            m.ident = r.u16();
            m.seq = r.u16();
            return m;
        }
        default:
            throw MalformedField("control requests have no wire format");
    }
}

Frame make_frame(MacAddr src, MacAddr dst, ProtocolMessage msg) {
    Frame f;
    f.src_mac = src & kMacMask;
    f.dst_mac = dst & kMacMask;
    f.size_bytes = default_frame_bytes(proto_of(msg));
    f.payload = std::move(msg);
    return f;
}

void validate_frame(const Frame& frame) {
    validate(frame.payload);
    Proto p = proto_of(frame.payload);
    std::size_t wire = min_wire_size(p);
    if (frame.size_bytes < wire)
        throw InvariantViolation("frame size_bytes below protocol minimum");
    if (frame.is_broadcast()) {
        // Broadcast is legitimate for ARP requests, DHCP and IGMP only.
        bool ok = false;
        if (p == Proto::Arp) ok = std::get<ArpMessage>(frame.payload).op == ArpOp::Request;
        else if (p == Proto::Dhcp || p == Proto::Igmp) ok = true;
        if (!ok) throw InvariantViolation("broadcast dst_mac on a unicast-only protocol");
    }
}

}  // namespace crosstalk::packet
