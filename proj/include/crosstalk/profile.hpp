#pragma once

#include <cstdint>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

namespace crosstalk::sim {

enum class SegmentId : std::uint8_t { Host = 0, Guest = 1 };

constexpr SegmentId other(SegmentId s) {
    return s == SegmentId::Host ? SegmentId::Guest : SegmentId::Host;
}
const char* segment_name(SegmentId s);

// Control-plane request classes. Invalid DHCP requests take the NAK path,
// which on real devices is a separate (and shallow) code path from lease
// handling, so it gets its own class and queue.
enum class RequestKind : std::uint8_t {
    Arp = 0,
    Icmp,
    DhcpValid,
    DhcpNak,
    IgmpQuery,
    SshKex,
    Http,
};
constexpr int kRequestKindCount = 7;
const char* request_kind_name(RequestKind k);

enum class ArpForwarding : std::uint8_t { None, SubnetRestricted, Unrestricted };

enum class ChannelId : std::uint8_t {
    DhcpDirect = 0,
    IgmpDirect,
    ArpDirect,
    ArpArp,
    ArpSsh,
    ArpCsrf,
    IcmpIcmp,
    DhcpArp,
};
constexpr int kChannelCount = 8;

const char* channel_name(ChannelId c);
ChannelId channel_from_name(const std::string& name);
std::vector<ChannelId> all_channels();

struct DirectionSupport {
    bool guest_to_host = false;
    bool host_to_guest = false;

    bool any() const { return guest_to_host || host_to_guest; }
    bool from(SegmentId sender) const {
        return sender == SegmentId::Guest ? guest_to_host : host_to_guest;
    }
    bool operator==(const DirectionSupport&) const = default;
};

struct SchemaError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// One column of the per-model vulnerability matrix plus the control-plane
// cost model. All times in virtual microseconds.
struct RouterProfile {
    std::string model_id;

    bool ssh_enabled_on_host = false;
    bool icmp_on_guest = false;
    bool web_ui_on_host = true;
    bool logs_dhcp = false;
    ArpForwarding arp_broadcast_forwarding = ArpForwarding::None;

    // Convenience flags, derived from the channel table at load time.
    bool dhcp_nak_broadcast_leak = false;
    bool igmp_query_leak = false;

    std::map<RequestKind, std::uint64_t> service_time_us;
    std::map<RequestKind, std::uint32_t> queue_capacity;
    double jitter_stddev_us = 0.0;

    std::map<ChannelId, DirectionSupport> channels;

    bool kind_enabled(RequestKind kind, SegmentId segment) const;
    std::uint64_t service_us(RequestKind kind) const;
    std::uint32_t capacity(RequestKind kind) const;
    DirectionSupport channel_support(ChannelId c) const;

    std::string to_json() const;   // canonical form, stable key order
    std::uint64_t hash() const;    // FNV-1a over to_json()
};

// Parses a profile document (JSON text). Unknown fields are rejected;
// missing required fields raise SchemaError naming the field path.
RouterProfile load_profile(const std::string& json_text);
RouterProfile load_profile_file(const std::string& path);

// The seven evaluated models (TP1, TP2, DL1, DL2, ED1, ED2, LS1).
RouterProfile builtin_profile(const std::string& model_id);
std::vector<std::string> builtin_profile_ids();
bool is_builtin_profile(const std::string& model_id);

// Resolves a --profile argument: builtin id first, then a file path.
RouterProfile resolve_profile(const std::string& id_or_path);

}  // namespace crosstalk::sim
