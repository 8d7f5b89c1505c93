#include "crosstalk/profile.hpp"

#include "crosstalk/rng.hpp"

#include <fstream>
#include <sstream>

#include <json.hpp>

namespace crosstalk::sim {

using nlohmann::json;

const char* segment_name(SegmentId s) { return s == SegmentId::Host ? "host" : "guest"; }

const char* request_kind_name(RequestKind k) {
    switch (k) {
        case RequestKind::Arp: return "arp";
        case RequestKind::Icmp: return "icmp";
        case RequestKind::DhcpValid: return "dhcp";
        case RequestKind::DhcpNak: return "dhcp_nak";
        case RequestKind::IgmpQuery: return "igmp_query";
        case RequestKind::SshKex: return "ssh_kex";
        case RequestKind::Http: return "http";
    }
    return "?";
}

const char* channel_name(ChannelId c) {
    switch (c) {
        case ChannelId::DhcpDirect: return "dhcp-direct";
        case ChannelId::IgmpDirect: return "igmp-direct";
        case ChannelId::ArpDirect: return "arp-direct";
        case ChannelId::ArpArp: return "arp-arp";
        case ChannelId::ArpSsh: return "arp-ssh";
        case ChannelId::ArpCsrf: return "arp-csrf";
        case ChannelId::IcmpIcmp: return "icmp-icmp";
        case ChannelId::DhcpArp: return "dhcp-arp";
    }
    return "?";
}

ChannelId channel_from_name(const std::string& name) {
    for (ChannelId c : all_channels())
        if (name == channel_name(c)) return c;
    throw SchemaError("unknown channel name: " + name);
}

std::vector<ChannelId> all_channels() {
    return {ChannelId::ArpSsh,   ChannelId::ArpArp,     ChannelId::ArpCsrf,
            ChannelId::IcmpIcmp, ChannelId::DhcpArp,    ChannelId::DhcpDirect,
            ChannelId::IgmpDirect, ChannelId::ArpDirect};
}

bool RouterProfile::kind_enabled(RequestKind kind, SegmentId segment) const {
    switch (kind) {
        case RequestKind::Arp:
        case RequestKind::DhcpValid:
        case RequestKind::DhcpNak:
        case RequestKind::IgmpQuery:
            return true;
        case RequestKind::Icmp:
            return segment == SegmentId::Host || icmp_on_guest;
        case RequestKind::SshKex:
            return segment == SegmentId::Host && ssh_enabled_on_host;
        case RequestKind::Http:
            return segment == SegmentId::Host && web_ui_on_host;
    }
    return false;
}

std::uint64_t RouterProfile::service_us(RequestKind kind) const {
    auto it = service_time_us.find(kind);
    if (it == service_time_us.end())
        throw SchemaError(std::string("service_time_us.") + request_kind_name(kind) +
                          ": missing for enabled kind");
    return it->second;
}

std::uint32_t RouterProfile::capacity(RequestKind kind) const {
    auto it = queue_capacity.find(kind);
    return it == queue_capacity.end() ? 64 : it->second;
}

DirectionSupport RouterProfile::channel_support(ChannelId c) const {
    auto it = channels.find(c);
    return it == channels.end() ? DirectionSupport{} : it->second;
}

namespace {

constexpr std::uint64_t kDefaultCaps[kRequestKindCount] = {
    16,  // arp (tiny socket buffer on the slow path)
    64,  // icmp
    4,   // dhcp (lease handling)
    1,   // dhcp_nak (error path, no buffering)
    1,   // igmp_query (single pending query timer)
    4,   // ssh_kex
    16,  // http
};

std::string direction_string(DirectionSupport d) {
    if (d.guest_to_host && d.host_to_guest) return "both";
    if (d.guest_to_host) return "g2h";
    if (d.host_to_guest) return "h2g";
    return "none";
}

DirectionSupport direction_from_string(const std::string& s, const std::string& path) {
    if (s == "both") return {true, true};
    if (s == "g2h") return {true, false};
    if (s == "h2g") return {false, true};
    if (s == "none") return {false, false};
    throw SchemaError(path + ": expected one of none|g2h|h2g|both, got '" + s + "'");
}

ArpForwarding arp_forwarding_from_string(const std::string& s, const std::string& path) {
    if (s == "none") return ArpForwarding::None;
    if (s == "subnet_restricted") return ArpForwarding::SubnetRestricted;
    if (s == "unrestricted") return ArpForwarding::Unrestricted;
    throw SchemaError(path + ": expected none|subnet_restricted|unrestricted, got '" + s + "'");
}

const char* arp_forwarding_name(ArpForwarding f) {
    switch (f) {
        case ArpForwarding::None: return "none";
        case ArpForwarding::SubnetRestricted: return "subnet_restricted";
        case ArpForwarding::Unrestricted: return "unrestricted";
    }
    return "?";
}

template <typename T>
T require(const json& j, const std::string& path, const std::string& key) {
    if (!j.contains(key)) throw SchemaError(path + key + ": missing");
    try {
        return j.at(key).get<T>();
    } catch (const json::exception&) {
        throw SchemaError(path + key + ": wrong type");
    }
}

}  // namespace

std::string RouterProfile::to_json() const {
    json j;
    j["model_id"] = model_id;
    j["ssh_enabled_on_host"] = ssh_enabled_on_host;
    j["icmp_on_guest"] = icmp_on_guest;
    j["web_ui_on_host"] = web_ui_on_host;
    j["logs_dhcp"] = logs_dhcp;
    j["arp_broadcast_forwarding"] = arp_forwarding_name(arp_broadcast_forwarding);
    j["jitter_stddev_us"] = jitter_stddev_us;
    json svc;
    for (const auto& [k, v] : service_time_us) svc[request_kind_name(k)] = v;
    j["service_time_us"] = svc;
    json caps;
    for (const auto& [k, v] : queue_capacity) caps[request_kind_name(k)] = v;
    j["queue_capacity"] = caps;
    json ch;
    for (const auto& [c, d] : channels) ch[channel_name(c)] = direction_string(d);
    j["channels"] = ch;
    return j.dump();
}

std::uint64_t RouterProfile::hash() const { return hash_label(to_json()); }

RouterProfile load_profile(const std::string& json_text) {
    json j;
    try {
        j = json::parse(json_text);
    } catch (const json::exception& e) {
        throw SchemaError(std::string("profile: not valid json: ") + e.what());
    }
    if (!j.is_object()) throw SchemaError("profile: expected an object");

    RouterProfile p;
    p.model_id = require<std::string>(j, "", "model_id");
    p.ssh_enabled_on_host = require<bool>(j, "", "ssh_enabled_on_host");
    p.icmp_on_guest = require<bool>(j, "", "icmp_on_guest");
    p.web_ui_on_host = require<bool>(j, "", "web_ui_on_host");
    p.logs_dhcp = require<bool>(j, "", "logs_dhcp");
    p.arp_broadcast_forwarding = arp_forwarding_from_string(
        require<std::string>(j, "", "arp_broadcast_forwarding"), "arp_broadcast_forwarding");
    p.jitter_stddev_us = require<double>(j, "", "jitter_stddev_us");
    if (p.jitter_stddev_us < 0)
        throw SchemaError("jitter_stddev_us: must be non-negative");

    if (!j.contains("service_time_us")) throw SchemaError("service_time_us: missing");
    const json& svc = j.at("service_time_us");
    if (!svc.is_object()) throw SchemaError("service_time_us: expected a map");
    std::uint64_t dhcp_base = require<std::uint64_t>(svc, "service_time_us.", "dhcp");
    std::uint64_t dhcp_extra = svc.contains("dhcp_log_extra")
                                   ? svc.at("dhcp_log_extra").get<std::uint64_t>()
                                   : 0;
    std::uint64_t dhcp_total = dhcp_base + (p.logs_dhcp ? dhcp_extra : 0);
    p.service_time_us[RequestKind::Arp] = require<std::uint64_t>(svc, "service_time_us.", "arp");
    p.service_time_us[RequestKind::Icmp] = require<std::uint64_t>(svc, "service_time_us.", "icmp");
    p.service_time_us[RequestKind::DhcpValid] = dhcp_total;
    p.service_time_us[RequestKind::DhcpNak] = dhcp_total;
    p.service_time_us[RequestKind::IgmpQuery] =
        require<std::uint64_t>(svc, "service_time_us.", "igmp_query");
    if (p.ssh_enabled_on_host)
        p.service_time_us[RequestKind::SshKex] =
            require<std::uint64_t>(svc, "service_time_us.", "ssh_kex");
    else if (svc.contains("ssh_kex"))
        p.service_time_us[RequestKind::SshKex] = svc.at("ssh_kex").get<std::uint64_t>();
    if (p.web_ui_on_host)
        p.service_time_us[RequestKind::Http] = require<std::uint64_t>(svc, "service_time_us.", "http");
    else if (svc.contains("http"))
        p.service_time_us[RequestKind::Http] = svc.at("http").get<std::uint64_t>();

    // Heavy control requests must dominate light ones by at least 10x.
    if (p.service_time_us.contains(RequestKind::SshKex) &&
        p.service_time_us.contains(RequestKind::Http) &&
        p.service_time_us[RequestKind::SshKex] < 10 * p.service_time_us[RequestKind::Http])
        throw SchemaError("service_time_us.ssh_kex: heavy kind must be >= 10x http");

    for (int i = 0; i < kRequestKindCount; ++i) {
        auto k = static_cast<RequestKind>(i);
        p.queue_capacity[k] = static_cast<std::uint32_t>(kDefaultCaps[i]);
    }
    if (j.contains("queue_capacity")) {
        const json& caps = j.at("queue_capacity");
        if (!caps.is_object()) throw SchemaError("queue_capacity: expected a map");
        for (int i = 0; i < kRequestKindCount; ++i) {
            auto k = static_cast<RequestKind>(i);
            if (caps.contains(request_kind_name(k)))
                p.queue_capacity[k] = caps.at(request_kind_name(k)).get<std::uint32_t>();
        }
    }

    if (!j.contains("channels")) throw SchemaError("channels: missing");
    const json& ch = j.at("channels");
    if (!ch.is_object()) throw SchemaError("channels: expected a map");
    for (ChannelId c : all_channels()) {
        std::string key = channel_name(c);
        if (!ch.contains(key)) throw SchemaError("channels." + key + ": missing");
        p.channels[c] =
            direction_from_string(ch.at(key).get<std::string>(), "channels." + key);
    }

    p.dhcp_nak_broadcast_leak = p.channels[ChannelId::DhcpDirect].any();
    p.igmp_query_leak = p.channels[ChannelId::IgmpDirect].any();

    if (p.channels[ChannelId::ArpDirect].any() &&
        p.arp_broadcast_forwarding == ArpForwarding::None)
        throw SchemaError("channels.arp-direct: enabled but arp_broadcast_forwarding is none");
    if (p.channels[ChannelId::ArpSsh].guest_to_host && !p.ssh_enabled_on_host)
        throw SchemaError("channels.arp-ssh: g2h requires ssh_enabled_on_host");
    if (p.channels[ChannelId::IcmpIcmp].any() && !p.icmp_on_guest)
        throw SchemaError("channels.icmp-icmp: requires icmp_on_guest");

    return p;
}

RouterProfile load_profile_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw SchemaError("profile: cannot open " + path);
    std::stringstream ss;
    ss << in.rdbuf();
    return load_profile(ss.str());
}

namespace {

struct BuiltinRow {
    const char* id;
    bool ssh;        // ssh_enabled_on_host
    bool icmp_guest; // icmp_on_guest
    bool logs;       // logs_dhcp
    const char* arp_fwd;
    double jitter;
    // channel directions in all_channels() order:
    // arp-ssh, arp-arp, arp-csrf, icmp-icmp, dhcp-arp, dhcp-direct, igmp-direct, arp-direct
    const char* dirs[kChannelCount];
};

// Support matrix for the seven evaluated models.
constexpr BuiltinRow kBuiltins[] = {
    {"TP1", true,  false, true,  "subnet_restricted", 5.0,
     {"g2h", "both", "both", "none", "both", "h2g", "h2g", "h2g"}},
    {"TP2", true,  false, true,  "subnet_restricted", 5.0,
     {"g2h", "both", "g2h", "none", "both", "h2g", "h2g", "h2g"}},
    {"DL1", false, false, false, "none", 5.0,
     {"none", "none", "both", "none", "both", "none", "none", "none"}},
    {"DL2", false, false, true,  "unrestricted", 5.0,
     {"none", "both", "g2h", "none", "both", "both", "both", "both"}},
    {"ED1", false, true,  false, "none", 5.0,
     {"none", "h2g", "both", "both", "g2h", "none", "none", "none"}},
    {"ED2", false, false, true,  "unrestricted", 5.0,
     {"none", "both", "g2h", "none", "h2g", "both", "both", "both"}},
    {"LS1", false, true,  false, "none", 3.0,
     {"none", "both", "g2h", "both", "both", "none", "none", "none"}},
};

json builtin_json(const BuiltinRow& row) {
    json ch;
    auto channels = all_channels();
    for (std::size_t i = 0; i < channels.size(); ++i)
        ch[channel_name(channels[i])] = row.dirs[i];
    json j = {
        {"model_id", row.id},
        {"ssh_enabled_on_host", row.ssh},
        {"icmp_on_guest", row.icmp_guest},
        {"web_ui_on_host", true},
        {"logs_dhcp", row.logs},
        {"arp_broadcast_forwarding", row.arp_fwd},
        {"jitter_stddev_us", row.jitter},
        // Calibrated virtual-time cost model, frozen. dhcp_log_extra models
        // the log write that accompanies each DHCP transaction.
        {"service_time_us",
         {{"arp", 50},
          {"icmp", 200},
          {"dhcp", 3000},
          {"dhcp_log_extra", 6000},
          {"igmp_query", 165000},
          {"ssh_kex", 40000},
          {"http", 1000}}},
        {"channels", ch},
    };
    return j;
}

}  // namespace

RouterProfile builtin_profile(const std::string& model_id) {
    for (const auto& row : kBuiltins)
        if (model_id == row.id) return load_profile(builtin_json(row).dump());
    throw SchemaError("unknown builtin profile: " + model_id);
}

std::vector<std::string> builtin_profile_ids() {
    std::vector<std::string> ids;
    for (const auto& row : kBuiltins) ids.emplace_back(row.id);
    return ids;
}

bool is_builtin_profile(const std::string& model_id) {
    for (const auto& row : kBuiltins)
        if (model_id == row.id) return true;
    return false;
}

RouterProfile resolve_profile(const std::string& id_or_path) {
    if (is_builtin_profile(id_or_path)) return builtin_profile(id_or_path);
    return load_profile_file(id_or_path);
}

}  // namespace crosstalk::sim
