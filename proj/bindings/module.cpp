#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "crosstalk/harness.hpp"

namespace py = pybind11;
using namespace crosstalk;

namespace {

packet::ProtocolMessage message_from_dict(const py::dict& d) {
    std::string proto = d["proto"].cast<std::string>();
    if (proto == "dhcp") {
        packet::DhcpMessage m;
        m.op = static_cast<packet::DhcpOp>(d["op"].cast<int>());
        m.xid = d["xid"].cast<std::uint32_t>();
        if (d.contains("client_mac")) m.client_mac = d["client_mac"].cast<std::uint64_t>();
        if (d.contains("requested_ip")) m.requested_ip = d["requested_ip"].cast<std::uint32_t>();
        if (d.contains("src_ip")) m.src_ip = d["src_ip"].cast<std::uint32_t>();
        if (d.contains("dst_ip")) m.dst_ip = d["dst_ip"].cast<std::uint32_t>();
        return m;
    }
    if (proto == "arp") {
        packet::ArpMessage m;
        m.op = static_cast<packet::ArpOp>(d["op"].cast<int>());
        m.sender_ip = d["sender_ip"].cast<std::uint32_t>();
        m.target_ip = d["target_ip"].cast<std::uint32_t>();
        if (d.contains("sender_mac")) m.sender_mac = d["sender_mac"].cast<std::uint64_t>();
        return m;
    }
    if (proto == "igmp") {
        packet::IgmpMessage m;
        m.op = static_cast<packet::IgmpOp>(d["op"].cast<int>());
        m.group_ip = d["group_ip"].cast<std::uint32_t>();
        return m;
    }
    if (proto == "icmp") {
        packet::IcmpMessage m;
        m.op = static_cast<packet::IcmpOp>(d["op"].cast<int>());
        m.ident = d["ident"].cast<std::uint16_t>();
        m.seq = d["seq"].cast<std::uint16_t>();
        return m;
    }
    throw std::invalid_argument("unknown proto: " + proto);
}

py::dict message_to_dict(const packet::ProtocolMessage& msg) {
    py::dict d;
    using namespace packet;
    switch (proto_of(msg)) {
        case Proto::Dhcp: {
            const auto& m = std::get<DhcpMessage>(msg);
            d["proto"] = "dhcp";
            d["op"] = static_cast<int>(m.op);
            d["xid"] = m.xid;
            d["client_mac"] = m.client_mac;
            if (m.requested_ip) d["requested_ip"] = *m.requested_ip;
            d["src_ip"] = m.src_ip;
            d["dst_ip"] = m.dst_ip;
            break;
        }
        case Proto::Arp: {
            const auto& m = std::get<ArpMessage>(msg);
            d["proto"] = "arp";
            d["op"] = static_cast<int>(m.op);
            d["sender_ip"] = m.sender_ip;
            d["target_ip"] = m.target_ip;
            d["sender_mac"] = m.sender_mac;
            break;
        }
        case Proto::Igmp: {
            const auto& m = std::get<IgmpMessage>(msg);
            d["proto"] = "igmp";
            d["op"] = static_cast<int>(m.op);
            d["group_ip"] = m.group_ip;
            break;
        }
        case Proto::Icmp: {
            const auto& m = std::get<IcmpMessage>(msg);
            d["proto"] = "icmp";
            d["op"] = static_cast<int>(m.op);
            d["ident"] = m.ident;
            d["seq"] = m.seq;
            break;
        }
        default:
            throw std::invalid_argument("control requests have no wire form");
    }
    return d;
}

packet::Proto proto_from_name(const std::string& name) {
    if (name == "dhcp") return packet::Proto::Dhcp;
    if (name == "arp") return packet::Proto::Arp;
    if (name == "igmp") return packet::Proto::Igmp;
    if (name == "icmp") return packet::Proto::Icmp;
    throw std::invalid_argument("unknown proto: " + name);
}

}  // namespace

PYBIND11_MODULE(_crosstalk, m) {
    m.doc() = "Router host/guest isolation test bench";
    m.attr("__version__") = harness::kVersion;

    m.def("builtin_profiles", &sim::builtin_profile_ids);
    m.def("channels", [] {
        std::vector<std::string> out;
        for (auto c : sim::all_channels()) out.emplace_back(sim::channel_name(c));
        return out;
    });
    m.def("profile_json", [](const std::string& id) { return sim::builtin_profile(id).to_json(); });

    m.def(
        "serialize",
        [](const py::dict& message) {
            auto bytes = packet::serialize(message_from_dict(message));
            return py::bytes(reinterpret_cast<const char*>(bytes.data()), bytes.size());
        },
        py::arg("message"));
    m.def(
        "parse",
        [](const py::bytes& data, const std::string& proto) {
            std::string s = data;
            std::span<const std::uint8_t> view(reinterpret_cast<const std::uint8_t*>(s.data()),
                                               s.size());
            return message_to_dict(packet::parse(view, proto_from_name(proto)));
        },
        py::arg("data"), py::arg("proto"));

    m.def(
        "t_test",
        [](const std::vector<double>& a, const std::vector<double>& b) {
            auto r = detect::t_test(a, b);
            py::dict d;
            d["t"] = r.t_stat;
            d["dof"] = r.dof;
            d["p"] = r.p_value;
            d["mean_a"] = r.mean_a;
            d["mean_b"] = r.mean_b;
            return d;
        },
        py::arg("a"), py::arg("b"));

    m.def(
        "transfer",
        [](const std::string& channel, const std::string& profile, const py::bytes& payload,
           double rate_bps, std::uint64_t seed) {
            auto prof = sim::resolve_profile(profile);
            auto id = sim::channel_from_name(channel);
            std::string s = payload;
            std::vector<std::uint8_t> bytes(s.begin(), s.end());
            auto res = channels::transfer(id, harness::pick_sender_segment(id, prof), prof,
                                          bytes, rate_bps, seed);
            py::dict d;
            d["decoded"] = py::bytes(reinterpret_cast<const char*>(res.decoded.data()),
                                     res.decoded.size());
            d["ber"] = res.ber;
            d["crc_ok"] = res.crc_ok;
            d["elapsed_us"] = res.elapsed_us;
            return d;
        },
        py::arg("channel"), py::arg("profile"), py::arg("payload"), py::arg("rate_bps") = 0.0,
        py::arg("seed") = 1);

    m.def(
        "matrix",
        [](std::uint64_t seed, std::uint32_t probes) {
            auto result = harness::cmd_matrix(seed, probes);
            py::dict d;
            for (const auto& cell : result.cells) {
                py::tuple key = py::make_tuple(sim::channel_name(cell.channel), cell.profile);
                std::string v = cell.observed.guest_to_host && cell.observed.host_to_guest
                                    ? "both"
                                    : cell.observed.guest_to_host
                                          ? "g2h"
                                          : cell.observed.host_to_guest ? "h2g" : "none";
                d[key] = v;
            }
            return d;
        },
        py::arg("seed") = 1, py::arg("probes") = 300);

    m.def(
        "ber_sweep",
        [](const std::string& channel, const std::string& profile, std::vector<double> rates,
           std::size_t payload_bytes, std::uint64_t seed, int seeds) {
            auto prof = sim::resolve_profile(profile);
            auto res = harness::cmd_ber_sweep(sim::channel_from_name(channel), prof,
                                              std::move(rates), payload_bytes, seed, seeds);
            std::vector<std::pair<double, double>> out;
            for (const auto& p : res.sweep) out.emplace_back(p.rate_bps, p.ber);
            return out;
        },
        py::arg("channel"), py::arg("profile"), py::arg("rates"), py::arg("payload_bytes") = 64,
        py::arg("seed") = 1, py::arg("seeds") = 3);

    m.def(
        "timing_histogram",
        [](const std::string& channel, const std::string& profile, std::vector<double> loads,
           std::uint32_t n, std::uint64_t seed) {
            auto prof = sim::resolve_profile(profile);
            auto res = harness::cmd_timing_histogram(sim::channel_from_name(channel), prof,
                                                     std::move(loads), n, seed);
            py::list rows;
            for (const auto& r : res.rows) {
                py::dict d;
                d["load_pps"] = r.load_pps;
                d["mean_us"] = r.mean_us;
                d["stddev_us"] = r.stddev_us;
                if (r.p_vs_idle) d["p_vs_idle"] = *r.p_vs_idle;
                rows.append(d);
            }
            return rows;
        },
        py::arg("channel"), py::arg("profile"), py::arg("loads"), py::arg("n") = 1000,
        py::arg("seed") = 1);

    m.def(
        "quality",
        [](std::uint64_t seed) {
            auto res = harness::cmd_quality(seed);
            py::list rows;
            for (const auto& r : res.rows) {
                py::dict d;
                d["channel"] = r.channel;
                d["pervasiveness"] = r.pervasiveness;
                d["rate_bps"] = r.rate_bps;
                d["covertness"] = r.covertness;
                rows.append(d);
            }
            return rows;
        },
        py::arg("seed") = 1);
}
