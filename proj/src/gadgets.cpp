#include "crosstalk/gadgets.hpp"

#include <cmath>
#include <ostream>

namespace crosstalk::gadgets {

using packet::Frame;
using sim::RequestKind;
using sim::RouterProfile;
using sim::Simulation;

const char* sender_kind_name(SenderKind k) {
    switch (k) {
        case SenderKind::ArpFlood: return "arp-flood";
        case SenderKind::DhcpRequestLoad: return "dhcp-request-load";
        case SenderKind::IcmpFlood: return "icmp-flood";
        case SenderKind::SshKexLoad: return "ssh-kex-load";
        case SenderKind::CsrfLoad: return "csrf-load";
    }
    return "?";
}

const char* receiver_kind_name(ReceiverKind k) {
    switch (k) {
        case ReceiverKind::ArpProbe: return "arp-probe";
        case ReceiverKind::IcmpProbe: return "icmp-probe";
        case ReceiverKind::DhcpProbe: return "dhcp-probe";
        case ReceiverKind::CsrfProbe: return "csrf-probe";
        case ReceiverKind::SshProbe: return "ssh-probe";
    }
    return "?";
}

RequestKind sender_request_kind(SenderKind k) {
    switch (k) {
        case SenderKind::ArpFlood: return RequestKind::Arp;
        case SenderKind::DhcpRequestLoad: return RequestKind::DhcpValid;
        case SenderKind::IcmpFlood: return RequestKind::Icmp;
        case SenderKind::SshKexLoad: return RequestKind::SshKex;
        case SenderKind::CsrfLoad: return RequestKind::Http;
    }
    return RequestKind::Arp;
}

RequestKind receiver_request_kind(ReceiverKind k) {
    switch (k) {
        case ReceiverKind::ArpProbe: return RequestKind::Arp;
        case ReceiverKind::IcmpProbe: return RequestKind::Icmp;
        case ReceiverKind::DhcpProbe: return RequestKind::DhcpValid;
        case ReceiverKind::CsrfProbe: return RequestKind::Http;
        case ReceiverKind::SshProbe: return RequestKind::SshKex;
    }
    return RequestKind::Arp;
}

TimeUs default_probe_interval_us(ReceiverKind k) {
    switch (k) {
        case ReceiverKind::ArpProbe: return 5000;
        case ReceiverKind::IcmpProbe: return 5000;
        case ReceiverKind::CsrfProbe: return 5000;
        case ReceiverKind::DhcpProbe: return 25000;
        case ReceiverKind::SshProbe: return 60000;  // key exchange is slow; do not self-queue
    }
    return 5000;
}

TimeUs timeout_clamp_us(const RouterProfile& profile, ReceiverKind k,
                        const detect::MitigationConfig& mitigation) {
    TimeUs idle = profile.service_us(receiver_request_kind(k));
    switch (mitigation.mode) {
        case detect::MitigationConfig::Mode::RandomDelay:
            idle += mitigation.max_delay_us / 2;
            break;
        case detect::MitigationConfig::Mode::TimeSlice:
            idle += mitigation.slice_us / 2;
            break;
        case detect::MitigationConfig::Mode::None:
            break;
    }
    return 10 * idle;
}

void check_sender(const RouterProfile& profile, const SenderGadget& g) {
    if (!profile.kind_enabled(sender_request_kind(g.kind), g.segment))
        throw GadgetUnavailable(std::string(sender_kind_name(g.kind)) + " unavailable on " +
                                segment_name(g.segment) + " for " + profile.model_id);
    if (g.rate_pps > kMasterRatePps)
        throw GadgetUnavailable("sender rate above master process rate");
}

void check_receiver(const RouterProfile& profile, const ReceiverGadget& g) {
    if (!profile.kind_enabled(receiver_request_kind(g.kind), g.segment))
        throw GadgetUnavailable(std::string(receiver_kind_name(g.kind)) + " unavailable on " +
                                segment_name(g.segment) + " for " + profile.model_id);
}

double TimingTrace::clamped_rtt(std::size_t i) const {
    const auto& r = records[i];
    if (r.timeout || !r.rtt_us) return static_cast<double>(timeout_clamp);
    return static_cast<double>(*r.rtt_us);
}

std::vector<double> TimingTrace::clamped_rtts() const {
    std::vector<double> out(records.size());
    for (std::size_t i = 0; i < records.size(); ++i) out[i] = clamped_rtt(i);
    return out;
}

std::vector<double> TimingTrace::clamped_rtts_between(TimeUs from, TimeUs to) const {
    std::vector<double> out;
    for (std::size_t i = 0; i < records.size(); ++i)
        if (records[i].send_us >= from && records[i].send_us < to)
            out.push_back(clamped_rtt(i));
    return out;
}

double TimingTrace::mean_rtt_us() const {
    if (records.empty()) return 0.0;
    double s = 0.0;
    for (std::size_t i = 0; i < records.size(); ++i) s += clamped_rtt(i);
    return s / static_cast<double>(records.size());
}

void TimingTrace::export_csv(std::ostream& os) const {
    os << "seq,send_us,rtt_us,timeout\n";
    for (const auto& r : records) {
        os << r.seq << ',' << r.send_us << ',';
        if (r.rtt_us) os << *r.rtt_us;
        os << ',' << (r.timeout ? 1 : 0) << '\n';
    }
}

namespace {

Frame build_load_frame(SenderKind kind, SegmentId seg, std::uint32_t n) {
    using namespace packet;
    MacAddr src = sim::station_mac(seg, 0);
    switch (kind) {
        case SenderKind::ArpFlood: {
            // Repeatedly resolve the router's own address.
            ArpMessage m;
            m.op = ArpOp::Request;
            m.sender_ip = sim::station_ip(seg, 0);
            m.target_ip = sim::router_ip(seg);
            m.sender_mac = src;
            return make_frame(src, kBroadcastMac, m);
        }
        case SenderKind::DhcpRequestLoad: {
            // Valid lease renewal; answered with an ACK.
            DhcpMessage m;
            m.op = DhcpOp::Request;
            m.xid = 0x4C000000u + n;
            m.client_mac = src;
            m.requested_ip = sim::station_ip(seg, 0);
            return make_frame(src, kBroadcastMac, m);
        }
        case SenderKind::IcmpFlood: {
            IcmpMessage m;
            m.op = IcmpOp::EchoRequest;
            m.ident = 0x10AD;
            m.seq = static_cast<std::uint16_t>(n);
            return make_frame(src, sim::router_mac(), m);
        }
        case SenderKind::SshKexLoad:
            return make_frame(src, sim::router_mac(),
                              ControlRequest{ControlKind::SshKexInit, CostClass::Heavy});
        case SenderKind::CsrfLoad:
            return make_frame(src, sim::router_mac(),
                              ControlRequest{ControlKind::HttpGet, CostClass::Light});
    }
    return Frame{};
}

// Poisson sender: walks the thinned master stream lazily, one queue entry at
// a time.
class SenderActor : public sim::Actor {
public:
    SenderActor(Simulation& s, SenderGadget g, TimeUs start, TimeUs end)
        : gadget_(g),
          end_(end),
          stream_(s.seed(), "sender-master",
                  (static_cast<std::uint64_t>(g.kind) << 1 | static_cast<std::uint64_t>(g.segment)) ^
                      splitmix64(start)),
          keep_prob_(g.rate_pps / kMasterRatePps),
          master_t_(static_cast<double>(start)) {
        if (advance()) s.schedule_actor(next_, this);
    }

    void fire(Simulation& s) override {
        s.deliver_now(gadget_.segment, build_load_frame(gadget_.kind, gadget_.segment, count_));
        if (gadget_.kind == SenderKind::SshKexLoad) {
            // Abort before the exchange concludes; leaves no log entry.
            SegmentId seg = gadget_.segment;
            s.schedule_fn(s.now() + 1000, [&s, seg] {
                s.deliver_now(seg, packet::make_frame(
                                       sim::station_mac(seg, 0), sim::router_mac(),
                                       packet::ControlRequest{packet::ControlKind::SshAbort,
                                                              packet::CostClass::Heavy}));
            });
        }
        ++count_;
        if (advance()) s.schedule_actor(next_, this);
    }

private:
    // Finds the next kept master point within the window.
    bool advance() {
        for (;;) {
            master_t_ += stream_.exponential(2 * idx_, 1e6 / kMasterRatePps);
            double keep = stream_.uniform(2 * idx_ + 1);
            ++idx_;
            if (master_t_ >= static_cast<double>(end_)) return false;
            if (keep < keep_prob_) {
                next_ = static_cast<TimeUs>(std::llround(master_t_));
                return true;
            }
        }
    }

    SenderGadget gadget_;
    TimeUs end_;
    SubStream stream_;
    double keep_prob_;
    double master_t_;
    std::uint64_t idx_ = 0;
    std::uint32_t count_ = 0;
    TimeUs next_ = 0;
};

Frame build_probe_frame(ReceiverKind kind, SegmentId seg, std::uint32_t n) {
    using namespace packet;
    MacAddr src = sim::station_mac(seg, 1);
    switch (kind) {
        case ReceiverKind::ArpProbe: {
            ArpMessage m;
            m.op = ArpOp::Request;
            m.sender_ip = sim::station_ip(seg, 1);
            m.target_ip = sim::router_ip(seg);
            m.sender_mac = src;
            return make_frame(src, kBroadcastMac, m);
        }
        case ReceiverKind::IcmpProbe: {
            IcmpMessage m;
            m.op = IcmpOp::EchoRequest;
            m.ident = 0x0B5E;
            m.seq = static_cast<std::uint16_t>(n);
            return make_frame(src, sim::router_mac(), m);
        }
        case ReceiverKind::DhcpProbe: {
            DhcpMessage m;
            m.op = DhcpOp::Request;
            m.xid = 0x0B000000u + n;
            m.client_mac = src;
            m.requested_ip = sim::station_ip(seg, 1);
            return make_frame(src, kBroadcastMac, m);
        }
        case ReceiverKind::CsrfProbe:
            return make_frame(src, sim::router_mac(),
                              ControlRequest{ControlKind::HttpGet, CostClass::Light});
        case ReceiverKind::SshProbe:
            return make_frame(src, sim::router_mac(),
                              ControlRequest{ControlKind::SshKexInit, CostClass::Heavy});
    }
    return Frame{};
}

class ReceiverActor : public sim::Actor {
public:
    ReceiverActor(Simulation& s, ReceiverGadget g, std::uint32_t n_probes, TimeUs start)
        : gadget_(g), dither_(s.seed(), "probe-dither",
                              static_cast<std::uint64_t>(g.kind) << 1 |
                                  static_cast<std::uint64_t>(g.segment)) {
        trace_.timeout_clamp = timeout_clamp_us(s.profile(), g.kind, s.router().mitigation());
        trace_.records.reserve(n_probes);
        // Probe pacing: nominal interval with +-10% uniform dither.
        TimeUs t = start;
        send_times_.reserve(n_probes);
        for (std::uint32_t i = 0; i < n_probes; ++i) {
            send_times_.push_back(t);
            double jittered =
                static_cast<double>(gadget_.probe_interval_us) * (0.9 + 0.2 * dither_.uniform(i));
            t += static_cast<TimeUs>(std::llround(jittered));
        }
        if (!send_times_.empty()) s.schedule_actor(send_times_[0], this);
    }

    void fire(Simulation& s) override {
        std::uint32_t i = static_cast<std::uint32_t>(trace_.records.size());
        auto emitted =
            s.deliver_now(gadget_.segment, build_probe_frame(gadget_.kind, gadget_.segment, i));
        ProbeRecord rec;
        rec.seq = i;
        rec.send_us = s.now();
        for (const auto& e : emitted) {
            if (!e.reaches(gadget_.segment)) continue;
            TimeUs rtt = e.time - s.now();
            if (rtt <= trace_.timeout_clamp) {
                rec.rtt_us = rtt;
            } else {
                rec.timeout = true;  // response exists but past the deadline
            }
            break;
        }
        if (!rec.rtt_us && !rec.timeout) rec.timeout = true;  // dropped by the router
        if (gadget_.kind == ReceiverKind::SshProbe) {
            SegmentId seg = gadget_.segment;
            s.schedule_fn(s.now() + 1000, [&s, seg] {
                s.deliver_now(seg, packet::make_frame(
                                       sim::station_mac(seg, 1), sim::router_mac(),
                                       packet::ControlRequest{packet::ControlKind::SshAbort,
                                                              packet::CostClass::Heavy}));
            });
        }
        trace_.records.push_back(rec);
        if (trace_.records.size() < send_times_.size())
            s.schedule_actor(send_times_[trace_.records.size()], this);
    }

    const TimingTrace& trace() const { return trace_; }
    TimeUs last_send() const { return send_times_.empty() ? 0 : send_times_.back(); }

private:
    ReceiverGadget gadget_;
    SubStream dither_;
    std::vector<TimeUs> send_times_;
    TimingTrace trace_;
};

ReceiverGadget with_default_interval(ReceiverGadget g) {
    if (g.probe_interval_us == 0) g.probe_interval_us = default_probe_interval_us(g.kind);
    return g;
}

}  // namespace

void run_sender(Simulation& s, const SenderGadget& g, TimeUs start, TimeUs duration) {
    check_sender(s.profile(), g);
    if (g.rate_pps <= 0.0 || duration == 0) return;
    s.adopt(std::make_unique<SenderActor>(s, g, start, start + duration));
}

const TimingTrace& schedule_receiver(Simulation& s, const ReceiverGadget& g,
                                     std::uint32_t n_probes, TimeUs start) {
    ReceiverGadget gd = with_default_interval(g);
    check_receiver(s.profile(), gd);
    if (n_probes == 0) throw GadgetUnavailable("receiver needs at least one probe");
    auto* actor = static_cast<ReceiverActor*>(
        s.adopt(std::make_unique<ReceiverActor>(s, gd, n_probes, start)));
    return actor->trace();
}

TimingTrace run_receiver(Simulation& s, const ReceiverGadget& g, std::uint32_t n_probes,
                         TimeUs start) {
    ReceiverGadget gd = with_default_interval(g);
    check_receiver(s.profile(), gd);
    if (n_probes == 0) throw GadgetUnavailable("receiver needs at least one probe");
    auto actor = std::make_unique<ReceiverActor>(s, gd, n_probes, start);
    s.run_until(actor->last_send());
    TimingTrace out = actor->trace();
    return out;
}

}  // namespace crosstalk::gadgets
