#include "crosstalk/sim.hpp"

#include <algorithm>
#include <cmath>
#include <ostream>
#include <sstream>

namespace crosstalk::sim {

using packet::Frame;
using packet::Ipv4;
using packet::MacAddr;
using packet::Proto;

// ---------------------------------------------------------------------------
// Addressing

Ipv4 segment_subnet(SegmentId s) {
    return s == SegmentId::Host ? packet::ipv4(192, 168, 1, 0) : packet::ipv4(192, 168, 2, 0);
}

Ipv4 router_ip(SegmentId s) { return segment_subnet(s) | 1; }

MacAddr router_mac() { return 0x020000000001ULL; }

MacAddr station_mac(SegmentId s, std::uint16_t index) {
    return 0x02AA00000000ULL | (static_cast<MacAddr>(s == SegmentId::Host ? 1 : 2) << 16) |
           index;
}

Ipv4 station_ip(SegmentId s, std::uint16_t index) {
    return segment_subnet(s) | (100 + index % 100);
}

bool in_subnet(SegmentId s, Ipv4 ip) { return (ip & 0xFFFFFF00) == segment_subnet(s); }

bool in_dhcp_pool(SegmentId s, Ipv4 ip) {
    if (!in_subnet(s, ip)) return false;
    std::uint32_t low = ip & 0xFF;
    return low >= 100 && low <= 199;
}

// ---------------------------------------------------------------------------
// Trace formatting

namespace {

std::string hex32(std::uint32_t v) {
    char buf[11];
    std::snprintf(buf, sizeof buf, "0x%08X", v);
    return buf;
}

std::string summarize(const packet::ProtocolMessage& msg) {
    using namespace packet;
    switch (proto_of(msg)) {
        case Proto::Dhcp: {
            const auto& m = std::get<DhcpMessage>(msg);
            const char* ops[] = {"?", "discover", "offer", "request", "ack", "nak"};
            return std::string("op=") + ops[static_cast<int>(m.op)] + ",xid=" + hex32(m.xid);
        }
        case Proto::Arp: {
            const auto& m = std::get<ArpMessage>(msg);
            return std::string("op=") + (m.op == ArpOp::Request ? "request" : "response") +
                   ",target=" + ip_to_string(m.target_ip);
        }
        case Proto::Igmp: {
            const auto& m = std::get<IgmpMessage>(msg);
            const char* ops[] = {"?", "join", "leave", "query"};
            return std::string("op=") + ops[static_cast<int>(m.op)] +
                   ",group=" + ip_to_string(m.group_ip);
        }
        case Proto::Icmp: {
            const auto& m = std::get<IcmpMessage>(msg);
            return std::string("op=") + (m.op == IcmpOp::EchoRequest ? "echo-req" : "echo-rep") +
                   ",seq=" + std::to_string(m.seq);
        }
        case Proto::Control: {
            const auto& m = std::get<ControlRequest>(msg);
            const char* kinds[] = {"?", "ssh-kex", "ssh-abort", "http-get"};
            return std::string("kind=") + kinds[static_cast<int>(m.kind)];
        }
        case Proto::ControlReplyTag: {
            const auto& m = std::get<ControlReply>(msg);
            const char* kinds[] = {"?", "ssh-kex", "ssh-abort", "http-get"};
            return std::string("kind=") + kinds[static_cast<int>(m.replies_to)];
        }
    }
    return "";
}

}  // namespace

std::string format_trace_record(const TraceRecord& r) {
    std::string line = std::to_string(r.time_us);
    line += ' ';
    line += segment_name(r.segment);
    line += ' ';
    line += r.direction == TraceRecord::Dir::In ? "in" : "out";
    line += ' ';
    line += packet::proto_name(r.proto);
    line += ' ';
    line += r.summary;
    return line;
}

// ---------------------------------------------------------------------------
// ControlPlane

ControlPlane::ControlPlane(const RouterProfile* profile, std::uint64_t seed)
    : profile_(profile), delay_stream_(seed, "mitigation-delay") {
    for (int k = 0; k < kRequestKindCount; ++k)
        for (int s = 0; s < 2; ++s)
            jitter_stream_[k][s] = SubStream(seed, "jitter", static_cast<std::uint64_t>(k) * 2 + s);
}

void ControlPlane::drain(RequestKind kind, SegmentId segment, TimeUs now) {
    auto& q = in_flight_[static_cast<int>(kind)][static_cast<int>(segment)];
    auto& n = pending_[static_cast<int>(kind)][static_cast<int>(segment)];
    while (!q.empty() && q.top() <= now) {
        q.pop();
        --n;
    }
}

TimeUs ControlPlane::service_duration(RequestKind kind, SegmentId segment) {
    int k = static_cast<int>(kind);
    int s = static_cast<int>(segment);
    double base = static_cast<double>(profile_->service_us(kind));
    double noise = jitter_stream_[k][s].normal(jitter_index_[k][s]++) * profile_->jitter_stddev_us;
    double total = base + noise;
    if (total < 0) total = 0;
    return static_cast<TimeUs>(std::llround(total));
}

TimeUs ControlPlane::slice_aligned_start(SegmentId segment, TimeUs at, TimeUs duration) const {
    TimeUs slice = mitigation_.slice_us;
    TimeUs period = 2 * slice;
    TimeUs lo = segment == SegmentId::Host ? 0 : slice;
    TimeUs t = at;
    for (;;) {
        TimeUs pos = t % period;
        if (pos < lo) {
            t += lo - pos;
            continue;
        }
        if (pos >= lo + slice) {
            t += period - pos + lo;
            continue;
        }
        // Inside own slice; require room for the full service, unless the
        // service can never fit in any slice.
        if (duration >= slice || pos + duration <= lo + slice) return t;
        t += lo + slice - pos;
    }
}

std::optional<TimeUs> ControlPlane::admit(RequestKind kind, SegmentId segment, TimeUs now) {
    int k = static_cast<int>(kind);
    int g = static_cast<int>(segment);
    drain(kind, segment, now);
    if (pending_[k][g] >= profile_->capacity(kind)) {
        ++dropped_;
        return std::nullopt;
    }

    TimeUs dur = service_duration(kind, segment);
    TimeUs service_done;
    if (mitigation_.mode == detect::MitigationConfig::Mode::TimeSlice) {
        TimeUs base = std::max(now, segment_busy_[static_cast<int>(segment)]);
        TimeUs start = slice_aligned_start(segment, base, dur);
        service_done = start + dur;
        segment_busy_[static_cast<int>(segment)] = service_done;
    } else {
        TimeUs start = std::max(now, busy_until_);
        service_done = start + dur;
        busy_until_ = service_done;
    }
    // The input slot frees when service completes; the random egress delay
    // only postpones the emission.
    TimeUs emission = service_done;
    if (mitigation_.mode == detect::MitigationConfig::Mode::RandomDelay) {
        double u = delay_stream_.uniform(delay_index_++);
        emission +=
            static_cast<TimeUs>(std::llround(u * static_cast<double>(mitigation_.max_delay_us)));
    }

    ++pending_[k][g];
    in_flight_[k][g].push(service_done);
    ++admitted_;
    return emission;
}

std::uint32_t ControlPlane::pending(RequestKind kind, SegmentId segment, TimeUs now) {
    drain(kind, segment, now);
    return pending_[static_cast<int>(kind)][static_cast<int>(segment)];
}

// ---------------------------------------------------------------------------
// Router

Router::Router(Simulation* sim, const RouterProfile* profile, std::uint64_t seed)
    : sim_(sim), profile_(profile), control_(profile, seed) {}

std::optional<TimeUs> Router::service_response_time(RequestKind kind, SegmentId segment,
                                                    TimeUs t) {
    if (!profile_->kind_enabled(kind, segment))
        throw DisabledService(std::string(request_kind_name(kind)) + " not served on " +
                              segment_name(segment));
    auto done = control_.admit(kind, segment, t);
    if (!done) return std::nullopt;
    return *done - t;
}

std::optional<EmittedFrame> Router::respond(RequestKind kind, SegmentId ingress, TimeUs t,
                                            EmittedFrame::Dest dest, packet::Frame response) {
    auto done = control_.admit(kind, ingress, t);
    if (!done) return std::nullopt;
    EmittedFrame e{dest, std::move(response), *done};
    sim_->queue_emission(e);
    return e;
}

std::vector<EmittedFrame> Router::handle_frame(SegmentId ingress, const packet::Frame& frame,
                                               TimeUs t) {
    std::vector<EmittedFrame> out;
    switch (packet::proto_of(frame.payload)) {
        case Proto::Dhcp: handle_dhcp(ingress, frame, t, out); break;
        case Proto::Arp: handle_arp(ingress, frame, t, out); break;
        case Proto::Igmp: handle_igmp(ingress, frame, t, out); break;
        case Proto::Icmp: handle_icmp(ingress, frame, t, out); break;
        case Proto::Control: handle_control(ingress, frame, t, out); break;
        default: break;  // replies arriving at the router are dropped
    }
    return out;
}

void Router::handle_dhcp(SegmentId ingress, const packet::Frame& frame, TimeUs t,
                         std::vector<EmittedFrame>& out) {
    const auto& m = std::get<packet::DhcpMessage>(frame.payload);
    using packet::DhcpOp;

    auto server_reply = [&](DhcpOp op) {
        packet::DhcpMessage r;
        r.op = op;
        r.xid = m.xid;
        r.client_mac = m.client_mac;
        r.src_ip = router_ip(ingress);
        r.dst_ip = packet::kBroadcastIp;
        return r;
    };

    switch (m.op) {
        case DhcpOp::Discover: {
            auto reply = packet::make_frame(router_mac(), frame.src_mac, server_reply(DhcpOp::Offer));
            if (auto e = respond(RequestKind::DhcpValid, ingress, t, EmittedFrame::Dest(ingress),
                                 std::move(reply)))
                out.push_back(*e);
            break;
        }
        case DhcpOp::Request: {
            bool valid = !m.requested_ip || in_dhcp_pool(ingress, *m.requested_ip);
            if (valid) {
                auto reply =
                    packet::make_frame(router_mac(), frame.src_mac, server_reply(DhcpOp::Ack));
                if (auto e = respond(RequestKind::DhcpValid, ingress, t,
                                     EmittedFrame::Dest(ingress), std::move(reply)))
                    out.push_back(*e);
            } else {
                // Invalid requested address: NAK. On leaky models the NAK is
                // broadcast into both segments, carrying the client's xid.
                bool leak = profile_->channel_support(ChannelId::DhcpDirect).from(ingress);
                auto dest = leak ? EmittedFrame::Dest::Both : EmittedFrame::Dest(ingress);
                auto reply = packet::make_frame(router_mac(), packet::kBroadcastMac,
                                                server_reply(DhcpOp::Nak));
                if (auto e = respond(RequestKind::DhcpNak, ingress, t, dest, std::move(reply)))
                    out.push_back(*e);
            }
            break;
        }
        default:
            break;  // server messages arriving at the router are dropped
    }
}

void Router::handle_arp(SegmentId ingress, const packet::Frame& frame, TimeUs t,
                        std::vector<EmittedFrame>& out) {
    const auto& m = std::get<packet::ArpMessage>(frame.payload);
    if (m.op != packet::ArpOp::Request || !frame.is_broadcast()) return;

    if (m.target_ip == router_ip(ingress)) {
        packet::ArpMessage r;
        r.op = packet::ArpOp::Response;
        r.sender_ip = router_ip(ingress);
        r.target_ip = m.sender_ip;
        r.sender_mac = router_mac();
        auto reply = packet::make_frame(router_mac(), frame.src_mac, r);
        if (auto e = respond(RequestKind::Arp, ingress, t, EmittedFrame::Dest(ingress),
                             std::move(reply)))
            out.push_back(*e);
        return;
    }

    // Broadcast ARP for some other station. Leaky bridge code forwards these
    // into the opposite segment, possibly restricted to its subnet.
    if (profile_->arp_broadcast_forwarding == ArpForwarding::None) return;
    if (!profile_->channel_support(ChannelId::ArpDirect).from(ingress)) return;
    SegmentId dst_seg = other(ingress);
    if (profile_->arp_broadcast_forwarding == ArpForwarding::SubnetRestricted &&
        !in_subnet(dst_seg, m.target_ip))
        return;
    packet::Frame copy = frame;
    if (auto e = respond(RequestKind::Arp, ingress, t, EmittedFrame::Dest(dst_seg),
                         std::move(copy)))
        out.push_back(*e);
}

void Router::handle_igmp(SegmentId ingress, const packet::Frame& frame, TimeUs t,
                         std::vector<EmittedFrame>& out) {
    const auto& m = std::get<packet::IgmpMessage>(frame.payload);
    auto key = std::make_pair(ingress, m.group_ip);
    switch (m.op) {
        case packet::IgmpOp::Join:
            ++igmp_members_[key];
            break;
        case packet::IgmpOp::Leave: {
            auto it = igmp_members_.find(key);
            if (it == igmp_members_.end()) break;
            if (--it->second > 0) break;
            igmp_members_.erase(it);
            // Last member left: schedule the group membership query. On
            // leaky models the query goes out both segments.
            bool leak = profile_->channel_support(ChannelId::IgmpDirect).from(ingress);
            auto dest = leak ? EmittedFrame::Dest::Both : EmittedFrame::Dest(ingress);
            packet::IgmpMessage q;
            q.op = packet::IgmpOp::MembershipQuery;
            q.group_ip = m.group_ip;
            auto query = packet::make_frame(router_mac(), packet::kBroadcastMac, q);
            if (auto e = respond(RequestKind::IgmpQuery, ingress, t, dest, std::move(query)))
                out.push_back(*e);
            break;
        }
        default:
            break;  // queries arriving at the router are dropped
    }
}

void Router::handle_icmp(SegmentId ingress, const packet::Frame& frame, TimeUs t,
                         std::vector<EmittedFrame>& out) {
    const auto& m = std::get<packet::IcmpMessage>(frame.payload);
    if (m.op != packet::IcmpOp::EchoRequest) return;
    if (!profile_->kind_enabled(RequestKind::Icmp, ingress)) return;
    packet::IcmpMessage r;
    r.op = packet::IcmpOp::EchoReply;
    r.ident = m.ident;
    r.seq = m.seq;
    auto reply = packet::make_frame(router_mac(), frame.src_mac, r);
    if (auto e = respond(RequestKind::Icmp, ingress, t, EmittedFrame::Dest(ingress),
                         std::move(reply)))
        out.push_back(*e);
}

void Router::handle_control(SegmentId ingress, const packet::Frame& frame, TimeUs t,
                            std::vector<EmittedFrame>& out) {
    const auto& m = std::get<packet::ControlRequest>(frame.payload);
    using packet::ControlKind;
    RequestKind kind = RequestKind::Http;
    switch (m.kind) {
        case ControlKind::SshKexInit: kind = RequestKind::SshKex; break;
        case ControlKind::HttpGet: kind = RequestKind::Http; break;
        case ControlKind::SshAbort: return;  // tears down state, no reply
    }
    if (!profile_->kind_enabled(kind, ingress)) return;
    auto reply = packet::make_frame(router_mac(), frame.src_mac,
                                    packet::ControlReply{m.kind});
    if (auto e = respond(kind, ingress, t, EmittedFrame::Dest(ingress), std::move(reply)))
        out.push_back(*e);
}

// ---------------------------------------------------------------------------
// Simulation

Simulation::Simulation(RouterProfile profile, std::uint64_t seed, SimOptions options)
    : profile_(std::move(profile)), seed_(seed), options_(options) {
    router_ = std::make_unique<Router>(this, &profile_, seed);
}

void Simulation::push_event(TimeUs t,
                            std::variant<FrameDeliveryEv, EmissionEv, ActorEv, FnEv> body) {
    if (t < now_)
        throw PastEvent("event at t=" + std::to_string(t) + " before now=" +
                        std::to_string(now_));
    queue_.push(Event{t, next_seq_++, std::move(body)});
}

void Simulation::schedule_fn(TimeUs t, std::function<void()> fn) {
    push_event(t, FnEv{std::move(fn)});
}

void Simulation::schedule_actor(TimeUs t, Actor* actor) { push_event(t, ActorEv{actor}); }

void Simulation::schedule_delivery(TimeUs t, SegmentId segment, packet::Frame frame) {
    push_event(t, FrameDeliveryEv{segment, std::move(frame)});
}

std::vector<EmittedFrame> Simulation::deliver_now(SegmentId segment, const packet::Frame& frame) {
    log_arrival(segment, frame, now_, "");
    return router_->handle_frame(segment, frame, now_);
}

Actor* Simulation::adopt(std::unique_ptr<Actor> actor) {
    actors_.push_back(std::move(actor));
    return actors_.back().get();
}

void Simulation::dispatch(Event& ev) {
    now_ = ev.time;
    if (auto* d = std::get_if<FrameDeliveryEv>(&ev.body)) {
        deliver_now(d->segment, d->frame);
    } else if (auto* e = std::get_if<EmissionEv>(&ev.body)) {
        record_emission(e->emitted);
    } else if (auto* a = std::get_if<ActorEv>(&ev.body)) {
        a->actor->fire(*this);
    } else if (auto* f = std::get_if<FnEv>(&ev.body)) {
        f->fn();
    }
}

void Simulation::run_until_idle() {
    while (!queue_.empty()) {
        Event ev = std::move(const_cast<Event&>(queue_.top()));
        queue_.pop();
        dispatch(ev);
    }
}

void Simulation::run_until(TimeUs t) {
    while (!queue_.empty() && queue_.top().time <= t) {
        Event ev = std::move(const_cast<Event&>(queue_.top()));
        queue_.pop();
        dispatch(ev);
    }
    now_ = std::max(now_, t);
}

namespace {

bool is_carrier(const packet::Frame& frame) {
    using namespace packet;
    switch (proto_of(frame.payload)) {
        case Proto::Dhcp: return std::get<DhcpMessage>(frame.payload).op == DhcpOp::Nak;
        case Proto::Igmp:
            return std::get<IgmpMessage>(frame.payload).op == IgmpOp::MembershipQuery;
        case Proto::Arp:
            return std::get<ArpMessage>(frame.payload).op == ArpOp::Request;
        default: return false;
    }
}

}  // namespace

void Simulation::queue_emission(const EmittedFrame& e) {
    bool keep = options_.emission_log == EmissionLog::All ||
                (options_.emission_log == EmissionLog::Carriers && is_carrier(e.frame));
    if (!keep && !options_.record_trace) return;
    push_event(e.time, EmissionEv{e});
}

void Simulation::record_emission(const EmittedFrame& e) {
    bool keep = options_.emission_log == EmissionLog::All ||
                (options_.emission_log == EmissionLog::Carriers && is_carrier(e.frame));
    if (keep) emissions_.push_back(e);
    if (options_.record_trace) {
        auto proto = packet::proto_of(e.frame.payload);
        auto add = [&](SegmentId seg) {
            trace_.push_back(TraceRecord{e.time, seg, TraceRecord::Dir::Out, proto,
                                         summarize(e.frame.payload)});
        };
        if (e.dest == EmittedFrame::Dest::Both) {
            add(SegmentId::Host);
            add(SegmentId::Guest);
        } else {
            add(static_cast<SegmentId>(e.dest));
        }
    }
}

std::vector<EmittedFrame> Simulation::emissions_to(SegmentId segment) const {
    std::vector<EmittedFrame> out;
    for (const auto& e : emissions_)
        if (e.reaches(segment)) out.push_back(e);
    return out;
}

void Simulation::log_arrival(SegmentId segment, const packet::Frame& frame, TimeUs t,
                             const std::string& note) {
    if (!options_.record_trace) return;
    std::string summary = summarize(frame.payload);
    if (!note.empty()) summary += "," + note;
    trace_.push_back(
        TraceRecord{t, segment, TraceRecord::Dir::In, packet::proto_of(frame.payload), summary});
}

void Simulation::export_trace(std::ostream& os) const {
    for (const auto& r : trace_) os << format_trace_record(r) << '\n';
}

}  // namespace crosstalk::sim
