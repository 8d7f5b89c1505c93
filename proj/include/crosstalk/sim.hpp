#pragma once

#include "crosstalk/mitigation.hpp"
#include "crosstalk/packet.hpp"
#include "crosstalk/profile.hpp"
#include "crosstalk/rng.hpp"

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <memory>
#include <optional>
#include <queue>
#include <string>
#include <variant>
#include <vector>

namespace crosstalk::sim {

using TimeUs = std::uint64_t;

struct PastEvent : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct DisabledService : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Addressing plan: one /24 per segment, router at .1, DHCP pool .100-.199.
packet::Ipv4 segment_subnet(SegmentId s);    // network address
packet::Ipv4 router_ip(SegmentId s);
packet::MacAddr router_mac();
packet::MacAddr station_mac(SegmentId s, std::uint16_t index);
packet::Ipv4 station_ip(SegmentId s, std::uint16_t index);
bool in_subnet(SegmentId s, packet::Ipv4 ip);
bool in_dhcp_pool(SegmentId s, packet::Ipv4 ip);

struct EmittedFrame {
    enum class Dest : std::uint8_t { Host = 0, Guest = 1, Both = 2 };
    Dest dest = Dest::Host;
    packet::Frame frame;
    TimeUs time = 0;

    bool reaches(SegmentId s) const {
        return dest == Dest::Both || dest == static_cast<Dest>(s);
    }
};

struct TraceRecord {
    TimeUs time_us = 0;
    SegmentId segment = SegmentId::Host;
    enum class Dir : std::uint8_t { In, Out } direction = Dir::In;
    packet::Proto proto = packet::Proto::Arp;
    std::string summary;
};

std::string format_trace_record(const TraceRecord& r);

class Simulation;

// Anything that can be woken by the event queue. Actors are adopted by the
// simulation and fired at their scheduled times.
class Actor {
public:
    virtual ~Actor() = default;
    virtual void fire(Simulation& sim) = 0;
};

// ---------------------------------------------------------------------------
// Control plane: one software server shared by every request class, with
// per-(class, segment) input buffers. A request admitted at time t starts at
// max(t, busy_until) and finishes after its service time plus Gaussian
// jitter; arrivals beyond a buffer's capacity are dropped without a
// response.
class ControlPlane {
public:
    ControlPlane(const RouterProfile* profile, std::uint64_t seed);

    // Returns the response emission time, or nullopt when the class buffer
    // is full and the request is dropped.
    std::optional<TimeUs> admit(RequestKind kind, SegmentId segment, TimeUs now);

    void set_mitigation(const detect::MitigationConfig& m) { mitigation_ = m; }
    const detect::MitigationConfig& mitigation() const { return mitigation_; }

    std::uint32_t pending(RequestKind kind, SegmentId segment, TimeUs now);
    std::uint64_t admitted_count() const { return admitted_; }
    std::uint64_t dropped_count() const { return dropped_; }
    TimeUs busy_until() const { return busy_until_; }

private:
    TimeUs service_duration(RequestKind kind, SegmentId segment);
    TimeUs slice_aligned_start(SegmentId segment, TimeUs at, TimeUs duration) const;
    void drain(RequestKind kind, SegmentId segment, TimeUs now);

    const RouterProfile* profile_;
    detect::MitigationConfig mitigation_;
    TimeUs busy_until_ = 0;
    TimeUs segment_busy_[2] = {0, 0};  // TimeSlice mode only
    std::uint32_t pending_[kRequestKindCount][2] = {};
    std::priority_queue<TimeUs, std::vector<TimeUs>, std::greater<>>
        in_flight_[kRequestKindCount][2];
    SubStream jitter_stream_[kRequestKindCount][2];
    std::uint64_t jitter_index_[kRequestKindCount][2] = {};
    SubStream delay_stream_;
    std::uint64_t delay_index_ = 0;
    std::uint64_t admitted_ = 0;
    std::uint64_t dropped_ = 0;
};

// ---------------------------------------------------------------------------
// Router: two isolated segments around one control plane, with the model's
// leak behaviors.
class Router {
public:
    Router(Simulation* sim, const RouterProfile* profile, std::uint64_t seed);

    // Processes one ingress frame at time t. Responses and leaked frames are
    // returned with their future emission times and are also logged by the
    // simulation when emission logging is on.
    std::vector<EmittedFrame> handle_frame(SegmentId ingress, const packet::Frame& frame,
                                           TimeUs t);

    // Queueing delay for one control-plane request (the admission path used
    // by handle_frame). Throws DisabledService if the profile does not serve
    // this kind from that segment; nullopt when the request is dropped.
    std::optional<TimeUs> service_response_time(RequestKind kind, SegmentId segment, TimeUs t);

    void set_mitigation(const detect::MitigationConfig& m) { control_.set_mitigation(m); }
    const detect::MitigationConfig& mitigation() const { return control_.mitigation(); }

    ControlPlane& control_plane() { return control_; }
    const RouterProfile& profile() const { return *profile_; }

private:
    std::optional<EmittedFrame> respond(RequestKind kind, SegmentId ingress, TimeUs t,
                                        EmittedFrame::Dest dest, packet::Frame response);
    void handle_dhcp(SegmentId ingress, const packet::Frame& frame, TimeUs t,
                     std::vector<EmittedFrame>& out);
    void handle_arp(SegmentId ingress, const packet::Frame& frame, TimeUs t,
                    std::vector<EmittedFrame>& out);
    void handle_igmp(SegmentId ingress, const packet::Frame& frame, TimeUs t,
                     std::vector<EmittedFrame>& out);
    void handle_icmp(SegmentId ingress, const packet::Frame& frame, TimeUs t,
                     std::vector<EmittedFrame>& out);
    void handle_control(SegmentId ingress, const packet::Frame& frame, TimeUs t,
                        std::vector<EmittedFrame>& out);

    Simulation* sim_;
    const RouterProfile* profile_;
    ControlPlane control_;
    // (segment, group) -> member count, for the leave-of-last-member rule.
    std::map<std::pair<SegmentId, packet::Ipv4>, std::uint32_t> igmp_members_;
};

// ---------------------------------------------------------------------------
// Simulation: virtual clock, deterministic event queue, router, logs.

enum class EmissionLog : std::uint8_t {
    All,       // record every emitted frame
    Carriers,  // record only covert-carrier frames (DHCP NAK, IGMP query, forwarded ARP)
    None,
};

struct SimOptions {
    bool record_trace = true;
    EmissionLog emission_log = EmissionLog::All;
};

class Simulation {
public:
    Simulation(RouterProfile profile, std::uint64_t seed, SimOptions options = {});

    TimeUs now() const { return now_; }
    std::uint64_t seed() const { return seed_; }
    const RouterProfile& profile() const { return profile_; }
    Router& router() { return *router_; }
    const SimOptions& options() const { return options_; }

    // Event scheduling. Ties execute in insertion order; scheduling into the
    // past throws PastEvent.
    void schedule_fn(TimeUs t, std::function<void()> fn);
    void schedule_actor(TimeUs t, Actor* actor);
    void schedule_delivery(TimeUs t, SegmentId segment, packet::Frame frame);

    // Delivers a frame to the router at the current virtual time and returns
    // the scheduled emissions.
    std::vector<EmittedFrame> deliver_now(SegmentId segment, const packet::Frame& frame);

    // Takes ownership of a gadget/actor for the lifetime of the simulation.
    Actor* adopt(std::unique_ptr<Actor> actor);

    void run_until_idle();
    void run_until(TimeUs t);  // processes events with time <= t, then sets now = t
    std::size_t queue_size() const { return queue_.size(); }

    const std::vector<EmittedFrame>& emissions() const { return emissions_; }
    std::vector<EmittedFrame> emissions_to(SegmentId segment) const;
    const std::vector<TraceRecord>& trace() const { return trace_; }
    void export_trace(std::ostream& os) const;

    SubStream stream(std::string_view label, std::uint64_t salt = 0) const {
        return SubStream(seed_, label, salt);
    }

    // Internal hooks used by the router.
    void log_arrival(SegmentId segment, const packet::Frame& frame, TimeUs t,
                     const std::string& note);
    void queue_emission(const EmittedFrame& e);

private:
    struct FrameDeliveryEv {
        SegmentId segment;
        packet::Frame frame;
    };
    struct EmissionEv {
        EmittedFrame emitted;
    };
    struct ActorEv {
        Actor* actor;
    };
    struct FnEv {
        std::function<void()> fn;
    };
    struct Event {
        TimeUs time;
        std::uint64_t seq;
        std::variant<FrameDeliveryEv, EmissionEv, ActorEv, FnEv> body;
    };
    struct EventAfter {
        bool operator()(const Event& a, const Event& b) const {
            if (a.time != b.time) return a.time > b.time;
            return a.seq > b.seq;
        }
    };

    void push_event(TimeUs t, std::variant<FrameDeliveryEv, EmissionEv, ActorEv, FnEv> body);
    void dispatch(Event& ev);
    void record_emission(const EmittedFrame& e);

    RouterProfile profile_;
    std::uint64_t seed_;
    SimOptions options_;
    TimeUs now_ = 0;
    std::uint64_t next_seq_ = 0;
    std::priority_queue<Event, std::vector<Event>, EventAfter> queue_;
    std::unique_ptr<Router> router_;
    std::vector<EmittedFrame> emissions_;
    std::vector<TraceRecord> trace_;
    std::vector<std::unique_ptr<Actor>> actors_;
};

}  // namespace crosstalk::sim
