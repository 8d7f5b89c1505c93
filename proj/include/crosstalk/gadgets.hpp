#pragma once

#include "crosstalk/sim.hpp"

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <vector>

namespace crosstalk::gadgets {

using sim::SegmentId;
using sim::TimeUs;

struct GadgetUnavailable : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Load generators. Each schedules Poisson-paced control-plane traffic from a
// station on its segment. Arrival streams are thinned from a fixed-rate
// master process, so for one seed the arrival set at a lower rate is a
// subset of the set at any higher rate.
enum class SenderKind : std::uint8_t {
    ArpFlood = 0,
    DhcpRequestLoad,
    IcmpFlood,
    SshKexLoad,
    CsrfLoad,
};

// Latency samplers. Each paces request/response probes and records RTTs.
enum class ReceiverKind : std::uint8_t {
    ArpProbe = 0,
    IcmpProbe,
    DhcpProbe,
    CsrfProbe,
    SshProbe,
};

const char* sender_kind_name(SenderKind k);
const char* receiver_kind_name(ReceiverKind k);
sim::RequestKind sender_request_kind(SenderKind k);
sim::RequestKind receiver_request_kind(ReceiverKind k);

constexpr double kMasterRatePps = 32768.0;

struct SenderGadget {
    SenderKind kind = SenderKind::ArpFlood;
    double rate_pps = 0.0;
    SegmentId segment = SegmentId::Guest;
};

struct ReceiverGadget {
    ReceiverKind kind = ReceiverKind::ArpProbe;
    TimeUs probe_interval_us = 0;  // 0 = kind default
    SegmentId segment = SegmentId::Host;
};

TimeUs default_probe_interval_us(ReceiverKind k);

// Receivers mark a probe as timed out when no response lands within 10x the
// idle round trip; clamped statistics substitute this bound. The idle RTT is
// what the receiver measures on the live router, so active mitigations
// (their mean added latency) are part of it.
TimeUs timeout_clamp_us(const sim::RouterProfile& profile, ReceiverKind k,
                        const detect::MitigationConfig& mitigation = {});

// Throw GadgetUnavailable when the profile does not expose the required
// service on the gadget's segment.
void check_sender(const sim::RouterProfile& profile, const SenderGadget& g);
void check_receiver(const sim::RouterProfile& profile, const ReceiverGadget& g);

struct ProbeRecord {
    std::uint32_t seq = 0;
    TimeUs send_us = 0;
    std::optional<TimeUs> rtt_us;  // absent when timed out
    bool timeout = false;
};

struct TimingTrace {
    std::vector<ProbeRecord> records;
    TimeUs timeout_clamp = 0;

    double clamped_rtt(std::size_t i) const;
    std::vector<double> clamped_rtts() const;
    // Clamped RTTs for probes sent inside [from, to).
    std::vector<double> clamped_rtts_between(TimeUs from, TimeUs to) const;
    double mean_rtt_us() const;
    void export_csv(std::ostream& os) const;  // seq,send_us,rtt_us,timeout
};

// Schedules load frames over [start, start+duration). rate 0 is a no-op.
void run_sender(sim::Simulation& s, const SenderGadget& g, TimeUs start, TimeUs duration);

// Schedules n_probes paced probes from `start`, advances the simulation
// until the last probe is sent, and returns one record per probe.
TimingTrace run_receiver(sim::Simulation& s, const ReceiverGadget& g, std::uint32_t n_probes,
                         TimeUs start);

// Schedules the probes without running the simulation; the trace fills in as
// events execute. Used when several actors must overlap.
const TimingTrace& schedule_receiver(sim::Simulation& s, const ReceiverGadget& g,
                                     std::uint32_t n_probes, TimeUs start);

}  // namespace crosstalk::gadgets
