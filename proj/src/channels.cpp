#include "crosstalk/channels.hpp"

#include "crosstalk/stats.hpp"

#include <algorithm>
#include <cmath>

namespace crosstalk::channels {

using gadgets::ReceiverGadget;
using gadgets::ReceiverKind;
using gadgets::SenderGadget;
using gadgets::SenderKind;
using packet::Frame;
using sim::RouterProfile;
using sim::Simulation;

ChannelClass channel_class(ChannelId id) {
    switch (id) {
        case ChannelId::DhcpDirect:
        case ChannelId::IgmpDirect:
        case ChannelId::ArpDirect:
            return ChannelClass::Direct;
        default:
            return ChannelClass::Timing;
    }
}

int symbol_payload_bits(ChannelId id, const RouterProfile& profile) {
    switch (id) {
        case ChannelId::DhcpDirect: return 28;  // 32-bit xid minus tag
        case ChannelId::IgmpDirect: return 28;  // group ip below the 1110 prefix
        case ChannelId::ArpDirect:
            return profile.arp_broadcast_forwarding == sim::ArpForwarding::Unrestricted ? 28 : 8;
        default: return 1;  // one bit per OOK symbol
    }
}

bool symbol_has_seq_tag(ChannelId id, const RouterProfile& profile) {
    if (id == ChannelId::DhcpDirect) return true;
    if (id == ChannelId::ArpDirect)
        return profile.arp_broadcast_forwarding == sim::ArpForwarding::Unrestricted;
    return false;
}

namespace {

// (guest-side, host-side) gadget protocols per channel name.
struct GadgetPair {
    SenderKind guest_sender, host_sender;
    ReceiverKind guest_receiver, host_receiver;
};

GadgetPair gadget_pair(ChannelId id) {
    switch (id) {
        case ChannelId::ArpSsh:
            return {SenderKind::ArpFlood, SenderKind::SshKexLoad, ReceiverKind::ArpProbe,
                    ReceiverKind::SshProbe};
        case ChannelId::ArpArp:
            return {SenderKind::ArpFlood, SenderKind::ArpFlood, ReceiverKind::ArpProbe,
                    ReceiverKind::ArpProbe};
        case ChannelId::ArpCsrf:
            return {SenderKind::ArpFlood, SenderKind::CsrfLoad, ReceiverKind::ArpProbe,
                    ReceiverKind::CsrfProbe};
        case ChannelId::IcmpIcmp:
            return {SenderKind::IcmpFlood, SenderKind::IcmpFlood, ReceiverKind::IcmpProbe,
                    ReceiverKind::IcmpProbe};
        case ChannelId::DhcpArp:
            return {SenderKind::DhcpRequestLoad, SenderKind::ArpFlood, ReceiverKind::DhcpProbe,
                    ReceiverKind::ArpProbe};
        default:
            throw ChannelUnsupported("direct channels have no gadget pair");
    }
}

}  // namespace

double default_sender_rate(SenderKind kind) {
    switch (kind) {
        case SenderKind::ArpFlood: return 25000.0;
        case SenderKind::IcmpFlood: return 25000.0;
        case SenderKind::DhcpRequestLoad: return 500.0;
        case SenderKind::CsrfLoad: return 2000.0;
        case SenderKind::SshKexLoad: return 20.0;
    }
    return 0.0;
}

SenderGadget sender_for(const ChannelSpec& spec) {
    auto pair = gadget_pair(spec.id);
    SenderKind kind =
        spec.sender_segment == SegmentId::Guest ? pair.guest_sender : pair.host_sender;
    return SenderGadget{kind, default_sender_rate(kind), spec.sender_segment};
}

ReceiverGadget receiver_for(const ChannelSpec& spec) {
    auto pair = gadget_pair(spec.id);
    ReceiverKind kind =
        spec.receiver_segment == SegmentId::Guest ? pair.guest_receiver : pair.host_receiver;
    return ReceiverGadget{kind, 0, spec.receiver_segment};
}

namespace {

TimeUs default_timing_period_us(ChannelId id, SegmentId sender_segment) {
    ChannelSpec probe_spec{id, ChannelClass::Timing, sender_segment, other(sender_segment), 0};
    auto recv = receiver_for(probe_spec);
    TimeUs interval = gadgets::default_probe_interval_us(recv.kind);
    TimeUs period = 8 * interval;
    // The DHCP load queue drains slowly after an on-symbol; give the guest
    // sender direction room so the spillover stays a small window fraction.
    if (id == ChannelId::DhcpArp && sender_segment == SegmentId::Guest)
        period = std::max<TimeUs>(period, 120000);
    return period;
}

}  // namespace

double default_symbol_rate(ChannelId id, SegmentId sender_segment,
                           const RouterProfile& profile) {
    if (channel_class(id) == ChannelClass::Direct)
        return saturation_symbol_rate(id, sender_segment, profile) / 2.0;
    return 1e6 / static_cast<double>(default_timing_period_us(id, sender_segment));
}

double saturation_symbol_rate(ChannelId id, SegmentId sender_segment,
                              const RouterProfile& profile) {
    switch (id) {
        case ChannelId::DhcpDirect:
            // One invalid request per symbol; the NAK path has no buffer, so
            // transactions beyond the service rate are dropped.
            return 1e6 / static_cast<double>(profile.service_us(sim::RequestKind::DhcpNak));
        case ChannelId::IgmpDirect:
            return 1e6 / static_cast<double>(profile.service_us(sim::RequestKind::IgmpQuery));
        case ChannelId::ArpDirect:
            // Forwarding shares the ARP handler; stay well under its rate.
            return 1e6 / static_cast<double>(profile.service_us(sim::RequestKind::Arp)) / 5.0;
        default:
            // Decoding needs a handful of probes per symbol; it breaks down
            // at roughly twice the default rate.
            return 2e6 / static_cast<double>(default_timing_period_us(id, sender_segment));
    }
}

ChannelSpec make_spec(ChannelId id, SegmentId sender_segment, const RouterProfile& profile,
                      double symbol_rate) {
    ChannelSpec spec;
    spec.id = id;
    spec.cls = channel_class(id);
    spec.sender_segment = sender_segment;
    spec.receiver_segment = other(sender_segment);
    spec.symbol_rate =
        symbol_rate > 0 ? symbol_rate : default_symbol_rate(id, sender_segment, profile);
    return spec;
}

void require_supported(const ChannelSpec& spec, const RouterProfile& profile) {
    if (!profile.channel_support(spec.id).from(spec.sender_segment))
        throw ChannelUnsupported(std::string(channel_name(spec.id)) + " not supported " +
                                 segment_name(spec.sender_segment) + "->" +
                                 segment_name(spec.receiver_segment) + " on " + profile.model_id);
}

double rate_to_symbol_rate(ChannelId id, const RouterProfile& profile, double bit_rate_bps) {
    return bit_rate_bps / symbol_payload_bits(id, profile);
}

// ---------------------------------------------------------------------------
// Direct send/receive

namespace {

constexpr packet::Ipv4 kInvalidRequestedIp = packet::ipv4(10, 99, 99, 99);
constexpr std::uint32_t kIgmpGroupPrefix = 0xE0000000u;

std::uint32_t take_bits(const BitStream& bits, std::size_t pos, int width) {
    std::uint32_t v = 0;
    for (int i = 0; i < width; ++i) {
        v <<= 1;
        std::size_t p = pos + static_cast<std::size_t>(i);
        if (p < bits.size()) v |= bits.bits[p];
    }
    return v;
}

}  // namespace

void direct_send(const ChannelSpec& spec, const std::vector<ChannelFrame>& frames,
                 Simulation& s, TimeUs start) {
    if (spec.cls != ChannelClass::Direct)
        throw ChannelUnsupported("direct_send needs a direct channel spec");
    const RouterProfile& profile = s.profile();
    require_supported(spec, profile);

    BitStream bits = frames_to_bits(frames);
    int k = symbol_payload_bits(spec.id, profile);
    bool tagged = symbol_has_seq_tag(spec.id, profile);
    std::size_t n_symbols = (bits.size() + static_cast<std::size_t>(k) - 1) / k;
    SegmentId seg = spec.sender_segment;
    packet::MacAddr src = sim::station_mac(seg, 2);

    for (std::size_t i = 0; i < n_symbols; ++i) {
        std::uint32_t value = take_bits(bits, i * static_cast<std::size_t>(k), k);
        std::uint32_t word =
            tagged ? (static_cast<std::uint32_t>(i % 16) << 28 | value) : value;
        TimeUs t = start + static_cast<TimeUs>(std::llround(
                               static_cast<double>(i) * 1e6 / spec.symbol_rate));
        switch (spec.id) {
            case ChannelId::DhcpDirect: {
                packet::DhcpMessage m;
                m.op = packet::DhcpOp::Request;
                m.xid = word;
                m.client_mac = src;
                m.requested_ip = kInvalidRequestedIp;  // outside the pool: answered with a NAK
                s.schedule_delivery(t, seg, packet::make_frame(src, packet::kBroadcastMac, m));
                break;
            }
            case ChannelId::IgmpDirect: {
                packet::IgmpMessage join{packet::IgmpOp::Join, kIgmpGroupPrefix | value};
                packet::IgmpMessage leave{packet::IgmpOp::Leave, kIgmpGroupPrefix | value};
                s.schedule_delivery(t, seg, packet::make_frame(src, packet::kBroadcastMac, join));
                s.schedule_delivery(t + 200, seg,
                                    packet::make_frame(src, packet::kBroadcastMac, leave));
                break;
            }
            case ChannelId::ArpDirect: {
                packet::ArpMessage m;
                m.op = packet::ArpOp::Request;
                m.sender_ip = sim::station_ip(seg, 2);
                m.sender_mac = src;
                if (k == 8) {
                    // Low octet of an address inside the opposite subnet.
                    m.target_ip = sim::segment_subnet(other(seg)) | value;
                } else {
                    m.target_ip = word;
                }
                s.schedule_delivery(t, seg, packet::make_frame(src, packet::kBroadcastMac, m));
                break;
            }
            default:
                break;
        }
    }
}

DirectReceiveResult direct_receive(const ChannelSpec& spec, const RouterProfile& profile,
                                   const std::vector<sim::EmittedFrame>& sniffed) {
    if (spec.cls != ChannelClass::Direct)
        throw ChannelUnsupported("direct_receive needs a direct channel spec");

    int k = symbol_payload_bits(spec.id, profile);
    bool tagged = symbol_has_seq_tag(spec.id, profile);
    std::uint32_t payload_mask = k >= 32 ? 0xFFFFFFFFu : ((1u << k) - 1u);

    BitStream bits;
    bool have_prev = false;
    std::uint32_t prev_seq = 15;  // transmissions start at tag 0
    std::uint32_t prev_value = 0xFFFFFFFFu;
    std::size_t symbols = 0;

    auto push_symbol = [&](std::uint32_t word) {
        std::uint32_t value = word & payload_mask;
        if (tagged) {
            std::uint32_t seq = word >> 28;
            if (have_prev && seq == prev_seq && value == prev_value) return;  // duplicate
            std::uint32_t gap = (seq - prev_seq - 1) & 0xF;
            for (std::uint32_t g = 0; g < gap; ++g)
                for (int b = 0; b < k; ++b) bits.push(0, false);  // erased symbol
            prev_seq = seq;
            prev_value = value;
            have_prev = true;
        }
        bits.push_word(value, k);
        ++symbols;
    };

    for (const auto& e : sniffed) {
        using namespace packet;
        switch (spec.id) {
            case ChannelId::DhcpDirect: {
                const auto* m = std::get_if<DhcpMessage>(&e.frame.payload);
                if (m && m->op == DhcpOp::Nak) push_symbol(m->xid);
                break;
            }
            case ChannelId::IgmpDirect: {
                const auto* m = std::get_if<IgmpMessage>(&e.frame.payload);
                if (m && m->op == IgmpOp::MembershipQuery)
                    push_symbol(m->group_ip & ~kIgmpGroupPrefix);
                break;
            }
            case ChannelId::ArpDirect: {
                const auto* m = std::get_if<ArpMessage>(&e.frame.payload);
                if (m && m->op == ArpOp::Request && e.frame.is_broadcast())
                    push_symbol(k == 8 ? (m->target_ip & 0xFF) : m->target_ip);
                break;
            }
            default:
                break;
        }
    }

    DeframeResult deframed = deframe(bits);  // throws NoPreamble on empty/idle sniffs
    DirectReceiveResult out;
    out.payload = std::move(deframed.payload);
    out.bit_valid = std::move(deframed.bit_valid);
    out.crc_ok = deframed.crc_ok;
    out.erased_bits = deframed.erased_bits;
    out.symbols = symbols;
    return out;
}

// ---------------------------------------------------------------------------
// Timing send/receive

namespace {

TimeUs symbol_period_us(const ChannelSpec& spec) {
    return static_cast<TimeUs>(std::llround(1e6 / spec.symbol_rate));
}

void check_gadget_match(const ChannelSpec& spec, const SenderGadget& sender) {
    auto expect = sender_for(spec);
    if (sender.kind != expect.kind || sender.segment != expect.segment)
        throw ChannelUnsupported(std::string("sender gadget does not realize ") +
                                 channel_name(spec.id));
}

void check_gadget_match(const ChannelSpec& spec, const ReceiverGadget& receiver) {
    auto expect = receiver_for(spec);
    if (receiver.kind != expect.kind || receiver.segment != expect.segment)
        throw ChannelUnsupported(std::string("receiver gadget does not realize ") +
                                 channel_name(spec.id));
}

}  // namespace

TimingCalibration calibrate(const ChannelSpec& spec, const SenderGadget& sender,
                            const ReceiverGadget& receiver, Simulation& s,
                            std::uint32_t n_per_condition) {
    if (spec.cls != ChannelClass::Timing)
        throw ChannelUnsupported("calibrate needs a timing channel spec");
    require_supported(spec, s.profile());
    check_gadget_match(spec, sender);
    check_gadget_match(spec, receiver);
    gadgets::check_sender(s.profile(), sender);
    gadgets::check_receiver(s.profile(), receiver);
    if (n_per_condition < 30)
        throw std::invalid_argument("calibrate needs at least 30 probes per condition");

    TimeUs interval = receiver.probe_interval_us ? receiver.probe_interval_us
                                                 : gadgets::default_probe_interval_us(receiver.kind);
    TimeUs probe_span = static_cast<TimeUs>(n_per_condition) * interval * 11 / 10 + interval;
    constexpr TimeUs kWarmup = 100000;

    // Paired runs: two simulations with the same seed, so both conditions
    // see identical probe schedules and service jitter. The quiet run and
    // the loaded run then differ only through the sender's contention.
    auto paired_run = [&](bool loaded) {
        Simulation twin(s.profile(), s.seed(), s.options());
        twin.router().set_mitigation(s.router().mitigation());
        if (loaded) gadgets::run_sender(twin, sender, 1000, kWarmup + probe_span + kWarmup);
        return gadgets::run_receiver(twin, receiver, n_per_condition, 1000 + kWarmup);
    };
    auto off = paired_run(false).clamped_rtts();
    auto on = paired_run(true).clamped_rtts();

    auto res = detect::t_test(on, off);
    if (res.p_value >= 0.05 || res.mean_a <= res.mean_b) throw ChannelTooWeak(res.p_value);

    TimingCalibration cal;
    cal.on_mean_us = res.mean_a;
    cal.off_mean_us = res.mean_b;
    cal.threshold_us = (res.mean_a + res.mean_b) / 2.0;
    cal.symbol_period_us = symbol_period_us(spec);
    cal.p_value = res.p_value;
    return cal;
}

void timing_send(const ChannelSpec& spec, const std::vector<std::uint8_t>& bits,
                 const TimingCalibration& cal, const SenderGadget& sender, Simulation& s,
                 TimeUs start) {
    if (spec.cls != ChannelClass::Timing)
        throw ChannelUnsupported("timing_send needs a timing channel spec");
    require_supported(spec, s.profile());
    check_gadget_match(spec, sender);
    gadgets::check_sender(s.profile(), sender);

    TimeUs period = cal.symbol_period_us ? cal.symbol_period_us : symbol_period_us(spec);
    std::size_t k = 0;
    auto send_bit = [&](std::uint8_t bit) {
        if (bit) gadgets::run_sender(s, sender, start + k * period, period);
        ++k;
    };
    for (std::uint8_t b : kOokPreamble) send_bit(b);
    for (std::uint8_t b : bits) send_bit(b);
}

std::vector<std::uint8_t> timing_receive(const ChannelSpec& spec, const TimingCalibration& cal,
                                         const ReceiverGadget& receiver, Simulation& s,
                                         TimeUs rx_start, std::size_t max_data_symbols) {
    if (spec.cls != ChannelClass::Timing)
        throw ChannelUnsupported("timing_receive needs a timing channel spec");
    require_supported(spec, s.profile());
    check_gadget_match(spec, receiver);

    TimeUs period = cal.symbol_period_us ? cal.symbol_period_us : symbol_period_us(spec);
    TimeUs interval = receiver.probe_interval_us ? receiver.probe_interval_us
                                                 : gadgets::default_probe_interval_us(receiver.kind);
    std::size_t total_symbols = kOokPreambleLen + max_data_symbols + 3;
    auto n_probes = static_cast<std::uint32_t>(
        (static_cast<double>(total_symbols) * static_cast<double>(period)) /
            (0.9 * static_cast<double>(interval)) +
        16);

    auto trace = gadgets::run_receiver(s, receiver, n_probes, rx_start);

    // Prefix sums over clamped RTTs for O(log n) window means.
    std::size_t n = trace.records.size();
    std::vector<TimeUs> sends(n);
    std::vector<double> prefix(n + 1, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
        sends[i] = trace.records[i].send_us;
        prefix[i + 1] = prefix[i] + trace.clamped_rtt(i);
    }
    auto idx_at = [&](TimeUs t) {
        return static_cast<std::size_t>(
            std::lower_bound(sends.begin(), sends.end(), t) - sends.begin());
    };
    auto bit_at = [&](TimeUs t0, std::size_t sym) {
        TimeUs w0 = t0 + sym * period;
        std::size_t lo = idx_at(w0);
        std::size_t hi = idx_at(w0 + period);
        if (hi <= lo) return std::uint8_t{0};
        double mean = (prefix[hi] - prefix[lo]) / static_cast<double>(hi - lo);
        return static_cast<std::uint8_t>(mean > cal.threshold_us ? 1 : 0);
    };

    // Sliding correlation against the sync pattern. Several adjacent
    // alignments usually score perfectly; the true symbol boundary sits in
    // the middle of that run, clear of spillover from neighboring symbols.
    TimeUs last_send = n ? sends[n - 1] : rx_start;
    std::vector<int> scores;
    scores.reserve(n);
    int best_score = -1;
    for (std::size_t c = 0; c < n; ++c) {
        TimeUs t0 = sends[c];
        if (t0 + static_cast<TimeUs>(kOokPreambleLen) * period > last_send + interval) break;
        int score = 0;
        for (int k = 0; k < kOokPreambleLen; ++k)
            if (bit_at(t0, static_cast<std::size_t>(k)) == kOokPreamble[k]) ++score;
        scores.push_back(score);
        best_score = std::max(best_score, score);
    }
    if (best_score < kOokMinPreambleScore)
        throw SyncLost("preamble correlation " + std::to_string(std::max(best_score, 0)) + "/8");
    std::size_t run_start = 0, run_len = 0;
    for (std::size_t c = 0; c < scores.size() && run_len == 0; ++c) {
        if (scores[c] != best_score) continue;
        std::size_t end = c;
        while (end < scores.size() && scores[end] == best_score) ++end;
        run_start = c;
        run_len = end - c;
    }
    TimeUs best_t = sends[run_start + run_len / 2];

    std::vector<std::uint8_t> bits;
    for (std::size_t k = 0; k < max_data_symbols; ++k) {
        std::size_t sym = kOokPreambleLen + k;
        if (best_t + (sym + 1) * period > last_send + interval) break;
        bits.push_back(bit_at(best_t, sym));
    }
    return bits;
}

// ---------------------------------------------------------------------------
// End-to-end transfer

double bit_error_rate(std::span<const std::uint8_t> truth,
                      const std::vector<std::uint8_t>& decoded,
                      const std::vector<std::uint8_t>& bit_valid) {
    std::size_t n = truth.size() * 8;
    if (n == 0) return 0.0;
    std::size_t errors = 0;
    for (std::size_t i = 0; i < n; ++i) {
        std::size_t byte = i / 8;
        int bit = 7 - static_cast<int>(i % 8);
        bool have = byte < decoded.size() && (i < bit_valid.size() ? bit_valid[i] != 0 : true);
        if (!have) {
            ++errors;
            continue;
        }
        int tb = (truth[byte] >> bit) & 1;
        int db = (decoded[byte] >> bit) & 1;
        if (tb != db) ++errors;
    }
    return static_cast<double>(errors) / static_cast<double>(n);
}

TransferResult transfer(ChannelId id, SegmentId sender_segment, const RouterProfile& profile,
                        std::span<const std::uint8_t> payload, double bit_rate_bps,
                        std::uint64_t seed, const detect::MitigationConfig& mitigation) {
    double symbol_rate =
        bit_rate_bps > 0 ? rate_to_symbol_rate(id, profile, bit_rate_bps) : 0.0;
    ChannelSpec spec = make_spec(id, sender_segment, profile, symbol_rate);
    require_supported(spec, profile);

    sim::SimOptions opts;
    opts.record_trace = false;
    opts.emission_log = spec.cls == ChannelClass::Direct ? sim::EmissionLog::Carriers
                                                         : sim::EmissionLog::None;
    Simulation s(profile, seed, opts);
    s.router().set_mitigation(mitigation);

    TransferResult out;
    auto frames = frame_payload(payload);

    if (spec.cls == ChannelClass::Direct) {
        TimeUs start = 1000;
        direct_send(spec, frames, s, start);
        s.run_until_idle();
        try {
            auto res = direct_receive(spec, profile, s.emissions_to(spec.receiver_segment));
            out.decoded = std::move(res.payload);
            out.bit_valid = std::move(res.bit_valid);
            out.crc_ok = res.crc_ok;
        } catch (const NoPreamble&) {
            out.crc_ok = false;
        }
        out.elapsed_us = s.now() > start ? s.now() - start : 0;
        out.p_value = 0.0;
    } else {
        auto sender = sender_for(spec);
        auto receiver = receiver_for(spec);
        auto cal = calibrate(spec, sender, receiver, s, 1000);  // throws ChannelTooWeak
        out.p_value = cal.p_value;

        BitStream tx_bits = frames_to_bits(frames);
        TimeUs period = cal.symbol_period_us;
        TimeUs rx_start = s.now() + 10000;
        TimeUs t0 = rx_start + 2 * period;
        timing_send(spec, tx_bits.bits, cal, sender, s, t0);
        TimeUs start = s.now();
        auto rx_bits = timing_receive(spec, cal, receiver, s, rx_start, tx_bits.size() + 2);
        out.elapsed_us = s.now() - start;

        BitStream stream;
        stream.bits = rx_bits;
        stream.known.assign(rx_bits.size(), 1);
        try {
            auto deframed = deframe(stream);
            out.decoded = std::move(deframed.payload);
            out.bit_valid = std::move(deframed.bit_valid);
            out.crc_ok = deframed.crc_ok;
        } catch (const NoPreamble&) {
            out.crc_ok = false;
        }
    }

    out.ber = bit_error_rate(payload, out.decoded, out.bit_valid);
    return out;
}

}  // namespace crosstalk::channels
