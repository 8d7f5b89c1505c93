#pragma once

#include "crosstalk/framing.hpp"
#include "crosstalk/gadgets.hpp"
#include "crosstalk/sim.hpp"

#include <span>

namespace crosstalk::channels {

using sim::ChannelId;
using sim::SegmentId;
using sim::TimeUs;

enum class ChannelClass { Direct, Timing };
ChannelClass channel_class(ChannelId id);

struct ChannelUnsupported : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct ChannelTooWeak : std::runtime_error {
    explicit ChannelTooWeak(double p)
        : std::runtime_error("channel effect not significant (p=" + std::to_string(p) + ")"),
          p_value(p) {}
    double p_value;
};

struct SyncLost : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct ChannelSpec {
    ChannelId id = ChannelId::DhcpDirect;
    ChannelClass cls = ChannelClass::Direct;
    SegmentId sender_segment = SegmentId::Guest;
    SegmentId receiver_segment = SegmentId::Host;
    // Direct: transactions per second. Timing: symbols per second.
    double symbol_rate = 0.0;
};

// Payload bits moved per symbol. Direct symbols in 32-bit fields reserve a
// 4-bit sequence tag; the IGMP group field has its 1110 prefix fixed and no
// room for a tag; subnet-restricted ARP carries one byte.
int symbol_payload_bits(ChannelId id, const sim::RouterProfile& profile);
bool symbol_has_seq_tag(ChannelId id, const sim::RouterProfile& profile);

double default_symbol_rate(ChannelId id, SegmentId sender_segment,
                           const sim::RouterProfile& profile);
double saturation_symbol_rate(ChannelId id, SegmentId sender_segment,
                              const sim::RouterProfile& profile);

ChannelSpec make_spec(ChannelId id, SegmentId sender_segment, const sim::RouterProfile& profile,
                      double symbol_rate = 0.0);

// Gadget pair realizing a timing spec. The channel name orders its gadgets
// (guest-side, host-side); the sender runs the load gadget on its own
// segment, the receiver probes from the opposite one.
gadgets::SenderGadget sender_for(const ChannelSpec& spec);
gadgets::ReceiverGadget receiver_for(const ChannelSpec& spec);
double default_sender_rate(gadgets::SenderKind kind);

// Throws ChannelUnsupported when the profile's support matrix blocks this
// direction.
void require_supported(const ChannelSpec& spec, const sim::RouterProfile& profile);

// ---------------------------------------------------------------------------
// Direct channels

void direct_send(const ChannelSpec& spec, const std::vector<ChannelFrame>& frames,
                 sim::Simulation& s, TimeUs start);

struct DirectReceiveResult {
    std::vector<std::uint8_t> payload;
    std::vector<std::uint8_t> bit_valid;  // per payload bit
    bool crc_ok = false;
    std::size_t symbols = 0;
    std::size_t erased_bits = 0;
};

// Extracts covert fields from sniffed receiver-segment frames, repairs
// ordering via sequence tags where present, and deframes. Throws NoPreamble
// when no transmission is found; CRC damage is reported in the result.
DirectReceiveResult direct_receive(const ChannelSpec& spec, const sim::RouterProfile& profile,
                                   const std::vector<sim::EmittedFrame>& sniffed);

// ---------------------------------------------------------------------------
// Timing channels (on/off keying over gadget pairs)

struct TimingCalibration {
    double threshold_us = 0.0;
    double on_mean_us = 0.0;
    double off_mean_us = 0.0;
    TimeUs symbol_period_us = 0;
    double p_value = 1.0;
};

// Fixed sync pattern sent before the data symbols.
inline constexpr std::uint8_t kOokPreamble[8] = {1, 0, 1, 0, 1, 0, 1, 1};
inline constexpr int kOokPreambleLen = 8;
inline constexpr int kOokMinPreambleScore = 6;

// Runs n probes with the sender idle and n with it loaded, gates on the
// two-sample test (throws ChannelTooWeak at p >= 0.05), and places the
// decision threshold midway between the two means.
TimingCalibration calibrate(const ChannelSpec& spec, const gadgets::SenderGadget& sender,
                            const gadgets::ReceiverGadget& receiver, sim::Simulation& s,
                            std::uint32_t n_per_condition);

// Schedules one sender window per 1-bit (preamble first); 0-bits idle.
void timing_send(const ChannelSpec& spec, const std::vector<std::uint8_t>& bits,
                 const TimingCalibration& cal, const gadgets::SenderGadget& sender,
                 sim::Simulation& s, TimeUs start);

// Probes across the transmission, locks the symbol alignment on the OOK
// preamble by sliding correlation (SyncLost below 6/8 matches), thresholds
// per-symbol means, and returns the data bits.
std::vector<std::uint8_t> timing_receive(const ChannelSpec& spec, const TimingCalibration& cal,
                                         const gadgets::ReceiverGadget& receiver,
                                         sim::Simulation& s, TimeUs rx_start,
                                         std::size_t max_data_symbols);

// ---------------------------------------------------------------------------
// End-to-end transfer

struct TransferResult {
    std::vector<std::uint8_t> decoded;
    std::vector<std::uint8_t> bit_valid;
    bool crc_ok = false;
    double ber = 1.0;       // against the sent payload
    double p_value = 0.0;   // calibration p (timing channels)
    TimeUs elapsed_us = 0;
};

// Sends payload across one simulated router and decodes it on the far
// segment. bit_rate_bps counts payload bits; 0 selects the channel default
// (half the saturation rate).
TransferResult transfer(ChannelId id, SegmentId sender_segment,
                        const sim::RouterProfile& profile, std::span<const std::uint8_t> payload,
                        double bit_rate_bps, std::uint64_t seed,
                        const detect::MitigationConfig& mitigation = {});

// Fraction of truth bits not recovered exactly (missing or erased bits count
// as errors).
double bit_error_rate(std::span<const std::uint8_t> truth,
                      const std::vector<std::uint8_t>& decoded,
                      const std::vector<std::uint8_t>& bit_valid);

double rate_to_symbol_rate(ChannelId id, const sim::RouterProfile& profile, double bit_rate_bps);

}  // namespace crosstalk::channels
