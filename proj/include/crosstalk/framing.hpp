#pragma once

#include <cstdint>
#include <span>
#include <stdexcept>
#include <vector>

namespace crosstalk::channels {

struct NoPreamble : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// CRC-16/CCITT-FALSE: poly 0x1021, init 0xFFFF, no reflection.
std::uint16_t crc16_ccitt(std::span<const std::uint8_t> data);

constexpr std::uint16_t kFramePreamble = 0xA55A;
constexpr std::size_t kMaxFramePayload = 65535;
constexpr std::size_t kFrameOverheadBits = 48;  // preamble + length + crc

// preamble:16 | length:16 | payload bytes | crc:16(length+payload)
struct ChannelFrame {
    std::uint16_t length = 0;
    std::vector<std::uint8_t> payload;
    std::uint16_t checksum = 0;
};

// Splits arbitrary payloads into checksummed frames (65535 bytes max each;
// empty payloads produce one zero-length frame).
std::vector<ChannelFrame> frame_payload(std::span<const std::uint8_t> payload);

std::size_t framed_bit_count(std::size_t payload_bytes);

// A bit sequence with per-bit validity; unknown bits come from dropped
// symbols detected via sequence tags.
struct BitStream {
    std::vector<std::uint8_t> bits;   // 0/1
    std::vector<std::uint8_t> known;  // parallel; 0 = erased

    void push(std::uint8_t bit, bool is_known = true) {
        bits.push_back(bit & 1);
        known.push_back(is_known ? 1 : 0);
    }
    void push_word(std::uint32_t value, int width, bool is_known = true) {
        for (int i = width - 1; i >= 0; --i) push((value >> i) & 1, is_known);
    }
    std::size_t size() const { return bits.size(); }
};

// MSB-first bit expansion of the framed byte stream.
BitStream frames_to_bits(const std::vector<ChannelFrame>& frames);

struct DeframeResult {
    std::vector<std::uint8_t> payload;     // concatenated frame payloads
    std::vector<std::uint8_t> bit_valid;   // one entry per payload bit
    bool crc_ok = true;                    // all frames verified, no erasures
    std::size_t frames = 0;
    std::size_t erased_bits = 0;           // unknown bits inside payload fields

    bool bit_ok(std::size_t i) const { return i < bit_valid.size() && bit_valid[i]; }
};

// Recovers frames from a (possibly damaged) bit stream. Throws NoPreamble
// when no sync pattern is present; CRC or structural damage is reported in
// the result, with the recoverable bits preserved.
DeframeResult deframe(const BitStream& stream);

}  // namespace crosstalk::channels
