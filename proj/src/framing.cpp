#include "crosstalk/framing.hpp"

#include "crosstalk/bytes.hpp"

namespace crosstalk::channels {

std::uint16_t crc16_ccitt(std::span<const std::uint8_t> data) {
    std::uint16_t crc = 0xFFFF;
    for (std::uint8_t byte : data) {
        crc ^= static_cast<std::uint16_t>(byte) << 8;
        for (int i = 0; i < 8; ++i)
            crc = (crc & 0x8000) ? static_cast<std::uint16_t>((crc << 1) ^ 0x1021)
                                 : static_cast<std::uint16_t>(crc << 1);
    }
    return crc;
}

namespace {

std::uint16_t frame_crc(std::uint16_t length, std::span<const std::uint8_t> payload) {
    ByteWriter w;
    w.u16(length);
    std::vector<std::uint8_t> buf = w.take();
    buf.insert(buf.end(), payload.begin(), payload.end());
    return crc16_ccitt(buf);
}

}  // namespace

std::vector<ChannelFrame> frame_payload(std::span<const std::uint8_t> payload) {
    std::vector<ChannelFrame> frames;
    std::size_t off = 0;
    do {
        std::size_t n = std::min(payload.size() - off, kMaxFramePayload);
        ChannelFrame f;
        f.length = static_cast<std::uint16_t>(n);
        f.payload.assign(payload.begin() + off, payload.begin() + off + n);
        f.checksum = frame_crc(f.length, f.payload);
        frames.push_back(std::move(f));
        off += n;
    } while (off < payload.size());
    return frames;
}

std::size_t framed_bit_count(std::size_t payload_bytes) {
    std::size_t full = payload_bytes / kMaxFramePayload;
    std::size_t rest = payload_bytes % kMaxFramePayload;
    std::size_t frames = full + ((rest > 0 || payload_bytes == 0) ? 1 : 0);
    return payload_bytes * 8 + frames * kFrameOverheadBits;
}

BitStream frames_to_bits(const std::vector<ChannelFrame>& frames) {
    BitStream out;
    for (const auto& f : frames) {
        out.push_word(kFramePreamble, 16);
        out.push_word(f.length, 16);
        for (std::uint8_t b : f.payload) out.push_word(b, 8);
        out.push_word(f.checksum, 16);
    }
    return out;
}

namespace {

// Reads a word treating unknown bits as zero; reports whether all bits were
// known.
std::uint32_t read_word(const BitStream& s, std::size_t pos, int width, bool& all_known) {
    std::uint32_t v = 0;
    for (int i = 0; i < width; ++i) {
        std::size_t p = pos + static_cast<std::size_t>(i);
        v <<= 1;
        if (p < s.size()) {
            v |= s.bits[p];
            if (!s.known[p]) all_known = false;
        } else {
            all_known = false;
        }
    }
    return v;
}

bool preamble_at(const BitStream& s, std::size_t pos) {
    if (pos + 16 > s.size()) return false;
    for (int i = 0; i < 16; ++i) {
        std::size_t p = pos + static_cast<std::size_t>(i);
        if (!s.known[p]) return false;
        if (s.bits[p] != ((kFramePreamble >> (15 - i)) & 1)) return false;
    }
    return true;
}

}  // namespace

DeframeResult deframe(const BitStream& stream) {
    DeframeResult result;
    std::size_t pos = 0;
    bool found_any = false;
    std::size_t slipped = 0;

    while (pos + 16 <= stream.size()) {
        if (!preamble_at(stream, pos)) {
            ++pos;
            ++slipped;
            continue;
        }
        // Bits skipped between two frames mean damage; leading or trailing
        // slack (idle symbols, padding) is expected.
        if (found_any && slipped > 0) result.crc_ok = false;
        slipped = 0;
        found_any = true;
        pos += 16;

        bool len_known = true;
        std::uint16_t length = static_cast<std::uint16_t>(read_word(stream, pos, 16, len_known));
        pos += 16;
        if (!len_known) result.crc_ok = false;

        std::size_t want_bits = static_cast<std::size_t>(length) * 8;
        std::size_t have_bits = stream.size() > pos ? stream.size() - pos : 0;
        std::size_t take_bits = std::min(want_bits, have_bits);

        std::vector<std::uint8_t> payload((want_bits + 7) / 8, 0);
        for (std::size_t i = 0; i < want_bits; ++i) {
            bool ok = i < take_bits && stream.known[pos + i];
            std::uint8_t bit = i < take_bits ? stream.bits[pos + i] : 0;
            if (bit) payload[i / 8] |= static_cast<std::uint8_t>(0x80 >> (i % 8));
            result.bit_valid.push_back(ok ? 1 : 0);
            if (!ok) {
                ++result.erased_bits;
                result.crc_ok = false;
            }
        }
        pos += take_bits;

        bool crc_known = true;
        std::uint16_t crc = static_cast<std::uint16_t>(read_word(stream, pos, 16, crc_known));
        pos += std::min<std::size_t>(16, stream.size() - std::min(pos, stream.size()));

        if (!crc_known || crc != frame_crc(length, payload))
            result.crc_ok = false;

        result.payload.insert(result.payload.end(), payload.begin(), payload.end());
        ++result.frames;
    }

    if (!found_any) throw NoPreamble("no frame preamble in bit stream");
    return result;
}

}  // namespace crosstalk::channels
