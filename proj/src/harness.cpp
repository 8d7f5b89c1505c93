#include "crosstalk/harness.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

#include <json.hpp>

namespace crosstalk::harness {

using channels::ChannelClass;
using channels::ChannelSpec;
using channels::ChannelTooWeak;
using channels::ChannelUnsupported;
using sim::Simulation;

std::string format_double(double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.6g", v);
    return buf;
}

std::vector<std::uint8_t> seeded_payload(std::size_t bytes, std::uint64_t seed) {
    SubStream stream(seed, "payload");
    std::vector<std::uint8_t> out(bytes);
    for (std::size_t i = 0; i < bytes; ++i)
        out[i] = static_cast<std::uint8_t>(stream.bits(i) & 0xFF);
    return out;
}

bool channel_supported(ChannelId channel, const RouterProfile& profile) {
    return profile.channel_support(channel).any();
}

SegmentId pick_sender_segment(ChannelId channel, const RouterProfile& profile) {
    auto sup = profile.channel_support(channel);
    if (sup.guest_to_host) return SegmentId::Guest;
    if (sup.host_to_guest) return SegmentId::Host;
    throw ChannelUnsupported(std::string(channel_name(channel)) + " not supported on " +
                             profile.model_id);
}

void write_file(const std::string& path, const std::string& content) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write " + path);
    out << content;
}

void write_manifest(const std::string& out_path, const std::string& command,
                    std::uint64_t seed, const RouterProfile* profile,
                    const std::map<std::string, std::string>& args) {
    nlohmann::json j;
    j["command"] = command;
    j["seed"] = seed;
    j["version"] = kVersion;
    if (profile) {
        j["profile"] = profile->model_id;
        char buf[19];
        std::snprintf(buf, sizeof buf, "0x%016llx",
                      static_cast<unsigned long long>(profile->hash()));
        j["profile_hash"] = buf;
    }
    nlohmann::json a = nlohmann::json::object();
    for (const auto& [k, v] : args) a[k] = v;
    j["args"] = a;
    write_file(out_path + ".manifest.json", j.dump(2) + "\n");
}

// ---------------------------------------------------------------------------
// matrix

namespace {

// Behavioral probe of one (channel, profile, direction) cell.
bool probe_direction(ChannelId channel, const RouterProfile& profile, SegmentId sender_segment,
                     std::uint64_t seed, std::uint32_t calibration_probes) {
    try {
        if (channels::channel_class(channel) == ChannelClass::Direct) {
            auto spec = channels::make_spec(channel, sender_segment, profile);
            sim::SimOptions opts;
            opts.record_trace = false;
            opts.emission_log = sim::EmissionLog::Carriers;
            Simulation s(profile, seed, opts);
            std::vector<std::uint8_t> probe_payload = {0xC5, 0x17};
            channels::direct_send(spec, channels::frame_payload(probe_payload), s, 1000);
            s.run_until_idle();
            auto res = channels::direct_receive(spec, profile,
                                                s.emissions_to(spec.receiver_segment));
            return res.crc_ok && res.payload == probe_payload;
        }
        auto spec = channels::make_spec(channel, sender_segment, profile);
        sim::SimOptions opts;
        opts.record_trace = false;
        opts.emission_log = sim::EmissionLog::None;
        Simulation s(profile, seed, opts);
        channels::calibrate(spec, channels::sender_for(spec), channels::receiver_for(spec), s,
                            calibration_probes);
        return true;
    } catch (const ChannelUnsupported&) {
        return false;
    } catch (const ChannelTooWeak&) {
        return false;
    } catch (const gadgets::GadgetUnavailable&) {
        return false;
    } catch (const channels::NoPreamble&) {
        return false;
    }
}

std::string arrow(const sim::DirectionSupport& d) {
    if (d.guest_to_host && d.host_to_guest) return "G<=>H";
    if (d.guest_to_host) return "G=>H";
    if (d.host_to_guest) return "G<=H";
    return "--";
}

std::string direction_word(const sim::DirectionSupport& d) {
    if (d.guest_to_host && d.host_to_guest) return "both";
    if (d.guest_to_host) return "g2h";
    if (d.host_to_guest) return "h2g";
    return "none";
}

}  // namespace

const MatrixCell* MatrixResult::cell(ChannelId c, const std::string& profile) const {
    for (const auto& cell : cells)
        if (cell.channel == c && cell.profile == profile) return &cell;
    return nullptr;
}

std::string MatrixResult::render() const {
    std::ostringstream os;
    os << "channel      ";
    for (const auto& p : profiles) os << ' ' << p << "     ";
    os << '\n';
    for (ChannelId c : sim::all_channels()) {
        os << channel_name(c);
        for (std::size_t i = std::string(channel_name(c)).size(); i < 13; ++i) os << ' ';
        for (const auto& p : profiles) {
            std::string s = "--";
            if (const auto* cl = cell(c, p)) s = arrow(cl->observed);
            os << ' ' << s;
            for (std::size_t i = s.size(); i < 7; ++i) os << ' ';
        }
        os << '\n';
    }
    return os.str();
}

std::string MatrixResult::csv() const {
    std::string out = "channel,profile,support\n";
    for (ChannelId c : sim::all_channels())
        for (const auto& p : profiles) {
            const auto* cl = cell(c, p);
            out += channel_name(c);
            out += ',';
            out += p;
            out += ',';
            out += cl ? direction_word(cl->observed) : "none";
            out += '\n';
        }
    return out;
}

MatrixResult cmd_matrix(std::uint64_t seed, std::uint32_t calibration_probes) {
    MatrixResult result;
    result.profiles = sim::builtin_profile_ids();
    for (const auto& pid : result.profiles) {
        RouterProfile profile = sim::builtin_profile(pid);
        for (ChannelId c : sim::all_channels()) {
            MatrixCell cell;
            cell.channel = c;
            cell.profile = pid;
            cell.observed.guest_to_host =
                probe_direction(c, profile, SegmentId::Guest, seed, calibration_probes);
            cell.observed.host_to_guest =
                probe_direction(c, profile, SegmentId::Host, seed, calibration_probes);
            result.cells.push_back(cell);
        }
    }
    return result;
}

// ---------------------------------------------------------------------------
// ber-sweep

std::string ExperimentResult::csv() const {
    std::string out = "rate_bps,ber\n";
    for (const auto& p : sweep) {
        out += format_double(p.rate_bps);
        out += ',';
        out += format_double(p.ber);
        out += '\n';
    }
    return out;
}

ExperimentResult cmd_ber_sweep(ChannelId channel, const RouterProfile& profile,
                               std::vector<double> rates_bps, std::size_t payload_bytes,
                               std::uint64_t seed, int n_seeds) {
    ExperimentResult result;
    result.channel = channel_name(channel);
    result.profile = profile.model_id;
    result.seed = seed;
    SegmentId sender_segment = pick_sender_segment(channel, profile);

    std::sort(rates_bps.begin(), rates_bps.end());
    for (double rate : rates_bps) {
        SweepPoint point;
        point.rate_bps = rate;
        double ber_sum = 0.0;
        double p_sum = 0.0;
        bool has_p = false;
        for (int i = 0; i < n_seeds; ++i) {
            std::uint64_t run_seed = seed + static_cast<std::uint64_t>(i);
            auto payload = seeded_payload(payload_bytes, run_seed);
            auto res = channels::transfer(channel, sender_segment, profile, payload, rate,
                                          run_seed);
            ber_sum += res.ber;
            if (channels::channel_class(channel) == ChannelClass::Timing) {
                p_sum += res.p_value;
                has_p = true;
            }
        }
        point.ber = ber_sum / n_seeds;
        if (has_p) point.p_value = p_sum / n_seeds;
        result.sweep.push_back(point);
    }
    return result;
}

// ---------------------------------------------------------------------------
// timing-hist

std::string HistogramResult::csv() const {
    std::string out = "load_pps,mean_us,stddev_us,p_vs_idle\n";
    for (const auto& r : rows) {
        out += format_double(r.load_pps);
        out += ',';
        out += format_double(r.mean_us);
        out += ',';
        out += format_double(r.stddev_us);
        out += ',';
        out += r.p_vs_idle ? format_double(*r.p_vs_idle) : "";
        out += '\n';
    }
    return out;
}

std::string HistogramResult::samples_csv() const {
    std::string out = "load_pps,seq,rtt_us\n";
    for (const auto& r : rows)
        for (std::size_t i = 0; i < r.samples_us.size(); ++i) {
            out += format_double(r.load_pps);
            out += ',';
            out += std::to_string(i);
            out += ',';
            out += format_double(r.samples_us[i]);
            out += '\n';
        }
    return out;
}

HistogramResult cmd_timing_histogram(ChannelId channel, const RouterProfile& profile,
                                     std::vector<double> load_rates_pps, std::uint32_t n_probes,
                                     std::uint64_t seed) {
    if (channels::channel_class(channel) != ChannelClass::Timing)
        throw ChannelUnsupported("timing-hist needs a timing channel");

    HistogramResult result;
    result.channel = channel_name(channel);
    result.profile = profile.model_id;
    result.seed = seed;

    SegmentId sender_segment = pick_sender_segment(channel, profile);
    auto spec = channels::make_spec(channel, sender_segment, profile);
    auto sender = channels::sender_for(spec);
    auto receiver = channels::receiver_for(spec);
    gadgets::check_receiver(profile, receiver);

    sim::TimeUs interval = receiver.probe_interval_us
                               ? receiver.probe_interval_us
                               : gadgets::default_probe_interval_us(receiver.kind);
    sim::TimeUs warmup = 100000;
    sim::TimeUs span = static_cast<sim::TimeUs>(n_probes) * interval * 11 / 10 + interval;

    const std::vector<double>* idle = nullptr;
    for (double rate : load_rates_pps) {
        sim::SimOptions opts;
        opts.record_trace = false;
        opts.emission_log = sim::EmissionLog::None;
        Simulation s(profile, seed, opts);
        if (rate > 0) {
            auto loaded = sender;
            loaded.rate_pps = rate;
            gadgets::run_sender(s, loaded, 1000, warmup + span + warmup);
        }
        auto trace = gadgets::run_receiver(s, receiver, n_probes, 1000 + warmup);

        HistogramRow row;
        row.load_pps = rate;
        row.samples_us = trace.clamped_rtts();
        row.mean_us = detect::mean(row.samples_us);
        row.stddev_us = std::sqrt(detect::variance(row.samples_us));
        result.rows.push_back(std::move(row));
    }
    // p-values versus the first zero-load row, when present.
    for (auto& row : result.rows)
        if (row.load_pps == 0.0) {
            idle = &row.samples_us;
            break;
        }
    if (idle) {
        for (auto& row : result.rows) {
            if (&row.samples_us == idle) continue;
            if (row.samples_us.size() >= 2 && idle->size() >= 2)
                row.p_vs_idle = detect::t_test(row.samples_us, *idle).p_value;
        }
    }
    return result;
}

// ---------------------------------------------------------------------------
// quality

std::string QualityResult::csv() const {
    std::string out = "channel,pervasiveness,rate_bps,covertness\n";
    for (const auto& r : rows) {
        out += r.channel;
        out += ',';
        out += format_double(r.pervasiveness);
        out += ',';
        out += format_double(r.rate_bps);
        out += ',';
        out += std::to_string(r.covertness);
        out += '\n';
    }
    return out;
}

std::string QualityResult::render() const {
    std::ostringstream os;
    os << "channel       pervasiveness  rate_bps   covertness\n";
    for (const auto& r : rows) {
        os << r.channel;
        for (std::size_t i = std::string(r.channel).size(); i < 14; ++i) os << ' ';
        char buf[64];
        std::snprintf(buf, sizeof buf, "%-15.3f%-11.1f%d", r.pervasiveness, r.rate_bps,
                      r.covertness);
        os << buf << '\n';
    }
    return os.str();
}

namespace {

// Peak on-air request rate of a channel at its default operating point.
double peak_request_rate(ChannelId channel, const RouterProfile& profile) {
    if (channels::channel_class(channel) == ChannelClass::Direct) {
        double per_symbol = channel == ChannelId::IgmpDirect ? 2.0 : 1.0;
        return channels::default_symbol_rate(channel, pick_sender_segment(channel, profile),
                                             profile) *
               per_symbol;
    }
    double peak = 0.0;
    auto sup = profile.channel_support(channel);
    for (SegmentId seg : {SegmentId::Guest, SegmentId::Host}) {
        if (!sup.from(seg)) continue;
        auto spec = channels::make_spec(channel, seg, profile);
        peak = std::max(peak, channels::sender_for(spec).rate_pps);
    }
    return peak;
}

bool channel_touches_dhcp(ChannelId channel) {
    return channel == ChannelId::DhcpDirect || channel == ChannelId::DhcpArp;
}

}  // namespace

QualityResult cmd_quality(std::uint64_t seed) {
    auto matrix = cmd_matrix(seed);

    QualityResult result;
    for (ChannelId c : sim::all_channels()) {
        QualityRow row;
        row.channel = channel_name(c);

        int supported = 0;
        std::string rep_profile;
        for (const auto& pid : matrix.profiles) {
            const auto* cell = matrix.cell(c, pid);
            if (cell && cell->observed.any()) {
                ++supported;
                if (rep_profile.empty()) rep_profile = pid;
            }
        }
        row.pervasiveness = static_cast<double>(supported) /
                            static_cast<double>(matrix.profiles.size());
        if (supported == 0) {
            row.rate_bps = 0.0;
            row.covertness = 3;
            result.rows.push_back(row);
            continue;
        }

        RouterProfile profile = sim::builtin_profile(rep_profile);
        SegmentId seg = pick_sender_segment(c, profile);
        double sat_bps = channels::saturation_symbol_rate(c, seg, profile) *
                         channels::symbol_payload_bits(c, profile);
        std::vector<double> grid = {0.25 * sat_bps, 0.5 * sat_bps, 0.75 * sat_bps,
                                    0.95 * sat_bps};
        auto sweep = cmd_ber_sweep(c, profile, grid, 32, seed, 1);
        double best = 0.0;
        for (const auto& p : sweep.sweep)
            if (p.ber < 0.05) best = std::max(best, p.rate_bps);
        row.rate_bps = best;

        bool logs = channel_touches_dhcp(c) && profile.logs_dhcp;
        bool high_pps = peak_request_rate(c, profile) > 1000.0;
        row.covertness = 3 - (logs ? 1 : 0) - (high_pps ? 1 : 0);
        result.rows.push_back(row);
    }

    std::sort(result.rows.begin(), result.rows.end(), [](const QualityRow& a, const QualityRow& b) {
        if (a.rate_bps != b.rate_bps) return a.rate_bps > b.rate_bps;
        return a.channel < b.channel;
    });
    return result;
}

// ---------------------------------------------------------------------------
// mitigate

std::string MitigateReport::render() const {
    std::ostringstream os;
    os << "channel=" << channel << " profile=" << profile << " mitigation=" << mode
       << " rate_bps=" << format_double(rate_bps) << '\n';
    os << "before: ber=" << format_double(ber_before);
    if (p_before) os << " p=" << format_double(*p_before);
    os << '\n';
    if (calibration_failed) {
        os << "after:  calibration failed (channel too weak";
        if (p_after) os << ", p=" << format_double(*p_after);
        os << ")\n";
    } else {
        os << "after:  ber=" << format_double(ber_after);
        if (p_after) os << " p=" << format_double(*p_after);
        os << '\n';
    }
    return os.str();
}

std::string MitigateReport::csv() const {
    std::string out = "phase,ber,p_value,calibration_failed\n";
    out += "before," + format_double(ber_before) + ',' +
           (p_before ? format_double(*p_before) : "") + ",0\n";
    out += "after," + (calibration_failed ? std::string("") : format_double(ber_after)) + ',' +
           (p_after ? format_double(*p_after) : "") + ',' +
           (calibration_failed ? "1" : "0") + '\n';
    return out;
}

MitigateReport cmd_mitigate(ChannelId channel, const RouterProfile& profile,
                            const detect::MitigationConfig& mitigation, double rate_bps,
                            std::uint64_t seed) {
    MitigateReport report;
    report.channel = channel_name(channel);
    report.profile = profile.model_id;
    switch (mitigation.mode) {
        case detect::MitigationConfig::Mode::None: report.mode = "none"; break;
        case detect::MitigationConfig::Mode::RandomDelay: report.mode = "random-delay"; break;
        case detect::MitigationConfig::Mode::TimeSlice: report.mode = "time-slice"; break;
    }
    report.rate_bps = rate_bps;

    SegmentId seg = pick_sender_segment(channel, profile);
    auto payload = seeded_payload(64, seed);
    bool timing = channels::channel_class(channel) == ChannelClass::Timing;

    auto before = channels::transfer(channel, seg, profile, payload, rate_bps, seed);
    report.ber_before = before.ber;
    if (timing) report.p_before = before.p_value;

    try {
        auto after = channels::transfer(channel, seg, profile, payload, rate_bps, seed,
                                        mitigation);
        report.ber_after = after.ber;
        if (timing) report.p_after = after.p_value;
    } catch (const ChannelTooWeak& weak) {
        report.calibration_failed = true;
        report.ber_after = 1.0;
        report.p_after = weak.p_value;
    }
    return report;
}

// ---------------------------------------------------------------------------
// chat

ChatLine chat_roundtrip(ChannelId channel, const RouterProfile& profile,
                        const std::string& line, std::uint64_t seed) {
    SegmentId seg = pick_sender_segment(channel, profile);
    std::vector<std::uint8_t> payload(line.begin(), line.end());
    auto res = channels::transfer(channel, seg, profile, payload, 0.0, seed);
    ChatLine out;
    out.text.assign(res.decoded.begin(), res.decoded.end());
    out.latency_s = static_cast<double>(res.elapsed_us) / 1e6;
    out.ber = res.ber;
    return out;
}

}  // namespace crosstalk::harness
