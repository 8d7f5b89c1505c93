// crosstalk: host/guest router isolation test bench.
//
// Simulates a two-segment router and drives the cross-segment leak channels
// against it: support matrix, BER sweeps, timing histograms, quality
// scoring, a chat demo, and mitigation reports.

#include "crosstalk/harness.hpp"

#include <CLI11.hpp>
#include <httplib.h>

#include <iostream>
#include <sstream>

using namespace crosstalk;

namespace {

std::vector<double> parse_rate_list(const std::string& csv) {
    std::vector<double> out;
    std::stringstream ss(csv);
    std::string tok;
    while (std::getline(ss, tok, ',')) {
        if (!tok.empty()) out.push_back(std::stod(tok));
    }
    return out;
}

struct CommonArgs {
    std::string profile = "TP2";
    std::string channel = "dhcp-direct";
    std::uint64_t seed = 1;
    std::string out;
};

void add_common(CLI::App* cmd, CommonArgs& args, bool needs_channel = true) {
    cmd->add_option("--profile", args.profile, "Router model id (TP1..LS1) or profile json path");
    if (needs_channel) cmd->add_option("--channel", args.channel, "Channel name (e.g. arp-arp)");
    cmd->add_option("--seed", args.seed, "Random seed");
    cmd->add_option("--out", args.out, "Output file (csv); a .manifest.json is written next to it");
}

int run_chat(const CommonArgs& args, const std::string& role, int listen_port,
             const std::string& connect_to) {
    auto profile = sim::resolve_profile(args.profile);
    auto channel = sim::channel_from_name(args.channel);
    if (!harness::channel_supported(channel, profile)) {
        std::cerr << "channel " << args.channel << " unsupported on " << profile.model_id << "\n";
        return 2;
    }

    if (role == "receiver") {
        // Hosts the shared simulation; peers POST lines to /send.
        httplib::Server server;
        std::uint64_t line_seed = args.seed;
        server.Post("/send", [&](const httplib::Request& req, httplib::Response& res) {
            auto line = harness::chat_roundtrip(channel, profile, req.body, line_seed++);
            std::cout << line.text << "   [" << harness::format_double(line.latency_s)
                      << "s over " << args.channel << "]" << std::endl;
            res.set_content(line.text, "text/plain");
        });
        std::cout << "listening on port " << listen_port << ", channel " << args.channel
                  << ", profile " << profile.model_id << std::endl;
        server.listen("127.0.0.1", listen_port);
        return 0;
    }

    if (role == "sender") {
        std::string host = "127.0.0.1";
        int port = listen_port;
        if (!connect_to.empty()) {
            auto colon = connect_to.find(':');
            host = connect_to.substr(0, colon);
            if (colon != std::string::npos) port = std::stoi(connect_to.substr(colon + 1));
        }
        httplib::Client client(host, port);
        std::string line;
        while (std::getline(std::cin, line)) {
            auto res = client.Post("/send", line, "text/plain");
            if (!res) {
                std::cerr << "bridge unreachable\n";
                return 2;
            }
        }
        return 0;
    }

    // Both endpoints against one in-process simulation per line.
    std::uint64_t line_seed = args.seed;
    std::string line;
    while (std::getline(std::cin, line)) {
        auto reply = harness::chat_roundtrip(channel, profile, line, line_seed++);
        std::cout << reply.text << "   [" << harness::format_double(reply.latency_s) << "s over "
                  << args.channel << "]" << std::endl;
    }
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"crosstalk: router host/guest isolation test bench"};
    app.require_subcommand(1);

    CommonArgs args;

    auto* matrix = app.add_subcommand("matrix", "Channel support grid over the built-in models");
    std::uint32_t probes = 300;
    add_common(matrix, args, false);
    matrix->add_option("--probes", probes, "Calibration probes per condition");

    auto* sweep = app.add_subcommand("ber-sweep", "Bit error rate versus bit rate");
    std::string rates = "1000,2000,3000,4000,5000";
    std::size_t payload_bytes = 256;
    int n_seeds = 5;
    add_common(sweep, args);
    sweep->add_option("--rates", rates, "Comma-separated bit rates (bps)");
    sweep->add_option("--payload-bytes", payload_bytes, "Payload size per point");
    sweep->add_option("--seeds", n_seeds, "Seeds averaged per point");

    auto* hist = app.add_subcommand("timing-hist", "Probe RTT distributions under load");
    std::string loads = "0,100,200,400,800";
    std::uint32_t n_probes = 1000;
    add_common(hist, args);
    hist->add_option("--loads", loads, "Comma-separated sender loads (pps)");
    hist->add_option("--n", n_probes, "Probes per load level");

    auto* quality = app.add_subcommand("quality", "Pervasiveness / rate / covertness scores");
    add_common(quality, args, false);

    auto* chat = app.add_subcommand("chat", "Line chat across a covert channel");
    std::string role = "both";
    int listen_port = 8471;
    std::string connect_to;
    add_common(chat, args);
    chat->add_option("--role", role, "both | receiver | sender");
    chat->add_option("--listen", listen_port, "Bridge port (receiver role)");
    chat->add_option("--connect", connect_to, "host:port of the receiver bridge (sender role)");

    auto* mitigate = app.add_subcommand("mitigate", "Channel quality before/after a mitigation");
    std::string mode = "time-slice";
    std::uint64_t max_delay_us = 2000;
    std::uint64_t slice_us = 50000;
    double rate_bps = 0.0;
    add_common(mitigate, args);
    mitigate->add_option("--mitigation", mode, "none | random-delay | time-slice");
    mitigate->add_option("--max-delay-us", max_delay_us, "RandomDelay bound");
    mitigate->add_option("--slice-us", slice_us, "TimeSlice width");
    mitigate->add_option("--rate", rate_bps, "Bit rate (bps, 0 = channel default)");

    CLI11_PARSE(app, argc, argv);

    try {
        if (matrix->parsed()) {
            auto result = harness::cmd_matrix(args.seed, probes);
            std::cout << result.render();
            if (!args.out.empty()) {
                harness::write_file(args.out, result.csv());
                harness::write_manifest(args.out, "matrix", args.seed, nullptr,
                                        {{"probes", std::to_string(probes)}});
            }
        } else if (sweep->parsed()) {
            auto profile = sim::resolve_profile(args.profile);
            auto channel = sim::channel_from_name(args.channel);
            auto result = harness::cmd_ber_sweep(channel, profile, parse_rate_list(rates),
                                                 payload_bytes, args.seed, n_seeds);
            std::cout << result.csv();
            if (!args.out.empty()) {
                harness::write_file(args.out, result.csv());
                harness::write_manifest(args.out, "ber-sweep", args.seed, &profile,
                                        {{"channel", args.channel},
                                         {"rates", rates},
                                         {"payload_bytes", std::to_string(payload_bytes)},
                                         {"seeds", std::to_string(n_seeds)}});
            }
        } else if (hist->parsed()) {
            auto profile = sim::resolve_profile(args.profile);
            auto channel = sim::channel_from_name(args.channel);
            auto result = harness::cmd_timing_histogram(channel, profile, parse_rate_list(loads),
                                                        n_probes, args.seed);
            std::cout << result.csv();
            if (!args.out.empty()) {
                harness::write_file(args.out, result.csv());
                harness::write_file(args.out + ".samples", result.samples_csv());
                harness::write_manifest(args.out, "timing-hist", args.seed, &profile,
                                        {{"channel", args.channel},
                                         {"loads", loads},
                                         {"n", std::to_string(n_probes)}});
            }
        } else if (quality->parsed()) {
            auto result = harness::cmd_quality(args.seed);
            std::cout << result.render();
            if (!args.out.empty()) {
                harness::write_file(args.out, result.csv());
                harness::write_manifest(args.out, "quality", args.seed, nullptr, {});
            }
        } else if (chat->parsed()) {
            return run_chat(args, role, listen_port, connect_to);
        } else if (mitigate->parsed()) {
            auto profile = sim::resolve_profile(args.profile);
            auto channel = sim::channel_from_name(args.channel);
            detect::MitigationConfig config;
            if (mode == "random-delay") config = detect::MitigationConfig::random_delay(max_delay_us);
            else if (mode == "time-slice") config = detect::MitigationConfig::time_slice(slice_us);
            else if (mode != "none") throw std::invalid_argument("unknown mitigation: " + mode);
            auto report = harness::cmd_mitigate(channel, profile, config, rate_bps, args.seed);
            std::cout << report.render();
            if (!args.out.empty()) {
                harness::write_file(args.out, report.csv());
                harness::write_manifest(args.out, "mitigate", args.seed, &profile,
                                        {{"channel", args.channel},
                                         {"mitigation", mode},
                                         {"rate", harness::format_double(rate_bps)}});
            }
        }
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
    return 0;
}
