#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <arpa/inet.h>
#include <netinet/in.h>
#include <sys/socket.h>
#include <unistd.h>

#include "echoia/evaluation.hpp"
#include "echoia/service.hpp"
#include "echoia/simulation.hpp"
#include "helpers.hpp"

using namespace echoia;
using echoia::testing::scalar_sample;
using echoia::testing::tiny_catalog;

namespace {

RuntimeConfig trace_runtime() {
    RuntimeConfig rc;
    rc.scheme = Scheme::echoia;
    rc.window_ms = 2'000;
    rc.hop_ms = 2'000;
    rc.smooth = {1, 1};
    rc.adapt.k = 2;
    rc.adapt.delta_threshold = 3.0;
    rc.adapt.eta_correct = 1.0;
    rc.adapt.eta_incorrect = 0.25;
    rc.retrain.min_windows_per_class = 2;
    rc.svm_c = 10.0;
    return rc;
}

struct Client {
    ControlServer& server;
    ConnectionState conn;
    std::uint64_t seq = 1;
    std::string device;

    std::vector<WireMessage> send(MessageType type, nlohmann::json payload) {
        WireMessage msg;
        msg.type = type;
        msg.seq = seq++;
        msg.device_id = device;
        msg.payload = std::move(payload);
        // through the real codec, like a transport would
        std::vector<WireMessage> replies;
        for (const auto& line : server.handle_line(conn, encode(msg))) {
            replies.push_back(decode(line));
        }
        return replies;
    }

    std::vector<WireMessage> samples(const FeatureCatalog& catalog, std::int64_t t0, int n,
                                     double value, const char* label = nullptr) {
        nlohmann::json arr = nlohmann::json::array();
        for (int i = 0; i < n; ++i) {
            auto js = sample_to_json(scalar_sample(catalog, t0 + i * 1'000, value), catalog);
            if (label != nullptr) {
                js["label"] = label;
            }
            arr.push_back(std::move(js));
        }
        return send(MessageType::SAMPLE_BATCH, {{"samples", std::move(arr)}});
    }
};

} // namespace

TEST_CASE("golden trace: init, lock, passwords, threshold, pin, refresh") {
    const auto catalog = tiny_catalog();
    ControlServer server(catalog, trace_runtime());
    Client cli{server, {}, 1, "dev-a"};

    std::vector<std::pair<MessageType, nlohmann::json>> trace;
    auto record = [&](const std::vector<WireMessage>& replies) {
        for (const auto& r : replies) {
            trace.emplace_back(r.type, r.payload);
        }
    };

    record(cli.send(MessageType::HELLO, {}));
    record(cli.send(MessageType::RANK_RESPONSE,
                    {{"ranks", {{"a", 1}, {"b", 2}, {"c", 3}}}}));
    record(cli.samples(catalog, 0, 4, 3.0, "legitimate"));        // w0 completes
    record(cli.samples(catalog, 4'000, 2, 3.0, "legitimate"));    // w1
    record(cli.samples(catalog, 6'000, 2, -3.0, "illegitimate")); // w2 (legit content)
    record(cli.samples(catalog, 8'000, 2, -3.0, "illegitimate")); // w3 (illegit content)
    record(cli.samples(catalog, 10'000, 2, -3.0, "illegitimate")); // w4 -> model trains
    record(cli.samples(catalog, 12'000, 2, 3.0));                  // w5 decided -> lock
    record(cli.send(MessageType::PASSWORD_EVENT, {{"correct", false}, {"t", 13'500}}));
    record(cli.send(MessageType::PASSWORD_EVENT, {{"correct", true}, {"t", 13'600}}));
    record(cli.samples(catalog, 14'000, 2, -3.0)); // w6 decided legit
    record(cli.samples(catalog, 16'000, 2, 3.0));  // w7 decided illegit -> lock
    record(cli.send(MessageType::PASSWORD_EVENT, {{"correct", true}, {"t", 17'500}}));
    record(cli.samples(catalog, 18'000, 2, -3.0)); // w8 legit
    record(cli.samples(catalog, 20'000, 2, 3.0));  // w9 -> lock
    record(cli.send(MessageType::PASSWORD_EVENT, {{"correct", true}, {"t", 21'500}}));
    record(cli.samples(catalog, 22'000, 2, -3.0)); // w10 legit
    record(cli.samples(catalog, 24'000, 2, 3.0));  // w11 -> lock
    // fourth correct password pushes accumulated loss past the threshold
    record(cli.send(MessageType::PASSWORD_EVENT, {{"correct", true}, {"t", 25'500}}));
    REQUIRE_FALSE(trace.empty());
    REQUIRE(trace.back().first == MessageType::PIN_CHALLENGE);
    const auto token = trace.back().second.at("token").get<std::uint64_t>();
    record(cli.send(MessageType::PIN_RESPONSE,
                    {{"token", token}, {"correct", true}, {"consent", true}, {"t", 26'000}}));

    // the exact expected sequence, one entry per reply message
    struct Expect {
        MessageType type;
        std::int64_t window = -1; // AUTH_RESULT window id, when relevant
        const char* note = "";
    };
    const std::vector<Expect> expected = {
        {MessageType::RANK_REQUEST},
        {MessageType::FEATURE_SET_UPDATE, -1, "v1 a,b"},
        {MessageType::AUTH_RESULT, 0, "init"},
        {MessageType::AUTH_RESULT, 1, "init"},
        {MessageType::AUTH_RESULT, 2, "init"},
        {MessageType::AUTH_RESULT, 3, "init"},
        {MessageType::AUTH_RESULT, 4, "init"},
        {MessageType::AUTH_RESULT, 5, "illegit+lock"},
        {MessageType::LOCKED},
        {MessageType::AUTH_RESULT, 6, "legit"},
        {MessageType::AUTH_RESULT, 7, "illegit+lock"},
        {MessageType::LOCKED},
        {MessageType::AUTH_RESULT, 8, "legit"},
        {MessageType::AUTH_RESULT, 9, "illegit+lock"},
        {MessageType::LOCKED},
        {MessageType::AUTH_RESULT, 10, "legit"},
        {MessageType::AUTH_RESULT, 11, "illegit+lock"},
        {MessageType::LOCKED},
        {MessageType::PIN_CHALLENGE},
        {MessageType::FEATURE_SET_UPDATE, -1, "v2 a,c"},
    };
    REQUIRE(trace.size() == expected.size());
    for (std::size_t i = 0; i < expected.size(); ++i) {
        CAPTURE(i);
        CHECK(trace[i].first == expected[i].type);
        if (expected[i].type == MessageType::AUTH_RESULT && expected[i].window >= 0) {
            CHECK(trace[i].second.at("window_id").get<std::int64_t>() == expected[i].window);
        }
    }
    // the refresh replaced the decayed pair: c promoted, catalog order breaks the floor tie
    const auto& update = trace.back().second;
    CHECK(update.at("version").get<std::uint64_t>() == 2);
    CHECK(update.at("top") == nlohmann::json::array({"a", "c"}));
    CHECK(update.at("reserved") == nlohmann::json::array({"t"}));

    // raw and smoothed labels on the decided windows
    for (const auto& [type, payload] : trace) {
        if (type != MessageType::AUTH_RESULT || payload.contains("phase")) {
            continue;
        }
        const auto id = payload.at("window_id").get<std::int64_t>();
        const bool illegit_window = id == 5 || id == 7 || id == 9 || id == 11;
        CHECK(payload.at("label").get<std::string>() ==
              (illegit_window ? "illegitimate" : "legitimate"));
        CHECK(payload.at("locked").get<bool>() == illegit_window);
    }
}

TEST_CASE("protocol rules: HELLO first, strict seq, batch cap, inbound types") {
    const auto catalog = tiny_catalog();
    ControlServer server(catalog, trace_runtime());

    SUBCASE("message before HELLO closes the connection") {
        ConnectionState conn;
        WireMessage msg;
        msg.type = MessageType::PASSWORD_EVENT;
        msg.seq = 1;
        msg.device_id = "d";
        msg.payload = {{"correct", true}, {"t", 0}};
        const auto replies = server.handle_message(conn, msg);
        REQUIRE(replies.size() == 1);
        CHECK(replies[0].type == MessageType::ERROR);
        CHECK(conn.closed);
    }
    SUBCASE("seq regression closes the connection") {
        Client cli{server, {}, 1, "d"};
        cli.send(MessageType::HELLO, {});
        WireMessage stale;
        stale.type = MessageType::SAMPLE_BATCH;
        stale.seq = 1; // already used
        stale.device_id = "d";
        stale.payload = {{"samples", nlohmann::json::array()}};
        const auto replies = server.handle_message(cli.conn, stale);
        REQUIRE(replies.size() == 1);
        CHECK(replies[0].type == MessageType::ERROR);
        CHECK(cli.conn.closed);
    }
    SUBCASE("oversized batch is an error but keeps the connection open") {
        ControlServer capped(catalog, trace_runtime(), nullptr, 4);
        Client cli{capped, {}, 1, "d"};
        cli.send(MessageType::HELLO, {});
        const auto replies = cli.samples(catalog, 0, 5, 1.0);
        REQUIRE(replies.size() == 1);
        CHECK(replies[0].type == MessageType::ERROR);
        CHECK_FALSE(cli.conn.closed);
        CHECK_FALSE(cli.samples(catalog, 0, 2, 1.0).empty() == true); // still serving
    }
    SUBCASE("unknown wire type replies ERROR and stays open") {
        Client cli{server, {}, 1, "d"};
        cli.send(MessageType::HELLO, {});
        const auto lines = server.handle_line(cli.conn, R"({"type":"BOGUS","seq":9})");
        REQUIRE(lines.size() == 1);
        CHECK(decode(lines[0]).type == MessageType::ERROR);
        CHECK_FALSE(cli.conn.closed);
    }
    SUBCASE("server-to-client type inbound is an error, connection stays open") {
        Client cli{server, {}, 1, "d"};
        cli.send(MessageType::HELLO, {});
        const auto replies = cli.send(MessageType::LOCKED, {{"t", 0}});
        REQUIRE(replies.size() == 1);
        CHECK(replies[0].type == MessageType::ERROR);
        CHECK_FALSE(cli.conn.closed);
    }
    SUBCASE("malformed ranking is an error, connection stays open") {
        Client cli{server, {}, 1, "d"};
        cli.send(MessageType::HELLO, {});
        const auto replies =
            cli.send(MessageType::RANK_RESPONSE, {{"ranks", {{"a", 1}, {"b", 1}, {"c", 3}}}});
        REQUIRE(replies.size() == 1);
        CHECK(replies[0].type == MessageType::ERROR);
        CHECK_FALSE(cli.conn.closed);
    }
}

TEST_CASE("device isolation: traffic for A never mutates B") {
    const auto catalog = tiny_catalog();
    ControlServer server(catalog, trace_runtime());

    Client a{server, {}, 1, "dev-a"};
    Client b{server, {}, 1, "dev-b"};
    a.send(MessageType::HELLO, {});
    b.send(MessageType::HELLO, {});
    b.send(MessageType::RANK_RESPONSE, {{"ranks", {{"a", 3}, {"b", 1}, {"c", 2}}}});

    const DeviceRuntime* rb = server.find_device("dev-b");
    REQUIRE(rb != nullptr);
    const auto b_weights = rb->weights().w;
    const auto b_version = rb->feature_set().version;
    const auto b_phase = rb->session().state;

    // full active session on A
    a.send(MessageType::RANK_RESPONSE, {{"ranks", {{"a", 1}, {"b", 2}, {"c", 3}}}});
    a.samples(catalog, 0, 4, 3.0, "legitimate");
    a.samples(catalog, 4'000, 2, 3.0, "legitimate");
    a.samples(catalog, 6'000, 4, -3.0, "illegitimate");
    a.samples(catalog, 10'000, 4, -3.0, "illegitimate");
    a.samples(catalog, 14'000, 2, 3.0);
    a.send(MessageType::PASSWORD_EVENT, {{"correct", true}, {"t", 15'000}});

    CHECK(rb->weights().w == b_weights);
    CHECK(rb->feature_set().version == b_version);
    CHECK(rb->session().state == b_phase);
    for (const auto& e : rb->deltas().entries) {
        CHECK(e.delta_i == 0.0);
        CHECK(e.delta_c == 0.0);
    }
}

TEST_CASE("wire path and direct path produce identical sessions") {
    const auto cfg = echoia::testing::small_config(21, 3);
    const auto catalog = FeatureCatalog::standard();
    auto [corpus, truth] = gen_corpus(cfg.gen_config(), catalog);
    const auto& device = corpus.devices[1];

    RuntimeConfig rc = cfg.runtime_config(Scheme::echoia);
    const std::int64_t total = window_count(device.duration_ms, rc.window_ms, rc.hop_ms);
    const auto split = split_boundaries(total, 10, 0.15);
    rc.hold_training_until_windows = split.train_end;

    DriverConfig dc;
    dc.prefix_end_ms = split.train_end * rc.hop_ms;
    dc.seed = 5;

    DeviceRuntime runtime(device.device_id, catalog, rc);
    DirectPort direct(runtime);
    const SessionLog direct_log = run_device_session(device, direct, dc);

    ControlServer server(catalog, rc);
    WirePort wire(server, device.device_id);
    const SessionLog wire_log = run_device_session(device, wire, dc);

    CHECK_FALSE(direct_log.aborted);
    CHECK_FALSE(wire_log.aborted);
    REQUIRE(direct_log.decisions.size() == wire_log.decisions.size());
    for (std::size_t i = 0; i < direct_log.decisions.size(); ++i) {
        CHECK(direct_log.decisions[i].window_id == wire_log.decisions[i].window_id);
        CHECK(direct_log.decisions[i].score == wire_log.decisions[i].score);
        CHECK(direct_log.decisions[i].label_legit == wire_log.decisions[i].label_legit);
        CHECK(direct_log.decisions[i].smoothed_legit == wire_log.decisions[i].smoothed_legit);
        CHECK(direct_log.decisions[i].acted == wire_log.decisions[i].acted);
    }
    CHECK(direct_log.events.size() == wire_log.events.size());
    CHECK(direct_log.final_set.top == wire_log.final_set.top);
    CHECK(direct_log.final_set.version == wire_log.final_set.version);
}

TEST_CASE("tcp transport round-trips a HELLO/RANK exchange") {
    const auto catalog = tiny_catalog();
    ControlServer server(catalog, trace_runtime());
    TcpServer tcp(server, 0);
    tcp.start();

    const int fd = ::socket(AF_INET, SOCK_STREAM, 0);
    REQUIRE(fd >= 0);
    sockaddr_in addr{};
    addr.sin_family = AF_INET;
    addr.sin_port = htons(tcp.port());
    addr.sin_addr.s_addr = htonl(INADDR_LOOPBACK);
    REQUIRE(::connect(fd, reinterpret_cast<sockaddr*>(&addr), sizeof(addr)) == 0);

    WireMessage hello;
    hello.type = MessageType::HELLO;
    hello.seq = 1;
    hello.device_id = "tcp-dev";
    const std::string out = encode(hello) + "\n";
    REQUIRE(::send(fd, out.data(), out.size(), 0) == static_cast<ssize_t>(out.size()));

    std::string reply;
    char buf[2048];
    while (reply.find('\n') == std::string::npos) {
        const ssize_t got = ::recv(fd, buf, sizeof(buf), 0);
        REQUIRE(got > 0);
        reply.append(buf, static_cast<std::size_t>(got));
    }
    const auto msg = decode(reply.substr(0, reply.find('\n')));
    CHECK(msg.type == MessageType::RANK_REQUEST);
    CHECK(msg.payload.at("candidates").size() == 3);
    ::close(fd);
    tcp.stop();
}
