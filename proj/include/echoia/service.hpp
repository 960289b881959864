#pragma once

#include <atomic>
#include <cstdint>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include "echoia/authenticator.hpp"
#include "echoia/protocol.hpp"
#include "echoia/store.hpp"

namespace echoia {

/// Per-connection protocol state. A connection serves one device after its
/// HELLO; client seq must increase strictly, replies carry the server's own
/// strictly increasing seq.
struct ConnectionState {
    bool helloed = false;
    bool closed = false;
    std::string device_id;
    std::uint64_t last_client_seq = 0;
    std::uint64_t next_server_seq = 1;
};

/// The control server: message unit (wire dispatch), control unit (weights
/// and adaptation, inside DeviceRuntime) and authentication unit bindings,
/// plus the per-device record store. Processing for one device is serialized
/// behind a per-device mutex; distinct devices proceed concurrently.
class ControlServer {
public:
    ControlServer(FeatureCatalog catalog, RuntimeConfig runtime_cfg,
                  RecordStore* store = nullptr, std::size_t max_batch = 256);

    /// Dispatches one message, returns the replies. Protocol violations
    /// (message before HELLO, seq regression) close the connection after the
    /// ERROR reply; payload problems leave it open.
    std::vector<WireMessage> handle_message(ConnectionState& conn, const WireMessage& msg);

    /// Convenience for transports: decode, dispatch, encode. Malformed lines
    /// yield an encoded ERROR reply and leave the connection open.
    std::vector<std::string> handle_line(ConnectionState& conn, const std::string& line);

    DeviceRuntime* find_device(const std::string& device_id);
    const FeatureCatalog& catalog() const { return catalog_; }

private:
    struct DeviceSlot {
        std::mutex mu;
        DeviceRuntime runtime;

        DeviceSlot(std::string id, const FeatureCatalog& cat, RuntimeConfig cfg,
                   RecordStore* store)
            : runtime(std::move(id), cat, cfg, store) {}
    };

    DeviceSlot& slot_for(const std::string& device_id);
    WireMessage reply(ConnectionState& conn, MessageType type, const std::string& device_id,
                      nlohmann::json payload) const;
    WireMessage error_reply(ConnectionState& conn, const std::string& device_id,
                            const std::string& what) const;
    std::vector<WireMessage> effects_to_replies(ConnectionState& conn,
                                                const std::string& device_id,
                                                const StepEffects& fx);
    void persist_event(const std::string& device_id, const FeedbackEvent& ev);

    FeatureCatalog catalog_;
    RuntimeConfig runtime_cfg_;
    RecordStore* store_;
    std::size_t max_batch_;

    std::mutex registry_mu_;
    std::map<std::string, std::unique_ptr<DeviceSlot>> devices_;
};

/// Blocking newline-delimited TCP front end for a ControlServer, one thread
/// per connection.
class TcpServer {
public:
    TcpServer(ControlServer& server, std::uint16_t port);
    ~TcpServer();

    void start();
    void stop();
    std::uint16_t port() const { return port_; }

private:
    void accept_loop();
    void serve_connection(int fd);

    ControlServer& server_;
    std::uint16_t port_;
    int listen_fd_ = -1;
    std::atomic<bool> running_{false};
    std::thread accept_thread_;
    std::mutex workers_mu_;
    std::vector<std::thread> workers_;
};

} // namespace echoia
