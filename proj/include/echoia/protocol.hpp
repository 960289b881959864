#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "echoia/errors.hpp"
#include "echoia/features.hpp"
#include "echoia/window.hpp"

namespace echoia {

enum class MessageType {
    HELLO,
    RANK_REQUEST,
    RANK_RESPONSE,
    SAMPLE_BATCH,
    AUTH_RESULT,
    LOCKED,
    PASSWORD_EVENT,
    PIN_CHALLENGE,
    PIN_RESPONSE,
    FEATURE_SET_UPDATE,
    ERROR,
};

const char* to_string(MessageType t);
std::optional<MessageType> message_type_from_string(const std::string& s);

/// One protocol message: a flat JSON object per line with mandatory "type",
/// "seq" and "device_id"; everything else is the type-specific payload.
/// seq increases strictly per connection and direction.
struct WireMessage {
    MessageType type = MessageType::ERROR;
    std::uint64_t seq = 0;
    std::string device_id;
    nlohmann::json payload = nlohmann::json::object();

    friend bool operator==(const WireMessage& a, const WireMessage& b) {
        return a.type == b.type && a.seq == b.seq && a.device_id == b.device_id &&
               a.payload == b.payload;
    }
};

/// Single line, no trailing newline. Numeric fields are decimal; timestamps
/// are integer milliseconds UTC.
std::string encode(const WireMessage& msg);

/// Throws MalformedPayload on anything that is not a valid message line.
WireMessage decode(const std::string& line);

/// Sample <-> JSON for SAMPLE_BATCH payloads and store entries. Feature names
/// resolve against the catalog; unknown features throw MalformedPayload.
nlohmann::json sample_to_json(const BehaviorSample& s, const FeatureCatalog& catalog);
BehaviorSample sample_from_json(const nlohmann::json& j, const FeatureCatalog& catalog);

} // namespace echoia
