#include "echoia/protocol.hpp"

#include <algorithm>

namespace echoia {

const char* to_string(MessageType t) {
    switch (t) {
    case MessageType::HELLO: return "HELLO";
    case MessageType::RANK_REQUEST: return "RANK_REQUEST";
    case MessageType::RANK_RESPONSE: return "RANK_RESPONSE";
    case MessageType::SAMPLE_BATCH: return "SAMPLE_BATCH";
    case MessageType::AUTH_RESULT: return "AUTH_RESULT";
    case MessageType::LOCKED: return "LOCKED";
    case MessageType::PASSWORD_EVENT: return "PASSWORD_EVENT";
    case MessageType::PIN_CHALLENGE: return "PIN_CHALLENGE";
    case MessageType::PIN_RESPONSE: return "PIN_RESPONSE";
    case MessageType::FEATURE_SET_UPDATE: return "FEATURE_SET_UPDATE";
    case MessageType::ERROR: return "ERROR";
    }
    return "?";
}

std::optional<MessageType> message_type_from_string(const std::string& s) {
    static const std::pair<const char*, MessageType> table[] = {
        {"HELLO", MessageType::HELLO},
        {"RANK_REQUEST", MessageType::RANK_REQUEST},
        {"RANK_RESPONSE", MessageType::RANK_RESPONSE},
        {"SAMPLE_BATCH", MessageType::SAMPLE_BATCH},
        {"AUTH_RESULT", MessageType::AUTH_RESULT},
        {"LOCKED", MessageType::LOCKED},
        {"PASSWORD_EVENT", MessageType::PASSWORD_EVENT},
        {"PIN_CHALLENGE", MessageType::PIN_CHALLENGE},
        {"PIN_RESPONSE", MessageType::PIN_RESPONSE},
        {"FEATURE_SET_UPDATE", MessageType::FEATURE_SET_UPDATE},
        {"ERROR", MessageType::ERROR},
    };
    for (const auto& [name, type] : table) {
        if (s == name) {
            return type;
        }
    }
    return std::nullopt;
}

std::string encode(const WireMessage& msg) {
    nlohmann::json j = msg.payload.is_object() ? msg.payload : nlohmann::json::object();
    j["type"] = to_string(msg.type);
    j["seq"] = msg.seq;
    j["device_id"] = msg.device_id;
    return j.dump();
}

WireMessage decode(const std::string& line) {
    auto j = nlohmann::json::parse(line, nullptr, false);
    if (j.is_discarded() || !j.is_object()) {
        throw MalformedPayload("message line is not a JSON object");
    }
    if (!j.contains("type") || !j["type"].is_string()) {
        throw MalformedPayload("message lacks type");
    }
    const auto type = message_type_from_string(j["type"].get<std::string>());
    if (!type) {
        throw MalformedPayload("unknown message type " + j["type"].get<std::string>());
    }
    if (!j.contains("seq") || !j["seq"].is_number_unsigned()) {
        throw MalformedPayload("message lacks unsigned seq");
    }
    WireMessage msg;
    msg.type = *type;
    msg.seq = j["seq"].get<std::uint64_t>();
    msg.device_id = j.value("device_id", std::string{});
    j.erase("type");
    j.erase("seq");
    j.erase("device_id");
    msg.payload = std::move(j);
    return msg;
}

nlohmann::json sample_to_json(const BehaviorSample& s, const FeatureCatalog& catalog) {
    nlohmann::json readings = nlohmann::json::object();
    std::vector<std::string> hashed;
    for (const auto& r : s.readings) {
        const auto& name = catalog.name(r.feature);
        readings[name] = std::vector<double>(r.values.data(), r.values.data() + r.values.size());
        if (r.hashed) {
            hashed.push_back(name);
        }
    }
    nlohmann::json j;
    j["t"] = s.timestamp_ms;
    j["readings"] = std::move(readings);
    j["hashed"] = std::move(hashed);
    return j;
}

BehaviorSample sample_from_json(const nlohmann::json& j, const FeatureCatalog& catalog) {
    BehaviorSample s;
    if (!j.contains("t") || !j["t"].is_number_integer()) {
        throw MalformedPayload("sample lacks integer timestamp");
    }
    s.timestamp_ms = j["t"].get<std::int64_t>();
    const auto hashed = j.value("hashed", std::vector<std::string>{});
    if (j.contains("readings")) {
        if (!j["readings"].is_object()) {
            throw MalformedPayload("sample readings must be an object");
        }
        for (const auto& [name, values] : j["readings"].items()) {
            const auto f = catalog.find(name);
            if (!f) {
                throw MalformedPayload("unknown feature " + name);
            }
            if (!values.is_array()) {
                throw MalformedPayload("feature values must be an array");
            }
            BehaviorSample::Reading r;
            r.feature = *f;
            const auto vec = values.get<std::vector<double>>();
            r.values = Eigen::Map<const Eigen::VectorXd>(vec.data(),
                                                         static_cast<Eigen::Index>(vec.size()));
            r.hashed = std::find(hashed.begin(), hashed.end(), name) != hashed.end();
            s.readings.push_back(std::move(r));
        }
    }
    std::sort(s.readings.begin(), s.readings.end(),
              [](const auto& a, const auto& b) { return a.feature < b.feature; });
    return s;
}

} // namespace echoia
