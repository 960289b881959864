#include "echoia/service.hpp"

#include <algorithm>

namespace echoia {

ControlServer::ControlServer(FeatureCatalog catalog, RuntimeConfig runtime_cfg,
                             RecordStore* store, std::size_t max_batch)
    : catalog_(std::move(catalog)),
      runtime_cfg_(runtime_cfg),
      store_(store),
      max_batch_(max_batch) {}

ControlServer::DeviceSlot& ControlServer::slot_for(const std::string& device_id) {
    std::lock_guard lock(registry_mu_);
    auto it = devices_.find(device_id);
    if (it == devices_.end()) {
        it = devices_
                 .emplace(device_id, std::make_unique<DeviceSlot>(device_id, catalog_,
                                                                  runtime_cfg_, store_))
                 .first;
    }
    return *it->second;
}

DeviceRuntime* ControlServer::find_device(const std::string& device_id) {
    std::lock_guard lock(registry_mu_);
    auto it = devices_.find(device_id);
    return it == devices_.end() ? nullptr : &it->second->runtime;
}

WireMessage ControlServer::reply(ConnectionState& conn, MessageType type,
                                 const std::string& device_id, nlohmann::json payload) const {
    WireMessage msg;
    msg.type = type;
    msg.seq = conn.next_server_seq++;
    msg.device_id = device_id;
    msg.payload = std::move(payload);
    return msg;
}

WireMessage ControlServer::error_reply(ConnectionState& conn, const std::string& device_id,
                                       const std::string& what) const {
    return reply(conn, MessageType::ERROR, device_id, nlohmann::json{{"error", what}});
}

void ControlServer::persist_event(const std::string& device_id, const FeedbackEvent& ev) {
    if (store_ == nullptr) {
        return;
    }
    nlohmann::json entry;
    entry["t"] = ev.timestamp_ms;
    entry["kind"] = "event";
    entry["event"] = to_string(ev.kind);
    store_->persist(device_id, entry);
}

std::vector<WireMessage> ControlServer::effects_to_replies(ConnectionState& conn,
                                                           const std::string& device_id,
                                                           const StepEffects& fx) {
    std::vector<WireMessage> out;
    for (std::int64_t id : fx.bootstrap_windows) {
        out.push_back(reply(conn, MessageType::AUTH_RESULT, device_id,
                            {{"window_id", id}, {"phase", "init"}}));
    }
    for (const auto& d : fx.decisions) {
        out.push_back(reply(conn, MessageType::AUTH_RESULT, device_id,
                            {{"window_id", d.window_id},
                             {"t", d.timestamp_ms},
                             {"score", d.score},
                             {"label", d.label_legit ? "legitimate" : "illegitimate"},
                             {"smoothed", d.smoothed_legit ? "legitimate" : "illegitimate"},
                             {"locked", d.acted}}));
    }
    if (fx.lock_fired) {
        std::int64_t t = 0;
        for (const auto& d : fx.decisions) {
            if (d.acted) {
                t = d.timestamp_ms;
            }
        }
        out.push_back(reply(conn, MessageType::LOCKED, device_id, {{"t", t}}));
    }
    if (fx.challenge) {
        out.push_back(reply(conn, MessageType::PIN_CHALLENGE, device_id,
                            {{"token", fx.challenge->id},
                             {"expires_at", fx.challenge->expires_at_ms}}));
    }
    if (fx.feature_set_update) {
        nlohmann::json top = nlohmann::json::array();
        for (FeatureId f : fx.feature_set_update->top) {
            top.push_back(catalog_.name(f));
        }
        nlohmann::json reserved = nlohmann::json::array();
        for (FeatureId f : fx.feature_set_update->reserved) {
            reserved.push_back(catalog_.name(f));
        }
        out.push_back(reply(conn, MessageType::FEATURE_SET_UPDATE, device_id,
                            {{"version", fx.feature_set_update->version},
                             {"top", top},
                             {"reserved", reserved}}));
    }
    for (const auto& ev : fx.events) {
        persist_event(device_id, ev);
    }
    return out;
}

std::vector<WireMessage> ControlServer::handle_message(ConnectionState& conn,
                                                       const WireMessage& msg) {
    if (conn.closed) {
        return {};
    }
    if (msg.seq <= conn.last_client_seq) {
        conn.closed = true;
        return {error_reply(conn, msg.device_id, "seq regression")};
    }
    conn.last_client_seq = msg.seq;

    if (!conn.helloed && msg.type != MessageType::HELLO) {
        conn.closed = true;
        return {error_reply(conn, msg.device_id, "message before HELLO")};
    }

    try {
        switch (msg.type) {
        case MessageType::HELLO: {
            if (msg.device_id.empty()) {
                throw MalformedPayload("HELLO lacks device_id");
            }
            conn.helloed = true;
            conn.device_id = msg.device_id;
            DeviceSlot& slot = slot_for(msg.device_id);
            std::lock_guard lock(slot.mu);
            if (runtime_cfg_.scheme == Scheme::echoia && !slot.runtime.ranked()) {
                nlohmann::json candidates = nlohmann::json::array();
                for (const auto& name : slot.runtime.candidate_names()) {
                    candidates.push_back(name);
                }
                return {reply(conn, MessageType::RANK_REQUEST, msg.device_id,
                              {{"candidates", candidates}})};
            }
            StepEffects fx;
            fx.feature_set_update = slot.runtime.feature_set();
            return effects_to_replies(conn, msg.device_id, fx);
        }
        case MessageType::RANK_RESPONSE: {
            if (msg.device_id != conn.device_id) {
                throw MalformedPayload("device_id does not match connection");
            }
            if (!msg.payload.contains("ranks") || !msg.payload["ranks"].is_object()) {
                throw MalformedPayload("RANK_RESPONSE lacks ranks object");
            }
            RankingResponse ranking;
            for (const auto& [name, rank] : msg.payload["ranks"].items()) {
                const auto f = catalog_.find(name);
                if (!f) {
                    throw MalformedRanking("unknown feature " + name);
                }
                if (!rank.is_number_integer()) {
                    throw MalformedRanking("rank must be an integer");
                }
                ranking.ranks[*f] = rank.get<int>();
            }
            DeviceSlot& slot = slot_for(msg.device_id);
            std::lock_guard lock(slot.mu);
            StepEffects fx;
            fx.feature_set_update = slot.runtime.set_ranking(ranking);
            return effects_to_replies(conn, msg.device_id, fx);
        }
        case MessageType::SAMPLE_BATCH: {
            if (msg.device_id != conn.device_id) {
                throw MalformedPayload("device_id does not match connection");
            }
            if (!msg.payload.contains("samples") || !msg.payload["samples"].is_array()) {
                throw MalformedPayload("SAMPLE_BATCH lacks samples array");
            }
            const auto& arr = msg.payload["samples"];
            if (arr.size() > max_batch_) {
                throw MalformedPayload("batch exceeds " + std::to_string(max_batch_) +
                                       " samples");
            }
            // parse everything before applying anything
            std::vector<BehaviorSample> samples;
            std::vector<std::optional<WindowLabel>> labels;
            samples.reserve(arr.size());
            for (const auto& js : arr) {
                BehaviorSample s = sample_from_json(js, catalog_);
                s.device_id = msg.device_id;
                std::optional<WindowLabel> label;
                if (js.contains("label")) {
                    const auto text = js["label"].get<std::string>();
                    if (text == "legitimate") {
                        label = WindowLabel::legitimate;
                    } else if (text == "illegitimate") {
                        label = WindowLabel::illegitimate;
                    } else {
                        throw MalformedPayload("bad sample label " + text);
                    }
                }
                samples.push_back(std::move(s));
                labels.push_back(label);
            }
            DeviceSlot& slot = slot_for(msg.device_id);
            std::lock_guard lock(slot.mu);
            StepEffects fx;
            for (std::size_t i = 0; i < samples.size(); ++i) {
                if (store_ != nullptr) {
                    nlohmann::json entry = sample_to_json(samples[i], catalog_);
                    entry["kind"] = "sample";
                    store_->persist(msg.device_id, entry);
                }
                fx.merge(slot.runtime.ingest(samples[i], labels[i]));
            }
            return effects_to_replies(conn, msg.device_id, fx);
        }
        case MessageType::PASSWORD_EVENT: {
            if (msg.device_id != conn.device_id) {
                throw MalformedPayload("device_id does not match connection");
            }
            if (!msg.payload.contains("correct") || !msg.payload["correct"].is_boolean() ||
                !msg.payload.contains("t") || !msg.payload["t"].is_number_integer()) {
                throw MalformedPayload("PASSWORD_EVENT needs correct + t");
            }
            DeviceSlot& slot = slot_for(msg.device_id);
            std::lock_guard lock(slot.mu);
            StepEffects fx = slot.runtime.on_password(msg.payload["correct"].get<bool>(),
                                                      msg.payload["t"].get<std::int64_t>());
            return effects_to_replies(conn, msg.device_id, fx);
        }
        case MessageType::PIN_RESPONSE: {
            if (msg.device_id != conn.device_id) {
                throw MalformedPayload("device_id does not match connection");
            }
            if (!msg.payload.contains("token") || !msg.payload.contains("correct") ||
                !msg.payload.contains("consent") || !msg.payload.contains("t")) {
                throw MalformedPayload("PIN_RESPONSE needs token, correct, consent, t");
            }
            DeviceSlot& slot = slot_for(msg.device_id);
            std::lock_guard lock(slot.mu);
            StepEffects fx = slot.runtime.on_pin(msg.payload["token"].get<std::uint64_t>(),
                                                 msg.payload["correct"].get<bool>(),
                                                 msg.payload["consent"].get<bool>(),
                                                 msg.payload["t"].get<std::int64_t>());
            return effects_to_replies(conn, msg.device_id, fx);
        }
        default:
            // server-to-client types arriving inbound
            throw MalformedPayload(std::string("unexpected inbound type ") + to_string(msg.type));
        }
    } catch (const ProtocolViolation& e) {
        conn.closed = true;
        return {error_reply(conn, msg.device_id, e.what())};
    } catch (const Error& e) {
        return {error_reply(conn, msg.device_id, e.what())};
    }
}

std::vector<std::string> ControlServer::handle_line(ConnectionState& conn,
                                                    const std::string& line) {
    std::vector<WireMessage> replies;
    try {
        replies = handle_message(conn, decode(line));
    } catch (const MalformedPayload& e) {
        replies.push_back(error_reply(conn, conn.device_id, e.what()));
    }
    std::vector<std::string> out;
    out.reserve(replies.size());
    for (const auto& r : replies) {
        out.push_back(encode(r));
    }
    return out;
}

} // namespace echoia
