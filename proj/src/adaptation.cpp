#include "echoia/adaptation.hpp"

#include <algorithm>
#include <atomic>

namespace echoia {

const char* to_string(SessionPhase p) {
    switch (p) {
    case SessionPhase::unlocked: return "unlocked";
    case SessionPhase::locked_awaiting_password: return "locked_awaiting_password";
    case SessionPhase::pin_challenge_pending: return "pin_challenge_pending";
    }
    return "?";
}

const char* to_string(FeedbackKind k) {
    switch (k) {
    case FeedbackKind::password_correct: return "password_correct";
    case FeedbackKind::password_incorrect: return "password_incorrect";
    case FeedbackKind::pin_correct: return "pin_correct";
    case FeedbackKind::pin_incorrect: return "pin_incorrect";
    }
    return "?";
}

DeltaAccumulator DeltaAccumulator::for_set(const PersonalFeatureSet& set) {
    DeltaAccumulator acc;
    acc.entries.reserve(set.top.size());
    for (FeatureId f : set.top) {
        acc.entries.push_back(Entry{f, 0.0, 0.0});
    }
    return acc;
}

void DeltaAccumulator::reset() {
    for (auto& e : entries) {
        e.delta_i = 0.0;
        e.delta_c = 0.0;
    }
}

void record_password_event(DeltaAccumulator& acc, const FeedbackEvent& event,
                           const AdaptationConfig& cfg) {
    switch (event.kind) {
    case FeedbackKind::password_correct:
        for (auto& e : acc.entries) {
            e.delta_c += cfg.eta_correct;
        }
        break;
    case FeedbackKind::password_incorrect:
        for (auto& e : acc.entries) {
            e.delta_i += cfg.eta_incorrect;
        }
        break;
    default:
        throw WrongEventKind("record_password_event: got a PIN event");
    }
}

bool significant_change(const DeltaAccumulator& acc, const AdaptationConfig& cfg) {
    return std::any_of(acc.entries.begin(), acc.entries.end(), [&](const auto& e) {
        return -e.delta() > cfg.delta_threshold;
    });
}

std::optional<RefreshResult> apply_refresh(const WeightVector& weights,
                                           const PersonalFeatureSet& current,
                                           DeltaAccumulator& acc, bool pin_ok, bool consent,
                                           const AdaptationConfig& cfg,
                                           const FeatureCatalog& catalog) {
    if (!pin_ok || !consent) {
        acc.reset();
        return std::nullopt;
    }
    RefreshResult out;
    out.weights = weights;
    for (const auto& e : acc.entries) {
        const auto idx = static_cast<Eigen::Index>(e.feature.value);
        out.weights.w(idx) = std::max(out.weights.w(idx) + e.delta(), cfg.weight_floor);
    }
    acc.reset();
    out.feature_set = select_top_k(out.weights, cfg.k, catalog);
    out.feature_set.version = current.version + 1;
    acc = DeltaAccumulator::for_set(out.feature_set);
    return out;
}

ChallengeToken issue_pin_challenge(SessionState& session, const std::string& device_id,
                                   std::int64_t now_ms, const AdaptationConfig& cfg) {
    if (session.pending_challenge.has_value()) {
        throw ChallengeAlreadyPending();
    }
    static std::atomic<std::uint64_t> next_id{1};
    ChallengeToken token;
    token.id = next_id.fetch_add(1, std::memory_order_relaxed);
    token.device_id = device_id;
    token.issued_at_ms = now_ms;
    token.expires_at_ms = now_ms + cfg.challenge_timeout_ms;

    session.resume_state = session.state;
    session.state = SessionPhase::pin_challenge_pending;
    session.since_ms = now_ms;
    session.pending_challenge = token;
    return token;
}

void resolve_pin_challenge(SessionState& session, std::int64_t now_ms) {
    session.state = session.resume_state;
    session.since_ms = now_ms;
    session.pending_challenge.reset();
}

} // namespace echoia
