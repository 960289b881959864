#pragma once

#include <cstdint>
#include <deque>
#include <optional>
#include <string>

namespace echoia {

enum class SessionPhase {
    unlocked,
    locked_awaiting_password,
    pin_challenge_pending,
};

const char* to_string(SessionPhase p);

/// Single-use PIN challenge. The challenge gates any personal-feature update;
/// a response after expires_at_ms counts as an incorrect PIN.
struct ChallengeToken {
    std::uint64_t id = 0;
    std::string device_id;
    std::int64_t issued_at_ms = 0;
    std::int64_t expires_at_ms = 0;
};

/// Per-device session machine. recent_illegit is the sliding label history
/// feeding the m-of-n lock rule; it clears whenever the device unlocks.
struct SessionState {
    SessionPhase state = SessionPhase::unlocked;
    std::int64_t since_ms = 0;
    int consecutive_illegit = 0;
    std::deque<bool> recent_illegit;

    std::optional<ChallengeToken> pending_challenge;
    SessionPhase resume_state = SessionPhase::unlocked; // state to restore after the challenge
};

} // namespace echoia
