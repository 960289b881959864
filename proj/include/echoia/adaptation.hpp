#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "echoia/errors.hpp"
#include "echoia/features.hpp"
#include "echoia/session.hpp"

namespace echoia {

struct AdaptationConfig {
    double delta_threshold = 3.0; // accumulated confidence loss that triggers a PIN challenge
    double eta_incorrect = 0.25;  // per incorrect-password increment of delta_i
    double eta_correct = 1.0;     // per correct-password increment of delta_c
    double weight_floor = 1e-6;   // weights stay strictly positive after a refresh
    int k = 5;                    // size of the top set
    std::int64_t challenge_timeout_ms = 120'000;
};

enum class FeedbackKind {
    password_correct,
    password_incorrect,
    pin_correct,
    pin_incorrect,
};

const char* to_string(FeedbackKind k);

struct FeedbackEvent {
    FeedbackKind kind = FeedbackKind::password_correct;
    std::int64_t timestamp_ms = 0;
    std::string device_id;
};

/// Per-feature feedback state over the current top set. delta_i accumulates
/// evidence from incorrect passwords, delta_c from correct ones; the working
/// quantity is delta() = delta_i - delta_c.
struct DeltaAccumulator {
    struct Entry {
        FeatureId feature;
        double delta_i = 0.0;
        double delta_c = 0.0;

        double delta() const { return delta_i - delta_c; }
    };

    std::vector<Entry> entries;

    static DeltaAccumulator for_set(const PersonalFeatureSet& set);
    void reset();
};

/// Folds one password event into the accumulator: correct passwords add
/// eta_correct to every delta_c, incorrect ones add eta_incorrect to every
/// delta_i. Throws WrongEventKind on PIN events.
void record_password_event(DeltaAccumulator& acc, const FeedbackEvent& event,
                           const AdaptationConfig& cfg);

/// True iff some top-set feature has lost more than delta_threshold of
/// confidence, i.e. -delta() > threshold.
bool significant_change(const DeltaAccumulator& acc, const AdaptationConfig& cfg);

struct RefreshResult {
    WeightVector weights;
    PersonalFeatureSet feature_set;
};

/// PIN-gated refresh. With a correct PIN and user consent, every top-set
/// weight becomes max(w + delta, weight_floor), the top set is reselected and
/// its version incremented. In every case the accumulator resets, so a
/// declined or failed challenge disarms the trigger instead of re-firing on
/// the next event.
std::optional<RefreshResult> apply_refresh(const WeightVector& weights,
                                           const PersonalFeatureSet& current,
                                           DeltaAccumulator& acc, bool pin_ok, bool consent,
                                           const AdaptationConfig& cfg,
                                           const FeatureCatalog& catalog);

/// Issues a single-use PIN challenge and parks the session in
/// pin_challenge_pending until the response (or expiry) resolves it.
/// Throws ChallengeAlreadyPending if one is outstanding.
ChallengeToken issue_pin_challenge(SessionState& session, const std::string& device_id,
                                   std::int64_t now_ms, const AdaptationConfig& cfg);

/// Leaves pin_challenge_pending, restoring the pre-challenge session state.
void resolve_pin_challenge(SessionState& session, std::int64_t now_ms);

} // namespace echoia
