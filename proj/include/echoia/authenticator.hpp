#pragma once

#include <cstdint>
#include <deque>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "echoia/adaptation.hpp"
#include "echoia/features.hpp"
#include "echoia/session.hpp"
#include "echoia/store.hpp"
#include "echoia/svm.hpp"
#include "echoia/window.hpp"

namespace echoia {

enum class Scheme { echoia, fixed_all_features };

const char* to_string(Scheme s);
std::optional<Scheme> scheme_from_string(const std::string& s);

struct SmootherConfig {
    int m = 3;
    int n = 5;
};

struct AuthDecision {
    std::int64_t window_id = 0;
    std::int64_t timestamp_ms = 0;
    double score = 0.0;
    bool label_legit = true;
    bool smoothed_legit = true;
    bool acted = false; // a lock transition fired on this window
};

/// Scores one window and advances the session machine: the device locks iff
/// at least m of the last n window labels (this one included) are
/// illegitimate. Precondition: session is unlocked.
AuthDecision decide(const SvmModel& model, const WindowVector& window, SessionState& session,
                    const SmootherConfig& smoothing, std::int64_t now_ms);

/// Handles a password attempt on a locked device: correct unlocks, incorrect
/// keeps it locked; either way the matching feedback event is returned for
/// the adaptation engine. Throws NotLocked.
FeedbackEvent handle_password(SessionState& session, bool correct, std::int64_t now_ms,
                              const std::string& device_id);

struct RetrainConfig {
    int min_windows_per_class = 8;
    std::int64_t periodic_every_accepted = 500;
    std::size_t buffer_cap_per_class = 512;
};

/// Labeled full-layout windows available for (re)training, bounded per class.
class TrainingBuffer {
public:
    explicit TrainingBuffer(std::size_t cap_per_class) : cap_(cap_per_class) {}

    void add(WindowVector full_window, WindowLabel label);
    std::size_t legit_count() const { return legit_.size(); }
    std::size_t illegit_count() const { return illegit_.size(); }

    /// Training matrix/labels in the given sub-layout of the full layout.
    std::pair<Eigen::MatrixXd, std::vector<int>> assemble(const WindowLayout& layout,
                                                          const WindowLayout& full) const;

private:
    std::size_t cap_;
    std::deque<WindowVector> legit_;
    std::deque<WindowVector> illegit_;
};

struct RuntimeConfig {
    Scheme scheme = Scheme::echoia;
    AdaptationConfig adapt;
    SmootherConfig smooth;
    RetrainConfig retrain;
    std::int64_t window_ms = 30'000;
    std::int64_t hop_ms = 15'000;
    double svm_c = 1.0;
    // initial training waits for this many assembled windows, so an evaluation
    // can pin the training prefix; 0 trains as soon as the buffer allows
    std::int64_t hold_training_until_windows = 0;
};

/// Everything one message or sample step caused, for the service layer (and
/// harness) to turn into replies and logs.
struct StepEffects {
    std::vector<AuthDecision> decisions;
    std::vector<std::int64_t> bootstrap_windows; // assembled before a model exists
    bool lock_fired = false;
    std::optional<ChallengeToken> challenge;
    std::optional<PersonalFeatureSet> feature_set_update;
    std::vector<FeedbackEvent> events;
    bool model_trained = false;

    void merge(StepEffects&& other);
};

/// Per-device engine: control unit (weights, deltas, refresh) plus
/// authentication unit (windows, SVM decisions, session machine, retraining).
/// All calls for one device must be serialized by the owner; distinct devices
/// are independent.
class DeviceRuntime {
public:
    DeviceRuntime(std::string device_id, const FeatureCatalog& catalog, RuntimeConfig cfg,
                  RecordStore* store = nullptr);

    const std::string& device_id() const { return device_id_; }
    const FeatureCatalog& catalog() const { return catalog_; }
    const RuntimeConfig& config() const { return cfg_; }

    bool ranked() const { return ranked_; }
    bool has_model() const { return model_.has_value(); }
    const SvmModel& model() const { return *model_; }
    const SessionState& session() const { return session_; }
    const PersonalFeatureSet& feature_set() const { return feature_set_; }
    const WeightVector& weights() const { return weights_; }
    const DeltaAccumulator& deltas() const { return deltas_; }
    const std::vector<AuthDecision>& decision_log() const { return decision_log_; }

    /// Candidate names for a RANK_REQUEST.
    std::vector<std::string> candidate_names() const;

    /// Applies the user's initialization-phase ranking: weights become 1/r
    /// and the personal feature set is selected from them.
    PersonalFeatureSet set_ranking(const RankingResponse& ranking);

    /// Feeds one sample. truth, when present, labels windows for enrollment
    /// training (the initialization phase is assumed honest).
    StepEffects ingest(const BehaviorSample& sample, std::optional<WindowLabel> truth);

    /// Password attempt on a locked device (the device validates the secret
    /// and reports the outcome).
    StepEffects on_password(bool correct, std::int64_t now_ms);

    /// Response to a pending PIN challenge. Unknown token ids throw
    /// MalformedPayload; responses after expiry count as incorrect PINs.
    StepEffects on_pin(std::uint64_t token_id, bool correct, bool consent, std::int64_t now_ms);

    std::int64_t windows_assembled() const { return assembler_.windows_emitted(); }

private:
    StepEffects handle_window(std::int64_t window_id, std::vector<BehaviorSample> samples);
    void expire_challenge(StepEffects& fx, std::int64_t now_ms);
    bool try_train(const PersonalFeatureSet& set);
    WindowLabel window_truth(const std::vector<BehaviorSample>& samples) const;
    void note_accepted(const WindowVector& full_window, StepEffects& fx);
    void flush_pseudo_queue(bool locked);

    std::string device_id_;
    FeatureCatalog catalog_;
    RuntimeConfig cfg_;
    RecordStore* store_;

    WeightVector weights_;
    PersonalFeatureSet feature_set_;
    DeltaAccumulator deltas_;
    bool ranked_ = false;

    SessionState session_;
    WindowAssembler assembler_;
    WindowLayout full_layout_;
    WindowLayout active_layout_; // layout of the serving model
    std::vector<Eigen::Index> active_projection_;
    std::optional<SvmModel> model_;
    bool layout_pending_ = false; // feature set changed but retraining lacked data

    TrainingBuffer buffer_;
    std::deque<std::pair<std::int64_t, WindowLabel>> recent_truth_; // keyed by timestamp
    std::deque<std::pair<int, WindowVector>> pseudo_queue_; // countdown, full window
    std::int64_t accepted_since_retrain_ = 0;

    std::vector<AuthDecision> decision_log_;
};

} // namespace echoia
