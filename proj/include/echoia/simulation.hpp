#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "echoia/authenticator.hpp"
#include "echoia/features.hpp"
#include "echoia/service.hpp"
#include "echoia/window.hpp"

namespace echoia {

/// Scheduled behavioral change: at onset the affected features lose their
/// owner-specific offset (collapse toward the population) and get noisier.
struct DriftSpec {
    std::int64_t onset_ms = 0;
    std::vector<FeatureId> features;
    double sigma_boost = 2.0;
};

/// Ground-truth generative description of one simulated user. Lives only on
/// the evaluation side; nothing in the authentication stack may read it.
struct UserTruth {
    std::string user_id;
    std::vector<FeatureId> planted;
    std::optional<DriftSpec> drift;
};

struct Segment {
    std::int64_t start_ms = 0;
    std::int64_t end_ms = 0;
    int profile = 0; // index into the corpus user list
    bool intruder = false;
};

/// Usage timeline plus the scripted human responses.
struct SessionScript {
    std::vector<Segment> segments;
    double p_owner = 0.98;    // owners typo occasionally
    double p_intruder = 0.0;  // intruders never know the password
    int intruder_max_attempts = 4;
    std::int64_t password_delay_ms = 5'000;
    std::int64_t retry_ms = 30'000;
    std::int64_t pin_delay_ms = 2'000;
    bool owner_consents = true;

    int profile_at(std::int64_t ts) const;
    bool intruder_at(std::int64_t ts) const;
    double intruder_fraction() const;
};

struct DeviceCorpus {
    std::string device_id;
    int owner = 0;
    RankingResponse ranking; // what the owner answers at initialization
    std::vector<BehaviorSample> samples;
    SessionScript script;
    std::int64_t duration_ms = 0;
};

struct Corpus {
    FeatureCatalog catalog;
    std::vector<std::string> user_ids;
    std::vector<DeviceCorpus> devices;
};

struct GroundTruth {
    std::vector<UserTruth> users;
};

struct GenConfig {
    std::uint64_t seed = 42;
    int n_users = 17;
    std::int64_t duration_ms = 3LL * 3600 * 1000;
    std::int64_t sample_period_ms = 1'000;
    double separation = 3.0;        // planted-feature mean offset, in stds
    double nonplanted_ratio = 0.5;      // nonplanted offset = ratio * separation
    double reserved_ratio = 1.0 / 3.0;
    double level_noise = 1.0;       // slow per-feature activity-level wander
    std::int64_t level_corr_ms = 60'000;
    int k = 5;                      // planted set size
    int ranking_swaps = 2;          // adjacent transpositions of the true ranking
    double intruder_fraction = 0.12;
    int intruder_segments = 6;
    double p_owner = 0.98;
    double p_intruder = 0.0;
    int intruder_max_attempts = 4;
    bool owner_consents = true;
    bool drift = false;
    double drift_onset_frac = 0.5;
    int drift_features = 4;
    bool drift_on_planted = false; // default collapses non-planted features
    double drift_sigma_boost = 3.0;
    bool plant_sensitive = false;  // hashed features make poor personal features
};

/// Deterministic synthetic corpus: per-user planted discriminative features,
/// interleaved intruder segments (one always inside the training prefix), and
/// the owner's (noisy) feature ranking. Ground truth ships separately.
std::pair<Corpus, GroundTruth> gen_corpus(const GenConfig& cfg, const FeatureCatalog& catalog);

/// Abstract stack access used by the session driver, so scripted sessions can
/// run either directly against a DeviceRuntime or through the wire protocol.
class StackPort {
public:
    virtual ~StackPort() = default;
    virtual bool wants_ranking() = 0;
    virtual StepEffects send_ranking(const RankingResponse& ranking) = 0;
    virtual StepEffects send_sample(const BehaviorSample& sample,
                                    std::optional<WindowLabel> truth) = 0;
    virtual StepEffects send_password(bool correct, std::int64_t ts) = 0;
    virtual StepEffects send_pin(std::uint64_t token, bool correct, bool consent,
                                 std::int64_t ts) = 0;
    virtual std::optional<PersonalFeatureSet> current_feature_set() = 0;
};

class DirectPort : public StackPort {
public:
    explicit DirectPort(DeviceRuntime& runtime) : runtime_(runtime) {}

    bool wants_ranking() override;
    StepEffects send_ranking(const RankingResponse& ranking) override;
    StepEffects send_sample(const BehaviorSample& sample,
                            std::optional<WindowLabel> truth) override;
    StepEffects send_password(bool correct, std::int64_t ts) override;
    StepEffects send_pin(std::uint64_t token, bool correct, bool consent,
                         std::int64_t ts) override;
    std::optional<PersonalFeatureSet> current_feature_set() override;

private:
    DeviceRuntime& runtime_;
};

/// Drives a ControlServer through encoded wire messages and parses the
/// replies back into effects. Throws on ERROR replies.
class WirePort : public StackPort {
public:
    WirePort(ControlServer& server, std::string device_id);

    bool wants_ranking() override;
    StepEffects send_ranking(const RankingResponse& ranking) override;
    StepEffects send_sample(const BehaviorSample& sample,
                            std::optional<WindowLabel> truth) override;
    StepEffects send_password(bool correct, std::int64_t ts) override;
    StepEffects send_pin(std::uint64_t token, bool correct, bool consent,
                         std::int64_t ts) override;
    std::optional<PersonalFeatureSet> current_feature_set() override;

    const std::vector<WireMessage>& trace() const { return trace_; }

private:
    StepEffects roundtrip(MessageType type, nlohmann::json payload);

    ControlServer& server_;
    std::string device_id_;
    ConnectionState conn_;
    std::uint64_t next_seq_ = 1;
    bool ranking_requested_ = false;
    std::vector<WireMessage> trace_; // request/reply log, in order
};

struct SessionLog {
    std::string device_id;
    std::vector<AuthDecision> decisions;
    std::vector<FeedbackEvent> events;
    std::vector<std::pair<std::int64_t, PersonalFeatureSet>> feature_updates;
    PersonalFeatureSet final_set;
    std::int64_t total_windows = 0;
    bool aborted = false;
    bool stopped_early = false; // an interactive operator ended the stream
    std::string abort_reason;
};

struct DriverConfig {
    std::int64_t prefix_end_ms = 0; // samples before this carry enrollment labels
    std::uint64_t seed = 1;         // drives the scripted password typos

    // Optional overrides of the scripted human. Returning nullopt ends the
    // session cleanly (interactive operators hitting end-of-input).
    std::function<std::optional<bool>(std::int64_t ts)> password_hook;
    std::function<std::optional<std::pair<bool, bool>>(std::int64_t ts)> pin_hook;
    std::function<void(const StepEffects& fx, std::int64_t ts)> observer;
};

/// Replays one device's corpus through the stack in timestamp order,
/// answering password prompts and PIN challenges per the script policy.
SessionLog run_device_session(const DeviceCorpus& device, StackPort& port,
                              const DriverConfig& cfg);

/// Wire-path replay of every device in the corpus against one server.
std::vector<SessionLog> run_session(const Corpus& corpus, ControlServer& server,
                                    const DriverConfig& cfg);

} // namespace echoia
