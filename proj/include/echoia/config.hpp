#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "echoia/authenticator.hpp"
#include "echoia/evaluation.hpp"
#include "echoia/simulation.hpp"

namespace echoia {

/// Every experiment knob with its default. Loadable from a flat "key = value"
/// text file with '#' comments; unknown keys are load-time errors.
struct ExperimentConfig {
    // corpus generation
    std::uint64_t seed = 42;
    int users = 17;
    double duration_minutes = 180.0;
    std::int64_t sample_period_ms = 1'000;
    double separation = 3.0;
    double nonplanted_ratio = 0.5;
    double reserved_ratio = 1.0 / 3.0;
    double level_noise = 1.0;
    std::int64_t level_corr_ms = 60'000;
    int k = 5;
    int ranking_swaps = 2;
    double intruder_fraction = 0.12;
    int intruder_segments = 6;
    double p_owner = 0.98;
    double p_intruder = 0.0;
    int intruder_max_attempts = 4;
    bool owner_consents = true;
    bool drift = false;
    double drift_onset_frac = 0.5;
    int drift_features = 4;
    bool drift_on_planted = false;
    double drift_sigma_boost = 3.0;
    bool plant_sensitive = false;

    // adaptation
    double delta = 3.0;
    double eta_incorrect = 0.25;
    double eta_correct = 1.0;
    double weight_floor = 1e-6;
    std::int64_t challenge_timeout_ms = 120'000;

    // authentication
    int smooth_m = 3;
    int smooth_n = 5;
    std::int64_t window_ms = 30'000;
    std::int64_t hop_ms = 15'000;
    double svm_c = 1.0;
    int min_windows_per_class = 8;
    std::int64_t retrain_every_accepted = 500;
    std::int64_t buffer_cap_per_class = 512;

    // evaluation
    int parts = 10;
    double train_prefix = 0.15;
    bool cv = false;
    int folds = 5;
    std::vector<double> grid_c = {0.1, 1.0, 10.0};
    std::vector<double> grid_delta = {1.0, 2.0, 3.0, 5.0};
    std::string scheme = "both"; // echoia | fixed_all_features | both

    // paths / service
    std::string corpus_dir = "corpus";
    std::string out_dir = "reports";
    std::string data_dir = "data";
    int port = 7420;

    GenConfig gen_config() const;
    RuntimeConfig runtime_config(Scheme scheme) const;
    EvalConfig eval_config(Scheme scheme) const;
    std::vector<Scheme> schemes() const;
};

/// Strict parse: unknown keys or malformed values throw ConfigError with the
/// offending line.
ExperimentConfig parse_config_text(const std::string& text);
ExperimentConfig load_config(const std::filesystem::path& path);

/// Apply one "key=value" override (CLI flags use this).
void apply_override(ExperimentConfig& cfg, const std::string& key, const std::string& value);

/// Serialization materializes every key, so parse(serialize(cfg)) == cfg.
std::string serialize_config(const ExperimentConfig& cfg);

} // namespace echoia
