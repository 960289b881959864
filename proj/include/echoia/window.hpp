#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include <Eigen/Core>

#include "echoia/errors.hpp"
#include "echoia/features.hpp"

namespace echoia {

/// One timestamped multi-sensor reading. Readings are kept as a sorted
/// association list (feature -> raw vector of catalog dims). Sensitive
/// features must arrive with their hashed flag set before persistence.
struct BehaviorSample {
    struct Reading {
        FeatureId feature;
        Eigen::VectorXd values;
        bool hashed = false;
    };

    std::string device_id;
    std::int64_t timestamp_ms = 0;
    std::vector<Reading> readings; // sorted by feature id

    const Reading* find(FeatureId f) const;
};

enum class WindowLabel { unlabeled, legitimate, illegitimate };

/// Dimension layout of a window vector: per selected feature, mean and
/// standard deviation for each raw component, then one missingness flag.
/// Features appear in catalog order, candidates before reserved.
struct WindowLayout {
    enum class Kind { mean, stddev, missing };

    struct Dim {
        FeatureId feature;
        Kind kind;
        int component = 0; // 0 for missing flags
    };

    std::vector<FeatureId> features;
    std::vector<Dim> dims;
    std::uint64_t version = 0;

    Eigen::Index size() const { return static_cast<Eigen::Index>(dims.size()); }

    static WindowLayout for_set(const PersonalFeatureSet& set, const FeatureCatalog& catalog);
    /// Layout over every catalog feature; used by the fixed-all-features
    /// baseline and as the superset the runtime stores windows in.
    static WindowLayout full(const FeatureCatalog& catalog);
};

/// Per-window aggregate vector in some layout. label is ground truth carried
/// only on training data.
struct WindowVector {
    Eigen::VectorXd values;
    std::uint64_t layout_version = 0;
    std::int64_t window_id = 0;
    WindowLabel label = WindowLabel::unlabeled;
};

/// Aggregates one window of samples into the layout derived from the given
/// personal feature set. Missing features yield zero aggregates and a raised
/// missingness flag. Throws EmptyWindow when no samples are given.
WindowVector build_window(std::span<const BehaviorSample> samples,
                          const PersonalFeatureSet& set, const FeatureCatalog& catalog);

/// Same aggregation against an explicit layout.
WindowVector build_window(std::span<const BehaviorSample> samples, const WindowLayout& layout,
                          const FeatureCatalog& catalog);

/// Column map from a sub-layout into the full catalog layout, so stored
/// full-layout windows can be re-sliced after a feature-set refresh without
/// touching raw samples.
std::vector<Eigen::Index> projection_indices(const WindowLayout& sub, const WindowLayout& full);

WindowVector project(const WindowVector& full_window, const WindowLayout& sub,
                     const std::vector<Eigen::Index>& indices);

/// Streaming fixed-width windower: feed time-ordered samples, collect
/// completed windows [start + i*hop, start + i*hop + window_ms). Window ids
/// count every assembled window, decided or not.
class WindowAssembler {
public:
    WindowAssembler(std::int64_t window_ms, std::int64_t hop_ms);

    /// Pushes one sample; returns windows completed by its arrival.
    std::vector<std::pair<std::int64_t, std::vector<BehaviorSample>>>
    push(const BehaviorSample& sample);

    std::int64_t window_ms() const { return window_ms_; }
    std::int64_t hop_ms() const { return hop_ms_; }
    std::int64_t windows_emitted() const { return next_window_id_; }

private:
    std::int64_t window_ms_;
    std::int64_t hop_ms_;
    bool started_ = false;
    std::int64_t origin_ms_ = 0;
    std::int64_t next_window_id_ = 0;
    std::vector<BehaviorSample> buffer_;
};

/// Number of windows a stream spanning [0, duration_ms) yields for the given
/// window/hop configuration.
std::int64_t window_count(std::int64_t duration_ms, std::int64_t window_ms, std::int64_t hop_ms);

} // namespace echoia
