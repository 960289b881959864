#include "echoia/window.hpp"

#include <algorithm>
#include <cmath>

namespace echoia {

const BehaviorSample::Reading* BehaviorSample::find(FeatureId f) const {
    auto it = std::lower_bound(readings.begin(), readings.end(), f,
                               [](const Reading& r, FeatureId id) { return r.feature < id; });
    if (it != readings.end() && it->feature == f) {
        return &*it;
    }
    return nullptr;
}

static WindowLayout layout_for_features(std::vector<FeatureId> features,
                                        const FeatureCatalog& catalog, std::uint64_t version) {
    WindowLayout layout;
    layout.version = version;
    layout.features = std::move(features);
    for (FeatureId f : layout.features) {
        const int d = catalog.dims(f);
        for (int c = 0; c < d; ++c) {
            layout.dims.push_back({f, WindowLayout::Kind::mean, c});
        }
        for (int c = 0; c < d; ++c) {
            layout.dims.push_back({f, WindowLayout::Kind::stddev, c});
        }
        layout.dims.push_back({f, WindowLayout::Kind::missing, 0});
    }
    return layout;
}

WindowLayout WindowLayout::for_set(const PersonalFeatureSet& set, const FeatureCatalog& catalog) {
    std::vector<FeatureId> features = set.top;   // already catalog order
    for (FeatureId f : set.reserved) {
        features.push_back(f);
    }
    return layout_for_features(std::move(features), catalog, set.version);
}

WindowLayout WindowLayout::full(const FeatureCatalog& catalog) {
    return layout_for_features(catalog.all(), catalog, 0);
}

static WindowVector aggregate(std::span<const BehaviorSample> samples, const WindowLayout& layout,
                              const FeatureCatalog& catalog) {
    if (samples.empty()) {
        throw EmptyWindow();
    }
    WindowVector out;
    out.layout_version = layout.version;
    out.values = Eigen::VectorXd::Zero(layout.size());

    Eigen::Index pos = 0;
    for (FeatureId f : layout.features) {
        const int d = catalog.dims(f);
        Eigen::VectorXd sum = Eigen::VectorXd::Zero(d);
        Eigen::VectorXd sumsq = Eigen::VectorXd::Zero(d);
        std::int64_t count = 0;
        for (const auto& s : samples) {
            if (const auto* r = s.find(f); r != nullptr && r->values.size() == d) {
                sum += r->values;
                sumsq += r->values.cwiseProduct(r->values);
                ++count;
            }
        }
        if (count > 0) {
            const Eigen::VectorXd mean = sum / static_cast<double>(count);
            // population variance; clamp tiny negatives from cancellation
            const Eigen::VectorXd var =
                (sumsq / static_cast<double>(count) - mean.cwiseProduct(mean)).cwiseMax(0.0);
            out.values.segment(pos, d) = mean;
            out.values.segment(pos + d, d) = var.cwiseSqrt();
            out.values(pos + 2 * d) = 0.0;
        } else {
            out.values(pos + 2 * d) = 1.0; // missing flag; aggregates stay zero
        }
        pos += 2 * d + 1;
    }
    return out;
}

WindowVector build_window(std::span<const BehaviorSample> samples,
                          const PersonalFeatureSet& set, const FeatureCatalog& catalog) {
    return aggregate(samples, WindowLayout::for_set(set, catalog), catalog);
}

WindowVector build_window(std::span<const BehaviorSample> samples, const WindowLayout& layout,
                          const FeatureCatalog& catalog) {
    return aggregate(samples, layout, catalog);
}

std::vector<Eigen::Index> projection_indices(const WindowLayout& sub, const WindowLayout& full) {
    std::vector<Eigen::Index> map;
    map.reserve(sub.dims.size());
    for (const auto& dim : sub.dims) {
        bool found = false;
        for (std::size_t j = 0; j < full.dims.size(); ++j) {
            const auto& fd = full.dims[j];
            if (fd.feature == dim.feature && fd.kind == dim.kind &&
                fd.component == dim.component) {
                map.push_back(static_cast<Eigen::Index>(j));
                found = true;
                break;
            }
        }
        if (!found) {
            throw LayoutMismatch("sub-layout dimension absent from full layout");
        }
    }
    return map;
}

WindowVector project(const WindowVector& full_window, const WindowLayout& sub,
                     const std::vector<Eigen::Index>& indices) {
    WindowVector out;
    out.layout_version = sub.version;
    out.window_id = full_window.window_id;
    out.label = full_window.label;
    out.values.resize(static_cast<Eigen::Index>(indices.size()));
    for (std::size_t i = 0; i < indices.size(); ++i) {
        out.values(static_cast<Eigen::Index>(i)) = full_window.values(indices[i]);
    }
    return out;
}

WindowAssembler::WindowAssembler(std::int64_t window_ms, std::int64_t hop_ms)
    : window_ms_(window_ms), hop_ms_(hop_ms) {
    if (window_ms <= 0 || hop_ms <= 0 || hop_ms > window_ms) {
        throw ConfigError("WindowAssembler: need 0 < hop_ms <= window_ms");
    }
}

std::vector<std::pair<std::int64_t, std::vector<BehaviorSample>>>
WindowAssembler::push(const BehaviorSample& sample) {
    std::vector<std::pair<std::int64_t, std::vector<BehaviorSample>>> done;
    if (!started_) {
        started_ = true;
        origin_ms_ = sample.timestamp_ms;
    }
    // Emit every window whose span ends at or before this sample.
    while (true) {
        const std::int64_t start = origin_ms_ + next_window_id_ * hop_ms_;
        const std::int64_t end = start + window_ms_;
        if (sample.timestamp_ms < end) {
            break;
        }
        std::vector<BehaviorSample> in_window;
        for (const auto& s : buffer_) {
            if (s.timestamp_ms >= start && s.timestamp_ms < end) {
                in_window.push_back(s);
            }
        }
        done.emplace_back(next_window_id_, std::move(in_window));
        ++next_window_id_;
        // Drop samples no longer reachable by any future window.
        const std::int64_t next_start = origin_ms_ + next_window_id_ * hop_ms_;
        std::erase_if(buffer_, [&](const BehaviorSample& s) { return s.timestamp_ms < next_start; });
    }
    buffer_.push_back(sample);
    return done;
}

std::int64_t window_count(std::int64_t duration_ms, std::int64_t window_ms, std::int64_t hop_ms) {
    if (duration_ms < window_ms) {
        return 0;
    }
    return (duration_ms - window_ms) / hop_ms + 1;
}

} // namespace echoia
