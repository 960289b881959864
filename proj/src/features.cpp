#include "echoia/features.hpp"

#include <algorithm>
#include <numeric>

namespace echoia {

FeatureCatalog::FeatureCatalog(std::vector<Entry> candidates, std::vector<Entry> reserved) {
    if (candidates.empty()) {
        throw ConfigError("FeatureCatalog: candidate set must be nonempty");
    }
    entries_.reserve(candidates.size() + reserved.size());
    for (auto& e : candidates) {
        e.reserved = false;
        entries_.push_back(std::move(e));
    }
    candidate_count_ = entries_.size();
    for (auto& e : reserved) {
        e.reserved = true;
        entries_.push_back(std::move(e));
    }
    for (std::size_t i = 0; i < entries_.size(); ++i) {
        if (entries_[i].dims < 1) {
            throw ConfigError("FeatureCatalog: dims must be >= 1 for " + entries_[i].name);
        }
        for (std::size_t j = i + 1; j < entries_.size(); ++j) {
            if (entries_[i].name == entries_[j].name) {
                throw ConfigError("FeatureCatalog: duplicate feature " + entries_[i].name);
            }
        }
    }
}

FeatureCatalog FeatureCatalog::standard() {
    // Touch is reserved, so the candidate set F has the remaining 11.
    std::vector<Entry> candidates = {
        {"accelerometer", 3, false}, {"orientation", 3, false},
        {"magnetometer", 3, false},  {"gyroscope", 3, false},
        {"light", 1, false},         {"pressure", 1, false},
        {"temperature", 1, false},   {"gps", 3, false},
        {"microphone", 1, false},    {"battery_usage", 1, false},
        {"wifi_status", 1, false},
    };
    std::vector<Entry> reserved = {{"touch", 2, true}};
    return FeatureCatalog(std::move(candidates), std::move(reserved));
}

std::optional<FeatureId> FeatureCatalog::find(const std::string& name) const {
    for (std::size_t i = 0; i < entries_.size(); ++i) {
        if (entries_[i].name == name) {
            return FeatureId{static_cast<std::uint32_t>(i)};
        }
    }
    return std::nullopt;
}

std::vector<FeatureId> FeatureCatalog::candidates() const {
    std::vector<FeatureId> out(candidate_count_);
    for (std::size_t i = 0; i < candidate_count_; ++i) {
        out[i] = FeatureId{static_cast<std::uint32_t>(i)};
    }
    return out;
}

std::vector<FeatureId> FeatureCatalog::reserved() const {
    std::vector<FeatureId> out;
    for (std::size_t i = candidate_count_; i < entries_.size(); ++i) {
        out.push_back(FeatureId{static_cast<std::uint32_t>(i)});
    }
    return out;
}

std::vector<FeatureId> FeatureCatalog::all() const {
    std::vector<FeatureId> out(entries_.size());
    for (std::size_t i = 0; i < entries_.size(); ++i) {
        out[i] = FeatureId{static_cast<std::uint32_t>(i)};
    }
    return out;
}

bool FeatureCatalog::sensitive(FeatureId f) const {
    const std::string& n = name(f);
    return n == "gps" || n == "wifi_status" || n == "microphone";
}

const FeatureCatalog::Entry& FeatureCatalog::at(FeatureId f) const {
    if (!contains(f)) {
        throw Error("FeatureId out of catalog range");
    }
    return entries_[f.value];
}

bool PersonalFeatureSet::contains(FeatureId f) const {
    return std::find(top.begin(), top.end(), f) != top.end() ||
           std::find(reserved.begin(), reserved.end(), f) != reserved.end();
}

WeightVector init_weights(const RankingResponse& ranking, const FeatureCatalog& catalog) {
    const auto n = catalog.candidate_count();
    if (ranking.ranks.size() != n) {
        throw MalformedRanking("ranking must cover every candidate exactly once");
    }
    std::vector<bool> seen(n, false);
    WeightVector out;
    out.w.resize(static_cast<Eigen::Index>(n));
    for (const auto& [f, r] : ranking.ranks) {
        if (!catalog.is_candidate(f)) {
            throw MalformedRanking("rank given for non-candidate feature");
        }
        if (r < 1 || static_cast<std::size_t>(r) > n) {
            throw MalformedRanking("rank out of range");
        }
        if (seen[static_cast<std::size_t>(r) - 1]) {
            throw MalformedRanking("duplicate rank");
        }
        seen[static_cast<std::size_t>(r) - 1] = true;
        out.w(static_cast<Eigen::Index>(f.value)) = 1.0 / static_cast<double>(r);
    }
    return out;
}

WeightVector uniform_weights(const FeatureCatalog& catalog) {
    WeightVector out;
    out.w = Eigen::VectorXd::Ones(static_cast<Eigen::Index>(catalog.candidate_count()));
    return out;
}

PersonalFeatureSet select_top_k(const WeightVector& weights, int k,
                                const FeatureCatalog& catalog) {
    if (k < 1) {
        throw Error("select_top_k: k must be >= 1");
    }
    const auto n = catalog.candidate_count();
    if (static_cast<std::size_t>(weights.w.size()) != n) {
        throw Error("select_top_k: weight vector does not match catalog");
    }
    const std::size_t take = std::min<std::size_t>(static_cast<std::size_t>(k), n);

    // Stable sort on descending weight keeps catalog order among ties.
    std::vector<std::uint32_t> order(n);
    std::iota(order.begin(), order.end(), 0u);
    std::stable_sort(order.begin(), order.end(), [&](std::uint32_t a, std::uint32_t b) {
        return weights.w(a) > weights.w(b);
    });
    order.resize(take);
    std::sort(order.begin(), order.end());

    PersonalFeatureSet out;
    out.top.reserve(take);
    for (auto idx : order) {
        out.top.push_back(FeatureId{idx});
    }
    out.reserved = catalog.reserved();
    return out;
}

} // namespace echoia
