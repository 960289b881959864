#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "echoia/errors.hpp"

namespace echoia {

/// Index of a feature within one FeatureCatalog. Candidates occupy the low
/// indices, reserved features follow; all cross-module feature references use
/// these ids and resolve against the single catalog of the running system.
struct FeatureId {
    std::uint32_t value = 0;

    friend auto operator<=>(const FeatureId&, const FeatureId&) = default;
};

/// The feature universe: the candidate set F plus system-reserved features
/// (kept out of F), with the raw dimensionality of each sensor.
class FeatureCatalog {
public:
    struct Entry {
        std::string name;
        int dims = 1;
        bool reserved = false;
    };

    FeatureCatalog() = default;
    FeatureCatalog(std::vector<Entry> candidates, std::vector<Entry> reserved);

    /// The 12 stock smartphone features; touch is the reserved one.
    static FeatureCatalog standard();

    std::size_t candidate_count() const { return candidate_count_; }
    std::size_t total_count() const { return entries_.size(); }

    bool is_candidate(FeatureId f) const { return f.value < candidate_count_; }
    bool is_reserved(FeatureId f) const {
        return f.value >= candidate_count_ && f.value < entries_.size();
    }
    bool contains(FeatureId f) const { return f.value < entries_.size(); }

    const std::string& name(FeatureId f) const { return at(f).name; }
    int dims(FeatureId f) const { return at(f).dims; }

    std::optional<FeatureId> find(const std::string& name) const;

    std::vector<FeatureId> candidates() const;
    std::vector<FeatureId> reserved() const;
    std::vector<FeatureId> all() const;

    /// Features whose raw readings must arrive hashed (privacy policy).
    bool sensitive(FeatureId f) const;

private:
    const Entry& at(FeatureId f) const;

    std::vector<Entry> entries_; // candidates first, then reserved
    std::size_t candidate_count_ = 0;
};

/// The user's ranking of every candidate feature, 1 = best. Valid only when
/// the ranks form a permutation of 1..|candidates|.
struct RankingResponse {
    std::map<FeatureId, int> ranks;
};

/// Per-candidate weights w, dense over catalog candidate order. Reserved
/// features carry no weight.
struct WeightVector {
    Eigen::VectorXd w;

    double at(FeatureId f) const { return w(static_cast<Eigen::Index>(f.value)); }
};

/// The personal feature set actually used for classification: the current
/// top-k candidates plus every reserved feature. version increases on each
/// refresh and ties windows to the model trained for them.
struct PersonalFeatureSet {
    std::vector<FeatureId> top;      // catalog order
    std::vector<FeatureId> reserved; // catalog order
    std::uint64_t version = 0;

    bool contains(FeatureId f) const;
};

/// Weight initialization from the user's ranking: w = 1/r per candidate.
/// Throws MalformedRanking on ties, gaps, or unknown/missing features.
WeightVector init_weights(const RankingResponse& ranking, const FeatureCatalog& catalog);

/// Pre-ranking default: every candidate weighted 1.0.
WeightVector uniform_weights(const FeatureCatalog& catalog);

/// Picks the k candidates with the largest weights (ties broken by catalog
/// order, earlier wins) and attaches the reserved features. k clamps to the
/// candidate count. The returned set has version 0; callers that refresh an
/// existing set assign the successor version.
PersonalFeatureSet select_top_k(const WeightVector& weights, int k,
                                const FeatureCatalog& catalog);

} // namespace echoia
