#pragma once

#include <random>
#include <vector>

#include "echoia/config.hpp"
#include "echoia/features.hpp"
#include "echoia/simulation.hpp"

namespace echoia::testing {

/// Three plain 1-dim candidates plus one reserved, for state-machine tests
/// where sensor geometry is irrelevant.
inline FeatureCatalog tiny_catalog() {
    return FeatureCatalog({{"a", 1, false}, {"b", 1, false}, {"c", 1, false}},
                          {{"t", 1, true}});
}

inline RankingResponse identity_ranking(const FeatureCatalog& catalog) {
    RankingResponse r;
    int rank = 1;
    for (FeatureId f : catalog.candidates()) {
        r.ranks[f] = rank++;
    }
    return r;
}

inline BehaviorSample scalar_sample(const FeatureCatalog& catalog, std::int64_t ts,
                                    double value) {
    BehaviorSample s;
    s.timestamp_ms = ts;
    for (FeatureId f : catalog.all()) {
        BehaviorSample::Reading r;
        r.feature = f;
        r.values = Eigen::VectorXd::Constant(catalog.dims(f), value);
        r.hashed = catalog.sensitive(f);
        s.readings.push_back(std::move(r));
    }
    return s;
}

/// Small experiment configuration that keeps unit tests fast: short timeline,
/// small training minimum, few users.
inline ExperimentConfig small_config(std::uint64_t seed, int users = 3) {
    ExperimentConfig cfg;
    cfg.seed = seed;
    cfg.users = users;
    cfg.duration_minutes = 60.0;
    cfg.min_windows_per_class = 6;
    return cfg;
}

} // namespace echoia::testing
