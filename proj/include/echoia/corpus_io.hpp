#pragma once

#include <filesystem>

#include "echoia/simulation.hpp"

namespace echoia {

/// Corpus directory layout:
///   <dir>/meta.json                      catalog + user ids
///   <dir>/devices/<id>/records.log      timestamped sample records (store format)
///   <dir>/scripts/<id>.json             usage segments + response policies + ranking
/// Ground truth is written under <dir>/truth/, apart from the device data;
/// the authentication stack must never read it.
void write_corpus(const std::filesystem::path& dir, const Corpus& corpus);
Corpus load_corpus(const std::filesystem::path& dir);

void write_truth(const std::filesystem::path& dir, const GroundTruth& truth,
                 const FeatureCatalog& catalog);
GroundTruth load_truth(const std::filesystem::path& dir, const FeatureCatalog& catalog);

/// Decision logs, one JSON line per decision, consumed by `eval`.
void write_decision_log(const std::filesystem::path& path, const SessionLog& log);
std::vector<AuthDecision> load_decision_log(const std::filesystem::path& path);

} // namespace echoia
