#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "echoia/simulation.hpp"
#include "echoia/svm.hpp"

namespace echoia {

struct ConfusionCounts {
    std::int64_t ta = 0;
    std::int64_t tr = 0;
    std::int64_t fr = 0;
    std::int64_t fa = 0;

    std::int64_t total() const { return ta + tr + fr + fa; }
};

/// Exactly one cell increments per decision.
void accumulate(ConfusionCounts& counts, bool smoothed_legit, bool truly_legit);

/// ACC = (TR + TA) / (TR + TA + FR + FA). Throws EmptyCounts on zero total.
double acc(const ConfusionCounts& counts);

/// Timeline split indices: training prefix end, then the cumulative
/// evaluation boundaries at the ends of parts 2..parts. Throws
/// InsufficientData when the corpus cannot be split that way.
struct SplitBoundaries {
    std::int64_t train_end = 0;              // windows [0, train_end) train the model
    std::vector<std::int64_t> boundaries;    // parts-1 cumulative evaluation points
};
SplitBoundaries split_boundaries(std::int64_t total_windows, int parts, double train_prefix);

struct TimelinePoint {
    int part = 0;                   // 2..parts
    std::int64_t boundary_window = 0;
    ConfusionCounts cumulative;     // from the end of training to the boundary
    double acc_value = 0.0;
};

struct TimelineReport {
    std::string device_id;
    std::string scheme;
    std::vector<TimelinePoint> points;
    double final_acc = 0.0;
    PersonalFeatureSet final_set;
    std::int64_t locks = 0;
    std::int64_t refreshes = 0;
    bool aborted = false;
    std::string abort_reason;
    SessionLog session_log; // full decision/event trace for log emission
};

struct EvalConfig {
    RuntimeConfig runtime;
    int parts = 10;
    double train_prefix = 0.15;
    std::uint64_t driver_seed = 1;
    bool cv = false; // pick (C, delta) by k-fold cross-validation on the prefix
    int folds = 5;
    std::vector<CvPair> grid = {{0.1, 1}, {0.1, 2}, {0.1, 3}, {0.1, 5},
                                {1, 1},   {1, 2},   {1, 3},   {1, 5},
                                {10, 1},  {10, 2},  {10, 3},  {10, 5}};
};

/// Ground truth for one window span: legitimate iff the owner held the device
/// for at least half of it.
bool window_truly_legit(const SessionScript& script, std::int64_t start_ms, std::int64_t end_ms);

/// The paper-style evaluation for one device: train on the timeline prefix,
/// then run the closed loop over the rest, reporting cumulative ACC at every
/// part boundary. The adaptive scheme keeps adapting during evaluation; the
/// fixed baseline classifies with all features and never adapts.
TimelineReport timeline_eval(const DeviceCorpus& device, const FeatureCatalog& catalog,
                             const EvalConfig& cfg);

/// timeline_eval over every device of a corpus, devices in parallel.
std::vector<TimelineReport> run_scheme(const Corpus& corpus, Scheme scheme, EvalConfig cfg);

struct PerUserRow {
    std::string device_id;
    double final_acc = 0.0;
};

struct PerUserReport {
    std::string scheme;
    std::vector<PerUserRow> rows;
    double mean_acc = 0.0;
};

PerUserReport per_user_report(const std::vector<TimelineReport>& reports);

/// Closed-loop (C, delta) selection on the training prefix of one device.
CvReport cross_validate_device(const DeviceCorpus& device, const FeatureCatalog& catalog,
                               const EvalConfig& cfg);

void write_timeline_csv(const std::filesystem::path& path,
                        const std::vector<TimelineReport>& reports);
void write_summary_json(const std::filesystem::path& path,
                        const std::vector<PerUserReport>& schemes);

} // namespace echoia
