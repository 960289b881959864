#include "echoia/evaluation.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <future>

#include <nlohmann/json.hpp>

namespace echoia {

void accumulate(ConfusionCounts& counts, bool smoothed_legit, bool truly_legit) {
    if (truly_legit) {
        (smoothed_legit ? counts.ta : counts.fr)++;
    } else {
        (smoothed_legit ? counts.fa : counts.tr)++;
    }
}

double acc(const ConfusionCounts& counts) {
    const auto total = counts.total();
    if (total <= 0) {
        throw EmptyCounts();
    }
    return static_cast<double>(counts.ta + counts.tr) / static_cast<double>(total);
}

SplitBoundaries split_boundaries(std::int64_t total_windows, int parts, double train_prefix) {
    if (parts < 2 || total_windows < parts || train_prefix <= 0.0 || train_prefix >= 1.0) {
        throw InsufficientData("cannot split " + std::to_string(total_windows) + " windows into " +
                               std::to_string(parts) + " parts");
    }
    SplitBoundaries out;
    // floor with a nudge: 0.15*1000 is 149.999... in binary, the intended
    // closed-form index is 150
    out.train_end = static_cast<std::int64_t>(
        std::floor(train_prefix * static_cast<double>(total_windows) + 1e-9));
    if (out.train_end < 1) {
        throw InsufficientData("training prefix is empty");
    }
    for (int part = 2; part <= parts; ++part) {
        out.boundaries.push_back(total_windows * part / parts);
    }
    return out;
}

bool window_truly_legit(const SessionScript& script, std::int64_t start_ms, std::int64_t end_ms) {
    std::int64_t intruder = 0;
    for (const auto& seg : script.segments) {
        if (!seg.intruder) {
            continue;
        }
        const std::int64_t lo = std::max(start_ms, seg.start_ms);
        const std::int64_t hi = std::min(end_ms, seg.end_ms);
        if (hi > lo) {
            intruder += hi - lo;
        }
    }
    return 2 * intruder < end_ms - start_ms;
}

namespace {

struct PrefixWindows {
    std::vector<WindowVector> windows; // full layout, labeled
    WindowLayout full;
};

PrefixWindows collect_prefix_windows(const DeviceCorpus& device, const FeatureCatalog& catalog,
                                     const RuntimeConfig& rc, std::int64_t train_end) {
    PrefixWindows out;
    out.full = WindowLayout::full(catalog);
    WindowAssembler assembler(rc.window_ms, rc.hop_ms);
    const std::int64_t origin =
        device.samples.empty() ? 0 : device.samples.front().timestamp_ms;
    for (const auto& s : device.samples) {
        for (auto& [id, winsamples] : assembler.push(s)) {
            if (id >= train_end) {
                return out;
            }
            if (winsamples.empty()) {
                continue;
            }
            WindowVector w = build_window(winsamples, out.full, catalog);
            w.window_id = id;
            const std::int64_t start = origin + id * rc.hop_ms;
            w.label = window_truly_legit(device.script, start, start + rc.window_ms)
                          ? WindowLabel::legitimate
                          : WindowLabel::illegitimate;
            out.windows.push_back(std::move(w));
        }
    }
    return out;
}

Eigen::MatrixXd rows_for(const std::vector<WindowVector>& windows,
                         const std::vector<std::int64_t>& idx,
                         const std::vector<Eigen::Index>& proj) {
    Eigen::MatrixXd x(static_cast<Eigen::Index>(idx.size()),
                      static_cast<Eigen::Index>(proj.size()));
    for (std::size_t r = 0; r < idx.size(); ++r) {
        const auto& w = windows[static_cast<std::size_t>(idx[r])];
        for (std::size_t c = 0; c < proj.size(); ++c) {
            x(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = w.values(proj[c]);
        }
    }
    return x;
}

std::vector<int> labels_for(const std::vector<WindowVector>& windows,
                            const std::vector<std::int64_t>& idx) {
    std::vector<int> y;
    y.reserve(idx.size());
    for (auto i : idx) {
        y.push_back(windows[static_cast<std::size_t>(i)].label == WindowLabel::legitimate ? 1
                                                                                          : -1);
    }
    return y;
}

} // namespace

CvReport cross_validate_device(const DeviceCorpus& device, const FeatureCatalog& catalog,
                               const EvalConfig& cfg) {
    const RuntimeConfig& rc = cfg.runtime;
    const std::int64_t total = window_count(device.duration_ms, rc.window_ms, rc.hop_ms);
    const auto split = split_boundaries(total, cfg.parts, cfg.train_prefix);
    PrefixWindows data = collect_prefix_windows(device, catalog, rc, split.train_end);
    const auto n = static_cast<std::int64_t>(data.windows.size());

    // Fold replay: train on the out-of-fold blocks, walk the fold in time
    // order with the adaptation engine live (passwords answered from window
    // truth, refreshes retrain on the training blocks), score every window.
    FoldEvaluator evaluator = [&](const std::vector<std::int64_t>& train_idx,
                                  const std::vector<std::int64_t>& val_idx,
                                  const CvPair& pair) -> double {
        AdaptationConfig adapt = rc.adapt;
        adapt.delta_threshold = pair.delta;

        WeightVector weights = init_weights(device.ranking, catalog);
        PersonalFeatureSet set = select_top_k(weights, adapt.k, catalog);
        set.version = 1;
        DeltaAccumulator deltas = DeltaAccumulator::for_set(set);

        WindowLayout layout = rc.scheme == Scheme::echoia ? WindowLayout::for_set(set, catalog)
                                                          : data.full;
        auto proj = projection_indices(layout, data.full);
        const auto y_train = labels_for(data.windows, train_idx);
        if (std::count(y_train.begin(), y_train.end(), 1) == 0 ||
            std::count(y_train.begin(), y_train.end(), -1) == 0) {
            return 0.0; // fold cannot train; counts as a failed configuration
        }
        SvmModel model = train_svm(rows_for(data.windows, train_idx, proj), y_train, pair.c,
                                   layout.version);

        std::deque<bool> recent;
        std::int64_t correct = 0;
        for (auto i : val_idx) {
            const auto& w = data.windows[static_cast<std::size_t>(i)];
            WindowVector v = project(w, layout, proj);
            const Prediction p = predict(model, v);
            recent.push_back(!p.legitimate);
            while (recent.size() > static_cast<std::size_t>(rc.smooth.n)) {
                recent.pop_front();
            }
            const bool smoothed_legit =
                std::count(recent.begin(), recent.end(), true) < rc.smooth.m;
            const bool truly_legit = w.label == WindowLabel::legitimate;
            if (smoothed_legit == truly_legit) {
                ++correct;
            }
            if (rc.scheme == Scheme::echoia && !smoothed_legit) {
                FeedbackEvent ev;
                ev.kind = truly_legit ? FeedbackKind::password_correct
                                      : FeedbackKind::password_incorrect;
                record_password_event(deltas, ev, adapt);
                if (significant_change(deltas, adapt)) {
                    auto refreshed =
                        apply_refresh(weights, set, deltas, true, true, adapt, catalog);
                    if (refreshed) {
                        weights = refreshed->weights;
                        set = refreshed->feature_set;
                        layout = WindowLayout::for_set(set, catalog);
                        proj = projection_indices(layout, data.full);
                        model = train_svm(rows_for(data.windows, train_idx, proj), y_train,
                                          pair.c, layout.version);
                        recent.clear();
                    }
                }
            }
        }
        return val_idx.empty() ? 0.0
                               : static_cast<double>(correct) /
                                     static_cast<double>(val_idx.size());
    };

    return cross_validate(n, cfg.folds, cfg.grid, evaluator);
}

TimelineReport timeline_eval(const DeviceCorpus& device, const FeatureCatalog& catalog,
                             const EvalConfig& cfg) {
    RuntimeConfig rc = cfg.runtime;
    const std::int64_t total = window_count(device.duration_ms, rc.window_ms, rc.hop_ms);
    const auto split = split_boundaries(total, cfg.parts, cfg.train_prefix);

    if (cfg.cv && rc.scheme == Scheme::echoia) {
        const CvReport cv = cross_validate_device(device, catalog, cfg);
        rc.svm_c = cv.selected_pair().c;
        rc.adapt.delta_threshold = cv.selected_pair().delta;
    }

    rc.hold_training_until_windows = split.train_end;
    DeviceRuntime runtime(device.device_id, catalog, rc);
    DirectPort port(runtime);

    DriverConfig dc;
    dc.prefix_end_ms = (device.samples.empty() ? 0 : device.samples.front().timestamp_ms) +
                       split.train_end * rc.hop_ms;
    dc.seed = cfg.driver_seed;
    SessionLog log = run_device_session(device, port, dc);

    TimelineReport report;
    report.device_id = device.device_id;
    report.scheme = to_string(rc.scheme);
    report.aborted = log.aborted;
    report.abort_reason = log.abort_reason;
    report.final_set = log.final_set;
    for (const auto& [ts, set] : log.feature_updates) {
        if (set.version >= 2) {
            ++report.refreshes;
        }
    }

    const std::int64_t origin =
        device.samples.empty() ? 0 : device.samples.front().timestamp_ms;
    ConfusionCounts counts;
    std::size_t cursor = 0;
    for (int part = 2; part <= cfg.parts; ++part) {
        const std::int64_t boundary = split.boundaries[static_cast<std::size_t>(part - 2)];
        while (cursor < log.decisions.size() &&
               log.decisions[cursor].window_id < boundary) {
            const auto& d = log.decisions[cursor];
            if (d.window_id >= split.train_end) {
                const std::int64_t start = origin + d.window_id * rc.hop_ms;
                accumulate(counts, d.smoothed_legit,
                           window_truly_legit(device.script, start, start + rc.window_ms));
            }
            if (d.acted) {
                ++report.locks;
            }
            ++cursor;
        }
        TimelinePoint point;
        point.part = part;
        point.boundary_window = boundary;
        point.cumulative = counts;
        point.acc_value = counts.total() > 0 ? acc(counts) : std::nan("");
        report.points.push_back(point);
    }
    report.final_acc = report.points.empty() ? std::nan("") : report.points.back().acc_value;
    log.total_windows = total;
    report.session_log = std::move(log);
    return report;
}

std::vector<TimelineReport> run_scheme(const Corpus& corpus, Scheme scheme, EvalConfig cfg) {
    cfg.runtime.scheme = scheme;
    std::vector<std::future<TimelineReport>> futures;
    futures.reserve(corpus.devices.size());
    for (const auto& device : corpus.devices) {
        futures.push_back(std::async(std::launch::async, [&device, &corpus, cfg] {
            return timeline_eval(device, corpus.catalog, cfg);
        }));
    }
    std::vector<TimelineReport> out;
    out.reserve(futures.size());
    for (auto& f : futures) {
        out.push_back(f.get());
    }
    return out;
}

PerUserReport per_user_report(const std::vector<TimelineReport>& reports) {
    PerUserReport out;
    double sum = 0.0;
    std::int64_t counted = 0;
    for (const auto& r : reports) {
        out.scheme = r.scheme;
        out.rows.push_back({r.device_id, r.final_acc});
        if (!r.aborted && !std::isnan(r.final_acc)) {
            sum += r.final_acc;
            ++counted;
        }
    }
    out.mean_acc = counted > 0 ? sum / static_cast<double>(counted) : std::nan("");
    return out;
}

void write_timeline_csv(const std::filesystem::path& path,
                        const std::vector<TimelineReport>& reports) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) {
        throw Error("cannot write " + path.string());
    }
    out << "device_id,scheme,part,boundary_window,ta,tr,fr,fa,acc\n";
    for (const auto& r : reports) {
        for (const auto& p : r.points) {
            out << r.device_id << ',' << r.scheme << ',' << p.part << ',' << p.boundary_window
                << ',' << p.cumulative.ta << ',' << p.cumulative.tr << ',' << p.cumulative.fr
                << ',' << p.cumulative.fa << ',' << p.acc_value << '\n';
        }
    }
}

void write_summary_json(const std::filesystem::path& path,
                        const std::vector<PerUserReport>& schemes) {
    nlohmann::json j;
    j["schemes"] = nlohmann::json::array();
    for (const auto& s : schemes) {
        nlohmann::json js;
        js["scheme"] = s.scheme;
        js["mean_acc"] = s.mean_acc;
        js["users"] = nlohmann::json::array();
        for (const auto& row : s.rows) {
            js["users"].push_back({{"device_id", row.device_id}, {"acc", row.final_acc}});
        }
        j["schemes"].push_back(std::move(js));
    }
    std::ofstream out(path, std::ios::trunc);
    if (!out) {
        throw Error("cannot write " + path.string());
    }
    out << j.dump(2) << '\n';
}

} // namespace echoia
