// Acceptance suite: one line per criterion, nonzero exit if any fails.
// Run via `ctest -R acceptance` or directly: build/tests/echoia_acceptance

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <random>
#include <vector>

#include "echoia/config.hpp"
#include "echoia/corpus_io.hpp"
#include "echoia/evaluation.hpp"
#include "echoia/service.hpp"
#include "echoia/simulation.hpp"

using namespace echoia;
namespace fs = std::filesystem;

namespace {

struct Outcome {
    bool pass = false;
    std::string detail;
};

double elapsed_s(std::chrono::steady_clock::time_point t0) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

// ---------------------------------------------------------------- criterion 1

Outcome formula_exactness() {
    std::mt19937_64 rng(1001);
    for (int round = 0; round < 1000; ++round) {
        const int n = 1 + static_cast<int>(rng() % 16);
        std::vector<FeatureCatalog::Entry> entries;
        for (int i = 0; i < n; ++i) {
            entries.push_back({"f" + std::to_string(i), 1, false});
        }
        const FeatureCatalog catalog(std::move(entries), {});
        std::vector<int> ranks(static_cast<std::size_t>(n));
        std::iota(ranks.begin(), ranks.end(), 1);
        std::shuffle(ranks.begin(), ranks.end(), rng);
        RankingResponse ranking;
        for (int i = 0; i < n; ++i) {
            ranking.ranks[FeatureId{static_cast<std::uint32_t>(i)}] =
                ranks[static_cast<std::size_t>(i)];
        }
        const auto w = init_weights(ranking, catalog);
        for (int i = 0; i < n; ++i) {
            const double expect = 1.0 / static_cast<double>(ranks[static_cast<std::size_t>(i)]);
            if (w.w(i) != expect) {
                return {false, "w != 1/r at round " + std::to_string(round)};
            }
        }
    }

    FeatureCatalog catalog({{"a", 1, false}, {"b", 1, false}}, {});
    const auto set = select_top_k(uniform_weights(catalog), 2, catalog);
    AdaptationConfig cfg;
    cfg.eta_correct = 0.875; // exact in binary, so the fold oracle is exact too
    cfg.eta_incorrect = 0.25;
    std::mt19937_64 rng2(1002);
    for (int round = 0; round < 100'000; ++round) {
        auto acc = DeltaAccumulator::for_set(set);
        const int len = static_cast<int>(rng2() % 24);
        double oracle_i = 0.0;
        double oracle_c = 0.0;
        for (int e = 0; e < len; ++e) {
            const bool correct = rng2() % 2 == 0;
            FeedbackEvent ev;
            ev.kind = correct ? FeedbackKind::password_correct : FeedbackKind::password_incorrect;
            record_password_event(acc, ev, cfg);
            (correct ? oracle_c : oracle_i) += correct ? cfg.eta_correct : cfg.eta_incorrect;
        }
        for (const auto& entry : acc.entries) {
            if (entry.delta() != entry.delta_i - entry.delta_c ||
                entry.delta_i != oracle_i || entry.delta_c != oracle_c) {
                return {false, "delta identity broke at round " + std::to_string(round)};
            }
        }
    }
    return {true, "1000 permutations, 100000 event logs"};
}

// ---------------------------------------------------------------- criterion 2

double grid_objective(const Eigen::MatrixXd& x, const std::vector<int>& y, double c) {
    double lo1 = -5, hi1 = 5, lo2 = -5, hi2 = 5, lo3 = -5, hi3 = 5;
    double best = std::numeric_limits<double>::max();
    double bw1 = 0, bw2 = 0, bb = 0;
    double step = 0.5;
    while (true) {
        for (double w1 = lo1; w1 <= hi1 + 1e-12; w1 += step) {
            for (double w2 = lo2; w2 <= hi2 + 1e-12; w2 += step) {
                for (double b = lo3; b <= hi3 + 1e-12; b += step) {
                    Eigen::VectorXd w(2);
                    w << w1, w2;
                    const double obj = hinge_objective(w, b, c, x, y);
                    if (obj < best) {
                        best = obj;
                        bw1 = w1;
                        bw2 = w2;
                        bb = b;
                    }
                }
            }
        }
        if (step <= 0.01) {
            return best;
        }
        const double span = 2.5 * step;
        lo1 = std::max(-5.0, bw1 - span);
        hi1 = std::min(5.0, bw1 + span);
        lo2 = std::max(-5.0, bw2 - span);
        hi2 = std::min(5.0, bw2 + span);
        lo3 = std::max(-5.0, bb - span);
        hi3 = std::min(5.0, bb + span);
        step = std::max(0.01, step / 5.0);
    }
}

Outcome svm_correctness() {
    std::mt19937_64 rng(2001);
    std::normal_distribution<double> gauss(0.0, 1.0);

    // (a) zero training error on random separable instances, C = 100
    for (int round = 0; round < 100; ++round) {
        const int n = 6 + static_cast<int>(rng() % 45);
        const int dims = 1 + static_cast<int>(rng() % 6);
        Eigen::VectorXd normal(dims);
        for (int d = 0; d < dims; ++d) {
            normal(d) = gauss(rng);
        }
        normal.normalize();
        Eigen::MatrixXd x(n, dims);
        std::vector<int> y(static_cast<std::size_t>(n));
        for (int i = 0; i < n; ++i) {
            while (true) {
                Eigen::VectorXd p(dims);
                for (int d = 0; d < dims; ++d) {
                    p(d) = 2.0 * gauss(rng);
                }
                const double side = normal.dot(p);
                if (std::abs(side) < 0.25) {
                    continue;
                }
                if (i == 0 && side < 0) {
                    continue; // force one of each class
                }
                if (i == 1 && side > 0) {
                    continue;
                }
                x.row(i) = p.transpose();
                y[static_cast<std::size_t>(i)] = side > 0 ? 1 : -1;
                break;
            }
        }
        const auto model = train_svm(x, y, 100.0, 0);
        for (int i = 0; i < n; ++i) {
            const auto p = predict_scaled_free(model, x.row(i).transpose());
            if ((p.legitimate ? 1 : -1) != y[static_cast<std::size_t>(i)]) {
                return {false, "training error on separable instance " + std::to_string(round)};
            }
        }
    }

    // (b) objective within 1% of the brute-force grid oracle
    for (int round = 0; round < 20; ++round) {
        Eigen::MatrixXd x(4, 2);
        for (int i = 0; i < 4; ++i) {
            x(i, 0) = gauss(rng);
            x(i, 1) = gauss(rng);
        }
        const std::vector<int> y = {1, 1, -1, -1};
        const auto model = train_svm(x, y, 1.0, 0);
        const Eigen::MatrixXd xs = scale_rows(model.scaler, x);
        const double ours = hinge_objective(model.w, model.b, 1.0, xs, y);
        const double oracle = grid_objective(xs, y, 1.0);
        const double rel = std::abs(ours - oracle) / std::max(oracle, 1e-9);
        if (rel > 0.01) {
            return {false, "objective off by " + std::to_string(rel) + " at round " +
                               std::to_string(round)};
        }
    }

    // (c) hinge gradient vs central finite differences away from kinks
    Eigen::MatrixXd x(15, 3);
    std::vector<int> y(15);
    for (int i = 0; i < 15; ++i) {
        for (int j = 0; j < 3; ++j) {
            x(i, j) = gauss(rng);
        }
        y[static_cast<std::size_t>(i)] = i % 2 == 0 ? 1 : -1;
    }
    int tested = 0;
    while (tested < 20) {
        Eigen::VectorXd w(3);
        for (int j = 0; j < 3; ++j) {
            w(j) = gauss(rng);
        }
        const double b = gauss(rng);
        bool kink = false;
        for (int i = 0; i < 15; ++i) {
            if (std::abs(1.0 - y[static_cast<std::size_t>(i)] * (x.row(i).dot(w) + b)) < 1e-3) {
                kink = true;
                break;
            }
        }
        if (kink) {
            continue;
        }
        const auto grad = hinge_gradient(w, b, 2.0, x, y);
        const double h = 1e-6;
        for (int j = 0; j <= 3; ++j) {
            Eigen::VectorXd wp = w;
            Eigen::VectorXd wm = w;
            double bp = b;
            double bm = b;
            if (j < 3) {
                wp(j) += h;
                wm(j) -= h;
            } else {
                bp += h;
                bm -= h;
            }
            const double fd =
                (hinge_objective(wp, bp, 2.0, x, y) - hinge_objective(wm, bm, 2.0, x, y)) /
                (2 * h);
            const double rel = std::abs(fd - grad(j)) / std::max(1.0, std::abs(grad(j)));
            if (rel >= 1e-4) {
                return {false, "gradient mismatch rel=" + std::to_string(rel)};
            }
        }
        ++tested;
    }
    return {true, "100 separable, 20 oracle instances, 20 gradient points"};
}

// ------------------------------------------------------- criteria 3, 4 and 5

struct ClosedLoopStats {
    int pairs = 0;
    int recovered = 0;
    double echoia_mean = 0.0;
    double baseline_mean = 0.0;
    double drift_echoia_mean = 0.0;
    double drift_baseline_mean = 0.0;
    int aborted = 0;
};

ClosedLoopStats closed_loop_runs(int seeds) {
    const FeatureCatalog catalog = FeatureCatalog::standard();
    ClosedLoopStats stats;
    int acc_count = 0;
    int drift_count = 0;
    for (int seed = 1; seed <= seeds; ++seed) {
        ExperimentConfig cfg;
        cfg.seed = static_cast<std::uint64_t>(seed);

        auto [corpus, truth] = gen_corpus(cfg.gen_config(), catalog);
        const auto echoia_reports =
            run_scheme(corpus, Scheme::echoia, cfg.eval_config(Scheme::echoia));
        const auto base_reports = run_scheme(corpus, Scheme::fixed_all_features,
                                             cfg.eval_config(Scheme::fixed_all_features));
        for (std::size_t i = 0; i < echoia_reports.size(); ++i) {
            const auto& r = echoia_reports[i];
            if (r.aborted) {
                ++stats.aborted;
                continue;
            }
            const auto& planted =
                truth.users[static_cast<std::size_t>(corpus.devices[i].owner)].planted;
            int hits = 0;
            for (FeatureId f : r.final_set.top) {
                if (std::find(planted.begin(), planted.end(), f) != planted.end()) {
                    ++hits;
                }
            }
            ++stats.pairs;
            if (hits >= 3) {
                ++stats.recovered;
            }
            if (!std::isnan(r.final_acc) && !std::isnan(base_reports[i].final_acc)) {
                stats.echoia_mean += r.final_acc;
                stats.baseline_mean += base_reports[i].final_acc;
                ++acc_count;
            }
        }

        ExperimentConfig dcfg = cfg;
        dcfg.drift = true;
        auto [drift_corpus, drift_truth] = gen_corpus(dcfg.gen_config(), catalog);
        const auto de = run_scheme(drift_corpus, Scheme::echoia, dcfg.eval_config(Scheme::echoia));
        const auto db = run_scheme(drift_corpus, Scheme::fixed_all_features,
                                   dcfg.eval_config(Scheme::fixed_all_features));
        for (std::size_t i = 0; i < de.size(); ++i) {
            if (de[i].aborted || db[i].aborted) {
                ++stats.aborted;
                continue;
            }
            if (!std::isnan(de[i].final_acc) && !std::isnan(db[i].final_acc)) {
                stats.drift_echoia_mean += de[i].final_acc;
                stats.drift_baseline_mean += db[i].final_acc;
                ++drift_count;
            }
        }
    }
    stats.echoia_mean /= std::max(acc_count, 1);
    stats.baseline_mean /= std::max(acc_count, 1);
    stats.drift_echoia_mean /= std::max(drift_count, 1);
    stats.drift_baseline_mean /= std::max(drift_count, 1);
    return stats;
}

// ---------------------------------------------------------------- criterion 6

FeatureCatalog trace_catalog() {
    return FeatureCatalog({{"a", 1, false}, {"b", 1, false}, {"c", 1, false}},
                          {{"t", 1, true}});
}

nlohmann::json trace_sample(const FeatureCatalog& catalog, std::int64_t ts, double value,
                            const char* label) {
    BehaviorSample s;
    s.timestamp_ms = ts;
    for (FeatureId f : catalog.all()) {
        BehaviorSample::Reading r;
        r.feature = f;
        r.values = Eigen::VectorXd::Constant(catalog.dims(f), value);
        r.hashed = catalog.sensitive(f);
        s.readings.push_back(std::move(r));
    }
    auto j = sample_to_json(s, catalog);
    if (label != nullptr) {
        j["label"] = label;
    }
    return j;
}

Outcome protocol_conformance() {
    // golden trace
    const auto catalog = trace_catalog();
    RuntimeConfig rc;
    rc.scheme = Scheme::echoia;
    rc.window_ms = 2'000;
    rc.hop_ms = 2'000;
    rc.smooth = {1, 1};
    rc.adapt.k = 2;
    rc.retrain.min_windows_per_class = 2;
    rc.svm_c = 10.0;
    ControlServer server(catalog, rc);
    ConnectionState conn;
    std::uint64_t seq = 1;
    std::vector<MessageType> got;
    nlohmann::json last_update;
    std::uint64_t token = 0;

    auto send = [&](MessageType type, nlohmann::json payload) {
        WireMessage msg;
        msg.type = type;
        msg.seq = seq++;
        msg.device_id = "dev";
        msg.payload = std::move(payload);
        for (const auto& line : server.handle_line(conn, encode(msg))) {
            const auto r = decode(line);
            got.push_back(r.type);
            if (r.type == MessageType::PIN_CHALLENGE) {
                token = r.payload.at("token").get<std::uint64_t>();
            }
            if (r.type == MessageType::FEATURE_SET_UPDATE) {
                last_update = r.payload;
            }
            if (r.type == MessageType::ERROR) {
                throw Error("unexpected ERROR: " + r.payload.dump());
            }
        }
    };
    auto batch = [&](std::int64_t t0, int n, double v, const char* label = nullptr) {
        nlohmann::json arr = nlohmann::json::array();
        for (int i = 0; i < n; ++i) {
            arr.push_back(trace_sample(catalog, t0 + i * 1'000, v, label));
        }
        send(MessageType::SAMPLE_BATCH, {{"samples", std::move(arr)}});
    };

    try {
        send(MessageType::HELLO, {});
        send(MessageType::RANK_RESPONSE, {{"ranks", {{"a", 1}, {"b", 2}, {"c", 3}}}});
        batch(0, 4, 3.0, "legitimate");
        batch(4'000, 2, 3.0, "legitimate");
        batch(6'000, 2, -3.0, "illegitimate");
        batch(8'000, 2, -3.0, "illegitimate");
        batch(10'000, 2, -3.0, "illegitimate");
        batch(12'000, 2, 3.0); // decides on the illegitimate window, locks
        send(MessageType::PASSWORD_EVENT, {{"correct", false}, {"t", 13'500}});
        send(MessageType::PASSWORD_EVENT, {{"correct", true}, {"t", 13'600}});
        for (int cycle = 0; cycle < 3; ++cycle) {
            batch(14'000 + cycle * 4'000, 2, -3.0);
            batch(16'000 + cycle * 4'000, 2, 3.0);
            send(MessageType::PASSWORD_EVENT,
                 {{"correct", true}, {"t", 17'500 + cycle * 4'000}});
        }
        if (token == 0) {
            return {false, "PIN challenge never issued"};
        }
        send(MessageType::PIN_RESPONSE,
             {{"token", token}, {"correct", true}, {"consent", true}, {"t", 26'000}});
    } catch (const Error& e) {
        return {false, std::string("trace aborted: ") + e.what()};
    }

    const std::vector<MessageType> expected = {
        MessageType::RANK_REQUEST,
        MessageType::FEATURE_SET_UPDATE, // v1
        MessageType::AUTH_RESULT, MessageType::AUTH_RESULT, MessageType::AUTH_RESULT,
        MessageType::AUTH_RESULT, MessageType::AUTH_RESULT, // init windows 0..4
        MessageType::AUTH_RESULT, MessageType::LOCKED,      // w5
        MessageType::AUTH_RESULT,                           // w6 legit
        MessageType::AUTH_RESULT, MessageType::LOCKED,      // w7
        MessageType::AUTH_RESULT,                           // w8
        MessageType::AUTH_RESULT, MessageType::LOCKED,      // w9
        MessageType::AUTH_RESULT,                           // w10
        MessageType::AUTH_RESULT, MessageType::LOCKED,      // w11
        MessageType::PIN_CHALLENGE,
        MessageType::FEATURE_SET_UPDATE, // v2 after the refresh
    };
    if (got != expected) {
        std::string detail = "message sequence mismatch: got";
        for (auto t : got) {
            detail += std::string(" ") + to_string(t);
        }
        return {false, detail};
    }
    if (last_update.at("version").get<std::uint64_t>() != 2 ||
        last_update.at("top") != nlohmann::json::array({"a", "c"})) {
        return {false, "refresh landed on the wrong feature set: " + last_update.dump()};
    }

    // randomized round-trips, every type, bit-exact
    std::mt19937_64 rng(6001);
    std::uniform_real_distribution<double> real(-1e9, 1e9);
    const MessageType all_types[] = {
        MessageType::HELLO,          MessageType::RANK_REQUEST,  MessageType::RANK_RESPONSE,
        MessageType::SAMPLE_BATCH,   MessageType::AUTH_RESULT,   MessageType::LOCKED,
        MessageType::PASSWORD_EVENT, MessageType::PIN_CHALLENGE, MessageType::PIN_RESPONSE,
        MessageType::FEATURE_SET_UPDATE, MessageType::ERROR,
    };
    for (int round = 0; round < 10'000; ++round) {
        WireMessage msg;
        msg.type = all_types[round % 11];
        msg.seq = rng() >> 1;
        msg.device_id = "d" + std::to_string(rng() % 1000);
        msg.payload = nlohmann::json::object();
        msg.payload["x"] = real(rng);
        msg.payload["n"] = static_cast<std::int64_t>(rng());
        msg.payload["s"] = "v" + std::to_string(rng() % 100000);
        msg.payload["b"] = rng() % 2 == 0;
        msg.payload["arr"] = {real(rng), real(rng), real(rng)};
        const std::string line = encode(msg);
        const auto back = decode(line);
        if (!(back == msg) || encode(back) != line) {
            return {false, "round-trip mismatch at " + std::to_string(round)};
        }
    }
    return {true, "golden trace exact; 10000 round-trips bit-exact"};
}

// ---------------------------------------------------------------- criterion 7

Outcome security_gates() {
    const auto catalog = trace_catalog();
    RuntimeConfig rc;
    rc.scheme = Scheme::echoia;
    rc.window_ms = 1'000;
    rc.hop_ms = 1'000;
    rc.smooth = {2, 3};
    rc.adapt.k = 2;
    rc.adapt.delta_threshold = 2.0;
    rc.retrain.min_windows_per_class = 2;

    auto make_runtime = [&](const char* id) {
        auto runtime = std::make_unique<DeviceRuntime>(id, catalog, rc);
        RankingResponse ranking;
        int rank = 1;
        for (FeatureId f : catalog.candidates()) {
            ranking.ranks[f] = rank++;
        }
        runtime->set_ranking(ranking);
        std::int64_t ts = 0;
        for (int i = 0; i < 4; ++i) {
            for (int s = 0; s < 2; ++s) {
                BehaviorSample sample;
                sample.timestamp_ms = ts;
                for (FeatureId f : catalog.all()) {
                    BehaviorSample::Reading r;
                    r.feature = f;
                    r.values = Eigen::VectorXd::Constant(1, i % 2 == 0 ? 3.0 : -3.0);
                    sample.readings.push_back(std::move(r));
                }
                runtime->ingest(sample, i % 2 == 0 ? WindowLabel::legitimate
                                                   : WindowLabel::illegitimate);
                ts += 1'000;
            }
        }
        return std::pair{std::move(runtime), ts};
    };

    auto [a, ts_a] = make_runtime("dev-a");
    auto [b, ts_b] = make_runtime("dev-b");
    if (!a->has_model() || !b->has_model()) {
        return {false, "fuzz setup failed to train"};
    }

    const auto b_weights = b->weights().w;
    const auto b_version = b->feature_set().version;
    const auto b_state = b->session().state;
    const auto b_decisions = b->decision_log().size();

    std::mt19937_64 rng(7001);
    std::normal_distribution<double> gauss(0.0, 3.0);
    std::int64_t now = ts_a;
    std::uint64_t live_token = 0;
    bool last_was_correct_password = false;
    bool last_was_good_pin = false;

    for (int iter = 0; iter < 100'000; ++iter) {
        const auto before_state = a->session().state;
        const auto before_version = a->feature_set().version;
        const int op = static_cast<int>(rng() % 10);
        last_was_correct_password = false;
        last_was_good_pin = false;
        try {
            if (op < 6) {
                BehaviorSample sample;
                sample.timestamp_ms = now;
                for (FeatureId f : catalog.all()) {
                    BehaviorSample::Reading r;
                    r.feature = f;
                    r.values = Eigen::VectorXd::Constant(1, gauss(rng));
                    sample.readings.push_back(std::move(r));
                }
                now += 250 + static_cast<std::int64_t>(rng() % 2'000);
                const auto fx = a->ingest(sample, std::nullopt);
                if (fx.challenge) {
                    live_token = fx.challenge->id;
                }
            } else if (op < 8) {
                const bool correct = rng() % 2 == 0;
                last_was_correct_password = correct;
                const auto fx = a->on_password(correct, now);
                if (fx.challenge) {
                    live_token = fx.challenge->id;
                }
            } else {
                const bool valid_token = rng() % 2 == 0 && live_token != 0;
                const std::uint64_t token = valid_token ? live_token : rng();
                const bool correct = rng() % 2 == 0;
                const bool consent = rng() % 2 == 0;
                const bool in_time =
                    a->session().pending_challenge.has_value() &&
                    now <= a->session().pending_challenge->expires_at_ms;
                last_was_good_pin = valid_token && correct && consent && in_time &&
                                    a->session().pending_challenge.has_value() &&
                                    token == a->session().pending_challenge->id;
                a->on_pin(token, correct, consent, now);
            }
        } catch (const Error&) {
            // invalid transitions are expected fuzz results
            last_was_correct_password = false;
            last_was_good_pin = false;
        }

        const auto after_state = a->session().state;
        const auto after_version = a->feature_set().version;
        if (before_state == SessionPhase::locked_awaiting_password &&
            after_state == SessionPhase::unlocked && !last_was_correct_password) {
            return {false, "unlock without password_correct at iter " + std::to_string(iter)};
        }
        if (after_version != before_version && !last_was_good_pin) {
            return {false, "feature set changed without pin_correct+consent at iter " +
                               std::to_string(iter)};
        }
        if (iter % 1'000 == 0) {
            if (b->weights().w != b_weights || b->feature_set().version != b_version ||
                b->session().state != b_state || b->decision_log().size() != b_decisions) {
                return {false, "cross-device mutation at iter " + std::to_string(iter)};
            }
        }
    }
    if (b->weights().w != b_weights || b->feature_set().version != b_version ||
        b->session().state != b_state || b->decision_log().size() != b_decisions) {
        return {false, "cross-device mutation at end"};
    }
    return {true, "100000 fuzz iterations, zero violations"};
}

// ---------------------------------------------------------------- criterion 8

Outcome evaluation_arithmetic() {
    ConfusionCounts hand{90, 85, 10, 15};
    if (acc(hand) != 175.0 / 200.0) {
        return {false, "ACC(90,85,10,15) != 0.875"};
    }
    if (acc(ConfusionCounts{1, 1, 0, 0}) != 1.0 || acc(ConfusionCounts{0, 0, 3, 4}) != 0.0) {
        return {false, "degenerate ACC values wrong"};
    }
    for (std::int64_t total = 100; total <= 10'000; ++total) {
        const auto split = split_boundaries(total, 10, 0.15);
        const auto expect_train = (total * 15) / 100 + ((total * 15) % 100 == 0 ? 0 : 0);
        // closed form: floor(0.15 * total) computed in exact integer arithmetic
        if (split.train_end != (total * 15) / 100) {
            return {false, "train_end mismatch at total " + std::to_string(total) + ": " +
                               std::to_string(split.train_end) + " vs " +
                               std::to_string(expect_train)};
        }
        if (split.boundaries.size() != 9) {
            return {false, "boundary count != 9 at total " + std::to_string(total)};
        }
        for (int part = 2; part <= 10; ++part) {
            if (split.boundaries[static_cast<std::size_t>(part - 2)] != total * part / 10) {
                return {false, "boundary mismatch at total " + std::to_string(total)};
            }
        }
    }
    return {true, "ACC hand values; split boundaries for totals 100..10000"};
}

// ---------------------------------------------------------------- criterion 9

Outcome runtime_budget() {
    const auto t0 = std::chrono::steady_clock::now();
    const auto dir = fs::temp_directory_path() / "echoia_acceptance_pipeline";
    fs::remove_all(dir);

    ExperimentConfig cfg;
    cfg.corpus_dir = (dir / "corpus").string();
    cfg.out_dir = (dir / "reports").string();

    const FeatureCatalog catalog = FeatureCatalog::standard();
    auto [corpus, truth] = gen_corpus(cfg.gen_config(), catalog);
    write_corpus(cfg.corpus_dir, corpus);
    write_truth(cfg.corpus_dir, truth, catalog);

    const Corpus loaded = load_corpus(cfg.corpus_dir);
    std::vector<PerUserReport> summaries;
    for (Scheme scheme : cfg.schemes()) {
        auto reports = run_scheme(loaded, scheme, cfg.eval_config(scheme));
        for (const auto& r : reports) {
            if (r.aborted) {
                return {false, "aborted session in budget run: " + r.abort_reason};
            }
        }
        write_timeline_csv(fs::path(cfg.out_dir) /
                               ("timeline_" + std::string(to_string(scheme)) + ".csv"),
                           reports);
        summaries.push_back(per_user_report(reports));
    }
    write_summary_json(fs::path(cfg.out_dir) / "summary.json", summaries);
    fs::remove_all(dir);

    const double seconds = elapsed_s(t0);
    if (seconds >= 900.0) {
        return {false, "pipeline took " + std::to_string(seconds) + " s (budget 900)"};
    }
    return {true, "gen + both schemes + eval in " + std::to_string(seconds) + " s"};
}

} // namespace

int main() {
    int failures = 0;
    auto report = [&](const char* name, const Outcome& outcome, double seconds) {
        std::printf("[%s] %-28s %s (%.1f s)\n", outcome.pass ? "PASS" : "FAIL", name,
                    outcome.detail.c_str(), seconds);
        if (!outcome.pass) {
            ++failures;
        }
    };

    {
        const auto t0 = std::chrono::steady_clock::now();
        report("formula-exactness", formula_exactness(), elapsed_s(t0));
    }
    {
        const auto t0 = std::chrono::steady_clock::now();
        report("svm-correctness", svm_correctness(), elapsed_s(t0));
    }
    {
        const auto t0 = std::chrono::steady_clock::now();
        const auto stats = closed_loop_runs(20);
        const double elapsed = elapsed_s(t0);
        {
            Outcome o;
            const double rate =
                stats.pairs > 0 ? static_cast<double>(stats.recovered) / stats.pairs : 0.0;
            o.pass = stats.pairs >= 17 * 20 - stats.aborted && rate >= 0.80 &&
                     stats.aborted == 0;
            char buf[160];
            std::snprintf(buf, sizeof(buf), "%d/%d pairs kept >=3 planted (%.1f%%), %d aborted",
                          stats.recovered, stats.pairs, 100.0 * rate, stats.aborted);
            o.detail = buf;
            report("closed-loop-recovery", o, elapsed);
        }
        {
            Outcome o;
            const double gap = stats.echoia_mean - stats.baseline_mean;
            const double drift_gap = stats.drift_echoia_mean - stats.drift_baseline_mean;
            o.pass = gap >= -0.01 && drift_gap >= 0.03;
            char buf[200];
            std::snprintf(buf, sizeof(buf),
                          "no-drift gap %+0.4f (>= -0.01), drift gap %+0.4f (>= +0.03)", gap,
                          drift_gap);
            o.detail = buf;
            report("adaptive-vs-baseline", o, 0.0);
        }
        {
            Outcome o;
            o.pass = stats.echoia_mean >= 0.90;
            char buf[120];
            std::snprintf(buf, sizeof(buf), "mean final ACC %.4f (>= 0.90)", stats.echoia_mean);
            o.detail = buf;
            report("absolute-accuracy", o, 0.0);
        }
    }
    {
        const auto t0 = std::chrono::steady_clock::now();
        report("protocol-conformance", protocol_conformance(), elapsed_s(t0));
    }
    {
        const auto t0 = std::chrono::steady_clock::now();
        report("security-gates", security_gates(), elapsed_s(t0));
    }
    {
        const auto t0 = std::chrono::steady_clock::now();
        report("evaluation-arithmetic", evaluation_arithmetic(), elapsed_s(t0));
    }
    {
        const auto t0 = std::chrono::steady_clock::now();
        report("runtime-budget", runtime_budget(), elapsed_s(t0));
    }

    if (failures > 0) {
        std::printf("%d criterion(s) failed\n", failures);
        return 1;
    }
    std::printf("all criteria passed\n");
    return 0;
}
