#include "echoia/simulation.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>

namespace echoia {

namespace {

std::uint64_t mix(std::uint64_t a, std::uint64_t b) {
    std::uint64_t x = a + 0x9e3779b97f4a7c15ULL + (b << 6) + (b >> 2);
    x ^= x >> 30;
    x *= 0xbf58476d1ce4e5b9ULL;
    x ^= x >> 27;
    x *= 0x94d049bb133111ebULL;
    x ^= x >> 31;
    return x;
}

std::uint64_t fnv1a(std::uint64_t seed, std::uint64_t value) {
    std::uint64_t h = 0xcbf29ce484222325ULL ^ seed;
    for (int i = 0; i < 8; ++i) {
        h ^= (value >> (i * 8)) & 0xff;
        h *= 0x100000001b3ULL;
    }
    return h;
}

// salted one-way map into [0, 1); equal raw values stay equal per device
double hash_reading(std::uint64_t salt, double value) {
    std::uint64_t bits;
    static_assert(sizeof(bits) == sizeof(value));
    std::memcpy(&bits, &value, sizeof(bits));
    return static_cast<double>(fnv1a(salt, bits) >> 11) / 9007199254740992.0;
}

struct FeatureParams {
    Eigen::VectorXd offset;    // owner-specific mean, in population stds
    double sigma_scale = 1.0;
};

struct Profile {
    std::vector<FeatureParams> params; // per catalog feature
    std::vector<FeatureId> planted;
    std::optional<DriftSpec> drift;
    RankingResponse ranking;
};

Profile make_profile(const GenConfig& cfg, const FeatureCatalog& catalog, int user) {
    std::mt19937_64 rng(mix(cfg.seed, 0x50726f66ULL + static_cast<std::uint64_t>(user)));
    std::normal_distribution<double> gauss(0.0, 1.0);
    std::uniform_real_distribution<double> unit(0.0, 1.0);

    Profile p;

    // planted set: k candidates, excluding hashed-sensitive ones by default
    std::vector<FeatureId> eligible;
    for (FeatureId f : catalog.candidates()) {
        if (cfg.plant_sensitive || !catalog.sensitive(f)) {
            eligible.push_back(f);
        }
    }
    std::shuffle(eligible.begin(), eligible.end(), rng);
    const std::size_t k = std::min<std::size_t>(static_cast<std::size_t>(cfg.k), eligible.size());
    p.planted.assign(eligible.begin(), eligible.begin() + static_cast<std::ptrdiff_t>(k));
    std::sort(p.planted.begin(), p.planted.end());

    const double spread = 0.25 * std::min(cfg.separation, 1.0);
    for (FeatureId f : catalog.all()) {
        FeatureParams fp;
        const int d = catalog.dims(f);
        double magnitude;
        if (std::binary_search(p.planted.begin(), p.planted.end(), f)) {
            magnitude = cfg.separation;
        } else if (catalog.is_reserved(f)) {
            magnitude = cfg.reserved_ratio * cfg.separation;
        } else {
            magnitude = cfg.nonplanted_ratio * cfg.separation;
        }
        // Gaussian offsets (RMS norm = magnitude), so distinct users land at
        // distinct spots even on one-dimensional sensors.
        fp.offset.resize(d);
        for (int i = 0; i < d; ++i) {
            fp.offset(i) = magnitude / std::sqrt(static_cast<double>(d)) * gauss(rng);
        }
        fp.sigma_scale = 1.0 + spread * 2.0 * (unit(rng) - 0.5);
        p.params.push_back(std::move(fp));
    }

    // true ranking: planted features first, then the rest, order randomized
    // within each group, then a few adjacent swaps of reporting noise
    std::vector<FeatureId> order = p.planted;
    std::shuffle(order.begin(), order.end(), rng);
    std::vector<FeatureId> rest;
    for (FeatureId f : catalog.candidates()) {
        if (!std::binary_search(p.planted.begin(), p.planted.end(), f)) {
            rest.push_back(f);
        }
    }
    std::shuffle(rest.begin(), rest.end(), rng);
    order.insert(order.end(), rest.begin(), rest.end());
    if (order.size() > 1) {
        std::uniform_int_distribution<std::size_t> pos(0, order.size() - 2);
        for (int s = 0; s < cfg.ranking_swaps; ++s) {
            const std::size_t i = pos(rng);
            std::swap(order[i], order[i + 1]);
        }
    }
    for (std::size_t i = 0; i < order.size(); ++i) {
        p.ranking.ranks[order[i]] = static_cast<int>(i) + 1;
    }

    if (cfg.drift) {
        DriftSpec drift;
        drift.onset_ms = static_cast<std::int64_t>(cfg.drift_onset_frac *
                                                   static_cast<double>(cfg.duration_ms));
        drift.sigma_boost = cfg.drift_sigma_boost;
        std::vector<FeatureId> pool;
        for (FeatureId f : catalog.candidates()) {
            const bool is_planted = std::binary_search(p.planted.begin(), p.planted.end(), f);
            // hashed-sensitive features carry no usable signal server-side,
            // so drifting them would be a no-op
            if (cfg.drift_on_planted == is_planted && !catalog.sensitive(f)) {
                pool.push_back(f);
            }
        }
        std::shuffle(pool.begin(), pool.end(), rng);
        const std::size_t take =
            std::min<std::size_t>(static_cast<std::size_t>(cfg.drift_features), pool.size());
        drift.features.assign(pool.begin(), pool.begin() + static_cast<std::ptrdiff_t>(take));
        std::sort(drift.features.begin(), drift.features.end());
        p.drift = std::move(drift);
    }
    return p;
}

SessionScript make_script(const GenConfig& cfg, int owner, int n_users, std::mt19937_64& rng) {
    SessionScript script;
    script.p_owner = cfg.p_owner;
    script.p_intruder = cfg.p_intruder;
    script.intruder_max_attempts = cfg.intruder_max_attempts;
    script.owner_consents = cfg.owner_consents;

    const std::int64_t total = cfg.duration_ms;
    const int nseg = std::max(1, cfg.intruder_segments);
    const std::int64_t seg_len =
        static_cast<std::int64_t>(cfg.intruder_fraction * static_cast<double>(total)) / nseg;

    // One intruder segment early so the training prefix sees both classes.
    // It gets stretched toward 5 minutes so enough illegitimate windows exist
    // to train on; the rest spread over the remaining timeline with jitter.
    std::vector<std::pair<std::int64_t, std::int64_t>> intruder_spans;
    const std::int64_t first_len =
        std::max(seg_len, std::min<std::int64_t>(300'000, total * 6 / 100));
    const std::int64_t first_start = total / 20; // 5% in
    intruder_spans.emplace_back(first_start, first_start + first_len);
    std::uniform_real_distribution<double> jitter(-0.02, 0.02);
    for (int i = 1; i < nseg; ++i) {
        const double frac = 0.2 + 0.75 * (static_cast<double>(i) - 0.5) /
                                      static_cast<double>(nseg - 1 > 0 ? nseg - 1 : 1) +
                            jitter(rng);
        auto start = static_cast<std::int64_t>(frac * static_cast<double>(total));
        start = std::clamp<std::int64_t>(start, intruder_spans.back().second + seg_len,
                                         total - seg_len - 1);
        intruder_spans.emplace_back(start, start + seg_len);
    }

    std::uniform_int_distribution<int> other(1, std::max(1, n_users - 1));
    std::int64_t cursor = 0;
    bool first = true;
    for (const auto& [s, e] : intruder_spans) {
        if (s > cursor) {
            script.segments.push_back({cursor, s, owner, false});
        }
        if (first && n_users > 2) {
            // split the enrollment-time segment across distinct intruders, so
            // the negative class means "other people", not one person
            const int parts = std::min<int>(5, n_users - 1);
            const std::int64_t sub = (e - s) / parts;
            for (int i = 0; i < parts; ++i) {
                const std::int64_t lo = s + i * sub;
                const std::int64_t hi = i + 1 == parts ? e : lo + sub;
                script.segments.push_back({lo, hi, (owner + 1 + i) % n_users, true});
            }
        } else {
            const int who = n_users > 1 ? (owner + other(rng)) % n_users : owner;
            script.segments.push_back({s, e, who, n_users > 1});
        }
        first = false;
        cursor = e;
    }
    if (cursor < total) {
        script.segments.push_back({cursor, total, owner, false});
    }
    return script;
}

} // namespace

int SessionScript::profile_at(std::int64_t ts) const {
    for (const auto& seg : segments) {
        if (ts >= seg.start_ms && ts < seg.end_ms) {
            return seg.profile;
        }
    }
    return segments.empty() ? 0 : segments.back().profile;
}

bool SessionScript::intruder_at(std::int64_t ts) const {
    for (const auto& seg : segments) {
        if (ts >= seg.start_ms && ts < seg.end_ms) {
            return seg.intruder;
        }
    }
    return false;
}

double SessionScript::intruder_fraction() const {
    std::int64_t total = 0;
    std::int64_t intruder = 0;
    for (const auto& seg : segments) {
        total += seg.end_ms - seg.start_ms;
        if (seg.intruder) {
            intruder += seg.end_ms - seg.start_ms;
        }
    }
    return total > 0 ? static_cast<double>(intruder) / static_cast<double>(total) : 0.0;
}

std::pair<Corpus, GroundTruth> gen_corpus(const GenConfig& cfg, const FeatureCatalog& catalog) {
    if (cfg.n_users < 1 || cfg.duration_ms <= 0 || cfg.sample_period_ms <= 0) {
        throw ConfigError("gen_corpus: bad user count, duration or sample period");
    }
    Corpus corpus;
    corpus.catalog = catalog;
    GroundTruth truth;

    std::vector<Profile> profiles;
    profiles.reserve(static_cast<std::size_t>(cfg.n_users));
    for (int u = 0; u < cfg.n_users; ++u) {
        profiles.push_back(make_profile(cfg, catalog, u));
        char buf[16];
        std::snprintf(buf, sizeof(buf), "u%02d", u);
        corpus.user_ids.emplace_back(buf);
        UserTruth ut;
        ut.user_id = corpus.user_ids.back();
        ut.planted = profiles.back().planted;
        ut.drift = profiles.back().drift;
        truth.users.push_back(std::move(ut));
    }

    const auto features = catalog.all();
    for (int owner = 0; owner < cfg.n_users; ++owner) {
        std::mt19937_64 rng(mix(cfg.seed, 0x44657620ULL + static_cast<std::uint64_t>(owner)));
        std::normal_distribution<double> gauss(0.0, 1.0);

        DeviceCorpus dev;
        char buf[16];
        std::snprintf(buf, sizeof(buf), "dev-%02d", owner);
        dev.device_id = buf;
        dev.owner = owner;
        dev.ranking = profiles[static_cast<std::size_t>(owner)].ranking;
        dev.duration_ms = cfg.duration_ms;
        dev.script = make_script(cfg, owner, cfg.n_users, rng);

        const std::uint64_t salt = mix(cfg.seed, 0x53616c74ULL + static_cast<std::uint64_t>(owner));
        const double ar = std::exp(-static_cast<double>(cfg.sample_period_ms) /
                                   static_cast<double>(cfg.level_corr_ms));
        const double ar_noise = std::sqrt(std::max(0.0, 1.0 - ar * ar));

        dev.samples.reserve(static_cast<std::size_t>(cfg.duration_ms / cfg.sample_period_ms));
        for (const auto& seg : dev.script.segments) {
            const Profile& active = profiles[static_cast<std::size_t>(seg.profile)];
            // activity level restarts per usage segment and wanders slowly
            std::vector<Eigen::VectorXd> level(features.size());
            for (std::size_t fi = 0; fi < features.size(); ++fi) {
                const int d = catalog.dims(features[fi]);
                level[fi].resize(d);
                for (int i = 0; i < d; ++i) {
                    level[fi](i) = cfg.level_noise * gauss(rng);
                }
            }
            for (std::int64_t ts = seg.start_ms; ts < seg.end_ms; ts += cfg.sample_period_ms) {
                BehaviorSample s;
                s.device_id = dev.device_id;
                s.timestamp_ms = ts;
                s.readings.reserve(features.size());
                for (std::size_t fi = 0; fi < features.size(); ++fi) {
                    const FeatureId f = features[fi];
                    const auto& fp = active.params[f.value];
                    const int d = catalog.dims(f);

                    Eigen::VectorXd offset = fp.offset;
                    double sigma = fp.sigma_scale;
                    if (active.drift && ts >= active.drift->onset_ms &&
                        std::binary_search(active.drift->features.begin(),
                                           active.drift->features.end(), f)) {
                        offset.setZero(); // collapsed to the population
                        sigma *= active.drift->sigma_boost;
                    }

                    BehaviorSample::Reading r;
                    r.feature = f;
                    r.values.resize(d);
                    for (int i = 0; i < d; ++i) {
                        level[fi](i) = ar * level[fi](i) + ar_noise * cfg.level_noise * gauss(rng);
                        r.values(i) = offset(i) + sigma * (level[fi](i) + gauss(rng));
                    }
                    if (catalog.sensitive(f)) {
                        for (int i = 0; i < d; ++i) {
                            r.values(i) = hash_reading(salt, r.values(i));
                        }
                        r.hashed = true;
                    }
                    s.readings.push_back(std::move(r));
                }
                dev.samples.push_back(std::move(s));
            }
        }
        corpus.devices.push_back(std::move(dev));
    }
    return {std::move(corpus), std::move(truth)};
}

// ---------------------------------------------------------------------------
// ports

bool DirectPort::wants_ranking() {
    return runtime_.config().scheme == Scheme::echoia && !runtime_.ranked();
}

StepEffects DirectPort::send_ranking(const RankingResponse& ranking) {
    StepEffects fx;
    fx.feature_set_update = runtime_.set_ranking(ranking);
    return fx;
}

StepEffects DirectPort::send_sample(const BehaviorSample& sample,
                                    std::optional<WindowLabel> truth) {
    return runtime_.ingest(sample, truth);
}

StepEffects DirectPort::send_password(bool correct, std::int64_t ts) {
    return runtime_.on_password(correct, ts);
}

StepEffects DirectPort::send_pin(std::uint64_t token, bool correct, bool consent,
                                 std::int64_t ts) {
    return runtime_.on_pin(token, correct, consent, ts);
}

std::optional<PersonalFeatureSet> DirectPort::current_feature_set() {
    return runtime_.feature_set();
}

WirePort::WirePort(ControlServer& server, std::string device_id)
    : server_(server), device_id_(std::move(device_id)) {
    WireMessage hello;
    hello.type = MessageType::HELLO;
    hello.seq = next_seq_++;
    hello.device_id = device_id_;
    trace_.push_back(hello);
    for (auto& r : server_.handle_message(conn_, hello)) {
        if (r.type == MessageType::RANK_REQUEST) {
            ranking_requested_ = true;
        }
        trace_.push_back(r);
    }
}

bool WirePort::wants_ranking() { return ranking_requested_; }

StepEffects WirePort::roundtrip(MessageType type, nlohmann::json payload) {
    WireMessage msg;
    msg.type = type;
    msg.seq = next_seq_++;
    msg.device_id = device_id_;
    msg.payload = std::move(payload);
    trace_.push_back(msg);

    // through the real encoder/decoder, like a transport would
    const auto replies = server_.handle_line(conn_, encode(msg));

    StepEffects fx;
    for (const auto& line : replies) {
        WireMessage r = decode(line);
        trace_.push_back(r);
        switch (r.type) {
        case MessageType::AUTH_RESULT: {
            if (r.payload.value("phase", "") == "init") {
                fx.bootstrap_windows.push_back(r.payload.at("window_id").get<std::int64_t>());
                break;
            }
            AuthDecision d;
            d.window_id = r.payload.at("window_id").get<std::int64_t>();
            d.timestamp_ms = r.payload.at("t").get<std::int64_t>();
            d.score = r.payload.at("score").get<double>();
            d.label_legit = r.payload.at("label").get<std::string>() == "legitimate";
            d.smoothed_legit = r.payload.at("smoothed").get<std::string>() == "legitimate";
            d.acted = r.payload.at("locked").get<bool>();
            fx.decisions.push_back(d);
            break;
        }
        case MessageType::LOCKED:
            fx.lock_fired = true;
            break;
        case MessageType::PIN_CHALLENGE: {
            ChallengeToken token;
            token.id = r.payload.at("token").get<std::uint64_t>();
            token.device_id = device_id_;
            token.expires_at_ms = r.payload.at("expires_at").get<std::int64_t>();
            fx.challenge = token;
            break;
        }
        case MessageType::FEATURE_SET_UPDATE: {
            PersonalFeatureSet set;
            set.version = r.payload.at("version").get<std::uint64_t>();
            for (const auto& name : r.payload.at("top")) {
                if (auto f = server_.catalog().find(name.get<std::string>())) {
                    set.top.push_back(*f);
                }
            }
            for (const auto& name : r.payload.at("reserved")) {
                if (auto f = server_.catalog().find(name.get<std::string>())) {
                    set.reserved.push_back(*f);
                }
            }
            fx.feature_set_update = std::move(set);
            break;
        }
        case MessageType::ERROR:
            throw Error("server error: " + r.payload.value("error", std::string{"?"}));
        default:
            break;
        }
    }
    return fx;
}

StepEffects WirePort::send_ranking(const RankingResponse& ranking) {
    nlohmann::json ranks = nlohmann::json::object();
    for (const auto& [f, r] : ranking.ranks) {
        ranks[server_.catalog().name(f)] = r;
    }
    return roundtrip(MessageType::RANK_RESPONSE, {{"ranks", std::move(ranks)}});
}

StepEffects WirePort::send_sample(const BehaviorSample& sample,
                                  std::optional<WindowLabel> truth) {
    nlohmann::json js = sample_to_json(sample, server_.catalog());
    if (truth && *truth != WindowLabel::unlabeled) {
        js["label"] = *truth == WindowLabel::legitimate ? "legitimate" : "illegitimate";
    }
    nlohmann::json payload;
    payload["samples"] = nlohmann::json::array({std::move(js)});
    return roundtrip(MessageType::SAMPLE_BATCH, std::move(payload));
}

StepEffects WirePort::send_password(bool correct, std::int64_t ts) {
    return roundtrip(MessageType::PASSWORD_EVENT, {{"correct", correct}, {"t", ts}});
}

StepEffects WirePort::send_pin(std::uint64_t token, bool correct, bool consent,
                               std::int64_t ts) {
    return roundtrip(MessageType::PIN_RESPONSE,
                     {{"token", token}, {"correct", correct}, {"consent", consent}, {"t", ts}});
}

std::optional<PersonalFeatureSet> WirePort::current_feature_set() {
    DeviceRuntime* rt = server_.find_device(device_id_);
    if (rt == nullptr) {
        return std::nullopt;
    }
    return rt->feature_set();
}

// ---------------------------------------------------------------------------
// scripted session driver

SessionLog run_device_session(const DeviceCorpus& device, StackPort& port,
                              const DriverConfig& cfg) {
    SessionLog log;
    log.device_id = device.device_id;

    std::mt19937_64 rng(mix(cfg.seed, fnv1a(0, device.samples.size())));
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    const SessionScript& script = device.script;

    bool locked = false;
    bool stop = false;
    std::optional<std::int64_t> next_attempt;
    int attempts_by_current = 0;
    int last_attempt_profile = -1;

    auto absorb = [&](const StepEffects& fx, std::int64_t now) {
        for (const auto& d : fx.decisions) {
            log.decisions.push_back(d);
        }
        for (const auto& e : fx.events) {
            log.events.push_back(e);
        }
        if (fx.feature_set_update) {
            log.feature_updates.emplace_back(now, *fx.feature_set_update);
        }
        if (fx.lock_fired) {
            locked = true;
            next_attempt = now + script.password_delay_ms;
            attempts_by_current = 0;
            last_attempt_profile = script.profile_at(now);
        }
        if (cfg.observer) {
            cfg.observer(fx, now);
        }
    };

    auto answer_challenge = [&](const ChallengeToken& token, std::int64_t now) {
        const std::int64_t ts = now + script.pin_delay_ms;
        const bool owner_present = !script.intruder_at(now);
        bool pin_ok = owner_present; // the PIN is the owner's secret
        bool consent = owner_present ? script.owner_consents : true;
        if (cfg.pin_hook) {
            const auto answer = cfg.pin_hook(ts);
            if (!answer) {
                stop = true;
                return;
            }
            pin_ok = answer->first;
            consent = answer->second;
        }
        StepEffects fx = port.send_pin(token.id, pin_ok, consent, ts);
        absorb(fx, ts);
    };

    auto attempt_password = [&](std::int64_t ts) {
        const int who = script.profile_at(ts);
        const bool owner_present = !script.intruder_at(ts);
        bool correct;
        if (cfg.password_hook) {
            const auto answer = cfg.password_hook(ts);
            if (!answer) {
                stop = true;
                return;
            }
            correct = *answer;
        } else {
            const double p = owner_present ? script.p_owner : script.p_intruder;
            correct = unit(rng) < p;
        }
        StepEffects fx = port.send_password(correct, ts);
        absorb(fx, ts);
        if (fx.challenge) {
            answer_challenge(*fx.challenge, ts);
        }
        if (correct) {
            locked = false;
            next_attempt.reset();
            return;
        }
        ++attempts_by_current;
        last_attempt_profile = who;
        const bool keep_trying = owner_present || attempts_by_current < script.intruder_max_attempts;
        if (keep_trying) {
            next_attempt = ts + script.retry_ms;
        } else {
            next_attempt.reset(); // intruder gives up; device stays locked
        }
    };

    try {
        if (port.wants_ranking()) {
            StepEffects fx = port.send_ranking(device.ranking);
            absorb(fx, 0);
        }
        for (const auto& sample : device.samples) {
            const std::int64_t ts = sample.timestamp_ms;
            if (locked && !next_attempt && script.profile_at(ts) != last_attempt_profile) {
                // a different user picked up the locked device
                next_attempt = ts + script.password_delay_ms;
                attempts_by_current = 0;
            }
            while (!stop && locked && next_attempt && *next_attempt <= ts) {
                const std::int64_t at = *next_attempt;
                attempt_password(at);
            }
            if (stop) {
                break;
            }
            std::optional<WindowLabel> truth;
            if (ts < cfg.prefix_end_ms) {
                truth = script.intruder_at(ts) ? WindowLabel::illegitimate
                                               : WindowLabel::legitimate;
            }
            StepEffects fx = port.send_sample(sample, truth);
            absorb(fx, ts);
            if (fx.challenge) {
                answer_challenge(*fx.challenge, ts);
            }
            if (stop) {
                break;
            }
        }
        log.stopped_early = stop;
    } catch (const Error& e) {
        log.aborted = true;
        log.abort_reason = e.what();
    }

    if (auto set = port.current_feature_set()) {
        log.final_set = *set;
    }
    return log;
}

std::vector<SessionLog> run_session(const Corpus& corpus, ControlServer& server,
                                    const DriverConfig& cfg) {
    std::vector<SessionLog> logs;
    logs.reserve(corpus.devices.size());
    for (const auto& device : corpus.devices) {
        WirePort port(server, device.device_id);
        logs.push_back(run_device_session(device, port, cfg));
    }
    return logs;
}

} // namespace echoia
