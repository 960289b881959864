#include "echoia/authenticator.hpp"

#include <algorithm>

namespace echoia {

const char* to_string(Scheme s) {
    switch (s) {
    case Scheme::echoia: return "echoia";
    case Scheme::fixed_all_features: return "fixed_all_features";
    }
    return "?";
}

std::optional<Scheme> scheme_from_string(const std::string& s) {
    if (s == "echoia") {
        return Scheme::echoia;
    }
    if (s == "fixed_all_features") {
        return Scheme::fixed_all_features;
    }
    return std::nullopt;
}

AuthDecision decide(const SvmModel& model, const WindowVector& window, SessionState& session,
                    const SmootherConfig& smoothing, std::int64_t now_ms) {
    if (session.state != SessionPhase::unlocked) {
        throw Error("decide: session is not unlocked");
    }
    const Prediction p = predict(model, window);

    AuthDecision d;
    d.window_id = window.window_id;
    d.timestamp_ms = now_ms;
    d.score = p.score;
    d.label_legit = p.legitimate;

    session.recent_illegit.push_back(!p.legitimate);
    while (session.recent_illegit.size() > static_cast<std::size_t>(smoothing.n)) {
        session.recent_illegit.pop_front();
    }
    if (p.legitimate) {
        session.consecutive_illegit = 0;
    } else {
        ++session.consecutive_illegit;
    }

    const auto illegit =
        std::count(session.recent_illegit.begin(), session.recent_illegit.end(), true);
    d.smoothed_legit = illegit < smoothing.m;

    if (!d.smoothed_legit) {
        d.acted = true;
        session.state = SessionPhase::locked_awaiting_password;
        session.since_ms = now_ms;
    }
    return d;
}

FeedbackEvent handle_password(SessionState& session, bool correct, std::int64_t now_ms,
                              const std::string& device_id) {
    if (session.state != SessionPhase::locked_awaiting_password) {
        throw NotLocked();
    }
    FeedbackEvent ev;
    ev.kind = correct ? FeedbackKind::password_correct : FeedbackKind::password_incorrect;
    ev.timestamp_ms = session.since_ms; // the lock's timestamp
    ev.device_id = device_id;
    if (correct) {
        session.state = SessionPhase::unlocked;
        session.since_ms = now_ms;
        session.consecutive_illegit = 0;
        session.recent_illegit.clear();
    }
    return ev;
}

void TrainingBuffer::add(WindowVector full_window, WindowLabel label) {
    if (label == WindowLabel::unlabeled) {
        return;
    }
    auto& dst = label == WindowLabel::legitimate ? legit_ : illegit_;
    dst.push_back(std::move(full_window));
    while (dst.size() > cap_) {
        dst.pop_front();
    }
}

std::pair<Eigen::MatrixXd, std::vector<int>> TrainingBuffer::assemble(
    const WindowLayout& layout, const WindowLayout& full) const {
    const auto indices = projection_indices(layout, full);

    // Replicate the minority class toward balance (bounded) so a skewed
    // buffer does not push the boundary onto the rare class.
    const std::size_t nl = legit_.size();
    const std::size_t ni = illegit_.size();
    std::size_t rep_l = 1;
    std::size_t rep_i = 1;
    if (nl > 0 && ni > 0) {
        if (nl > ni) {
            rep_i = std::min<std::size_t>(4, nl / ni);
        } else {
            rep_l = std::min<std::size_t>(4, ni / nl);
        }
    }

    const auto rows = static_cast<Eigen::Index>(nl * rep_l + ni * rep_i);
    Eigen::MatrixXd x(rows, layout.size());
    std::vector<int> y;
    y.reserve(static_cast<std::size_t>(rows));
    Eigen::Index r = 0;
    auto emit = [&](const WindowVector& w, int label, std::size_t times) {
        for (std::size_t t = 0; t < times; ++t) {
            for (std::size_t i = 0; i < indices.size(); ++i) {
                x(r, static_cast<Eigen::Index>(i)) = w.values(indices[i]);
            }
            y.push_back(label);
            ++r;
        }
    };
    for (const auto& w : legit_) {
        emit(w, 1, rep_l);
    }
    for (const auto& w : illegit_) {
        emit(w, -1, rep_i);
    }
    return {std::move(x), std::move(y)};
}

void StepEffects::merge(StepEffects&& other) {
    decisions.insert(decisions.end(), other.decisions.begin(), other.decisions.end());
    bootstrap_windows.insert(bootstrap_windows.end(), other.bootstrap_windows.begin(),
                             other.bootstrap_windows.end());
    lock_fired = lock_fired || other.lock_fired;
    if (other.challenge) {
        challenge = other.challenge;
    }
    if (other.feature_set_update) {
        feature_set_update = other.feature_set_update;
    }
    events.insert(events.end(), other.events.begin(), other.events.end());
    model_trained = model_trained || other.model_trained;
}

DeviceRuntime::DeviceRuntime(std::string device_id, const FeatureCatalog& catalog,
                             RuntimeConfig cfg, RecordStore* store)
    : device_id_(std::move(device_id)),
      catalog_(catalog),
      cfg_(cfg),
      store_(store),
      weights_(uniform_weights(catalog)),
      feature_set_(select_top_k(weights_, cfg.adapt.k, catalog)),
      deltas_(DeltaAccumulator::for_set(feature_set_)),
      assembler_(cfg.window_ms, cfg.hop_ms),
      full_layout_(WindowLayout::full(catalog)),
      buffer_(cfg.retrain.buffer_cap_per_class) {}

std::vector<std::string> DeviceRuntime::candidate_names() const {
    std::vector<std::string> names;
    for (FeatureId f : catalog_.candidates()) {
        names.push_back(catalog_.name(f));
    }
    return names;
}

PersonalFeatureSet DeviceRuntime::set_ranking(const RankingResponse& ranking) {
    weights_ = init_weights(ranking, catalog_);
    feature_set_ = select_top_k(weights_, cfg_.adapt.k, catalog_);
    feature_set_.version = 1;
    deltas_ = DeltaAccumulator::for_set(feature_set_);
    ranked_ = true;
    if (model_ && cfg_.scheme == Scheme::echoia) {
        // layout changed under a live model; retrain or flag
        if (!try_train(feature_set_)) {
            layout_pending_ = true;
        }
    }
    return feature_set_;
}

WindowLabel DeviceRuntime::window_truth(const std::vector<BehaviorSample>& samples) const {
    std::int64_t legit = 0;
    std::int64_t illegit = 0;
    for (const auto& s : samples) {
        auto it = std::lower_bound(
            recent_truth_.begin(), recent_truth_.end(), s.timestamp_ms,
            [](const auto& entry, std::int64_t ts) { return entry.first < ts; });
        if (it != recent_truth_.end() && it->first == s.timestamp_ms) {
            (it->second == WindowLabel::legitimate ? legit : illegit)++;
        }
    }
    if (legit == 0 && illegit == 0) {
        return WindowLabel::unlabeled;
    }
    return legit > illegit ? WindowLabel::legitimate : WindowLabel::illegitimate;
}

StepEffects DeviceRuntime::ingest(const BehaviorSample& sample, std::optional<WindowLabel> truth) {
    StepEffects fx;
    expire_challenge(fx, sample.timestamp_ms);
    if (truth && *truth != WindowLabel::unlabeled) {
        recent_truth_.emplace_back(sample.timestamp_ms, *truth);
    }
    auto completed = assembler_.push(sample);
    for (auto& [id, samples] : completed) {
        fx.merge(handle_window(id, std::move(samples)));
    }
    // Truth entries can only matter while a window can still contain them.
    const std::int64_t horizon = sample.timestamp_ms - 2 * cfg_.window_ms;
    while (!recent_truth_.empty() && recent_truth_.front().first < horizon) {
        recent_truth_.pop_front();
    }
    return fx;
}

StepEffects DeviceRuntime::handle_window(std::int64_t window_id,
                                         std::vector<BehaviorSample> samples) {
    StepEffects fx;
    if (samples.empty()) {
        return fx;
    }
    WindowVector full = build_window(samples, full_layout_, catalog_);
    full.window_id = window_id;
    full.label = window_truth(samples);
    if (full.label != WindowLabel::unlabeled) {
        buffer_.add(full, full.label);
    }

    if (!model_) {
        fx.bootstrap_windows.push_back(window_id);
        if (assembler_.windows_emitted() >= cfg_.hold_training_until_windows &&
            try_train(feature_set_)) {
            fx.model_trained = true;
        }
        return fx;
    }

    if (layout_pending_ && try_train(feature_set_)) {
        fx.model_trained = true;
    }

    if (session_.state != SessionPhase::unlocked) {
        return fx; // device locked or challenged: window assembled but not decided
    }

    const std::int64_t now = samples.back().timestamp_ms;
    WindowVector sub = project(full, active_layout_, active_projection_);
    AuthDecision d = decide(*model_, sub, session_, cfg_.smooth, now);
    decision_log_.push_back(d);
    fx.decisions.push_back(d);

    if (d.acted) {
        fx.lock_fired = true;
        flush_pseudo_queue(true);
        return fx;
    }

    // advance the pseudo-label guard: accepted windows graduate once n more
    // windows pass without a lock
    for (auto& [countdown, w] : pseudo_queue_) {
        --countdown;
    }
    while (!pseudo_queue_.empty() && pseudo_queue_.front().first <= 0) {
        note_accepted(pseudo_queue_.front().second, fx);
        pseudo_queue_.pop_front();
    }
    if (d.smoothed_legit && full.label == WindowLabel::unlabeled) {
        pseudo_queue_.emplace_back(cfg_.smooth.n, full);
    }
    return fx;
}

void DeviceRuntime::note_accepted(const WindowVector& full_window, StepEffects& fx) {
    buffer_.add(full_window, WindowLabel::legitimate);
    if (++accepted_since_retrain_ >= cfg_.retrain.periodic_every_accepted) {
        accepted_since_retrain_ = 0;
        if (try_train(feature_set_)) {
            fx.model_trained = true;
        }
    }
}

void DeviceRuntime::flush_pseudo_queue(bool locked) {
    if (locked) {
        pseudo_queue_.clear(); // a lock within the guard window disqualifies them
    }
}

bool DeviceRuntime::try_train(const PersonalFeatureSet& set) {
    const WindowLayout layout = cfg_.scheme == Scheme::echoia
                                    ? WindowLayout::for_set(set, catalog_)
                                    : full_layout_;
    const auto need = static_cast<std::size_t>(cfg_.retrain.min_windows_per_class);
    if (buffer_.legit_count() < need || buffer_.illegit_count() < need) {
        return false;
    }
    auto [x, y] = buffer_.assemble(layout, full_layout_);
    SvmModel m = train_svm(x, y, cfg_.svm_c, layout.version);
    model_ = std::move(m);
    active_layout_ = layout;
    active_projection_ = projection_indices(layout, full_layout_);
    layout_pending_ = false;
    if (store_ != nullptr) {
        store_->save_model(device_id_, layout.version, model_to_json(*model_));
    }
    return true;
}

StepEffects DeviceRuntime::on_password(bool correct, std::int64_t now_ms) {
    StepEffects fx;
    expire_challenge(fx, now_ms);
    FeedbackEvent ev = handle_password(session_, correct, now_ms, device_id_);
    fx.events.push_back(ev);
    if (cfg_.scheme != Scheme::echoia) {
        return fx;
    }
    record_password_event(deltas_, ev, cfg_.adapt);
    if (significant_change(deltas_, cfg_.adapt) && !session_.pending_challenge) {
        fx.challenge = issue_pin_challenge(session_, device_id_, now_ms, cfg_.adapt);
    }
    return fx;
}

StepEffects DeviceRuntime::on_pin(std::uint64_t token_id, bool correct, bool consent,
                                  std::int64_t now_ms) {
    StepEffects fx;
    if (!session_.pending_challenge) {
        throw MalformedPayload("no pending PIN challenge");
    }
    const ChallengeToken token = *session_.pending_challenge;
    if (token.id != token_id) {
        throw MalformedPayload("unknown challenge token");
    }
    const bool pin_ok = correct && now_ms <= token.expires_at_ms;

    FeedbackEvent ev;
    ev.kind = pin_ok ? FeedbackKind::pin_correct : FeedbackKind::pin_incorrect;
    ev.timestamp_ms = now_ms;
    ev.device_id = device_id_;
    fx.events.push_back(ev);

    auto result = apply_refresh(weights_, feature_set_, deltas_, pin_ok, consent, cfg_.adapt,
                                catalog_);
    resolve_pin_challenge(session_, now_ms);
    if (result) {
        weights_ = std::move(result->weights);
        feature_set_ = std::move(result->feature_set);
        fx.feature_set_update = feature_set_;
        if (!try_train(feature_set_)) {
            layout_pending_ = true; // old model keeps serving its own layout
        } else {
            fx.model_trained = true;
        }
    }
    return fx;
}

void DeviceRuntime::expire_challenge(StepEffects& fx, std::int64_t now_ms) {
    if (!session_.pending_challenge || now_ms <= session_.pending_challenge->expires_at_ms) {
        return;
    }
    FeedbackEvent ev;
    ev.kind = FeedbackKind::pin_incorrect;
    ev.timestamp_ms = session_.pending_challenge->expires_at_ms;
    ev.device_id = device_id_;
    fx.events.push_back(ev);
    apply_refresh(weights_, feature_set_, deltas_, false, false, cfg_.adapt, catalog_);
    resolve_pin_challenge(session_, now_ms);
}

} // namespace echoia
