#include "echoia/config.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <functional>
#include <sstream>

namespace echoia {

namespace {

std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) {
        return {};
    }
    const auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

bool parse_bool(const std::string& v, const std::string& key) {
    if (v == "true" || v == "1" || v == "yes") {
        return true;
    }
    if (v == "false" || v == "0" || v == "no") {
        return false;
    }
    throw ConfigError("bad boolean for " + key + ": " + v);
}

double parse_double(const std::string& v, const std::string& key) {
    try {
        std::size_t used = 0;
        const double d = std::stod(v, &used);
        if (used != v.size()) {
            throw std::invalid_argument(v);
        }
        return d;
    } catch (const std::exception&) {
        throw ConfigError("bad number for " + key + ": " + v);
    }
}

std::int64_t parse_int(const std::string& v, const std::string& key) {
    try {
        std::size_t used = 0;
        const long long i = std::stoll(v, &used);
        if (used != v.size()) {
            throw std::invalid_argument(v);
        }
        return i;
    } catch (const std::exception&) {
        throw ConfigError("bad integer for " + key + ": " + v);
    }
}

std::vector<double> parse_list(const std::string& v, const std::string& key) {
    std::vector<double> out;
    std::stringstream ss(v);
    std::string item;
    while (std::getline(ss, item, ',')) {
        item = trim(item);
        if (!item.empty()) {
            out.push_back(parse_double(item, key));
        }
    }
    if (out.empty()) {
        throw ConfigError("empty list for " + key);
    }
    return out;
}

std::string join(const std::vector<double>& xs) {
    std::ostringstream ss;
    for (std::size_t i = 0; i < xs.size(); ++i) {
        if (i > 0) {
            ss << ',';
        }
        ss << xs[i];
    }
    return ss.str();
}

struct Key {
    const char* name;
    const char* doc;
    std::function<void(ExperimentConfig&, const std::string&)> set;
    std::function<std::string(const ExperimentConfig&)> get;
};

#define KEY_NUM(field, doc)                                                                   \
    Key {                                                                                     \
        #field, doc,                                                                          \
            [](ExperimentConfig& c, const std::string& v) {                                   \
                c.field = static_cast<decltype(c.field)>(parse_double(v, #field));            \
            },                                                                                \
            [](const ExperimentConfig& c) {                                                   \
                std::ostringstream ss;                                                        \
                ss << c.field;                                                                \
                return ss.str();                                                              \
            }                                                                                 \
    }
#define KEY_INT(field, doc)                                                                   \
    Key {                                                                                     \
        #field, doc,                                                                          \
            [](ExperimentConfig& c, const std::string& v) {                                   \
                c.field = static_cast<decltype(c.field)>(parse_int(v, #field));               \
            },                                                                                \
            [](const ExperimentConfig& c) { return std::to_string(c.field); }                 \
    }
#define KEY_BOOL(field, doc)                                                                  \
    Key {                                                                                     \
        #field, doc,                                                                          \
            [](ExperimentConfig& c, const std::string& v) {                                   \
                c.field = parse_bool(v, #field);                                              \
            },                                                                                \
            [](const ExperimentConfig& c) { return c.field ? "true" : "false"; }              \
    }
#define KEY_STR(field, doc)                                                                   \
    Key {                                                                                     \
        #field, doc, [](ExperimentConfig& c, const std::string& v) { c.field = v; },          \
            [](const ExperimentConfig& c) { return c.field; }                                 \
    }
#define KEY_LIST(field, doc)                                                                  \
    Key {                                                                                     \
        #field, doc,                                                                          \
            [](ExperimentConfig& c, const std::string& v) {                                   \
                c.field = parse_list(v, #field);                                              \
            },                                                                                \
            [](const ExperimentConfig& c) { return join(c.field); }                           \
    }

const std::vector<Key>& key_table() {
    static const std::vector<Key> keys = {
        KEY_INT(seed, "corpus RNG seed"),
        KEY_INT(users, "number of simulated users/devices"),
        KEY_NUM(duration_minutes, "timeline length per device"),
        KEY_INT(sample_period_ms, "sensor sampling period"),
        KEY_NUM(separation, "planted-feature mean offset in stds"),
        KEY_NUM(nonplanted_ratio, "non-planted offset as a fraction of separation"),
        KEY_NUM(reserved_ratio, "reserved-feature offset as a fraction of separation"),
        KEY_NUM(level_noise, "slow activity-level noise magnitude"),
        KEY_INT(level_corr_ms, "activity-level correlation time"),
        KEY_INT(k, "personal top-set size"),
        KEY_INT(ranking_swaps, "adjacent swaps applied to the true ranking"),
        KEY_NUM(intruder_fraction, "fraction of usage time held by intruders"),
        KEY_INT(intruder_segments, "number of intruder segments"),
        KEY_NUM(p_owner, "owner password success probability"),
        KEY_NUM(p_intruder, "intruder password success probability"),
        KEY_INT(intruder_max_attempts, "password attempts before an intruder gives up"),
        KEY_BOOL(owner_consents, "owner consents to feature-set changes"),
        KEY_BOOL(drift, "inject behavioral drift"),
        KEY_NUM(drift_onset_frac, "drift onset as a fraction of the timeline"),
        KEY_INT(drift_features, "number of drifting features"),
        KEY_BOOL(drift_on_planted, "drift planted features instead of non-planted"),
        KEY_NUM(drift_sigma_boost, "noise inflation on drifted features"),
        KEY_BOOL(plant_sensitive, "allow hashed-sensitive features in planted sets"),
        KEY_NUM(delta, "confidence-loss threshold triggering a PIN challenge"),
        KEY_NUM(eta_incorrect, "delta increment per incorrect password"),
        KEY_NUM(eta_correct, "delta increment per correct password"),
        KEY_NUM(weight_floor, "minimum feature weight after a refresh"),
        KEY_INT(challenge_timeout_ms, "PIN challenge expiry"),
        KEY_INT(smooth_m, "lock when m of the last n windows are illegitimate"),
        KEY_INT(smooth_n, "smoothing horizon in windows"),
        KEY_INT(window_ms, "aggregation window length"),
        KEY_INT(hop_ms, "window hop"),
        KEY_NUM(svm_c, "SVM regularization C"),
        KEY_INT(min_windows_per_class, "minimum training windows per class"),
        KEY_INT(retrain_every_accepted, "periodic retrain cadence in accepted windows"),
        KEY_INT(buffer_cap_per_class, "training buffer cap per class"),
        KEY_INT(parts, "timeline parts for the evaluation curve"),
        KEY_NUM(train_prefix, "training prefix fraction"),
        KEY_BOOL(cv, "select (C, delta) by cross-validation on the prefix"),
        KEY_INT(folds, "cross-validation folds"),
        KEY_LIST(grid_c, "cross-validation C grid"),
        KEY_LIST(grid_delta, "cross-validation delta grid"),
        KEY_STR(scheme, "echoia | fixed_all_features | both"),
        KEY_STR(corpus_dir, "corpus directory"),
        KEY_STR(out_dir, "report output directory"),
        KEY_STR(data_dir, "service store directory"),
        KEY_INT(port, "service listen port"),
    };
    return keys;
}

#undef KEY_NUM
#undef KEY_INT
#undef KEY_BOOL
#undef KEY_STR
#undef KEY_LIST

} // namespace

void apply_override(ExperimentConfig& cfg, const std::string& key, const std::string& value) {
    for (const auto& k : key_table()) {
        if (key == k.name) {
            k.set(cfg, value);
            return;
        }
    }
    throw ConfigError("unknown config key: " + key);
}

ExperimentConfig parse_config_text(const std::string& text) {
    ExperimentConfig cfg;
    std::istringstream in(text);
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (const auto hash = line.find('#'); hash != std::string::npos) {
            line = line.substr(0, hash);
        }
        line = trim(line);
        if (line.empty()) {
            continue;
        }
        const auto eq = line.find('=');
        if (eq == std::string::npos) {
            throw ConfigError("line " + std::to_string(lineno) + ": expected key = value");
        }
        const std::string key = trim(line.substr(0, eq));
        const std::string value = trim(line.substr(eq + 1));
        try {
            apply_override(cfg, key, value);
        } catch (const ConfigError& e) {
            throw ConfigError("line " + std::to_string(lineno) + ": " + e.what());
        }
    }
    return cfg;
}

ExperimentConfig load_config(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) {
        throw ConfigError("cannot read config file " + path.string());
    }
    std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    return parse_config_text(text);
}

std::string serialize_config(const ExperimentConfig& cfg) {
    std::ostringstream out;
    for (const auto& k : key_table()) {
        out << k.name << " = " << k.get(cfg) << "  # " << k.doc << '\n';
    }
    return out.str();
}

GenConfig ExperimentConfig::gen_config() const {
    GenConfig g;
    g.seed = seed;
    g.n_users = users;
    g.duration_ms = static_cast<std::int64_t>(duration_minutes * 60'000.0);
    g.sample_period_ms = sample_period_ms;
    g.separation = separation;
    g.nonplanted_ratio = nonplanted_ratio;
    g.reserved_ratio = reserved_ratio;
    g.level_noise = level_noise;
    g.level_corr_ms = level_corr_ms;
    g.k = k;
    g.ranking_swaps = ranking_swaps;
    g.intruder_fraction = intruder_fraction;
    g.intruder_segments = intruder_segments;
    g.p_owner = p_owner;
    g.p_intruder = p_intruder;
    g.intruder_max_attempts = intruder_max_attempts;
    g.owner_consents = owner_consents;
    g.drift = drift;
    g.drift_onset_frac = drift_onset_frac;
    g.drift_features = drift_features;
    g.drift_on_planted = drift_on_planted;
    g.drift_sigma_boost = drift_sigma_boost;
    g.plant_sensitive = plant_sensitive;
    return g;
}

RuntimeConfig ExperimentConfig::runtime_config(Scheme s) const {
    RuntimeConfig rc;
    rc.scheme = s;
    rc.adapt.delta_threshold = delta;
    rc.adapt.eta_incorrect = eta_incorrect;
    rc.adapt.eta_correct = eta_correct;
    rc.adapt.weight_floor = weight_floor;
    rc.adapt.k = k;
    rc.adapt.challenge_timeout_ms = challenge_timeout_ms;
    rc.smooth.m = smooth_m;
    rc.smooth.n = smooth_n;
    rc.retrain.min_windows_per_class = min_windows_per_class;
    rc.retrain.periodic_every_accepted = retrain_every_accepted;
    rc.retrain.buffer_cap_per_class = static_cast<std::size_t>(buffer_cap_per_class);
    rc.window_ms = window_ms;
    rc.hop_ms = hop_ms;
    rc.svm_c = svm_c;
    return rc;
}

EvalConfig ExperimentConfig::eval_config(Scheme s) const {
    EvalConfig ec;
    ec.runtime = runtime_config(s);
    ec.parts = parts;
    ec.train_prefix = train_prefix;
    ec.driver_seed = seed + 1;
    ec.cv = cv;
    ec.folds = folds;
    ec.grid.clear();
    for (double c : grid_c) {
        for (double d : grid_delta) {
            ec.grid.push_back({c, d});
        }
    }
    return ec;
}

std::vector<Scheme> ExperimentConfig::schemes() const {
    if (scheme == "both") {
        return {Scheme::echoia, Scheme::fixed_all_features};
    }
    const auto s = scheme_from_string(scheme);
    if (!s) {
        throw ConfigError("unknown scheme: " + scheme);
    }
    return {*s};
}

} // namespace echoia
