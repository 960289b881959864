#include "echoia/corpus_io.hpp"

#include <fstream>

#include <nlohmann/json.hpp>

#include "echoia/protocol.hpp"

namespace echoia {

namespace fs = std::filesystem;

namespace {

nlohmann::json catalog_to_json(const FeatureCatalog& catalog) {
    nlohmann::json out = nlohmann::json::array();
    for (FeatureId f : catalog.all()) {
        out.push_back({{"name", catalog.name(f)},
                       {"dims", catalog.dims(f)},
                       {"reserved", catalog.is_reserved(f)}});
    }
    return out;
}

FeatureCatalog catalog_from_json(const nlohmann::json& j) {
    std::vector<FeatureCatalog::Entry> candidates;
    std::vector<FeatureCatalog::Entry> reserved;
    for (const auto& e : j) {
        FeatureCatalog::Entry entry;
        entry.name = e.at("name").get<std::string>();
        entry.dims = e.at("dims").get<int>();
        if (e.at("reserved").get<bool>()) {
            reserved.push_back(entry);
        } else {
            candidates.push_back(entry);
        }
    }
    return FeatureCatalog(std::move(candidates), std::move(reserved));
}

void write_json(const fs::path& path, const nlohmann::json& j) {
    fs::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::trunc);
    if (!out) {
        throw Error("cannot write " + path.string());
    }
    out << j.dump(2) << '\n';
}

nlohmann::json read_json(const fs::path& path) {
    std::ifstream in(path);
    if (!in) {
        throw Error("cannot read " + path.string());
    }
    return nlohmann::json::parse(in);
}

} // namespace

void write_corpus(const fs::path& dir, const Corpus& corpus) {
    nlohmann::json meta;
    meta["catalog"] = catalog_to_json(corpus.catalog);
    meta["user_ids"] = corpus.user_ids;
    write_json(dir / "meta.json", meta);

    for (const auto& dev : corpus.devices) {
        const fs::path log = dir / "devices" / dev.device_id / "records.log";
        fs::create_directories(log.parent_path());
        std::ofstream out(log, std::ios::trunc);
        if (!out) {
            throw Error("cannot write " + log.string());
        }
        for (const auto& s : dev.samples) {
            nlohmann::json entry = sample_to_json(s, corpus.catalog);
            entry["kind"] = "sample";
            out << entry.dump() << '\n';
        }

        nlohmann::json script;
        script["device_id"] = dev.device_id;
        script["owner"] = dev.owner;
        script["duration_ms"] = dev.duration_ms;
        nlohmann::json ranks = nlohmann::json::object();
        for (const auto& [f, r] : dev.ranking.ranks) {
            ranks[corpus.catalog.name(f)] = r;
        }
        script["ranking"] = std::move(ranks);
        script["segments"] = nlohmann::json::array();
        for (const auto& seg : dev.script.segments) {
            script["segments"].push_back({{"start_ms", seg.start_ms},
                                          {"end_ms", seg.end_ms},
                                          {"profile", seg.profile},
                                          {"intruder", seg.intruder}});
        }
        script["p_owner"] = dev.script.p_owner;
        script["p_intruder"] = dev.script.p_intruder;
        script["intruder_max_attempts"] = dev.script.intruder_max_attempts;
        script["password_delay_ms"] = dev.script.password_delay_ms;
        script["retry_ms"] = dev.script.retry_ms;
        script["pin_delay_ms"] = dev.script.pin_delay_ms;
        script["owner_consents"] = dev.script.owner_consents;
        write_json(dir / "scripts" / (dev.device_id + ".json"), script);
    }
}

Corpus load_corpus(const fs::path& dir) {
    if (!fs::exists(dir / "meta.json")) {
        throw Error("no corpus at " + dir.string() + " (missing meta.json)");
    }
    const auto meta = read_json(dir / "meta.json");
    Corpus corpus;
    corpus.catalog = catalog_from_json(meta.at("catalog"));
    corpus.user_ids = meta.at("user_ids").get<std::vector<std::string>>();

    std::vector<fs::path> scripts;
    for (const auto& f : fs::directory_iterator(dir / "scripts")) {
        if (f.path().extension() == ".json") {
            scripts.push_back(f.path());
        }
    }
    std::sort(scripts.begin(), scripts.end());

    for (const auto& path : scripts) {
        const auto js = read_json(path);
        DeviceCorpus dev;
        dev.device_id = js.at("device_id").get<std::string>();
        dev.owner = js.at("owner").get<int>();
        dev.duration_ms = js.at("duration_ms").get<std::int64_t>();
        for (const auto& [name, rank] : js.at("ranking").items()) {
            const auto f = corpus.catalog.find(name);
            if (!f) {
                throw Error("script references unknown feature " + name);
            }
            dev.ranking.ranks[*f] = rank.get<int>();
        }
        for (const auto& seg : js.at("segments")) {
            dev.script.segments.push_back({seg.at("start_ms").get<std::int64_t>(),
                                           seg.at("end_ms").get<std::int64_t>(),
                                           seg.at("profile").get<int>(),
                                           seg.at("intruder").get<bool>()});
        }
        dev.script.p_owner = js.at("p_owner").get<double>();
        dev.script.p_intruder = js.at("p_intruder").get<double>();
        dev.script.intruder_max_attempts = js.at("intruder_max_attempts").get<int>();
        dev.script.password_delay_ms = js.at("password_delay_ms").get<std::int64_t>();
        dev.script.retry_ms = js.at("retry_ms").get<std::int64_t>();
        dev.script.pin_delay_ms = js.at("pin_delay_ms").get<std::int64_t>();
        dev.script.owner_consents = js.at("owner_consents").get<bool>();

        const fs::path log = dir / "devices" / dev.device_id / "records.log";
        std::ifstream in(log);
        if (!in) {
            throw Error("cannot read " + log.string());
        }
        std::string line;
        while (std::getline(in, line)) {
            if (line.empty()) {
                continue;
            }
            const auto entry = nlohmann::json::parse(line);
            if (entry.value("kind", "sample") != "sample") {
                continue;
            }
            BehaviorSample s = sample_from_json(entry, corpus.catalog);
            s.device_id = dev.device_id;
            dev.samples.push_back(std::move(s));
        }
        corpus.devices.push_back(std::move(dev));
    }
    return corpus;
}

void write_truth(const fs::path& dir, const GroundTruth& truth, const FeatureCatalog& catalog) {
    nlohmann::json j;
    j["users"] = nlohmann::json::array();
    for (const auto& u : truth.users) {
        nlohmann::json ju;
        ju["user_id"] = u.user_id;
        ju["planted"] = nlohmann::json::array();
        for (FeatureId f : u.planted) {
            ju["planted"].push_back(catalog.name(f));
        }
        if (u.drift) {
            nlohmann::json jd;
            jd["onset_ms"] = u.drift->onset_ms;
            jd["sigma_boost"] = u.drift->sigma_boost;
            jd["features"] = nlohmann::json::array();
            for (FeatureId f : u.drift->features) {
                jd["features"].push_back(catalog.name(f));
            }
            ju["drift"] = std::move(jd);
        }
        j["users"].push_back(std::move(ju));
    }
    write_json(dir / "truth" / "ground_truth.json", j);
}

GroundTruth load_truth(const fs::path& dir, const FeatureCatalog& catalog) {
    const auto j = read_json(dir / "truth" / "ground_truth.json");
    GroundTruth truth;
    for (const auto& ju : j.at("users")) {
        UserTruth u;
        u.user_id = ju.at("user_id").get<std::string>();
        for (const auto& name : ju.at("planted")) {
            if (auto f = catalog.find(name.get<std::string>())) {
                u.planted.push_back(*f);
            }
        }
        if (ju.contains("drift")) {
            DriftSpec d;
            d.onset_ms = ju["drift"].at("onset_ms").get<std::int64_t>();
            d.sigma_boost = ju["drift"].at("sigma_boost").get<double>();
            for (const auto& name : ju["drift"].at("features")) {
                if (auto f = catalog.find(name.get<std::string>())) {
                    d.features.push_back(*f);
                }
            }
            u.drift = std::move(d);
        }
        truth.users.push_back(std::move(u));
    }
    return truth;
}

void write_decision_log(const fs::path& path, const SessionLog& log) {
    fs::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::trunc);
    if (!out) {
        throw Error("cannot write " + path.string());
    }
    for (const auto& d : log.decisions) {
        nlohmann::json j;
        j["t"] = d.timestamp_ms;
        j["device_id"] = log.device_id;
        j["window_id"] = d.window_id;
        j["score"] = d.score;
        j["label"] = d.label_legit ? "legitimate" : "illegitimate";
        j["smoothed"] = d.smoothed_legit ? "legitimate" : "illegitimate";
        j["locked"] = d.acted;
        out << j.dump() << '\n';
    }
}

std::vector<AuthDecision> load_decision_log(const fs::path& path) {
    std::ifstream in(path);
    if (!in) {
        throw Error("cannot read " + path.string());
    }
    std::vector<AuthDecision> out;
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty()) {
            continue;
        }
        const auto j = nlohmann::json::parse(line);
        AuthDecision d;
        d.timestamp_ms = j.at("t").get<std::int64_t>();
        d.window_id = j.at("window_id").get<std::int64_t>();
        d.score = j.at("score").get<double>();
        d.label_legit = j.at("label").get<std::string>() == "legitimate";
        d.smoothed_legit = j.at("smoothed").get<std::string>() == "legitimate";
        d.acted = j.at("locked").get<bool>();
        out.push_back(d);
    }
    return out;
}

} // namespace echoia
