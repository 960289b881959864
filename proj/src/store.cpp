#include "echoia/store.hpp"

#include <algorithm>

namespace echoia {

namespace fs = std::filesystem;

RecordStore::RecordStore(fs::path base_dir, std::vector<std::string> sensitive_fields)
    : base_dir_(std::move(base_dir)), sensitive_(std::move(sensitive_fields)) {
    fs::create_directories(base_dir_);
}

fs::path RecordStore::log_path(const std::string& device_id) const {
    return base_dir_ / device_id / "records.log";
}

RecordStore::DeviceLog& RecordStore::open(const std::string& device_id) {
    auto it = logs_.find(device_id);
    if (it != logs_.end()) {
        return it->second;
    }
    DeviceLog log;
    const fs::path path = log_path(device_id);
    fs::create_directories(path.parent_path());
    // Recover append position from an existing log.
    if (fs::exists(path)) {
        std::ifstream in(path);
        std::string line;
        while (std::getline(in, line)) {
            if (line.empty()) {
                continue;
            }
            ++log.count;
            const auto j = nlohmann::json::parse(line, nullptr, false);
            if (!j.is_discarded() && j.contains("t")) {
                log.last_ts = j["t"].get<std::int64_t>();
            }
        }
    }
    log.out.open(path, std::ios::app);
    if (!log.out) {
        throw Error("RecordStore: cannot open " + path.string());
    }
    return logs_.emplace(device_id, std::move(log)).first->second;
}

void RecordStore::check_sensitive(const nlohmann::json& entry) const {
    if (!entry.contains("readings")) {
        return;
    }
    const auto& readings = entry["readings"];
    if (!readings.is_object()) {
        return;
    }
    const auto hashed = entry.value("hashed", std::vector<std::string>{});
    for (const auto& name : sensitive_) {
        if (readings.contains(name) &&
            std::find(hashed.begin(), hashed.end(), name) == hashed.end()) {
            throw UnhashedSensitiveField("plaintext sensitive field: " + name);
        }
    }
}

std::int64_t RecordStore::persist(const std::string& device_id, const nlohmann::json& entry) {
    if (!entry.contains("t")) {
        throw Error("RecordStore: entry lacks timestamp field 't'");
    }
    check_sensitive(entry);
    const auto ts = entry["t"].get<std::int64_t>();

    std::lock_guard lock(mu_);
    DeviceLog& log = open(device_id);
    if (ts < log.last_ts) {
        throw TimestampRegression("entry predates device log tail");
    }
    log.out << entry.dump() << '\n';
    log.out.flush();
    if (!log.out) {
        throw Error("RecordStore: write failed for " + device_id);
    }
    log.last_ts = ts;
    return log.count++;
}

std::vector<nlohmann::json> RecordStore::query_range(const std::string& device_id,
                                                     std::int64_t t0, std::int64_t t1) const {
    const fs::path path = log_path(device_id);
    if (!fs::exists(path)) {
        throw UnknownDevice("no records for device " + device_id);
    }
    std::vector<nlohmann::json> out;
    std::ifstream in(path);
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty()) {
            continue;
        }
        auto j = nlohmann::json::parse(line);
        const auto ts = j.at("t").get<std::int64_t>();
        if (ts >= t0 && ts <= t1) {
            out.push_back(std::move(j));
        }
    }
    return out;
}

std::vector<std::string> RecordStore::devices() const {
    std::vector<std::string> out;
    if (!fs::exists(base_dir_)) {
        return out;
    }
    for (const auto& dir : fs::directory_iterator(base_dir_)) {
        if (dir.is_directory() && fs::exists(dir.path() / "records.log")) {
            out.push_back(dir.path().filename().string());
        }
    }
    std::sort(out.begin(), out.end());
    return out;
}

void RecordStore::save_model(const std::string& device_id, std::uint64_t version,
                             const std::string& json_doc) {
    const fs::path dir = base_dir_ / device_id;
    fs::create_directories(dir);
    const fs::path path = dir / ("model.v" + std::to_string(version));
    std::ofstream out(path, std::ios::trunc);
    out << json_doc << '\n';
    if (!out) {
        throw Error("RecordStore: cannot write " + path.string());
    }
}

std::string RecordStore::load_model(const std::string& device_id, std::uint64_t version) const {
    const fs::path path = base_dir_ / device_id / ("model.v" + std::to_string(version));
    std::ifstream in(path);
    if (!in) {
        throw UnknownDevice("no model snapshot " + path.string());
    }
    std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    return text;
}

} // namespace echoia
