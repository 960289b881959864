#pragma once

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <mutex>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "echoia/errors.hpp"

namespace echoia {

/// Append-only per-device record store, one JSON document per line under
/// <base_dir>/<device_id>/records.log. Timestamps must be nondecreasing per
/// device; sensitive readings must arrive hashed. Appends are flushed before
/// being acknowledged, so a reopened store serves every acknowledged entry.
class RecordStore {
public:
    explicit RecordStore(std::filesystem::path base_dir,
                         std::vector<std::string> sensitive_fields = {"gps", "wifi_status",
                                                                      "microphone"});

    /// Appends one entry; returns its zero-based position in the device log.
    /// Throws TimestampRegression and UnhashedSensitiveField.
    std::int64_t persist(const std::string& device_id, const nlohmann::json& entry);

    /// Entries with t0 <= timestamp <= t1 in append order. Throws UnknownDevice.
    std::vector<nlohmann::json> query_range(const std::string& device_id, std::int64_t t0,
                                            std::int64_t t1) const;

    std::vector<std::string> devices() const;

    void save_model(const std::string& device_id, std::uint64_t version,
                    const std::string& json_doc);
    std::string load_model(const std::string& device_id, std::uint64_t version) const;

    const std::filesystem::path& base_dir() const { return base_dir_; }

private:
    struct DeviceLog {
        std::ofstream out;
        std::int64_t last_ts = std::numeric_limits<std::int64_t>::min();
        std::int64_t count = 0;
    };

    DeviceLog& open(const std::string& device_id);
    std::filesystem::path log_path(const std::string& device_id) const;
    void check_sensitive(const nlohmann::json& entry) const;

    std::filesystem::path base_dir_;
    std::vector<std::string> sensitive_;
    mutable std::mutex mu_;
    std::map<std::string, DeviceLog> logs_;
};

} // namespace echoia
