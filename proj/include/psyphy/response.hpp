#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "psyphy/trials.hpp"

namespace psyphy {

// One participant response. The stimulus pair, level, and condition are
// copied from the trial at write time so a log can be aggregated without the
// plan it came from.
struct ResponseRecord {
    std::string session_id;
    std::size_t participant_slot = 0;
    std::uint64_t trial_id = 0;
    Choice choice = Choice::same;
    bool correct = false;
    double rt_ms = 0.0;
    Modality modality = Modality::keypress;
    std::int64_t client_ts = 0;  // ms since epoch
    std::int64_t server_ts = 0;  // ms since epoch, audit only

    std::string stim_a;
    std::string stim_b;
    int level = 0;
    ConditionId condition = ConditionId::control;

    friend bool operator==(const ResponseRecord&, const ResponseRecord&) = default;
};

using ResponseLog = std::vector<ResponseRecord>;

ResponseRecord make_record(const Trial& trial, const std::string& session_id,
                           std::size_t participant_slot, ConditionId condition, Choice choice,
                           double rt_ms, Modality modality, std::int64_t client_ts,
                           std::int64_t server_ts);

nlohmann::json to_json(const ResponseRecord& r);
ResponseRecord record_from_json(const nlohmann::json& j);

// Single-line JSON, newline-terminated.
std::string to_jsonl_line(const ResponseRecord& r);

void write_log(std::ostream& os, const ResponseLog& log);
void write_log(const std::filesystem::path& path, const ResponseLog& log);
ResponseLog read_log(std::istream& is);
ResponseLog read_log(const std::filesystem::path& path);

}  // namespace psyphy
