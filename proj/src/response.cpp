#include "psyphy/response.hpp"

#include <fstream>
#include <istream>
#include <ostream>

#include "psyphy/error.hpp"

namespace psyphy {

ResponseRecord make_record(const Trial& trial, const std::string& session_id,
                           std::size_t participant_slot, ConditionId condition, Choice choice,
                           double rt_ms, Modality modality, std::int64_t client_ts,
                           std::int64_t server_ts) {
    ResponseRecord r;
    r.session_id = session_id;
    r.participant_slot = participant_slot;
    r.trial_id = trial.trial_id;
    r.choice = choice;
    r.correct = choice == trial.ground_truth;
    r.rt_ms = rt_ms;
    r.modality = modality;
    r.client_ts = client_ts;
    r.server_ts = server_ts;
    r.stim_a = trial.stim_a;
    r.stim_b = trial.stim_b;
    r.level = trial.level();
    r.condition = condition;
    return r;
}

nlohmann::json to_json(const ResponseRecord& r) {
    return {
        {"schema_version", kSchemaVersion},
        {"session_id", r.session_id},
        {"participant_slot", r.participant_slot},
        {"trial_id", r.trial_id},
        {"choice", to_string(r.choice)},
        {"correct", r.correct},
        {"rt_ms", r.rt_ms},
        {"modality", to_string(r.modality)},
        {"client_ts", r.client_ts},
        {"server_ts", r.server_ts},
        {"stim_a", r.stim_a},
        {"stim_b", r.stim_b},
        {"level", r.level},
        {"condition", to_string(r.condition)},
    };
}

ResponseRecord record_from_json(const nlohmann::json& j) {
    ResponseRecord r;
    r.session_id = j.at("session_id").get<std::string>();
    r.participant_slot = j.at("participant_slot").get<std::size_t>();
    r.trial_id = j.at("trial_id").get<std::uint64_t>();
    r.choice = choice_from_string(j.at("choice").get<std::string>());
    r.correct = j.at("correct").get<bool>();
    r.rt_ms = j.at("rt_ms").get<double>();
    r.modality = modality_from_string(j.at("modality").get<std::string>());
    r.client_ts = j.at("client_ts").get<std::int64_t>();
    r.server_ts = j.at("server_ts").get<std::int64_t>();
    r.stim_a = j.at("stim_a").get<std::string>();
    r.stim_b = j.at("stim_b").get<std::string>();
    r.level = j.at("level").get<int>();
    r.condition = condition_id_from_string(j.at("condition").get<std::string>());
    if (!(r.rt_ms > 0.0)) fail(ErrorCode::invalid_measurement, "record with non-positive rt_ms");
    return r;
}

std::string to_jsonl_line(const ResponseRecord& r) { return to_json(r).dump() + '\n'; }

void write_log(std::ostream& os, const ResponseLog& log) {
    for (const auto& r : log) os << to_jsonl_line(r);
}

void write_log(const std::filesystem::path& path, const ResponseLog& log) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) fail(ErrorCode::io_error, "cannot write " + path.string());
    write_log(out, log);
}

ResponseLog read_log(std::istream& is) {
    ResponseLog log;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(is, line)) {
        ++lineno;
        if (line.empty()) continue;
        try {
            log.push_back(record_from_json(nlohmann::json::parse(line)));
        } catch (const nlohmann::json::exception& e) {
            fail(ErrorCode::invalid_input, "response log line " + std::to_string(lineno) + ": " + e.what());
        }
    }
    return log;
}

ResponseLog read_log(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) fail(ErrorCode::io_error, "cannot open " + path.string());
    return read_log(in);
}

}  // namespace psyphy
