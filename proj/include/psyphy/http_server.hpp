#pragma once

#include <cstdint>
#include <map>
#include <memory>
#include <mutex>
#include <string>
#include <vector>

#include "psyphy/dataset.hpp"
#include "psyphy/error.hpp"
#include "psyphy/service.hpp"

namespace httplib {
class Server;
}

namespace psyphy {

// Renders and caches perturbed stimuli as PNG bytes.
class StimulusStore {
public:
    StimulusStore(DatasetManifest manifest, PerturbationSchedule schedule);

    // Throws not_found for unknown images.
    std::shared_ptr<const std::vector<std::uint8_t>> png(const std::string& stimulus_id);

private:
    DatasetManifest manifest_;
    PerturbationSchedule schedule_;
    std::map<std::string, std::shared_ptr<const std::vector<std::uint8_t>>> cache_;
    std::mutex mutex_;
};

int http_status_for(ErrorCode code);

// HTTP+JSON front end over ExperimentService:
//   POST /experiments/{id}/sessions
//   GET  /sessions/{sid}/trial
//   POST /sessions/{sid}/responses
//   GET  /experiments/{id}/responses      (application/x-ndjson)
//   GET  /stimuli/{stimulus_id}           (image/png, immutable)
class HttpServer {
public:
    HttpServer(ExperimentService& service, StimulusStore* stimuli);
    ~HttpServer();

    HttpServer(const HttpServer&) = delete;
    HttpServer& operator=(const HttpServer&) = delete;

    // Serves a static client bundle (e.g. the browser task UI) under /ui/.
    void mount_static(const std::string& dir);

    // Binds and returns the port (pass 0 for an ephemeral port).
    int bind(const std::string& host, int port);
    // Blocks until stop().
    void listen();
    void stop();
    bool is_running() const;

private:
    void install_routes();

    ExperimentService& service_;
    StimulusStore* stimuli_;
    std::unique_ptr<httplib::Server> server_;
};

}  // namespace psyphy
