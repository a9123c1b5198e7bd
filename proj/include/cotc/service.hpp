#pragma once
// Application config, session service and the /v1 HTTP surface.

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <shared_mutex>
#include <string>

#include "cotc/engine.hpp"
#include "cotc/harness.hpp"
#include "cotc/kb.hpp"
#include "cotc/router.hpp"

namespace httplib {
class Server;
}

namespace cotc::service {

struct ServerSettings {
    std::string host = "127.0.0.1";
    int port = 8080;
};

struct AppConfig {
    std::filesystem::path kb_path;
    ConsultationConfig consultation;
    router::RouterConfig router;
    ServerSettings server;
    std::uint64_t seed = 0;  // copied into the router config
    std::filesystem::path journal_path;  // empty: no journal
    std::string tsa_query = "is the trend stable?";
};

// Relative paths resolve against `base_dir`. Unknown keys are rejected.
AppConfig app_config_from_json(const json& j, const std::filesystem::path& base_dir = {});
json to_json(const AppConfig& c);
AppConfig load_app_config(const std::filesystem::path& path);

// COTC_CONFIG, when set, wins over the command-line path.
std::optional<std::filesystem::path> resolve_config_path(const std::optional<std::filesystem::path>& cli_path);

std::string config_hash(const AppConfig& c);
harness::BenchmarkConfig benchmark_config(const AppConfig& c);

// Error with an HTTP status attached.
class ServiceError : public std::runtime_error {
public:
    ServiceError(int status, const std::string& what) : std::runtime_error(what), status_(status) {}
    int status() const { return status_; }

private:
    int status_;
};

// In-memory sessions with an optional append-only JSONL journal. Safe for
// concurrent use; each session is stepped under its own lock.
class SessionService {
public:
    SessionService(KnowledgeBase kb, AppConfig config);

    json health() const;
    // Body: a patient record, or {"patient": record}. Returns the session view.
    json create_session(const json& body);
    // Body: {"answers": [...]} or {"text": "..."}, optional "round".
    json submit_answer(const std::string& id, const json& body);
    json get_session(const std::string& id) const;
    json get_trace(const std::string& id) const;

    // Replays the journal (if configured and present). Returns the number of
    // sessions restored.
    std::size_t replay_journal();

    const std::string& hash() const { return hash_; }
    std::size_t session_count() const;

private:
    struct Entry {
        mutable std::mutex mutex;
        ConsultationState state;
    };

    std::shared_ptr<Entry> find(const std::string& id) const;
    json view(const std::string& id, const ConsultationState& state) const;
    std::string create_from_record(const harness::PatientRecord& record, std::optional<std::string> id);
    void apply_answer(Entry& entry, const Answer& answer, std::optional<std::size_t> round);
    void journal(const json& line);

    KnowledgeBase kb_;
    AppConfig config_;
    harness::BenchmarkConfig bench_;
    std::string hash_;
    std::string kb_fingerprint_;

    mutable std::shared_mutex sessions_mutex_;
    std::map<std::string, std::shared_ptr<Entry>> sessions_;
    std::uint64_t next_id_ = 1;

    std::mutex journal_mutex_;
    std::ofstream journal_;
    bool replaying_ = false;
};

// Routes the /v1 endpoints onto `server`.
void install_routes(httplib::Server& server, SessionService& service);

// Blocks until stopped. Returns false when the address cannot be bound.
bool serve(SessionService& service, const std::string& host, int port);

}  // namespace cotc::service
