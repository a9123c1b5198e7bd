#include "cotc/service.hpp"

#include <algorithm>
#include <cstdlib>

#include "httplib.h"

namespace cotc::service {

namespace fs = std::filesystem;

namespace {

void reject_unknown(const json& j, std::initializer_list<const char*> allowed, const std::string& where) {
    if (!j.is_object()) throw ValidationError(where + " must be an object");
    for (const auto& [k, _] : j.items()) {
        if (std::none_of(allowed.begin(), allowed.end(), [&](const char* a) { return k == a; }))
            throw ValidationError("unknown key '" + k + "' in " + where);
    }
}

fs::path resolve(const fs::path& p, const fs::path& base) {
    if (p.empty() || p.is_absolute() || base.empty()) return p;
    return base / p;
}

}  // namespace

AppConfig app_config_from_json(const json& j, const fs::path& base_dir) {
    reject_unknown(j, {"kb_path", "consultation", "router", "server", "seed", "journal_path", "tsa_query"}, "config");
    AppConfig c;
    try {
        c.kb_path = resolve(j.at("kb_path").get<std::string>(), base_dir);
        if (j.contains("consultation")) c.consultation = consultation_config_from_json(j.at("consultation"));
        if (j.contains("router")) c.router = router::router_config_from_json(j.at("router"));
        if (j.contains("server")) {
            const auto& s = j.at("server");
            reject_unknown(s, {"host", "port"}, "config.server");
            c.server.host = s.value("host", c.server.host);
            c.server.port = s.value("port", c.server.port);
        }
        c.seed = j.value("seed", c.seed);
        if (j.contains("journal_path")) c.journal_path = resolve(j.at("journal_path").get<std::string>(), base_dir);
        c.tsa_query = j.value("tsa_query", c.tsa_query);
    } catch (const json::exception& e) {
        throw ValidationError(std::string("config: ") + e.what());
    }
    if (c.server.port < 0 || c.server.port > 65535) throw ValidationError("config.server.port out of range");
    c.router.seed = c.seed;
    c.consultation.validate();
    return c;
}

json to_json(const AppConfig& c) {
    return {{"kb_path", c.kb_path.string()},
            {"consultation", to_json(c.consultation)},
            {"router", router::to_json(c.router)},
            {"server", {{"host", c.server.host}, {"port", c.server.port}}},
            {"seed", c.seed},
            {"journal_path", c.journal_path.string()},
            {"tsa_query", c.tsa_query}};
}

AppConfig load_app_config(const fs::path& path) {
    std::ifstream in(path);
    if (!in) throw ValidationError("cannot open config " + path.string());
    json j;
    try {
        j = json::parse(in);
    } catch (const json::parse_error& e) {
        throw ValidationError(path.string() + ": " + e.what());
    }
    return app_config_from_json(j, path.parent_path());
}

std::optional<fs::path> resolve_config_path(const std::optional<fs::path>& cli_path) {
    if (const char* env = std::getenv("COTC_CONFIG"); env != nullptr && *env != '\0') return fs::path(env);
    return cli_path;
}

std::string config_hash(const AppConfig& c) {
    json j = to_json(c);
    // deployment details do not change results
    j.erase("server");
    j.erase("journal_path");
    return fnv1a_hex(j.dump());
}

harness::BenchmarkConfig benchmark_config(const AppConfig& c) {
    harness::BenchmarkConfig b;
    b.consultation = c.consultation;
    b.router = c.router;
    b.tsa_query = c.tsa_query;
    return b;
}

// ---- sessions -------------------------------------------------------------

SessionService::SessionService(KnowledgeBase kb, AppConfig config)
    : kb_(std::move(kb)), config_(std::move(config)), bench_(benchmark_config(config_)), hash_(config_hash(config_)),
      kb_fingerprint_(kb_fingerprint(kb_)) {
    if (config_.consultation.tau_h_auto)
        throw ValidationError("the service needs a numeric tau_h; run calibration first");
}

json SessionService::health() const {
    return {{"status", "ok"},
            {"kb_fingerprint", kb_fingerprint_},
            {"config_hash", hash_},
            {"sessions", session_count()}};
}

std::size_t SessionService::session_count() const {
    std::shared_lock lock(sessions_mutex_);
    return sessions_.size();
}

std::shared_ptr<SessionService::Entry> SessionService::find(const std::string& id) const {
    std::shared_lock lock(sessions_mutex_);
    const auto it = sessions_.find(id);
    if (it == sessions_.end()) throw ServiceError(404, "unknown session '" + id + "'");
    return it->second;
}

json SessionService::view(const std::string& id, const ConsultationState& state) const {
    json out = to_json(state);
    out["session_id"] = id;
    out["config_hash"] = hash_;
    return out;
}

void SessionService::journal(const json& line) {
    if (replaying_ || config_.journal_path.empty()) return;
    std::lock_guard lock(journal_mutex_);
    if (!journal_.is_open()) {
        journal_.open(config_.journal_path, std::ios::app);
        if (!journal_) throw ServiceError(500, "cannot open journal " + config_.journal_path.string());
    }
    journal_ << line.dump() << '\n';
    journal_.flush();
}

std::string SessionService::create_from_record(const harness::PatientRecord& record, std::optional<std::string> id) {
    ConsultationState state;
    try {
        state = start_session(kb_, harness::initial_evidence(record), harness::record_predicates(record, bench_),
                              config_.consultation);
    } catch (const ValidationError& e) {
        throw ServiceError(422, e.what());
    }
    auto entry = std::make_shared<Entry>();
    entry->state = std::move(state);
    std::unique_lock lock(sessions_mutex_);
    if (!id) {
        std::string num = std::to_string(next_id_++);
        id = "s" + std::string(num.size() < 6 ? 6 - num.size() : 0, '0') + num;
    } else {
        // keep the counter ahead of replayed ids
        if (id->size() > 1 && (*id)[0] == 's') {
            try {
                next_id_ = std::max<std::uint64_t>(next_id_, std::stoull(id->substr(1)) + 1);
            } catch (const std::exception&) {
            }
        }
    }
    sessions_[*id] = std::move(entry);
    return *id;
}

json SessionService::create_session(const json& body) {
    harness::PatientRecord record;
    try {
        const json& rec = body.is_object() && body.contains("patient") ? body.at("patient") : body;
        if (body.is_object() && body.contains("patient")) reject_unknown(body, {"patient"}, "session request");
        record = harness::record_from_json(rec);
    } catch (const ValidationError& e) {
        throw ServiceError(422, e.what());
    }
    const std::string id = create_from_record(record, std::nullopt);
    journal({{"op", "create"}, {"session_id", id}, {"patient", harness::to_json(record)}});
    const auto entry = find(id);
    std::lock_guard lock(entry->mutex);
    return view(id, entry->state);
}

void SessionService::apply_answer(Entry& entry, const Answer& answer, std::optional<std::size_t> round) {
    const auto& state = entry.state;
    if (state.terminal) throw ServiceError(409, "session already terminated");
    if (round && *round != state.round)
        throw ServiceError(409, "answer is for round " + std::to_string(*round) + " but the session is at round " +
                                    std::to_string(state.round));
    try {
        entry.state = step(kb_, state, answer, config_.consultation);
    } catch (const AnswerRejected& e) {
        throw ServiceError(e.stale() ? 409 : 422, e.what());
    } catch (const SessionTerminated& e) {
        throw ServiceError(409, e.what());
    } catch (const ValidationError& e) {
        throw ServiceError(422, e.what());
    }
}

json SessionService::submit_answer(const std::string& id, const json& body) {
    const auto entry = find(id);
    Answer answer;
    std::optional<std::size_t> round;
    try {
        answer = answer_from_json(body);
        if (body.contains("round")) {
            if (!body.at("round").is_number_unsigned()) throw ValidationError("round must be a non-negative integer");
            round = body.at("round").get<std::size_t>();
        }
    } catch (const ValidationError& e) {
        throw ServiceError(422, e.what());
    }
    std::lock_guard lock(entry->mutex);
    const std::size_t before = entry->state.round;
    apply_answer(*entry, answer, round);
    journal({{"op", "answer"}, {"session_id", id}, {"round", before}, {"answer", to_json(answer)}});
    return view(id, entry->state);
}

json SessionService::get_session(const std::string& id) const {
    const auto entry = find(id);
    std::lock_guard lock(entry->mutex);
    return view(id, entry->state);
}

json SessionService::get_trace(const std::string& id) const {
    const auto entry = find(id);
    std::lock_guard lock(entry->mutex);
    return export_trace(entry->state);
}

std::size_t SessionService::replay_journal() {
    if (config_.journal_path.empty() || !fs::exists(config_.journal_path)) return 0;
    std::ifstream in(config_.journal_path);
    std::string line;
    std::size_t restored = 0, lineno = 0;
    replaying_ = true;
    try {
        while (std::getline(in, line)) {
            ++lineno;
            if (line.empty()) continue;
            const json j = json::parse(line);
            const std::string op = j.at("op").get<std::string>();
            const std::string id = j.at("session_id").get<std::string>();
            if (op == "create") {
                create_from_record(harness::record_from_json(j.at("patient")), id);
                ++restored;
            } else if (op == "answer") {
                const auto entry = find(id);
                std::lock_guard lock(entry->mutex);
                apply_answer(*entry, answer_from_json(j.at("answer")), j.at("round").get<std::size_t>());
            } else {
                throw ValidationError("unknown journal op '" + op + "'");
            }
        }
    } catch (const std::exception& e) {
        replaying_ = false;
        throw ValidationError("journal line " + std::to_string(lineno) + ": " + e.what());
    }
    replaying_ = false;
    return restored;
}

// ---- HTTP -----------------------------------------------------------------

namespace {

void send_json(httplib::Response& res, int status, const json& body, const std::string& hash) {
    res.status = status;
    res.set_header("X-Config-Hash", hash);
    res.set_content(body.dump(), "application/json");
}

template <typename Fn>
void guarded(httplib::Response& res, const SessionService& svc, Fn&& fn) {
    try {
        fn();
    } catch (const ServiceError& e) {
        send_json(res, e.status(), {{"error", e.what()}, {"config_hash", svc.hash()}}, svc.hash());
    } catch (const ValidationError& e) {
        send_json(res, 422, {{"error", e.what()}, {"config_hash", svc.hash()}}, svc.hash());
    } catch (const std::exception& e) {
        send_json(res, 500, {{"error", e.what()}, {"config_hash", svc.hash()}}, svc.hash());
    }
}

json parse_body(const httplib::Request& req) {
    try {
        return json::parse(req.body);
    } catch (const json::parse_error& e) {
        throw ServiceError(400, std::string("malformed JSON: ") + e.what());
    }
}

}  // namespace

void install_routes(httplib::Server& server, SessionService& svc) {
    server.Get("/v1/health", [&svc](const httplib::Request&, httplib::Response& res) {
        guarded(res, svc, [&] { send_json(res, 200, svc.health(), svc.hash()); });
    });
    server.Post("/v1/sessions", [&svc](const httplib::Request& req, httplib::Response& res) {
        guarded(res, svc, [&] { send_json(res, 201, svc.create_session(parse_body(req)), svc.hash()); });
    });
    server.Post(R"(/v1/sessions/([A-Za-z0-9_-]+)/answers)", [&svc](const httplib::Request& req, httplib::Response& res) {
        guarded(res, svc, [&] { send_json(res, 200, svc.submit_answer(req.matches[1], parse_body(req)), svc.hash()); });
    });
    server.Get(R"(/v1/sessions/([A-Za-z0-9_-]+)/trace)", [&svc](const httplib::Request& req, httplib::Response& res) {
        guarded(res, svc, [&] { send_json(res, 200, svc.get_trace(req.matches[1]), svc.hash()); });
    });
    server.Get(R"(/v1/sessions/([A-Za-z0-9_-]+))", [&svc](const httplib::Request& req, httplib::Response& res) {
        guarded(res, svc, [&] { send_json(res, 200, svc.get_session(req.matches[1]), svc.hash()); });
    });
}

bool serve(SessionService& service, const std::string& host, int port) {
    httplib::Server server;
    install_routes(server, service);
    return server.listen(host, port);
}

}  // namespace cotc::service
