#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <thread>

#include "cotc/service.hpp"
#include "httplib.h"
#include "support.hpp"

using namespace cotc;
using namespace cotc::service;
using testing::fixture;

namespace {

json read_json(const std::filesystem::path& p) {
    std::ifstream in(p);
    return json::parse(in);
}

AppConfig open_config() {
    auto c = load_app_config(fixture("config_demo.json"));
    c.consultation.scoring.gamma = 0.1;
    c.consultation.scoring.energy_gate = -100;
    return c;
}

json demo_patient() { return read_json(fixture("patient_demo.json")); }

// Server on an ephemeral port, stopped on scope exit.
struct LiveServer {
    httplib::Server server;
    std::thread thread;
    int port = 0;

    explicit LiveServer(SessionService& svc) {
        install_routes(server, svc);
        port = server.bind_to_any_port("127.0.0.1");
        thread = std::thread([this] { server.listen_after_bind(); });
        server.wait_until_ready();
    }
    ~LiveServer() {
        server.stop();
        thread.join();
    }
};

}  // namespace

TEST_CASE("config loads strictly and resolves the kb path") {
    const auto c = load_app_config(fixture("config_demo.json"));
    CHECK(c.kb_path == fixture("kb_demo.json"));
    CHECK(c.seed == 7);
    CHECK(c.router.seed == 7);
    CHECK(c.consultation.scoring.gamma == 0.5);
    CHECK(c.server.port == 8080);
    auto j = read_json(fixture("config_demo.json"));
    j["colour"] = 1;
    CHECK_THROWS_AS(app_config_from_json(j), ValidationError);
    j.erase("colour");
    j["server"]["port"] = 70000;
    CHECK_THROWS_AS(app_config_from_json(j), ValidationError);
    CHECK_THROWS_AS(app_config_from_json({{"seed", 1}}), ValidationError);
    CHECK_THROWS_AS(load_app_config("/nonexistent/config.json"), ValidationError);
}

TEST_CASE("environment override wins over the command line") {
    ::unsetenv("COTC_CONFIG");
    CHECK(resolve_config_path(std::filesystem::path("a.json")) == std::filesystem::path("a.json"));
    CHECK_FALSE(resolve_config_path(std::nullopt).has_value());
    ::setenv("COTC_CONFIG", "/tmp/env.json", 1);
    CHECK(resolve_config_path(std::filesystem::path("a.json")) == std::filesystem::path("/tmp/env.json"));
    ::unsetenv("COTC_CONFIG");
}

TEST_CASE("config hash ignores deployment settings") {
    const auto a = open_config();
    auto b = a;
    b.server.port = 9999;
    b.server.host = "0.0.0.0";
    b.journal_path = "/tmp/j.jsonl";
    CHECK(config_hash(a) == config_hash(b));
    b.consultation.r_max = 3;
    CHECK(config_hash(a) != config_hash(b));
    auto c = a;
    c.seed = 8;
    CHECK(config_hash(a) != config_hash(c));
}

TEST_CASE("service sessions") {
    SessionService svc(load_kb(fixture("kb_demo.json")), open_config());
    const auto v = svc.create_session(demo_patient());
    CHECK(v["session_id"] == "s000001");
    CHECK(v["round"] == 0);
    REQUIRE(v["pending_question"].is_object());
    CHECK(svc.create_session({{"patient", demo_patient()}})["session_id"] == "s000002");
    CHECK(svc.session_count() == 2);
    try {
        svc.get_session("nope");
        FAIL("expected 404");
    } catch (const ServiceError& e) {
        CHECK(e.status() == 404);
    }
    auto bad = demo_patient();
    bad["gold_diseases"] = "x";
    CHECK_THROWS_AS(svc.create_session(bad), ServiceError);
    CHECK(svc.get_trace("s000001") == export_trace(start_session(load_kb(fixture("kb_demo.json")),
                                                                 harness::initial_evidence(harness::record_from_json(demo_patient())),
                                                                 harness::record_predicates(harness::record_from_json(demo_patient()),
                                                                                            benchmark_config(open_config())),
                                                                 open_config().consultation)));
}

TEST_CASE("http surface") {
    SessionService svc(load_kb(fixture("kb_demo.json")), open_config());
    LiveServer live(svc);
    REQUIRE(live.port > 0);
    httplib::Client cli("127.0.0.1", live.port);

    auto health = cli.Get("/v1/health");
    REQUIRE(health);
    CHECK(health->status == 200);
    CHECK(json::parse(health->body)["status"] == "ok");
    CHECK(health->get_header_value("X-Config-Hash") == svc.hash());

    auto created = cli.Post("/v1/sessions", demo_patient().dump(), "application/json");
    REQUIRE(created);
    CHECK(created->status == 201);
    const auto view = json::parse(created->body);
    const std::string id = view["session_id"];
    const auto gaps = view["pending_question"]["gaps"];
    REQUIRE(gaps.size() >= 1);

    json answers = json::array();
    for (const auto& g : gaps) answers.push_back({{"gap_id", g["finding"]}, {"value", "unknown"}});
    const json body = {{"round", 0}, {"answers", answers}};
    auto first = cli.Post("/v1/sessions/" + id + "/answers", body.dump(), "application/json");
    REQUIRE(first);
    CHECK(first->status == 200);
    CHECK(json::parse(first->body)["round"] == 1);

    auto replayed = cli.Post("/v1/sessions/" + id + "/answers", body.dump(), "application/json");
    REQUIRE(replayed);
    CHECK(replayed->status == 409);

    const json stray = {{"answers", {{{"gap_id", "migraine_aura"}, {"value", "yes"}}}}};
    auto bad_gap = cli.Post("/v1/sessions/" + id + "/answers", stray.dump(), "application/json");
    REQUIRE(bad_gap);
    CHECK(bad_gap->status == 422);

    auto missing = cli.Get("/v1/sessions/s999999");
    REQUIRE(missing);
    CHECK(missing->status == 404);

    auto malformed = cli.Post("/v1/sessions", "{not json", "application/json");
    REQUIRE(malformed);
    CHECK(malformed->status == 400);

    auto got = cli.Get("/v1/sessions/" + id);
    REQUIRE(got);
    CHECK(got->status == 200);
    CHECK(json::parse(got->body)["round"] == 1);

    auto trace = cli.Get("/v1/sessions/" + id + "/trace");
    REQUIRE(trace);
    CHECK(trace->status == 200);
    CHECK(trace->body == svc.get_trace(id).dump());
    CHECK(trace->get_header_value("X-Config-Hash") == svc.hash());
    CHECK(json::parse(trace->body)["schema"] == "cotc-trace/1");
}

TEST_CASE("journal replay restores identical sessions") {
    const auto dir = std::filesystem::temp_directory_path() / "cotc_journal_test";
    std::filesystem::remove_all(dir);
    std::filesystem::create_directories(dir);
    auto cfg = open_config();
    cfg.journal_path = dir / "journal.jsonl";
    const auto kb = load_kb(fixture("kb_demo.json"));

    std::string id, trace;
    {
        SessionService svc(kb, cfg);
        id = svc.create_session(demo_patient())["session_id"];
        svc.submit_answer(id, {{"text", "yes"}});
        trace = svc.get_trace(id).dump();
    }
    std::ifstream in(cfg.journal_path);
    std::string line;
    std::vector<json> lines;
    while (std::getline(in, line)) lines.push_back(json::parse(line));
    REQUIRE(lines.size() == 2);
    CHECK(lines[0]["op"] == "create");
    CHECK(lines[1]["op"] == "answer");
    CHECK(lines[1]["round"] == 0);

    SessionService again(kb, cfg);
    CHECK(again.replay_journal() == 1);
    CHECK(again.get_trace(id).dump() == trace);
    CHECK(again.create_session(demo_patient())["session_id"] == "s000002");
    std::filesystem::remove_all(dir);
}
