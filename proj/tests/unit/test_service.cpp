#include "fatigue/service.hpp"
#include "fatigue/session.hpp"

#include <doctest.h>
#include <httplib.h>

#include <filesystem>
#include <random>
#include <thread>

using namespace fatigue::lab;
using nlohmann::json;

namespace {

struct Server {
    std::filesystem::path dir;
    SessionStore store;
    LabService service;
    int port;
    std::thread thread;

    static std::filesystem::path make_dir() {
        std::random_device rd;
        auto p = std::filesystem::temp_directory_path() / ("fatigue-service-" + std::to_string(rd()) + std::to_string(rd()));
        std::filesystem::create_directories(p);
        return p;
    }

    Server() : dir(make_dir()), store(dir, nullptr), service(store), port(service.bind("127.0.0.1", 0)) {
        REQUIRE(port > 0);
        thread = std::thread([this] { service.run(); });
        service.wait_until_ready();
    }
    ~Server() {
        service.stop();
        thread.join();
        std::error_code ec;
        std::filesystem::remove_all(dir, ec);
    }
};

const std::string kCreate =
    R"({"prior": {"mean_load": 400, "width": 10}, "config": {"grid_points": 2001, "entropy_samples": 2000, "method": "map", "discretization": "ten"}})";

} // namespace

TEST_CASE("http api") {
    Server srv;
    httplib::Client cli("127.0.0.1", srv.port);

    auto health = cli.Get("/healthz");
    REQUIRE(health);
    CHECK(health->status == 200);

    auto created = cli.Post("/sessions", kCreate, "application/json");
    REQUIRE(created);
    CHECK(created->status == 201);
    const auto snap = json::parse(created->body);
    const std::string id = snap.at("id");
    const std::string base = "/sessions/" + id;

    auto list = cli.Get("/sessions");
    REQUIRE(list);
    CHECK(json::parse(list->body).at("ids") == json::array({id}));

    auto got = cli.Get(base);
    REQUIRE(got);
    CHECK(got->status == 200);
    CHECK(json::parse(got->body).at("id") == id);

    auto rec = cli.Post(base + "/recommend", "", "application/json");
    REQUIRE(rec);
    CHECK(rec->status == 200);
    const auto r = json::parse(rec->body);
    CHECK(r.at("method") == "map");
    CHECK(r.at("discretized_load") == 400.0);

    auto again = cli.Post(base + "/recommend", "", "application/json");
    REQUIRE(again);
    CHECK(again->status == 409);
    CHECK(json::parse(again->body).contains("error"));

    httplib::Headers key{{"Idempotency-Key", "abc"}};
    auto out = cli.Post(base + "/outcomes", key, R"({"load": 400, "outcome": "failure"})", "application/json");
    REQUIRE(out);
    CHECK(out->status == 200);
    auto replay = cli.Post(base + "/outcomes", key, R"({"load": 400, "outcome": "failure"})", "application/json");
    REQUIRE(replay);
    CHECK(replay->status == 200);
    CHECK(json::parse(replay->body).at("series").size() == 1);
    auto clash = cli.Post(base + "/outcomes", key, R"({"load": 400, "outcome": "runout"})", "application/json");
    REQUIRE(clash);
    CHECK(clash->status == 409);

    auto entropy = cli.Post(base + "/recommend?method=entropy", "", "application/json");
    REQUIRE(entropy);
    CHECK(entropy->status == 200);
    CHECK(json::parse(entropy->body).at("method") == "entropy");

    SUBCASE("error statuses") {
        auto malformed = cli.Post("/sessions", "{not json", "application/json");
        REQUIRE(malformed);
        CHECK(malformed->status == 400);

        auto invalid = cli.Post("/sessions", R"({"prior": {"mean_load": 400, "width": 0.5}})", "application/json");
        REQUIRE(invalid);
        CHECK(invalid->status == 422);

        auto features = cli.Post(
            "/sessions",
            R"({"features": {"v90": 100, "edge_hardness": 300, "load_type": "bending", "load_ratio_r": -1}})",
            "application/json");
        REQUIRE(features);
        CHECK(features->status == 409);
        CHECK(json::parse(features->body).at("error") == "gp_unavailable");

        auto missing = cli.Get("/sessions/does-not-exist");
        REQUIRE(missing);
        CHECK(missing->status == 404);

        auto bad_load = cli.Post(base + "/outcomes", R"({"load": -1, "outcome": "failure"})", "application/json");
        REQUIRE(bad_load);
        CHECK(bad_load->status == 422);

        auto bad_outcome = cli.Post(base + "/outcomes", R"({"load": 400, "outcome": "cracked"})", "application/json");
        REQUIRE(bad_outcome);
        CHECK(bad_outcome->status == 422);

        auto bad_method = cli.Post(base + "/recommend?method=ucb", "", "application/json");
        REQUIRE(bad_method);
        CHECK(bad_method->status == 422);
    }

    SUBCASE("closing") {
        auto closed = cli.Post(base + "/close", "", "application/json");
        REQUIRE(closed);
        CHECK(closed->status == 200);
        CHECK(json::parse(closed->body).at("status") == "closed");
        auto after = cli.Post(base + "/outcomes", R"({"load": 400, "outcome": "runout"})", "application/json");
        REQUIRE(after);
        CHECK(after->status == 409);
    }
}
