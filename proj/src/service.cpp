#include "fatigue/service.hpp"

#include "fatigue/errors.hpp"

#include <httplib.h>

namespace fatigue::lab {

using nlohmann::json;

namespace {

void send_json(httplib::Response& res, int status, const json& body) {
    res.status = status;
    res.set_content(body.dump(), "application/json");
}

void send_error(httplib::Response& res, int status, const std::string& kind, const std::string& message) {
    send_json(res, status, {{"error", kind}, {"message", message}});
}

// Runs `fn`, translating exceptions into HTTP errors.
template <class Fn>
void guarded(httplib::Response& res, Fn&& fn) {
    try {
        fn();
    } catch (const json::parse_error& e) {
        send_error(res, 400, "bad_request", std::string("body is not valid JSON: ") + e.what());
    } catch (const NotFound& e) {
        send_error(res, 404, "not_found", e.what());
    } catch (const GpUnavailable& e) {
        send_error(res, 409, "gp_unavailable", e.what());
    } catch (const Conflict& e) {
        send_error(res, 409, "conflict", e.what());
    } catch (const Unprocessable& e) {
        send_error(res, 422, "invalid", e.what());
    } catch (const DomainError& e) {
        send_error(res, 422, "invalid", e.what());
    } catch (const ConfigError& e) {
        send_error(res, 422, "invalid", e.what());
    } catch (const json::exception& e) {
        send_error(res, 422, "invalid", e.what());
    } catch (const std::exception& e) {
        send_error(res, 500, "internal", e.what());
    }
}

json parse_body(const httplib::Request& req) {
    if (req.body.empty()) return json::object();
    return json::parse(req.body);
}

} // namespace

struct LabService::Impl {
    SessionStore& store;
    httplib::Server server;

    explicit Impl(SessionStore& s) : store(s) { routes(); }

    void routes() {
        server.set_default_headers({{"Access-Control-Allow-Origin", "*"},
                                    {"Access-Control-Allow-Headers", "Content-Type, Idempotency-Key"},
                                    {"Access-Control-Allow-Methods", "GET, POST, OPTIONS"}});
        server.Options(R"(.*)", [](const httplib::Request&, httplib::Response& res) { res.status = 204; });

        server.Get("/healthz", [this](const httplib::Request&, httplib::Response& res) {
            send_json(res, 200,
                      {{"status", "ok"}, {"gp_model", store.has_model()}, {"sessions", store.ids().size()}});
        });

        server.Get("/sessions", [this](const httplib::Request&, httplib::Response& res) {
            send_json(res, 200, {{"ids", store.ids()}});
        });

        server.Post("/sessions", [this](const httplib::Request& req, httplib::Response& res) {
            guarded(res, [&] { send_json(res, 201, store.create(parse_create_request(parse_body(req)))); });
        });

        server.Get(R"(/sessions/([0-9a-f]+))", [this](const httplib::Request& req, httplib::Response& res) {
            guarded(res, [&] { send_json(res, 200, store.get(req.matches[1])); });
        });

        server.Post(R"(/sessions/([0-9a-f]+)/recommend)", [this](const httplib::Request& req,
                                                                 httplib::Response& res) {
            guarded(res, [&] {
                std::optional<AcqMethod> method;
                if (req.has_param("method")) method = acq_method_from_string(req.get_param_value("method"));
                const auto rec = store.recommend(req.matches[1], method);
                send_json(res, 200,
                          {{"session_id", std::string(req.matches[1])},
                           {"recommended_load", rec.recommended_load},
                           {"discretized_load", rec.discretized_load},
                           {"method", std::string(to_string(rec.method))}});
            });
        });

        server.Post(R"(/sessions/([0-9a-f]+)/outcomes)", [this](const httplib::Request& req,
                                                                httplib::Response& res) {
            guarded(res, [&] {
                const json body = parse_body(req);
                if (!body.is_object() || !body.contains("load") || !body.contains("outcome"))
                    throw Unprocessable("body must contain 'load' (N) and 'outcome' (failure|runout)");
                const double load = body.at("load").get<double>();
                const Outcome outcome = outcome_from_string(body.at("outcome").get<std::string>());
                std::optional<std::string> key;
                if (body.contains("idempotency_key") && !body.at("idempotency_key").is_null())
                    key = body.at("idempotency_key").get<std::string>();
                else if (req.has_header("Idempotency-Key"))
                    key = req.get_header_value("Idempotency-Key");
                send_json(res, 200, store.record_outcome(req.matches[1], load, outcome, key));
            });
        });

        server.Post(R"(/sessions/([0-9a-f]+)/close)", [this](const httplib::Request& req, httplib::Response& res) {
            guarded(res, [&] { send_json(res, 200, store.close(req.matches[1])); });
        });

        server.set_error_handler([](const httplib::Request&, httplib::Response& res) {
            if (res.body.empty()) send_error(res, res.status, "error", httplib::status_message(res.status));
        });
    }
};

LabService::LabService(SessionStore& store) : impl_(std::make_unique<Impl>(store)) {}
LabService::~LabService() { stop(); }

int LabService::bind(const std::string& host, int port) {
    if (port == 0) return impl_->server.bind_to_any_port(host);
    return impl_->server.bind_to_port(host, port) ? port : -1;
}

bool LabService::run() { return impl_->server.listen_after_bind(); }
void LabService::stop() {
    if (impl_) impl_->server.stop();
}
bool LabService::is_running() const { return impl_->server.is_running(); }
void LabService::wait_until_ready() const { impl_->server.wait_until_ready(); }

} // namespace fatigue::lab
