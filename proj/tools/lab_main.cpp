// fatigue-lab: HTTP service for live testing campaigns.
//
// Each option falls back to an environment variable:
//   --data-dir  DATA_DIR       session documents (default ./lab_data)
//   --bind      BIND_ADDR      host:port (default 127.0.0.1:8080)
//   --gp-model  GP_MODEL_PATH  optional model JSON from `fatigue-gp train`

#include "fatigue/gp.hpp"
#include "fatigue/service.hpp"
#include "fatigue/session.hpp"

#include <CLI11.hpp>

#include <csignal>
#include <cstdlib>
#include <iostream>
#include <string>

namespace {

fatigue::lab::LabService* g_service = nullptr;

void on_signal(int) {
    if (g_service) g_service->stop();
}

std::string env_or(const char* name, const char* fallback) {
    const char* v = std::getenv(name);
    return v && *v ? v : fallback;
}

} // namespace

int main(int argc, char** argv) {
    std::string data_dir = env_or("DATA_DIR", "lab_data");
    std::string bind_addr = env_or("BIND_ADDR", "127.0.0.1:8080");
    std::string model_path = env_or("GP_MODEL_PATH", "");

    CLI::App app{"HTTP service for live fatigue testing campaigns"};
    app.add_option("--data-dir", data_dir, "directory of persisted session documents")->capture_default_str();
    app.add_option("--bind", bind_addr, "host:port to listen on")->capture_default_str();
    app.add_option("--gp-model", model_path, "GP model JSON for feature-based priors");
    CLI11_PARSE(app, argc, argv);

    const auto colon = bind_addr.rfind(':');
    if (colon == std::string::npos) {
        std::cerr << "BIND_ADDR must be host:port, got '" << bind_addr << "'\n";
        return 2;
    }
    const std::string host = bind_addr.substr(0, colon);
    int port = 0;
    try {
        port = std::stoi(bind_addr.substr(colon + 1));
    } catch (const std::exception&) {
        std::cerr << "BIND_ADDR port is not a number: '" << bind_addr << "'\n";
        return 2;
    }

    std::shared_ptr<const fatigue::gp::GpModel> model;
    if (!model_path.empty()) {
        try {
            model = std::make_shared<const fatigue::gp::GpModel>(fatigue::gp::load_model(model_path));
            std::cerr << "loaded GP model " << model_path << " (" << model->data().size() << " rows)\n";
        } catch (const std::exception& e) {
            std::cerr << "cannot load GP model " << model_path << ": " << e.what() << '\n';
            return 2;
        }
    }

    fatigue::lab::SessionStore store(data_dir, model);
    fatigue::lab::LabService service(store);
    const int bound = service.bind(host, port);
    if (bound < 0) {
        std::cerr << "cannot bind " << bind_addr << '\n';
        return 1;
    }
    g_service = &service;
    std::signal(SIGINT, on_signal);
    std::signal(SIGTERM, on_signal);
    std::cerr << "serving " << store.ids().size() << " sessions from " << data_dir << " on " << host << ':' << bound
              << '\n';
    return service.run() ? 0 : 1;
}
