#pragma once

// Lab sessions: one live testing campaign with a prior, the outcomes recorded
// so far and the recommendation history. Sessions persist as one JSON
// document each (schema_version 1) and are reloaded on start-up.

#include "fatigue/bayes.hpp"
#include "fatigue/discretize.hpp"
#include "fatigue/gp.hpp"
#include "fatigue/model.hpp"

#include <json.hpp>

#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <shared_mutex>
#include <stdexcept>
#include <string>
#include <vector>

namespace fatigue::lab {

constexpr int kSchemaVersion = 1;

// Error categories surfaced by the HTTP layer as 404, 409, 409 and 422.
class NotFound : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};
class Conflict : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};
class GpUnavailable : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};
class Unprocessable : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

enum class AcqMethod { Entropy, Map };
std::string_view to_string(AcqMethod m) noexcept;
AcqMethod acq_method_from_string(std::string_view s);

enum class SessionStatus { Active, Closed };

struct SessionConfig {
    AcqMethod method = AcqMethod::Entropy;
    Discretization discretization = Discretization::None;
    std::size_t grid_points = 100000;
    std::size_t entropy_samples = 10000;
    int map_restarts = 8;
    std::uint64_t seed = 0;
};

struct Provenance {
    bool from_gp = false;
    std::optional<gp::MaterialFeatures> features;
};

// One experiment slot: an optional recommendation and, once recorded, its outcome.
struct HistoryEntry {
    std::optional<double> recommended_load;
    std::optional<double> discretized_load;
    std::optional<AcqMethod> method;
    std::optional<double> load;       // applied load; empty while pending
    std::optional<Outcome> outcome;   // empty while pending
    bool override_load = false;       // applied load differs from the recommendation, or there was none
    std::optional<double> map_mu;     // MAP after the outcome, N
    std::optional<double> map_sigma;
    std::optional<double> posterior_std_log10;
    std::optional<double> posterior_mean_log10;
    std::string recommended_at;
    std::string recorded_at;
    std::optional<std::string> idempotency_key;

    bool pending() const { return !outcome.has_value(); }
};

struct PosteriorSummary {
    MapEstimate map;
    std::optional<PosteriorMoments> moments; // empty when the grid is degenerate
    bool degenerate = false;
};

struct Session {
    std::string id;
    std::string material_id;
    PriorSpec prior;
    Provenance provenance;
    SessionConfig config;
    ExperimentSeries series;
    std::vector<HistoryEntry> history;
    SessionStatus status = SessionStatus::Active;
    std::string created_at;
    PosteriorSummary current; // derived from prior + series

    const HistoryEntry* pending() const;
};

// Recomputes MAP and posterior moments from prior and series.
PosteriorSummary summarize(const PriorSpec& prior, const ExperimentSeries& series, const SessionConfig& config);

// Grid indices kept when thinning n points to at most `max_points`: evenly
// spaced, endpoints included, and the argmax always present.
std::vector<std::size_t> downsample_indices(std::size_t n, std::size_t argmax, std::size_t max_points = 1000);

nlohmann::json session_to_json(const Session& s);
// Rebuilds the session from its document. The posterior summary is
// recomputed, never trusted from the file.
Session session_from_json(const nlohmann::json& j);

// Read-only view served by GET /sessions/{id}: persisted fields plus the
// posterior curve and warnings.
nlohmann::json snapshot(const Session& s, std::size_t max_curve_points = 1000);

struct CreateRequest {
    std::optional<PriorSpec> prior;
    std::optional<gp::MaterialFeatures> features;
    SigmaPrior sigma_prior = FixedSigma{};
    SessionConfig config;
    std::string material_id;
};

// Parses a POST /sessions body. Throws Unprocessable on invalid content.
CreateRequest parse_create_request(const nlohmann::json& body);

struct Recommendation {
    double recommended_load = 0.0;
    double discretized_load = 0.0;
    AcqMethod method = AcqMethod::Map;
};

// Owns all sessions of a data directory. Operations on one session are
// serialised by its mutex; different sessions proceed in parallel.
class SessionStore {
public:
    // Loads every *.json document in `data_dir`. `model` may be null.
    SessionStore(std::filesystem::path data_dir, std::shared_ptr<const gp::GpModel> model);

    nlohmann::json create(const CreateRequest& request);
    Recommendation recommend(const std::string& id, std::optional<AcqMethod> method);
    nlohmann::json record_outcome(const std::string& id, double load, Outcome outcome,
                                  const std::optional<std::string>& idempotency_key);
    nlohmann::json get(const std::string& id) const;
    nlohmann::json close(const std::string& id);

    std::vector<std::string> ids() const;
    bool has_model() const noexcept { return model_ != nullptr; }
    const std::filesystem::path& data_dir() const noexcept { return dir_; }

    // Path of the session document.
    std::filesystem::path path_of(const std::string& id) const;

private:
    struct Slot {
        mutable std::shared_mutex mutex;
        Session session;
    };

    std::shared_ptr<Slot> find(const std::string& id) const;
    void persist(const Session& s) const;
    std::string new_id();

    std::filesystem::path dir_;
    std::shared_ptr<const gp::GpModel> model_;
    mutable std::mutex map_mutex_;
    std::map<std::string, std::shared_ptr<Slot>> sessions_;
    std::uint64_t id_counter_ = 0;
    std::uint64_t id_salt_ = 0;
};

} // namespace fatigue::lab
