#include "fatigue/session.hpp"

#include "fatigue/errors.hpp"
#include "fatigue/rng.hpp"

#include <fcntl.h>
#include <unistd.h>

#include <algorithm>
#include <cerrno>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <ctime>
#include <fstream>
#include <iostream>
#include <limits>
#include <random>
#include <sstream>

namespace fatigue::lab {

using nlohmann::json;

namespace {

std::string now_iso() {
    const auto now = std::chrono::system_clock::now();
    const std::time_t t = std::chrono::system_clock::to_time_t(now);
    const auto ms =
        std::chrono::duration_cast<std::chrono::milliseconds>(now.time_since_epoch()).count() % 1000;
    std::tm tm{};
    gmtime_r(&t, &tm);
    char buf[32];
    std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%S", &tm);
    char out[48];
    std::snprintf(out, sizeof out, "%s.%03dZ", buf, static_cast<int>(ms));
    return out;
}

template <class T>
json opt(const std::optional<T>& v) {
    return v ? json(*v) : json(nullptr);
}

template <class T>
std::optional<T> opt_get(const json& j, const char* key) {
    if (!j.contains(key) || j.at(key).is_null()) return std::nullopt;
    return j.at(key).get<T>();
}

json sigma_prior_json(const SigmaPrior& s) {
    return std::visit(
        [](const auto& v) -> json {
            using T = std::decay_t<decltype(v)>;
            if constexpr (std::is_same_v<T, FixedSigma>) return {{"kind", "fixed"}, {"value", v.value}};
            else if constexpr (std::is_same_v<T, UniformSigma>) return {{"kind", "uniform"}, {"lo_log10", v.lo}, {"hi_log10", v.hi}};
            else return {{"kind", "gamma"}, {"shape", v.shape}, {"rate", v.rate}};
        },
        s);
}

SigmaPrior sigma_prior_from_json(const json& j) {
    const auto kind = j.at("kind").get<std::string>();
    if (kind == "fixed") return FixedSigma{j.at("value").get<double>()};
    if (kind == "uniform") return UniformSigma{j.at("lo_log10").get<double>(), j.at("hi_log10").get<double>()};
    if (kind == "gamma") return GammaSigma{j.at("shape").get<double>(), j.at("rate").get<double>()};
    throw Unprocessable("sigma_prior.kind must be fixed, uniform or gamma");
}

json features_json(const gp::MaterialFeatures& f) {
    return {{"v90", f.v90},
            {"edge_hardness", f.edge_hardness},
            {"load_type", std::string(gp::to_string(f.load_type))},
            {"load_ratio_r", f.load_ratio_r}};
}

gp::MaterialFeatures features_from_json(const json& j) {
    gp::MaterialFeatures f;
    f.v90 = j.at("v90").get<double>();
    f.edge_hardness = j.at("edge_hardness").get<double>();
    f.load_type = gp::load_type_from_string(j.at("load_type").get<std::string>());
    f.load_ratio_r = j.at("load_ratio_r").get<double>();
    return f;
}

json history_json(const HistoryEntry& h) {
    return {{"recommended_load", opt(h.recommended_load)},
            {"discretized_load", opt(h.discretized_load)},
            {"method", h.method ? json(std::string(to_string(*h.method))) : json(nullptr)},
            {"load", opt(h.load)},
            {"outcome", h.outcome ? json(std::string(to_string(*h.outcome))) : json("pending")},
            {"override", h.override_load},
            {"map_load", opt(h.map_mu)},
            {"map_sigma", opt(h.map_sigma)},
            {"posterior_std_log10", opt(h.posterior_std_log10)},
            {"posterior_mean_log10", opt(h.posterior_mean_log10)},
            {"recommended_at", h.recommended_at},
            {"recorded_at", h.recorded_at},
            {"idempotency_key", opt(h.idempotency_key)}};
}

HistoryEntry history_from_json(const json& j) {
    HistoryEntry h;
    h.recommended_load = opt_get<double>(j, "recommended_load");
    h.discretized_load = opt_get<double>(j, "discretized_load");
    if (auto m = opt_get<std::string>(j, "method")) h.method = acq_method_from_string(*m);
    h.load = opt_get<double>(j, "load");
    const auto oc = j.at("outcome").get<std::string>();
    if (oc != "pending") h.outcome = outcome_from_string(oc);
    h.override_load = j.value("override", false);
    h.map_mu = opt_get<double>(j, "map_load");
    h.map_sigma = opt_get<double>(j, "map_sigma");
    h.posterior_std_log10 = opt_get<double>(j, "posterior_std_log10");
    h.posterior_mean_log10 = opt_get<double>(j, "posterior_mean_log10");
    h.recommended_at = j.value("recommended_at", "");
    h.recorded_at = j.value("recorded_at", "");
    h.idempotency_key = opt_get<std::string>(j, "idempotency_key");
    return h;
}

json posterior_json(const PosteriorSummary& p) {
    json j{{"map_load", p.map.mu_hat},
           {"map_sigma", p.map.sigma_hat},
           {"map_log10", std::log10(p.map.mu_hat)},
           {"degenerate", p.degenerate}};
    if (p.moments) {
        j["mean_log10"] = p.moments->mean_log10;
        j["std_log10"] = p.moments->std_log10;
        j["mean_load"] = p.moments->mean_load;
        j["std_load"] = p.moments->std_load;
    } else {
        j["mean_log10"] = nullptr;
        j["std_log10"] = nullptr;
        j["mean_load"] = nullptr;
        j["std_load"] = nullptr;
    }
    return j;
}

void write_atomically(const std::filesystem::path& path, const std::string& text) {
    const auto tmp = path.string() + ".tmp";
    const int fd = ::open(tmp.c_str(), O_WRONLY | O_CREAT | O_TRUNC, 0644);
    if (fd < 0) throw std::runtime_error("cannot write " + tmp + ": " + std::strerror(errno));
    std::size_t off = 0;
    while (off < text.size()) {
        const auto n = ::write(fd, text.data() + off, text.size() - off);
        if (n < 0) {
            if (errno == EINTR) continue;
            const std::string err = std::strerror(errno);
            ::close(fd);
            throw std::runtime_error("write failed for " + tmp + ": " + err);
        }
        off += static_cast<std::size_t>(n);
    }
    ::fsync(fd);
    ::close(fd);
    std::filesystem::rename(tmp, path);
}

bool same_load(double a, double b) { return std::abs(a - b) <= 1e-9 * std::max(1.0, std::abs(b)); }

} // namespace

std::string_view to_string(AcqMethod m) noexcept { return m == AcqMethod::Entropy ? "entropy" : "map"; }

AcqMethod acq_method_from_string(std::string_view s) {
    if (s == "entropy") return AcqMethod::Entropy;
    if (s == "map") return AcqMethod::Map;
    throw Unprocessable("method must be 'entropy' or 'map', got '" + std::string(s) + "'");
}

const HistoryEntry* Session::pending() const {
    if (!history.empty() && history.back().pending()) return &history.back();
    return nullptr;
}

PosteriorSummary summarize(const PriorSpec& prior, const ExperimentSeries& series, const SessionConfig& config) {
    PosteriorSummary out;
    try {
        const auto grid = evaluate_grid(prior, series, config.grid_points);
        out.map = map_estimate(prior, series, config.map_restarts, &grid);
        out.moments = posterior_std(grid);
    } catch (const DegeneratePosterior&) {
        out.degenerate = true;
        out.moments.reset();
        try {
            out.map = map_estimate(prior, series, config.map_restarts);
        } catch (const DegeneratePosterior&) {
            out.map = {prior.mu_prior.mode_load(), prior.sigma_point(), -std::numeric_limits<double>::infinity()};
        }
    }
    return out;
}

std::vector<std::size_t> downsample_indices(std::size_t n, std::size_t argmax, std::size_t max_points) {
    if (max_points < 2) throw DomainError("downsample_indices: max_points must be >= 2");
    std::vector<std::size_t> idx;
    if (n <= max_points) {
        idx.resize(n);
        for (std::size_t i = 0; i < n; ++i) idx[i] = i;
        return idx;
    }
    idx.reserve(max_points);
    for (std::size_t i = 0; i < max_points; ++i)
        idx.push_back(static_cast<std::size_t>(std::llround(static_cast<double>(i) * static_cast<double>(n - 1) /
                                                            static_cast<double>(max_points - 1))));
    // Swap the nearest sample for the argmax; ordering is preserved because
    // the argmax lies between that sample's neighbours.
    auto nearest = std::min_element(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) {
        const auto da = a > argmax ? a - argmax : argmax - a;
        const auto db = b > argmax ? b - argmax : argmax - b;
        return da < db;
    });
    *nearest = argmax;
    return idx;
}

json session_to_json(const Session& s) {
    json series = json::array();
    for (const auto& r : s.series.records())
        series.push_back({{"index", r.index}, {"load", r.load}, {"outcome", std::string(to_string(r.outcome))}});
    json history = json::array();
    for (const auto& h : s.history) history.push_back(history_json(h));
    return {{"schema_version", kSchemaVersion},
            {"id", s.id},
            {"material_id", s.material_id},
            {"created_at", s.created_at},
            {"status", s.status == SessionStatus::Active ? "active" : "closed"},
            {"prior",
             {{"mean_log10", s.prior.mu_prior.mean_log10},
              {"std_log10", s.prior.mu_prior.std_log10},
              {"mode_load", s.prior.mu_prior.mode_load()},
              {"support_lo_log10", s.prior.support_lo()},
              {"support_hi_log10", s.prior.support_hi()},
              {"sigma_prior", sigma_prior_json(s.prior.sigma_prior)}}},
            {"provenance",
             {{"source", s.provenance.from_gp ? "gp" : "manual"},
              {"features", s.provenance.features ? features_json(*s.provenance.features) : json(nullptr)}}},
            {"config",
             {{"method", std::string(to_string(s.config.method))},
              {"discretization", std::string(to_string(s.config.discretization))},
              {"grid_points", s.config.grid_points},
              {"entropy_samples", s.config.entropy_samples},
              {"map_restarts", s.config.map_restarts},
              {"seed", s.config.seed}}},
            {"series", series},
            {"history", history},
            {"posterior", posterior_json(s.current)}};
}

Session session_from_json(const json& j) {
    try {
        const int version = j.at("schema_version").get<int>();
        if (version != kSchemaVersion)
            throw Unprocessable("unsupported schema_version " + std::to_string(version));
        Session s;
        s.id = j.at("id").get<std::string>();
        s.material_id = j.value("material_id", "");
        s.created_at = j.value("created_at", "");
        s.status = j.at("status").get<std::string>() == "closed" ? SessionStatus::Closed : SessionStatus::Active;
        const auto& p = j.at("prior");
        s.prior.mu_prior = {p.at("mean_log10").get<double>(), p.at("std_log10").get<double>()};
        s.prior.sigma_prior = sigma_prior_from_json(p.at("sigma_prior"));
        s.prior.validate();
        const auto& pv = j.at("provenance");
        s.provenance.from_gp = pv.at("source").get<std::string>() == "gp";
        if (!pv.at("features").is_null()) s.provenance.features = features_from_json(pv.at("features"));
        const auto& c = j.at("config");
        s.config.method = acq_method_from_string(c.at("method").get<std::string>());
        s.config.discretization = discretization_from_string(c.at("discretization").get<std::string>());
        s.config.grid_points = c.at("grid_points").get<std::size_t>();
        s.config.entropy_samples = c.at("entropy_samples").get<std::size_t>();
        s.config.map_restarts = c.at("map_restarts").get<int>();
        s.config.seed = c.at("seed").get<std::uint64_t>();
        s.series = ExperimentSeries(s.material_id);
        for (const auto& r : j.at("series"))
            s.series.append(r.at("load").get<double>(), outcome_from_string(r.at("outcome").get<std::string>()));
        for (const auto& h : j.at("history")) s.history.push_back(history_from_json(h));
        s.current = summarize(s.prior, s.series, s.config);
        return s;
    } catch (const json::exception& e) {
        throw Unprocessable(std::string("malformed session document: ") + e.what());
    } catch (const DomainError& e) {
        throw Unprocessable(std::string("invalid session document: ") + e.what());
    }
}

json snapshot(const Session& s, std::size_t max_curve_points) {
    json j = session_to_json(s);
    const auto* p = s.pending();
    j["pending"] = p ? history_json(*p) : json(nullptr);

    json warnings = json::array();
    json curve{{"mu_log10", json::array()}, {"load", json::array()}, {"density", json::array()}};
    if (s.current.degenerate) {
        warnings.push_back("posterior is degenerate on the prior support; widen the prior (larger width) "
                           "and create a new session");
    } else {
        const double sigma = s.prior.sigma_is_fixed() ? s.prior.sigma_point() : s.current.map.sigma_hat;
        const auto grid = evaluate_grid_at_sigma(s.prior, s.series, s.config.grid_points, sigma);
        const auto density = grid.density();
        for (auto i : downsample_indices(grid.n_points(), grid.argmax(), max_curve_points)) {
            curve["mu_log10"].push_back(grid.mu_log10()[i]);
            curve["load"].push_back(std::pow(10.0, grid.mu_log10()[i]));
            curve["density"].push_back(density[i]);
        }
    }
    if (!s.series.empty() && map_at_support_edge(s.prior, s.current.map, 1e-4))
        warnings.push_back("MAP estimate sits on the edge of the prior support; the data disagree with the prior, "
                           "consider a wider prior");
    j["curve"] = std::move(curve);
    j["warnings"] = std::move(warnings);
    return j;
}

CreateRequest parse_create_request(const json& body) {
    if (!body.is_object()) throw Unprocessable("request body must be a JSON object");
    CreateRequest req;
    try {
        const bool has_prior = body.contains("prior") && !body.at("prior").is_null();
        const bool has_features = body.contains("features") && !body.at("features").is_null();
        if (has_prior == has_features) throw Unprocessable("supply exactly one of 'prior' or 'features'");

        if (body.contains("sigma_prior")) req.sigma_prior = sigma_prior_from_json(body.at("sigma_prior"));
        else if (body.contains("sigma_l")) req.sigma_prior = FixedSigma{body.at("sigma_l").get<double>()};

        if (has_prior) {
            const auto& p = body.at("prior");
            PriorSpec prior;
            if (p.contains("mean_load")) {
                const double mean = p.at("mean_load").get<double>();
                const double width = p.at("width").get<double>();
                if (!(mean > 0.0) || !(width > 1.0))
                    throw Unprocessable("prior.mean_load must be > 0 and prior.width > 1");
                prior = PriorSpec::from_width(mean, width, req.sigma_prior);
            } else {
                prior.mu_prior = {p.at("mean_log10").get<double>(), p.at("std_log10").get<double>()};
                prior.sigma_prior = req.sigma_prior;
            }
            prior.validate();
            req.prior = prior;
        } else {
            req.features = features_from_json(body.at("features"));
            req.features->validate();
        }

        if (body.contains("config")) {
            const auto& c = body.at("config");
            if (c.contains("method")) req.config.method = acq_method_from_string(c.at("method").get<std::string>());
            if (c.contains("discretization"))
                req.config.discretization = discretization_from_string(c.at("discretization").get<std::string>());
            req.config.grid_points = c.value("grid_points", req.config.grid_points);
            req.config.entropy_samples = c.value("entropy_samples", req.config.entropy_samples);
            req.config.map_restarts = c.value("map_restarts", req.config.map_restarts);
            req.config.seed = c.value("seed", req.config.seed);
            if (req.config.grid_points < 3 || req.config.grid_points > 2000000)
                throw Unprocessable("config.grid_points must be in [3, 2000000]");
            if (req.config.entropy_samples < 1 || req.config.entropy_samples > 1000000)
                throw Unprocessable("config.entropy_samples must be in [1, 1000000]");
            if (req.config.map_restarts < 1 || req.config.map_restarts > 64)
                throw Unprocessable("config.map_restarts must be in [1, 64]");
        }
        req.material_id = body.value("material_id", "");
    } catch (const json::exception& e) {
        throw Unprocessable(std::string("invalid request: ") + e.what());
    } catch (const DomainError& e) {
        throw Unprocessable(e.what());
    }
    return req;
}

SessionStore::SessionStore(std::filesystem::path data_dir, std::shared_ptr<const gp::GpModel> model)
    : dir_(std::move(data_dir)), model_(std::move(model)) {
    std::filesystem::create_directories(dir_);
    std::random_device rd;
    id_salt_ = (static_cast<std::uint64_t>(rd()) << 32) ^ rd() ^
               static_cast<std::uint64_t>(std::chrono::steady_clock::now().time_since_epoch().count());
    for (const auto& entry : std::filesystem::directory_iterator(dir_)) {
        if (!entry.is_regular_file() || entry.path().extension() != ".json") continue;
        try {
            std::ifstream in(entry.path());
            auto slot = std::make_shared<Slot>();
            slot->session = session_from_json(json::parse(in));
            sessions_.emplace(slot->session.id, std::move(slot));
        } catch (const std::exception& e) {
            std::cerr << "skipping " << entry.path() << ": " << e.what() << '\n';
        }
    }
}

std::filesystem::path SessionStore::path_of(const std::string& id) const { return dir_ / (id + ".json"); }

std::string SessionStore::new_id() {
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx",
                  static_cast<unsigned long long>(splitmix64_at(id_salt_, id_counter_++)));
    return buf;
}

std::shared_ptr<SessionStore::Slot> SessionStore::find(const std::string& id) const {
    std::lock_guard lock(map_mutex_);
    const auto it = sessions_.find(id);
    if (it == sessions_.end()) throw NotFound("no session '" + id + "'");
    return it->second;
}

void SessionStore::persist(const Session& s) const { write_atomically(path_of(s.id), session_to_json(s).dump(2)); }

std::vector<std::string> SessionStore::ids() const {
    std::lock_guard lock(map_mutex_);
    std::vector<std::string> out;
    for (const auto& [id, _] : sessions_) out.push_back(id);
    return out;
}

json SessionStore::create(const CreateRequest& request) {
    Session s;
    if (request.features) {
        if (!model_)
            throw GpUnavailable("no GP model is loaded, so features cannot be turned into a prior; "
                                "supply an explicit 'prior' instead (a broad one, e.g. width 10, if unsure)");
        s.prior.mu_prior = model_->predict(*request.features);
        s.prior.sigma_prior = request.sigma_prior;
        s.provenance = {true, request.features};
    } else {
        s.prior = *request.prior;
        s.provenance = {false, std::nullopt};
    }
    try {
        s.prior.validate();
    } catch (const DomainError& e) {
        throw Unprocessable(e.what());
    }
    s.config = request.config;
    s.material_id = request.material_id;
    s.series = ExperimentSeries(s.material_id);
    s.created_at = now_iso();
    s.current = summarize(s.prior, s.series, s.config);

    auto slot = std::make_shared<Slot>();
    {
        std::lock_guard lock(map_mutex_);
        do {
            s.id = new_id();
        } while (sessions_.count(s.id) != 0);
    }
    persist(s);
    slot->session = std::move(s);
    json out = snapshot(slot->session);
    std::lock_guard lock(map_mutex_);
    sessions_.emplace(slot->session.id, slot);
    return out;
}

Recommendation SessionStore::recommend(const std::string& id, std::optional<AcqMethod> method) {
    auto slot = find(id);
    std::unique_lock lock(slot->mutex);
    const Session& cur = slot->session;
    if (cur.status == SessionStatus::Closed) throw Conflict("session is closed");
    if (cur.pending())
        throw Conflict("a recommendation is already pending; record its outcome (or an override load) first");
    if (cur.current.degenerate)
        throw Unprocessable("posterior is degenerate on the prior support, so no load can be recommended; "
                            "widen the prior and start a new session");

    Recommendation rec;
    rec.method = method.value_or(cur.config.method);
    if (rec.method == AcqMethod::Map) {
        rec.recommended_load = acquire_map(cur.current.map);
    } else {
        try {
            const auto grid = evaluate_grid(cur.prior, cur.series, cur.config.grid_points);
            EntropyOptions eo;
            eo.n_samples = cur.config.entropy_samples;
            eo.seed = derive_seed(cur.config.seed, cur.series.size(), 0x656e74);
            rec.recommended_load = acquire_entropy(grid, cur.current.map, eo);
        } catch (const DegeneratePosterior& e) {
            throw Unprocessable(std::string("posterior is degenerate: ") + e.what() + "; widen the prior");
        }
    }
    rec.discretized_load = discretize_load(rec.recommended_load, cur.config.discretization);

    Session next = cur;
    HistoryEntry h;
    h.recommended_load = rec.recommended_load;
    h.discretized_load = rec.discretized_load;
    h.method = rec.method;
    h.recommended_at = now_iso();
    next.history.push_back(h);
    persist(next);
    slot->session = std::move(next);
    return rec;
}

json SessionStore::record_outcome(const std::string& id, double load, Outcome outcome,
                                  const std::optional<std::string>& idempotency_key) {
    if (!(load > 0.0) || !std::isfinite(load)) throw Unprocessable("load must be a positive number of N");
    auto slot = find(id);
    std::unique_lock lock(slot->mutex);
    const Session& cur = slot->session;

    if (idempotency_key) {
        for (const auto& h : cur.history) {
            if (h.idempotency_key != idempotency_key) continue;
            if (h.load && same_load(*h.load, load) && h.outcome == outcome) return snapshot(cur);
            throw Conflict("idempotency key '" + *idempotency_key + "' was already used for a different outcome");
        }
    }
    if (cur.status == SessionStatus::Closed) throw Conflict("session is closed");

    Session next = cur;
    HistoryEntry* entry = nullptr;
    if (!next.history.empty() && next.history.back().pending()) {
        entry = &next.history.back();
        entry->override_load = !same_load(load, *entry->discretized_load);
    } else {
        next.history.emplace_back();
        entry = &next.history.back();
        entry->override_load = true;
    }
    entry->load = load;
    entry->outcome = outcome;
    entry->recorded_at = now_iso();
    entry->idempotency_key = idempotency_key;

    next.series.append(load, outcome);
    next.current = summarize(next.prior, next.series, next.config);
    entry->map_mu = next.current.map.mu_hat;
    entry->map_sigma = next.current.map.sigma_hat;
    if (next.current.moments) {
        entry->posterior_std_log10 = next.current.moments->std_log10;
        entry->posterior_mean_log10 = next.current.moments->mean_log10;
    }
    persist(next);
    slot->session = std::move(next);
    return snapshot(slot->session);
}

json SessionStore::get(const std::string& id) const {
    auto slot = find(id);
    std::shared_lock lock(slot->mutex);
    return snapshot(slot->session);
}

json SessionStore::close(const std::string& id) {
    auto slot = find(id);
    std::unique_lock lock(slot->mutex);
    if (slot->session.status == SessionStatus::Closed) return snapshot(slot->session);
    Session next = slot->session;
    next.status = SessionStatus::Closed;
    persist(next);
    slot->session = std::move(next);
    return snapshot(slot->session);
}

} // namespace fatigue::lab
