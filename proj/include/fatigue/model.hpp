#pragma once

#include <cstddef>
#include <string>
#include <string_view>
#include <vector>

namespace fatigue {

// Log-normal fatigue strength of a material. `mu_l` is the median load in N;
// `sigma_l` is the multiplicative scatter, so log10(strength) has standard
// deviation log10(sigma_l).
struct MaterialParams {
    double mu_l = 400.0;
    double sigma_l = 1.0715193052376064; // 10^0.03

    double log10_mu() const;
    double log10_sigma() const;

    // Throws DomainError unless mu_l > 0 and sigma_l > 1.
    void validate() const;
};

// Normal distribution over log10(mu_l); the form of a GP prediction and of
// the mean-strength prior.
struct PredictiveNormal {
    double mean_log10 = 0.0;
    double std_log10 = 1.0;

    double mode_load() const;
};

enum class Outcome { Failure, Runout };

std::string_view to_string(Outcome o) noexcept;
Outcome outcome_from_string(std::string_view s);

struct ExperimentRecord {
    double load = 0.0;
    Outcome outcome = Outcome::Runout;
    std::size_t index = 0;
};

// Append-only, ordered testing campaign. Indices are assigned on append.
class ExperimentSeries {
public:
    ExperimentSeries() = default;
    explicit ExperimentSeries(std::string material_id) : material_id_(std::move(material_id)) {}

    const ExperimentRecord& append(double load, Outcome outcome);

    const std::vector<ExperimentRecord>& records() const noexcept { return records_; }
    std::size_t size() const noexcept { return records_.size(); }
    bool empty() const noexcept { return records_.empty(); }
    const ExperimentRecord& operator[](std::size_t i) const { return records_[i]; }
    const ExperimentRecord& back() const { return records_.back(); }

    const std::string& material_id() const noexcept { return material_id_; }

    // First n records as a new series.
    ExperimentSeries prefix(std::size_t n) const;
    // This series followed by `other`, re-indexed.
    ExperimentSeries concat(const ExperimentSeries& other) const;

private:
    std::string material_id_;
    std::vector<ExperimentRecord> records_;
};

// Phi((log10 l - log10 mu_l) / log10 sigma_l).
double failure_probability(const MaterialParams& params, double load);

// log P(outcome | params) for one experiment, computed without forming 1 - Phi.
double experiment_log_likelihood(const MaterialParams& params, double load, Outcome outcome);

// Sum over the series of log Phi (failures) and log(1 - Phi) (runouts).
// Empty series -> 0. Zero-probability terms give -inf.
double series_log_likelihood(const ExperimentSeries& series, const MaterialParams& params);

} // namespace fatigue
