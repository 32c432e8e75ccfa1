#include "fatigue/model.hpp"

#include "fatigue/errors.hpp"
#include "fatigue/normal.hpp"

#include <cmath>
#include <limits>

namespace fatigue {

double MaterialParams::log10_mu() const { return std::log10(mu_l); }
double MaterialParams::log10_sigma() const { return std::log10(sigma_l); }

double PredictiveNormal::mode_load() const { return std::pow(10.0, mean_log10); }

void MaterialParams::validate() const {
    if (!(mu_l > 0.0) || !std::isfinite(mu_l))
        throw DomainError("MaterialParams: mu_l must be positive and finite");
    if (!(sigma_l > 1.0) || !std::isfinite(sigma_l))
        throw DomainError("MaterialParams: sigma_l must be > 1");
}

std::string_view to_string(Outcome o) noexcept {
    return o == Outcome::Failure ? "failure" : "runout";
}

Outcome outcome_from_string(std::string_view s) {
    if (s == "failure") return Outcome::Failure;
    if (s == "runout") return Outcome::Runout;
    throw DomainError("unknown outcome '" + std::string(s) + "' (expected failure|runout)");
}

const ExperimentRecord& ExperimentSeries::append(double load, Outcome outcome) {
    if (!(load > 0.0) || !std::isfinite(load))
        throw DomainError("ExperimentSeries: load must be positive and finite");
    records_.push_back({load, outcome, records_.size()});
    return records_.back();
}

ExperimentSeries ExperimentSeries::prefix(std::size_t n) const {
    ExperimentSeries out(material_id_);
    for (std::size_t i = 0; i < n && i < records_.size(); ++i)
        out.append(records_[i].load, records_[i].outcome);
    return out;
}

ExperimentSeries ExperimentSeries::concat(const ExperimentSeries& other) const {
    ExperimentSeries out = *this;
    for (const auto& r : other.records()) out.append(r.load, r.outcome);
    return out;
}

namespace {

double standardized_load(const MaterialParams& params, double load) {
    params.validate();
    if (!(load > 0.0) || std::isnan(load))
        throw DomainError("failure_probability: load must be positive");
    if (std::isinf(load)) return std::numeric_limits<double>::infinity();
    return (std::log10(load) - params.log10_mu()) / params.log10_sigma();
}

} // namespace

double failure_probability(const MaterialParams& params, double load) {
    return normal_cdf(standardized_load(params, load));
}

double experiment_log_likelihood(const MaterialParams& params, double load, Outcome outcome) {
    const double z = standardized_load(params, load);
    return outcome == Outcome::Failure ? log_normal_cdf(z) : log_normal_cdf(-z);
}

double series_log_likelihood(const ExperimentSeries& series, const MaterialParams& params) {
    double total = 0.0;
    for (const auto& r : series.records())
        total += experiment_log_likelihood(params, r.load, r.outcome);
    return total;
}

} // namespace fatigue
