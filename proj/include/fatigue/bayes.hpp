#pragma once

// Posterior over the fatigue strength parameters given a prior and a series of
// failures/runouts:
//
//   g(mu, sigma) = p(mu) p(sigma) prod_failures Phi(l_i) prod_runouts (1 - Phi(l_j))
//
// with Phi the log-normal failure probability of model.hpp. mu is handled in
// log10 space throughout; the prior over log10(mu) is normal.
//
// Everything here is evaluated in log space. A grid over log10(mu) spanning
// prior mean +/- 2 prior std carries the posterior for moments and for the
// entropy acquisition; MAP estimates come from multi-start Nelder-Mead.

#include "fatigue/model.hpp"

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <variant>
#include <vector>

namespace fatigue {

// sigma_l known in advance (the usual lab setting).
struct FixedSigma {
    double value = 1.0715193052376064;
};
// Uniform over log10(sigma_l) in [lo, hi], 0 <= lo < hi.
struct UniformSigma {
    double lo = 0.005;
    double hi = 0.2;
};
// Gamma(shape, rate) over log10(sigma_l).
struct GammaSigma {
    double shape = 2.0;
    double rate = 40.0;
};
using SigmaPrior = std::variant<FixedSigma, UniformSigma, GammaSigma>;

struct PriorSpec {
    PredictiveNormal mu_prior;
    SigmaPrior sigma_prior = FixedSigma{};

    // Prior centred on `mean_load` N whose std in log10 space is log10(width),
    // so width 10 means one decade.
    static PriorSpec from_width(double mean_load, double width, SigmaPrior sigma = FixedSigma{});

    void validate() const;

    double support_lo() const { return mu_prior.mean_log10 - 2.0 * mu_prior.std_log10; }
    double support_hi() const { return mu_prior.mean_log10 + 2.0 * mu_prior.std_log10; }

    bool sigma_is_fixed() const { return std::holds_alternative<FixedSigma>(sigma_prior); }
    // Fixed value, or the prior mode/centre for distributional priors.
    double sigma_point() const;

    double log_density_mu(double mu_log10) const;
    double log_density_sigma(double sigma_l) const;
};

// log g(mu, sigma). Throws DomainError unless mu > 0 and sigma > 1; -inf is a
// legitimate return value.
double log_posterior(const PriorSpec& prior, const ExperimentSeries& series, double mu, double sigma);

// Unnormalised log posterior over an equidistant log10(mu) grid at fixed sigma.
class PosteriorGrid {
public:
    PosteriorGrid() = default;
    PosteriorGrid(const PriorSpec& prior, std::size_t n_points, double sigma_l);

    // Adds the likelihood term of one more experiment to every grid point.
    // Throws DegeneratePosterior if no point stays finite.
    void add_experiment(double load, Outcome outcome);

    double support_lo() const noexcept { return support_lo_; }
    double support_hi() const noexcept { return support_hi_; }
    double sigma_l() const noexcept { return sigma_l_; }
    double spacing() const noexcept { return spacing_; }
    std::size_t n_points() const noexcept { return mu_log10_.size(); }
    const std::vector<double>& mu_log10() const noexcept { return mu_log10_; }
    const std::vector<double>& log_values() const noexcept { return log_values_; }

    std::size_t argmax() const;
    double max_log_value() const;
    std::size_t finite_points() const;

    // Density over log10(mu) normalised with trapezoidal weights.
    std::vector<double> density() const;

    // Shifts every log value by `c`. Used to check normalisation invariance.
    void shift(double c);

    // "mu_log10,posterior_density" rows.
    std::string to_csv() const;

private:
    double support_lo_ = 0.0;
    double support_hi_ = 0.0;
    double spacing_ = 0.0;
    double sigma_l_ = 0.0;
    std::vector<double> mu_log10_;
    std::vector<double> log_values_;
};

// Grid over prior mean +/- 2 prior std. A fixed sigma prior is used as is; a
// distributional one is profiled at its MAP value.
PosteriorGrid evaluate_grid(const PriorSpec& prior, const ExperimentSeries& series,
                            std::size_t n_points = 100000);
PosteriorGrid evaluate_grid_at_sigma(const PriorSpec& prior, const ExperimentSeries& series,
                                     std::size_t n_points, double sigma_l);

struct MapEstimate {
    double mu_hat = 0.0;    // N
    double sigma_hat = 0.0; // multiplicative, > 1
    double log_posterior_at_map = 0.0;
};

// Where the optimiser may place mu_hat.
enum class MapBounds {
    PriorSupport, // prior mean +/- 2 prior std, the domain the grid represents
    Extended,     // the support widened to one decade beyond every tested load
};

// Multi-start Nelder-Mead on log10(mu) (and log(log10 sigma) for distributional
// sigma priors). If `grid_hint` is given its argmax is one of the starts, so
// the result never falls below the grid maximum.
//
// With PriorSupport bounds a tight prior far from the data pins mu_hat to the
// support edge; see map_at_support_edge().
MapEstimate map_estimate(const PriorSpec& prior, const ExperimentSeries& series, int restarts = 8,
                         const PosteriorGrid* grid_hint = nullptr, MapBounds bounds = MapBounds::PriorSupport);

// True when mu_hat sits within `tolerance` (log10 units) of the prior support
// boundary, i.e. the data pull the estimate out of the region the prior covers.
bool map_at_support_edge(const PriorSpec& prior, const MapEstimate& map, double tolerance = 1e-6);

struct PosteriorMoments {
    double mean_log10 = 0.0;
    double std_log10 = 0.0;
    double mean_load = 0.0; // N
    double std_load = 0.0;  // N
};

// Mean and standard deviation of the normalised grid posterior, trapezoidal
// weights. Throws DegeneratePosterior if no grid point is finite.
PosteriorMoments posterior_std(const PosteriorGrid& grid);

enum class EntropyEstimator {
    // x_k drawn from the current posterior, reweighted by the branch
    // likelihood: -sum_k w_k log p_hyp(x_k) with w_k ~ lik(x_k). The
    // normaliser of p_hyp is estimated from the same samples, so the cost is
    // independent of the grid size.
    Sampled,
    ExactGrid, // -sum w_i p_i log p_i on the grid
};

enum class AcquisitionSearch {
    Continuous, // multi-start Nelder-Mead over log10(load) within the grid support
    Discrete,   // exhaustive scan of `candidates` (grid points when empty)
};

struct EntropyOptions {
    std::size_t n_samples = 10000;
    EntropyEstimator estimator = EntropyEstimator::Sampled;
    AcquisitionSearch search = AcquisitionSearch::Continuous;
    int restarts = 8;
    std::uint64_t seed = 0;
    std::vector<double> candidates; // loads in N, discrete search only
};

// Probability-weighted entropy acquisition on a fixed current posterior grid.
// Sample positions are drawn once at construction, so value() is a
// deterministic, smooth function of the load.
class EntropyAcquisition {
public:
    EntropyAcquisition(const PosteriorGrid& grid, const MapEstimate& map, const EntropyOptions& options = {});

    // -H(failure branch) * Phi_map(l) - H(runout branch) * (1 - Phi_map(l)).
    double value(double load) const;

    // Entropy (nats, log10(mu) units) of the renormalised hypothetical
    // posterior after observing `outcome` at `load`.
    double branch_entropy(double load, Outcome outcome) const;

    // Maximising load per the configured search mode.
    double argmax() const;

private:
    const PosteriorGrid& grid_;
    MapEstimate map_;
    EntropyOptions options_;
    std::vector<std::size_t> active_;   // grid indices with non-zero weight
    std::vector<double> log_weight_;    // log(trapezoid * spacing) + log value - max, per active point
    std::vector<std::size_t> sample_point_;  // distinct sampled grid indices
    std::vector<double> sample_count_;       // multiplicity of each
    std::vector<double> sample_log_density_; // normalised current log density there
    double current_std_ = 0.0;
};

double acquire_entropy(const PosteriorGrid& grid, const MapEstimate& map, const EntropyOptions& options = {});

// Convenience form that builds the current grid itself.
double acquire_entropy(const PriorSpec& prior, const ExperimentSeries& series, const MapEstimate& map,
                       std::size_t grid_points, const EntropyOptions& options = {});

// The current MAP estimate of mu is the next load.
inline double acquire_map(const MapEstimate& map) { return map.mu_hat; }

} // namespace fatigue
