#include "fatigue/bayes.hpp"

#include "fatigue/errors.hpp"
#include "fatigue/nelder_mead.hpp"
#include "fatigue/normal.hpp"
#include "fatigue/rng.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <sstream>

namespace fatigue {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr double kLogSqrt2Pi = 0.91893853320467274178;
// exp(x) underflows to 0 below about -745; points that far below the maximum
// carry no weight in any normalised quantity.
constexpr double kNegligibleLog = -700.0;

double log_sum_exp(std::span<const double> v) {
    double m = -kInf;
    for (double x : v) m = std::max(m, x);
    if (!std::isfinite(m)) return m;
    double s = 0.0;
    for (double x : v) s += std::exp(x - m);
    return m + std::log(s);
}

double trapezoid_weight(std::size_t i, std::size_t n) { return (i == 0 || i + 1 == n) ? 0.5 : 1.0; }

double outcome_log_prob(double load_log10, double mu_log10, double sigma_log10, Outcome o) {
    const double z = (load_log10 - mu_log10) / sigma_log10;
    return o == Outcome::Failure ? log_normal_cdf(z) : log_normal_cdf(-z);
}

} // namespace

// ---------------------------------------------------------------------------
// Prior

PriorSpec PriorSpec::from_width(double mean_load, double width, SigmaPrior sigma) {
    if (!(mean_load > 0.0)) throw DomainError("PriorSpec: prior mean load must be positive");
    if (!(width > 1.0) || !std::isfinite(width)) throw DomainError("PriorSpec: prior width must be > 1");
    PriorSpec p{{std::log10(mean_load), std::log10(width)}, sigma};
    p.validate();
    return p;
}

void PriorSpec::validate() const {
    if (!std::isfinite(mu_prior.mean_log10)) throw DomainError("PriorSpec: prior mean must be finite");
    if (!(mu_prior.std_log10 > 0.0) || !std::isfinite(mu_prior.std_log10))
        throw DomainError("PriorSpec: prior std must be positive");
    std::visit(
        [](const auto& s) {
            using T = std::decay_t<decltype(s)>;
            if constexpr (std::is_same_v<T, FixedSigma>) {
                if (!(s.value > 1.0)) throw DomainError("PriorSpec: fixed sigma must be > 1");
            } else if constexpr (std::is_same_v<T, UniformSigma>) {
                if (!(s.lo >= 0.0 && s.hi > s.lo)) throw DomainError("PriorSpec: uniform sigma needs 0 <= lo < hi");
            } else {
                if (!(s.shape > 0.0 && s.rate > 0.0)) throw DomainError("PriorSpec: gamma sigma needs shape, rate > 0");
            }
        },
        sigma_prior);
}

double PriorSpec::sigma_point() const {
    return std::visit(
        [](const auto& s) -> double {
            using T = std::decay_t<decltype(s)>;
            if constexpr (std::is_same_v<T, FixedSigma>) return s.value;
            else if constexpr (std::is_same_v<T, UniformSigma>) return std::pow(10.0, 0.5 * (s.lo + s.hi));
            else return std::pow(10.0, s.shape > 1.0 ? (s.shape - 1.0) / s.rate : s.shape / s.rate);
        },
        sigma_prior);
}

double PriorSpec::log_density_mu(double mu_log10) const {
    const double z = (mu_log10 - mu_prior.mean_log10) / mu_prior.std_log10;
    return -0.5 * z * z - std::log(mu_prior.std_log10) - kLogSqrt2Pi;
}

double PriorSpec::log_density_sigma(double sigma_l) const {
    return std::visit(
        [sigma_l](const auto& s) -> double {
            using T = std::decay_t<decltype(s)>;
            if constexpr (std::is_same_v<T, FixedSigma>) {
                return std::abs(sigma_l - s.value) <= 1e-12 * s.value ? 0.0 : -kInf;
            } else {
                const double x = std::log10(sigma_l);
                if constexpr (std::is_same_v<T, UniformSigma>) {
                    return (x >= s.lo && x <= s.hi) ? -std::log(s.hi - s.lo) : -kInf;
                } else {
                    if (!(x > 0.0)) return -kInf;
                    return s.shape * std::log(s.rate) - std::lgamma(s.shape) + (s.shape - 1.0) * std::log(x) -
                           s.rate * x;
                }
            }
        },
        sigma_prior);
}

double log_posterior(const PriorSpec& prior, const ExperimentSeries& series, double mu, double sigma) {
    if (!(mu > 0.0)) throw DomainError("log_posterior: mu must be positive");
    if (!(sigma > 1.0)) throw DomainError("log_posterior: sigma must be > 1");
    const double mu_log10 = std::log10(mu);
    double lp = prior.log_density_mu(mu_log10) + prior.log_density_sigma(sigma);
    if (lp == -kInf) return lp;
    const double s = std::log10(sigma);
    for (const auto& r : series.records()) lp += outcome_log_prob(std::log10(r.load), mu_log10, s, r.outcome);
    return lp;
}

// ---------------------------------------------------------------------------
// Grid

PosteriorGrid::PosteriorGrid(const PriorSpec& prior, std::size_t n_points, double sigma_l) {
    prior.validate();
    if (n_points < 3) throw DomainError("PosteriorGrid: need at least 3 points");
    if (!(sigma_l > 1.0)) throw DomainError("PosteriorGrid: sigma must be > 1");
    support_lo_ = prior.support_lo();
    support_hi_ = prior.support_hi();
    sigma_l_ = sigma_l;
    spacing_ = (support_hi_ - support_lo_) / static_cast<double>(n_points - 1);
    const double log_p_sigma = prior.log_density_sigma(sigma_l);
    mu_log10_.resize(n_points);
    log_values_.resize(n_points);
    for (std::size_t i = 0; i < n_points; ++i) {
        mu_log10_[i] = i + 1 == n_points ? support_hi_ : support_lo_ + spacing_ * static_cast<double>(i);
        log_values_[i] = prior.log_density_mu(mu_log10_[i]) + log_p_sigma;
    }
    if (finite_points() == 0) throw DegeneratePosterior("posterior grid: prior density is zero everywhere");
}

void PosteriorGrid::add_experiment(double load, Outcome outcome) {
    if (!(load > 0.0)) throw DomainError("PosteriorGrid: load must be positive");
    const double x = std::log10(load);
    const double s = std::log10(sigma_l_);
    for (std::size_t i = 0; i < mu_log10_.size(); ++i)
        log_values_[i] += outcome_log_prob(x, mu_log10_[i], s, outcome);
    if (finite_points() == 0)
        throw DegeneratePosterior("posterior grid: every point has zero posterior density; the prior support "
                                  "excludes the observed series (widen the prior)");
}

std::size_t PosteriorGrid::argmax() const {
    return static_cast<std::size_t>(std::max_element(log_values_.begin(), log_values_.end()) - log_values_.begin());
}

double PosteriorGrid::max_log_value() const { return log_values_[argmax()]; }

std::size_t PosteriorGrid::finite_points() const {
    return static_cast<std::size_t>(
        std::count_if(log_values_.begin(), log_values_.end(), [](double v) { return std::isfinite(v); }));
}

std::vector<double> PosteriorGrid::density() const {
    const double m = max_log_value();
    if (!std::isfinite(m)) throw DegeneratePosterior("posterior grid: no finite point");
    const std::size_t n = log_values_.size();
    std::vector<double> w(n);
    double mass = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        w[i] = std::exp(log_values_[i] - m);
        mass += trapezoid_weight(i, n) * w[i] * spacing_;
    }
    for (double& v : w) v /= mass;
    return w;
}

void PosteriorGrid::shift(double c) {
    for (double& v : log_values_) v += c;
}

std::string PosteriorGrid::to_csv() const {
    const auto dens = density();
    std::ostringstream out;
    out.precision(17);
    out << "mu_log10,posterior_density\n";
    for (std::size_t i = 0; i < dens.size(); ++i) out << mu_log10_[i] << ',' << dens[i] << '\n';
    return out.str();
}

PosteriorGrid evaluate_grid_at_sigma(const PriorSpec& prior, const ExperimentSeries& series, std::size_t n_points,
                                     double sigma_l) {
    PosteriorGrid grid(prior, n_points, sigma_l);
    for (const auto& r : series.records()) grid.add_experiment(r.load, r.outcome);
    return grid;
}

PosteriorGrid evaluate_grid(const PriorSpec& prior, const ExperimentSeries& series, std::size_t n_points) {
    const double sigma = prior.sigma_is_fixed() ? prior.sigma_point() : map_estimate(prior, series).sigma_hat;
    return evaluate_grid_at_sigma(prior, series, n_points, sigma);
}

// ---------------------------------------------------------------------------
// MAP

MapEstimate map_estimate(const PriorSpec& prior, const ExperimentSeries& series, int restarts,
                         const PosteriorGrid* grid_hint, MapBounds bounds) {
    prior.validate();
    if (restarts < 1) throw DomainError("map_estimate: restarts must be >= 1");

    std::vector<double> loads_log10;
    loads_log10.reserve(series.size());
    for (const auto& r : series.records()) loads_log10.push_back(std::log10(r.load));

    double lo = prior.support_lo(), hi = prior.support_hi();
    if (bounds == MapBounds::Extended) {
        for (double x : loads_log10) {
            lo = std::min(lo, x - 1.0);
            hi = std::max(hi, x + 1.0);
        }
    }

    // Candidate starts in log10(mu): prior mean, grid argmax, evenly spread
    // points over the support and the tested loads.
    std::vector<double> xs{prior.mu_prior.mean_log10};
    if (grid_hint && grid_hint->n_points() > 0) xs.push_back(grid_hint->mu_log10()[grid_hint->argmax()]);
    for (int k = 0; k < restarts; ++k)
        xs.push_back(prior.support_lo() +
                     (prior.support_hi() - prior.support_lo()) * (static_cast<double>(k) + 0.5) / restarts);
    xs.insert(xs.end(), loads_log10.begin(), loads_log10.end());

    const bool fixed = prior.sigma_is_fixed();
    double s_lo = 0.0, s_hi = 0.0;
    if (const auto* u = std::get_if<UniformSigma>(&prior.sigma_prior)) {
        s_lo = std::max(u->lo, 1e-6);
        s_hi = u->hi;
    } else if (!fixed) {
        s_lo = 1e-6;
        s_hi = 10.0;
    }
    const double fixed_s = fixed ? std::log10(prior.sigma_point()) : 0.0;
    const double log_p_sigma_fixed = fixed ? prior.log_density_sigma(prior.sigma_point()) : 0.0;

    // Negative log posterior over p = (log10 mu [, ln log10 sigma]).
    auto objective = [&](std::span<const double> p) -> double {
        const double x = p[0];
        if (!(x >= lo && x <= hi)) return kInf;
        double s = fixed_s;
        double lp = prior.log_density_mu(x);
        if (fixed) {
            lp += log_p_sigma_fixed;
        } else {
            s = std::exp(p[1]);
            if (!(s >= s_lo && s <= s_hi)) return kInf;
            lp += prior.log_density_sigma(std::pow(10.0, s));
        }
        for (std::size_t i = 0; i < loads_log10.size(); ++i)
            lp += outcome_log_prob(loads_log10[i], x, s, series[i].outcome);
        return -lp;
    };

    const double s0 = fixed ? 0.0 : std::log(std::clamp(std::log10(prior.sigma_point()), s_lo, s_hi));
    std::vector<std::pair<double, std::vector<double>>> scored;
    for (double x : xs) {
        std::vector<double> p{std::clamp(x, lo, hi)};
        if (!fixed) p.push_back(s0);
        scored.emplace_back(objective(p), std::move(p));
    }
    std::stable_sort(scored.begin(), scored.end(), [](const auto& a, const auto& b) { return a.first < b.first; });
    if (!std::isfinite(scored.front().first))
        throw DegeneratePosterior("map_estimate: posterior is zero at every start point");

    std::vector<std::vector<double>> starts;
    for (const auto& [v, p] : scored) {
        if (static_cast<int>(starts.size()) == restarts || !std::isfinite(v)) break;
        const bool dup = std::any_of(starts.begin(), starts.end(),
                                     [&](const auto& q) { return std::abs(q[0] - p[0]) < 1e-9; });
        if (!dup) starts.push_back(p);
    }

    optim::NelderMeadOptions opts;
    opts.initial_step = 0.05;
    opts.xatol = 1e-10;
    opts.fatol = 1e-12;
    opts.max_evaluations = fixed ? 2000 : 6000;
    const auto best = optim::multi_start_nelder_mead(objective, starts, opts);

    MapEstimate est;
    est.mu_hat = std::pow(10.0, best.x[0]);
    est.sigma_hat = fixed ? prior.sigma_point() : std::pow(10.0, std::exp(best.x[1]));
    est.log_posterior_at_map = -best.value;
    return est;
}

bool map_at_support_edge(const PriorSpec& prior, const MapEstimate& map, double tolerance) {
    const double x = std::log10(map.mu_hat);
    return x <= prior.support_lo() + tolerance || x >= prior.support_hi() - tolerance;
}

// ---------------------------------------------------------------------------
// Posterior moments

PosteriorMoments posterior_std(const PosteriorGrid& grid) {
    if (grid.n_points() == 0) throw DegeneratePosterior("posterior_std: empty grid");
    const double m = grid.max_log_value();
    if (!std::isfinite(m)) throw DegeneratePosterior("posterior_std: no finite grid point");
    const auto& xs = grid.mu_log10();
    const auto& lv = grid.log_values();
    const std::size_t n = xs.size();

    std::vector<double> w(n);
    double mass = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        w[i] = trapezoid_weight(i, n) * std::exp(lv[i] - m);
        mass += w[i];
    }
    // A lone finite end point still has positive weight; guard the pure-zero case.
    if (!(mass > 0.0)) {
        const double x = xs[grid.argmax()];
        return {x, 0.0, std::pow(10.0, x), 0.0};
    }

    double mean = 0.0, mean_load = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        if (w[i] == 0.0) continue;
        mean += w[i] * xs[i];
        mean_load += w[i] * std::pow(10.0, xs[i]);
    }
    mean /= mass;
    mean_load /= mass;
    double var = 0.0, var_load = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        if (w[i] == 0.0) continue;
        const double dx = xs[i] - mean;
        const double dl = std::pow(10.0, xs[i]) - mean_load;
        var += w[i] * dx * dx;
        var_load += w[i] * dl * dl;
    }
    return {mean, std::sqrt(var / mass), mean_load, std::sqrt(var_load / mass)};
}

// ---------------------------------------------------------------------------
// Entropy acquisition

EntropyAcquisition::EntropyAcquisition(const PosteriorGrid& grid, const MapEstimate& map,
                                       const EntropyOptions& options)
    : grid_(grid), map_(map), options_(options) {
    if (grid.n_points() < 3) throw DomainError("acquire_entropy: grid needs at least 3 points");
    if (!(map.mu_hat > 0.0) || !(map.sigma_hat > 1.0)) throw DomainError("acquire_entropy: invalid MAP estimate");
    if (options.estimator == EntropyEstimator::Sampled && options.n_samples == 0)
        throw DomainError("acquire_entropy: n_samples must be positive");

    const double m = grid.max_log_value();
    if (!std::isfinite(m)) throw DegeneratePosterior("acquire_entropy: current posterior is degenerate");
    const auto& lv = grid.log_values();
    const std::size_t n = lv.size();
    const double log_dx = std::log(grid.spacing());
    for (std::size_t i = 0; i < n; ++i) {
        if (lv[i] - m < kNegligibleLog) continue;
        active_.push_back(i);
        log_weight_.push_back(std::log(trapezoid_weight(i, n)) + log_dx + lv[i] - m);
    }

    // Current posterior mass per active point.
    std::vector<double> cdf(active_.size());
    double acc = 0.0;
    for (std::size_t k = 0; k < active_.size(); ++k) {
        acc += std::exp(log_weight_[k]);
        cdf[k] = acc;
    }
    if (options.estimator == EntropyEstimator::Sampled) {
        std::vector<double> counts(active_.size(), 0.0);
        SplitMix64 rng(options.seed);
        for (std::size_t i = 0; i < options.n_samples; ++i) {
            const double u = rng.uniform() * acc;
            auto it = std::upper_bound(cdf.begin(), cdf.end(), u);
            if (it == cdf.end()) --it;
            counts[static_cast<std::size_t>(it - cdf.begin())] += 1.0;
        }
        const double log_acc = std::log(acc);
        for (std::size_t k = 0; k < active_.size(); ++k) {
            if (counts[k] == 0.0) continue;
            sample_point_.push_back(active_[k]);
            sample_count_.push_back(counts[k]);
            sample_log_density_.push_back(log_weight_[k] - log_acc - std::log(trapezoid_weight(active_[k], n)) -
                                          log_dx);
        }
    }

    const auto moments = posterior_std(grid);
    current_std_ = moments.std_log10;
}

double EntropyAcquisition::branch_entropy(double load, Outcome outcome) const {
    const double x = std::log10(load);
    const double s = std::log10(grid_.sigma_l());
    const auto& xs = grid_.mu_log10();

    if (options_.estimator == EntropyEstimator::Sampled) {
        // Samples x_k come from the current posterior p. With likelihood L of
        // the hypothetical outcome, the branch posterior is q = p L / E_p[L];
        // both E_p[L] and the expectation under q use the same samples, the
        // latter through self-normalised weights w_k ~ L(x_k).
        const std::size_t m = sample_point_.size();
        std::vector<double> log_lik(m), log_iw(m);
        double n_total = 0.0;
        for (std::size_t j = 0; j < m; ++j) {
            log_lik[j] = outcome_log_prob(x, xs[sample_point_[j]], s, outcome);
            log_iw[j] = std::log(sample_count_[j]) + log_lik[j];
            n_total += sample_count_[j];
        }
        const double log_norm = log_sum_exp(log_iw);
        if (!std::isfinite(log_norm)) return kInf;
        const double log_evidence = log_norm - std::log(n_total);
        double h = 0.0;
        for (std::size_t j = 0; j < m; ++j) {
            const double w = std::exp(log_iw[j] - log_norm);
            if (w == 0.0) continue;
            h -= w * (sample_log_density_[j] + log_lik[j] - log_evidence);
        }
        return h;
    }

    const double log_dx = std::log(grid_.spacing());
    const std::size_t n = grid_.n_points();
    // log of (trapezoid * dx * unnormalised hypothetical density) per active point.
    std::vector<double> lw(active_.size());
    for (std::size_t k = 0; k < active_.size(); ++k)
        lw[k] = log_weight_[k] + outcome_log_prob(x, xs[active_[k]], s, outcome);
    const double log_z = log_sum_exp(lw);
    if (!std::isfinite(log_z)) return kInf;
    double h = 0.0;
    for (std::size_t k = 0; k < active_.size(); ++k) {
        const double mass = std::exp(lw[k] - log_z);
        if (mass == 0.0) continue;
        h -= mass * (lw[k] - log_z - std::log(trapezoid_weight(active_[k], n)) - log_dx);
    }
    return h;
}

double EntropyAcquisition::value(double load) const {
    if (!(load > 0.0)) throw DomainError("acquire_entropy: load must be positive");
    const double p_fail = failure_probability(MaterialParams{map_.mu_hat, map_.sigma_hat}, load);
    double v = 0.0;
    bool any = false;
    if (p_fail > 0.0) {
        const double h = branch_entropy(load, Outcome::Failure);
        if (std::isfinite(h)) {
            v -= h * p_fail;
            any = true;
        }
    }
    if (p_fail < 1.0) {
        const double h = branch_entropy(load, Outcome::Runout);
        if (std::isfinite(h)) {
            v -= h * (1.0 - p_fail);
            any = true;
        }
    }
    if (!any) throw DegeneratePosterior("acquire_entropy: both hypothetical posteriors are degenerate");
    return v;
}

double EntropyAcquisition::argmax() const {
    if (options_.search == AcquisitionSearch::Discrete) {
        std::vector<double> candidates = options_.candidates;
        if (candidates.empty())
            for (double x : grid_.mu_log10()) candidates.push_back(std::pow(10.0, x));
        double best = candidates.front(), best_v = -kInf;
        for (double l : candidates) {
            const double v = value(l);
            if (v > best_v) {
                best_v = v;
                best = l;
            }
        }
        return best;
    }

    const double lo = grid_.support_lo(), hi = grid_.support_hi();
    auto objective = [&](std::span<const double> p) -> double {
        if (!(p[0] >= lo && p[0] <= hi)) return kInf;
        return -value(std::pow(10.0, p[0]));
    };
    std::vector<std::vector<double>> starts{{std::clamp(std::log10(map_.mu_hat), lo, hi)}};
    const int spread = std::max(0, options_.restarts - 1);
    for (int k = 0; k < spread; ++k)
        starts.push_back({lo + (hi - lo) * (static_cast<double>(k) + 0.5) / spread});

    optim::NelderMeadOptions opts;
    opts.initial_step = std::max(current_std_, 10.0 * grid_.spacing());
    opts.xatol = 0.1 * grid_.spacing();
    opts.fatol = 1e-10;
    opts.max_evaluations = 400;
    const auto best = optim::multi_start_nelder_mead(objective, starts, opts);
    return std::pow(10.0, best.x[0]);
}

double acquire_entropy(const PosteriorGrid& grid, const MapEstimate& map, const EntropyOptions& options) {
    return EntropyAcquisition(grid, map, options).argmax();
}

double acquire_entropy(const PriorSpec& prior, const ExperimentSeries& series, const MapEstimate& map,
                       std::size_t grid_points, const EntropyOptions& options) {
    const auto grid = evaluate_grid_at_sigma(prior, series, grid_points, map.sigma_hat);
    return acquire_entropy(grid, map, options);
}

} // namespace fatigue
