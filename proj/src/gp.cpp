#include "fatigue/gp.hpp"

#include "fatigue/errors.hpp"
#include "fatigue/nelder_mead.hpp"
#include "fatigue/rng.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <numeric>
#include <random>

namespace fatigue::gp {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr double kLogLo = -14.0;
constexpr double kLogHi = 8.0;

bool uses_alpha(KernelKind k) { return k == KernelKind::LinearPlusRQ || k == KernelKind::LinearTimesRQ; }
bool uses_length(KernelKind k) { return k != KernelKind::Linear; }
bool is_product(KernelKind k) {
    return k == KernelKind::LinearTimesRQ || k == KernelKind::LinearTimesRBF || k == KernelKind::LinearTimesMatern52;
}

double stationary(KernelKind k, double r2, double alpha, double len) {
    switch (k) {
    case KernelKind::LinearPlusRQ:
    case KernelKind::LinearTimesRQ:
        return std::pow(1.0 + r2 / (2.0 * alpha * len * len), -alpha);
    case KernelKind::LinearPlusRBF:
    case KernelKind::LinearTimesRBF:
        return std::exp(-r2 / (2.0 * len * len));
    case KernelKind::LinearPlusMatern52:
    case KernelKind::LinearTimesMatern52: {
        const double s = std::sqrt(5.0 * r2) / len;
        return (1.0 + s + s * s / 3.0) * std::exp(-s);
    }
    case KernelKind::Linear: return 0.0;
    }
    return 0.0;
}

double kernel_raw(const KernelHyperparams& hp, const double* x, const double* xp, std::size_t dim) {
    double lin = 0.0, r2 = 0.0;
    for (std::size_t d = 0; d < dim; ++d) {
        lin += hp.sigma_d[d] * hp.sigma_d[d] * x[d] * xp[d];
        const double diff = x[d] - xp[d];
        r2 += diff * diff;
    }
    if (hp.kind == KernelKind::Linear) return lin;
    const double st = stationary(hp.kind, r2, hp.alpha, hp.sigma_len);
    return is_product(hp.kind) ? lin * st : lin + st;
}

// Vectorised Gram matrix; the per-pair kernel_raw stays the reference used
// for prediction and kernel_eval.
Eigen::MatrixXd gram_matrix(const KernelHyperparams& hp, const Eigen::MatrixXd& X, const Eigen::VectorXd& sq_norms) {
    Eigen::VectorXd w(X.cols());
    for (Eigen::Index d = 0; d < X.cols(); ++d) {
        const double s = hp.sigma_d[static_cast<std::size_t>(d)];
        w[d] = s * s;
    }
    const Eigen::MatrixXd lin = X * w.asDiagonal() * X.transpose();
    if (hp.kind == KernelKind::Linear) return lin;
    const Eigen::MatrixXd G = X * X.transpose();
    Eigen::MatrixXd st(X.rows(), X.rows());
    for (Eigen::Index j = 0; j < X.rows(); ++j)
        for (Eigen::Index i = j; i < X.rows(); ++i) {
            const double r2 = std::max(sq_norms[i] + sq_norms[j] - 2.0 * G(i, j), 0.0);
            st(i, j) = i == j ? 1.0 : stationary(hp.kind, r2, hp.alpha, hp.sigma_len);
            st(j, i) = st(i, j);
        }
    if (is_product(hp.kind)) return lin.cwiseProduct(st);
    return lin + st;
}

bool factor_ok(const Eigen::LLT<Eigen::MatrixXd>& llt) {
    if (llt.info() != Eigen::Success) return false;
    const auto diag = llt.matrixLLT().diagonal();
    for (Eigen::Index i = 0; i < diag.size(); ++i)
        if (!(diag[i] > 0.0) || !std::isfinite(diag[i])) return false;
    return true;
}

double lml_from_gram(Eigen::MatrixXd K, double noise, const Eigen::VectorXd& y) {
    K.diagonal().array() += noise;
    Eigen::LLT<Eigen::MatrixXd> llt(K);
    if (!factor_ok(llt)) return -kInf;
    const Eigen::VectorXd a = llt.solve(y);
    const double log_det_half = llt.matrixLLT().diagonal().array().log().sum();
    const double n = static_cast<double>(y.size());
    return -0.5 * y.dot(a) - log_det_half - 0.5 * n * std::log(2.0 * std::numbers::pi);
}

// Packing of hyperparameters into the optimiser's log-space vector.
struct Packing {
    KernelKind kind;
    std::size_t dim;
    bool fit_noise;
    double fixed_noise;

    std::vector<double> pack(const KernelHyperparams& hp) const {
        std::vector<double> p;
        for (double s : hp.sigma_d) p.push_back(std::log(std::max(s, 1e-6)));
        if (uses_alpha(kind)) p.push_back(std::log(hp.alpha));
        if (uses_length(kind)) p.push_back(std::log(hp.sigma_len));
        if (fit_noise) p.push_back(std::log(std::max(hp.noise - kNoiseFloor, 1e-6)));
        return p;
    }

    // false if any coordinate leaves the box
    bool unpack(std::span<const double> p, KernelHyperparams& hp) const {
        for (double v : p)
            if (!(v >= kLogLo && v <= kLogHi)) return false;
        hp.kind = kind;
        hp.sigma_d.resize(dim);
        std::size_t i = 0;
        for (std::size_t d = 0; d < dim; ++d) hp.sigma_d[d] = std::exp(p[i++]);
        if (uses_alpha(kind)) hp.alpha = std::exp(p[i++]);
        if (uses_length(kind)) hp.sigma_len = std::exp(p[i++]);
        hp.noise = fit_noise ? kNoiseFloor + std::exp(p[i++]) : fixed_noise;
        return true;
    }
};

double population_std(const std::vector<double>& v, double mean) {
    double s = 0.0;
    for (double x : v) s += (x - mean) * (x - mean);
    return std::sqrt(s / static_cast<double>(v.size()));
}

std::vector<std::size_t> shuffled_indices(std::size_t n, std::uint64_t seed) {
    std::vector<std::size_t> idx(n);
    std::iota(idx.begin(), idx.end(), 0);
    SplitMix64 rng(seed);
    for (std::size_t i = n; i > 1; --i) {
        const auto j = static_cast<std::size_t>(rng.uniform() * static_cast<double>(i));
        std::swap(idx[i - 1], idx[std::min(j, i - 1)]);
    }
    return idx;
}

} // namespace

std::string_view to_string(LoadType t) noexcept {
    switch (t) {
    case LoadType::Bending: return "bending";
    case LoadType::Stress: return "stress";
    case LoadType::Strain: return "strain";
    }
    return "unknown";
}

LoadType load_type_from_string(std::string_view s) {
    if (s == "bending" || s == "Bending") return LoadType::Bending;
    if (s == "stress" || s == "Stress") return LoadType::Stress;
    if (s == "strain" || s == "Strain") return LoadType::Strain;
    throw DomainError("unknown load type '" + std::string(s) + "'");
}

void MaterialFeatures::validate() const {
    if (!(v90 > 0.0) || !std::isfinite(v90)) throw DomainError("v90 must be positive");
    if (!(edge_hardness > 0.0) || !std::isfinite(edge_hardness)) throw DomainError("edge_hardness must be positive");
    if (!std::isfinite(load_ratio_r)) throw DomainError("load_ratio_r must be finite");
}

std::string_view to_string(KernelKind k) noexcept {
    switch (k) {
    case KernelKind::LinearPlusRQ: return "linear+rq";
    case KernelKind::LinearPlusRBF: return "linear+rbf";
    case KernelKind::LinearPlusMatern52: return "linear+matern52";
    case KernelKind::LinearTimesRQ: return "linear*rq";
    case KernelKind::LinearTimesRBF: return "linear*rbf";
    case KernelKind::LinearTimesMatern52: return "linear*matern52";
    case KernelKind::Linear: return "linear";
    }
    return "unknown";
}

KernelKind kernel_kind_from_string(std::string_view s) {
    for (auto k : {KernelKind::LinearPlusRQ, KernelKind::LinearPlusRBF, KernelKind::LinearPlusMatern52,
                   KernelKind::LinearTimesRQ, KernelKind::LinearTimesRBF, KernelKind::LinearTimesMatern52,
                   KernelKind::Linear})
        if (to_string(k) == s) return k;
    throw DomainError("unknown kernel '" + std::string(s) + "'");
}

std::vector<KernelKind> default_kernel_menu() {
    return {KernelKind::LinearPlusRQ,  KernelKind::LinearPlusRBF,  KernelKind::LinearPlusMatern52,
            KernelKind::LinearTimesRQ, KernelKind::LinearTimesRBF, KernelKind::LinearTimesMatern52};
}

void KernelHyperparams::validate(std::size_t dim) const {
    if (sigma_d.size() != dim)
        throw DomainError("sigma_d has " + std::to_string(sigma_d.size()) + " entries, expected " +
                          std::to_string(dim));
    for (double s : sigma_d)
        if (!(s >= 0.0) || !std::isfinite(s)) throw DomainError("sigma_d entries must be finite and >= 0");
    if (!(alpha > 0.0) || !std::isfinite(alpha)) throw DomainError("alpha must be positive");
    if (!(sigma_len > 0.0) || !std::isfinite(sigma_len)) throw DomainError("sigma_len must be positive");
    if (!(noise >= 0.0) || !std::isfinite(noise)) throw DomainError("noise must be finite and >= 0");
}

KernelHyperparams KernelHyperparams::defaults(KernelKind kind, std::size_t dim) {
    KernelHyperparams hp;
    hp.kind = kind;
    hp.sigma_d.assign(dim, 0.3);
    hp.alpha = 1.0;
    hp.sigma_len = 1.5;
    hp.noise = 0.05;
    return hp;
}

double kernel_eval(const KernelHyperparams& hp, std::span<const double> x, std::span<const double> xp) {
    if (x.size() != xp.size())
        throw DomainError("kernel_eval: dimension mismatch (" + std::to_string(x.size()) + " vs " +
                          std::to_string(xp.size()) + ")");
    if (hp.sigma_d.size() != x.size()) throw DomainError("kernel_eval: sigma_d length does not match inputs");
    return kernel_raw(hp, x.data(), xp.data(), x.size());
}

Eigen::MatrixXd gram(const KernelHyperparams& hp, const Eigen::MatrixXd& X) {
    const auto dim = static_cast<std::size_t>(X.cols());
    hp.validate(dim);
    return gram_matrix(hp, X, X.rowwise().squaredNorm());
}

double log_marginal_likelihood(const KernelHyperparams& hp, const Eigen::MatrixXd& X, const Eigen::VectorXd& y) {
    if (X.rows() != y.size()) throw DomainError("log_marginal_likelihood: inputs and targets differ in length");
    return lml_from_gram(gram(hp, X), hp.noise, y);
}

KernelHyperparams fit_hyperparams(const Eigen::MatrixXd& X, const Eigen::VectorXd& y, const KernelHyperparams& init,
                                  const FitOptions& options) {
    if (X.rows() < 2) throw ConfigError("fit_hyperparams: need at least 2 training points");
    if (X.rows() != y.size()) throw DomainError("fit_hyperparams: inputs and targets differ in length");
    if (options.restarts < 1) throw ConfigError("fit_hyperparams: restarts must be >= 1");
    const auto dim = static_cast<std::size_t>(X.cols());
    init.validate(dim);

    const Packing packing{init.kind, dim, options.fit_noise, init.noise};
    const Eigen::VectorXd sq_norms = X.rowwise().squaredNorm();

    KernelHyperparams scratch = init;
    auto objective = [&](std::span<const double> p) -> double {
        if (!packing.unpack(p, scratch)) return kInf;
        return -lml_from_gram(gram_matrix(scratch, X, sq_norms), scratch.noise, y);
    };

    std::vector<std::vector<double>> starts{packing.pack(init)};
    SplitMix64 rng(derive_seed(options.seed, 0x6770));
    for (int r = 1; r < options.restarts; ++r) {
        auto p = starts.front();
        for (double& v : p) v = std::clamp(v + 3.0 * (rng.uniform() - 0.5), kLogLo, kLogHi);
        starts.push_back(std::move(p));
    }

    optim::NelderMeadOptions nm;
    nm.initial_step = 0.5;
    nm.adaptive = true;
    nm.xatol = 1e-6;
    nm.fatol = 1e-9;
    nm.max_evaluations = options.max_evaluations;

    optim::NelderMeadResult best;
    best.value = kInf;
    for (const auto& s : starts) {
        auto r = optim::nelder_mead(objective, s, nm);
        if (r.value < best.value) best = std::move(r);
    }
    if (!std::isfinite(best.value))
        throw ConditioningError("fit_hyperparams: K + noise*I was not positive definite for any start; "
                                "raise the noise or remove duplicate inputs");
    // Restarting from the winner lets a stalled simplex finish.
    for (int k = 0; k < 2; ++k) {
        auto polished = optim::nelder_mead(objective, best.x, nm);
        if (!(polished.value < best.value)) break;
        best = std::move(polished);
    }
    KernelHyperparams out = init;
    packing.unpack(best.x, out);
    return out;
}

FeatureEncoder::FeatureEncoder(std::vector<double> means, std::vector<double> stds)
    : means_(std::move(means)), stds_(std::move(stds)) {
    if (means_.size() != 3 || stds_.size() != 3) throw DomainError("FeatureEncoder: expected 3 means and 3 stds");
    for (double s : stds_)
        if (!(s > 0.0)) throw DomainError("FeatureEncoder: stds must be positive");
}

FeatureEncoder FeatureEncoder::fit(const Dataset& data) {
    if (data.empty()) throw ConfigError("FeatureEncoder::fit: empty dataset");
    std::vector<std::vector<double>> cols(3);
    for (const auto& row : data) {
        cols[0].push_back(row.features.v90);
        cols[1].push_back(row.features.edge_hardness);
        cols[2].push_back(row.features.load_ratio_r);
    }
    std::vector<double> means, stds;
    for (const auto& c : cols) {
        const double m = std::accumulate(c.begin(), c.end(), 0.0) / static_cast<double>(c.size());
        const double s = population_std(c, m);
        means.push_back(m);
        stds.push_back(s > 0.0 ? s : 1.0);
    }
    return FeatureEncoder(std::move(means), std::move(stds));
}

Eigen::VectorXd FeatureEncoder::encode(const MaterialFeatures& f) const {
    f.validate();
    Eigen::VectorXd x = Eigen::VectorXd::Zero(kDim);
    x[0] = (f.v90 - means_[0]) / stds_[0];
    x[1] = (f.edge_hardness - means_[1]) / stds_[1];
    x[2] = (f.load_ratio_r - means_[2]) / stds_[2];
    x[3 + static_cast<int>(f.load_type)] = 1.0;
    return x;
}

Eigen::MatrixXd FeatureEncoder::encode(const Dataset& data) const {
    Eigen::MatrixXd X(static_cast<Eigen::Index>(data.size()), static_cast<Eigen::Index>(kDim));
    for (std::size_t i = 0; i < data.size(); ++i) X.row(static_cast<Eigen::Index>(i)) = encode(data[i].features);
    return X;
}

TargetScaler TargetScaler::fit(const Dataset& data) {
    if (data.empty()) throw ConfigError("TargetScaler::fit: empty dataset");
    std::vector<double> t;
    for (const auto& row : data) {
        if (!(row.mu_l > 0.0)) throw DomainError("mu_l must be positive");
        t.push_back(std::log10(row.mu_l));
    }
    TargetScaler s;
    s.mean = std::accumulate(t.begin(), t.end(), 0.0) / static_cast<double>(t.size());
    const double sd = population_std(t, s.mean);
    s.std = sd > 0.0 ? sd : 1.0;
    return s;
}

double TargetScaler::encode(double mu_l) const { return (std::log10(mu_l) - mean) / std; }
double TargetScaler::decode(double z) const { return mean + z * std; }

GpModel::GpModel(Dataset data, FeatureEncoder encoder, TargetScaler scaler, KernelHyperparams hp)
    : data_(std::move(data)), encoder_(std::move(encoder)), scaler_(scaler), hp_(std::move(hp)) {
    if (data_.empty()) throw ConfigError("GpModel: empty training set");
    hp_.validate(FeatureEncoder::kDim);
    X_ = encoder_.encode(data_);
    y_.resize(static_cast<Eigen::Index>(data_.size()));
    for (std::size_t i = 0; i < data_.size(); ++i) y_[static_cast<Eigen::Index>(i)] = scaler_.encode(data_[i].mu_l);
    Eigen::MatrixXd K = gram(hp_, X_);
    K.diagonal().array() += hp_.noise;
    llt_.compute(K);
    if (!factor_ok(llt_)) throw ConditioningError("GpModel: K + noise*I is not positive definite");
    weights_ = llt_.solve(y_);
}

GpModel GpModel::train(const Dataset& data, const KernelHyperparams& init, const FitOptions& options) {
    auto encoder = FeatureEncoder::fit(data);
    const auto scaler = TargetScaler::fit(data);
    const Eigen::MatrixXd X = encoder.encode(data);
    Eigen::VectorXd y(static_cast<Eigen::Index>(data.size()));
    for (std::size_t i = 0; i < data.size(); ++i) y[static_cast<Eigen::Index>(i)] = scaler.encode(data[i].mu_l);
    auto hp = fit_hyperparams(X, y, init, options);
    return GpModel(data, std::move(encoder), scaler, std::move(hp));
}

GpModel GpModel::train(const Dataset& data, KernelKind kind, const FitOptions& options) {
    return train(data, KernelHyperparams::defaults(kind, FeatureEncoder::kDim), options);
}

StandardizedPrediction GpModel::predict_encoded(const Eigen::VectorXd& x) const {
    if (x.size() != X_.cols()) throw DomainError("predict: encoded input has the wrong dimension");
    const auto dim = static_cast<std::size_t>(x.size());
    Eigen::VectorXd kstar(X_.rows());
    Eigen::VectorXd row(X_.cols());
    for (Eigen::Index i = 0; i < X_.rows(); ++i) {
        row = X_.row(i).transpose();
        kstar[i] = kernel_raw(hp_, x.data(), row.data(), dim);
    }
    const Eigen::VectorXd v = llt_.matrixL().solve(kstar);
    const double prior_var = kernel_raw(hp_, x.data(), x.data(), dim);
    return {kstar.dot(weights_), std::max(prior_var - v.squaredNorm(), 0.0)};
}

PredictiveNormal GpModel::predict(const MaterialFeatures& f) const {
    const auto p = predict_encoded(encoder_.encode(f));
    const double sd = std::sqrt(p.variance + hp_.noise) * scaler_.std;
    return {scaler_.decode(p.mean), std::max(sd, 1e-12)};
}

double GpModel::log_marginal_likelihood() const {
    const double log_det_half = llt_.matrixLLT().diagonal().array().log().sum();
    const double n = static_cast<double>(y_.size());
    return -0.5 * y_.dot(weights_) - log_det_half - 0.5 * n * std::log(2.0 * std::numbers::pi);
}

double r_squared(std::span<const double> observed, std::span<const double> predicted) {
    if (observed.size() != predicted.size()) throw DomainError("r_squared: length mismatch");
    if (observed.empty()) return 0.0;
    const double mean = std::accumulate(observed.begin(), observed.end(), 0.0) / static_cast<double>(observed.size());
    double ss_res = 0.0, ss_tot = 0.0;
    for (std::size_t i = 0; i < observed.size(); ++i) {
        ss_res += (observed[i] - predicted[i]) * (observed[i] - predicted[i]);
        ss_tot += (observed[i] - mean) * (observed[i] - mean);
    }
    if (!(ss_tot > 0.0)) return 0.0;
    return 1.0 - ss_res / ss_tot;
}

double evaluate_r_squared(const GpModel& model, const Dataset& test) {
    std::vector<double> obs, pred;
    for (const auto& row : test) {
        obs.push_back(std::log10(row.mu_l));
        pred.push_back(model.predict(row.features).mean_log10);
    }
    return r_squared(obs, pred);
}

Split train_test_split(const Dataset& data, double train_fraction, std::uint64_t seed) {
    if (!(train_fraction > 0.0 && train_fraction < 1.0)) throw ConfigError("train_fraction must be in (0, 1)");
    const auto idx = shuffled_indices(data.size(), seed);
    const auto n_train = static_cast<std::size_t>(std::lround(train_fraction * static_cast<double>(data.size())));
    Split s;
    for (std::size_t i = 0; i < idx.size(); ++i) (i < n_train ? s.train : s.test).push_back(data[idx[i]]);
    return s;
}

CvReport cross_validate(const Dataset& data, const std::vector<KernelKind>& kernels, int folds, std::uint64_t seed,
                        const FitOptions& options) {
    if (folds < 2) throw ConfigError("cross_validate: folds must be >= 2");
    if (data.size() < static_cast<std::size_t>(folds))
        throw ConfigError("cross_validate: " + std::to_string(data.size()) + " rows cannot fill " +
                          std::to_string(folds) + " folds");
    if (kernels.empty()) throw ConfigError("cross_validate: empty kernel menu");

    const auto idx = shuffled_indices(data.size(), seed);
    std::vector<int> fold_of(data.size());
    for (std::size_t i = 0; i < idx.size(); ++i) fold_of[idx[i]] = static_cast<int>(i % static_cast<std::size_t>(folds));

    CvReport report;
    report.kernels = kernels;
    for (auto kind : kernels) {
        double sum = 0.0;
        for (int f = 0; f < folds; ++f) {
            Dataset train, test;
            for (std::size_t i = 0; i < data.size(); ++i) (fold_of[i] == f ? test : train).push_back(data[i]);
            auto fold_options = options;
            fold_options.seed = derive_seed(options.seed, static_cast<std::uint64_t>(f), static_cast<std::uint64_t>(kind));
            const auto model = GpModel::train(train, kind, fold_options);
            const double r2 = evaluate_r_squared(model, test);
            report.entries.push_back({kind, f, r2});
            sum += r2;
        }
        report.mean_r2.push_back(sum / folds);
    }
    const auto best = std::max_element(report.mean_r2.begin(), report.mean_r2.end()) - report.mean_r2.begin();
    report.best = kernels[static_cast<std::size_t>(best)];
    report.best_hyperparams = GpModel::train(data, report.best, options).hyperparams();
    return report;
}

double synthetic_ground_truth_log10(const MaterialFeatures& f) {
    f.validate();
    double offset = 0.0;
    switch (f.load_type) {
    case LoadType::Bending: offset = 0.05; break;
    case LoadType::Stress: offset = 0.0; break;
    case LoadType::Strain: offset = -0.04; break;
    }
    const double r = f.load_ratio_r;
    return std::log10(400.0) + 0.8 * std::log10(f.edge_hardness / 300.0) - 0.05 * std::log10(f.v90 / 100.0) + offset -
           0.15 * r - 0.08 * r * r;
}

Dataset synthesize_training_data(const SynthOptions& options) {
    if (options.n < 10) throw ConfigError("synthesize_training_data: n must be >= 10");
    if (!(options.noise_std_log10 >= 0.0)) throw ConfigError("synthesize_training_data: noise must be >= 0");
    SplitMix64 rng(options.seed);
    std::normal_distribution<double> eps(0.0, 1.0);
    Dataset out;
    out.reserve(static_cast<std::size_t>(options.n));
    for (int i = 0; i < options.n; ++i) {
        MaterialFeatures f;
        f.v90 = std::pow(10.0, 1.0 + rng.uniform() * (std::log10(3000.0) - 1.0));
        f.edge_hardness = 150.0 + 300.0 * rng.uniform();
        f.load_type = static_cast<LoadType>(std::min<int>(2, static_cast<int>(rng.uniform() * 3.0)));
        f.load_ratio_r = -1.0 + 1.5 * rng.uniform();
        const double noise = options.noise_std_log10 > 0.0 ? options.noise_std_log10 * eps(rng) : 0.0;
        out.push_back({f, std::pow(10.0, synthetic_ground_truth_log10(f) + noise)});
    }
    return out;
}

} // namespace fatigue::gp
