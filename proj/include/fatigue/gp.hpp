#pragma once

// Gaussian process regression from material descriptors to log10(mu_l).
//
// Targets are log10 mean fatigue strengths, standardised to zero mean and unit
// variance; the GP has zero prior mean. Inputs are encoded as
//   [z(v90), z(edge_hardness), z(load_ratio_r), onehot(load_type) x 3]
// with z-scores fitted on the training set.
//
// Kernels combine an ARD linear term
//   k_lin(x, x') = sum_d sigma_d^2 x_d x'_d
// with a stationary term of squared distance r^2 = |x - x'|^2:
//   RQ      (1 + r^2 / (2 alpha sigma_len^2))^(-alpha)
//   RBF     exp(-r^2 / (2 sigma_len^2))
//   Matern  (1 + sqrt5 r/l + 5 r^2 / (3 l^2)) exp(-sqrt5 r/l),  nu = 5/2
// either summed or multiplied. Observation noise is added to the diagonal.

#include "fatigue/model.hpp"

#include <Eigen/Cholesky>
#include <Eigen/Dense>

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace fatigue::gp {

enum class LoadType { Bending, Stress, Strain };

std::string_view to_string(LoadType t) noexcept;
LoadType load_type_from_string(std::string_view s);

struct MaterialFeatures {
    double v90 = 100.0;           // loaded volume, mm^3
    double edge_hardness = 300.0; // HV
    LoadType load_type = LoadType::Bending;
    double load_ratio_r = -1.0;

    void validate() const;
};

struct TrainingRow {
    MaterialFeatures features;
    double mu_l = 0.0; // N
};
using Dataset = std::vector<TrainingRow>;

enum class KernelKind {
    LinearPlusRQ,
    LinearPlusRBF,
    LinearPlusMatern52,
    LinearTimesRQ,
    LinearTimesRBF,
    LinearTimesMatern52,
    Linear, // ARD linear term only
};

std::string_view to_string(KernelKind k) noexcept;
KernelKind kernel_kind_from_string(std::string_view s);

// The six sum/product combinations compared in cross-validation.
std::vector<KernelKind> default_kernel_menu();

constexpr double kNoiseFloor = 1e-8;

struct KernelHyperparams {
    KernelKind kind = KernelKind::LinearPlusRQ;
    std::vector<double> sigma_d; // one per encoded input dimension
    double alpha = 1.0;          // RQ only
    double sigma_len = 1.0;
    double noise = 1e-2;         // variance, >= kNoiseFloor when fitted

    // Throws DomainError on negative/non-finite values or a sigma_d of the wrong length.
    void validate(std::size_t dim) const;

    static KernelHyperparams defaults(KernelKind kind, std::size_t dim);
};

// k(x, x') without the noise term. Throws DomainError on dimension mismatch.
double kernel_eval(const KernelHyperparams& hp, std::span<const double> x, std::span<const double> xp);

// Gram matrix of the rows of X (no noise).
Eigen::MatrixXd gram(const KernelHyperparams& hp, const Eigen::MatrixXd& X);

// Exact log marginal likelihood
//   -1/2 y^T (K + noise I)^-1 y - sum log diag(L) - n/2 log(2 pi)
// Returns -inf when the Cholesky factorisation fails.
double log_marginal_likelihood(const KernelHyperparams& hp, const Eigen::MatrixXd& X, const Eigen::VectorXd& y);

struct FitOptions {
    int restarts = 8;
    std::uint64_t seed = 0;
    std::size_t max_evaluations = 2000;
    bool fit_noise = true;
};

// Maximises the log marginal likelihood over log-transformed hyperparameters
// with multi-start Nelder-Mead: one start at `init`, the rest scattered around
// it. Throws ConditioningError if no start yields a positive definite matrix.
KernelHyperparams fit_hyperparams(const Eigen::MatrixXd& X, const Eigen::VectorXd& y, const KernelHyperparams& init,
                                  const FitOptions& options = {});

// Maps MaterialFeatures to encoded vectors. z-score constants come from fit().
class FeatureEncoder {
public:
    static constexpr std::size_t kDim = 6;

    FeatureEncoder() = default;
    FeatureEncoder(std::vector<double> means, std::vector<double> stds);

    static FeatureEncoder fit(const Dataset& data);

    Eigen::VectorXd encode(const MaterialFeatures& f) const;
    Eigen::MatrixXd encode(const Dataset& data) const;

    const std::vector<double>& means() const noexcept { return means_; }
    const std::vector<double>& stds() const noexcept { return stds_; }

private:
    // v90, edge_hardness, load_ratio_r
    std::vector<double> means_{0.0, 0.0, 0.0};
    std::vector<double> stds_{1.0, 1.0, 1.0};
};

// log10(mu_l) <-> standardised target.
struct TargetScaler {
    double mean = 0.0;
    double std = 1.0; // 1 for constant targets

    static TargetScaler fit(const Dataset& data);
    double encode(double mu_l) const;
    double decode(double z) const; // log10(mu_l)
};

struct StandardizedPrediction {
    double mean = 0.0;
    double variance = 0.0; // latent, without observation noise
};

// Trained GP. Immutable after construction; predictions are thread safe.
class GpModel {
public:
    // Factorises K + noise I for fixed hyperparameters. Throws ConditioningError.
    GpModel(Dataset data, FeatureEncoder encoder, TargetScaler scaler, KernelHyperparams hp);

    // Fits the encoder, the scaler and (from `init`) the hyperparameters.
    static GpModel train(const Dataset& data, const KernelHyperparams& init, const FitOptions& options = {});
    static GpModel train(const Dataset& data, KernelKind kind, const FitOptions& options = {});

    // Posterior at an encoded input, in standardised target units.
    StandardizedPrediction predict_encoded(const Eigen::VectorXd& x) const;

    // Normal over log10(mu_l). The std includes the fitted observation noise,
    // i.e. it describes a new material's mean strength rather than the latent
    // function alone.
    PredictiveNormal predict(const MaterialFeatures& f) const;

    double log_marginal_likelihood() const;

    const Dataset& data() const noexcept { return data_; }
    const FeatureEncoder& encoder() const noexcept { return encoder_; }
    const TargetScaler& scaler() const noexcept { return scaler_; }
    const KernelHyperparams& hyperparams() const noexcept { return hp_; }
    const Eigen::MatrixXd& inputs() const noexcept { return X_; }
    const Eigen::VectorXd& targets() const noexcept { return y_; }

private:
    Dataset data_;
    FeatureEncoder encoder_;
    TargetScaler scaler_;
    KernelHyperparams hp_;
    Eigen::MatrixXd X_;
    Eigen::VectorXd y_;
    Eigen::LLT<Eigen::MatrixXd> llt_;
    Eigen::VectorXd weights_; // (K + noise I)^-1 y
};

// Coefficient of determination. 0 when the observed values have zero variance.
double r_squared(std::span<const double> observed, std::span<const double> predicted);

// Held-out R^2 of `model` on `test`, in log10(mu_l) units.
double evaluate_r_squared(const GpModel& model, const Dataset& test);

struct Split {
    Dataset train;
    Dataset test;
};

// Seeded shuffle, then the first round(train_fraction * n) rows train.
Split train_test_split(const Dataset& data, double train_fraction, std::uint64_t seed);

struct CvEntry {
    KernelKind kind;
    int fold = 0;
    double r2 = 0.0;
};

struct CvReport {
    std::vector<CvEntry> entries;       // kernels x folds
    std::vector<KernelKind> kernels;
    std::vector<double> mean_r2;        // per kernel, same order
    KernelKind best = KernelKind::LinearPlusRQ;
    KernelHyperparams best_hyperparams; // refit on the whole dataset
};

// k-fold cross-validation with seeded fold assignment. Throws ConfigError if
// folds < 2 or any fold would have no test point.
CvReport cross_validate(const Dataset& data, const std::vector<KernelKind>& kernels, int folds, std::uint64_t seed,
                        const FitOptions& options = {});

struct SynthOptions {
    int n = 114;
    std::uint64_t seed = 0;
    double noise_std_log10 = 0.01;
};

// Synthetic stand-in for historical fatigue data. Features are drawn from
//   v90            log-uniform [10, 3000] mm^3
//   edge_hardness  uniform [150, 450] HV
//   load_type      uniform over the three types
//   load_ratio_r   uniform [-1, 0.5]
// and the target from
//   log10 mu_l = log10 400 + 0.8 log10(HV / 300) - 0.05 log10(v90 / 100)
//                + {Bending +0.05, Stress 0, Strain -0.04}
//                - 0.15 R - 0.08 R^2 + eps,   eps ~ N(0, noise_std_log10^2)
// Throws ConfigError for n < 10.
Dataset synthesize_training_data(const SynthOptions& options = {});

// Noise-free value of the generating function.
double synthetic_ground_truth_log10(const MaterialFeatures& f);

// Dataset CSV, header "v90,edge_hardness,load_type,load_ratio_r,mu_l".
std::string dataset_to_csv(const Dataset& data);
Dataset dataset_from_csv(std::string_view text);
Dataset load_dataset(const std::filesystem::path& path);
void save_dataset(const Dataset& data, const std::filesystem::path& path);

// Model JSON: training rows, hyperparameters and standardisation constants.
// The Cholesky factor is recomputed on load.
std::string model_to_json(const GpModel& model);
GpModel model_from_json(std::string_view text);
GpModel load_model(const std::filesystem::path& path);
void save_model(const GpModel& model, const std::filesystem::path& path);

} // namespace fatigue::gp
