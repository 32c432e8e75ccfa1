// fatigue-gp: synthetic data, GP training, cross-validation and prediction.
//
//   fatigue-gp synth --n 114 --seed 0 --out data.csv
//   fatigue-gp train --data data.csv --kernel linear+rq --out model.json
//   fatigue-gp cv --data data.csv --folds 10
//   fatigue-gp predict --model model.json --v90 120 --hardness 320 --load-type bending --r -1

#include "fatigue/errors.hpp"
#include "fatigue/gp.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <cmath>
#include <fstream>
#include <iostream>

using namespace fatigue;
using namespace fatigue::gp;
using nlohmann::json;

int main(int argc, char** argv) {
    CLI::App app{"Gaussian process prior for the mean fatigue strength"};
    app.require_subcommand(1);

    SynthOptions synth_opt;
    std::string synth_out = "synthetic.csv";
    auto* synth = app.add_subcommand("synth", "write a synthetic training dataset");
    synth->add_option("--n", synth_opt.n, "rows (>= 10)");
    synth->add_option("--seed", synth_opt.seed, "RNG seed");
    synth->add_option("--noise", synth_opt.noise_std_log10, "noise std of log10(mu_l)");
    synth->add_option("--out", synth_out, "CSV path");

    std::string train_data, train_kernel = "linear+rq", train_out = "gp_model.json";
    FitOptions fit;
    double split = 0.8;
    std::uint64_t split_seed = 0;
    auto* train = app.add_subcommand("train", "fit hyperparameters on the training split and save the model");
    train->add_option("--data", train_data, "dataset CSV")->required();
    train->add_option("--kernel", train_kernel, "kernel, e.g. linear+rq or linear*matern52");
    train->add_option("--restarts", fit.restarts, "optimiser restarts");
    train->add_option("--seed", fit.seed, "optimiser seed");
    train->add_option("--train-fraction", split, "train share of the 80/20 split; 1 trains on everything");
    train->add_option("--split-seed", split_seed, "split seed");
    train->add_option("--out", train_out, "model JSON path");

    std::string cv_data;
    int folds = 10;
    std::uint64_t cv_seed = 0;
    FitOptions cv_fit;
    cv_fit.restarts = 3;
    std::string cv_out;
    auto* cv = app.add_subcommand("cv", "80/20 split, k-fold CV over the kernel menu, held-out R^2 of the winner");
    cv->add_option("--data", cv_data, "dataset CSV")->required();
    cv->add_option("--folds", folds, "number of folds");
    cv->add_option("--seed", cv_seed, "split and fold seed");
    cv->add_option("--restarts", cv_fit.restarts, "optimiser restarts per fit");
    cv->add_option("--report", cv_out, "write the report as JSON");

    std::string model_path;
    MaterialFeatures f;
    std::string load_type = "bending";
    auto* predict = app.add_subcommand("predict", "predictive normal over log10(mu_l)");
    predict->add_option("--model", model_path, "model JSON")->required();
    predict->add_option("--v90", f.v90, "loaded volume, mm^3");
    predict->add_option("--hardness", f.edge_hardness, "edge hardness, HV");
    predict->add_option("--load-type", load_type, "bending|stress|strain");
    predict->add_option("--r", f.load_ratio_r, "load ratio R");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e) == 0 ? 0 : 2;
    }

    try {
        if (*synth) {
            save_dataset(synthesize_training_data(synth_opt), synth_out);
            std::cerr << "wrote " << synth_opt.n << " rows to " << synth_out << '\n';
        } else if (*train) {
            const auto data = load_dataset(train_data);
            const auto kind = kernel_kind_from_string(train_kernel);
            Dataset train_set = data, test_set;
            if (split < 1.0) {
                auto s = train_test_split(data, split, split_seed);
                train_set = std::move(s.train);
                test_set = std::move(s.test);
            }
            const auto model = GpModel::train(train_set, kind, fit);
            save_model(model, train_out);
            std::cout << json{{"kernel", train_kernel},
                              {"train_rows", train_set.size()},
                              {"log_marginal_likelihood", model.log_marginal_likelihood()},
                              {"noise", model.hyperparams().noise},
                              {"test_r2", test_set.empty() ? json(nullptr) : json(evaluate_r_squared(model, test_set))},
                              {"model", train_out}}
                             .dump(2)
                      << '\n';
        } else if (*cv) {
            const auto data = load_dataset(cv_data);
            const auto s = train_test_split(data, 0.8, cv_seed);
            cv_fit.seed = cv_seed;
            const auto report = cross_validate(s.train, default_kernel_menu(), folds, cv_seed, cv_fit);
            const auto best = GpModel(s.train, FeatureEncoder::fit(s.train), TargetScaler::fit(s.train),
                                      report.best_hyperparams);
            json entries = json::array();
            for (const auto& e : report.entries)
                entries.push_back({{"kernel", std::string(to_string(e.kind))}, {"fold", e.fold}, {"r2", e.r2}});
            json means = json::object();
            for (std::size_t i = 0; i < report.kernels.size(); ++i)
                means[std::string(to_string(report.kernels[i]))] = report.mean_r2[i];
            const json out{{"folds", folds},
                           {"entries", entries},
                           {"mean_r2", means},
                           {"best_kernel", std::string(to_string(report.best))},
                           {"held_out_r2", evaluate_r_squared(best, s.test)},
                           {"train_rows", s.train.size()},
                           {"test_rows", s.test.size()}};
            if (!cv_out.empty()) std::ofstream(cv_out) << out.dump(2) << '\n';
            std::cout << json{{"mean_r2", means},
                              {"best_kernel", out["best_kernel"]},
                              {"held_out_r2", out["held_out_r2"]}}
                             .dump(2)
                      << '\n';
        } else if (*predict) {
            const auto model = load_model(model_path);
            f.load_type = load_type_from_string(load_type);
            const auto p = model.predict(f);
            std::cout << json{{"mean_log10", p.mean_log10}, {"std_log10", p.std_log10}, {"mode_load", p.mode_load()}}
                             .dump(2)
                      << '\n';
        }
    } catch (const ConfigError& e) {
        std::cerr << "configuration error: " << e.what() << '\n';
        return 2;
    } catch (const DomainError& e) {
        std::cerr << "invalid input: " << e.what() << '\n';
        return 2;
    } catch (const ConditioningError& e) {
        std::cerr << "GP fit failed: " << e.what() << '\n';
        return 3;
    }
    return 0;
}
