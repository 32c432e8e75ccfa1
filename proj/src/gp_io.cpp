#include "fatigue/errors.hpp"
#include "fatigue/gp.hpp"

#include <json.hpp>

#include <fstream>
#include <sstream>

namespace fatigue::gp {

namespace {

using nlohmann::json;

std::string read_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ConfigError("cannot open " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void write_file(const std::filesystem::path& path, const std::string& text) {
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary);
    if (!out) throw ConfigError("cannot write " + path.string());
    out << text;
}

std::string trim(std::string s) {
    const auto b = s.find_first_not_of(" \t\r");
    const auto e = s.find_last_not_of(" \t\r");
    return b == std::string::npos ? std::string{} : s.substr(b, e - b + 1);
}

double parse_double(const std::string& s, std::size_t line) {
    try {
        std::size_t used = 0;
        const double v = std::stod(s, &used);
        if (used != s.size()) throw std::invalid_argument(s);
        return v;
    } catch (const std::exception&) {
        throw ConfigError("line " + std::to_string(line) + ": '" + s + "' is not a number");
    }
}

json features_json(const MaterialFeatures& f) {
    return {{"v90", f.v90},
            {"edge_hardness", f.edge_hardness},
            {"load_type", std::string(to_string(f.load_type))},
            {"load_ratio_r", f.load_ratio_r}};
}

} // namespace

std::string dataset_to_csv(const Dataset& data) {
    std::ostringstream out;
    out.precision(17);
    out << "v90,edge_hardness,load_type,load_ratio_r,mu_l\n";
    for (const auto& r : data)
        out << r.features.v90 << ',' << r.features.edge_hardness << ',' << to_string(r.features.load_type) << ','
            << r.features.load_ratio_r << ',' << r.mu_l << '\n';
    return out.str();
}

Dataset dataset_from_csv(std::string_view text) {
    std::istringstream in{std::string(text)};
    std::string line;
    std::size_t line_no = 0;
    Dataset out;
    bool header = true;
    while (std::getline(in, line)) {
        ++line_no;
        line = trim(line);
        if (line.empty()) continue;
        if (header) {
            if (line != "v90,edge_hardness,load_type,load_ratio_r,mu_l")
                throw ConfigError("dataset header must be v90,edge_hardness,load_type,load_ratio_r,mu_l");
            header = false;
            continue;
        }
        std::vector<std::string> cells;
        std::stringstream ls(line);
        std::string cell;
        while (std::getline(ls, cell, ',')) cells.push_back(trim(cell));
        if (cells.size() != 5) throw ConfigError("line " + std::to_string(line_no) + ": expected 5 columns");
        TrainingRow row;
        row.features.v90 = parse_double(cells[0], line_no);
        row.features.edge_hardness = parse_double(cells[1], line_no);
        row.features.load_type = load_type_from_string(cells[2]);
        row.features.load_ratio_r = parse_double(cells[3], line_no);
        row.mu_l = parse_double(cells[4], line_no);
        row.features.validate();
        if (!(row.mu_l > 0.0)) throw ConfigError("line " + std::to_string(line_no) + ": mu_l must be positive");
        out.push_back(row);
    }
    if (header) throw ConfigError("dataset is empty");
    return out;
}

Dataset load_dataset(const std::filesystem::path& path) { return dataset_from_csv(read_file(path)); }

void save_dataset(const Dataset& data, const std::filesystem::path& path) { write_file(path, dataset_to_csv(data)); }

std::string model_to_json(const GpModel& model) {
    json rows = json::array();
    for (const auto& r : model.data()) rows.push_back({{"features", features_json(r.features)}, {"mu_l", r.mu_l}});
    const auto& hp = model.hyperparams();
    json j{{"format", "fatigue-gp/1"},
           {"kernel",
            {{"kind", std::string(to_string(hp.kind))},
             {"sigma_d", hp.sigma_d},
             {"alpha", hp.alpha},
             {"sigma_len", hp.sigma_len},
             {"noise", hp.noise}}},
           {"encoder", {{"means", model.encoder().means()}, {"stds", model.encoder().stds()}}},
           {"target", {{"mean", model.scaler().mean}, {"std", model.scaler().std}}},
           {"data", rows}};
    return j.dump(2);
}

GpModel model_from_json(std::string_view text) {
    try {
        const json j = json::parse(text);
        Dataset data;
        for (const auto& r : j.at("data")) {
            TrainingRow row;
            const auto& f = r.at("features");
            row.features.v90 = f.at("v90").get<double>();
            row.features.edge_hardness = f.at("edge_hardness").get<double>();
            row.features.load_type = load_type_from_string(f.at("load_type").get<std::string>());
            row.features.load_ratio_r = f.at("load_ratio_r").get<double>();
            row.mu_l = r.at("mu_l").get<double>();
            data.push_back(row);
        }
        const auto& k = j.at("kernel");
        KernelHyperparams hp;
        hp.kind = kernel_kind_from_string(k.at("kind").get<std::string>());
        hp.sigma_d = k.at("sigma_d").get<std::vector<double>>();
        hp.alpha = k.at("alpha").get<double>();
        hp.sigma_len = k.at("sigma_len").get<double>();
        hp.noise = k.at("noise").get<double>();
        FeatureEncoder enc(j.at("encoder").at("means").get<std::vector<double>>(),
                           j.at("encoder").at("stds").get<std::vector<double>>());
        TargetScaler ts{j.at("target").at("mean").get<double>(), j.at("target").at("std").get<double>()};
        return GpModel(std::move(data), std::move(enc), ts, std::move(hp));
    } catch (const json::exception& e) {
        throw ConfigError(std::string("malformed GP model JSON: ") + e.what());
    }
}

GpModel load_model(const std::filesystem::path& path) { return model_from_json(read_file(path)); }

void save_model(const GpModel& model, const std::filesystem::path& path) { write_file(path, model_to_json(model)); }

} // namespace fatigue::gp
