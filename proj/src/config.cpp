#include "asgdro/config.hpp"

#include <algorithm>
#include <cctype>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "asgdro/errors.hpp"

namespace asgdro::harness {

namespace {

using nlohmann::json;

enum class KeyType { String, Uint, Double, UintList, DoubleList };

const std::map<std::string, KeyType>& schema() {
    static const std::map<std::string, KeyType> s{
        {"dataset.kind", KeyType::String},
        {"dataset.path", KeyType::String},
        {"dataset.n_train", KeyType::Uint},
        {"dataset.n_val", KeyType::Uint},
        {"dataset.n_test", KeyType::Uint},
        {"dataset.spurious_ratio_train", KeyType::Double},
        {"dataset.spurious_ratio_test", KeyType::Double},
        {"dataset.label_noise", KeyType::Double},
        {"dataset.d_strong_inv", KeyType::Uint},
        {"dataset.d_weak_inv", KeyType::Uint},
        {"dataset.d_spurious", KeyType::Uint},
        {"dataset.strong_margin", KeyType::Double},
        {"dataset.weak_margin", KeyType::Double},
        {"dataset.spurious_margin", KeyType::Double},
        {"dataset.noise_std", KeyType::Double},
        {"dataset.strong_noise_std", KeyType::Double},
        {"dataset.weak_noise_scale", KeyType::Double},
        {"model.hidden_widths", KeyType::UintList},
        {"model.activation", KeyType::String},
        {"optim.algorithm", KeyType::String},
        {"optim.eta", KeyType::Double},
        {"optim.gamma", KeyType::Double},
        {"optim.rho", KeyType::Double},
        {"optim.normalizer", KeyType::String},
        {"optim.xi", KeyType::Double},
        {"optim.adjustment_C", KeyType::Double},
        {"optim.clip_norm", KeyType::Double},
        {"optim.weight_decay", KeyType::Double},
        {"train.epochs", KeyType::Uint},
        {"train.batch_size", KeyType::Uint},
        {"train.eval_every", KeyType::Uint},
        {"train.seeds", KeyType::UintList},
        {"train.out_dir", KeyType::String},
        {"spectrum.tol", KeyType::Double},
        {"spectrum.max_iter", KeyType::Uint},
        {"spectrum.seed", KeyType::Uint},
    };
    return s;
}

const std::vector<std::string>& sweepable() {
    static const std::vector<std::string> keys{"eta", "gamma", "rho", "xi", "adjustment_C", "clip_norm",
                                               "weight_decay"};
    return keys;
}

std::string trim(const std::string& s) {
    auto b = s.find_first_not_of(" \t\r\n");
    if (b == std::string::npos) return "";
    auto e = s.find_last_not_of(" \t\r\n");
    return s.substr(b, e - b + 1);
}

std::vector<std::string> split_list(const std::string& v) {
    std::vector<std::string> out;
    std::stringstream ss(v);
    std::string item;
    while (std::getline(ss, item, ',')) {
        item = trim(item);
        if (!item.empty()) out.push_back(item);
    }
    return out;
}

double parse_double(const std::string& key, const std::string& v) {
    try {
        std::size_t used = 0;
        const double d = std::stod(v, &used);
        if (used != v.size()) throw std::invalid_argument(v);
        return d;
    } catch (const std::exception&) {
        throw ConfigError("key '" + key + "': expected a number, got '" + v + "'");
    }
}

std::uint64_t parse_uint(const std::string& key, const std::string& v) {
    if (v.empty() || !std::all_of(v.begin(), v.end(), [](unsigned char c) { return std::isdigit(c); }))
        throw ConfigError("key '" + key + "': expected a nonnegative integer, got '" + v + "'");
    return std::stoull(v);
}

json typed_value(const std::string& key, KeyType type, const std::string& v) {
    switch (type) {
        case KeyType::String: return v;
        case KeyType::Uint: return parse_uint(key, v);
        case KeyType::Double: return parse_double(key, v);
        case KeyType::UintList: {
            json arr = json::array();
            for (const auto& item : split_list(v)) arr.push_back(parse_uint(key, item));
            return arr;
        }
        case KeyType::DoubleList: {
            json arr = json::array();
            for (const auto& item : split_list(v)) arr.push_back(parse_double(key, item));
            return arr;
        }
    }
    return v;
}

template <typename T>
void read(const json& section, const char* key, T& dst) {
    if (section.contains(key)) dst = section.at(key).get<T>();
}

void format_canonical(const json& j, std::string& out) {
    switch (j.type()) {
        case json::value_t::object: {
            out += '{';
            bool first = true;
            for (auto it = j.begin(); it != j.end(); ++it) {
                if (!first) out += ',';
                first = false;
                out += json(it.key()).dump();
                out += ':';
                format_canonical(it.value(), out);
            }
            out += '}';
            break;
        }
        case json::value_t::array: {
            out += '[';
            for (std::size_t i = 0; i < j.size(); ++i) {
                if (i) out += ',';
                format_canonical(j[i], out);
            }
            out += ']';
            break;
        }
        case json::value_t::number_float: out += format_double(j.get<double>()); break;
        default: out += j.dump(); break;
    }
}

}  // namespace

std::string format_double(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

std::string to_string(Algorithm a) {
    switch (a) {
        case Algorithm::ERM: return "erm";
        case Algorithm::SAM: return "sam";
        case Algorithm::ASAM: return "asam";
        case Algorithm::GDRO: return "gdro";
        case Algorithm::ASGDRO: return "asgdro";
    }
    return "erm";
}

Algorithm algorithm_from_string(const std::string& name) {
    if (name == "erm") return Algorithm::ERM;
    if (name == "sam") return Algorithm::SAM;
    if (name == "asam") return Algorithm::ASAM;
    if (name == "gdro") return Algorithm::GDRO;
    if (name == "asgdro") return Algorithm::ASGDRO;
    throw ConfigError("unknown algorithm '" + name + "'");
}

bool uses_groups(Algorithm a) { return a == Algorithm::GDRO || a == Algorithm::ASGDRO; }

void ExperimentConfig::validate() const {
    if (epochs < 1) throw ConfigError("train.epochs must be at least 1");
    if (seeds.empty()) throw ConfigError("train.seeds must not be empty");
    if (batch_size < 1) throw ConfigError("train.batch_size must be positive");
    if (eval_every < 1) throw ConfigError("train.eval_every must be positive");
    if (uses_groups(algorithm) && batch_size < 4) throw ConfigError("group algorithms need batch_size >= group count");
    if (dataset == DatasetKind::File && dataset_path.empty()) throw ConfigError("dataset.path is required for file datasets");
    for (auto w : hidden_widths)
        if (w == 0) throw ConfigError("model.hidden_widths must be positive");
    try {
        optim.validate();
        if (dataset != DatasetKind::File) shift.validate();
    } catch (const std::invalid_argument& e) {
        throw ConfigError(e.what());
    }
    if ((algorithm == Algorithm::SAM || algorithm == Algorithm::ASAM) && !(optim.rho > 0.0))
        throw ConfigError("sam/asam need optim.rho > 0");
    for (const auto& [key, values] : sweep) {
        if (std::find(sweepable().begin(), sweepable().end(), key) == sweepable().end())
            throw ConfigError("sweep over unsupported key '" + key + "'");
        if (values.empty()) throw ConfigError("sweep." + key + " is empty");
    }
    if (!(spectrum.tol > 0.0) || spectrum.max_iter == 0) throw ConfigError("invalid spectrum settings");
}

std::vector<std::string> ExperimentConfig::warnings() const {
    std::vector<std::string> w;
    if (!uses_groups(algorithm)) {
        if (optim.adjustment_C > 0.0) w.push_back("optim.adjustment_C is ignored by " + to_string(algorithm));
    }
    if ((algorithm == Algorithm::ERM || algorithm == Algorithm::GDRO) && optim.rho > 0.0)
        w.push_back("optim.rho is ignored by " + to_string(algorithm));
    return w;
}

ModelSpec ExperimentConfig::model_for(std::size_t input_dim, std::size_t classes) const {
    ModelSpec spec;
    spec.layer_widths.push_back(input_dim);
    for (auto h : hidden_widths) spec.layer_widths.push_back(h);
    spec.layer_widths.push_back(classes);
    spec.activation = activation;
    spec.validate();
    return spec;
}

ExperimentConfig config_from_json(const json& j) {
    try {
        if (!j.is_object()) throw ConfigError("config must be an object");
        for (auto it = j.begin(); it != j.end(); ++it) {
            const std::string section = it.key();
            if (!it.value().is_object()) throw ConfigError("section '" + section + "' must be an object");
            for (auto kt = it.value().begin(); kt != it.value().end(); ++kt) {
                const std::string full = section + "." + kt.key();
                if (section == "sweep") continue;
                if (!schema().count(full)) throw ConfigError("unknown config key '" + full + "'");
            }
        }
        ExperimentConfig cfg;
        const json empty = json::object();
        const json& ds = j.contains("dataset") ? j.at("dataset") : empty;
        const json& model = j.contains("model") ? j.at("model") : empty;
        const json& optim = j.contains("optim") ? j.at("optim") : empty;
        const json& train = j.contains("train") ? j.at("train") : empty;
        const json& spec = j.contains("spectrum") ? j.at("spectrum") : empty;

        const std::string kind = ds.value("kind", std::string("hcmnist_proxy"));
        if (kind == "hcmnist_proxy") {
            cfg.dataset = DatasetKind::HcmnistProxy;
            cfg.shift = data::ShiftSpec::hcmnist_defaults();
        } else if (kind == "cmnist_proxy") {
            cfg.dataset = DatasetKind::CmnistProxy;
            cfg.shift = data::ShiftSpec::cmnist_defaults();
        } else if (kind == "file") {
            cfg.dataset = DatasetKind::File;
        } else {
            throw ConfigError("unknown dataset.kind '" + kind + "'");
        }
        read(ds, "path", cfg.dataset_path);
        auto& s = cfg.shift;
        read(ds, "n_train", s.n_train);
        read(ds, "n_val", s.n_val);
        read(ds, "n_test", s.n_test);
        read(ds, "spurious_ratio_train", s.spurious_ratio_train);
        read(ds, "spurious_ratio_test", s.spurious_ratio_test);
        read(ds, "label_noise", s.label_noise);
        read(ds, "d_strong_inv", s.d_strong_inv);
        read(ds, "d_weak_inv", s.d_weak_inv);
        read(ds, "d_spurious", s.d_spurious);
        read(ds, "strong_margin", s.strong_margin);
        read(ds, "weak_margin", s.weak_margin);
        read(ds, "spurious_margin", s.spurious_margin);
        read(ds, "noise_std", s.noise_std);
        read(ds, "strong_noise_std", s.strong_noise_std);
        read(ds, "weak_noise_scale", s.weak_noise_scale);

        read(model, "hidden_widths", cfg.hidden_widths);
        if (model.contains("activation")) cfg.activation = activation_from_string(model.at("activation").get<std::string>());

        if (optim.contains("algorithm")) cfg.algorithm = algorithm_from_string(optim.at("algorithm").get<std::string>());
        auto& o = cfg.optim;
        // sam uses the plain ball unless told otherwise
        o.normalizer = cfg.algorithm == Algorithm::SAM ? Normalizer::None : Normalizer::Elementwise;
        read(optim, "eta", o.eta);
        read(optim, "gamma", o.gamma);
        read(optim, "rho", o.rho);
        read(optim, "xi", o.xi);
        read(optim, "adjustment_C", o.adjustment_C);
        read(optim, "clip_norm", o.clip_norm);
        read(optim, "weight_decay", o.weight_decay);
        if (optim.contains("normalizer")) o.normalizer = normalizer_from_string(optim.at("normalizer").get<std::string>());

        read(train, "epochs", cfg.epochs);
        read(train, "batch_size", cfg.batch_size);
        read(train, "eval_every", cfg.eval_every);
        read(train, "seeds", cfg.seeds);
        read(train, "out_dir", cfg.out_dir);

        if (j.contains("sweep"))
            for (auto it = j.at("sweep").begin(); it != j.at("sweep").end(); ++it)
                cfg.sweep[it.key()] = it.value().get<std::vector<double>>();

        read(spec, "tol", cfg.spectrum.tol);
        read(spec, "max_iter", cfg.spectrum.max_iter);
        read(spec, "seed", cfg.spectrum.seed);
        cfg.validate();
        return cfg;
    } catch (const json::exception& e) {
        throw ConfigError(std::string("config type error: ") + e.what());
    } catch (const std::invalid_argument& e) {
        if (dynamic_cast<const ConfigError*>(&e)) throw;
        throw ConfigError(e.what());
    }
}

ExperimentConfig parse_config_text(const std::string& text) {
    json j = json::object();
    std::stringstream in(text);
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        const auto hash = line.find('#');
        if (hash != std::string::npos) line.erase(hash);
        line = trim(line);
        if (line.empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos) throw ConfigError("line " + std::to_string(lineno) + ": expected key = value");
        const std::string key = trim(line.substr(0, eq));
        const std::string value = trim(line.substr(eq + 1));
        const auto dot = key.find('.');
        if (dot == std::string::npos) throw ConfigError("line " + std::to_string(lineno) + ": key needs a section");
        const std::string section = key.substr(0, dot);
        const std::string name = key.substr(dot + 1);
        KeyType type;
        if (section == "sweep") {
            type = KeyType::DoubleList;
        } else {
            auto it = schema().find(key);
            if (it == schema().end()) throw ConfigError("line " + std::to_string(lineno) + ": unknown key '" + key + "'");
            type = it->second;
        }
        j[section][name] = typed_value(key, type, value);
    }
    return config_from_json(j);
}

json config_to_json(const ExperimentConfig& cfg) {
    json j;
    const char* kind = cfg.dataset == DatasetKind::HcmnistProxy ? "hcmnist_proxy"
                       : cfg.dataset == DatasetKind::CmnistProxy ? "cmnist_proxy"
                                                                  : "file";
    const auto& s = cfg.shift;
    j["dataset"] = {{"kind", kind},
                    {"path", cfg.dataset_path},
                    {"n_train", s.n_train},
                    {"n_val", s.n_val},
                    {"n_test", s.n_test},
                    {"spurious_ratio_train", s.spurious_ratio_train},
                    {"spurious_ratio_test", s.spurious_ratio_test},
                    {"label_noise", s.label_noise},
                    {"d_strong_inv", s.d_strong_inv},
                    {"d_weak_inv", s.d_weak_inv},
                    {"d_spurious", s.d_spurious},
                    {"strong_margin", s.strong_margin},
                    {"weak_margin", s.weak_margin},
                    {"spurious_margin", s.spurious_margin},
                    {"noise_std", s.noise_std},
                    {"strong_noise_std", s.strong_noise_std},
                    {"weak_noise_scale", s.weak_noise_scale}};
    j["model"] = {{"hidden_widths", cfg.hidden_widths}, {"activation", to_string(cfg.activation)}};
    const auto& o = cfg.optim;
    j["optim"] = {{"algorithm", to_string(cfg.algorithm)},
                  {"eta", o.eta},
                  {"gamma", o.gamma},
                  {"rho", o.rho},
                  {"normalizer", to_string(o.normalizer)},
                  {"xi", o.xi},
                  {"adjustment_C", o.adjustment_C},
                  {"clip_norm", o.clip_norm},
                  {"weight_decay", o.weight_decay}};
    j["train"] = {{"epochs", cfg.epochs},
                  {"batch_size", cfg.batch_size},
                  {"eval_every", cfg.eval_every},
                  {"seeds", cfg.seeds},
                  {"out_dir", cfg.out_dir}};
    j["sweep"] = json::object();
    for (const auto& [k, v] : cfg.sweep) j["sweep"][k] = v;
    j["spectrum"] = {{"tol", cfg.spectrum.tol}, {"max_iter", cfg.spectrum.max_iter}, {"seed", cfg.spectrum.seed}};
    return j;
}

ExperimentConfig load_config(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot read config " + path.string());
    std::stringstream ss;
    ss << in.rdbuf();
    const std::string text = ss.str();
    const auto first = text.find_first_not_of(" \t\r\n");
    if (first != std::string::npos && text[first] == '{') {
        try {
            return config_from_json(json::parse(text));
        } catch (const json::parse_error& e) {
            throw ConfigError(std::string("invalid JSON config: ") + e.what());
        }
    }
    return parse_config_text(text);
}

std::string canonical_json(const json& j) {
    std::string out;
    format_canonical(j, out);
    return out;
}

std::string fingerprint(const ExperimentConfig& cfg) {
    json j = config_to_json(cfg);
    j["train"].erase("out_dir");
    const std::string text = canonical_json(j);
    std::uint64_t h = 14695981039346656037ull;
    for (unsigned char c : text) {
        h ^= c;
        h *= 1099511628211ull;
    }
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

void apply_override(ExperimentConfig& cfg, const std::string& key, double value) {
    auto& o = cfg.optim;
    if (key == "eta") o.eta = value;
    else if (key == "gamma") o.gamma = value;
    else if (key == "rho") o.rho = value;
    else if (key == "xi") o.xi = value;
    else if (key == "adjustment_C") o.adjustment_C = value;
    else if (key == "clip_norm") o.clip_norm = value;
    else if (key == "weight_decay") o.weight_decay = value;
    else throw ConfigError("cannot override '" + key + "'");
}

}  // namespace asgdro::harness
