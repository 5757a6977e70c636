#include "ropaws/config.hpp"

#include <cstdio>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>

#include "ropaws/errors.hpp"

namespace ropaws::config {

void TrainConfig::validate() const {
    if (!(tau > 0.0) || !(sharpen_temp > 0.0) || !(tau_prior > 0.0))
        throw ParameterError("config: temperatures must be positive");
    if (!(ratio_r > 0.0)) throw ParameterError("config: ratio_r must be positive");
    if (!(reweight_k > 0.0)) throw ParameterError("config: reweight_k must be positive");
    if (views != 2) throw ParameterError("config: views is fixed at 2");
    if (label_smoothing < 0.0 || label_smoothing >= 1.0)
        throw ParameterError("config: label_smoothing must be in [0, 1)");
    if (sigma_aug < 0.0) throw ParameterError("config: sigma_aug must be nonnegative");
    if (epochs == 0 || unlabeled_batch == 0 || labeled_per_class == 0)
        throw ParameterError("config: epochs, batch sizes must be positive");
}

std::string method_name(Method m) { return m == Method::Paws ? "paws" : "ropaws"; }

Method parse_method(const std::string& name) {
    if (name == "paws") return Method::Paws;
    if (name == "ropaws") return Method::Ropaws;
    throw ParameterError("config: method must be paws or ropaws, got '" + name + "'");
}

namespace {

using Setter = std::function<void(RunConfig&, const std::string&)>;

double to_double(const std::string& v) {
    std::size_t pos = 0;
    double d = 0.0;
    try {
        d = std::stod(v, &pos);
    } catch (const std::exception&) {
        throw ParameterError("config: bad numeric value '" + v + "'");
    }
    if (pos != v.size()) throw ParameterError("config: bad numeric value '" + v + "'");
    return d;
}

std::size_t to_size(const std::string& v) {
    const double d = to_double(v);
    if (d < 0 || d != static_cast<double>(static_cast<std::size_t>(d)))
        throw ParameterError("config: expected nonnegative integer, got '" + v + "'");
    return static_cast<std::size_t>(d);
}

bool to_bool(const std::string& v) {
    if (v == "true" || v == "1") return true;
    if (v == "false" || v == "0") return false;
    throw ParameterError("config: expected boolean, got '" + v + "'");
}

const std::map<std::string, Setter>& setters() {
    static const std::map<std::string, Setter> s = {
        {"tau", [](RunConfig& c, const std::string& v) { c.train.tau = to_double(v); }},
        {"sharpen_T", [](RunConfig& c, const std::string& v) { c.train.sharpen_temp = to_double(v); }},
        {"ratio_r", [](RunConfig& c, const std::string& v) { c.train.ratio_r = to_double(v); }},
        {"tau_prior", [](RunConfig& c, const std::string& v) { c.train.tau_prior = to_double(v); }},
        {"reweight_k", [](RunConfig& c, const std::string& v) { c.train.reweight_k = to_double(v); }},
        {"label_smoothing",
         [](RunConfig& c, const std::string& v) { c.train.label_smoothing = to_double(v); }},
        {"epochs", [](RunConfig& c, const std::string& v) { c.train.epochs = to_size(v); }},
        {"labeled_per_class",
         [](RunConfig& c, const std::string& v) { c.train.labeled_per_class = to_size(v); }},
        {"unlabeled_batch",
         [](RunConfig& c, const std::string& v) { c.train.unlabeled_batch = to_size(v); }},
        {"classes_per_batch",
         [](RunConfig& c, const std::string& v) { c.train.classes_per_batch = to_size(v); }},
        {"views", [](RunConfig& c, const std::string& v) { c.train.views = to_size(v); }},
        {"lr_base", [](RunConfig& c, const std::string& v) { c.train.lr_base = to_double(v); }},
        {"lr_peak", [](RunConfig& c, const std::string& v) { c.train.lr_peak = to_double(v); }},
        {"warmup_epochs",
         [](RunConfig& c, const std::string& v) { c.train.warmup_epochs = to_size(v); }},
        {"momentum", [](RunConfig& c, const std::string& v) { c.train.momentum = to_double(v); }},
        {"weight_decay",
         [](RunConfig& c, const std::string& v) { c.train.weight_decay = to_double(v); }},
        {"sigma_aug", [](RunConfig& c, const std::string& v) { c.train.sigma_aug = to_double(v); }},
        {"hidden_dim", [](RunConfig& c, const std::string& v) { c.train.hidden_dim = to_size(v); }},
        {"embed_dim", [](RunConfig& c, const std::string& v) { c.train.embed_dim = to_size(v); }},
        {"seed",
         [](RunConfig& c, const std::string& v) {
             c.train.seed = to_size(v);
             c.gen.seed = to_size(v);
         }},
        {"method",
         [](RunConfig& c, const std::string& v) { c.train.method = parse_method(v); }},
        {"sharpen_after_renorm",
         [](RunConfig& c, const std::string& v) { c.train.sharpen_after_renorm = to_bool(v); }},
        {"generator", [](RunConfig& c, const std::string& v) { c.gen.generator = v; }},
        {"classes", [](RunConfig& c, const std::string& v) { c.gen.classes = to_size(v); }},
        {"ood_clusters", [](RunConfig& c, const std::string& v) { c.gen.ood_clusters = to_size(v); }},
        {"labels_per_class",
         [](RunConfig& c, const std::string& v) { c.gen.labels_per_class = to_size(v); }},
        {"unlabeled_in", [](RunConfig& c, const std::string& v) { c.gen.unlabeled_in = to_size(v); }},
        {"unlabeled_ood",
         [](RunConfig& c, const std::string& v) { c.gen.unlabeled_ood = to_size(v); }},
        {"test_count", [](RunConfig& c, const std::string& v) { c.gen.test_count = to_size(v); }},
        {"separation", [](RunConfig& c, const std::string& v) { c.gen.separation = to_double(v); }},
        {"noise_std", [](RunConfig& c, const std::string& v) { c.gen.noise_std = to_double(v); }},
    };
    return s;
}

std::string trim(const std::string& s) {
    const auto a = s.find_first_not_of(" \t\r");
    if (a == std::string::npos) return "";
    const auto b = s.find_last_not_of(" \t\r");
    return s.substr(a, b - a + 1);
}

}  // namespace

std::vector<std::string> known_keys() {
    std::vector<std::string> keys;
    for (const auto& [k, _] : setters()) keys.push_back(k);
    return keys;
}

void apply_override(RunConfig& cfg, const std::string& key, const std::string& value) {
    const auto it = setters().find(key);
    if (it == setters().end()) throw ParameterError("config: unknown key '" + key + "'");
    it->second(cfg, value);
}

RunConfig parse_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ParameterError("config: cannot open " + path);
    RunConfig cfg;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        const auto hash = line.find('#');
        if (hash != std::string::npos) line = line.substr(0, hash);
        line = trim(line);
        if (line.empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos)
            throw ParameterError("config: line " + std::to_string(lineno) + " of " + path +
                                 " is not key=value");
        apply_override(cfg, trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
    }
    return cfg;
}

std::string serialize(const RunConfig& cfg) {
    std::ostringstream out;
    char buf[64];
    auto num = [&](double v) {
        std::snprintf(buf, sizeof buf, "%.17g", v);
        return std::string(buf);
    };
    out << "tau = " << num(cfg.train.tau) << '\n'
        << "sharpen_T = " << num(cfg.train.sharpen_temp) << '\n'
        << "ratio_r = " << num(cfg.train.ratio_r) << '\n'
        << "tau_prior = " << num(cfg.train.tau_prior) << '\n'
        << "reweight_k = " << num(cfg.train.reweight_k) << '\n'
        << "label_smoothing = " << num(cfg.train.label_smoothing) << '\n'
        << "epochs = " << cfg.train.epochs << '\n'
        << "labeled_per_class = " << cfg.train.labeled_per_class << '\n'
        << "unlabeled_batch = " << cfg.train.unlabeled_batch << '\n'
        << "classes_per_batch = " << cfg.train.classes_per_batch << '\n'
        << "views = " << cfg.train.views << '\n'
        << "lr_base = " << num(cfg.train.lr_base) << '\n'
        << "lr_peak = " << num(cfg.train.lr_peak) << '\n'
        << "warmup_epochs = " << cfg.train.warmup_epochs << '\n'
        << "momentum = " << num(cfg.train.momentum) << '\n'
        << "weight_decay = " << num(cfg.train.weight_decay) << '\n'
        << "sigma_aug = " << num(cfg.train.sigma_aug) << '\n'
        << "hidden_dim = " << cfg.train.hidden_dim << '\n'
        << "embed_dim = " << cfg.train.embed_dim << '\n'
        << "seed = " << cfg.train.seed << '\n'
        << "method = " << method_name(cfg.train.method) << '\n'
        << "sharpen_after_renorm = " << (cfg.train.sharpen_after_renorm ? "true" : "false") << '\n'
        << "generator = " << cfg.gen.generator << '\n'
        << "classes = " << cfg.gen.classes << '\n'
        << "ood_clusters = " << cfg.gen.ood_clusters << '\n'
        << "labels_per_class = " << cfg.gen.labels_per_class << '\n'
        << "unlabeled_in = " << cfg.gen.unlabeled_in << '\n'
        << "unlabeled_ood = " << cfg.gen.unlabeled_ood << '\n'
        << "test_count = " << cfg.gen.test_count << '\n'
        << "separation = " << num(cfg.gen.separation) << '\n'
        << "noise_std = " << num(cfg.gen.noise_std) << '\n';
    return out.str();
}

}  // namespace ropaws::config
