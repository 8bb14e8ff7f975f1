#include "sohcast/config.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>

#include "sohcast/error.hpp"
#include "sohcast/util.hpp"

namespace sohcast {

namespace {

std::string trim(const std::string& s) {
    std::size_t a = s.find_first_not_of(" \t");
    if (a == std::string::npos) return "";
    std::size_t b = s.find_last_not_of(" \t");
    return s.substr(a, b - a + 1);
}

double to_double(const std::string& key, const std::string& v) {
    try {
        std::size_t pos = 0;
        double d = std::stod(v, &pos);
        if (pos != v.size()) throw std::invalid_argument(v);
        return d;
    } catch (const std::exception&) {
        throw ConfigError("config: '" + key + "' expects a number, got '" + v + "'");
    }
}

std::size_t to_size(const std::string& key, const std::string& v) {
    const double d = to_double(key, v);
    if (d < 0 || d != std::floor(d)) {
        throw ConfigError("config: '" + key + "' expects a non-negative integer, got '" +
                          v + "'");
    }
    return static_cast<std::size_t>(d);
}

bool to_bool(const std::string& key, const std::string& v) {
    if (v == "true" || v == "1") return true;
    if (v == "false" || v == "0") return false;
    throw ConfigError("config: '" + key + "' expects true/false, got '" + v + "'");
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

std::string join_list(const std::vector<std::string>& v) {
    std::string out;
    for (std::size_t i = 0; i < v.size(); ++i) {
        if (i) out += ",";
        out += v[i];
    }
    return out;
}

}  // namespace

std::vector<std::string> RunConfig::known_keys() {
    return {"data.csv",
            "data.pad_length",
            "data.channels",
            "model.conv1_kernels",
            "model.conv1_width",
            "model.conv2_kernels",
            "model.conv2_width",
            "model.dense_units",
            "model.prior_family",
            "model.prior_loc",
            "model.prior_scale",
            "model.learning_rate",
            "model.epochs",
            "model.batch_size",
            "model.mc_train_samples",
            "model.mc_predict_samples",
            "model.kl_weight",
            "model.kl_anneal_epochs",
            "model.strict_shapes",
            "ensemble.method",
            "ensemble.lambda_reg",
            "forecast.noise_sigma",
            "forecast.interval",
            "run.seed",
            "run.workers",
            "run.out"};
}

void RunConfig::set(const std::string& key, const std::string& raw) {
    const std::string value = trim(raw);
    if (key == "data.csv") data_csv = value;
    else if (key == "data.pad_length") pad_length = to_size(key, value);
    else if (key == "data.channels") {
        auto list = split_list(value);
        if (list.empty()) throw ConfigError("config: 'data.channels' must not be empty");
        const auto& known = known_channels();
        for (const auto& c : list) {
            if (std::find(known.begin(), known.end(), c) == known.end()) {
                throw ConfigError("config: unknown channel '" + c + "' (known: " +
                                  join_list(known) + ")");
            }
        }
        channels = list;
    } else if (key == "model.conv1_kernels") conv1_kernels = to_size(key, value);
    else if (key == "model.conv1_width") conv1_width = to_size(key, value);
    else if (key == "model.conv2_kernels") conv2_kernels = to_size(key, value);
    else if (key == "model.conv2_width") conv2_width = to_size(key, value);
    else if (key == "model.dense_units") dense_units = to_size(key, value);
    else if (key == "model.prior_family") {
        if (value != "laplace" && value != "gaussian") {
            throw ConfigError("config: 'model.prior_family' must be laplace or gaussian");
        }
        prior_family = value;
    } else if (key == "model.prior_loc") prior_loc = to_double(key, value);
    else if (key == "model.prior_scale") {
        prior_scale = to_double(key, value);
        if (!(prior_scale > 0.0)) {
            throw ConfigError("config: 'model.prior_scale' must be positive");
        }
    } else if (key == "model.learning_rate") learning_rate = to_double(key, value);
    else if (key == "model.epochs") epochs = to_size(key, value);
    else if (key == "model.batch_size") {
        batch_size = to_size(key, value);
        if (batch_size == 0) throw ConfigError("config: 'model.batch_size' must be >= 1");
    } else if (key == "model.mc_train_samples") mc_train_samples = to_size(key, value);
    else if (key == "model.mc_predict_samples") mc_predict_samples = to_size(key, value);
    else if (key == "model.kl_weight") {
        if (value != "auto") to_double(key, value);  // validate
        kl_weight = value;
    } else if (key == "model.kl_anneal_epochs") kl_anneal_epochs = to_size(key, value);
    else if (key == "model.strict_shapes") strict_shapes = to_bool(key, value);
    else if (key == "ensemble.method") {
        if (value != "stack-dist" && value != "stack-point" && value != "baseline") {
            throw ConfigError(
                "config: 'ensemble.method' must be stack-dist, stack-point or baseline");
        }
        ensemble_method = value;
    } else if (key == "ensemble.lambda_reg") {
        lambda_reg = to_double(key, value);
        if (lambda_reg < 0.0) throw ConfigError("config: 'ensemble.lambda_reg' must be >= 0");
    } else if (key == "forecast.noise_sigma") {
        noise_sigma = to_double(key, value);
        if (noise_sigma < 0.0) throw ConfigError("config: 'forecast.noise_sigma' must be >= 0");
    } else if (key == "forecast.interval") {
        interval = to_double(key, value);
        if (!(interval > 0.0 && interval < 1.0)) {
            throw ConfigError("config: 'forecast.interval' must lie in (0, 1)");
        }
    } else if (key == "run.seed") {
        try {
            seed = std::stoull(value);
        } catch (const std::exception&) {
            throw ConfigError("config: 'run.seed' expects an unsigned integer");
        }
    } else if (key == "run.workers") workers = to_size(key, value);
    else if (key == "run.out") out_dir = value;
    else throw ConfigError("config: unknown key '" + key + "'");
}

std::string RunConfig::get(const std::string& key) const {
    if (key == "data.csv") return data_csv;
    if (key == "data.pad_length") return std::to_string(pad_length);
    if (key == "data.channels") return join_list(channels);
    if (key == "model.conv1_kernels") return std::to_string(conv1_kernels);
    if (key == "model.conv1_width") return std::to_string(conv1_width);
    if (key == "model.conv2_kernels") return std::to_string(conv2_kernels);
    if (key == "model.conv2_width") return std::to_string(conv2_width);
    if (key == "model.dense_units") return std::to_string(dense_units);
    if (key == "model.prior_family") return prior_family;
    if (key == "model.prior_loc") return fmt_double(prior_loc);
    if (key == "model.prior_scale") return fmt_double(prior_scale);
    if (key == "model.learning_rate") return fmt_double(learning_rate);
    if (key == "model.epochs") return std::to_string(epochs);
    if (key == "model.batch_size") return std::to_string(batch_size);
    if (key == "model.mc_train_samples") return std::to_string(mc_train_samples);
    if (key == "model.mc_predict_samples") return std::to_string(mc_predict_samples);
    if (key == "model.kl_weight") return kl_weight;
    if (key == "model.kl_anneal_epochs") return std::to_string(kl_anneal_epochs);
    if (key == "model.strict_shapes") return strict_shapes ? "true" : "false";
    if (key == "ensemble.method") return ensemble_method;
    if (key == "ensemble.lambda_reg") return fmt_double(lambda_reg);
    if (key == "forecast.noise_sigma") return fmt_double(noise_sigma);
    if (key == "forecast.interval") return fmt_double(interval);
    if (key == "run.seed") return std::to_string(seed);
    if (key == "run.workers") return std::to_string(workers);
    if (key == "run.out") return out_dir;
    throw ConfigError("config: unknown key '" + key + "'");
}

RunConfig RunConfig::from_text(const std::string& text) {
    RunConfig cfg;
    std::istringstream in(text);
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        const std::size_t hash = line.find('#');
        if (hash != std::string::npos) line = line.substr(0, hash);
        line = trim(line);
        if (line.empty()) continue;
        const std::size_t eq = line.find('=');
        if (eq == std::string::npos) {
            throw ConfigError("config line " + std::to_string(line_no) +
                              ": expected key=value, got '" + line + "'");
        }
        cfg.set(trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
    }
    return cfg;
}

RunConfig RunConfig::load(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config file '" + path + "'");
    std::ostringstream ss;
    ss << in.rdbuf();
    return from_text(ss.str());
}

std::string RunConfig::to_text() const {
    std::string out = "# sohcast run configuration\n";
    for (const auto& key : known_keys()) {
        out += key + " = " + get(key) + "\n";
    }
    return out;
}

void RunConfig::save(const std::string& path) const {
    write_file_atomic(path, to_text());
}

BcnnConfig RunConfig::bcnn_config(std::size_t input_length) const {
    BcnnConfig c;
    c.input_length = input_length;
    c.input_channels = channels.size();
    c.conv1_kernels = conv1_kernels;
    c.conv1_width = conv1_width;
    c.conv2_kernels = conv2_kernels;
    c.conv2_width = conv2_width;
    c.dense_units = dense_units;
    c.prior.family = prior_family == "gaussian" ? PriorSpec::Family::gaussian
                                                : PriorSpec::Family::laplace;
    c.prior.loc = prior_loc;
    c.prior.scale = prior_scale;
    c.learning_rate = learning_rate;
    c.epochs = epochs;
    c.batch_size = batch_size;
    c.mc_train_samples = mc_train_samples;
    c.mc_predict_samples = mc_predict_samples;
    if (kl_weight != "auto") c.kl_weight = std::stod(kl_weight);
    c.kl_anneal_epochs = kl_anneal_epochs;
    c.strict_shapes = strict_shapes;
    c.seed = seed;
    return c;
}

}  // namespace sohcast
