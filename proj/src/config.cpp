#include "weca/config.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>

#include "weca/error.hpp"

namespace weca {

namespace {

std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return "";
    const auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

std::vector<std::string> split_list(const std::string& s) {
    std::vector<std::string> out;
    std::size_t from = 0;
    while (from <= s.size()) {
        const auto comma = s.find(',', from);
        const auto item = trim(s.substr(from, comma == std::string::npos ? std::string::npos : comma - from));
        if (!item.empty()) out.push_back(item);
        if (comma == std::string::npos) break;
        from = comma + 1;
    }
    return out;
}

template <typename T>
T parse_number(const std::string& key, const std::string& value) {
    T v{};
    auto [ptr, ec] = std::from_chars(value.data(), value.data() + value.size(), v);
    if (ec != std::errc{} || ptr != value.data() + value.size()) {
        throw ConfigError("config key '" + key + "': cannot parse '" + value + "'");
    }
    return v;
}

bool parse_bool(const std::string& key, const std::string& value) {
    if (value == "true" || value == "1") return true;
    if (value == "false" || value == "0") return false;
    throw ConfigError("config key '" + key + "': expected true or false, got '" + value + "'");
}

std::string fmt(double v) {
    char buf[64];
    auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
    (void)ec;
    return std::string(buf, ptr);
}

template <typename T>
std::string fmt_int(T v) {
    return std::to_string(v);
}

struct Field {
    std::function<void(ExperimentConfig&, const std::string&, const std::string&)> set;
    std::function<std::string(const ExperimentConfig&)> get;
};

template <typename T>
Field real(T ExperimentConfig::*section, double T::*member) {
    return {[=](ExperimentConfig& c, const std::string& k, const std::string& v) {
                (c.*section).*member = parse_number<double>(k, v);
            },
            [=](const ExperimentConfig& c) { return fmt((c.*section).*member); }};
}

template <typename T, typename U>
Field integer(T ExperimentConfig::*section, U T::*member) {
    return {[=](ExperimentConfig& c, const std::string& k, const std::string& v) {
                (c.*section).*member = parse_number<U>(k, v);
            },
            [=](const ExperimentConfig& c) { return fmt_int((c.*section).*member); }};
}

template <typename T>
Field boolean(T ExperimentConfig::*section, bool T::*member) {
    return {[=](ExperimentConfig& c, const std::string& k, const std::string& v) {
                (c.*section).*member = parse_bool(k, v);
            },
            [=](const ExperimentConfig& c) { return std::string((c.*section).*member ? "true" : "false"); }};
}

const std::map<std::string, Field>& fields() {
    using E = ExperimentConfig;
    static const std::map<std::string, Field> table = [] {
        std::map<std::string, Field> t;
        t["data.source"] = {[](E& c, const std::string& k, const std::string& v) {
                                if (v != "synthetic" && v != "csv") {
                                    throw ConfigError("config key '" + k + "': expected synthetic or csv");
                                }
                                c.data_source = v;
                            },
                            [](const E& c) { return c.data_source; }};
        t["data.csv_path"] = {[](E& c, const std::string&, const std::string& v) { c.csv_path = v; },
                              [](const E& c) { return c.csv_path.string(); }};
        t["data.n_series"] = integer(&E::synthetic, &SyntheticConfig::n_series);
        t["data.length"] = integer(&E::synthetic, &SyntheticConfig::length);
        t["data.seed"] = integer(&E::synthetic, &SyntheticConfig::seed);
        t["data.level_min"] = real(&E::synthetic, &SyntheticConfig::level_min);
        t["data.level_max"] = real(&E::synthetic, &SyntheticConfig::level_max);
        t["data.weekly_amplitude"] = real(&E::synthetic, &SyntheticConfig::weekly_amplitude);
        t["data.trend_scale"] = real(&E::synthetic, &SyntheticConfig::trend_scale);
        t["data.noise_scale"] = real(&E::synthetic, &SyntheticConfig::noise_scale);
        t["data.start_date"] = {[](E& c, const std::string&, const std::string& v) {
                                    parse_iso_date(v);
                                    c.synthetic.start_date = v;
                                },
                                [](const E& c) { return c.synthetic.start_date; }};
        t["window.input"] = integer(&E::window, &WindowSpec::input);
        t["window.horizon"] = integer(&E::window, &WindowSpec::horizon);
        t["split.train"] = real(&E::split, &SplitSpec::train_frac);
        t["split.val"] = real(&E::split, &SplitSpec::val_frac);
        t["split.test"] = real(&E::split, &SplitSpec::test_frac);
        t["model.latent_dim"] = {[](E& c, const std::string& k, const std::string& v) {
                                     c.model.encoder.latent_dim = parse_number<std::size_t>(k, v);
                                 },
                                 [](const E& c) { return fmt_int(c.model.encoder.latent_dim); }};
        t["model.kernel"] = {[](E& c, const std::string& k, const std::string& v) {
                                 const auto kernel = parse_number<std::size_t>(k, v);
                                 for (auto& l : c.model.encoder.layers) l.kernel = kernel;
                             },
                             [](const E& c) { return fmt_int(c.model.encoder.layers.front().kernel); }};
        t["model.dilations"] = {[](E& c, const std::string& k, const std::string& v) {
                                    const std::size_t kernel = c.model.encoder.layers.front().kernel;
                                    c.model.encoder.layers.clear();
                                    for (const auto& d : split_list(v)) {
                                        c.model.encoder.layers.push_back({kernel, parse_number<std::size_t>(k, d)});
                                    }
                                    if (c.model.encoder.layers.empty()) throw ConfigError(k + ": empty list");
                                },
                                [](const E& c) {
                                    std::string s;
                                    for (const auto& l : c.model.encoder.layers) {
                                        s += (s.empty() ? "" : ",") + fmt_int(l.dilation);
                                    }
                                    return s;
                                }};
        t["anomaly.amplitude_mean"] = real(&E::anomaly, &AnomalyConfig::amplitude_mean);
        t["anomaly.amplitude_std"] = real(&E::anomaly, &AnomalyConfig::amplitude_std);
        t["anomaly.amplitude_min"] = real(&E::anomaly, &AnomalyConfig::amplitude_min);
        t["anomaly.decay"] = real(&E::anomaly, &AnomalyConfig::decay);
        t["anomaly.shape_mean"] = real(&E::anomaly, &AnomalyConfig::shape_mean);
        t["anomaly.shape_std"] = real(&E::anomaly, &AnomalyConfig::shape_std);
        t["anomaly.shape_min"] = real(&E::anomaly, &AnomalyConfig::shape_min);
        t["anomaly.scale"] = real(&E::anomaly, &AnomalyConfig::scale);
        t["anomaly.weight_sigma"] = real(&E::anomaly, &AnomalyConfig::weight_sigma);
        t["anomaly.tail_fraction"] = real(&E::anomaly, &AnomalyConfig::tail_fraction);
        t["train.learning_rate"] = real(&E::train, &TrainConfig::learning_rate);
        t["train.batch_size"] = integer(&E::train, &TrainConfig::batch_size);
        t["train.max_epochs"] = integer(&E::train, &TrainConfig::max_epochs);
        t["train.patience"] = integer(&E::train, &TrainConfig::early_stop_patience);
        t["train.lambda"] = real(&E::train, &TrainConfig::lambda);
        t["train.p_aug"] = real(&E::train, &TrainConfig::p_aug);
        t["train.forecast_on_augmented"] = boolean(&E::train, &TrainConfig::forecast_on_augmented);
        t["train.normalize_latents"] = boolean(&E::train, &TrainConfig::normalize_latents);
        t["train.windows_per_epoch"] = integer(&E::train, &TrainConfig::windows_per_epoch);
        t["train.from_checkpoint"] = {[](E& c, const std::string&, const std::string& v) { c.train.from_checkpoint = v; },
                                      [](const E& c) { return c.train.from_checkpoint.string(); }};
        t["eval.seed"] = {[](E& c, const std::string& k, const std::string& v) {
                              c.eval_seed = parse_number<std::uint64_t>(k, v);
                          },
                          [](const E& c) { return fmt_int(c.eval_seed); }};
        t["bench.seeds"] = {[](E& c, const std::string& k, const std::string& v) {
                                c.seeds.clear();
                                for (const auto& s : split_list(v)) c.seeds.push_back(parse_number<std::uint64_t>(k, s));
                                if (c.seeds.empty()) throw ConfigError(k + ": empty list");
                            },
                            [](const E& c) {
                                std::string s;
                                for (auto v : c.seeds) s += (s.empty() ? "" : ",") + fmt_int(v);
                                return s;
                            }};
        t["bench.regimes"] = {[](E& c, const std::string& k, const std::string& v) {
                                  c.regimes.clear();
                                  for (const auto& r : split_list(v)) c.regimes.push_back(parse_regime(r));
                                  if (c.regimes.empty()) throw ConfigError(k + ": empty list");
                              },
                              [](const E& c) {
                                  std::string s;
                                  for (auto r : c.regimes) s += (s.empty() ? "" : ",") + regime_name(r);
                                  return s;
                              }};
        t["out.dir"] = {[](E& c, const std::string&, const std::string& v) { c.out_dir = v; },
                        [](const E& c) { return c.out_dir.string(); }};
        return t;
    }();
    return table;
}

}  // namespace

ExperimentConfig::ExperimentConfig() {
    model.encoder.latent_dim = 16;
    train.batch_size = 32;
    train.max_epochs = 100;
    train.windows_per_epoch = 2048;
}

void ExperimentConfig::validate() const {
    if (window.input < 1 || window.horizon < 1) throw ConfigError("window.input and window.horizon must be >= 1");
    if (data_source == "csv") {
        if (csv_path.empty()) throw ConfigError("data.csv_path is required when data.source=csv");
        if (!std::filesystem::exists(csv_path)) {
            throw ConfigError("data.csv_path '" + csv_path.string() + "' does not exist");
        }
    }
    if (!train.from_checkpoint.empty() && !std::filesystem::exists(train.from_checkpoint)) {
        throw ConfigError("train.from_checkpoint '" + train.from_checkpoint.string() + "' does not exist");
    }
    const double total = split.train_frac + split.val_frac + split.test_frac;
    if (split.train_frac <= 0 || split.val_frac <= 0 || split.test_frac <= 0 || std::abs(total - 1.0) > 1e-9) {
        throw ConfigError("split fractions must be positive and sum to 1");
    }
    if (!(anomaly.weight_sigma > 0.0)) throw ConfigError("anomaly.weight_sigma must be > 0");
    if (!(anomaly.tail_fraction > 0.0 && anomaly.tail_fraction <= 1.0)) {
        throw ConfigError("anomaly.tail_fraction must lie in (0,1]");
    }
    model_for(1).validate();
    train.validate();
}

ModelConfig ExperimentConfig::model_for(std::size_t channels) const {
    ModelConfig m = model;
    m.encoder.input_channels = channels;
    m.decoder.output_channels = channels;
    m.decoder.horizon = window.horizon;
    return m;
}

TrainConfig ExperimentConfig::train_for(Regime regime, std::uint64_t seed) const {
    TrainConfig t = train;
    t.regime = regime;
    t.seed = seed;
    t.anomaly = anomaly;
    return t;
}

void set_config_value(ExperimentConfig& config, const std::string& key, const std::string& value) {
    const auto& table = fields();
    const auto it = table.find(key);
    if (it == table.end()) throw ConfigError("unknown config key '" + key + "'");
    it->second.set(config, key, value);
}

ExperimentConfig parse_config(const std::string& text) {
    ExperimentConfig config;
    std::istringstream in(text);
    std::string line;
    std::size_t number = 0;
    std::map<std::string, std::size_t> seen;
    while (std::getline(in, line)) {
        ++number;
        const auto hash = line.find('#');
        if (hash != std::string::npos) line.erase(hash);
        line = trim(line);
        if (line.empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos) {
            throw ConfigError("config line " + std::to_string(number) + ": expected key=value");
        }
        const std::string key = trim(line.substr(0, eq));
        const std::string value = trim(line.substr(eq + 1));
        if (auto prev = seen.find(key); prev != seen.end()) {
            throw ConfigError("config line " + std::to_string(number) + ": '" + key + "' already set on line " +
                              std::to_string(prev->second));
        }
        seen[key] = number;
        try {
            set_config_value(config, key, value);
        } catch (const ConfigError& e) {
            throw ConfigError("config line " + std::to_string(number) + ": " + e.what());
        }
    }
    return config;
}

ExperimentConfig load_config(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config '" + path.string() + "'");
    std::ostringstream text;
    text << in.rdbuf();
    return parse_config(text.str());
}

std::string canonical_config(const ExperimentConfig& config) {
    std::string out;
    for (const auto& [key, field] : fields()) {
        if (key == "out.dir") continue;  // where results go does not change them
        out += key + "=" + field.get(config) + "\n";
    }
    return out;
}

std::vector<std::string> config_keys() {
    std::vector<std::string> keys;
    for (const auto& [key, field] : fields()) keys.push_back(key);
    return keys;
}

}  // namespace weca
