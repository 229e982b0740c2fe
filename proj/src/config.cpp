#include "relex/config.hpp"

#include <fstream>

#include "relex/error.hpp"
#include "relex/util.hpp"

namespace relex {

using nlohmann::json;

const json& RunConfig::defaults() {
    static const json d = {
        {"seed", 1},
        {"out_dir", "out"},
        {"data_dir", "out"},

        // synthetic corpus
        {"synth_n_relations", 5},
        {"synth_n_entities", 150},
        {"synth_n_bags", 600},
        {"synth_bag_size_min", 2},
        {"synth_bag_size_max", 6},
        {"synth_noise_rate", 0.0},
        {"synth_all_noisy_bag_rate", 0.0},
        {"synth_vocab_size", 240},
        {"synth_template_len_min", 6},
        {"synth_template_len_max", 10},
        {"synth_na_bag_fraction", 0.15},
        {"synth_noise_na_bias", 0.75},
        {"split_train", 0.7},
        {"split_valid", 0.1},
        {"split_test", 0.2},

        // classifier
        {"d_w", 50},
        {"d_p", 5},
        {"d_s", 230},
        {"max_rel", 30},
        {"max_len", 120},
        {"keep_prob", 0.5},

        // TransE
        {"transe_dim", 50},
        {"transe_margin", 1.0},
        {"transe_lr", 0.05},
        {"transe_epochs", 200},
        {"transe_neg_per_pos", 1},

        // training
        {"episodes", 25},
        {"batch_size", 160},
        {"lr_cnn", 0.02},
        {"lr_policy_pretrain", 0.02},
        {"lr_policy_joint", 0.01},
        {"tau", 0.001},
        {"pretrain_cnn_epochs", 15},
        {"pretrain_policy_episodes", 10},
        {"select_na_bags", true},
        {"shuffle_bag_sentences", false},
        {"sample_with_target", true},
        {"reward_baseline_ema", false},
        {"baseline_beta", 0.02},
        {"policy_init_bias", 0.0},
        {"policy_init_scale", 1.0},
        {"threads", 0},
        {"synth_signature_prob", 0.65},

        // selection / eval
        {"select_mode", "greedy"},

        // stage artifact paths; empty = default under data_dir
        {"train_file", ""},
        {"valid_file", ""},
        {"test_file", ""},
        {"triples_file", ""},
        {"entity_emb_file", ""},
        {"relation_emb_file", ""},
        {"cnn_ckpt", ""},
        {"policy_ckpt", ""},
        {"trained_ckpt", ""},
        {"decisions_file", ""},
        {"cleansed_file", ""},
    };
    return d;
}

json parse_override(const std::string& key, const std::string& value) {
    const json& d = RunConfig::defaults();
    auto it = d.find(key);
    if (it == d.end()) fail("unknown configuration key: " + key);
    if (it->is_boolean()) {
        if (value == "true" || value == "1") return true;
        if (value == "false" || value == "0") return false;
        fail("expected a boolean for " + key);
    }
    try {
        if (it->is_number_integer()) return static_cast<long>(std::stol(value));
        if (it->is_number_float()) return std::stod(value);
    } catch (const std::exception&) {
        fail("bad value for " + key + ": '" + value + "'");
    }
    return value;
}

RunConfig RunConfig::make(const std::string& config_path,
                          const std::vector<std::pair<std::string, std::string>>& overrides) {
    RunConfig cfg;
    cfg.values = defaults();
    if (!config_path.empty()) {
        std::ifstream in(config_path);
        if (!in) fail("cannot open config file: " + config_path);
        json file_cfg;
        try {
            in >> file_cfg;
        } catch (const json::exception& e) {
            fail(str_format("%s: %s", config_path.c_str(), e.what()));
        }
        if (!file_cfg.is_object()) fail(config_path + ": config must be a JSON object");
        std::string bad;
        for (const auto& [k, v] : file_cfg.items()) {
            if (!cfg.values.contains(k)) {
                bad += bad.empty() ? k : ", " + k;
                continue;
            }
            cfg.values[k] = v;
        }
        if (!bad.empty()) fail("unknown configuration keys: " + bad);
    }
    for (const auto& [k, v] : overrides) cfg.values[k] = parse_override(k, v);
    return cfg;
}

long RunConfig::geti(const std::string& key) const {
    if (!values.contains(key)) fail("missing configuration key: " + key);
    const auto& v = values.at(key);
    if (!v.is_number_integer()) fail("configuration key " + key + " is not an integer");
    return v.get<long>();
}

double RunConfig::getd(const std::string& key) const {
    if (!values.contains(key)) fail("missing configuration key: " + key);
    const auto& v = values.at(key);
    if (!v.is_number()) fail("configuration key " + key + " is not a number");
    return v.get<double>();
}

bool RunConfig::getb(const std::string& key) const {
    if (!values.contains(key)) fail("missing configuration key: " + key);
    const auto& v = values.at(key);
    if (!v.is_boolean()) fail("configuration key " + key + " is not a boolean");
    return v.get<bool>();
}

std::string RunConfig::gets(const std::string& key) const {
    if (!values.contains(key)) fail("missing configuration key: " + key);
    const auto& v = values.at(key);
    if (!v.is_string()) fail("configuration key " + key + " is not a string");
    return v.get<std::string>();
}

SynthConfig RunConfig::synth() const {
    SynthConfig s;
    s.n_relations = static_cast<int>(geti("synth_n_relations"));
    s.n_entities = static_cast<int>(geti("synth_n_entities"));
    s.n_bags = static_cast<int>(geti("synth_n_bags"));
    s.bag_size_min = static_cast<int>(geti("synth_bag_size_min"));
    s.bag_size_max = static_cast<int>(geti("synth_bag_size_max"));
    s.noise_rate = {getd("synth_noise_rate")};
    s.all_noisy_bag_rate = getd("synth_all_noisy_bag_rate");
    s.vocab_size = static_cast<int>(geti("synth_vocab_size"));
    s.template_len_min = static_cast<int>(geti("synth_template_len_min"));
    s.template_len_max = static_cast<int>(geti("synth_template_len_max"));
    s.na_bag_fraction = getd("synth_na_bag_fraction");
    s.noise_na_bias = getd("synth_noise_na_bias");
    s.signature_prob = getd("synth_signature_prob");
    s.rng_seed = seed();
    return s;
}

TrainConfig RunConfig::train() const {
    TrainConfig t;
    t.episodes = static_cast<int>(geti("episodes"));
    t.batch_size = static_cast<int>(geti("batch_size"));
    t.lr_cnn = getd("lr_cnn");
    t.lr_policy_pretrain = getd("lr_policy_pretrain");
    t.lr_policy_joint = getd("lr_policy_joint");
    t.tau = getd("tau");
    t.seed = seed();
    t.pretrain_cnn_epochs = static_cast<int>(geti("pretrain_cnn_epochs"));
    t.pretrain_policy_episodes = static_cast<int>(geti("pretrain_policy_episodes"));
    t.keep_prob = getd("keep_prob");
    t.select_na_bags = getb("select_na_bags");
    t.shuffle_bag_sentences = getb("shuffle_bag_sentences");
    t.sample_with_target = getb("sample_with_target");
    t.reward_baseline_ema = getb("reward_baseline_ema");
    t.baseline_beta = getd("baseline_beta");
    t.policy_init_bias = getd("policy_init_bias");
    t.policy_init_scale = getd("policy_init_scale");
    t.threads = static_cast<int>(geti("threads"));
    return t;
}

CnnConfig RunConfig::cnn() const {
    CnnConfig c;
    c.d_w = static_cast<int>(geti("d_w"));
    c.d_p = static_cast<int>(geti("d_p"));
    c.d_s = static_cast<int>(geti("d_s"));
    c.max_rel = static_cast<int>(geti("max_rel"));
    c.keep_prob = getd("keep_prob");
    return c;
}

TransEConfig RunConfig::transe() const {
    TransEConfig t;
    t.dim = static_cast<int>(geti("transe_dim"));
    t.margin = getd("transe_margin");
    t.lr = getd("transe_lr");
    t.epochs = static_cast<int>(geti("transe_epochs"));
    t.neg_per_pos = static_cast<int>(geti("transe_neg_per_pos"));
    t.seed = seed();
    return t;
}

LoadOptions RunConfig::load_options() const {
    LoadOptions o;
    o.max_len = static_cast<int>(geti("max_len"));
    return o;
}

std::string RunConfig::path(const std::string& key, const std::string& fallback) const {
    std::string v = gets(key);
    if (!v.empty()) return v;
    return data_dir() + "/" + fallback;
}

void RunConfig::write(const std::string& path) const {
    std::ofstream out(path, std::ios::binary);
    if (!out) fail("cannot write config: " + path);
    out << values.dump(2) << '\n';
    if (!out) fail("write failed: " + path);
}

}  // namespace relex
