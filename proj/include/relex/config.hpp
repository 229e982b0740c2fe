#pragma once

#include <string>
#include <utility>
#include <vector>

#include "json.hpp"
#include "relex/classifier.hpp"
#include "relex/embeddings.hpp"
#include "relex/synth.hpp"
#include "relex/trainer.hpp"

namespace relex {

// Flat key-value run configuration: defaults, overlaid by an optional JSON
// config file, overlaid by command-line overrides. Unknown keys are
// rejected; the effective configuration is written next to every artifact.
struct RunConfig {
    nlohmann::json values;  // flat object, every key present

    static const nlohmann::json& defaults();
    static RunConfig make(const std::string& config_path,
                          const std::vector<std::pair<std::string, std::string>>& overrides);

    bool has(const std::string& key) const { return values.contains(key); }
    long geti(const std::string& key) const;
    double getd(const std::string& key) const;
    bool getb(const std::string& key) const;
    std::string gets(const std::string& key) const;
    std::uint64_t seed() const { return static_cast<std::uint64_t>(geti("seed")); }

    // stage views
    SynthConfig synth() const;
    TrainConfig train() const;
    CnnConfig cnn() const;  // vocab_size / n_relations left 0 until binding
    TransEConfig transe() const;
    LoadOptions load_options() const;

    std::string out_dir() const { return gets("out_dir"); }
    std::string data_dir() const { return gets("data_dir"); }
    // "<data_dir>/<fallback>" unless the path key is set explicitly
    std::string path(const std::string& key, const std::string& fallback) const;

    void write(const std::string& path) const;
};

// Parses a string override into the type of the default for that key.
nlohmann::json parse_override(const std::string& key, const std::string& value);

}  // namespace relex
