#include <cstdio>
#include <functional>
#include <map>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "relex/commands.hpp"
#include "relex/error.hpp"

namespace {

struct StageArgs {
    std::string config_path;
    std::vector<std::pair<std::string, std::string>> overrides;
};

// Every configuration key becomes a --key <value> option on every
// subcommand, so anything unknown is rejected by the parser itself.
void add_config_options(CLI::App* cmd, StageArgs& args) {
    cmd->add_option("--config", args.config_path, "JSON config file");
    for (const auto& [key, value] : relex::RunConfig::defaults().items()) {
        const std::string name = "--" + key;
        cmd->add_option_function<std::string>(
            name,
            [&args, key = key](const std::string& v) { args.overrides.emplace_back(key, v); },
            "override (default: " + value.dump() + ")");
    }
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Sentence-level relation classification from noisy data:\n"
                 "a REINFORCE-trained instance selector feeding a CNN classifier"};
    app.require_subcommand(1);

    const std::vector<std::pair<std::string, std::function<int(const relex::RunConfig&)>>> stages = {
        {"gen-synth", relex::cmd_gen_synth},
        {"pretrain-transe", relex::cmd_pretrain_transe},
        {"pretrain-cnn", relex::cmd_pretrain_cnn},
        {"pretrain-policy", relex::cmd_pretrain_policy},
        {"train", relex::cmd_train},
        {"select", relex::cmd_select},
        {"eval", relex::cmd_eval},
    };

    std::map<std::string, StageArgs> stage_args;
    for (const auto& [name, fn] : stages) {
        CLI::App* sub = app.add_subcommand(name);
        add_config_options(sub, stage_args[name]);
    }

    CLI11_PARSE(app, argc, argv);

    for (const auto& [name, fn] : stages) {
        if (!app.get_subcommand(name)->parsed()) continue;
        const StageArgs& args = stage_args[name];
        try {
            relex::RunConfig cfg = relex::RunConfig::make(args.config_path, args.overrides);
            return fn(cfg);
        } catch (const relex::Error& e) {
            std::fprintf(stderr, "error: %s\n", e.what());
            return 1;
        } catch (const std::exception& e) {
            std::fprintf(stderr, "error: %s\n", e.what());
            return 1;
        }
    }
    return 1;
}
