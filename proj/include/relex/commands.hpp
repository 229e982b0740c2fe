#pragma once

#include "relex/config.hpp"

namespace relex {

// Pipeline stages behind the CLI subcommands. Each reads the prior stage's
// artifacts, writes its own plus the effective config into out_dir, and
// throws Error (nonzero exit) when an input artifact is missing.
int cmd_gen_synth(const RunConfig& cfg);
int cmd_pretrain_transe(const RunConfig& cfg);
int cmd_pretrain_cnn(const RunConfig& cfg);
int cmd_pretrain_policy(const RunConfig& cfg);
int cmd_train(const RunConfig& cfg);
int cmd_select(const RunConfig& cfg);
int cmd_eval(const RunConfig& cfg);

}  // namespace relex
