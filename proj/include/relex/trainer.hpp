#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "relex/classifier.hpp"
#include "relex/corpus.hpp"
#include "relex/embeddings.hpp"
#include "relex/selector.hpp"

namespace relex {

struct TrainConfig {
    int episodes = 25;      // L
    int batch_size = 160;
    double lr_cnn = 0.02;
    double lr_policy_pretrain = 0.02;
    double lr_policy_joint = 0.01;
    double tau = 0.001;
    std::uint64_t seed = 1;
    int pretrain_cnn_epochs = 15;
    int pretrain_policy_episodes = 10;
    double keep_prob = 0.5;
    bool select_na_bags = true;      // NA bags skip the selector when false
    bool shuffle_bag_sentences = false;
    int threads = 0;  // read-only fan-out; 0 defers to NOISY_RELEX_THREADS

    // Faithful episode loop samples actions with the target policy and feeds
    // raw rewards to REINFORCE. At small corpus scale that estimator is
    // bistable (the off-policy bias term runs away), so both parts are
    // switchable: sample with the online policy, and center rewards with a
    // running-mean baseline before the update.
    bool sample_with_target = true;
    bool reward_baseline_ema = false;
    double baseline_beta = 0.02;
    // Fresh-policy shaping: weights are Glorot-initialized then scaled, and
    // the bias is shifted. A zero scale with positive bias starts every
    // sentence at the same keep-leaning probability.
    double policy_init_scale = 1.0;
    double policy_init_bias = 0.0;

    void validate() const;
};

struct EpisodeMetrics {
    int episode = 0;
    double mean_reward = 0.0;
    int selected = 0;  // |X hat| fed to the classifier
    double frac_bags_filtered = 0.0;
    double train_loss = 0.0;
    double val_accuracy = 0.0;
};

std::string format_metric_log(const std::vector<EpisodeMetrics>& log);

// Online nets, their targets, and the per-episode bookkeeping of the episode
// loop. Exposed so tests can run the loop with hand-built targets.
struct TrainState {
    PolicyParams policy;
    PolicyParams policy_target;
    Cnn cnn;
    Cnn cnn_target;
    int episode = 0;
    double fallback_avg_loglik = 0.0;
    double reward_baseline = 0.0;
    bool baseline_ready = false;
    std::vector<EpisodeMetrics> log;

    double best_val_accuracy = -1.0;
    int best_episode = -1;
    PolicyParams best_policy, best_policy_target;
    Cnn best_cnn, best_cnn_target;
};

// target = tau * online + (1 - tau) * target, elementwise over every tensor.
void soft_update(PolicyParams& target, const PolicyParams& online, double tau);
void soft_update(Cnn& target, const Cnn& online, double tau);

// Mean over all sentences of log p(label | sentence), eval mode.
double avg_train_loglik(const Corpus& corpus, const Cnn& net, int threads = 1);

double corpus_accuracy(const Corpus& corpus, const Cnn& net, int threads = 1);

// Epochs of shuffled minibatch SGD on the given sentence ids; returns the
// final net, or the best-validation-accuracy snapshot when valid is given.
Cnn train_on_subset(const Corpus& corpus, const std::vector<int>& sentence_ids, Cnn net,
                    int epochs, const TrainConfig& cfg, Rng& rng, const Corpus* valid = nullptr,
                    std::vector<double>* epoch_losses = nullptr);

// First pretraining stage: minibatch SGD on every (noisy) training sentence.
Cnn pretrain_classifier(const Corpus& train, const CnnConfig& cnn_cfg, const TrainConfig& cfg,
                        std::vector<double>* epoch_losses = nullptr);

// The core episode loop. Per episode: shuffle bags,
// refresh the empty-selection fallback from the target CNN, sample a
// trajectory per bag with the target nets, REINFORCE-update the online
// policy, optionally run one classifier epoch on this episode's selections,
// then soft-update both targets.
void run_episodes(TrainState& st, const Corpus& train, const Corpus* valid,
                  const EmbeddingTable& entities, const TrainConfig& cfg, int n_episodes,
                  double policy_lr, bool update_cnn, Rng& rng);

// Second pretraining stage: the episode loop with classifier updates disabled
// (the fixed CNN supplies states and rewards).
PolicyParams pretrain_policy(const Corpus& train, const Cnn& fixed_cnn,
                             const EmbeddingTable& entities, const TrainConfig& cfg,
                             std::vector<EpisodeMetrics>* log = nullptr);

struct JointResult {
    PolicyParams policy, policy_target;
    Cnn cnn, cnn_target;
    std::vector<EpisodeMetrics> log;
    // best-validation snapshot (equal to the final state when no validation
    // corpus was given)
    int best_episode = -1;
    double best_val_accuracy = -1.0;
    PolicyParams best_policy, best_policy_target;
    Cnn best_cnn, best_cnn_target;
};

// Final stage: selector and classifier train together.
JointResult joint_train(const Corpus& train, const Corpus* valid, PolicyParams policy, Cnn cnn,
                        const EmbeddingTable& entities, const TrainConfig& cfg);

}  // namespace relex
