#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "relex/classifier.hpp"
#include "relex/corpus.hpp"
#include "relex/embeddings.hpp"
#include "relex/rng.hpp"

namespace relex {

// Logistic policy over state features: pi(s, 1) = sigmoid(w . F(s) + b).
struct PolicyParams {
    std::vector<double> w;
    double b = 0.0;

    int dim() const { return static_cast<int>(w.size()); }
    static PolicyParams zeros(int dim);
    static PolicyParams init(int dim, std::uint64_t seed);
};

// F(s) = [cur_repr | chosen_avg | head_emb | tail_emb]; chosen_avg is the
// zero vector before anything is chosen.
struct SelectorState {
    std::vector<double> cur_repr;
    std::vector<double> chosen_avg;
    std::vector<double> head_emb;
    std::vector<double> tail_emb;

    int dim() const {
        return static_cast<int>(cur_repr.size() + chosen_avg.size() + head_emb.size() +
                                tail_emb.size());
    }
    std::vector<double> concat() const;
};

struct Trajectory {
    int bag_index = -1;
    std::vector<SelectorState> states;
    std::vector<int> actions;  // 0/1, one per bag sentence
    double terminal_reward = 0.0;
    bool reward_set = false;
};

double sigmoid(double z);
double policy_z(const PolicyParams& p, const SelectorState& s);
double policy_prob(const PolicyParams& p, const SelectorState& s, int action);

// State for the index-th sentence (0-based) of the bag given the already
// chosen indices; cur_repr comes from the snapshot CNN in eval mode.
SelectorState state_features(const Bag& bag, std::size_t index, const std::vector<int>& chosen,
                             const Corpus& corpus, const Cnn& snapshot,
                             const EmbeddingTable& entities);

// tanh-layer outputs for every sentence of the bag, eval mode.
std::vector<std::vector<double>> bag_reprs(const Bag& bag, const Corpus& corpus,
                                           const Cnn& snapshot);

// Sequential Bernoulli sampling over the bag; terminal reward left unset.
Trajectory sample_trajectory(const Bag& bag, int bag_index, const Corpus& corpus,
                             const PolicyParams& policy, const Cnn& snapshot,
                             const EmbeddingTable& entities, Rng& rng);

// Core walk shared with the trainer's cached path. member_order holds indices
// into reprs/logliks; greedy thresholds at 0.5 instead of sampling.
Trajectory walk_bag(const std::vector<std::vector<double>>& reprs,
                    const std::vector<std::size_t>& member_order,
                    std::span<const double> head_emb, std::span<const double> tail_emb,
                    const PolicyParams& policy, bool greedy, Rng* rng, int bag_index);

// Mean log-likelihood of the chosen sentences, or the precomputed
// whole-corpus average when nothing was chosen.
double bag_reward(const std::vector<double>& chosen_logliks, double fallback_avg_loglik);
double bag_reward(const Bag& bag, const std::vector<int>& chosen, const Corpus& corpus,
                  const Cnn& snapshot, double fallback_avg_loglik);

// REINFORCE ascent step: theta += lr * sum_i v_i * grad log pi(s_i, a_i),
// with v_i equal to the terminal reward at every step.
void policy_update(const Trajectory& traj, PolicyParams& policy, double lr);

enum class SelectMode { kGreedy, kSample };

struct Decision {
    int sentence_id = 0;
    int bag_index = -1;
    double prob = 0.0;  // sigma(z) at decision time
    int action = 0;
    std::optional<bool> noise_flag;
};

struct SelectOptions {
    SelectMode mode = SelectMode::kGreedy;
    bool select_na_bags = true;
};

struct SelectionResult {
    std::vector<int> selected_ids;    // policy-selected sentences
    std::vector<int> bypassed_ids;    // NA-bag sentences when those skip the selector
    std::vector<Decision> decisions;  // one per sentence of every processed bag
    int bags_processed = 0;
    int bags_filtered = 0;  // processed bags with zero selections
};

SelectionResult select_corpus(const Corpus& corpus, const PolicyParams& policy,
                              const Cnn& snapshot, const EmbeddingTable& entities,
                              const SelectOptions& opts, Rng* rng = nullptr);

void write_decisions(const std::vector<Decision>& decisions, const Corpus& corpus,
                     const std::string& path);
std::vector<Decision> load_decisions(const std::string& path);

}  // namespace relex
