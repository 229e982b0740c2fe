#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "relex/corpus.hpp"
#include "relex/matrix.hpp"
#include "relex/rng.hpp"

namespace relex {

struct CnnConfig {
    int vocab_size = 0;
    int n_relations = 0;
    int d_w = 50;   // word embedding width
    int d_p = 5;    // position embedding width
    int d_s = 230;  // feature maps
    int max_rel = 30;
    int window = 3;
    double keep_prob = 0.5;

    int d() const { return d_w + 2 * d_p; }
    int n_pos() const { return 2 * max_rel + 1; }
};

// CNN relation classifier: embedded input rows, a linear convolution over
// every window of 3 consecutive rows, element-wise max over windows, tanh,
// dropout (train only), softmax output. Carries its vocab and relation maps
// so sentences from any split embed consistently.
struct Cnn {
    CnnConfig cfg;
    Matrix word_emb;      // vocab_size x d_w
    Matrix pos_head_emb;  // n_pos x d_p
    Matrix pos_tail_emb;  // n_pos x d_p
    Matrix conv_w;        // d_s x (3 d)
    Matrix conv_b;        // 1 x d_s
    Matrix out_w;         // n_relations x d_s
    Matrix out_b;         // 1 x n_relations

    std::vector<std::string> vocab;
    std::map<std::string, int> vocab_index;
    std::vector<std::string> relations;
    int na_id = 0;

    static Cnn init(const CnnConfig& cfg, std::vector<std::string> vocab,
                    std::vector<std::string> relations, int na_id, std::uint64_t seed);

    int word_id(const std::string& w) const {
        auto it = vocab_index.find(w);
        return it == vocab_index.end() ? kUnkId : it->second;
    }

    std::vector<std::pair<std::string, Matrix*>> tensors();
    std::vector<std::pair<std::string, const Matrix*>> tensors() const;
};

enum class Mode { kTrain, kEval };

struct ForwardTrace {
    std::vector<int> word_ids;      // padded: PAD, tokens..., PAD
    std::vector<int> pos_head_ids;  // same length
    std::vector<int> pos_tail_ids;
    Matrix input;                // (m+2) x d
    Matrix conv;                 // n_windows x d_s, pre-pool
    std::vector<int> argmax;     // d_s, winning window per feature
    std::vector<double> pooled;  // L
    std::vector<double> rep;     // tanh(L)
    std::vector<double> mask;    // d_s inverted-dropout mask; empty in eval
    std::vector<double> rep_dropped;
    std::vector<double> logits;
    std::vector<double> probs;
};

struct CnnGrads {
    Matrix conv_w, conv_b, out_w, out_b;
    // only rows touched by the batch
    std::map<int, std::vector<double>> word_rows, pos_head_rows, pos_tail_rows;

    static CnnGrads zeros(const CnnConfig& cfg);
};

// Padded embedding rows: [word_emb | pos_head_emb | pos_tail_emb] per token,
// with one PAD row at each end (virtual positions -1 and m).
Matrix embed_input(const Sentence& s, const Cnn& net);

// rng is required in train mode (dropout draws) and ignored in eval.
ForwardTrace encode(const Sentence& s, const Cnn& net, Mode mode, Rng* rng = nullptr);

std::vector<double> predict(const Sentence& s, const Cnn& net);
double log_prob(const Sentence& s, int relation_id, const Cnn& net);

// Mean cross-entropy over the batch and its gradients; labels come from each
// sentence's relation_id. Dropout is live (keep_prob < 1) in this path.
double loss_and_grads(const std::vector<const Sentence*>& batch, const Cnn& net, Rng& rng,
                      CnnGrads& out);

void sgd_step(Cnn& net, const CnnGrads& g, double lr);

// Stable helpers (max-subtracted).
void softmax_inplace(std::vector<double>& logits);
double log_sum_exp(const std::vector<double>& logits);

}  // namespace relex
