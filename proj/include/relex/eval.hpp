#pragma once

#include <optional>
#include <string>
#include <vector>

#include "relex/classifier.hpp"
#include "relex/corpus.hpp"
#include "relex/selector.hpp"

namespace relex {

struct PredictionRecord {
    int sentence_id = 0;
    int gold = 0;
    int predicted = 0;
    std::vector<double> scores;  // sums to 1
};

std::vector<PredictionRecord> predict_corpus(const Corpus& corpus, const Cnn& net,
                                             int threads = 1);

struct ClassMetrics {
    int cls = 0;
    long tp = 0, fp = 0, fn = 0;
    double precision = 0.0, recall = 0.0, f1 = 0.0;
    long gold_count = 0;
};

struct Metrics {
    double accuracy = 0.0;
    // unweighted mean F1 over classes present in gold; classes with neither
    // gold nor predicted instances are excluded
    double macro_f1 = 0.0;
    std::vector<ClassMetrics> per_class;
};

Metrics sentence_metrics(const std::vector<PredictionRecord>& records, int n_r, bool exclude_na,
                         int na_id);

struct PrPoint {
    double threshold = 0.0;
    double precision = 0.0;
    double recall = 0.0;
};

// Sentence-level sweep: every (record, non-NA relation) candidate ranked by
// score descending (ties: sentence id, then relation); recall is monotone
// along the sweep.
std::vector<PrPoint> pr_curve(const std::vector<PredictionRecord>& records, int na_id);

// Held-out variant scored per (entity pair, relation) fact against the
// corpus bag labels, deduplicating each fact to its max-confidence mention.
std::vector<PrPoint> heldout_fact_pr(const Corpus& corpus,
                                     const std::vector<PredictionRecord>& records, int na_id);

// Top n sentences by log p(label | sentence), ties broken by ascending id;
// pool restricts the candidate set (default: the whole corpus).
std::vector<int> greedy_select(const Corpus& corpus, const Cnn& net, int n,
                               const std::vector<int>* pool = nullptr);

struct AuditSummary {
    double accuracy = 0.0;  // (kept & clean) + (rejected & noisy), over all
    long kept = 0;
    long rejected = 0;
    long noisy_rejected = 0;
    long total = 0;
};

AuditSummary selection_audit(const std::vector<Decision>& decisions);

struct NoisyBagStats {
    int filtered_bags = 0;
    std::optional<double> frac_all_noisy;  // absent when nothing was filtered
};

NoisyBagStats noisy_bag_stats(const std::vector<Decision>& decisions, const Corpus& corpus);

void write_pr_points(const std::vector<PrPoint>& points, const std::string& path);

}  // namespace relex
