#include "relex/eval.hpp"

#include <algorithm>
#include <fstream>
#include <map>
#include <set>
#include <tuple>

#include "relex/parallel.hpp"
#include "relex/util.hpp"

namespace relex {

std::vector<PredictionRecord> predict_corpus(const Corpus& corpus, const Cnn& net, int threads) {
    std::vector<PredictionRecord> records(corpus.size());
    parallel_for(static_cast<int>(corpus.size()), threads, [&](int i) {
        const Sentence& s = corpus.sentences[static_cast<std::size_t>(i)];
        PredictionRecord r;
        r.sentence_id = s.id;
        r.gold = s.relation_id;
        r.scores = predict(s, net);
        r.predicted = 0;
        for (std::size_t c = 1; c < r.scores.size(); ++c)
            if (r.scores[c] > r.scores[static_cast<std::size_t>(r.predicted)])
                r.predicted = static_cast<int>(c);
        records[static_cast<std::size_t>(i)] = std::move(r);
    });
    return records;
}

Metrics sentence_metrics(const std::vector<PredictionRecord>& records, int n_r, bool exclude_na,
                         int na_id) {
    if (records.empty()) fail("sentence_metrics: no records");
    Metrics m;
    std::vector<long> tp(static_cast<std::size_t>(n_r), 0), fp(static_cast<std::size_t>(n_r), 0),
        fn(static_cast<std::size_t>(n_r), 0), gold(static_cast<std::size_t>(n_r), 0),
        pred(static_cast<std::size_t>(n_r), 0);
    long correct = 0;
    for (const auto& r : records) {
        if (r.gold < 0 || r.gold >= n_r || r.predicted < 0 || r.predicted >= n_r)
            fail("sentence_metrics: relation id out of range");
        ++gold[static_cast<std::size_t>(r.gold)];
        ++pred[static_cast<std::size_t>(r.predicted)];
        if (r.gold == r.predicted) {
            ++correct;
            ++tp[static_cast<std::size_t>(r.gold)];
        } else {
            ++fn[static_cast<std::size_t>(r.gold)];
            ++fp[static_cast<std::size_t>(r.predicted)];
        }
    }
    m.accuracy = static_cast<double>(correct) / static_cast<double>(records.size());

    double f1_sum = 0.0;
    int f1_count = 0;
    for (int c = 0; c < n_r; ++c) {
        ClassMetrics cm;
        cm.cls = c;
        cm.tp = tp[static_cast<std::size_t>(c)];
        cm.fp = fp[static_cast<std::size_t>(c)];
        cm.fn = fn[static_cast<std::size_t>(c)];
        cm.gold_count = gold[static_cast<std::size_t>(c)];
        cm.precision = cm.tp + cm.fp > 0 ? static_cast<double>(cm.tp) / (cm.tp + cm.fp) : 0.0;
        cm.recall = cm.tp + cm.fn > 0 ? static_cast<double>(cm.tp) / (cm.tp + cm.fn) : 0.0;
        cm.f1 = cm.precision + cm.recall > 0.0
                    ? 2.0 * cm.precision * cm.recall / (cm.precision + cm.recall)
                    : 0.0;
        m.per_class.push_back(cm);
        if (cm.gold_count > 0 && !(exclude_na && c == na_id)) {
            f1_sum += cm.f1;
            ++f1_count;
        }
    }
    m.macro_f1 = f1_count > 0 ? f1_sum / f1_count : 0.0;
    return m;
}

namespace {

struct Candidate {
    double score;
    int id;   // sentence id or pair index
    int rel;
    bool hit;
};

std::vector<PrPoint> sweep(std::vector<Candidate>& cands, long total_pos) {
    std::sort(cands.begin(), cands.end(), [](const Candidate& a, const Candidate& b) {
        if (a.score != b.score) return a.score > b.score;
        if (a.id != b.id) return a.id < b.id;
        return a.rel < b.rel;
    });
    std::vector<PrPoint> out;
    out.reserve(cands.size());
    long tp = 0;
    long k = 0;
    for (const Candidate& c : cands) {
        ++k;
        if (c.hit) ++tp;
        out.push_back(PrPoint{c.score, static_cast<double>(tp) / static_cast<double>(k),
                              static_cast<double>(tp) / static_cast<double>(total_pos)});
    }
    return out;
}

}  // namespace

std::vector<PrPoint> pr_curve(const std::vector<PredictionRecord>& records, int na_id) {
    long total_pos = 0;
    for (const auto& r : records)
        if (r.gold != na_id) ++total_pos;
    if (total_pos == 0) fail("pr_curve: no positive gold labels");

    std::vector<Candidate> cands;
    for (const auto& r : records) {
        for (int rel = 0; rel < static_cast<int>(r.scores.size()); ++rel) {
            if (rel == na_id) continue;
            cands.push_back(Candidate{r.scores[static_cast<std::size_t>(rel)], r.sentence_id, rel,
                                      r.gold == rel});
        }
    }
    return sweep(cands, total_pos);
}

std::vector<PrPoint> heldout_fact_pr(const Corpus& corpus,
                                     const std::vector<PredictionRecord>& records, int na_id) {
    std::map<int, const PredictionRecord*> by_id;
    for (const auto& r : records) by_id[r.sentence_id] = &r;

    // pairs in bag order; gold facts from the bag labels
    std::map<std::pair<std::string, std::string>, int> pair_idx;
    std::vector<std::vector<const Bag*>> pair_bags;
    std::set<std::pair<int, int>> gold;  // (pair index, relation)
    for (const Bag& bag : corpus.bags) {
        auto key = std::make_pair(bag.head, bag.tail);
        auto it = pair_idx.find(key);
        if (it == pair_idx.end()) {
            it = pair_idx.emplace(key, static_cast<int>(pair_bags.size())).first;
            pair_bags.emplace_back();
        }
        pair_bags[static_cast<std::size_t>(it->second)].push_back(&bag);
        if (bag.relation_id != na_id) gold.insert({it->second, bag.relation_id});
    }
    if (gold.empty()) fail("heldout_fact_pr: no positive gold facts");

    std::vector<Candidate> cands;
    const int n_r = corpus.n_relations();
    for (std::size_t p = 0; p < pair_bags.size(); ++p) {
        for (int rel = 0; rel < n_r; ++rel) {
            if (rel == na_id) continue;
            double best = -1.0;
            for (const Bag* bag : pair_bags[p]) {
                for (int sid : bag->sentence_ids) {
                    auto it = by_id.find(sid);
                    if (it == by_id.end()) continue;
                    best = std::max(best, it->second->scores[static_cast<std::size_t>(rel)]);
                }
            }
            if (best < 0.0) continue;  // no scored mention of this pair
            cands.push_back(Candidate{best, static_cast<int>(p), rel,
                                      gold.count({static_cast<int>(p), rel}) > 0});
        }
    }
    return sweep(cands, static_cast<long>(gold.size()));
}

std::vector<int> greedy_select(const Corpus& corpus, const Cnn& net, int n,
                               const std::vector<int>* pool) {
    if (n <= 0) fail("greedy_select: n must be positive");
    std::vector<int> ids;
    if (pool) {
        ids = *pool;
    } else {
        ids.reserve(corpus.size());
        for (const Sentence& s : corpus.sentences) ids.push_back(s.id);
    }
    if (n > static_cast<int>(ids.size())) fail("greedy_select: n exceeds the candidate pool");

    std::vector<std::pair<double, int>> scored(ids.size());
    parallel_for(static_cast<int>(ids.size()), 1, [&](int i) {
        const Sentence& s = corpus.by_id(ids[static_cast<std::size_t>(i)]);
        scored[static_cast<std::size_t>(i)] = {log_prob(s, s.relation_id, net), s.id};
    });
    std::sort(scored.begin(), scored.end(), [](const auto& a, const auto& b) {
        if (a.first != b.first) return a.first > b.first;
        return a.second < b.second;
    });
    std::vector<int> out;
    out.reserve(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) out.push_back(scored[static_cast<std::size_t>(i)].second);
    std::sort(out.begin(), out.end());
    return out;
}

AuditSummary selection_audit(const std::vector<Decision>& decisions) {
    if (decisions.empty()) fail("selection_audit: no decisions");
    AuditSummary a;
    long correct = 0;
    for (const Decision& d : decisions) {
        if (!d.noise_flag.has_value()) fail("selection_audit: decision lacks a noise flag");
        const bool noisy = *d.noise_flag;
        if (d.action == 1) {
            ++a.kept;
            if (!noisy) ++correct;
        } else {
            ++a.rejected;
            if (noisy) {
                ++a.noisy_rejected;
                ++correct;
            }
        }
    }
    a.total = static_cast<long>(decisions.size());
    a.accuracy = static_cast<double>(correct) / static_cast<double>(a.total);
    return a;
}

NoisyBagStats noisy_bag_stats(const std::vector<Decision>& decisions, const Corpus& corpus) {
    std::map<int, int> bag_of;  // sentence id -> bag index
    for (std::size_t k = 0; k < corpus.bags.size(); ++k)
        for (int sid : corpus.bags[k].sentence_ids) bag_of[sid] = static_cast<int>(k);

    std::map<int, bool> any_kept;  // over bags that appear in the decisions
    for (const Decision& d : decisions) {
        auto it = bag_of.find(d.sentence_id);
        if (it == bag_of.end()) fail("noisy_bag_stats: decision for an unknown sentence");
        auto [slot, inserted] = any_kept.try_emplace(it->second, false);
        if (d.action == 1) slot->second = true;
    }

    NoisyBagStats stats;
    int all_noisy = 0;
    for (const auto& [bag_idx, kept] : any_kept) {
        if (kept) continue;
        ++stats.filtered_bags;
        bool noisy = true;
        for (int sid : corpus.bags[static_cast<std::size_t>(bag_idx)].sentence_ids) {
            const auto& flag = corpus.by_id(sid).noise_flag;
            if (!flag.has_value()) fail("noisy_bag_stats: sentence lacks a noise flag");
            if (!*flag) {
                noisy = false;
                break;
            }
        }
        if (noisy) ++all_noisy;
    }
    if (stats.filtered_bags > 0)
        stats.frac_all_noisy = static_cast<double>(all_noisy) / stats.filtered_bags;
    return stats;
}

void write_pr_points(const std::vector<PrPoint>& points, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) fail("cannot write PR file: " + path);
    out << "# threshold\tprecision\trecall\n";
    for (const PrPoint& p : points)
        out << fmt_double(p.threshold) << '\t' << fmt_double(p.precision) << '\t'
            << fmt_double(p.recall) << '\n';
    if (!out) fail("write failed: " + path);
}

}  // namespace relex
