#include <algorithm>
#include <cmath>
#include <map>
#include <set>

#include "doctest.h"
#include "relex/eval.hpp"
#include "relex/rng.hpp"
#include "relex/synth.hpp"

using namespace relex;

namespace {

PredictionRecord rec(int id, int gold, std::vector<double> scores) {
    PredictionRecord r;
    r.sentence_id = id;
    r.gold = gold;
    r.scores = std::move(scores);
    r.predicted = 0;
    for (std::size_t c = 1; c < r.scores.size(); ++c)
        if (r.scores[c] > r.scores[static_cast<std::size_t>(r.predicted)])
            r.predicted = static_cast<int>(c);
    return r;
}

std::vector<double> random_scores(int n, Rng& rng) {
    std::vector<double> s(static_cast<std::size_t>(n));
    double sum = 0;
    for (double& x : s) {
        x = rng.uniform(0.01, 1.0);
        sum += x;
    }
    for (double& x : s) x /= sum;
    return s;
}

// Brute-force reimplementation: per-class confusion by rescanning the records
// for every class, then the same F1 formula.
Metrics naive_metrics(const std::vector<PredictionRecord>& records, int n_r, bool exclude_na,
                      int na_id) {
    Metrics m;
    long correct = 0;
    for (const auto& r : records) correct += r.gold == r.predicted ? 1 : 0;
    m.accuracy = static_cast<double>(correct) / static_cast<double>(records.size());
    double sum = 0;
    int count = 0;
    for (int c = 0; c < n_r; ++c) {
        long tp = 0, fp = 0, fn = 0, gold = 0;
        for (const auto& r : records) {
            if (r.gold == c) ++gold;
            if (r.predicted == c && r.gold == c) ++tp;
            if (r.predicted == c && r.gold != c) ++fp;
            if (r.predicted != c && r.gold == c) ++fn;
        }
        ClassMetrics cm;
        cm.cls = c;
        cm.tp = tp;
        cm.fp = fp;
        cm.fn = fn;
        cm.gold_count = gold;
        cm.precision = tp + fp > 0 ? static_cast<double>(tp) / (tp + fp) : 0.0;
        cm.recall = tp + fn > 0 ? static_cast<double>(tp) / (tp + fn) : 0.0;
        cm.f1 = cm.precision + cm.recall > 0
                    ? 2.0 * cm.precision * cm.recall / (cm.precision + cm.recall)
                    : 0.0;
        m.per_class.push_back(cm);
        if (gold > 0 && !(exclude_na && c == na_id)) {
            sum += cm.f1;
            ++count;
        }
    }
    m.macro_f1 = count > 0 ? sum / count : 0.0;
    return m;
}

// Brute-force PR: same candidate ordering, but tp recomputed per prefix by a
// fresh quadratic scan.
std::vector<PrPoint> naive_pr(const std::vector<PredictionRecord>& records, int na_id) {
    struct C {
        double score;
        int id, rel;
        bool hit;
    };
    std::vector<C> cands;
    long total = 0;
    for (const auto& r : records) {
        if (r.gold != na_id) ++total;
        for (int rel = 0; rel < static_cast<int>(r.scores.size()); ++rel)
            if (rel != na_id)
                cands.push_back({r.scores[static_cast<std::size_t>(rel)], r.sentence_id, rel,
                                 r.gold == rel});
    }
    std::sort(cands.begin(), cands.end(), [](const C& a, const C& b) {
        return a.score != b.score ? a.score > b.score
                                  : (a.id != b.id ? a.id < b.id : a.rel < b.rel);
    });
    std::vector<PrPoint> out;
    for (std::size_t i = 0; i < cands.size(); ++i) {
        long tp = 0;
        for (std::size_t j = 0; j <= i; ++j) tp += cands[j].hit ? 1 : 0;
        out.push_back({cands[i].score, static_cast<double>(tp) / static_cast<double>(i + 1),
                       static_cast<double>(tp) / static_cast<double>(total)});
    }
    return out;
}

}  // namespace

TEST_CASE("sentence_metrics trivial and hand cases") {
    std::vector<PredictionRecord> perfect{rec(0, 1, {0.1, 0.8, 0.1}), rec(1, 2, {0.1, 0.1, 0.8}),
                                          rec(2, 0, {0.8, 0.1, 0.1})};
    Metrics m = sentence_metrics(perfect, 3, false, 0);
    CHECK(m.accuracy == 1.0);
    CHECK(m.macro_f1 == 1.0);

    // confusion [[1,1],[0,2]] over classes {0,1}
    std::vector<PredictionRecord> mixed{
        rec(0, 0, {0.9, 0.1}),  // correct 0
        rec(1, 0, {0.2, 0.8}),  // 0 predicted as 1
        rec(2, 1, {0.1, 0.9}),  // correct 1
        rec(3, 1, {0.3, 0.7}),  // correct 1
    };
    Metrics h = sentence_metrics(mixed, 2, false, -1);
    CHECK(h.accuracy == doctest::Approx(0.75));
    CHECK(h.per_class[0].f1 == doctest::Approx(2.0 / 3.0));
    CHECK(h.per_class[1].f1 == doctest::Approx(0.8));
    CHECK(h.macro_f1 == doctest::Approx((2.0 / 3.0 + 0.8) / 2.0));

    CHECK_THROWS_AS(sentence_metrics({}, 3, false, 0), Error);
}

TEST_CASE("metrics bounds and diagonal property") {
    Rng rng(1);
    for (int round = 0; round < 30; ++round) {
        const int n_r = static_cast<int>(rng.uniform_int(2, 6));
        std::vector<PredictionRecord> records;
        const int n = static_cast<int>(rng.uniform_int(1, 40));
        bool diagonal = true;
        for (int i = 0; i < n; ++i) {
            const int gold = static_cast<int>(rng.uniform_int(0, n_r - 1));
            auto r = rec(i, gold, random_scores(n_r, rng));
            diagonal = diagonal && r.predicted == gold;
            records.push_back(std::move(r));
        }
        Metrics m = sentence_metrics(records, n_r, false, 0);
        CHECK(m.accuracy >= 0.0);
        CHECK(m.accuracy <= 1.0);
        CHECK(m.macro_f1 >= 0.0);
        CHECK(m.macro_f1 <= 1.0);
        if (m.macro_f1 == 1.0) CHECK(diagonal);
        if (diagonal) CHECK(m.macro_f1 == 1.0);
    }
}

TEST_CASE("sentence_metrics and pr_curve match brute force on 100 random sets") {
    Rng rng(17);
    for (int round = 0; round < 100; ++round) {
        const int n_r = static_cast<int>(rng.uniform_int(2, 6));
        const int na_id = 0;
        const int n = static_cast<int>(rng.uniform_int(1, 25));
        std::vector<PredictionRecord> records;
        bool has_positive = false;
        for (int i = 0; i < n; ++i) {
            const int gold = static_cast<int>(rng.uniform_int(0, n_r - 1));
            has_positive = has_positive || gold != na_id;
            records.push_back(rec(i, gold, random_scores(n_r, rng)));
        }
        const bool exclude_na = rng.bernoulli(0.5);

        Metrics a = sentence_metrics(records, n_r, exclude_na, na_id);
        Metrics b = naive_metrics(records, n_r, exclude_na, na_id);
        CHECK(a.accuracy == b.accuracy);
        CHECK(a.macro_f1 == b.macro_f1);
        REQUIRE(a.per_class.size() == b.per_class.size());
        for (std::size_t c = 0; c < a.per_class.size(); ++c) {
            CHECK(a.per_class[c].precision == b.per_class[c].precision);
            CHECK(a.per_class[c].recall == b.per_class[c].recall);
            CHECK(a.per_class[c].f1 == b.per_class[c].f1);
        }

        if (!has_positive) {
            CHECK_THROWS_AS(pr_curve(records, na_id), Error);
            continue;
        }
        auto pa = pr_curve(records, na_id);
        auto pb = naive_pr(records, na_id);
        REQUIRE(pa.size() == pb.size());
        for (std::size_t i = 0; i < pa.size(); ++i) {
            CHECK(pa[i].threshold == pb[i].threshold);
            CHECK(pa[i].precision == pb[i].precision);
            CHECK(pa[i].recall == pb[i].recall);
        }
        for (std::size_t i = 1; i < pa.size(); ++i) CHECK(pa[i].recall >= pa[i - 1].recall);
    }
}

TEST_CASE("pr_curve trivial shapes") {
    // perfect classifier: precision 1.0 until recall reaches 1
    std::vector<PredictionRecord> perfect{rec(0, 1, {0.0, 0.99, 0.01}),
                                          rec(1, 2, {0.0, 0.02, 0.98}),
                                          rec(2, 1, {0.0, 0.97, 0.03})};
    auto curve = pr_curve(perfect, 0);
    for (const auto& p : curve) {
        if (p.recall < 1.0) CHECK(p.precision == 1.0);
    }
    CHECK(curve.back().recall == 1.0);

    // one wrong prediction: (0, 0) at its threshold
    std::vector<PredictionRecord> wrong{rec(0, 1, {0.0, 0.1, 0.9})};
    auto c2 = pr_curve(wrong, 0);
    CHECK(c2.front().precision == 0.0);
    CHECK(c2.front().recall == 0.0);
}

TEST_CASE("pr_curve is invariant under monotone score transforms") {
    Rng rng(23);
    std::vector<PredictionRecord> records;
    for (int i = 0; i < 15; ++i)
        records.push_back(rec(i, static_cast<int>(rng.uniform_int(0, 3)), random_scores(4, rng)));
    auto base = pr_curve(records, 0);

    std::vector<PredictionRecord> warped = records;
    for (auto& r : warped)
        for (double& s : r.scores) s = std::exp(2.5 * s) + 1.0;
    auto after = pr_curve(warped, 0);
    REQUIRE(base.size() == after.size());
    for (std::size_t i = 0; i < base.size(); ++i) {
        CHECK(base[i].precision == after[i].precision);
        CHECK(base[i].recall == after[i].recall);
    }
}

TEST_CASE("heldout_fact_pr dedupes mentions to max confidence") {
    SynthConfig sc;
    sc.n_relations = 3;
    sc.n_entities = 12;
    sc.n_bags = 8;
    sc.vocab_size = 40;
    sc.rng_seed = 31;
    Corpus c = generate_synthetic(sc);

    Rng rng(5);
    std::vector<PredictionRecord> records;
    for (const Sentence& s : c.sentences)
        records.push_back(rec(s.id, s.relation_id, random_scores(c.n_relations(), rng)));

    auto curve = heldout_fact_pr(c, records, c.na_id);
    long facts = 0;
    for (const Bag& b : c.bags) facts += b.relation_id != c.na_id ? 1 : 0;
    REQUIRE(facts > 0);
    // one candidate per (pair, non-NA relation) with at least one mention
    std::set<std::pair<std::string, std::string>> pairs;
    for (const Bag& b : c.bags) pairs.insert({b.head, b.tail});
    CHECK(curve.size() == pairs.size() * static_cast<std::size_t>(c.n_relations() - 1));
    CHECK(curve.back().recall == 1.0);  // every fact eventually recovered
    for (std::size_t i = 1; i < curve.size(); ++i) CHECK(curve[i].recall >= curve[i - 1].recall);
}

TEST_CASE("greedy_select basics and tie-breaking") {
    SynthConfig sc;
    sc.n_relations = 3;
    sc.n_entities = 10;
    sc.n_bags = 6;
    sc.bag_size_min = 1;
    sc.bag_size_max = 2;
    sc.vocab_size = 30;
    sc.rng_seed = 41;
    Corpus c = generate_synthetic(sc);

    CnnConfig cc;
    cc.vocab_size = static_cast<int>(c.vocab.size());
    cc.n_relations = c.n_relations();
    cc.d_w = 4;
    cc.d_p = 2;
    cc.d_s = 5;
    cc.max_rel = 8;
    Cnn net = Cnn::init(cc, c.vocab, c.relations, c.na_id, 7);

    const int n_all = static_cast<int>(c.size());
    CHECK(greedy_select(c, net, n_all).size() == c.size());
    CHECK(greedy_select(c, net, 1).size() == 1);
    CHECK_THROWS_AS(greedy_select(c, net, 0), Error);
    CHECK_THROWS_AS(greedy_select(c, net, n_all + 1), Error);

    // sort-and-take oracle at N = 3
    std::vector<std::pair<double, int>> scored;
    for (const Sentence& s : c.sentences) scored.push_back({log_prob(s, s.relation_id, net), s.id});
    std::sort(scored.begin(), scored.end(), [](auto& a, auto& b) {
        return a.first != b.first ? a.first > b.first : a.second < b.second;
    });
    std::vector<int> expect{scored[0].second, scored[1].second, scored[2].second};
    std::sort(expect.begin(), expect.end());
    CHECK(greedy_select(c, net, 3) == expect);

    // order-independent given the tie-break rule
    std::vector<int> pool;
    for (const Sentence& s : c.sentences) pool.push_back(s.id);
    std::vector<int> reversed(pool.rbegin(), pool.rend());
    CHECK(greedy_select(c, net, 4, &pool) == greedy_select(c, net, 4, &reversed));

    // a uniform classifier ties every sentence in a bag-size class:
    // ascending-id break makes top-N the smallest ids of the longest... all
    // logliks equal, so the N smallest ids win
    net.out_w.zero();
    net.out_b.zero();
    net.conv_w.zero();
    net.conv_b.zero();
    auto ids = greedy_select(c, net, 3);
    CHECK(ids == std::vector<int>{c.sentences[0].id, c.sentences[1].id, c.sentences[2].id});
}

TEST_CASE("selection_audit hand cases and oracle") {
    // the 74% composition: 300 decisions, 64 kept (45 clean), 236 rejected
    // (177 noisy)
    std::vector<Decision> decisions;
    auto add = [&](int n, int action, bool noisy) {
        for (int i = 0; i < n; ++i) {
            Decision d;
            d.sentence_id = static_cast<int>(decisions.size());
            d.action = action;
            d.noise_flag = noisy;
            decisions.push_back(d);
        }
    };
    add(45, 1, false);
    add(19, 1, true);
    add(177, 0, true);
    add(59, 0, false);
    AuditSummary a = selection_audit(decisions);
    CHECK(a.total == 300);
    CHECK(a.kept == 64);
    CHECK(a.rejected == 236);
    CHECK(a.noisy_rejected == 177);
    CHECK(a.accuracy == doctest::Approx(0.74));

    std::vector<Decision> all_clean;
    add(0, 1, false);
    for (int i = 0; i < 10; ++i) {
        Decision d;
        d.sentence_id = i;
        d.action = 1;
        d.noise_flag = false;
        all_clean.push_back(d);
    }
    CHECK(selection_audit(all_clean).accuracy == 1.0);

    Rng rng(3);
    std::vector<Decision> random;
    long correct = 0;
    for (int i = 0; i < 50; ++i) {
        Decision d;
        d.sentence_id = i;
        d.action = rng.bernoulli(0.5) ? 1 : 0;
        d.noise_flag = rng.bernoulli(0.4);
        correct += ((d.action == 1 && !*d.noise_flag) || (d.action == 0 && *d.noise_flag)) ? 1 : 0;
        random.push_back(d);
    }
    CHECK(selection_audit(random).accuracy ==
          doctest::Approx(static_cast<double>(correct) / 50.0));

    Decision missing;
    missing.sentence_id = 0;
    missing.action = 1;
    CHECK_THROWS_AS(selection_audit({missing}), Error);
}

TEST_CASE("noisy_bag_stats") {
    SynthConfig sc;
    sc.n_relations = 3;
    sc.n_entities = 12;
    sc.n_bags = 6;
    sc.bag_size_min = 2;
    sc.bag_size_max = 2;
    sc.vocab_size = 30;
    sc.noise_rate = {0.0};
    sc.rng_seed = 51;
    Corpus c = generate_synthetic(sc);
    auto set_flag = [&](int sid, bool v) {
        for (auto& s : c.sentences)
            if (s.id == sid) s.noise_flag = v;
    };
    // hand-set flags: bag 0 all-noisy, bag 1 mixed
    for (int sid : c.bags[0].sentence_ids) set_flag(sid, true);
    set_flag(c.bags[1].sentence_ids[0], true);

    auto decide = [&](const Bag& b, int bag_idx, int action) {
        std::vector<Decision> ds;
        for (int sid : b.sentence_ids) {
            Decision d;
            d.sentence_id = sid;
            d.bag_index = bag_idx;
            d.action = action;
            d.noise_flag = c.by_id(sid).noise_flag;
            ds.push_back(d);
        }
        return ds;
    };

    // nothing filtered
    std::vector<Decision> kept = decide(c.bags[0], 0, 1);
    NoisyBagStats none = noisy_bag_stats(kept, c);
    CHECK(none.filtered_bags == 0);
    CHECK(!none.frac_all_noisy.has_value());

    // two filtered bags, one all-noisy
    std::vector<Decision> two = decide(c.bags[0], 0, 0);
    auto more = decide(c.bags[1], 1, 0);
    two.insert(two.end(), more.begin(), more.end());
    NoisyBagStats half = noisy_bag_stats(two, c);
    CHECK(half.filtered_bags == 2);
    CHECK(*half.frac_all_noisy == doctest::Approx(0.5));

    // all-noisy corpus, reject-all policy: fraction 1.0
    for (auto& s : c.sentences) s.noise_flag = true;
    std::vector<Decision> all;
    for (std::size_t k = 0; k < c.bags.size(); ++k) {
        auto ds = decide(c.bags[k], static_cast<int>(k), 0);
        all.insert(all.end(), ds.begin(), ds.end());
    }
    NoisyBagStats full = noisy_bag_stats(all, c);
    CHECK(full.filtered_bags == static_cast<int>(c.bags.size()));
    CHECK(*full.frac_all_noisy == 1.0);
}

TEST_CASE("predict_corpus deterministic across worker counts") {
    SynthConfig sc;
    sc.n_relations = 3;
    sc.n_entities = 12;
    sc.n_bags = 8;
    sc.vocab_size = 30;
    sc.rng_seed = 61;
    Corpus c = generate_synthetic(sc);
    CnnConfig cc;
    cc.vocab_size = static_cast<int>(c.vocab.size());
    cc.n_relations = c.n_relations();
    cc.d_w = 4;
    cc.d_p = 2;
    cc.d_s = 5;
    cc.max_rel = 8;
    Cnn net = Cnn::init(cc, c.vocab, c.relations, c.na_id, 3);
    auto a = predict_corpus(c, net, 1);
    auto b = predict_corpus(c, net, 3);
    REQUIRE(a.size() == b.size());
    for (std::size_t i = 0; i < a.size(); ++i) {
        CHECK(a[i].scores == b[i].scores);
        CHECK(a[i].predicted == b[i].predicted);
    }
}
