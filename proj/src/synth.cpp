#include "relex/synth.hpp"

#include <set>
#include <utility>

#include "relex/rng.hpp"
#include "relex/util.hpp"

namespace relex {

namespace {

struct Families {
    std::vector<std::string> words;                // token universe
    std::vector<std::pair<int, int>> signature;    // per relation: [begin, end) into words
    int filler_begin = 0;
    int filler_end = 0;
};

// Deterministic partition: first two fifths filler, the rest split evenly
// into per-relation signature slices. Independent of the content stream so
// every split of one configuration shares the same families.
Families make_families(const SynthConfig& cfg) {
    Families f;
    f.words.reserve(static_cast<std::size_t>(cfg.vocab_size));
    for (int i = 0; i < cfg.vocab_size; ++i) f.words.push_back(str_format("w%03d", i));
    f.filler_begin = 0;
    f.filler_end = std::max(1, cfg.vocab_size * 2 / 5);
    const int sig_total = cfg.vocab_size - f.filler_end;
    const int per_rel = sig_total / cfg.n_relations;
    if (per_rel < 1) fail("synth: vocab_size too small for the relation count");
    for (int r = 0; r < cfg.n_relations; ++r) {
        int begin = f.filler_end + r * per_rel;
        f.signature.emplace_back(begin, begin + per_rel);
    }
    return f;
}

}  // namespace

void SynthConfig::validate() const {
    if (n_relations < 1) fail("synth: n_relations must be >= 1");
    if (n_entities < 2) fail("synth: need at least 2 entities");
    if (n_bags < 1) fail("synth: n_bags must be >= 1");
    if (bag_size_min < 1 || bag_size_max < bag_size_min) fail("synth: empty bag size range");
    if (template_len_min < 3 || template_len_max < template_len_min)
        fail("synth: template length range must be nonempty with min >= 3");
    if (vocab_size < 2 * n_relations) fail("synth: vocab_size too small");
    auto in01 = [](double x) { return x >= 0.0 && x <= 1.0; };
    if (!in01(all_noisy_bag_rate)) fail("synth: all_noisy_bag_rate outside [0,1]");
    if (!in01(na_bag_fraction)) fail("synth: na_bag_fraction outside [0,1]");
    if (!in01(noise_na_bias)) fail("synth: noise_na_bias outside [0,1]");
    if (!in01(signature_prob)) fail("synth: signature_prob outside [0,1]");
    bool any_noise = all_noisy_bag_rate > 0.0;
    for (double r : rates()) {
        if (!in01(r)) fail("synth: noise_rate outside [0,1]");
        if (r > 0.0) any_noise = true;
    }
    if (any_noise && n_relations < 2)
        fail("synth: noise requires at least 2 relations to draw mislabeled text from");
    if (pair_bucket_lo < 0 || pair_bucket_hi > 100 || pair_bucket_lo >= pair_bucket_hi)
        fail("synth: pair bucket range must satisfy 0 <= lo < hi <= 100");
    const double pairs = static_cast<double>(n_entities) * (n_entities - 1);
    const double available = pairs * (pair_bucket_hi - pair_bucket_lo) / 100.0;
    if (static_cast<double>(n_bags) > 0.5 * available)
        fail("synth: bag count exceeds half the entity pairs available to this split");
}

std::vector<double> SynthConfig::rates() const {
    if (noise_rate.empty()) return std::vector<double>(static_cast<std::size_t>(n_relations), 0.0);
    if (static_cast<int>(noise_rate.size()) == 1)
        return std::vector<double>(static_cast<std::size_t>(n_relations), noise_rate[0]);
    if (static_cast<int>(noise_rate.size()) != n_relations)
        fail("synth: noise_rate must have one entry, or one per relation");
    return noise_rate;
}

std::vector<std::string> SynthConfig::relation_names() const {
    std::vector<std::string> names{kNaRelation};
    for (int r = 1; r < n_relations; ++r) names.push_back(str_format("r%d", r));
    return names;
}

Corpus generate_synthetic(const SynthConfig& cfg) {
    cfg.validate();
    const Families fam = make_families(cfg);
    const std::vector<double> rate = cfg.rates();
    const std::vector<std::string> rel_names = cfg.relation_names();

    Rng rng(cfg.rng_seed + cfg.content_salt * 0x9e3779b97f4a7c15ull);

    auto entity_name = [](int e) { return str_format("e%03d", e); };
    auto draw_family_word = [&](int family) -> const std::string& {
        if (rng.bernoulli(cfg.signature_prob)) {
            auto [b, e] = fam.signature[static_cast<std::size_t>(family)];
            return fam.words[static_cast<std::size_t>(rng.uniform_int(b, e - 1))];
        }
        return fam.words[static_cast<std::size_t>(rng.uniform_int(fam.filler_begin, fam.filler_end - 1))];
    };
    // A family other than the label. Real-bag noise prefers the NA family;
    // NA-bag noise is text from a random real relation.
    auto draw_noise_family = [&](int label) -> int {
        if (label == 0) return static_cast<int>(rng.uniform_int(1, cfg.n_relations - 1));
        if (cfg.n_relations == 2 || rng.bernoulli(cfg.noise_na_bias)) return 0;
        int f = static_cast<int>(rng.uniform_int(1, cfg.n_relations - 2));
        if (f >= label) ++f;
        return f;
    };

    // seed-independent pair bucketing (splitmix64), stable across splits
    auto pair_bucket = [](int h, int t) {
        std::uint64_t x = static_cast<std::uint64_t>(h) * 1000003ull + static_cast<std::uint64_t>(t);
        x += 0x9e3779b97f4a7c15ull;
        x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
        x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
        x ^= x >> 31;
        return static_cast<int>(x % 100);
    };

    std::vector<Sentence> sentences;
    std::vector<std::string> sent_rels;
    std::set<std::pair<int, int>> used_pairs;
    int next_id = cfg.id_base;

    for (int k = 0; k < cfg.n_bags; ++k) {
        int relation = 0;
        if (cfg.n_relations > 1 && !rng.bernoulli(cfg.na_bag_fraction))
            relation = static_cast<int>(rng.uniform_int(1, cfg.n_relations - 1));

        int head, tail;
        int attempts = 0;
        do {
            if (++attempts > 200000) fail("synth: could not place a fresh entity pair");
            head = static_cast<int>(rng.uniform_int(0, cfg.n_entities - 1));
            tail = static_cast<int>(rng.uniform_int(0, cfg.n_entities - 1));
        } while (head == tail || used_pairs.count({head, tail}) ||
                 pair_bucket(head, tail) < cfg.pair_bucket_lo ||
                 pair_bucket(head, tail) >= cfg.pair_bucket_hi);
        used_pairs.insert({head, tail});

        const int bag_size = static_cast<int>(rng.uniform_int(cfg.bag_size_min, cfg.bag_size_max));
        const bool force_all_noisy = rng.bernoulli(cfg.all_noisy_bag_rate);

        for (int i = 0; i < bag_size; ++i) {
            const bool noisy =
                force_all_noisy || rng.bernoulli(rate[static_cast<std::size_t>(relation)]);
            const int family = noisy ? draw_noise_family(relation) : relation;

            Sentence s;
            s.id = next_id++;
            s.head = entity_name(head);
            s.tail = entity_name(tail);
            const int m = static_cast<int>(rng.uniform_int(cfg.template_len_min, cfg.template_len_max));
            s.head_index = static_cast<int>(rng.uniform_int(0, m - 1));
            s.tail_index = static_cast<int>(rng.uniform_int(0, m - 2));
            if (s.tail_index >= s.head_index) ++s.tail_index;
            s.tokens.reserve(static_cast<std::size_t>(m));
            for (int t = 0; t < m; ++t) {
                if (t == s.head_index)
                    s.tokens.push_back(s.head);
                else if (t == s.tail_index)
                    s.tokens.push_back(s.tail);
                else
                    s.tokens.push_back(draw_family_word(family));
            }
            s.noise_flag = noisy;
            sentences.push_back(std::move(s));
            sent_rels.push_back(rel_names[static_cast<std::size_t>(relation)]);
        }
    }

    return finalize_corpus(std::move(sentences), sent_rels, &rel_names);
}

}  // namespace relex
