#pragma once

#include <cstdint>
#include <vector>

#include "relex/corpus.hpp"

namespace relex {

// Noisy distant-supervision corpus generator. Relation 0 is NA; every
// relation (NA included) owns a disjoint slice of signature words, the rest
// of the vocabulary is shared filler. A clean sentence draws content words
// from its bag label's family; a noisy one draws from a different family but
// keeps the label, with noise_flag recording the mismatch.
struct SynthConfig {
    int n_relations = 5;  // total labels including NA
    int n_entities = 150;
    int n_bags = 600;
    int bag_size_min = 2;
    int bag_size_max = 6;
    std::vector<double> noise_rate;  // per relation id; empty = all zero
    double all_noisy_bag_rate = 0.0;
    int vocab_size = 240;
    int template_len_min = 6;
    int template_len_max = 10;
    std::uint64_t rng_seed = 1;

    double na_bag_fraction = 0.15;  // fraction of bags labeled NA
    // Probability that a noisy sentence in a non-NA bag draws from the NA
    // family rather than another relation's; mirrors distant-supervision
    // noise, which is mostly relation-free text.
    double noise_na_bias = 0.75;
    // Chance that a content word is family signature rather than shared
    // filler; lower values blur the families and make the task harder.
    double signature_prob = 0.65;
    // Sentence stream salt and id offset so one configuration can emit
    // disjoint splits that still share template families and entities.
    std::uint64_t content_salt = 0;
    int id_base = 0;
    // Entity pairs hash into 100 buckets independent of the seed; a split
    // only draws pairs from [lo, hi), which keeps train/valid/test pair sets
    // disjoint the way the NYT held-out split is.
    int pair_bucket_lo = 0;
    int pair_bucket_hi = 100;

    void validate() const;
    std::vector<double> rates() const;  // noise_rate normalized to size n_relations
    std::vector<std::string> relation_names() const;
};

Corpus generate_synthetic(const SynthConfig& cfg);

}  // namespace relex
