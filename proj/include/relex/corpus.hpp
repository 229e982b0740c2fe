#pragma once

#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "relex/error.hpp"

namespace relex {

inline constexpr int kPadId = 0;
inline constexpr int kUnkId = 1;
inline constexpr const char* kPadToken = "<PAD>";
inline constexpr const char* kUnkToken = "<UNK>";
inline constexpr const char* kNaRelation = "NA";

struct Sentence {
    int id = 0;
    std::vector<std::string> tokens;
    std::string head;
    std::string tail;
    int head_index = 0;
    int tail_index = 0;
    int relation_id = 0;
    std::optional<bool> noise_flag;  // synthetic corpora only

    bool operator==(const Sentence&) const = default;
};

// Sentences sharing (head, tail, relation), ids strictly increasing.
struct Bag {
    std::string head;
    std::string tail;
    int relation_id = 0;
    std::vector<int> sentence_ids;

    std::size_t size() const { return sentence_ids.size(); }
    bool operator==(const Bag&) const = default;
};

struct Corpus {
    std::vector<Sentence> sentences;  // ascending id
    std::vector<Bag> bags;
    std::vector<std::string> vocab;  // [0] = <PAD>, [1] = <UNK>
    std::map<std::string, int> vocab_index;
    std::vector<std::string> relations;  // id -> name, NA always present
    std::map<std::string, int> relation_index;
    int na_id = 0;
    std::vector<std::string> entities;
    std::map<std::string, int> entity_index;
    int truncated_count = 0;  // load-time warnings
    int rejected_count = 0;

    std::size_t size() const { return sentences.size(); }
    int n_relations() const { return static_cast<int>(relations.size()); }
    const Sentence& by_id(int id) const;
    const Sentence& bag_sentence(const Bag& b, std::size_t i) const { return by_id(b.sentence_ids[i]); }
    bool operator==(const Corpus&) const = default;
};

struct LoadOptions {
    int max_len = 120;
    // Pins relation ids to this list (NA first, rest lexicographic) instead of
    // deriving them from the file. Needed when a split must agree with the
    // relation map of a trained model.
    std::vector<std::string> relation_universe;
};

// Groups validated sentences by (head, tail, relation). Bag order follows the
// first appearance of each key in ascending sentence-id order.
std::vector<Bag> build_bags(const std::vector<Sentence>& sentences);

// Per-token offsets to head and tail, clipped to [-max_rel, max_rel] and
// shifted by +max_rel so they index a table of 2*max_rel+1 rows.
std::pair<std::vector<int>, std::vector<int>> position_features(const Sentence& s, int max_rel);

// Builds the canonical Corpus from raw sentences: assigns relation ids
// (NA = 0, rest lexicographic, or the given universe), derives vocab in
// first-appearance order, entity map sorted, validates invariants, groups
// bags. Shared by the loader and the synthetic generator so that a saved
// corpus reloads field-for-field equal.
Corpus finalize_corpus(std::vector<Sentence> sentences,
                       const std::vector<std::string>& sentence_relations,
                       const std::vector<std::string>* relation_universe = nullptr);

Corpus load_corpus(const std::string& path, const LoadOptions& opts = {});
void save_corpus(const Corpus& c, const std::string& path);

}  // namespace relex
