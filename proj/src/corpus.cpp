#include "relex/corpus.hpp"

#include <algorithm>
#include <fstream>
#include <set>
#include <tuple>

#include "json.hpp"
#include "relex/util.hpp"

namespace relex {

namespace {

using nlohmann::json;

void validate_sentence(const Sentence& s) {
    const int m = static_cast<int>(s.tokens.size());
    if (m < 1) fail(str_format("sentence %d: empty token list", s.id));
    if (s.head_index < 0 || s.head_index >= m)
        fail(str_format("sentence %d: head_index %d out of range [0,%d)", s.id, s.head_index, m));
    if (s.tail_index < 0 || s.tail_index >= m)
        fail(str_format("sentence %d: tail_index %d out of range [0,%d)", s.id, s.tail_index, m));
    if (s.head_index == s.tail_index)
        fail(str_format("sentence %d: head_index equals tail_index", s.id));
}

// Keeps a max_len window containing both entity tokens; false when the
// entities are further apart than max_len.
bool truncate_sentence(Sentence& s, int max_len) {
    const int m = static_cast<int>(s.tokens.size());
    if (m <= max_len) return true;
    const int lo_ent = std::min(s.head_index, s.tail_index);
    const int hi_ent = std::max(s.head_index, s.tail_index);
    if (hi_ent - lo_ent + 1 > max_len) return false;
    int start = lo_ent - (max_len - (hi_ent - lo_ent + 1)) / 2;
    start = std::clamp(start, std::max(0, hi_ent - max_len + 1), std::min(lo_ent, m - max_len));
    s.tokens = std::vector<std::string>(s.tokens.begin() + start, s.tokens.begin() + start + max_len);
    s.head_index -= start;
    s.tail_index -= start;
    return true;
}

}  // namespace

const Sentence& Corpus::by_id(int id) const {
    auto it = std::lower_bound(sentences.begin(), sentences.end(), id,
                               [](const Sentence& s, int key) { return s.id < key; });
    if (it == sentences.end() || it->id != id) fail(str_format("unknown sentence id %d", id));
    return *it;
}

std::vector<Bag> build_bags(const std::vector<Sentence>& sentences) {
    std::vector<Bag> bags;
    std::map<std::tuple<std::string, std::string, int>, std::size_t> key_to_bag;
    for (const Sentence& s : sentences) {
        auto key = std::make_tuple(s.head, s.tail, s.relation_id);
        auto it = key_to_bag.find(key);
        if (it == key_to_bag.end()) {
            key_to_bag.emplace(key, bags.size());
            bags.push_back(Bag{s.head, s.tail, s.relation_id, {s.id}});
        } else {
            bags[it->second].sentence_ids.push_back(s.id);
        }
    }
    for (auto& b : bags) std::sort(b.sentence_ids.begin(), b.sentence_ids.end());
    return bags;
}

std::pair<std::vector<int>, std::vector<int>> position_features(const Sentence& s, int max_rel) {
    const int m = static_cast<int>(s.tokens.size());
    std::vector<int> head(m), tail(m);
    for (int i = 0; i < m; ++i) {
        head[i] = std::clamp(i - s.head_index, -max_rel, max_rel) + max_rel;
        tail[i] = std::clamp(i - s.tail_index, -max_rel, max_rel) + max_rel;
    }
    return {std::move(head), std::move(tail)};
}

Corpus finalize_corpus(std::vector<Sentence> sentences,
                       const std::vector<std::string>& sentence_relations,
                       const std::vector<std::string>* relation_universe) {
    if (sentences.empty()) fail("no sentences");
    if (sentences.size() != sentence_relations.size())
        fail("finalize_corpus: relation name count does not match sentence count");

    std::vector<std::size_t> order(sentences.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        return sentences[a].id < sentences[b].id;
    });

    Corpus c;

    // relation map: NA pinned to 0, the rest lexicographic
    std::set<std::string> rel_set(sentence_relations.begin(), sentence_relations.end());
    if (relation_universe) {
        std::set<std::string> universe(relation_universe->begin(), relation_universe->end());
        for (const auto& r : rel_set)
            if (!universe.count(r)) fail("relation '" + r + "' not in the pinned relation set");
        rel_set = std::move(universe);
    }
    rel_set.insert(kNaRelation);
    c.relations.push_back(kNaRelation);
    for (const auto& r : rel_set)
        if (r != kNaRelation) c.relations.push_back(r);
    for (std::size_t i = 0; i < c.relations.size(); ++i)
        c.relation_index[c.relations[i]] = static_cast<int>(i);
    c.na_id = 0;

    c.vocab = {kPadToken, kUnkToken};
    c.vocab_index = {{kPadToken, kPadId}, {kUnkToken, kUnkId}};

    std::set<std::string> entity_set;
    c.sentences.reserve(sentences.size());
    int prev_id = 0;
    bool first = true;
    for (std::size_t idx : order) {
        Sentence s = std::move(sentences[idx]);
        if (!first && s.id == prev_id) fail(str_format("duplicate sentence id %d", s.id));
        prev_id = s.id;
        first = false;
        validate_sentence(s);
        s.relation_id = c.relation_index.at(sentence_relations[idx]);
        for (const auto& tok : s.tokens) {
            if (!c.vocab_index.count(tok)) {
                c.vocab_index[tok] = static_cast<int>(c.vocab.size());
                c.vocab.push_back(tok);
            }
        }
        entity_set.insert(s.head);
        entity_set.insert(s.tail);
        c.sentences.push_back(std::move(s));
    }

    c.entities.assign(entity_set.begin(), entity_set.end());
    for (std::size_t i = 0; i < c.entities.size(); ++i)
        c.entity_index[c.entities[i]] = static_cast<int>(i);

    c.bags = build_bags(c.sentences);
    return c;
}

Corpus load_corpus(const std::string& path, const LoadOptions& opts) {
    std::ifstream in(path);
    if (!in) fail("cannot open corpus file: " + path);

    std::vector<Sentence> sentences;
    std::vector<std::string> rel_names;
    int truncated = 0;
    int rejected = 0;

    std::string line;
    int line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        json j;
        try {
            j = json::parse(line);
        } catch (const json::exception& e) {
            fail(str_format("%s:%d: parse error: %s", path.c_str(), line_no, e.what()));
        }
        Sentence s;
        try {
            s.id = j.at("id").get<int>();
            s.tokens = j.at("tokens").get<std::vector<std::string>>();
            s.head = j.at("head").get<std::string>();
            s.tail = j.at("tail").get<std::string>();
            s.head_index = j.at("head_index").get<int>();
            s.tail_index = j.at("tail_index").get<int>();
            rel_names.push_back(j.at("relation").get<std::string>());
            if (j.contains("noise_flag")) s.noise_flag = j.at("noise_flag").get<bool>();
        } catch (const json::exception& e) {
            fail(str_format("%s:%d: parse error: %s", path.c_str(), line_no, e.what()));
        }
        if (static_cast<int>(s.tokens.size()) > opts.max_len) {
            if (!truncate_sentence(s, opts.max_len)) {
                ++rejected;
                rel_names.pop_back();
                continue;
            }
            ++truncated;
        }
        sentences.push_back(std::move(s));
    }
    if (sentences.empty()) fail("no sentences in " + path);

    Corpus c = finalize_corpus(std::move(sentences), rel_names,
                               opts.relation_universe.empty() ? nullptr : &opts.relation_universe);
    c.truncated_count = truncated;
    c.rejected_count = rejected;
    return c;
}

void save_corpus(const Corpus& c, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) fail("cannot write corpus file: " + path);
    for (const Sentence& s : c.sentences) {
        json j;
        j["id"] = s.id;
        j["tokens"] = s.tokens;
        j["head"] = s.head;
        j["tail"] = s.tail;
        j["head_index"] = s.head_index;
        j["tail_index"] = s.tail_index;
        j["relation"] = c.relations.at(static_cast<std::size_t>(s.relation_id));
        if (s.noise_flag.has_value()) j["noise_flag"] = *s.noise_flag;
        out << j.dump() << '\n';
    }
    if (!out) fail("write failed: " + path);
}

}  // namespace relex
