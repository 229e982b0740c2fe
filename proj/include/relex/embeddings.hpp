#pragma once

#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "relex/matrix.hpp"

namespace relex {

struct EmbeddingTable {
    int dim = 0;
    Matrix values;                    // rows x dim
    std::vector<std::string> names;   // row order
    std::map<std::string, int> index;

    int rows() const { return values.rows; }
    bool has(const std::string& name) const { return index.count(name) > 0; }
    std::span<const double> row(const std::string& name) const;
    std::span<const double> row(int r) const { return values.row(r); }
    void append(const std::string& name, const std::vector<double>& v);

    bool operator==(const EmbeddingTable& o) const = default;
};

struct Triple {
    int head = 0;
    int relation = 0;
    int tail = 0;
};

struct TripleFile {
    std::vector<std::string> entities;   // sorted unique
    std::vector<std::string> relations;  // sorted unique
    std::vector<Triple> triples;
};

EmbeddingTable init_random(const std::vector<std::string>& names, int dim, std::uint64_t seed,
                           double scale);
EmbeddingTable load_embeddings(const std::string& path);
void save_embeddings(const EmbeddingTable& t, const std::string& path);

// -||h + r - t||_2; zero iff t = h + r exactly.
double transe_score(std::span<const double> h, std::span<const double> r,
                    std::span<const double> t);

struct TransEConfig {
    int dim = 50;
    double margin = 1.0;
    double lr = 0.01;
    int epochs = 100;
    int neg_per_pos = 1;
    std::uint64_t seed = 1;
};

struct TransEResult {
    EmbeddingTable entities;
    EmbeddingTable relations;
    std::vector<double> epoch_mean_loss;  // mean hinge per epoch, as trained
};

// Margin-ranking TransE with L2 dissimilarity: per positive triple sample
// neg_per_pos corruptions (head or tail replaced uniformly), take an SGD step
// on max(0, margin + d(pos) - d(neg)), and project entity rows onto the unit
// ball after every epoch.
TransEResult transe_train(const std::vector<Triple>& triples,
                          const std::vector<std::string>& entity_names,
                          const std::vector<std::string>& relation_names,
                          const TransEConfig& cfg);

// head <TAB> relation <TAB> tail per line.
TripleFile load_triples(const std::string& path);
void save_triples(const TripleFile& f, const std::string& path);

// Appends seeded-random rows (uniform +-1/sqrt(dim)) for names the table is
// missing, in the order given. Selector states need a vector for every
// entity, trained or not.
void complete_table(EmbeddingTable& t, const std::vector<std::string>& required,
                    std::uint64_t seed);

}  // namespace relex
