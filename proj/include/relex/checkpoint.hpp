#pragma once

#include <map>
#include <string>
#include <vector>

#include "relex/classifier.hpp"
#include "relex/embeddings.hpp"
#include "relex/matrix.hpp"

namespace relex {

// Versioned binary container: named tensors (shape + row-major doubles),
// vocab/relation/entity name lists, and hyperparameters as key-value text.
// Round-trips bit-exactly.
struct Checkpoint {
    std::uint32_t version = 1;
    std::map<std::string, std::string> meta;
    std::vector<std::string> vocab;
    std::vector<std::string> relations;
    std::vector<std::string> entities;
    int na_id = 0;
    std::vector<std::pair<std::string, Matrix>> tensors;  // ordered by writer

    const Matrix* find(const std::string& name) const;
    const Matrix& require(const std::string& name) const;
    bool has(const std::string& name) const { return find(name) != nullptr; }

    void put_meta_int(const std::string& key, long v);
    void put_meta_double(const std::string& key, double v);
    long meta_int(const std::string& key) const;
    double meta_double(const std::string& key) const;
};

void save_checkpoint(const Checkpoint& c, const std::string& path);
Checkpoint load_checkpoint(const std::string& path);

// cnn/* tensors plus hyperparameters and the vocab/relation maps.
void put_cnn(Checkpoint& c, const Cnn& net, const std::string& prefix = "cnn");
Cnn cnn_from_checkpoint(const Checkpoint& c, const std::string& prefix = "cnn");

void put_entity_table(Checkpoint& c, const EmbeddingTable& t);
EmbeddingTable entity_table_from_checkpoint(const Checkpoint& c);

}  // namespace relex
