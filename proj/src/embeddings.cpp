#include "relex/embeddings.hpp"

#include <array>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

#include "relex/error.hpp"
#include "relex/rng.hpp"
#include "relex/util.hpp"

namespace relex {

std::span<const double> EmbeddingTable::row(const std::string& name) const {
    auto it = index.find(name);
    if (it == index.end()) fail("embedding table has no entry for '" + name + "'");
    return values.row(it->second);
}

void EmbeddingTable::append(const std::string& name, const std::vector<double>& v) {
    if (static_cast<int>(v.size()) != dim) fail("embedding row has wrong dimension");
    if (has(name)) fail("duplicate embedding name '" + name + "'");
    index[name] = values.rows;
    names.push_back(name);
    values.v.insert(values.v.end(), v.begin(), v.end());
    values.rows += 1;
}

EmbeddingTable init_random(const std::vector<std::string>& names, int dim, std::uint64_t seed,
                           double scale) {
    if (dim <= 0) fail("embedding dim must be positive");
    Rng rng(seed);
    EmbeddingTable t;
    t.dim = dim;
    t.values = Matrix::uniform(static_cast<int>(names.size()), dim, scale, rng);
    t.names = names;
    for (std::size_t i = 0; i < names.size(); ++i) {
        if (t.index.count(names[i])) fail("duplicate embedding name '" + names[i] + "'");
        t.index[names[i]] = static_cast<int>(i);
    }
    return t;
}

EmbeddingTable load_embeddings(const std::string& path) {
    std::ifstream in(path);
    if (!in) fail("cannot open embedding file: " + path);
    EmbeddingTable t;
    t.values.cols = 0;
    std::string line;
    int line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        std::istringstream ss(line);
        std::string name;
        ss >> name;
        std::vector<double> row;
        double x;
        while (ss >> x) row.push_back(x);
        if (!ss.eof()) fail(str_format("%s:%d: bad number", path.c_str(), line_no));
        if (row.empty()) fail(str_format("%s:%d: no values", path.c_str(), line_no));
        if (t.dim == 0) {
            t.dim = static_cast<int>(row.size());
            t.values.cols = t.dim;
        } else if (static_cast<int>(row.size()) != t.dim) {
            fail(str_format("%s:%d: expected %d values, got %zu", path.c_str(), line_no, t.dim,
                            row.size()));
        }
        if (t.index.count(name)) fail(str_format("%s:%d: duplicate name '%s'", path.c_str(), line_no, name.c_str()));
        t.index[name] = t.values.rows;
        t.names.push_back(name);
        t.values.v.insert(t.values.v.end(), row.begin(), row.end());
        t.values.rows += 1;
    }
    if (t.values.rows == 0) fail("empty embedding file: " + path);
    return t;
}

void save_embeddings(const EmbeddingTable& t, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) fail("cannot write embedding file: " + path);
    for (int r = 0; r < t.rows(); ++r) {
        out << t.names[static_cast<std::size_t>(r)];
        for (double x : t.row(r)) out << ' ' << str_format("%.17g", x);
        out << '\n';
    }
    if (!out) fail("write failed: " + path);
}

double transe_score(std::span<const double> h, std::span<const double> r,
                    std::span<const double> t) {
    if (h.size() != r.size() || h.size() != t.size()) fail("transe_score: dimension mismatch");
    double s = 0.0;
    for (std::size_t i = 0; i < h.size(); ++i) {
        double d = h[i] + r[i] - t[i];
        s += d * d;
    }
    return -std::sqrt(s);
}

namespace {

double distance(const Matrix& ent, const Matrix& rel, const Triple& t, std::vector<double>& diff) {
    auto h = ent.row(t.head);
    auto r = rel.row(t.relation);
    auto ta = ent.row(t.tail);
    double s = 0.0;
    for (std::size_t i = 0; i < h.size(); ++i) {
        diff[i] = h[i] + r[i] - ta[i];
        s += diff[i] * diff[i];
    }
    return std::sqrt(s);
}

// unit gradient of d wrt (h + r - t); zero vector when d == 0
void unit_grad(const std::vector<double>& diff, double d, std::vector<double>& g) {
    if (d <= 0.0) {
        std::fill(g.begin(), g.end(), 0.0);
        return;
    }
    for (std::size_t i = 0; i < diff.size(); ++i) g[i] = diff[i] / d;
}

}  // namespace

TransEResult transe_train(const std::vector<Triple>& triples,
                          const std::vector<std::string>& entity_names,
                          const std::vector<std::string>& relation_names,
                          const TransEConfig& cfg) {
    if (triples.empty()) fail("transe_train: no triples");
    if (cfg.margin <= 0.0) fail("transe_train: margin must be positive");
    if (cfg.dim <= 0) fail("transe_train: dim must be positive");
    const int n_ent = static_cast<int>(entity_names.size());
    for (const Triple& t : triples) {
        if (t.head < 0 || t.head >= n_ent || t.tail < 0 || t.tail >= n_ent ||
            t.relation < 0 || t.relation >= static_cast<int>(relation_names.size()))
            fail("transe_train: triple id out of range");
    }

    Rng rng(cfg.seed);
    const double bound = 6.0 / std::sqrt(static_cast<double>(cfg.dim));
    TransEResult out;
    out.entities = init_random(entity_names, cfg.dim, rng.fork(1).next(), bound);
    out.relations = init_random(relation_names, cfg.dim, rng.fork(2).next(), bound);
    Matrix& ent = out.entities.values;
    Matrix& rel = out.relations.values;

    std::vector<std::size_t> order(triples.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    std::vector<double> diff_p(static_cast<std::size_t>(cfg.dim)),
        diff_n(static_cast<std::size_t>(cfg.dim)), g_p(static_cast<std::size_t>(cfg.dim)),
        g_n(static_cast<std::size_t>(cfg.dim));

    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        rng.shuffle(order);
        double loss_sum = 0.0;
        long loss_count = 0;
        for (std::size_t idx : order) {
            const Triple& pos = triples[idx];
            for (int j = 0; j < cfg.neg_per_pos; ++j) {
                Triple neg = pos;
                const bool corrupt_head = rng.bernoulli(0.5);
                int& slot = corrupt_head ? neg.head : neg.tail;
                const int original = slot;
                do {
                    slot = static_cast<int>(rng.uniform_int(0, n_ent - 1));
                } while (n_ent > 1 && slot == original);

                const double d_pos = distance(ent, rel, pos, diff_p);
                const double d_neg = distance(ent, rel, neg, diff_n);
                const double loss = cfg.margin + d_pos - d_neg;
                loss_sum += std::max(0.0, loss);
                ++loss_count;
                if (loss <= 0.0) continue;

                unit_grad(diff_p, d_pos, g_p);
                unit_grad(diff_n, d_neg, g_n);
                // dL/dx = dd(pos)/dx - dd(neg)/dx, applied after both unit
                // gradients are formed so shared rows see both terms
                axpy(-cfg.lr, g_p, ent.row(pos.head));
                axpy(-cfg.lr, g_p, rel.row(pos.relation));
                axpy(+cfg.lr, g_p, ent.row(pos.tail));
                axpy(+cfg.lr, g_n, ent.row(neg.head));
                axpy(+cfg.lr, g_n, rel.row(neg.relation));
                axpy(-cfg.lr, g_n, ent.row(neg.tail));
            }
        }
        for (int e = 0; e < ent.rows; ++e) {
            const double n = l2_norm(ent.row(e));
            if (n > 1.0)
                for (double& x : ent.row(e)) x /= n;
        }
        out.epoch_mean_loss.push_back(loss_sum / static_cast<double>(loss_count));
    }
    return out;
}

TripleFile load_triples(const std::string& path) {
    std::ifstream in(path);
    if (!in) fail("cannot open triples file: " + path);
    std::vector<std::array<std::string, 3>> raw;
    std::string line;
    int line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        std::array<std::string, 3> parts;
        std::size_t start = 0;
        for (int k = 0; k < 3; ++k) {
            std::size_t end = k < 2 ? line.find('\t', start) : line.size();
            if (end == std::string::npos)
                fail(str_format("%s:%d: expected three tab-separated names", path.c_str(), line_no));
            parts[static_cast<std::size_t>(k)] = line.substr(start, end - start);
            start = end + 1;
        }
        if (parts[0].empty() || parts[1].empty() || parts[2].empty())
            fail(str_format("%s:%d: empty field", path.c_str(), line_no));
        raw.push_back(std::move(parts));
    }
    if (raw.empty()) fail("empty triples file: " + path);

    TripleFile f;
    std::set<std::string> ents, rels;
    for (const auto& p : raw) {
        ents.insert(p[0]);
        ents.insert(p[2]);
        rels.insert(p[1]);
    }
    f.entities.assign(ents.begin(), ents.end());
    f.relations.assign(rels.begin(), rels.end());
    std::map<std::string, int> ent_id, rel_id;
    for (std::size_t i = 0; i < f.entities.size(); ++i) ent_id[f.entities[i]] = static_cast<int>(i);
    for (std::size_t i = 0; i < f.relations.size(); ++i) rel_id[f.relations[i]] = static_cast<int>(i);
    for (const auto& p : raw)
        f.triples.push_back(Triple{ent_id.at(p[0]), rel_id.at(p[1]), ent_id.at(p[2])});
    return f;
}

void save_triples(const TripleFile& f, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) fail("cannot write triples file: " + path);
    for (const Triple& t : f.triples)
        out << f.entities.at(static_cast<std::size_t>(t.head)) << '\t'
            << f.relations.at(static_cast<std::size_t>(t.relation)) << '\t'
            << f.entities.at(static_cast<std::size_t>(t.tail)) << '\n';
    if (!out) fail("write failed: " + path);
}

void complete_table(EmbeddingTable& t, const std::vector<std::string>& required,
                    std::uint64_t seed) {
    Rng rng(seed);
    const double scale = 1.0 / std::sqrt(static_cast<double>(t.dim));
    std::vector<double> row(static_cast<std::size_t>(t.dim));
    for (const auto& name : required) {
        if (t.has(name)) continue;
        for (double& x : row) x = rng.uniform(-scale, scale);
        t.append(name, row);
    }
}

}  // namespace relex
