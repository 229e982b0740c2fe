#include "relex/checkpoint.hpp"

#include <cstring>
#include <fstream>

#include "relex/error.hpp"
#include "relex/util.hpp"

namespace relex {

namespace {

constexpr char kMagic[8] = {'R', 'E', 'L', 'E', 'X', 'C', 'K', '1'};

void write_u32(std::ostream& out, std::uint32_t v) {
    out.write(reinterpret_cast<const char*>(&v), sizeof v);
}
void write_u64(std::ostream& out, std::uint64_t v) {
    out.write(reinterpret_cast<const char*>(&v), sizeof v);
}
void write_str(std::ostream& out, const std::string& s) {
    write_u64(out, s.size());
    out.write(s.data(), static_cast<std::streamsize>(s.size()));
}
void write_strings(std::ostream& out, const std::vector<std::string>& v) {
    write_u64(out, v.size());
    for (const auto& s : v) write_str(out, s);
}

std::uint32_t read_u32(std::istream& in) {
    std::uint32_t v = 0;
    in.read(reinterpret_cast<char*>(&v), sizeof v);
    if (!in) fail("checkpoint: truncated file");
    return v;
}
std::uint64_t read_u64(std::istream& in) {
    std::uint64_t v = 0;
    in.read(reinterpret_cast<char*>(&v), sizeof v);
    if (!in) fail("checkpoint: truncated file");
    return v;
}
std::string read_str(std::istream& in) {
    std::uint64_t n = read_u64(in);
    std::string s(n, '\0');
    in.read(s.data(), static_cast<std::streamsize>(n));
    if (!in) fail("checkpoint: truncated file");
    return s;
}
std::vector<std::string> read_strings(std::istream& in) {
    std::uint64_t n = read_u64(in);
    std::vector<std::string> v;
    v.reserve(n);
    for (std::uint64_t i = 0; i < n; ++i) v.push_back(read_str(in));
    return v;
}

}  // namespace

const Matrix* Checkpoint::find(const std::string& name) const {
    for (const auto& [n, m] : tensors)
        if (n == name) return &m;
    return nullptr;
}

const Matrix& Checkpoint::require(const std::string& name) const {
    const Matrix* m = find(name);
    if (!m) fail("checkpoint: missing tensor '" + name + "'");
    return *m;
}

void Checkpoint::put_meta_int(const std::string& key, long v) { meta[key] = str_format("%ld", v); }
void Checkpoint::put_meta_double(const std::string& key, double v) {
    meta[key] = str_format("%.17g", v);
}
long Checkpoint::meta_int(const std::string& key) const {
    auto it = meta.find(key);
    if (it == meta.end()) fail("checkpoint: missing meta key '" + key + "'");
    return std::strtol(it->second.c_str(), nullptr, 10);
}
double Checkpoint::meta_double(const std::string& key) const {
    auto it = meta.find(key);
    if (it == meta.end()) fail("checkpoint: missing meta key '" + key + "'");
    return std::strtod(it->second.c_str(), nullptr);
}

void save_checkpoint(const Checkpoint& c, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) fail("cannot write checkpoint: " + path);
    out.write(kMagic, sizeof kMagic);
    write_u32(out, c.version);
    write_u64(out, c.meta.size());
    for (const auto& [k, v] : c.meta) {
        write_str(out, k);
        write_str(out, v);
    }
    write_strings(out, c.vocab);
    write_strings(out, c.relations);
    write_strings(out, c.entities);
    write_u32(out, static_cast<std::uint32_t>(c.na_id));
    write_u64(out, c.tensors.size());
    for (const auto& [name, m] : c.tensors) {
        write_str(out, name);
        write_u32(out, static_cast<std::uint32_t>(m.rows));
        write_u32(out, static_cast<std::uint32_t>(m.cols));
        out.write(reinterpret_cast<const char*>(m.v.data()),
                  static_cast<std::streamsize>(m.v.size() * sizeof(double)));
    }
    if (!out) fail("write failed: " + path);
}

Checkpoint load_checkpoint(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) fail("cannot open checkpoint: " + path);
    char magic[8];
    in.read(magic, sizeof magic);
    if (!in || std::memcmp(magic, kMagic, sizeof kMagic) != 0)
        fail("not a checkpoint file: " + path);
    Checkpoint c;
    c.version = read_u32(in);
    if (c.version != 1) fail(str_format("unsupported checkpoint version %u", c.version));
    std::uint64_t n_meta = read_u64(in);
    for (std::uint64_t i = 0; i < n_meta; ++i) {
        std::string k = read_str(in);
        c.meta[k] = read_str(in);
    }
    c.vocab = read_strings(in);
    c.relations = read_strings(in);
    c.entities = read_strings(in);
    c.na_id = static_cast<int>(read_u32(in));
    std::uint64_t n_tensors = read_u64(in);
    for (std::uint64_t i = 0; i < n_tensors; ++i) {
        std::string name = read_str(in);
        Matrix m;
        m.rows = static_cast<int>(read_u32(in));
        m.cols = static_cast<int>(read_u32(in));
        m.v.resize(static_cast<std::size_t>(m.rows) * static_cast<std::size_t>(m.cols));
        in.read(reinterpret_cast<char*>(m.v.data()),
                static_cast<std::streamsize>(m.v.size() * sizeof(double)));
        if (!in) fail("checkpoint: truncated tensor '" + name + "'");
        c.tensors.emplace_back(std::move(name), std::move(m));
    }
    return c;
}

void put_cnn(Checkpoint& c, const Cnn& net, const std::string& prefix) {
    for (const auto& [name, m] : net.tensors()) c.tensors.emplace_back(prefix + "/" + name, *m);
    if (prefix == "cnn") {
        c.vocab = net.vocab;
        c.relations = net.relations;
        c.na_id = net.na_id;
        c.put_meta_int("d_w", net.cfg.d_w);
        c.put_meta_int("d_p", net.cfg.d_p);
        c.put_meta_int("d_s", net.cfg.d_s);
        c.put_meta_int("max_rel", net.cfg.max_rel);
        c.put_meta_int("window", net.cfg.window);
        c.put_meta_double("keep_prob", net.cfg.keep_prob);
    }
}

Cnn cnn_from_checkpoint(const Checkpoint& c, const std::string& prefix) {
    Cnn net;
    net.cfg.d_w = static_cast<int>(c.meta_int("d_w"));
    net.cfg.d_p = static_cast<int>(c.meta_int("d_p"));
    net.cfg.d_s = static_cast<int>(c.meta_int("d_s"));
    net.cfg.max_rel = static_cast<int>(c.meta_int("max_rel"));
    net.cfg.window = static_cast<int>(c.meta_int("window"));
    net.cfg.keep_prob = c.meta_double("keep_prob");
    net.cfg.vocab_size = static_cast<int>(c.vocab.size());
    net.cfg.n_relations = static_cast<int>(c.relations.size());
    net.word_emb = c.require(prefix + "/word_emb");
    net.pos_head_emb = c.require(prefix + "/pos_head_emb");
    net.pos_tail_emb = c.require(prefix + "/pos_tail_emb");
    net.conv_w = c.require(prefix + "/conv_w");
    net.conv_b = c.require(prefix + "/conv_b");
    net.out_w = c.require(prefix + "/out_w");
    net.out_b = c.require(prefix + "/out_b");
    net.vocab = c.vocab;
    for (std::size_t i = 0; i < net.vocab.size(); ++i)
        net.vocab_index[net.vocab[i]] = static_cast<int>(i);
    net.relations = c.relations;
    net.na_id = c.na_id;
    if (net.word_emb.rows != net.cfg.vocab_size || net.out_w.rows != net.cfg.n_relations)
        fail("checkpoint: tensor shapes disagree with the stored maps");
    return net;
}

void put_entity_table(Checkpoint& c, const EmbeddingTable& t) {
    c.entities = t.names;
    c.tensors.emplace_back("entities/values", t.values);
}

EmbeddingTable entity_table_from_checkpoint(const Checkpoint& c) {
    EmbeddingTable t;
    t.values = c.require("entities/values");
    t.dim = t.values.cols;
    t.names = c.entities;
    if (static_cast<int>(t.names.size()) != t.values.rows)
        fail("checkpoint: entity name count disagrees with the entity tensor");
    for (std::size_t i = 0; i < t.names.size(); ++i) t.index[t.names[i]] = static_cast<int>(i);
    return t;
}

}  // namespace relex
