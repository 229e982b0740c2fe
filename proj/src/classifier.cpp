#include "relex/classifier.hpp"

#include <algorithm>
#include <cmath>

#include "relex/util.hpp"

namespace relex {

Cnn Cnn::init(const CnnConfig& cfg, std::vector<std::string> vocab,
              std::vector<std::string> relations, int na_id, std::uint64_t seed) {
    if (cfg.window != 3) fail("Cnn: window must be 3");
    if (static_cast<int>(vocab.size()) != cfg.vocab_size) fail("Cnn: vocab size mismatch");
    if (static_cast<int>(relations.size()) != cfg.n_relations) fail("Cnn: relation count mismatch");
    Rng rng(seed);
    Cnn net;
    net.cfg = cfg;
    net.word_emb = Matrix::glorot(cfg.vocab_size, cfg.d_w, rng);
    net.pos_head_emb = Matrix::glorot(cfg.n_pos(), cfg.d_p, rng);
    net.pos_tail_emb = Matrix::glorot(cfg.n_pos(), cfg.d_p, rng);
    net.conv_w = Matrix::glorot(cfg.d_s, cfg.window * cfg.d(), rng);
    net.conv_b = Matrix::glorot(1, cfg.d_s, rng);
    net.out_w = Matrix::glorot(cfg.n_relations, cfg.d_s, rng);
    net.out_b = Matrix::glorot(1, cfg.n_relations, rng);
    net.vocab = std::move(vocab);
    for (std::size_t i = 0; i < net.vocab.size(); ++i)
        net.vocab_index[net.vocab[i]] = static_cast<int>(i);
    net.relations = std::move(relations);
    net.na_id = na_id;
    return net;
}

std::vector<std::pair<std::string, Matrix*>> Cnn::tensors() {
    return {{"word_emb", &word_emb},   {"pos_head_emb", &pos_head_emb},
            {"pos_tail_emb", &pos_tail_emb}, {"conv_w", &conv_w},
            {"conv_b", &conv_b},       {"out_w", &out_w},
            {"out_b", &out_b}};
}

std::vector<std::pair<std::string, const Matrix*>> Cnn::tensors() const {
    return {{"word_emb", &word_emb},   {"pos_head_emb", &pos_head_emb},
            {"pos_tail_emb", &pos_tail_emb}, {"conv_w", &conv_w},
            {"conv_b", &conv_b},       {"out_w", &out_w},
            {"out_b", &out_b}};
}

CnnGrads CnnGrads::zeros(const CnnConfig& cfg) {
    CnnGrads g;
    g.conv_w = Matrix(cfg.d_s, cfg.window * cfg.d());
    g.conv_b = Matrix(1, cfg.d_s);
    g.out_w = Matrix(cfg.n_relations, cfg.d_s);
    g.out_b = Matrix(1, cfg.n_relations);
    return g;
}

void softmax_inplace(std::vector<double>& logits) {
    double mx = *std::max_element(logits.begin(), logits.end());
    double sum = 0.0;
    for (double& x : logits) {
        x = std::exp(x - mx);
        sum += x;
    }
    for (double& x : logits) x /= sum;
}

double log_sum_exp(const std::vector<double>& logits) {
    double mx = *std::max_element(logits.begin(), logits.end());
    double sum = 0.0;
    for (double x : logits) sum += std::exp(x - mx);
    return mx + std::log(sum);
}

namespace {

struct PaddedIds {
    std::vector<int> word, pos_head, pos_tail;
};

PaddedIds pad_ids(const Sentence& s, const Cnn& net) {
    const int m = static_cast<int>(s.tokens.size());
    const int mr = net.cfg.max_rel;
    PaddedIds ids;
    ids.word.reserve(static_cast<std::size_t>(m) + 2);
    ids.pos_head.reserve(static_cast<std::size_t>(m) + 2);
    ids.pos_tail.reserve(static_cast<std::size_t>(m) + 2);
    for (int p = -1; p <= m; ++p) {
        ids.word.push_back(p < 0 || p >= m ? kPadId
                                           : net.word_id(s.tokens[static_cast<std::size_t>(p)]));
        ids.pos_head.push_back(std::clamp(p - s.head_index, -mr, mr) + mr);
        ids.pos_tail.push_back(std::clamp(p - s.tail_index, -mr, mr) + mr);
    }
    return ids;
}

Matrix embed_rows(const std::vector<int>& word, const std::vector<int>& pos_head,
                  const std::vector<int>& pos_tail, const Cnn& net) {
    const CnnConfig& cfg = net.cfg;
    const int rows = static_cast<int>(word.size());
    Matrix x(rows, cfg.d());
    for (int j = 0; j < rows; ++j) {
        const int w = word[static_cast<std::size_t>(j)];
        if (w < 0 || w >= cfg.vocab_size) fail(str_format("token index %d out of vocab range", w));
        auto dst = x.row(j);
        auto we = net.word_emb.row(w);
        std::copy(we.begin(), we.end(), dst.begin());
        auto ph = net.pos_head_emb.row(pos_head[static_cast<std::size_t>(j)]);
        std::copy(ph.begin(), ph.end(), dst.begin() + cfg.d_w);
        auto pt = net.pos_tail_emb.row(pos_tail[static_cast<std::size_t>(j)]);
        std::copy(pt.begin(), pt.end(), dst.begin() + cfg.d_w + cfg.d_p);
    }
    return x;
}

}  // namespace

Matrix embed_input(const Sentence& s, const Cnn& net) {
    PaddedIds ids = pad_ids(s, net);
    return embed_rows(ids.word, ids.pos_head, ids.pos_tail, net);
}

ForwardTrace encode(const Sentence& s, const Cnn& net, Mode mode, Rng* rng) {
    const CnnConfig& cfg = net.cfg;
    ForwardTrace t;
    PaddedIds ids = pad_ids(s, net);
    t.word_ids = std::move(ids.word);
    t.pos_head_ids = std::move(ids.pos_head);
    t.pos_tail_ids = std::move(ids.pos_tail);
    t.input = embed_rows(t.word_ids, t.pos_head_ids, t.pos_tail_ids, net);

    const int rows = t.input.rows;
    const int n_win = rows - cfg.window + 1;
    if (n_win < 1) fail("sentence shorter than the convolution window after padding");
    const int d = cfg.d();

    t.conv = Matrix(n_win, cfg.d_s);
    std::vector<double> win(static_cast<std::size_t>(cfg.window * d));
    for (int j = 0; j < n_win; ++j) {
        for (int k = 0; k < cfg.window; ++k) {
            auto src = t.input.row(j + k);
            std::copy(src.begin(), src.end(), win.begin() + static_cast<std::size_t>(k) * d);
        }
        auto out = t.conv.row(j);
        for (int f = 0; f < cfg.d_s; ++f)
            out[static_cast<std::size_t>(f)] = net.conv_b.at(0, f) + dot(net.conv_w.row(f), win);
    }

    t.argmax.assign(static_cast<std::size_t>(cfg.d_s), 0);
    t.pooled.assign(static_cast<std::size_t>(cfg.d_s), 0.0);
    for (int f = 0; f < cfg.d_s; ++f) {
        double best = t.conv.at(0, f);
        int best_j = 0;
        for (int j = 1; j < n_win; ++j) {
            if (t.conv.at(j, f) > best) {
                best = t.conv.at(j, f);
                best_j = j;
            }
        }
        t.pooled[static_cast<std::size_t>(f)] = best;
        t.argmax[static_cast<std::size_t>(f)] = best_j;
    }

    t.rep.resize(t.pooled.size());
    for (std::size_t i = 0; i < t.pooled.size(); ++i) t.rep[i] = std::tanh(t.pooled[i]);

    if (mode == Mode::kTrain && cfg.keep_prob < 1.0) {
        if (!rng) fail("encode: train mode needs an rng for dropout");
        t.mask.resize(t.rep.size());
        t.rep_dropped.resize(t.rep.size());
        const double inv_keep = 1.0 / cfg.keep_prob;
        for (std::size_t i = 0; i < t.rep.size(); ++i) {
            t.mask[i] = rng->bernoulli(cfg.keep_prob) ? inv_keep : 0.0;
            t.rep_dropped[i] = t.rep[i] * t.mask[i];
        }
    } else {
        t.rep_dropped = t.rep;
    }

    t.logits.assign(static_cast<std::size_t>(cfg.n_relations), 0.0);
    for (int c = 0; c < cfg.n_relations; ++c)
        t.logits[static_cast<std::size_t>(c)] =
            net.out_b.at(0, c) + dot(net.out_w.row(c), t.rep_dropped);
    t.probs = t.logits;
    softmax_inplace(t.probs);
    return t;
}

std::vector<double> predict(const Sentence& s, const Cnn& net) {
    return encode(s, net, Mode::kEval).probs;
}

double log_prob(const Sentence& s, int relation_id, const Cnn& net) {
    ForwardTrace t = encode(s, net, Mode::kEval);
    return t.logits[static_cast<std::size_t>(relation_id)] - log_sum_exp(t.logits);
}

namespace {

void accumulate_row(std::map<int, std::vector<double>>& rows, int row, std::span<const double> g,
                    int width) {
    auto it = rows.find(row);
    if (it == rows.end())
        it = rows.emplace(row, std::vector<double>(static_cast<std::size_t>(width), 0.0)).first;
    for (std::size_t i = 0; i < g.size(); ++i) it->second[i] += g[i];
}

}  // namespace

double loss_and_grads(const std::vector<const Sentence*>& batch, const Cnn& net, Rng& rng,
                      CnnGrads& out) {
    if (batch.empty()) fail("loss_and_grads: empty batch");
    const CnnConfig& cfg = net.cfg;
    const double inv_n = 1.0 / static_cast<double>(batch.size());
    const int d = cfg.d();
    double loss = 0.0;

    std::vector<double> dlogits(static_cast<std::size_t>(cfg.n_relations));
    std::vector<double> d_rep(static_cast<std::size_t>(cfg.d_s));
    for (const Sentence* sp : batch) {
        const Sentence& s = *sp;
        if (s.relation_id < 0 || s.relation_id >= cfg.n_relations)
            fail(str_format("sentence %d: relation id %d out of range", s.id, s.relation_id));
        ForwardTrace t = encode(s, net, Mode::kTrain, &rng);
        loss += -(t.logits[static_cast<std::size_t>(s.relation_id)] - log_sum_exp(t.logits)) * inv_n;

        for (int c = 0; c < cfg.n_relations; ++c)
            dlogits[static_cast<std::size_t>(c)] = t.probs[static_cast<std::size_t>(c)] * inv_n;
        dlogits[static_cast<std::size_t>(s.relation_id)] -= inv_n;

        // output layer
        for (int c = 0; c < cfg.n_relations; ++c) {
            const double g = dlogits[static_cast<std::size_t>(c)];
            axpy(g, t.rep_dropped, out.out_w.row(c));
            out.out_b.at(0, c) += g;
        }
        // through dropout and tanh
        for (int f = 0; f < cfg.d_s; ++f) {
            double acc = 0.0;
            for (int c = 0; c < cfg.n_relations; ++c)
                acc += dlogits[static_cast<std::size_t>(c)] * net.out_w.at(c, f);
            if (!t.mask.empty()) acc *= t.mask[static_cast<std::size_t>(f)];
            const double r = t.rep[static_cast<std::size_t>(f)];
            d_rep[static_cast<std::size_t>(f)] = acc * (1.0 - r * r);
        }
        // max-pool routing into conv weights and the input matrix
        Matrix d_input(t.input.rows, d);
        for (int f = 0; f < cfg.d_s; ++f) {
            const double g = d_rep[static_cast<std::size_t>(f)];
            if (g == 0.0) continue;
            const int j = t.argmax[static_cast<std::size_t>(f)];
            out.conv_b.at(0, f) += g;
            auto wrow = net.conv_w.row(f);
            auto grow = out.conv_w.row(f);
            for (int k = 0; k < cfg.window; ++k) {
                auto xrow = t.input.row(j + k);
                auto dxrow = d_input.row(j + k);
                const std::size_t off = static_cast<std::size_t>(k) * d;
                for (int c = 0; c < d; ++c) {
                    grow[off + static_cast<std::size_t>(c)] += g * xrow[static_cast<std::size_t>(c)];
                    dxrow[static_cast<std::size_t>(c)] += g * wrow[off + static_cast<std::size_t>(c)];
                }
            }
        }
        // embedding rows
        for (int j = 0; j < d_input.rows; ++j) {
            auto dx = d_input.row(j);
            accumulate_row(out.word_rows, t.word_ids[static_cast<std::size_t>(j)],
                           dx.subspan(0, static_cast<std::size_t>(cfg.d_w)), cfg.d_w);
            accumulate_row(out.pos_head_rows, t.pos_head_ids[static_cast<std::size_t>(j)],
                           dx.subspan(static_cast<std::size_t>(cfg.d_w),
                                      static_cast<std::size_t>(cfg.d_p)),
                           cfg.d_p);
            accumulate_row(out.pos_tail_rows, t.pos_tail_ids[static_cast<std::size_t>(j)],
                           dx.subspan(static_cast<std::size_t>(cfg.d_w + cfg.d_p),
                                      static_cast<std::size_t>(cfg.d_p)),
                           cfg.d_p);
        }
    }
    return loss;
}

void sgd_step(Cnn& net, const CnnGrads& g, double lr) {
    check_same_shape(net.conv_w, g.conv_w, "sgd_step conv_w");
    check_same_shape(net.conv_b, g.conv_b, "sgd_step conv_b");
    check_same_shape(net.out_w, g.out_w, "sgd_step out_w");
    check_same_shape(net.out_b, g.out_b, "sgd_step out_b");
    for (std::size_t i = 0; i < net.conv_w.v.size(); ++i) net.conv_w.v[i] -= lr * g.conv_w.v[i];
    for (std::size_t i = 0; i < net.conv_b.v.size(); ++i) net.conv_b.v[i] -= lr * g.conv_b.v[i];
    for (std::size_t i = 0; i < net.out_w.v.size(); ++i) net.out_w.v[i] -= lr * g.out_w.v[i];
    for (std::size_t i = 0; i < net.out_b.v.size(); ++i) net.out_b.v[i] -= lr * g.out_b.v[i];

    auto apply_rows = [lr](Matrix& table, const std::map<int, std::vector<double>>& rows) {
        for (const auto& [r, grad] : rows) {
            if (r < 0 || r >= table.rows || static_cast<int>(grad.size()) != table.cols)
                fail("sgd_step: embedding row gradient shape mismatch");
            axpy(-lr, grad, table.row(r));
        }
    };
    apply_rows(net.word_emb, g.word_rows);
    apply_rows(net.pos_head_emb, g.pos_head_rows);
    apply_rows(net.pos_tail_emb, g.pos_tail_rows);
}

}  // namespace relex
