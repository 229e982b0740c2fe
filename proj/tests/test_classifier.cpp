#include <cmath>

#include "doctest.h"
#include "relex/classifier.hpp"
#include "relex/rng.hpp"

using namespace relex;

namespace {

std::vector<std::string> toy_vocab(int n) {
    std::vector<std::string> v{kPadToken, kUnkToken};
    for (int i = 0; i < n - 2; ++i) v.push_back("w" + std::to_string(i));
    return v;
}

std::vector<std::string> toy_relations(int n) {
    std::vector<std::string> r{"NA"};
    for (int i = 1; i < n; ++i) r.push_back("r" + std::to_string(i));
    return r;
}

Cnn tiny_cnn(int vocab, int n_rel, int d_w, int d_p, int d_s, int max_rel, std::uint64_t seed) {
    CnnConfig cfg;
    cfg.vocab_size = vocab;
    cfg.n_relations = n_rel;
    cfg.d_w = d_w;
    cfg.d_p = d_p;
    cfg.d_s = d_s;
    cfg.max_rel = max_rel;
    cfg.keep_prob = 1.0;  // dropout off unless a test opts in
    return Cnn::init(cfg, toy_vocab(vocab), toy_relations(n_rel), 0, seed);
}

Sentence toy_sentence(const Cnn& net, int len, int relation, Rng& rng, int id = 0) {
    Sentence s;
    s.id = id;
    for (int i = 0; i < len; ++i)
        s.tokens.push_back(net.vocab[static_cast<std::size_t>(
            rng.uniform_int(2, static_cast<std::int64_t>(net.vocab.size()) - 1))]);
    s.head_index = static_cast<int>(rng.uniform_int(0, len - 1));
    s.tail_index = static_cast<int>(rng.uniform_int(0, len - 2));
    if (s.tail_index >= s.head_index) ++s.tail_index;
    s.head = s.tokens[static_cast<std::size_t>(s.head_index)];
    s.tail = s.tokens[static_cast<std::size_t>(s.tail_index)];
    s.relation_id = relation;
    return s;
}

double batch_loss(const std::vector<const Sentence*>& batch, const Cnn& net) {
    double loss = 0;
    for (const Sentence* s : batch)
        loss += -log_prob(*s, s->relation_id, net) / static_cast<double>(batch.size());
    return loss;
}

}  // namespace

TEST_CASE("embed_input width and padding") {
    Cnn net = tiny_cnn(10, 3, 50, 5, 8, 30, 1);
    Rng rng(2);
    Sentence s = toy_sentence(net, 4, 1, rng);
    Matrix x = embed_input(s, net);
    CHECK(x.cols == 60);  // d_w + 2 d_p
    CHECK(x.rows == 6);   // one PAD row each side

    // single token still yields a full window
    Sentence one;
    one.id = 1;
    one.tokens = {"w0", "w1"};
    one.head_index = 0;
    one.tail_index = 1;
    Matrix x1 = embed_input(one, net);
    CHECK(x1.rows == 4);

    // zero tables embed to the zero matrix
    for (auto& [name, m] : net.tensors()) m->zero();
    Matrix xz = embed_input(s, net);
    for (double v : xz.v) CHECK(v == 0.0);
}

TEST_CASE("encode matches a brute-force convolution oracle") {
    Rng rng(7);
    for (int round = 0; round < 10; ++round) {
        Cnn net = tiny_cnn(12, 4, 6, 2, 9, 5, 100 + static_cast<std::uint64_t>(round));
        Sentence s = toy_sentence(net, 5, 1, rng);
        ForwardTrace t = encode(s, net, Mode::kEval);

        Matrix x = embed_input(s, net);
        const int d = net.cfg.d();
        const int n_win = x.rows - 2;
        REQUIRE(t.conv.rows == n_win);
        for (int f = 0; f < net.cfg.d_s; ++f) {
            double best = -1e300;
            for (int j = 0; j < n_win; ++j) {
                double acc = net.conv_b.at(0, f);
                for (int k = 0; k < 3; ++k)
                    for (int c = 0; c < d; ++c) acc += net.conv_w.at(f, k * d + c) * x.at(j + k, c);
                CHECK(t.conv.at(j, f) == doctest::Approx(acc).epsilon(1e-12));
                best = std::max(best, acc);
            }
            CHECK(t.pooled[static_cast<std::size_t>(f)] == doctest::Approx(best).epsilon(1e-12));
            CHECK(t.rep[static_cast<std::size_t>(f)] ==
                  doctest::Approx(std::tanh(best)).epsilon(1e-12));
        }
    }
}

TEST_CASE("single window max-pool is the identity") {
    Cnn net = tiny_cnn(8, 2, 4, 2, 5, 4, 3);
    Sentence s;  // one token -> padded to exactly one window
    s.tokens = {"w0"};
    s.head_index = 0;
    s.tail_index = 0;
    ForwardTrace t = encode(s, net, Mode::kEval);
    REQUIRE(t.conv.rows == 1);
    for (int f = 0; f < net.cfg.d_s; ++f) {
        CHECK(t.pooled[static_cast<std::size_t>(f)] == t.conv.at(0, f));
        CHECK(t.argmax[static_cast<std::size_t>(f)] == 0);
    }
}

TEST_CASE("zero conv weights give zero representation") {
    Cnn net = tiny_cnn(8, 2, 4, 2, 5, 4, 3);
    net.conv_w.zero();
    net.conv_b.zero();
    Rng rng(5);
    Sentence s = toy_sentence(net, 4, 1, rng);
    ForwardTrace t = encode(s, net, Mode::kEval);
    for (double v : t.pooled) CHECK(v == 0.0);
    for (double v : t.rep) CHECK(v == 0.0);
}

TEST_CASE("predict softmax properties and oracle") {
    Cnn net = tiny_cnn(10, 4, 4, 2, 6, 4, 11);
    Rng rng(13);
    Sentence s = toy_sentence(net, 5, 2, rng);

    SUBCASE("zero output layer is uniform") {
        net.out_w.zero();
        net.out_b.zero();
        auto p = predict(s, net);
        for (double v : p) CHECK(v == doctest::Approx(0.25).epsilon(1e-12));
    }

    SUBCASE("bias dominance") {
        net.out_w.zero();
        net.out_b.zero();
        net.out_b.at(0, 1) = 10.0;
        net.out_b.at(0, 2) = -10.0;
        auto p = predict(s, net);
        int arg = 0;
        for (int c = 1; c < 4; ++c)
            if (p[static_cast<std::size_t>(c)] > p[static_cast<std::size_t>(arg)]) arg = c;
        CHECK(arg == 1);
    }

    SUBCASE("log-sum-exp oracle at 1e-12") {
        auto t = encode(s, net, Mode::kEval);
        double m = t.logits[0];
        for (double l : t.logits) m = std::max(m, l);
        double z = 0;
        for (double l : t.logits) z += std::exp(l - m);
        const double lse = m + std::log(z);
        double sum = 0;
        for (std::size_t c = 0; c < t.probs.size(); ++c) {
            const double ref = std::exp(t.logits[c] - lse);
            CHECK(std::abs(t.probs[c] - ref) <= 1e-12);
            CHECK(t.probs[c] > 0.0);
            CHECK(t.probs[c] < 1.0);
            sum += t.probs[c];
        }
        CHECK(std::abs(sum - 1.0) <= 1e-9);
    }

    SUBCASE("huge logits do not overflow") {
        std::vector<double> logits{1e4, -1e4, 5e3, 0.0};
        softmax_inplace(logits);
        double sum = 0;
        for (double v : logits) {
            CHECK(std::isfinite(v));
            sum += v;
        }
        CHECK(std::abs(sum - 1.0) <= 1e-9);
    }
}

TEST_CASE("cross-entropy closed forms") {
    // uniform prediction over 53 relations -> ln 53
    Cnn net = tiny_cnn(10, 53, 4, 2, 6, 4, 19);
    net.out_w.zero();
    net.out_b.zero();
    Rng rng(3);
    Sentence s = toy_sentence(net, 5, 7, rng);
    std::vector<const Sentence*> batch{&s};
    CnnGrads g = CnnGrads::zeros(net.cfg);
    Rng drop(1);
    const double loss = loss_and_grads(batch, net, drop, g);
    CHECK(loss == doctest::Approx(std::log(53.0)).epsilon(1e-12));

    // confident correct prediction -> loss 0
    net.out_b.at(0, 7) = 60.0;
    for (int c = 0; c < 53; ++c)
        if (c != 7) net.out_b.at(0, c) = -60.0;
    CnnGrads g2 = CnnGrads::zeros(net.cfg);
    const double loss2 = loss_and_grads(batch, net, drop, g2);
    CHECK(loss2 == doctest::Approx(0.0).epsilon(1e-12));
}

TEST_CASE("gradients match central finite differences") {
    // dropout disabled; every entry of every tensor, instances spanning
    // n_r in {2, 5, 53} and lengths {3, 7, 40}
    Rng meta(23);
    const int n_rs[] = {2, 5, 53};
    const int lens[] = {3, 7, 40};
    int checked_instances = 0;
    for (int round = 0; round < 21; ++round) {
        const int n_r = n_rs[round % 3];
        const int len = lens[(round / 3) % 3];
        Cnn net = tiny_cnn(12, n_r, 5, 2, 7, 4, 300 + static_cast<std::uint64_t>(round));
        Rng rng(400 + static_cast<std::uint64_t>(round));
        std::vector<Sentence> sents;
        for (int i = 0; i < 2; ++i)
            sents.push_back(toy_sentence(net, len, static_cast<int>(rng.uniform_int(0, n_r - 1)),
                                         rng, i));
        std::vector<const Sentence*> batch{&sents[0], &sents[1]};

        CnnGrads g = CnnGrads::zeros(net.cfg);
        Rng drop(1);
        loss_and_grads(batch, net, drop, g);

        const double eps = 1e-6;
        auto numeric = [&](double& slot) {
            const double orig = slot;
            slot = orig + eps;
            const double up = batch_loss(batch, net);
            slot = orig - eps;
            const double down = batch_loss(batch, net);
            slot = orig;
            return (up - down) / (2 * eps);
        };
        auto check_entry = [&](double analytic, double num) {
            const double denom = std::max({std::abs(analytic), std::abs(num), 1e-6});
            CHECK(std::abs(analytic - num) / denom <= 1e-4);
        };

        for (std::size_t i = 0; i < net.conv_w.v.size(); ++i)
            check_entry(g.conv_w.v[i], numeric(net.conv_w.v[i]));
        for (std::size_t i = 0; i < net.conv_b.v.size(); ++i)
            check_entry(g.conv_b.v[i], numeric(net.conv_b.v[i]));
        for (std::size_t i = 0; i < net.out_w.v.size(); ++i)
            check_entry(g.out_w.v[i], numeric(net.out_w.v[i]));
        for (std::size_t i = 0; i < net.out_b.v.size(); ++i)
            check_entry(g.out_b.v[i], numeric(net.out_b.v[i]));

        auto check_table = [&](Matrix& table, const std::map<int, std::vector<double>>& rows) {
            for (int r = 0; r < table.rows; ++r) {
                auto it = rows.find(r);
                for (int c = 0; c < table.cols; ++c) {
                    const double analytic =
                        it == rows.end() ? 0.0 : it->second[static_cast<std::size_t>(c)];
                    check_entry(analytic, numeric(table.at(r, c)));
                }
            }
        };
        check_table(net.word_emb, g.word_rows);
        check_table(net.pos_head_emb, g.pos_head_rows);
        check_table(net.pos_tail_emb, g.pos_tail_rows);
        ++checked_instances;
    }
    CHECK(checked_instances >= 20);
}

TEST_CASE("perturbing a non-argmax window below the gap keeps L fixed") {
    Cnn net = tiny_cnn(12, 3, 5, 2, 6, 4, 31);
    Rng rng(37);
    Sentence s = toy_sentence(net, 7, 1, rng);
    ForwardTrace t = encode(s, net, Mode::kEval);
    for (int f = 0; f < net.cfg.d_s; ++f) {
        const int best = t.argmax[static_cast<std::size_t>(f)];
        for (int j = 0; j < t.conv.rows; ++j) {
            if (j == best) continue;
            const double gap = t.pooled[static_cast<std::size_t>(f)] - t.conv.at(j, f);
            REQUIRE(gap >= 0.0);
            Matrix bumped = t.conv;
            bumped.at(j, f) += gap * 0.5;
            double mx = bumped.at(0, f);
            for (int jj = 1; jj < bumped.rows; ++jj) mx = std::max(mx, bumped.at(jj, f));
            CHECK(mx == t.pooled[static_cast<std::size_t>(f)]);
        }
    }
}

TEST_CASE("dropout semantics") {
    Cnn net = tiny_cnn(10, 3, 4, 2, 40, 4, 41);
    net.cfg.keep_prob = 0.5;
    Rng rng(43);
    Sentence s = toy_sentence(net, 5, 1, rng);

    Rng d1(7), d2(7);
    ForwardTrace a = encode(s, net, Mode::kTrain, &d1);
    ForwardTrace b = encode(s, net, Mode::kTrain, &d2);
    CHECK(a.mask == b.mask);  // same stream, same mask
    int zeros = 0;
    for (std::size_t i = 0; i < a.mask.size(); ++i) {
        CHECK((a.mask[i] == 0.0 || a.mask[i] == 2.0));  // inverted dropout at keep 0.5
        CHECK(a.rep_dropped[i] == a.rep[i] * a.mask[i]);
        zeros += a.mask[i] == 0.0;
    }
    CHECK(zeros > 0);  // 40 features at keep 0.5: all-kept is ~1e-12 likely

    ForwardTrace e = encode(s, net, Mode::kEval);
    CHECK(e.mask.empty());
    CHECK(e.rep_dropped == e.rep);
    CHECK_THROWS_AS(encode(s, net, Mode::kTrain, nullptr), Error);
}

TEST_CASE("eval encode is bitwise deterministic") {
    Cnn net = tiny_cnn(10, 3, 4, 2, 6, 4, 47);
    Rng rng(53);
    Sentence s = toy_sentence(net, 6, 2, rng);
    ForwardTrace a = encode(s, net, Mode::kEval);
    ForwardTrace b = encode(s, net, Mode::kEval);
    CHECK(a.probs == b.probs);
    CHECK(a.rep == b.rep);
    CHECK(a.pooled == b.pooled);
}

TEST_CASE("sgd_step") {
    Cnn net = tiny_cnn(8, 3, 4, 2, 5, 4, 59);
    Cnn before = net;
    Rng rng(61);
    Sentence s = toy_sentence(net, 5, 1, rng);
    std::vector<const Sentence*> batch{&s};

    SUBCASE("lr = 0 leaves parameters unchanged") {
        CnnGrads g = CnnGrads::zeros(net.cfg);
        Rng drop(1);
        loss_and_grads(batch, net, drop, g);
        sgd_step(net, g, 0.0);
        for (std::size_t i = 0; i < net.tensors().size(); ++i)
            CHECK(*net.tensors()[i].second == *before.tensors()[i].second);
    }

    SUBCASE("lr = 1 with g = theta zeroes the dense tensors") {
        CnnGrads g = CnnGrads::zeros(net.cfg);
        g.conv_w = net.conv_w;
        g.conv_b = net.conv_b;
        g.out_w = net.out_w;
        g.out_b = net.out_b;
        g.word_rows[3] = std::vector<double>(net.word_emb.row(3).begin(), net.word_emb.row(3).end());
        sgd_step(net, g, 1.0);
        for (double v : net.conv_w.v) CHECK(v == 0.0);
        for (double v : net.out_w.v) CHECK(v == 0.0);
        for (double v : net.word_emb.row(3)) CHECK(v == 0.0);
    }

    SUBCASE("one small step decreases the batch loss") {
        const double before_loss = batch_loss(batch, net);
        CnnGrads g = CnnGrads::zeros(net.cfg);
        Rng drop(1);
        loss_and_grads(batch, net, drop, g);
        sgd_step(net, g, 1e-3);
        CHECK(batch_loss(batch, net) < before_loss);
    }

    SUBCASE("shape mismatch is an error") {
        CnnGrads g = CnnGrads::zeros(net.cfg);
        g.out_w = Matrix(1, 1);
        CHECK_THROWS_AS(sgd_step(net, g, 0.1), Error);
    }
}

TEST_CASE("unknown words map to UNK") {
    Cnn net = tiny_cnn(8, 2, 4, 2, 5, 4, 67);
    CHECK(net.word_id("definitely-not-in-vocab") == kUnkId);
    CHECK(net.word_id(kPadToken) == kPadId);
}
