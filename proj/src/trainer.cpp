#include "relex/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "relex/parallel.hpp"
#include "relex/util.hpp"

namespace relex {

void TrainConfig::validate() const {
    if (tau < 0.0 || tau > 1.0) fail("train: tau must be in [0, 1]");
    if (lr_cnn <= 0.0 || lr_policy_pretrain <= 0.0 || lr_policy_joint <= 0.0)
        fail("train: learning rates must be positive");
    if (batch_size < 1) fail("train: batch_size must be >= 1");
    if (episodes < 0 || pretrain_cnn_epochs < 0 || pretrain_policy_episodes < 0)
        fail("train: epoch/episode counts must be >= 0");
    if (keep_prob <= 0.0 || keep_prob > 1.0) fail("train: keep_prob must be in (0, 1]");
    if (baseline_beta <= 0.0 || baseline_beta > 1.0) fail("train: baseline_beta must be in (0, 1]");
}

std::string format_metric_log(const std::vector<EpisodeMetrics>& log) {
    std::string out = "# episode\tmean_reward\tselected\tfrac_bags_filtered\ttrain_loss\tval_accuracy\n";
    for (const EpisodeMetrics& m : log) {
        out += str_format("%d\t%s\t%d\t%s\t%s\t%s\n", m.episode, fmt_double(m.mean_reward).c_str(),
                          m.selected, fmt_double(m.frac_bags_filtered).c_str(),
                          fmt_double(m.train_loss).c_str(), fmt_double(m.val_accuracy).c_str());
    }
    return out;
}

void soft_update(PolicyParams& target, const PolicyParams& online, double tau) {
    if (target.dim() != online.dim()) fail("soft_update: policy dimension mismatch");
    for (std::size_t i = 0; i < target.w.size(); ++i)
        target.w[i] = tau * online.w[i] + (1.0 - tau) * target.w[i];
    target.b = tau * online.b + (1.0 - tau) * target.b;
}

void soft_update(Cnn& target, const Cnn& online, double tau) {
    auto t = target.tensors();
    auto o = online.tensors();
    for (std::size_t k = 0; k < t.size(); ++k) {
        Matrix& tm = *t[k].second;
        const Matrix& om = *o[k].second;
        check_same_shape(tm, om, "soft_update");
        for (std::size_t i = 0; i < tm.v.size(); ++i)
            tm.v[i] = tau * om.v[i] + (1.0 - tau) * tm.v[i];
    }
}

namespace {

// Per-sentence eval-mode snapshot reused for states, rewards, and the
// empty-selection fallback within one episode.
struct SentenceEval {
    std::vector<double> rep;
    double loglik = 0.0;
};

std::vector<SentenceEval> evaluate_sentences(const Corpus& corpus, const Cnn& net, int threads) {
    std::vector<SentenceEval> out(corpus.size());
    parallel_for(static_cast<int>(corpus.size()), threads, [&](int i) {
        const Sentence& s = corpus.sentences[static_cast<std::size_t>(i)];
        ForwardTrace t = encode(s, net, Mode::kEval);
        out[static_cast<std::size_t>(i)].loglik =
            t.logits[static_cast<std::size_t>(s.relation_id)] - log_sum_exp(t.logits);
        out[static_cast<std::size_t>(i)].rep = std::move(t.rep);
    });
    return out;
}

double mean_loglik(const std::vector<SentenceEval>& evals) {
    double sum = 0.0;
    for (const auto& e : evals) sum += e.loglik;
    return sum / static_cast<double>(evals.size());
}

}  // namespace

double avg_train_loglik(const Corpus& corpus, const Cnn& net, int threads) {
    if (corpus.size() == 0) fail("avg_train_loglik: empty corpus");
    std::vector<double> ll(corpus.size());
    parallel_for(static_cast<int>(corpus.size()), threads, [&](int i) {
        ll[static_cast<std::size_t>(i)] =
            log_prob(corpus.sentences[static_cast<std::size_t>(i)],
                     corpus.sentences[static_cast<std::size_t>(i)].relation_id, net);
    });
    double sum = 0.0;
    for (double x : ll) sum += x;
    return sum / static_cast<double>(ll.size());
}

double corpus_accuracy(const Corpus& corpus, const Cnn& net, int threads) {
    if (corpus.size() == 0) fail("corpus_accuracy: empty corpus");
    std::vector<int> hit(corpus.size(), 0);
    parallel_for(static_cast<int>(corpus.size()), threads, [&](int i) {
        const Sentence& s = corpus.sentences[static_cast<std::size_t>(i)];
        std::vector<double> p = predict(s, net);
        int arg = 0;
        for (std::size_t c = 1; c < p.size(); ++c)
            if (p[c] > p[static_cast<std::size_t>(arg)]) arg = static_cast<int>(c);
        hit[static_cast<std::size_t>(i)] = arg == s.relation_id ? 1 : 0;
    });
    long correct = 0;
    for (int h : hit) correct += h;
    return static_cast<double>(correct) / static_cast<double>(corpus.size());
}

Cnn train_on_subset(const Corpus& corpus, const std::vector<int>& sentence_ids, Cnn net,
                    int epochs, const TrainConfig& cfg, Rng& rng, const Corpus* valid,
                    std::vector<double>* epoch_losses) {
    if (sentence_ids.empty()) fail("train_on_subset: empty sentence set");
    std::vector<const Sentence*> pool;
    pool.reserve(sentence_ids.size());
    for (int id : sentence_ids) pool.push_back(&corpus.by_id(id));

    Cnn best = net;
    double best_acc = -1.0;
    std::vector<const Sentence*> batch;
    for (int epoch = 0; epoch < epochs; ++epoch) {
        rng.shuffle(pool);
        double loss_sum = 0.0;
        for (std::size_t start = 0; start < pool.size(); start += static_cast<std::size_t>(cfg.batch_size)) {
            const std::size_t end = std::min(pool.size(), start + static_cast<std::size_t>(cfg.batch_size));
            batch.assign(pool.begin() + static_cast<std::ptrdiff_t>(start),
                         pool.begin() + static_cast<std::ptrdiff_t>(end));
            CnnGrads g = CnnGrads::zeros(net.cfg);
            loss_sum += loss_and_grads(batch, net, rng, g) * static_cast<double>(batch.size());
            sgd_step(net, g, cfg.lr_cnn);
        }
        if (epoch_losses) epoch_losses->push_back(loss_sum / static_cast<double>(pool.size()));
        if (valid) {
            const double acc = corpus_accuracy(*valid, net, cfg.threads);
            if (acc > best_acc) {
                best_acc = acc;
                best = net;
            }
        }
    }
    return valid && epochs > 0 ? best : net;
}

Cnn pretrain_classifier(const Corpus& train, const CnnConfig& cnn_cfg, const TrainConfig& cfg,
                        std::vector<double>* epoch_losses) {
    if (train.size() == 0) fail("pretrain_classifier: empty corpus");
    cfg.validate();
    CnnConfig cc = cnn_cfg;
    cc.vocab_size = static_cast<int>(train.vocab.size());
    cc.n_relations = train.n_relations();
    cc.keep_prob = cfg.keep_prob;
    Rng rng(cfg.seed);
    Cnn net = Cnn::init(cc, train.vocab, train.relations, train.na_id, rng.fork(1).next());
    std::vector<int> ids;
    ids.reserve(train.size());
    for (const Sentence& s : train.sentences) ids.push_back(s.id);
    Rng train_rng = rng.fork(2);
    return train_on_subset(train, ids, std::move(net), cfg.pretrain_cnn_epochs, cfg, train_rng,
                           nullptr, epoch_losses);
}

void run_episodes(TrainState& st, const Corpus& train, const Corpus* valid,
                  const EmbeddingTable& entities, const TrainConfig& cfg, int n_episodes,
                  double policy_lr, bool update_cnn, Rng& rng) {
    cfg.validate();
    std::vector<std::size_t> bag_order(train.bags.size());
    for (std::size_t i = 0; i < bag_order.size(); ++i) bag_order[i] = i;

    for (int ep = 0; ep < n_episodes; ++ep) {
        st.episode += 1;
        rng.shuffle(bag_order);

        const auto evals = evaluate_sentences(train, st.cnn_target, cfg.threads);
        st.fallback_avg_loglik = mean_loglik(evals);
        if (cfg.reward_baseline_ema && !st.baseline_ready) {
            // seed the baseline from the population the selector actually
            // decides on, so episode-one advantages start near zero
            double sum = 0.0;
            long n = 0;
            for (const Bag& bag : train.bags) {
                if (!cfg.select_na_bags && bag.relation_id == train.na_id) continue;
                for (int sid : bag.sentence_ids) {
                    sum += evals[static_cast<std::size_t>(&train.by_id(sid) -
                                                          train.sentences.data())].loglik;
                    ++n;
                }
            }
            st.reward_baseline = n > 0 ? sum / static_cast<double>(n) : st.fallback_avg_loglik;
            st.baseline_ready = true;
        }

        auto eval_index = [&](int sid) {
            return static_cast<std::size_t>(&train.by_id(sid) - train.sentences.data());
        };

        double reward_sum = 0.0;
        int processed = 0;
        int filtered = 0;
        std::vector<int> selected_ids;
        std::vector<std::size_t> member_order;
        std::vector<std::vector<double>> reprs;
        for (std::size_t k : bag_order) {
            const Bag& bag = train.bags[k];
            if (!cfg.select_na_bags && bag.relation_id == train.na_id) continue;
            ++processed;

            reprs.clear();
            reprs.reserve(bag.size());
            for (int sid : bag.sentence_ids) reprs.push_back(evals[eval_index(sid)].rep);
            member_order.resize(bag.size());
            for (std::size_t i = 0; i < member_order.size(); ++i) member_order[i] = i;
            if (cfg.shuffle_bag_sentences) rng.shuffle(member_order);

            Trajectory traj = walk_bag(reprs, member_order, entities.row(bag.head),
                                       entities.row(bag.tail),
                                       cfg.sample_with_target ? st.policy_target : st.policy,
                                       /*greedy=*/false, &rng, static_cast<int>(k));

            std::vector<double> chosen_ll;
            for (std::size_t i = 0; i < member_order.size(); ++i) {
                if (traj.actions[i] == 1) {
                    const int sid = bag.sentence_ids[member_order[i]];
                    chosen_ll.push_back(evals[eval_index(sid)].loglik);
                    selected_ids.push_back(sid);
                }
            }
            const double reward = bag_reward(chosen_ll, st.fallback_avg_loglik);
            reward_sum += reward;
            if (chosen_ll.empty()) ++filtered;

            traj.terminal_reward = cfg.reward_baseline_ema ? reward - st.reward_baseline : reward;
            traj.reward_set = true;
            policy_update(traj, st.policy, policy_lr);
        }

        // X hat for this episode's classifier pass
        if (!cfg.select_na_bags)
            for (const Bag& bag : train.bags)
                if (bag.relation_id == train.na_id)
                    selected_ids.insert(selected_ids.end(), bag.sentence_ids.begin(),
                                        bag.sentence_ids.end());
        std::sort(selected_ids.begin(), selected_ids.end());

        EpisodeMetrics m;
        m.episode = st.episode;
        m.mean_reward = processed > 0 ? reward_sum / processed : 0.0;
        m.selected = static_cast<int>(selected_ids.size());
        m.frac_bags_filtered = processed > 0 ? static_cast<double>(filtered) / processed : 0.0;

        if (update_cnn && !selected_ids.empty()) {
            std::vector<double> losses;
            st.cnn = train_on_subset(train, selected_ids, std::move(st.cnn), 1, cfg, rng, nullptr,
                                     &losses);
            m.train_loss = losses.empty() ? 0.0 : losses.back();
        } else if (update_cnn) {
            // empty selection: skip the classifier pass, keep going
            m.train_loss = std::numeric_limits<double>::quiet_NaN();
        }

        if (cfg.reward_baseline_ema && processed > 0)
            st.reward_baseline +=
                cfg.baseline_beta * (reward_sum / processed - st.reward_baseline);

        soft_update(st.policy_target, st.policy, cfg.tau);
        soft_update(st.cnn_target, st.cnn, cfg.tau);

        m.val_accuracy = valid ? corpus_accuracy(*valid, st.cnn, cfg.threads)
                               : std::numeric_limits<double>::quiet_NaN();
        st.log.push_back(m);

        if (valid && m.val_accuracy > st.best_val_accuracy) {
            st.best_val_accuracy = m.val_accuracy;
            st.best_episode = st.episode;
            st.best_policy = st.policy;
            st.best_policy_target = st.policy_target;
            st.best_cnn = st.cnn;
            st.best_cnn_target = st.cnn_target;
        }
    }
}

PolicyParams pretrain_policy(const Corpus& train, const Cnn& fixed_cnn,
                             const EmbeddingTable& entities, const TrainConfig& cfg,
                             std::vector<EpisodeMetrics>* log) {
    const int d_state = 2 * fixed_cnn.cfg.d_s + 2 * entities.dim;
    Rng rng(cfg.seed);
    TrainState st;
    st.policy = PolicyParams::init(d_state, rng.fork(3).next());
    for (double& w : st.policy.w) w *= cfg.policy_init_scale;
    st.policy.b = st.policy.b * cfg.policy_init_scale + cfg.policy_init_bias;
    st.policy_target = st.policy;
    st.cnn = fixed_cnn;
    st.cnn_target = fixed_cnn;
    Rng ep_rng = rng.fork(4);
    run_episodes(st, train, nullptr, entities, cfg, cfg.pretrain_policy_episodes,
                 cfg.lr_policy_pretrain, /*update_cnn=*/false, ep_rng);
    if (log) *log = st.log;
    return st.policy;
}

JointResult joint_train(const Corpus& train, const Corpus* valid, PolicyParams policy, Cnn cnn,
                        const EmbeddingTable& entities, const TrainConfig& cfg) {
    Rng rng(cfg.seed);
    TrainState st;
    st.policy = std::move(policy);
    st.policy_target = st.policy;
    st.cnn = std::move(cnn);
    st.cnn_target = st.cnn;
    Rng ep_rng = rng.fork(5);
    run_episodes(st, train, valid, entities, cfg, cfg.episodes, cfg.lr_policy_joint,
                 /*update_cnn=*/true, ep_rng);

    JointResult res;
    res.log = std::move(st.log);
    res.best_episode = st.best_episode;
    res.best_val_accuracy = st.best_val_accuracy;
    if (st.best_episode >= 0) {
        res.best_policy = st.best_policy;
        res.best_policy_target = st.best_policy_target;
        res.best_cnn = st.best_cnn;
        res.best_cnn_target = st.best_cnn_target;
    } else {
        res.best_policy = st.policy;
        res.best_policy_target = st.policy_target;
        res.best_cnn = st.cnn;
        res.best_cnn_target = st.cnn_target;
    }
    res.policy = std::move(st.policy);
    res.policy_target = std::move(st.policy_target);
    res.cnn = std::move(st.cnn);
    res.cnn_target = std::move(st.cnn_target);
    return res;
}

}  // namespace relex
