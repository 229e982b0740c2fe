#include "relex/commands.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <set>

#include "relex/checkpoint.hpp"
#include "relex/eval.hpp"
#include "relex/util.hpp"

namespace relex {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

void ensure_dir(const std::string& dir) {
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec) fail("cannot create directory " + dir + ": " + ec.message());
}

void require_file(const std::string& path) {
    if (!fs::exists(path)) fail("missing artifact: " + path);
}

bool file_has_content(const std::string& path) {
    std::error_code ec;
    return fs::exists(path, ec) && fs::file_size(path, ec) > 0;
}

void write_effective_config(const RunConfig& cfg, const std::string& stage) {
    cfg.write(cfg.out_dir() + "/config." + stage + ".json");
}

void write_corpus_subset(const Corpus& c, const std::vector<int>& ids, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) fail("cannot write corpus file: " + path);
    std::vector<int> sorted = ids;
    std::sort(sorted.begin(), sorted.end());
    for (int id : sorted) {
        const Sentence& s = c.by_id(id);
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

std::uint64_t derived_seed(const RunConfig& cfg, std::uint64_t tag) {
    return Rng(cfg.seed()).fork(tag).next();
}

EmbeddingTable entity_table_for(const RunConfig& cfg, const Corpus& corpus) {
    const std::string path = cfg.path("entity_emb_file", "entity_emb.txt");
    require_file(path);
    EmbeddingTable table = load_embeddings(path);
    complete_table(table, corpus.entities, derived_seed(cfg, 10));
    return table;
}

void check_relations(const Checkpoint& ckpt, const Corpus& corpus, const char* what) {
    if (ckpt.relations != corpus.relations)
        fail(std::string(what) + ": checkpoint and corpus disagree on the relation set");
}

PolicyParams policy_from(const Checkpoint& ckpt, const std::string& prefix) {
    const Matrix& w = ckpt.require(prefix + "/w");
    const Matrix& b = ckpt.require(prefix + "/b");
    PolicyParams p;
    p.w = w.v;
    p.b = b.v.at(0);
    return p;
}

void put_policy(Checkpoint& ckpt, const PolicyParams& p, const std::string& prefix) {
    Matrix w(1, p.dim());
    std::copy(p.w.begin(), p.w.end(), w.v.begin());
    ckpt.tensors.emplace_back(prefix + "/w", std::move(w));
    ckpt.tensors.emplace_back(prefix + "/b", Matrix{1, 1, p.b});
}

}  // namespace

int cmd_gen_synth(const RunConfig& cfg) {
    ensure_dir(cfg.out_dir());
    const double r_train = cfg.getd("split_train");
    const double r_valid = cfg.getd("split_valid");
    const double r_test = cfg.getd("split_test");
    if (r_train < 0 || r_valid < 0 || r_test < 0 ||
        std::abs(r_train + r_valid + r_test - 1.0) > 1e-9)
        fail("split ratios must be nonnegative and sum to 1");

    SynthConfig base = cfg.synth();
    const int n = base.n_bags;
    int n_train = static_cast<int>(std::lround(r_train * n));
    int n_valid = static_cast<int>(std::lround(r_valid * n));
    if (n_train + n_valid > n) n_valid = n - n_train;
    const int n_test = n - n_train - n_valid;

    struct Split {
        const char* name;
        int bags;
        bool noisy;
        int bucket_lo, bucket_hi;  // pair-disjoint splits
    };
    const int b1 = static_cast<int>(std::lround(r_train * 100));
    const int b2 = b1 + static_cast<int>(std::lround(r_valid * 100));
    const Split splits[] = {{"train", n_train, true, 0, std::max(b1, 1)},
                            {"valid", n_valid, false, std::max(b1, 1), std::max({b2, b1 + 1, 2})},
                            {"test", n_test, false, std::max({b2, b1 + 1, 2}), 100}};

    std::set<std::array<std::string, 3>> facts;
    int id_base = 0;
    int salt = 0;
    for (const Split& sp : splits) {
        const std::string path = cfg.out_dir() + "/" + sp.name + ".jsonl";
        if (sp.bags == 0) {
            std::ofstream(path, std::ios::binary);  // declared but empty split
            std::printf("gen-synth: %s.jsonl 0 bags, 0 sentences\n", sp.name);
            ++salt;
            continue;
        }
        SynthConfig sc = base;
        sc.n_bags = sp.bags;
        sc.content_salt = static_cast<std::uint64_t>(salt++);
        sc.id_base = id_base;
        sc.pair_bucket_lo = sp.bucket_lo;
        sc.pair_bucket_hi = sp.bucket_hi;
        if (!sp.noisy) {
            sc.noise_rate = {0.0};
            sc.all_noisy_bag_rate = 0.0;
        }
        Corpus c = generate_synthetic(sc);
        save_corpus(c, path);
        id_base = c.sentences.back().id + 1;
        for (const Bag& b : c.bags)
            if (b.relation_id != c.na_id)
                facts.insert({b.head, c.relations[static_cast<std::size_t>(b.relation_id)], b.tail});
        std::printf("gen-synth: %s.jsonl %d bags, %zu sentences\n", sp.name, sp.bags, c.size());
    }

    TripleFile tf;
    std::set<std::string> ents, rels;
    for (const auto& f : facts) {
        ents.insert(f[0]);
        ents.insert(f[2]);
        rels.insert(f[1]);
    }
    tf.entities.assign(ents.begin(), ents.end());
    tf.relations.assign(rels.begin(), rels.end());
    std::map<std::string, int> eid, rid;
    for (std::size_t i = 0; i < tf.entities.size(); ++i) eid[tf.entities[i]] = static_cast<int>(i);
    for (std::size_t i = 0; i < tf.relations.size(); ++i) rid[tf.relations[i]] = static_cast<int>(i);
    for (const auto& f : facts)
        tf.triples.push_back(Triple{eid.at(f[0]), rid.at(f[1]), eid.at(f[2])});
    save_triples(tf, cfg.out_dir() + "/triples.tsv");
    std::printf("gen-synth: triples.tsv %zu facts\n", tf.triples.size());

    write_effective_config(cfg, "gen-synth");
    return 0;
}

int cmd_pretrain_transe(const RunConfig& cfg) {
    ensure_dir(cfg.out_dir());
    const std::string path = cfg.path("triples_file", "triples.tsv");
    require_file(path);
    TripleFile tf = load_triples(path);
    TransEResult res = transe_train(tf.triples, tf.entities, tf.relations, cfg.transe());
    save_embeddings(res.entities, cfg.out_dir() + "/entity_emb.txt");
    save_embeddings(res.relations, cfg.out_dir() + "/relation_emb.txt");
    std::printf("pretrain-transe: %zu triples, %zu entities, hinge %s -> %s\n", tf.triples.size(),
                tf.entities.size(),
                res.epoch_mean_loss.empty() ? "-" : fmt_double(res.epoch_mean_loss.front()).c_str(),
                res.epoch_mean_loss.empty() ? "-" : fmt_double(res.epoch_mean_loss.back()).c_str());
    write_effective_config(cfg, "pretrain-transe");
    return 0;
}

int cmd_pretrain_cnn(const RunConfig& cfg) {
    ensure_dir(cfg.out_dir());
    const std::string path = cfg.path("train_file", "train.jsonl");
    require_file(path);
    Corpus train = load_corpus(path, cfg.load_options());
    std::vector<double> losses;
    Cnn net = pretrain_classifier(train, cfg.cnn(), cfg.train(), &losses);
    Checkpoint ckpt;
    put_cnn(ckpt, net);
    save_checkpoint(ckpt, cfg.out_dir() + "/cnn_pretrained.ckpt");
    std::printf("pretrain-cnn: %zu sentences, %d relations, loss", train.size(),
                train.n_relations());
    for (double l : losses) std::printf(" %s", fmt_double(l).c_str());
    std::printf("\n");
    write_effective_config(cfg, "pretrain-cnn");
    return 0;
}

int cmd_pretrain_policy(const RunConfig& cfg) {
    ensure_dir(cfg.out_dir());
    const std::string train_path = cfg.path("train_file", "train.jsonl");
    require_file(train_path);
    Corpus train = load_corpus(train_path, cfg.load_options());

    const std::string cnn_path = cfg.path("cnn_ckpt", "cnn_pretrained.ckpt");
    require_file(cnn_path);
    Checkpoint cnn_ckpt = load_checkpoint(cnn_path);
    check_relations(cnn_ckpt, train, "pretrain-policy");
    Cnn net = cnn_from_checkpoint(cnn_ckpt);

    EmbeddingTable entities = entity_table_for(cfg, train);

    std::vector<EpisodeMetrics> log;
    PolicyParams policy = pretrain_policy(train, net, entities, cfg.train(), &log);

    Checkpoint out;
    put_cnn(out, net);
    put_policy(out, policy, "policy");
    put_entity_table(out, entities);
    save_checkpoint(out, cfg.out_dir() + "/policy_pretrained.ckpt");

    std::ofstream mf(cfg.out_dir() + "/pretrain_policy_metrics.tsv", std::ios::binary);
    mf << format_metric_log(log);
    std::printf("pretrain-policy: %d episodes, final mean reward %s\n",
                static_cast<int>(log.size()),
                log.empty() ? "-" : fmt_double(log.back().mean_reward).c_str());
    write_effective_config(cfg, "pretrain-policy");
    return 0;
}

int cmd_train(const RunConfig& cfg) {
    ensure_dir(cfg.out_dir());
    const std::string train_path = cfg.path("train_file", "train.jsonl");
    require_file(train_path);
    Corpus train = load_corpus(train_path, cfg.load_options());

    const std::string valid_path = cfg.path("valid_file", "valid.jsonl");
    Corpus valid;
    bool has_valid = file_has_content(valid_path);
    if (has_valid) {
        LoadOptions opts = cfg.load_options();
        opts.relation_universe = train.relations;
        valid = load_corpus(valid_path, opts);
    }

    const std::string policy_path = cfg.path("policy_ckpt", "policy_pretrained.ckpt");
    require_file(policy_path);
    Checkpoint in_ckpt = load_checkpoint(policy_path);
    check_relations(in_ckpt, train, "train");
    Cnn net = cnn_from_checkpoint(in_ckpt);
    PolicyParams policy = policy_from(in_ckpt, "policy");
    EmbeddingTable entities = entity_table_from_checkpoint(in_ckpt);
    complete_table(entities, train.entities, derived_seed(cfg, 10));

    JointResult res = joint_train(train, has_valid ? &valid : nullptr, std::move(policy),
                                  std::move(net), entities, cfg.train());

    Checkpoint out;
    put_cnn(out, res.best_cnn);
    put_cnn(out, res.best_cnn_target, "cnn_target");
    put_policy(out, res.best_policy, "policy");
    put_policy(out, res.best_policy_target, "policy_target");
    put_entity_table(out, entities);
    out.put_meta_int("best_episode", res.best_episode);
    out.put_meta_double("best_val_accuracy", res.best_val_accuracy);
    save_checkpoint(out, cfg.out_dir() + "/trained.ckpt");

    std::ofstream mf(cfg.out_dir() + "/metrics.tsv", std::ios::binary);
    mf << format_metric_log(res.log);
    std::printf("train: %d episodes, best episode %d, best val accuracy %s\n",
                static_cast<int>(res.log.size()), res.best_episode,
                fmt_double(res.best_val_accuracy).c_str());
    write_effective_config(cfg, "train");
    return 0;
}

int cmd_select(const RunConfig& cfg) {
    ensure_dir(cfg.out_dir());
    const std::string corpus_path = cfg.path("train_file", "train.jsonl");
    require_file(corpus_path);
    Corpus corpus = load_corpus(corpus_path, cfg.load_options());

    const std::string ckpt_path = cfg.path("trained_ckpt", "trained.ckpt");
    require_file(ckpt_path);
    Checkpoint ckpt = load_checkpoint(ckpt_path);
    check_relations(ckpt, corpus, "select");
    // states and rewards follow the training convention: the target CNN
    const Cnn snapshot = ckpt.has("cnn_target/conv_w") ? cnn_from_checkpoint(ckpt, "cnn_target")
                                                       : cnn_from_checkpoint(ckpt);
    PolicyParams policy = policy_from(ckpt, "policy");
    EmbeddingTable entities = entity_table_from_checkpoint(ckpt);
    complete_table(entities, corpus.entities, derived_seed(cfg, 10));

    SelectOptions opts;
    const std::string mode = cfg.gets("select_mode");
    if (mode == "greedy")
        opts.mode = SelectMode::kGreedy;
    else if (mode == "sample")
        opts.mode = SelectMode::kSample;
    else
        fail("select_mode must be 'greedy' or 'sample'");
    opts.select_na_bags = cfg.getb("select_na_bags");

    Rng rng(derived_seed(cfg, 11));
    SelectionResult res = select_corpus(corpus, policy, snapshot, entities, opts,
                                        opts.mode == SelectMode::kSample ? &rng : nullptr);

    write_decisions(res.decisions, corpus, cfg.out_dir() + "/decisions.tsv");
    std::vector<int> xhat = res.selected_ids;
    xhat.insert(xhat.end(), res.bypassed_ids.begin(), res.bypassed_ids.end());
    write_corpus_subset(corpus, xhat, cfg.out_dir() + "/cleansed.jsonl");

    std::printf("select: kept %zu of %zu decided sentences, %d of %d bags filtered",
                res.selected_ids.size(), res.decisions.size(), res.bags_filtered,
                res.bags_processed);
    if (!res.bypassed_ids.empty())
        std::printf(", %zu NA sentences bypassed", res.bypassed_ids.size());
    std::printf("\n");

    bool flagged = !res.decisions.empty();
    for (const Decision& d : res.decisions)
        if (!d.noise_flag.has_value()) flagged = false;
    if (flagged) {
        AuditSummary audit = selection_audit(res.decisions);
        NoisyBagStats stats = noisy_bag_stats(res.decisions, corpus);
        std::printf("select: decision accuracy %s, filtered bags all-noisy %s\n",
                    fmt_double(audit.accuracy).c_str(),
                    stats.frac_all_noisy ? fmt_double(*stats.frac_all_noisy).c_str() : "-");
    }
    write_effective_config(cfg, "select");
    return 0;
}

int cmd_eval(const RunConfig& cfg) {
    ensure_dir(cfg.out_dir());
    const std::string ckpt_path = cfg.path("trained_ckpt", "trained.ckpt");
    require_file(ckpt_path);
    Checkpoint ckpt = load_checkpoint(ckpt_path);
    Cnn net = cnn_from_checkpoint(ckpt);

    const std::string test_path = cfg.path("test_file", "test.jsonl");
    require_file(test_path);
    LoadOptions opts = cfg.load_options();
    opts.relation_universe = net.relations;
    Corpus test = load_corpus(test_path, opts);

    const int threads = static_cast<int>(cfg.geti("threads"));
    std::vector<PredictionRecord> records = predict_corpus(test, net, threads);
    Metrics m = sentence_metrics(records, test.n_relations(), /*exclude_na=*/false, test.na_id);

    json summary;
    summary["accuracy"] = m.accuracy;
    summary["macro_f1"] = m.macro_f1;
    summary["sentences"] = records.size();
    json per_class = json::array();
    for (const ClassMetrics& cm : m.per_class) {
        per_class.push_back({{"relation", test.relations[static_cast<std::size_t>(cm.cls)]},
                             {"precision", cm.precision},
                             {"recall", cm.recall},
                             {"f1", cm.f1},
                             {"gold", cm.gold_count}});
    }
    summary["per_class"] = per_class;

    write_pr_points(pr_curve(records, test.na_id), cfg.out_dir() + "/pr_sentence.tsv");
    write_pr_points(heldout_fact_pr(test, records, test.na_id), cfg.out_dir() + "/pr_fact.tsv");

    const std::string decisions_path = cfg.path("decisions_file", "decisions.tsv");
    if (file_has_content(decisions_path)) {
        std::vector<Decision> decisions = load_decisions(decisions_path);
        bool flagged = !decisions.empty();
        for (const Decision& d : decisions)
            if (!d.noise_flag.has_value()) flagged = false;
        if (flagged) {
            AuditSummary audit = selection_audit(decisions);
            summary["audit"] = {{"decision_accuracy", audit.accuracy},
                                {"kept", audit.kept},
                                {"rejected", audit.rejected},
                                {"noisy_rejected", audit.noisy_rejected},
                                {"total", audit.total}};
            const std::string train_path = cfg.path("train_file", "train.jsonl");
            if (file_has_content(train_path)) {
                Corpus train = load_corpus(train_path, cfg.load_options());
                NoisyBagStats stats = noisy_bag_stats(decisions, train);
                json nb;
                nb["filtered_bags"] = stats.filtered_bags;
                if (stats.frac_all_noisy) nb["frac_all_noisy"] = *stats.frac_all_noisy;
                summary["noisy_bags"] = nb;
            }
        }
    }

    std::ofstream out(cfg.out_dir() + "/metrics.json", std::ios::binary);
    if (!out) fail("cannot write metrics.json");
    out << summary.dump(2) << '\n';
    std::printf("eval: accuracy %s, macro-F1 %s over %zu sentences\n",
                fmt_double(m.accuracy).c_str(), fmt_double(m.macro_f1).c_str(), records.size());
    write_effective_config(cfg, "eval");
    return 0;
}

}  // namespace relex
