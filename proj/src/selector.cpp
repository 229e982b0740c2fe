#include "relex/selector.hpp"

#include <cmath>
#include <fstream>
#include <sstream>

#include "relex/util.hpp"

namespace relex {

PolicyParams PolicyParams::zeros(int dim) {
    PolicyParams p;
    p.w.assign(static_cast<std::size_t>(dim), 0.0);
    return p;
}

PolicyParams PolicyParams::init(int dim, std::uint64_t seed) {
    Rng rng(seed);
    PolicyParams p;
    const double scale = std::sqrt(6.0 / (dim + 1));
    p.w.resize(static_cast<std::size_t>(dim));
    for (double& x : p.w) x = rng.uniform(-scale, scale);
    p.b = rng.uniform(-scale, scale);
    return p;
}

std::vector<double> SelectorState::concat() const {
    std::vector<double> f;
    f.reserve(static_cast<std::size_t>(dim()));
    f.insert(f.end(), cur_repr.begin(), cur_repr.end());
    f.insert(f.end(), chosen_avg.begin(), chosen_avg.end());
    f.insert(f.end(), head_emb.begin(), head_emb.end());
    f.insert(f.end(), tail_emb.begin(), tail_emb.end());
    return f;
}

double sigmoid(double z) {
    if (z >= 0.0) return 1.0 / (1.0 + std::exp(-z));
    const double e = std::exp(z);
    return e / (1.0 + e);
}

namespace {

double dot_state(const PolicyParams& p, const SelectorState& s) {
    if (p.dim() != s.dim()) fail("policy_z: state dimension mismatch");
    const double* w = p.w.data();
    double z = p.b;
    for (double x : s.cur_repr) z += *w++ * x;
    for (double x : s.chosen_avg) z += *w++ * x;
    for (double x : s.head_emb) z += *w++ * x;
    for (double x : s.tail_emb) z += *w++ * x;
    return z;
}

}  // namespace

double policy_z(const PolicyParams& p, const SelectorState& s) { return dot_state(p, s); }

double policy_prob(const PolicyParams& p, const SelectorState& s, int action) {
    if (action != 0 && action != 1) fail("policy_prob: action must be 0 or 1");
    const double p1 = sigmoid(dot_state(p, s));
    return action == 1 ? p1 : 1.0 - p1;
}

std::vector<std::vector<double>> bag_reprs(const Bag& bag, const Corpus& corpus,
                                           const Cnn& snapshot) {
    std::vector<std::vector<double>> reprs;
    reprs.reserve(bag.size());
    for (int sid : bag.sentence_ids)
        reprs.push_back(encode(corpus.by_id(sid), snapshot, Mode::kEval).rep);
    return reprs;
}

SelectorState state_features(const Bag& bag, std::size_t index, const std::vector<int>& chosen,
                             const Corpus& corpus, const Cnn& snapshot,
                             const EmbeddingTable& entities) {
    if (index >= bag.size()) fail("state_features: index out of range");
    SelectorState s;
    s.cur_repr = encode(corpus.bag_sentence(bag, index), snapshot, Mode::kEval).rep;
    s.chosen_avg.assign(s.cur_repr.size(), 0.0);
    if (!chosen.empty()) {
        for (int c : chosen) {
            if (c < 0 || static_cast<std::size_t>(c) >= index)
                fail("state_features: chosen set must precede the current sentence");
            auto rep = encode(corpus.bag_sentence(bag, static_cast<std::size_t>(c)), snapshot,
                              Mode::kEval).rep;
            for (std::size_t i = 0; i < rep.size(); ++i) s.chosen_avg[i] += rep[i];
        }
        for (double& x : s.chosen_avg) x /= static_cast<double>(chosen.size());
    }
    auto h = entities.row(bag.head);
    auto t = entities.row(bag.tail);
    s.head_emb.assign(h.begin(), h.end());
    s.tail_emb.assign(t.begin(), t.end());
    return s;
}

Trajectory walk_bag(const std::vector<std::vector<double>>& reprs,
                    const std::vector<std::size_t>& member_order,
                    std::span<const double> head_emb, std::span<const double> tail_emb,
                    const PolicyParams& policy, bool greedy, Rng* rng, int bag_index) {
    Trajectory traj;
    traj.bag_index = bag_index;
    const std::size_t d_s = reprs.empty() ? 0 : reprs[0].size();
    std::vector<double> chosen_sum(d_s, 0.0);
    int chosen_n = 0;

    for (std::size_t pos : member_order) {
        SelectorState s;
        s.cur_repr = reprs[pos];
        s.chosen_avg.assign(d_s, 0.0);
        if (chosen_n > 0)
            for (std::size_t i = 0; i < d_s; ++i)
                s.chosen_avg[i] = chosen_sum[i] / static_cast<double>(chosen_n);
        s.head_emb.assign(head_emb.begin(), head_emb.end());
        s.tail_emb.assign(tail_emb.begin(), tail_emb.end());

        const double p1 = sigmoid(dot_state(policy, s));
        int action;
        if (greedy) {
            action = p1 >= 0.5 ? 1 : 0;
        } else {
            if (!rng) fail("walk_bag: sampling needs an rng");
            action = rng->bernoulli(p1) ? 1 : 0;
        }
        if (action == 1) {
            for (std::size_t i = 0; i < d_s; ++i) chosen_sum[i] += reprs[pos][i];
            ++chosen_n;
        }
        traj.states.push_back(std::move(s));
        traj.actions.push_back(action);
    }
    return traj;
}

Trajectory sample_trajectory(const Bag& bag, int bag_index, const Corpus& corpus,
                             const PolicyParams& policy, const Cnn& snapshot,
                             const EmbeddingTable& entities, Rng& rng) {
    auto reprs = bag_reprs(bag, corpus, snapshot);
    std::vector<std::size_t> order(bag.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    return walk_bag(reprs, order, entities.row(bag.head), entities.row(bag.tail), policy,
                    /*greedy=*/false, &rng, bag_index);
}

double bag_reward(const std::vector<double>& chosen_logliks, double fallback_avg_loglik) {
    if (chosen_logliks.empty()) return fallback_avg_loglik;
    double sum = 0.0;
    for (double l : chosen_logliks) sum += l;
    return sum / static_cast<double>(chosen_logliks.size());
}

double bag_reward(const Bag& bag, const std::vector<int>& chosen, const Corpus& corpus,
                  const Cnn& snapshot, double fallback_avg_loglik) {
    std::vector<double> logliks;
    logliks.reserve(chosen.size());
    for (int c : chosen)
        logliks.push_back(log_prob(corpus.bag_sentence(bag, static_cast<std::size_t>(c)),
                                   bag.relation_id, snapshot));
    return bag_reward(logliks, fallback_avg_loglik);
}

void policy_update(const Trajectory& traj, PolicyParams& policy, double lr) {
    if (!traj.reward_set) fail("policy_update: terminal reward not set");
    if (traj.states.size() != traj.actions.size())
        fail("policy_update: states and actions disagree");
    const double v = traj.terminal_reward;
    for (std::size_t i = 0; i < traj.states.size(); ++i) {
        const SelectorState& s = traj.states[i];
        const double sig = sigmoid(dot_state(policy, s));
        const double coef = lr * v * (traj.actions[i] == 1 ? 1.0 - sig : -sig);
        double* w = policy.w.data();
        for (double x : s.cur_repr) *w++ += coef * x;
        for (double x : s.chosen_avg) *w++ += coef * x;
        for (double x : s.head_emb) *w++ += coef * x;
        for (double x : s.tail_emb) *w++ += coef * x;
        policy.b += coef;
    }
}

SelectionResult select_corpus(const Corpus& corpus, const PolicyParams& policy,
                              const Cnn& snapshot, const EmbeddingTable& entities,
                              const SelectOptions& opts, Rng* rng) {
    if (opts.mode == SelectMode::kSample && !rng) fail("select_corpus: sample mode needs an rng");
    SelectionResult res;
    for (std::size_t k = 0; k < corpus.bags.size(); ++k) {
        const Bag& bag = corpus.bags[k];
        if (!opts.select_na_bags && bag.relation_id == corpus.na_id) {
            res.bypassed_ids.insert(res.bypassed_ids.end(), bag.sentence_ids.begin(),
                                    bag.sentence_ids.end());
            continue;
        }
        ++res.bags_processed;
        auto reprs = bag_reprs(bag, corpus, snapshot);
        std::vector<std::size_t> order(bag.size());
        for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
        Trajectory traj = walk_bag(reprs, order, entities.row(bag.head), entities.row(bag.tail),
                                   policy, opts.mode == SelectMode::kGreedy, rng,
                                   static_cast<int>(k));
        int kept = 0;
        for (std::size_t i = 0; i < bag.size(); ++i) {
            const Sentence& s = corpus.bag_sentence(bag, i);
            Decision d;
            d.sentence_id = s.id;
            d.bag_index = static_cast<int>(k);
            d.prob = policy_prob(policy, traj.states[i], 1);
            d.action = traj.actions[i];
            d.noise_flag = s.noise_flag;
            res.decisions.push_back(d);
            if (traj.actions[i] == 1) {
                res.selected_ids.push_back(s.id);
                ++kept;
            }
        }
        if (kept == 0) ++res.bags_filtered;
    }
    return res;
}

void write_decisions(const std::vector<Decision>& decisions, const Corpus& corpus,
                     const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) fail("cannot write decisions file: " + path);
    out << "# sentence_id\thead\ttail\trelation\tprob\taction\tnoise_flag\n";
    for (const Decision& d : decisions) {
        const Bag& bag = corpus.bags.at(static_cast<std::size_t>(d.bag_index));
        out << d.sentence_id << '\t' << bag.head << '\t' << bag.tail << '\t'
            << corpus.relations.at(static_cast<std::size_t>(bag.relation_id)) << '\t'
            << fmt_double(d.prob) << '\t' << d.action << '\t'
            << (d.noise_flag.has_value() ? (*d.noise_flag ? "1" : "0") : "-") << '\n';
    }
    if (!out) fail("write failed: " + path);
}

std::vector<Decision> load_decisions(const std::string& path) {
    std::ifstream in(path);
    if (!in) fail("cannot open decisions file: " + path);
    std::vector<Decision> out;
    std::string line;
    int line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty() || line[0] == '#') continue;
        std::istringstream ss(line);
        Decision d;
        std::string head, tail, rel, noise;
        if (!(ss >> d.sentence_id >> head >> tail >> rel >> d.prob >> d.action >> noise))
            fail(str_format("%s:%d: bad decision line", path.c_str(), line_no));
        if (noise == "1")
            d.noise_flag = true;
        else if (noise == "0")
            d.noise_flag = false;
        out.push_back(d);
    }
    return out;
}

}  // namespace relex
