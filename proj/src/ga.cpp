#include "pdeforest/ga.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <memory>
#include <mutex>
#include <numeric>
#include <ostream>
#include <stdexcept>
#include <thread>
#include <unordered_map>

namespace pdeforest::ga {

using expr::Category;
using expr::Node;
using expr::Symbol;

expr::GenConfig GAConfig::gen_config() const {
    expr::GenConfig g;
    g.max_depth = max_depth;
    g.max_width = max_width;
    g.p_operand = p_operand;
    g.rng_seed = rng_seed;
    return g;
}

void GAConfig::check() const {
    auto prob = [](double p, const char *name) {
        if (!(p >= 0.0 && p <= 1.0)) throw std::invalid_argument(std::string(name) + " must lie in [0, 1]");
    };
    if (generations < 1) throw std::invalid_argument("generations must be >= 1");
    if (population < 4 || population % 2 != 0) throw std::invalid_argument("population must be even and >= 4");
    prob(p_mutate_node, "p_mutate_node");
    prob(p_cross, "p_cross");
    prob(p_replace_tree, "p_replace_tree");
    if (threads < 1) throw std::invalid_argument("threads must be >= 1");
    gen_config().check();
    regression.check();
}

Candidate Candidate::from(expr::Forest f) {
    Candidate c;
    c.key = expr::canonical_key(f);
    c.forest = std::move(f);
    return c;
}

double Candidate::aic() const noexcept {
    return score && score->valid ? score->aic : std::numeric_limits<double>::infinity();
}

bool ranks_before(const Candidate &a, const Candidate &b) {
    const double aa = a.aic(), ab = b.aic();
    if (aa != ab) return aa < ab;
    const int ka = a.score ? a.score->k : 0;
    const int kb = b.score ? b.score->k : 0;
    if (ka != kb) return ka < kb;
    return a.key < b.key;
}

void rank(std::vector<Candidate> &pop) { std::stable_sort(pop.begin(), pop.end(), ranks_before); }

// ---- operators --------------------------------------------------------------

namespace {

constexpr int kInitRetries = 50;
constexpr int kReplaceRetries = 8;

bool coin(double p, Rng &rng) { return std::bernoulli_distribution(p)(rng); }

template <typename Range>
Symbol pick_other(const Range &choices, Symbol current, bool exclude_additive, Rng &rng) {
    std::vector<Symbol> options;
    for (Symbol s : choices) {
        if (s == current) continue;
        if (exclude_additive && (s == Symbol::Add || s == Symbol::Sub)) continue;
        options.push_back(s);
    }
    if (options.empty()) return current;
    std::uniform_int_distribution<std::size_t> dist(0, options.size() - 1);
    return options[dist(rng)];
}

// `pinned` marks the variable slot of d / d2, which never mutates.
bool mutate_node(Node &n, bool is_root, bool pinned, double p, Rng &rng) {
    if (pinned) return false;
    bool changed = false;
    if (coin(p, rng)) {
        const Symbol old = n.symbol;
        switch (expr::category(old)) {
        case Category::Operand: n.symbol = pick_other(expr::kOperands, old, false, rng); break;
        case Category::Unary: n.symbol = pick_other(expr::kUnaryOps, old, false, rng); break;
        case Category::Binary: n.symbol = pick_other(expr::kBinaryOps, old, is_root, rng); break;
        }
        if (expr::is_differential(n.symbol) && !expr::is_differential(old) && n.children.size() == 2)
            n.children[1] = Node(Symbol::X);
        changed = n.symbol != old;
    }
    const bool differential = expr::is_differential(n.symbol);
    for (std::size_t i = 0; i < n.children.size(); ++i)
        changed |= mutate_node(n.children[i], false, differential && i == 1, p, rng);
    return changed;
}

Candidate with_forest(const Candidate &c, expr::Forest f) {
    Candidate out = Candidate::from(std::move(f));
    if (out.key == c.key && out.forest == c.forest) out.score = c.score;
    return out;
}

} // namespace

std::vector<Candidate> init_population(const GAConfig &cfg, Rng &rng) {
    const expr::GenConfig gen = cfg.gen_config();
    std::vector<Candidate> pop;
    KeySet keys;
    pop.reserve(static_cast<std::size_t>(cfg.population));
    while (static_cast<int>(pop.size()) < cfg.population) {
        Candidate c = Candidate::from(expr::random_forest(gen, rng, true));
        for (int attempt = 0; attempt < kInitRetries && keys.count(c.key); ++attempt)
            c = Candidate::from(expr::random_forest(gen, rng, true));
        keys.insert(c.key);
        pop.push_back(std::move(c));
    }
    return pop;
}

std::vector<Candidate> crossover_step(const std::vector<Candidate> &parents, KeySet &seen_keys,
                                      const GAConfig &cfg, Rng &rng) {
    const std::size_t n = parents.size() / 2;
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::shuffle(order.begin(), order.end(), rng);

    std::vector<Candidate> children;
    for (std::size_t i = 0; i < n / 2; ++i) {
        const auto &a = parents[order[i]].forest.trees;
        const auto &b = parents[order[n - 1 - i]].forest.trees;
        const std::size_t width = std::max(a.size(), b.size());
        expr::Forest first, second;
        for (std::size_t slot = 0; slot < width; ++slot) {
            const bool swap = coin(cfg.p_cross, rng);
            const expr::Tree *from_a = slot < a.size() ? &a[slot] : nullptr;
            const expr::Tree *from_b = slot < b.size() ? &b[slot] : nullptr;
            if (swap) std::swap(from_a, from_b);
            if (from_a) first.trees.push_back(*from_a);
            if (from_b) second.trees.push_back(*from_b);
        }
        for (auto *f : {&first, &second}) {
            if (f->trees.empty() || static_cast<int>(f->trees.size()) > cfg.max_width) continue;
            Candidate c = Candidate::from(std::move(*f));
            if (!seen_keys.insert(c.key).second) continue;
            children.push_back(std::move(c));
        }
    }
    return children;
}

Candidate mutate_forest(const Candidate &c, const GAConfig &cfg, Rng &rng) {
    expr::Forest f = c.forest;
    for (auto &tree : f.trees) {
        Node root = tree.root();
        mutate_node(root, true, false, cfg.p_mutate_node, rng);
        tree = expr::Tree(std::move(root));
    }
    return with_forest(c, std::move(f));
}

Candidate replace_tree(const Candidate &c, const GAConfig &cfg, Rng &rng) {
    if (c.forest.trees.empty() || !coin(cfg.p_replace_tree, rng)) return c;
    std::uniform_int_distribution<std::size_t> slot(0, c.forest.trees.size() - 1);
    expr::Forest f = c.forest;
    expr::Tree &target = f.trees[slot(rng)];
    expr::Tree fresh = expr::random_tree(cfg.gen_config(), rng);
    for (int attempt = 1; attempt < kReplaceRetries && fresh == target; ++attempt)
        fresh = expr::random_tree(cfg.gen_config(), rng);
    target = std::move(fresh);
    return with_forest(c, std::move(f));
}

std::string equation_display(const expr::Forest &f, const regress::CandidateScore &s) {
    std::string out = "u_t =";
    bool first = true;
    for (std::size_t i = 0; i < f.trees.size() && static_cast<Eigen::Index>(i) < s.xi.size(); ++i) {
        const double c = s.xi(static_cast<Eigen::Index>(i));
        if (c == 0.0) continue;
        const double mag = std::abs(c);
        char num[32];
        std::snprintf(num, sizeof num, mag >= 1e-3 ? "%.4f" : "%.4e", mag);
        if (first)
            out += c < 0 ? " -" : " ";
        else
            out += c < 0 ? " - " : " + ";
        out += num;
        out += " * ";
        out += expr::to_display_string(f.trees[i]);
        first = false;
    }
    if (first) out += " 0";
    return out;
}

// ---- scoring ----------------------------------------------------------------

struct Scorer::Impl {
    struct Entry {
        std::shared_ptr<const eval::FieldColumn> column;
        long last_used = 0;
    };

    const eval::Dataset &data;
    regress::RegressionParams params;
    int threads;
    eval::FieldColumn y;
    std::unordered_map<std::string, Entry> cache;
    std::mutex mu;
    long generation = 0;

    std::shared_ptr<const eval::FieldColumn> column(const expr::Tree &t) {
        const std::string key = expr::to_computable_string(t);
        {
            std::lock_guard lock(mu);
            auto it = cache.find(key);
            if (it != cache.end()) {
                it->second.last_used = generation;
                return it->second.column;
            }
        }
        auto col = std::make_shared<const eval::FieldColumn>(eval::evaluate_tree(t, data));
        std::lock_guard lock(mu);
        auto [it, inserted] = cache.try_emplace(key, Entry{col, generation});
        it->second.last_used = generation;
        return it->second.column;
    }

    regress::CandidateScore score(const expr::Forest &f) {
        eval::FeatureMatrix phi;
        phi.n_rows = data.retained_rows();
        phi.columns.reserve(f.trees.size());
        std::unordered_set<std::string> terms;
        for (const auto &t : f.trees) {
            // A repeated tree adds no new term; its slot stays at zero.
            if (terms.insert(expr::to_computable_string(t)).second)
                phi.columns.push_back(*column(t));
            else
                phi.columns.push_back({Eigen::VectorXd::Zero(phi.n_rows), 1.0});
            phi.term_labels.push_back(expr::to_display_string(t));
        }
        return regress::score(phi, y, params);
    }
};

Scorer::Scorer(const eval::Dataset &d, regress::RegressionParams params, int threads)
    : impl_(new Impl{d, params, std::max(threads, 1), eval::ut_vector(d), {}, {}, 0}) {}

Scorer::~Scorer() = default;

regress::CandidateScore Scorer::score(const expr::Forest &f) { return impl_->score(f); }

void Scorer::score_all(std::vector<Candidate> &pop) {
    std::vector<Candidate *> todo;
    for (auto &c : pop)
        if (!c.score) todo.push_back(&c);
    if (todo.empty()) return;

    const auto workers = std::min<std::size_t>(static_cast<std::size_t>(impl_->threads), todo.size());
    if (workers <= 1) {
        for (auto *c : todo) c->score = impl_->score(c->forest);
        return;
    }
    std::vector<std::thread> pool;
    for (std::size_t w = 0; w < workers; ++w) {
        pool.emplace_back([&, w] {
            for (std::size_t i = w; i < todo.size(); i += workers) todo[i]->score = impl_->score(todo[i]->forest);
        });
    }
    for (auto &t : pool) t.join();
}

void Scorer::end_generation() {
    std::lock_guard lock(impl_->mu);
    for (auto it = impl_->cache.begin(); it != impl_->cache.end();) {
        if (it->second.last_used < impl_->generation)
            it = impl_->cache.erase(it);
        else
            ++it;
    }
    ++impl_->generation;
}

// ---- evolution --------------------------------------------------------------

DiscoveryResult evolve(const GAConfig &cfg, const eval::Dataset &d, const GenerationCallback &on_generation,
                       const ChildrenCallback &on_children) {
    cfg.check();
    Rng rng(cfg.rng_seed);
    Scorer scorer(d, cfg.regression, cfg.threads);
    const auto size = static_cast<std::size_t>(cfg.population);

    std::vector<Candidate> pop = init_population(cfg, rng);
    KeySet seen;
    DiscoveryResult result;

    for (int gen = 1;; ++gen) {
        scorer.score_all(pop);
        rank(pop);
        for (const auto &c : pop) seen.insert(c.key);

        const Candidate &best = pop.front();
        HistoryEntry h;
        h.generation = gen;
        h.aic = best.aic();
        h.mse = best.score ? best.score->mse : std::numeric_limits<double>::infinity();
        h.k = best.score ? best.score->k : 0;
        h.equation = best.score ? equation_display(best.forest, *best.score) : "u_t = 0";
        result.history.push_back(h);
        if (on_generation) on_generation(h, pop);

        result.generations_run = gen;
        if (best.aic() <= cfg.aic_threshold) {
            result.converged = true;
            break;
        }
        if (gen >= cfg.generations) break;

        std::vector<Candidate> children = crossover_step(pop, seen, cfg, rng);
        scorer.score_all(children);
        if (on_children) on_children(gen, children);
        for (auto &c : children) pop.push_back(std::move(c));
        rank(pop);
        pop.resize(size);

        for (std::size_t i = 1; i < pop.size(); ++i) {
            Candidate c = mutate_forest(pop[i], cfg, rng);
            pop[i] = replace_tree(c, cfg, rng);
        }
        scorer.end_generation();
    }

    result.best = pop.front();
    result.equation_display = result.history.back().equation;
    return result;
}

void write_evolution_log(const std::vector<HistoryEntry> &history, std::ostream &os) {
    os << "generation,aic,mse,k,equation\n";
    char buf[96];
    for (const auto &h : history) {
        std::snprintf(buf, sizeof buf, "%d,%.10g,%.10g,%d,", h.generation, h.aic, h.mse, h.k);
        os << buf << '"' << h.equation << "\"\n";
    }
}

} // namespace pdeforest::ga
