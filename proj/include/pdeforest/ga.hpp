#pragma once

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <memory>
#include <optional>
#include <string>
#include <unordered_set>
#include <vector>

#include "pdeforest/eval.hpp"
#include "pdeforest/expr.hpp"
#include "pdeforest/regress.hpp"

namespace pdeforest::ga {

struct GAConfig {
    int generations = 100;
    int population = 20; // 2n
    double p_operand = 0.5;
    double p_mutate_node = 0.3;
    double p_cross = 0.5;
    double p_replace_tree = 0.3;
    int max_width = 5;
    int max_depth = 4;
    double aic_threshold = -10.0;
    std::uint64_t rng_seed = 0;
    regress::RegressionParams regression;
    /// Worker threads for candidate scoring. Results do not depend on it.
    int threads = 1;

    expr::GenConfig gen_config() const;
    /// Throws std::invalid_argument.
    void check() const;
};

struct Candidate {
    expr::Forest forest;
    std::optional<regress::CandidateScore> score;
    std::string key;

    static Candidate from(expr::Forest f);
    double aic() const noexcept;
};

using KeySet = std::unordered_set<std::string>;

/// Ascending AIC; ties go to fewer terms, then to the smaller key.
bool ranks_before(const Candidate &a, const Candidate &b);
void rank(std::vector<Candidate> &pop);

std::vector<Candidate> init_population(const GAConfig &cfg, Rng &rng);

/// Recombines the best half of `parents` (already ranked). The top n are
/// shuffled and paired first-with-last; each pair yields two complementary
/// children, swapping each tree slot with probability p_cross. Children whose
/// key is in `seen_keys` are dropped; survivors are added to it.
std::vector<Candidate> crossover_step(const std::vector<Candidate> &parents, KeySet &seen_keys,
                                      const GAConfig &cfg, Rng &rng);

/// Per-node symbol mutation within the node's arity class.
Candidate mutate_forest(const Candidate &c, const GAConfig &cfg, Rng &rng);

/// With probability p_replace_tree, regenerates one uniformly chosen tree,
/// redrawing a few times if the new tree equals the old one.
Candidate replace_tree(const Candidate &c, const GAConfig &cfg, Rng &rng);

/// "u_t = -0.9979 * u_x/x + 0.2498 * d2/dx2(u)"; zero-coefficient terms omitted.
std::string equation_display(const expr::Forest &f, const regress::CandidateScore &s);

/// Scores candidates against one dataset. Evaluated tree columns are cached
/// by computable string; entries unused for a whole generation are evicted.
/// A tree repeated within a forest gets a zero column and coefficient.
class Scorer {
public:
    Scorer(const eval::Dataset &d, regress::RegressionParams params, int threads = 1);
    ~Scorer();
    Scorer(const Scorer &) = delete;
    Scorer &operator=(const Scorer &) = delete;

    regress::CandidateScore score(const expr::Forest &f);
    /// Fills in every missing score.
    void score_all(std::vector<Candidate> &pop);
    void end_generation();

private:
    struct Impl;
    std::unique_ptr<Impl> impl_;
};

struct HistoryEntry {
    int generation = 0;
    double aic = 0.0;
    double mse = 0.0;
    int k = 0;
    std::string equation;
};

struct DiscoveryResult {
    Candidate best;
    std::string equation_display;
    int generations_run = 0;
    bool converged = false;
    std::vector<HistoryEntry> history;
};

using GenerationCallback = std::function<void(const HistoryEntry &, const std::vector<Candidate> &)>;
/// Sees the scored crossover children of each generation before the merge.
using ChildrenCallback = std::function<void(int generation, const std::vector<Candidate> &)>;

/// Generation loop: score, rank, record the best, stop if it reaches the AIC
/// threshold, cross over and keep the best 2n of parents plus children, then
/// mutate and replace every member except the best.
DiscoveryResult evolve(const GAConfig &cfg, const eval::Dataset &d, const GenerationCallback &on_generation = {},
                       const ChildrenCallback &on_children = {});

/// CSV with header `generation,aic,mse,k,equation`.
void write_evolution_log(const std::vector<HistoryEntry> &history, std::ostream &os);

} // namespace pdeforest::ga
