#include "pdeforest/cli.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <chrono>
#include <cmath>
#include <cstdio>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include "pdeforest/data.hpp"
#include "pdeforest/ga.hpp"

namespace pdeforest::cli {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

std::string utc_now() {
    const std::time_t now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
    std::tm tm{};
    gmtime_r(&now, &tm);
    char buf[32];
    std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
}

std::string fmt(const char *spec, double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, spec, v);
    return buf;
}

struct GenDataArgs {
    std::string problem;
    std::string output;
    std::optional<int> nx, nt, subsample;
    std::optional<double> dt, t_max, x_min, x_max;
    std::vector<std::string> params;
};

struct DiscoverArgs {
    std::string dataset;
    std::string out_dir = ".";
    ga::GAConfig cfg;
    int boundary_trim = eval::kDefaultBoundaryTrim;
    bool quiet = false;
};

struct RenderArgs {
    std::string text;
    int max_depth = expr::GenConfig{}.max_depth;
};

int gen_data(const GenDataArgs &a, std::ostream &out, std::ostream &err) {
    const auto problem = data::parse_problem(a.problem);
    if (!problem) {
        err << "unknown problem '" << a.problem
            << "'; expected one of burgers, kdv, chafee_infante, pde_divide, pde_compound\n";
        return kUsage;
    }
    data::SolverConfig cfg = data::preset(*problem);
    if (a.nx) cfg.nx = *a.nx;
    if (a.nt) cfg.nt_store = *a.nt;
    if (a.dt) cfg.dt_internal = *a.dt;
    if (a.x_min) cfg.x_min = *a.x_min;
    if (a.x_max) cfg.x_max = *a.x_max;
    if (a.subsample) cfg.subsample_every = *a.subsample;
    if (a.t_max) {
        cfg.t_max = *a.t_max;
        if (!a.subsample && cfg.nt_store > 1 && cfg.dt_internal > 0.0)
            cfg.subsample_every = std::max(
                1, static_cast<int>(std::lround(cfg.t_max / ((cfg.nt_store - 1) * cfg.dt_internal))));
    } else {
        cfg.t_max = static_cast<double>(cfg.nt_store - 1) * cfg.subsample_every * cfg.dt_internal;
    }
    for (const auto &kv : a.params) {
        const auto eq = kv.find('=');
        if (eq == std::string::npos || eq == 0) {
            err << "--param expects name=value, got '" << kv << "'\n";
            return kUsage;
        }
        const std::string name = kv.substr(0, eq);
        if (!cfg.params.count(name)) {
            err << "problem " << a.problem << " has no parameter '" << name << "'\n";
            return kUsage;
        }
        try {
            std::size_t used = 0;
            cfg.params[name] = std::stod(kv.substr(eq + 1), &used);
            if (used != kv.size() - eq - 1) throw std::invalid_argument(kv);
        } catch (const std::exception &) {
            err << "--param " << name << ": not a number\n";
            return kUsage;
        }
    }

    try {
        cfg.check();
    } catch (const data::StabilityError &e) {
        err << "unstable configuration: " << e.what() << "\n";
        return kUsage;
    } catch (const std::invalid_argument &e) {
        err << "invalid configuration: " << e.what() << "\n";
        return kUsage;
    }

    out << "problem   " << data::problem_name(cfg.problem) << "\n"
        << "grid      " << cfg.nx << " x " << cfg.nt_store << " (x by t)\n"
        << "dx        " << fmt("%.6g", cfg.dx()) << "\n"
        << "dt store  " << fmt("%.6g", cfg.dt_store()) << "\n"
        << "dt solver " << fmt("%.6g", cfg.dt_internal) << " (stable up to " << fmt("%.6g", cfg.stability_limit())
        << ", ratio " << fmt("%.3f", cfg.dt_internal / cfg.stability_limit()) << ")\n";

    const eval::Dataset d = data::solve(cfg);
    try {
        data::write_dataset(d, a.output, data::metadata_for(cfg));
    } catch (const data::DatasetFileError &e) {
        err << e.what() << "\n";
        return kIoError;
    }
    out << "wrote     " << a.output << "\n";
    return kOk;
}

json config_json(const ga::GAConfig &c, int boundary_trim) {
    return {
        {"generations", c.generations},
        {"population", c.population},
        {"p_operand", c.p_operand},
        {"p_mutate_node", c.p_mutate_node},
        {"p_cross", c.p_cross},
        {"p_replace_tree", c.p_replace_tree},
        {"max_width", c.max_width},
        {"max_depth", c.max_depth},
        {"aic_threshold", c.aic_threshold},
        {"seed", c.rng_seed},
        {"threads", c.threads},
        {"boundary_trim", boundary_trim},
        {"regression",
         {{"lambda", c.regression.lambda},
          {"tol", c.regression.tol},
          {"max_sweeps", c.regression.max_sweeps},
          {"normalize_columns", c.regression.normalize_columns}}},
    };
}

std::string report_text(const ga::DiscoveryResult &r) {
    std::ostringstream os;
    os << "equation    " << r.equation_display << "\n";
    if (r.best.score) {
        const auto &s = *r.best.score;
        os << "k           " << s.k << "\n"
           << "mse         " << fmt("%.6e", s.mse) << "\n"
           << "aic         " << fmt("%.4f", s.aic) << "\n";
    }
    os << "generations " << r.generations_run << "\n"
       << "converged   " << (r.converged ? "yes" : "no") << "\n"
       << "terms\n";
    for (std::size_t i = 0; i < r.best.forest.trees.size(); ++i) {
        const double xi = r.best.score ? r.best.score->xi(static_cast<Eigen::Index>(i)) : 0.0;
        os << "  " << fmt("%+.6e", xi) << "  " << expr::to_computable_string(r.best.forest.trees[i]) << "\n";
    }
    return os.str();
}

int discover(const DiscoverArgs &a, const std::vector<std::string> &argv_copy, std::ostream &out,
             std::ostream &err) {
    try {
        a.cfg.check();
    } catch (const std::invalid_argument &e) {
        err << "invalid configuration: " << e.what() << "\n";
        return kUsage;
    }

    std::optional<data::LoadedDataset> loaded;
    try {
        loaded.emplace(data::read_dataset_file(a.dataset, a.boundary_trim));
    } catch (const data::DatasetFileError &e) {
        err << "cannot read dataset: " << e.what() << "\n";
        return kIoError;
    } catch (const eval::DatasetError &e) {
        err << "unusable dataset: " << e.what() << "\n";
        return kUsage;
    }

    const fs::path dir = a.out_dir;
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec) {
        err << "cannot create " << dir.string() << ": " << ec.message() << "\n";
        return kIoError;
    }
    const fs::path manifest_path = dir / "run_manifest.json";
    const fs::path log_path = dir / "evolution_log.csv";
    const fs::path report_path = dir / "report.txt";

    const std::string started = utc_now();
    ga::GenerationCallback progress;
    if (!a.quiet)
        progress = [&out](const ga::HistoryEntry &h, const std::vector<ga::Candidate> &) {
            out << "gen " << h.generation << "  aic " << fmt("%.4f", h.aic) << "  k " << h.k << "  " << h.equation
                << "\n";
        };
    const ga::DiscoveryResult r = ga::evolve(a.cfg, loaded->dataset, progress);
    const std::string finished = utc_now();

    json terms = json::array();
    for (std::size_t i = 0; i < r.best.forest.trees.size(); ++i)
        terms.push_back({{"term", expr::to_computable_string(r.best.forest.trees[i])},
                         {"coefficient", r.best.score ? r.best.score->xi(static_cast<Eigen::Index>(i)) : 0.0}});
    json outcome = {{"converged", r.converged},
                    {"generations_run", r.generations_run},
                    {"equation", r.equation_display},
                    {"terms", terms}};
    if (r.best.score) {
        outcome["aic"] = r.best.score->aic;
        outcome["mse"] = r.best.score->mse;
        outcome["k"] = r.best.score->k;
    }
    const json manifest = {
        {"generator", std::string(data::kGeneratorVersion)},
        {"command", argv_copy},
        {"dataset",
         {{"path", fs::absolute(a.dataset).string()},
          {"problem", loaded->metadata.problem},
          {"params", loaded->metadata.params},
          {"nx", loaded->dataset.nx()},
          {"nt", loaded->dataset.nt()}}},
        {"config", config_json(a.cfg, a.boundary_trim)},
        {"started_at", started},
        {"finished_at", finished},
        {"outcome", outcome},
        {"artifacts",
         {{"manifest", manifest_path.string()}, {"evolution_log", log_path.string()}, {"report", report_path.string()}}},
    };

    const std::string report = report_text(r);
    {
        std::ofstream log(log_path), rep(report_path), man(manifest_path);
        if (!log || !rep || !man) {
            err << "cannot write artifacts under " << dir.string() << "\n";
            return kIoError;
        }
        ga::write_evolution_log(r.history, log);
        rep << report;
        man << manifest.dump(2) << "\n";
        if (!log || !rep || !man) {
            err << "write failed under " << dir.string() << "\n";
            return kIoError;
        }
    }

    out << report;
    if (!r.converged)
        out << "AIC threshold " << fmt("%g", a.cfg.aic_threshold) << " not reached in " << a.cfg.generations
            << " generations\n";
    return r.converged ? kOk : kBudgetExhausted;
}

int render(const RenderArgs &a, std::ostream &out, std::ostream &err) {
    expr::Tree t;
    try {
        t = expr::parse_computable_string(a.text);
    } catch (const expr::ParseError &e) {
        err << (e.kind() == expr::ParseError::Kind::Arity ? "arity error: " : "parse error: ") << e.what() << "\n";
        return kUsage;
    }
    out << expr::to_display_string(t) << "\n";
    expr::GenConfig g;
    g.max_depth = a.max_depth;
    const auto violations = expr::validate(t, g);
    if (violations.empty()) {
        out << "valid (depth " << t.depth() << ")\n";
        return kOk;
    }
    out << "invalid\n";
    for (const auto &v : violations)
        out << "  rule " << static_cast<int>(v.rule) << " at " << v.path << ": " << v.message << "\n";
    return kOk;
}

} // namespace

int run(const std::vector<std::string> &args, std::ostream &out, std::ostream &err) {
    CLI::App app{"Symbolic PDE discovery with forests of expression trees", "pdeforest"};
    app.require_subcommand(1);
    app.set_version_flag("--version", std::string(data::kGeneratorVersion));

    GenDataArgs g;
    auto *gen = app.add_subcommand("gen-data", "Solve a benchmark PDE and write its dataset file");
    gen->add_option("problem", g.problem, "burgers, kdv, chafee_infante, pde_divide or pde_compound")->required();
    gen->add_option("output", g.output, "Dataset file to write")->required();
    gen->add_option("--nx", g.nx, "Spatial points");
    gen->add_option("--nt", g.nt, "Stored time slices");
    gen->add_option("--dt", g.dt, "Internal solver step");
    gen->add_option("--subsample", g.subsample, "Solver steps per stored slice");
    gen->add_option("--t-max", g.t_max, "Final time");
    gen->add_option("--x-min", g.x_min, "Left end of the domain");
    gen->add_option("--x-max", g.x_max, "Right end of the domain");
    gen->add_option("--param", g.params, "Equation parameter override, name=value (repeatable)");

    DiscoverArgs d;
    auto *disc = app.add_subcommand("discover", "Search for the PDE behind a dataset");
    disc->add_option("dataset", d.dataset, "Dataset file")->required();
    disc->add_option("--out-dir", d.out_dir, "Directory for the manifest, log and report")->capture_default_str();
    disc->add_option("--seed", d.cfg.rng_seed, "Random seed")->capture_default_str();
    disc->add_option("--generations", d.cfg.generations, "Generation budget")->capture_default_str();
    disc->add_option("--population", d.cfg.population, "Population size")->capture_default_str();
    disc->add_option("--max-depth", d.cfg.max_depth, "Tree depth limit")->capture_default_str();
    disc->add_option("--max-width", d.cfg.max_width, "Trees per forest limit")->capture_default_str();
    disc->add_option("--p-operand", d.cfg.p_operand, "Probability of drawing an operand")->capture_default_str();
    disc->add_option("--p-mutate", d.cfg.p_mutate_node, "Per-node mutation probability")->capture_default_str();
    disc->add_option("--p-cross", d.cfg.p_cross, "Per-slot crossover swap probability")->capture_default_str();
    disc->add_option("--p-replace", d.cfg.p_replace_tree, "Tree replacement probability")->capture_default_str();
    disc->add_option("--aic-threshold", d.cfg.aic_threshold, "Stop once the best AIC reaches this")
        ->capture_default_str();
    disc->add_option("--lambda", d.cfg.regression.lambda, "Ridge penalty")->capture_default_str();
    disc->add_option("--tol", d.cfg.regression.tol, "STRidge threshold on normalized columns")
        ->capture_default_str();
    disc->add_option("--max-sweeps", d.cfg.regression.max_sweeps, "STRidge sweep cap")->capture_default_str();
    disc->add_option("--boundary-trim", d.boundary_trim, "Grid lines dropped at each edge")->capture_default_str();
    disc->add_option("--threads", d.cfg.threads, "Scoring threads; results do not depend on it")
        ->capture_default_str();
    disc->add_flag("--quiet", d.quiet, "No per-generation progress");

    RenderArgs r;
    auto *ren = app.add_subcommand("render", "Print a computable string in infix form and check it");
    ren->add_option("expression", r.text, "e.g. \"{ d (d u x) x }\"")->required();
    ren->add_option("--max-depth", r.max_depth, "Depth limit used by the check")->capture_default_str();

    std::vector<std::string> reversed(args.rbegin(), args.rend());
    try {
        app.parse(reversed);
    } catch (const CLI::ParseError &e) {
        const int code = app.exit(e, out, err);
        return code == 0 ? kOk : kUsage;
    }

    try {
        if (*gen) return gen_data(g, out, err);
        if (*disc) return discover(d, args, out, err);
        return render(r, out, err);
    } catch (const data::SolverError &e) {
        err << "solver failed: " << e.what() << "\n";
        return kUsage;
    } catch (const std::exception &e) {
        err << "error: " << e.what() << "\n";
        return kUsage;
    }
}

int main(int argc, char **argv) {
    std::vector<std::string> args(argv + 1, argv + argc);
    return run(args, std::cout, std::cerr);
}

} // namespace pdeforest::cli
