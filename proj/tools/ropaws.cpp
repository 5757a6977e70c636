// ===========================================================================
// ropaws -- command-line laboratory for PAWS / RoPAWS on synthetic data.
//
// Subcommands: gen-data, train, eval, propagate, neighbors, compare,
// grad-check. Every run writes the resolved configuration it actually used
// into the output directory so experiments can be replayed exactly.
// ===========================================================================

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "ropaws/config.hpp"
#include "ropaws/data.hpp"
#include "ropaws/encoder.hpp"
#include "ropaws/errors.hpp"
#include "ropaws/evaluation.hpp"
#include "ropaws/trainer.hpp"

namespace {

using namespace ropaws;

// Options shared by every subcommand. Per-field overrides are registered
// from the config key list so the flag surface stays in sync with the file
// format; unknown flags are rejected by the parser.
struct CommonOpts {
    std::string config_path;
    std::string out_dir = "out";
    std::vector<std::pair<std::string, std::string>> overrides;  // in flag order
};

void register_common(CLI::App* cmd, CommonOpts& opts) {
    cmd->add_option("--config", opts.config_path, "key=value config file");
    cmd->add_option("--out", opts.out_dir, "output directory")->capture_default_str();
    for (const auto& key : config::known_keys()) {
        cmd->add_option_function<std::string>(
            "--" + key,
            [&opts, key](const std::string& v) { opts.overrides.emplace_back(key, v); },
            "override config key '" + key + "'");
    }
}

config::RunConfig resolve(const CommonOpts& opts) {
    config::RunConfig cfg;
    if (!opts.config_path.empty()) cfg = config::parse_file(opts.config_path);
    for (const auto& [k, v] : opts.overrides) config::apply_override(cfg, k, v);
    cfg.train.validate();
    return cfg;
}

std::ofstream open_out(const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary);  // binary: identical bytes on every platform
    if (!out) throw ValidationError("cannot open " + path.string() + " for writing");
    return out;
}

void write_snapshot(const config::RunConfig& cfg, const std::string& out_dir) {
    std::filesystem::create_directories(out_dir);
    open_out(std::filesystem::path(out_dir) / "resolved_config.txt") << config::serialize(cfg);
}

std::string fmt(double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

// Dataset comes either from CSV files or from the generator spec.
data::Dataset load_or_generate(const config::RunConfig& cfg, const std::string& data_path,
                               const std::string& test_path) {
    if (!data_path.empty()) return data::load_dataset(data_path, test_path);
    return data::generate(cfg.gen);
}

void write_report_csv(const eval::EvalReport& r, const std::filesystem::path& path) {
    auto out = open_out(path);
    out << "accuracy,conf_in,conf_out,auroc,ece\n"
        << fmt(r.accuracy) << ',' << fmt(r.conf_in) << ',' << fmt(r.conf_out) << ','
        << fmt(r.auroc) << ',' << fmt(r.ece) << '\n';
}

void write_loss_csv(const std::vector<objective::LossReport>& history,
                    const std::filesystem::path& path) {
    auto out = open_out(path);
    out << "epoch,total,consistency,me_max,mean_weight\n";
    for (std::size_t e = 0; e < history.size(); ++e)
        out << e << ',' << fmt(history[e].total) << ',' << fmt(history[e].consistency) << ','
            << fmt(history[e].me_max) << ',' << fmt(history[e].mean_weight) << '\n';
}

struct EmbeddedSupport {
    kernel::EmbeddingBatch labeled;
    std::vector<int> classes;
    kernel::LabelMatrix labels;
};

EmbeddedSupport embed_support(const data::Dataset& ds, const encoder::MlpParams& params,
                              const config::TrainConfig& cfg) {
    const auto idx = ds.indices(data::Split::Labeled);
    if (idx.empty()) throw ValidationError("dataset has no labeled split");
    EmbeddedSupport s;
    s.labeled = kernel::EmbeddingBatch{train::embed_rows(params, ds.inputs, idx)};
    for (const std::size_t i : idx) s.classes.push_back(ds.true_class[i]);
    s.labels = kernel::LabelMatrix::one_hot(s.classes, ds.class_count, cfg.label_smoothing);
    return s;
}

int cmd_gen_data(const CommonOpts& opts) {
    const auto cfg = resolve(opts);
    write_snapshot(cfg, opts.out_dir);
    const auto ds = data::generate(cfg.gen);
    const auto dir = std::filesystem::path(opts.out_dir);
    data::save_csv(ds, (dir / "data.csv").string(), (dir / "test.csv").string());
    std::cout << "wrote " << (dir / "data.csv").string() << " (" << ds.count() << " rows total, "
              << ds.indices(data::Split::Test).size() << " test)\n";
    return 0;
}

int cmd_train(const CommonOpts& opts, const std::string& data_path,
              const std::string& test_path) {
    const auto cfg = resolve(opts);
    write_snapshot(cfg, opts.out_dir);
    const auto ds = load_or_generate(cfg, data_path, test_path);
    const auto state = train::fit(ds, cfg.train);
    const auto dir = std::filesystem::path(opts.out_dir);
    encoder::save_checkpoint(state.params, (dir / "checkpoint.txt").string());
    write_loss_csv(state.history, dir / "loss.csv");
    std::cout << "trained " << config::method_name(cfg.train.method) << " for "
              << cfg.train.epochs << " epochs; final loss "
              << fmt(state.history.back().total) << '\n';
    return 0;
}

int cmd_eval(const CommonOpts& opts, const std::string& checkpoint,
             const std::string& data_path, const std::string& test_path) {
    const auto cfg = resolve(opts);
    write_snapshot(cfg, opts.out_dir);
    const auto ds = load_or_generate(cfg, data_path, test_path);
    const auto params = encoder::load_checkpoint(checkpoint);
    const auto report = eval::evaluate(ds, params, cfg.train);
    write_report_csv(report, std::filesystem::path(opts.out_dir) / "report.csv");
    std::cout << "accuracy " << fmt(report.accuracy) << "\nconf_in " << fmt(report.conf_in)
              << "\nconf_out " << fmt(report.conf_out) << "\nauroc " << fmt(report.auroc)
              << "\nece " << fmt(report.ece) << '\n';
    return 0;
}

int cmd_propagate(const CommonOpts& opts, const std::string& checkpoint,
                  const std::string& data_path, const std::string& test_path,
                  std::vector<std::size_t> iters) {
    const auto cfg = resolve(opts);
    write_snapshot(cfg, opts.out_dir);
    const auto ds = load_or_generate(cfg, data_path, test_path);
    const auto params = encoder::load_checkpoint(checkpoint);
    const auto support = embed_support(ds, params, cfg.train);

    const auto test_idx = ds.indices(data::Split::Test);
    if (test_idx.empty()) throw ValidationError("propagate: dataset has no test split");
    const kernel::EmbeddingBatch queries{train::embed_rows(params, ds.inputs, test_idx)};

    const auto result =
        eval::propagated_classify(queries, support.labeled, support.labels, cfg.train, iters);

    auto out = open_out(std::filesystem::path(opts.out_dir) / "propagate.csv");
    out << "iterations,accuracy,mean_confidence\n";
    const auto score = [&](const Matrix& probs, const std::string& tag) {
        std::size_t hits = 0;
        double conf = 0.0;
        for (std::size_t i = 0; i < probs.rows(); ++i) {
            std::size_t arg = 0;
            for (std::size_t c = 1; c < probs.cols(); ++c)
                if (probs(i, c) > probs(i, arg)) arg = c;
            hits += static_cast<int>(arg) == ds.true_class[test_idx[i]] ? 1 : 0;
            conf += probs(i, arg);
        }
        const double n = static_cast<double>(probs.rows());
        out << tag << ',' << fmt(static_cast<double>(hits) / n) << ',' << fmt(conf / n) << '\n';
    };
    for (std::size_t k = 0; k < iters.size(); ++k)
        score(result.per_iteration[k], std::to_string(iters[k]));
    score(result.limit, "closed-form");
    std::cout << "wrote propagate.csv (" << iters.size() << " iteration counts + closed form)\n";
    return 0;
}

int cmd_neighbors(const CommonOpts& opts, const std::string& checkpoint,
                  const std::string& data_path, const std::string& test_path,
                  std::size_t top_k, std::size_t query_count) {
    const auto cfg = resolve(opts);
    write_snapshot(cfg, opts.out_dir);
    const auto ds = load_or_generate(cfg, data_path, test_path);
    const auto params = encoder::load_checkpoint(checkpoint);
    const auto support = embed_support(ds, params, cfg.train);

    const auto test_idx = ds.indices(data::Split::Test);
    if (test_idx.empty()) throw ValidationError("neighbors: dataset has no test split");
    const std::size_t n_queries = std::min(query_count, test_idx.size());
    std::vector<std::size_t> rows(test_idx.begin(), test_idx.begin() + n_queries);
    const kernel::EmbeddingBatch queries{train::embed_rows(params, ds.inputs, rows)};

    auto out = open_out(std::filesystem::path(opts.out_dir) / "neighbors.csv");
    out << "query_row,query_class,rank,neighbor_row,neighbor_class,cosine\n";
    for (std::size_t q = 0; q < n_queries; ++q) {
        const auto nn = eval::nearest_labeled({queries.z.row(q), queries.dim()}, support.labeled,
                                              support.classes, top_k);
        for (std::size_t r = 0; r < nn.size(); ++r)
            out << rows[q] << ',' << ds.true_class[rows[q]] << ',' << r + 1 << ',' << nn[r].id
                << ',' << nn[r].cls << ',' << fmt(nn[r].cosine) << '\n';
    }
    std::cout << "wrote neighbors.csv (" << n_queries << " queries, top " << top_k << ")\n";
    return 0;
}

int cmd_compare(const CommonOpts& opts, std::size_t runs) {
    auto cfg = resolve(opts);
    write_snapshot(cfg, opts.out_dir);
    if (runs == 0) throw ParameterError("compare: runs must be positive");

    auto out = open_out(std::filesystem::path(opts.out_dir) / "compare.csv");
    out << "seed,method,accuracy,conf_in,conf_out,auroc,ece\n";
    std::map<config::Method, std::vector<eval::EvalReport>> by_method;
    const std::uint64_t base_seed = cfg.train.seed;
    for (std::size_t r = 0; r < runs; ++r) {
        const std::uint64_t seed = base_seed + r;
        auto run_cfg = cfg;
        run_cfg.train.seed = seed;
        run_cfg.gen.seed = seed;
        const auto ds = data::generate(run_cfg.gen);
        // Matched seeds: both methods see the same data, init and batches.
        for (const auto method : {config::Method::Paws, config::Method::Ropaws}) {
            run_cfg.train.method = method;
            const auto state = train::fit(ds, run_cfg.train);
            const auto report = eval::evaluate(ds, state.params, run_cfg.train);
            by_method[method].push_back(report);
            out << seed << ',' << config::method_name(method) << ',' << fmt(report.accuracy)
                << ',' << fmt(report.conf_in) << ',' << fmt(report.conf_out) << ','
                << fmt(report.auroc) << ',' << fmt(report.ece) << '\n';
        }
    }

    auto summary = open_out(std::filesystem::path(opts.out_dir) / "summary.txt");
    for (const auto& [method, reports] : by_method) {
        eval::EvalReport mean;
        for (const auto& r : reports) {
            mean.accuracy += r.accuracy / static_cast<double>(runs);
            mean.conf_in += r.conf_in / static_cast<double>(runs);
            mean.conf_out += r.conf_out / static_cast<double>(runs);
            mean.auroc += r.auroc / static_cast<double>(runs);
            mean.ece += r.ece / static_cast<double>(runs);
        }
        summary << config::method_name(method) << ": accuracy " << fmt(mean.accuracy)
                << ", conf_in " << fmt(mean.conf_in) << ", conf_out " << fmt(mean.conf_out)
                << ", auroc " << fmt(mean.auroc) << ", ece " << fmt(mean.ece) << " (" << runs
                << " seeds)\n";
    }
    std::cout << "wrote compare.csv and summary.txt (" << runs << " seeds)\n";
    return 0;
}

int cmd_grad_check(const CommonOpts& opts) {
    const auto cfg = resolve(opts);
    write_snapshot(cfg, opts.out_dir);
    const double err = train::loss_grad_check(cfg.train);
    std::cout << "max relative gradient error " << fmt(err) << '\n';
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"PAWS / RoPAWS semi-supervised label-propagation laboratory"};
    app.require_subcommand(1);

    CommonOpts opts;
    std::string data_path, test_path, checkpoint;
    std::size_t top_k = 5, query_count = 10, runs = 5;
    std::vector<std::size_t> iters = {1, 2, 3, 5, 10};

    auto* gen = app.add_subcommand("gen-data", "generate a synthetic dataset");
    auto* trn = app.add_subcommand("train", "train an encoder");
    auto* evl = app.add_subcommand("eval", "evaluate a checkpoint");
    auto* prp = app.add_subcommand("propagate", "label propagation at inference");
    auto* nbr = app.add_subcommand("neighbors", "inspect nearest labeled neighbors");
    auto* cmp = app.add_subcommand("compare", "train paws and ropaws on matched seeds");
    auto* gck = app.add_subcommand("grad-check", "finite-difference check of the loss gradient");

    for (auto* cmd : {gen, trn, evl, prp, nbr, cmp, gck}) register_common(cmd, opts);
    for (auto* cmd : {trn, evl, prp, nbr}) {
        cmd->add_option("--data", data_path, "dataset CSV (default: generate)");
        cmd->add_option("--test", test_path, "test CSV accompanying --data");
    }
    for (auto* cmd : {evl, prp, nbr})
        cmd->add_option("--checkpoint", checkpoint, "encoder checkpoint")->required();
    prp->add_option("--iters", iters, "iteration counts")->capture_default_str();
    nbr->add_option("--top-k", top_k, "neighbors per query")->capture_default_str();
    nbr->add_option("--queries", query_count, "number of test queries")->capture_default_str();
    cmp->add_option("--runs", runs, "number of matched seeds")->capture_default_str();

    try {
        app.parse(argc, argv);
        if (gen->parsed()) return cmd_gen_data(opts);
        if (trn->parsed()) return cmd_train(opts, data_path, test_path);
        if (evl->parsed()) return cmd_eval(opts, checkpoint, data_path, test_path);
        if (prp->parsed()) return cmd_propagate(opts, checkpoint, data_path, test_path, iters);
        if (nbr->parsed())
            return cmd_neighbors(opts, checkpoint, data_path, test_path, top_k, query_count);
        if (cmp->parsed()) return cmd_compare(opts, runs);
        if (gck->parsed()) return cmd_grad_check(opts);
        return 1;
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 1;
    } catch (const ropaws::NumericalError& e) {
        std::cerr << "numerical failure: " << e.what() << '\n';
        return 3;
    } catch (const ropaws::ValidationError& e) {
        std::cerr << "validation error: " << e.what() << '\n';
        return 2;
    } catch (const ropaws::ParameterError& e) {
        std::cerr << "parameter error: " << e.what() << '\n';
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
}
