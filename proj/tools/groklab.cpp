// groklab command line: dataset generation, training runs, depth x seed
// sweeps, checkpoint probing and report emission.
//
// Exit codes: 0 success, 1 configuration error, 2 run failure.

#include <CLI11.hpp>

#include <cstdio>
#include <filesystem>
#include <iostream>
#include <string>
#include <vector>

#include "groklab/runner.hpp"

using namespace groklab;
namespace fs = std::filesystem;

namespace {

struct Counts {
    int64_t train = 0, val = 0, gen = 0;
};

Counts parse_counts(const std::string& s) {
    Counts c;
    if (sscanf(s.c_str(), "%ld:%ld:%ld", &c.train, &c.val, &c.gen) != 3)
        throw ConfigError("bad --counts '" + s + "', expected train:val:gen");
    return c;
}

void print_row(const RunLogRow& r) {
    printf("step %8ld  loss %.4f  val %.4f  gen %.4f  wnorm %.3f  negent %.4f  tscore %.5f  tparseval %.4f\n",
           static_cast<long>(r.step), r.train_loss, r.val_acc, r.gen_acc, r.weight_norm,
           r.negentropy, r.t_score, r.t_parseval);
    fflush(stdout);
}

// Shared train/sweep option block; flags the user sets override the profile
// or config file.
struct CommonOpts {
    std::string task = "dyck";
    std::string profile = "desk";
    std::string config_file;
    std::string data_dir;
    std::string out_dir;
    std::string counts;
    int64_t steps = 0, cadence = 0, warmup = 0;
    int64_t data_seed = -1;
    int n_types = 0, max_depth = 0, d_model = 0, d_ff = -1, heads = 0, batch = 0;
    int max_seq_len = 0, probe_max_len = 0, tree_samples = 0, patience = -1, workers = 0;
    int64_t probe_sample = 0, tscore_sample = 0, gen_subsample = 0;
    double lr = -1, clip = -1, wd = -1, dropout = -1, threshold = -1, min_delta = -1;
    bool target_only = false;
};

void add_common(CLI::App* cmd, CommonOpts& o) {
    cmd->add_option("--task", o.task, "dyck | qf | ti");
    cmd->add_option("--profile", o.profile, "paper | desk (default desk)");
    cmd->add_option("--config", o.config_file, "key=value config file; flags override");
    cmd->add_option("--data", o.data_dir, "dataset directory from `gen` (default: generate)");
    cmd->add_option("--out", o.out_dir, "output directory");
    cmd->add_option("--steps", o.steps, "total gradient steps");
    cmd->add_option("--cadence", o.cadence, "eval/probe/checkpoint cadence");
    cmd->add_option("--warmup", o.warmup, "linear warmup steps");
    cmd->add_option("--counts", o.counts, "dataset sizes train:val:gen");
    cmd->add_option("--data-seed", o.data_seed, "dataset generation seed");
    cmd->add_option("--n-types", o.n_types, "Dyck bracket types");
    cmd->add_option("--max-depth", o.max_depth, "Dyck max nesting depth");
    cmd->add_option("--d-model", o.d_model, "model width");
    cmd->add_option("--d-ff", o.d_ff, "feed-forward width (0 = 4*d_model)");
    cmd->add_option("--heads", o.heads, "attention heads");
    cmd->add_option("--batch", o.batch, "batch size");
    cmd->add_option("--max-seq-len", o.max_seq_len, "maximum sequence length");
    cmd->add_option("--lr", o.lr, "peak learning rate");
    cmd->add_option("--clip", o.clip, "gradient clip norm");
    cmd->add_option("--weight-decay", o.wd, "AdamW weight decay");
    cmd->add_option("--dropout", o.dropout, "dropout rate");
    cmd->add_option("--grok-threshold", o.threshold, "generalization accuracy threshold");
    cmd->add_option("--patience", o.patience, "early-stop patience (evaluations)");
    cmd->add_option("--min-delta", o.min_delta, "early-stop improvement floor");
    cmd->add_option("--probe-sample", o.probe_sample, "examples per probe pass");
    cmd->add_option("--tscore-sample", o.tscore_sample, "sentences per tree-metric pass");
    cmd->add_option("--probe-max-len", o.probe_max_len, "max sentence length for span passes");
    cmd->add_option("--tree-samples", o.tree_samples, "Monte-Carlo trees per sentence");
    cmd->add_option("--gen-subsample", o.gen_subsample, "gen examples evaluated at cadence");
    cmd->add_option("--workers", o.workers, "parallel runs in a sweep");
    cmd->add_flag("--loss-on-target-only", o.target_only,
                  "restrict the LM loss to tokens after SEP");
}

ExperimentConfig resolve_config(const CLI::App* cmd, const CommonOpts& o) {
    ExperimentConfig cfg = o.config_file.empty()
                               ? ExperimentConfig::profile(o.profile, o.task)
                               : ExperimentConfig::from_kv(KvMap::load(o.config_file));
    if (cmd->count("--task") && !o.config_file.empty() && cfg.task != o.task)
        throw ConfigError("--task conflicts with the config file task");
    if (cmd->count("--data")) cfg.data_dir = resolve_out_path(o.data_dir);
    if (cmd->count("--out")) cfg.out_dir = resolve_out_path(o.out_dir);
    if (cmd->count("--steps")) cfg.total_steps = o.steps;
    if (cmd->count("--cadence")) cfg.cadence = o.cadence;
    if (cmd->count("--warmup")) cfg.warmup_steps = o.warmup;
    if (cmd->count("--counts")) {
        Counts c = parse_counts(o.counts);
        cfg.n_train = c.train;
        cfg.n_val = c.val;
        cfg.n_gen = c.gen;
    }
    if (cmd->count("--data-seed")) cfg.data_seed = static_cast<uint64_t>(o.data_seed);
    if (cmd->count("--n-types")) cfg.n_types = o.n_types;
    if (cmd->count("--max-depth")) cfg.max_depth = o.max_depth;
    if (cmd->count("--d-model")) cfg.d_model = o.d_model;
    if (cmd->count("--d-ff")) cfg.d_ff = o.d_ff;
    if (cmd->count("--heads")) cfg.n_heads = o.heads;
    if (cmd->count("--batch")) cfg.batch_size = o.batch;
    if (cmd->count("--max-seq-len")) cfg.max_seq_len = o.max_seq_len;
    if (cmd->count("--lr")) cfg.lr = o.lr;
    if (cmd->count("--clip")) cfg.clip_norm = o.clip;
    if (cmd->count("--weight-decay")) cfg.weight_decay = o.wd;
    if (cmd->count("--dropout")) cfg.dropout = o.dropout;
    if (cmd->count("--grok-threshold")) cfg.grok_threshold = o.threshold;
    if (cmd->count("--patience")) cfg.patience = o.patience;
    if (cmd->count("--min-delta")) cfg.min_delta = o.min_delta;
    if (cmd->count("--probe-sample")) cfg.probe_sample = o.probe_sample;
    if (cmd->count("--tscore-sample")) cfg.tscore_sample = o.tscore_sample;
    if (cmd->count("--probe-max-len")) cfg.probe_max_len = o.probe_max_len;
    if (cmd->count("--tree-samples")) cfg.tree_samples = o.tree_samples;
    if (cmd->count("--gen-subsample")) cfg.eval_gen_subsample = o.gen_subsample;
    if (cmd->count("--workers")) cfg.workers = o.workers;
    if (cmd->count("--loss-on-target-only")) cfg.loss_on_target_only = o.target_only;
    cfg.validate();
    return cfg;
}

int cmd_gen(const std::string& task, int n_types, int max_depth, int dyck_max_len,
            const std::string& counts, int64_t seed, const std::string& out_dir) {
    Counts c = parse_counts(counts);
    DatasetSplits ds;
    if (task == "dyck") {
        DyckLang lang = make_dyck_lang(n_types, max_depth);
        DyckGenConfig g;
        g.max_len = dyck_max_len;
        ds = gen_dyck_dataset(lang, g, static_cast<int>(c.train), static_cast<int>(c.val),
                              static_cast<int>(c.gen), static_cast<uint64_t>(seed));
    } else if (task == "qf") {
        ds = gen_question_formation(static_cast<int>(c.train), static_cast<int>(c.val),
                                    static_cast<int>(c.gen), static_cast<uint64_t>(seed));
    } else if (task == "ti") {
        ds = gen_tense_inflection(static_cast<int>(c.train), static_cast<int>(c.val),
                                  static_cast<int>(c.gen), static_cast<uint64_t>(seed));
    } else {
        throw ConfigError("unknown task '" + task + "'");
    }
    std::string dir = resolve_out_path(out_dir);
    save_dataset(ds, dir);
    printf("wrote %s: %zu train, %zu val_id, %zu gen (vocab %d)\n", dir.c_str(), ds.train.size(),
           ds.val_id.size(), ds.gen.size(), ds.vocab.size());
    return 0;
}

int cmd_probe(const std::string& ck_path, const std::string& data_dir, int64_t sample,
              int64_t tscore_sample) {
    auto ck = load_checkpoint<float>(ck_path);
    ExperimentConfig cfg = ExperimentConfig::from_kv(ck.config);
    int depth = static_cast<int>(ck.config.get_i64("depth"));
    int seed = static_cast<int>(ck.config.get_i64("seed"));
    if (!data_dir.empty()) cfg.data_dir = data_dir;
    if (sample > 0) cfg.probe_sample = sample;
    if (tscore_sample > 0) cfg.tscore_sample = tscore_sample;
    DatasetSplits ds = load_or_generate(cfg);

    ModelConfig mc = cfg.model_config(depth, ds.vocab.size());
    auto params = build_model<float>(mc, 0);
    AdamW<float> opt(cfg.optim_config(), params);
    restore_model(ck, params, opt);

    std::vector<const Example*> ent_sample, tree_pool;
    std::vector<size_t> idx(ds.train.size());
    for (size_t i = 0; i < idx.size(); ++i) idx[i] = i;
    Rng rng(derive_seed(cfg.data_seed, "probe_sample"));
    rng.shuffle(idx);
    size_t k = std::min(idx.size(), static_cast<size_t>(cfg.probe_sample));
    for (size_t i = 0; i < k; ++i) ent_sample.push_back(&ds.train[idx[i]]);
    for (size_t i = 0; i < idx.size(); ++i) tree_pool.push_back(&ds.train[idx[i]]);

    auto rep = probe_model(params, ds.vocab, ent_sample, tree_pool, cfg.probe_config(),
                           static_cast<uint64_t>(seed), ck.step);
    double rb = right_branching_baseline(tree_pool, cfg.probe_config());
    printf("step=%ld weight_norm=%.17g negentropy=%.17g t_score=%.17g t_parseval=%.17g rb_baseline=%.17g\n",
           static_cast<long>(rep.step), rep.weight_norm, rep.attention_negentropy, rep.t_score,
           rep.t_parseval, rb);
    return 0;
}

int cmd_report(const std::string& runs_dir, const std::string& out_dir) {
    std::vector<RunLog> logs;
    ExperimentConfig cfg;
    bool have_cfg = false;
    std::vector<fs::path> dirs;
    for (const auto& entry : fs::directory_iterator(runs_dir)) {
        if (entry.is_directory() && fs::exists(entry.path() / "metrics.csv")) {
            dirs.push_back(entry.path());
        }
    }
    std::sort(dirs.begin(), dirs.end());
    for (const auto& dir : dirs) {
        KvMap kv = KvMap::load((dir / "config.txt").string());
        if (!have_cfg) {
            cfg = ExperimentConfig::from_kv(kv);
            have_cfg = true;
        }
        RunLog log;
        log.depth = static_cast<int>(kv.get_i64("depth"));
        log.seed = static_cast<int>(kv.get_i64("seed"));
        log.rows = read_metrics_csv((dir / "metrics.csv").string());
        if (fs::exists(dir / "summary.json")) {
            std::ifstream f(dir / "summary.json");
            auto j = nlohmann::json::parse(f);
            log.rb_baseline = j.value("rb_parseval_baseline", 0.0);
        }
        log.summary = make_grok_summary(log.depth, log.seed, val_points(log.rows),
                                        gen_points(log.rows), cfg.grok_threshold, cfg.patience,
                                        cfg.min_delta);
        logs.push_back(std::move(log));
    }
    if (logs.empty()) throw ConfigError("no run directories with metrics.csv under " + runs_dir);
    std::string out = resolve_out_path(out_dir);
    emit_reports(logs, cfg, out);
    printf("wrote reports for %zu runs to %s\n", logs.size(), out.c_str());
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"groklab: hierarchical-generalization training laboratory"};
    app.require_subcommand(1);

    // gen
    auto* gen = app.add_subcommand("gen", "generate a dataset and write it to disk");
    std::string g_task = "dyck", g_counts = "20000:2000:2000", g_out = "data";
    int g_types = 6, g_depth = 6, g_maxlen = 96;
    int64_t g_seed = 1;
    gen->add_option("--task", g_task, "dyck | qf | ti")->required();
    gen->add_option("--n-types", g_types, "Dyck bracket types");
    gen->add_option("--max-depth", g_depth, "Dyck max nesting depth");
    gen->add_option("--dyck-max-len", g_maxlen, "Dyck length budget");
    gen->add_option("--counts", g_counts, "train:val:gen sizes");
    gen->add_option("--seed", g_seed, "generation seed");
    gen->add_option("--out-dir", g_out, "output directory")->required();

    // train
    auto* train = app.add_subcommand("train", "train a single (depth, seed) run");
    CommonOpts t_opts;
    int t_depth = 4, t_seed = 0;
    add_common(train, t_opts);
    train->add_option("--depth", t_depth, "number of transformer layers");
    train->add_option("--seed", t_seed, "run seed");

    // sweep
    auto* sw = app.add_subcommand("sweep", "run the full depth x seed grid");
    CommonOpts s_opts;
    std::vector<int> s_depths, s_seeds;
    add_common(sw, s_opts);
    sw->add_option("--depths", s_depths, "depth list")->delimiter(',');
    sw->add_option("--seeds", s_seeds, "seed list")->delimiter(',');

    // probe
    auto* pr = app.add_subcommand("probe", "re-run probes on a checkpoint");
    std::string p_ck, p_data;
    int64_t p_sample = 0, p_tscore = 0;
    pr->add_option("--checkpoint", p_ck, "checkpoint.bin path")->required();
    pr->add_option("--data", p_data, "dataset directory (default: regenerate from config)");
    pr->add_option("--sample", p_sample, "override probe sample size");
    pr->add_option("--tscore-sample", p_tscore, "override tree-metric sample size");

    // report
    auto* rp = app.add_subcommand("report", "emit CSV/JSON/SVG reports from run logs");
    std::string r_runs, r_out = "reports";
    rp->add_option("--runs", r_runs, "directory containing run subdirectories")->required();
    rp->add_option("--out", r_out, "report output directory");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        int code = app.exit(e);
        return code == 0 ? 0 : 1;
    }

    try {
        if (gen->parsed()) {
            return cmd_gen(g_task, g_types, g_depth, g_maxlen, g_counts, g_seed, g_out);
        }
        if (train->parsed()) {
            ExperimentConfig cfg = resolve_config(train, t_opts);
            DatasetSplits ds = load_or_generate(cfg);
            std::string dir = run_dir_name(cfg, t_depth, t_seed);
            printf("training %s depth=%d seed=%d for %ld steps -> %s\n", cfg.task.c_str(),
                   t_depth, t_seed, static_cast<long>(cfg.total_steps), dir.c_str());
            fflush(stdout);
            RunLog log = run_single(cfg, t_depth, t_seed, ds, dir, print_row);
            printf("done: grok_step=%s earlystop=%ld acc_at_earlystop=%.4f acc_at_end=%.4f\n",
                   log.summary.grok_step ? std::to_string(*log.summary.grok_step).c_str() : "none",
                   static_cast<long>(log.summary.earlystop_step), log.summary.acc_at_earlystop,
                   log.summary.acc_at_end);
            return 0;
        }
        if (sw->parsed()) {
            ExperimentConfig cfg = resolve_config(sw, s_opts);
            if (!s_depths.empty()) cfg.depths = s_depths;
            if (!s_seeds.empty()) cfg.seeds = s_seeds;
            cfg.validate();
            DatasetSplits ds = load_or_generate(cfg);
            auto logs = sweep(cfg, ds);
            int failed = 0;
            for (const auto& log : logs) {
                if (log.failed) {
                    ++failed;
                    fprintf(stderr, "run d=%d s=%d failed: %s\n", log.depth, log.seed,
                            log.error.c_str());
                }
            }
            printf("sweep finished: %zu runs, %d failed; reports in %s\n", logs.size(), failed,
                   cfg.out_dir.c_str());
            return failed == static_cast<int>(logs.size()) ? 2 : 0;
        }
        if (pr->parsed()) return cmd_probe(p_ck, p_data, p_sample, p_tscore);
        if (rp->parsed()) return cmd_report(r_runs, r_out);
    } catch (const ConfigError& e) {
        fprintf(stderr, "config error: %s\n", e.what());
        return 1;
    } catch (const CLI::Error& e) {
        fprintf(stderr, "config error: %s\n", e.what());
        return 1;
    } catch (const std::exception& e) {
        fprintf(stderr, "run failure: %s\n", e.what());
        return 2;
    }
    return 0;
}
