#pragma once

// Experiment orchestration: config profiles, deterministic single runs with
// checkpoint resume, depth x seed sweeps, and report emission (CSV, JSON,
// SVG). Each run is fully determined by (config, depth, seed): dataset,
// shuffle order, initialization, dropout and probe subsampling all derive
// their streams from those values.

#include <json.hpp>

#include <atomic>
#include <cmath>
#include <cstdint>
#include <cstdlib>
#include <filesystem>
#include <functional>
#include <map>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

#include "groklab/checkpoint.hpp"
#include "groklab/data.hpp"
#include "groklab/dyck.hpp"
#include "groklab/grammar.hpp"
#include "groklab/kv.hpp"
#include "groklab/metrics.hpp"
#include "groklab/nn.hpp"
#include "groklab/optim.hpp"
#include "groklab/probes.hpp"
#include "groklab/runlog.hpp"
#include "groklab/svg.hpp"

namespace groklab {

struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct RunError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct ExperimentConfig {
    std::string task = "dyck";
    std::string data_dir;  // when set, load instead of generating
    uint64_t data_seed = 1;

    // dataset generation
    int n_types = 20;
    int max_depth = 10;
    int dyck_max_len = 96;
    int64_t n_train = 200000;
    int64_t n_val = 20000;
    int64_t n_gen = 20000;

    // model
    int n_heads = 4;
    int d_model = 512;
    int d_ff = 0;  // 0 -> 4 * d_model
    int max_seq_len = 128;
    bool tie_embeddings = true;
    double dropout = 0.0;
    bool loss_on_target_only = false;

    // optimizer
    double lr = 1e-4;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double adam_eps = 1e-7;
    double weight_decay = 0.01;
    int64_t warmup_steps = 10000;
    double clip_norm = 10.0;
    int batch_size = 8;

    // schedule and sweep
    int64_t total_steps = 400000;
    int64_t cadence = 3000;
    std::vector<int> depths{2, 4, 6, 8, 10};
    std::vector<int> seeds{0, 1, 2, 3, 4, 5, 6, 7, 8, 9};
    double grok_threshold = 0.8;
    int patience = 10;
    double min_delta = 0.001;

    // probes and evaluation
    int64_t probe_sample = 10000;
    int64_t tscore_sample = 10000;
    int probe_max_len = 32;
    int tree_samples = 32;
    int64_t eval_gen_subsample = 1000;

    int workers = 1;
    std::string out_dir = "runs";

    // "paper" pins the published setup for the chosen task; "desk" is the
    // laptop-scale profile used by the behavioral suite.
    static ExperimentConfig profile(const std::string& name, const std::string& task) {
        ExperimentConfig c;
        c.task = task;
        if (task != "dyck" && task != "qf" && task != "ti")
            throw ConfigError("unknown task '" + task + "'");
        if (name == "paper") {
            if (task == "dyck") {
                c.total_steps = 400000;
                c.n_types = 20;
                c.max_depth = 10;
                c.n_train = 200000;
                c.n_val = 20000;
                c.n_gen = 20000;
            } else {
                c.total_steps = 300000;
                c.n_train = 100000;
                c.n_val = 1000;
                c.n_gen = 10000;
            }
            return c;
        }
        if (name == "desk") {
            c.d_model = 128;
            c.d_ff = 512;
            c.n_heads = 4;
            c.batch_size = 64;
            c.total_steps = 30000;
            c.cadence = 1000;
            c.lr = 3e-4;
            c.warmup_steps = 1000;
            c.depths = {4};
            c.seeds = {0, 1, 2};
            c.patience = 5;
            c.probe_sample = 512;
            c.tscore_sample = 64;
            if (task == "dyck") {
                c.n_types = 6;
                c.max_depth = 6;
                c.n_train = 20000;
                c.n_val = 2000;
                c.n_gen = 2000;
            } else {
                c.n_train = 10000;
                c.n_val = 1000;
                c.n_gen = 2000;
            }
            return c;
        }
        throw ConfigError("unknown profile '" + name + "'");
    }

    void validate() const {
        if (task != "dyck" && task != "qf" && task != "ti")
            throw ConfigError("unknown task '" + task + "'");
        if (total_steps < 1 || cadence < 1 || total_steps % cadence != 0)
            throw ConfigError("cadence must divide total_steps");
        if (depths.empty()) throw ConfigError("depths must be nonempty");
        if (seeds.empty()) throw ConfigError("seeds must be nonempty");
        if (batch_size < 1) throw ConfigError("batch_size must be >= 1");
        if (n_train < 1 || n_val < 1 || n_gen < 1) throw ConfigError("split counts must be >= 1");
        if (d_model < 1 || n_heads < 1 || d_model % n_heads != 0)
            throw ConfigError("d_model must be divisible by n_heads");
        if (probe_sample < 1 || tscore_sample < 1) throw ConfigError("probe samples must be >= 1");
        if (workers < 1) throw ConfigError("workers must be >= 1");
    }

    ModelConfig model_config(int depth, int vocab_size) const {
        ModelConfig m;
        m.n_layers = depth;
        m.n_heads = n_heads;
        m.d_model = d_model;
        m.d_ff = d_ff;
        m.vocab_size = vocab_size;
        m.max_seq_len = max_seq_len;
        m.tie_embeddings = tie_embeddings;
        m.dropout = dropout;
        return m;
    }

    OptimConfig optim_config() const {
        OptimConfig o;
        o.lr_peak = lr;
        o.beta1 = beta1;
        o.beta2 = beta2;
        o.eps = adam_eps;
        o.weight_decay = weight_decay;
        o.warmup_steps = warmup_steps;
        o.clip_norm = clip_norm;
        return o;
    }

    ProbeConfig probe_config() const {
        ProbeConfig p;
        p.sample_size = probe_sample;
        p.tscore_sample = tscore_sample;
        p.probe_max_len = probe_max_len;
        p.tree.n_tree_samples = tree_samples;
        return p;
    }

    KvMap to_kv() const {
        KvMap m;
        m.set("task", task);
        m.set("data_dir", data_dir);
        m.set_i64("data_seed", static_cast<int64_t>(data_seed));
        m.set_i64("n_types", n_types);
        m.set_i64("max_depth", max_depth);
        m.set_i64("dyck_max_len", dyck_max_len);
        m.set_i64("n_train", n_train);
        m.set_i64("n_val", n_val);
        m.set_i64("n_gen", n_gen);
        m.set_i64("n_heads", n_heads);
        m.set_i64("d_model", d_model);
        m.set_i64("d_ff", d_ff);
        m.set_i64("max_seq_len", max_seq_len);
        m.set_bool("tie_embeddings", tie_embeddings);
        m.set_f64("dropout", dropout);
        m.set_bool("loss_on_target_only", loss_on_target_only);
        m.set_f64("lr", lr);
        m.set_f64("beta1", beta1);
        m.set_f64("beta2", beta2);
        m.set_f64("adam_eps", adam_eps);
        m.set_f64("weight_decay", weight_decay);
        m.set_i64("warmup_steps", warmup_steps);
        m.set_f64("clip_norm", clip_norm);
        m.set_i64("batch_size", batch_size);
        m.set_i64("total_steps", total_steps);
        m.set_i64("cadence", cadence);
        m.set_list("depths", depths);
        m.set_list("seeds", seeds);
        m.set_f64("grok_threshold", grok_threshold);
        m.set_i64("patience", patience);
        m.set_f64("min_delta", min_delta);
        m.set_i64("probe_sample", probe_sample);
        m.set_i64("tscore_sample", tscore_sample);
        m.set_i64("probe_max_len", probe_max_len);
        m.set_i64("tree_samples", tree_samples);
        m.set_i64("eval_gen_subsample", eval_gen_subsample);
        m.set_i64("workers", workers);
        m.set("out_dir", out_dir);
        return m;
    }

    static ExperimentConfig from_kv(const KvMap& m) {
        ExperimentConfig c;
        c.task = m.get("task");
        c.data_dir = m.get_or("data_dir", "");
        c.data_seed = static_cast<uint64_t>(m.get_i64("data_seed"));
        c.n_types = static_cast<int>(m.get_i64("n_types"));
        c.max_depth = static_cast<int>(m.get_i64("max_depth"));
        c.dyck_max_len = static_cast<int>(m.get_i64("dyck_max_len"));
        c.n_train = m.get_i64("n_train");
        c.n_val = m.get_i64("n_val");
        c.n_gen = m.get_i64("n_gen");
        c.n_heads = static_cast<int>(m.get_i64("n_heads"));
        c.d_model = static_cast<int>(m.get_i64("d_model"));
        c.d_ff = static_cast<int>(m.get_i64("d_ff"));
        c.max_seq_len = static_cast<int>(m.get_i64("max_seq_len"));
        c.tie_embeddings = m.get_bool("tie_embeddings");
        c.dropout = m.get_f64("dropout");
        c.loss_on_target_only = m.get_bool("loss_on_target_only");
        c.lr = m.get_f64("lr");
        c.beta1 = m.get_f64("beta1");
        c.beta2 = m.get_f64("beta2");
        c.adam_eps = m.get_f64("adam_eps");
        c.weight_decay = m.get_f64("weight_decay");
        c.warmup_steps = m.get_i64("warmup_steps");
        c.clip_norm = m.get_f64("clip_norm");
        c.batch_size = static_cast<int>(m.get_i64("batch_size"));
        c.total_steps = m.get_i64("total_steps");
        c.cadence = m.get_i64("cadence");
        c.depths = m.get_list("depths");
        c.seeds = m.get_list("seeds");
        c.grok_threshold = m.get_f64("grok_threshold");
        c.patience = static_cast<int>(m.get_i64("patience"));
        c.min_delta = m.get_f64("min_delta");
        c.probe_sample = m.get_i64("probe_sample");
        c.tscore_sample = m.get_i64("tscore_sample");
        c.probe_max_len = static_cast<int>(m.get_i64("probe_max_len"));
        c.tree_samples = static_cast<int>(m.get_i64("tree_samples"));
        c.eval_gen_subsample = m.get_i64("eval_gen_subsample");
        c.workers = static_cast<int>(m.get_i64("workers"));
        c.out_dir = m.get("out_dir");
        return c;
    }
};

// Relative paths resolve under $GROKLAB_OUT_ROOT when it is set.
inline std::string resolve_out_path(const std::string& path) {
    if (path.empty() || path[0] == '/') return path;
    const char* root = std::getenv("GROKLAB_OUT_ROOT");
    if (!root || !*root) return path;
    return std::string(root) + "/" + path;
}

inline DatasetSplits load_or_generate(const ExperimentConfig& cfg) {
    if (!cfg.data_dir.empty()) {
        DatasetSplits ds = load_dataset(cfg.data_dir);
        if (ds.task != cfg.task)
            throw ConfigError("dataset at " + cfg.data_dir + " is task '" + ds.task +
                              "', config wants '" + cfg.task + "'");
        return ds;
    }
    if (cfg.task == "dyck") {
        DyckLang lang = make_dyck_lang(cfg.n_types, cfg.max_depth);
        DyckGenConfig g;
        g.max_len = cfg.dyck_max_len;
        return gen_dyck_dataset(lang, g, static_cast<int>(cfg.n_train),
                                static_cast<int>(cfg.n_val), static_cast<int>(cfg.n_gen),
                                cfg.data_seed);
    }
    if (cfg.task == "qf")
        return gen_question_formation(static_cast<int>(cfg.n_train), static_cast<int>(cfg.n_val),
                                      static_cast<int>(cfg.n_gen), cfg.data_seed);
    if (cfg.task == "ti")
        return gen_tense_inflection(static_cast<int>(cfg.n_train), static_cast<int>(cfg.n_val),
                                    static_cast<int>(cfg.n_gen), cfg.data_seed);
    throw ConfigError("unknown task '" + cfg.task + "'");
}

// Rebuilds bracket-id tables from a Dyck vocabulary.
inline DyckLang attach_dyck_lang(const Vocab& vocab, int max_depth) {
    DyckLang d;
    d.max_depth = max_depth;
    d.vocab = vocab;
    for (int32_t id = 0; id < vocab.size(); ++id) {
        const std::string& t = vocab.token(id);
        if (t.size() >= 2 && t[0] == '(') d.open_ids.push_back(id);
        if (t.size() >= 2 && t[0] == ')') d.close_ids.push_back(id);
    }
    if (d.open_ids.empty() || d.open_ids.size() != d.close_ids.size())
        throw ConfigError("attach_dyck_lang: vocabulary has no bracket pairs");
    d.n_types = static_cast<int>(d.open_ids.size());
    return d;
}

namespace detail {

// Epoch-wise shuffled data order; permutations derive statelessly from
// (seed, epoch) so (epoch, cursor) fully describe the stream.
class DataOrder {
public:
    DataOrder(size_t n, int seed, uint64_t epoch, uint64_t cursor)
        : n_(n), seed_(seed), epoch_(epoch), cursor_(cursor) {
        if (n_ == 0) throw std::invalid_argument("DataOrder: empty dataset");
        regen();
    }

    size_t next() {
        if (cursor_ >= n_) {
            ++epoch_;
            cursor_ = 0;
            regen();
        }
        return perm_[cursor_++];
    }

    uint64_t epoch() const { return epoch_; }
    uint64_t cursor() const { return cursor_; }

private:
    void regen() {
        perm_.resize(n_);
        for (size_t i = 0; i < n_; ++i) perm_[i] = i;
        Rng rng(derive_seed(static_cast<uint64_t>(seed_), "data_order", epoch_));
        rng.shuffle(perm_);
    }

    size_t n_;
    int seed_;
    uint64_t epoch_;
    uint64_t cursor_;
    std::vector<size_t> perm_;
};

template <typename T>
EvalResult evaluate_task(const ExperimentConfig& cfg, const ModelParams<T>& params,
                         const std::vector<Example>& exs, const DatasetSplits& ds,
                         const DyckLang* lang, int64_t step, Split split) {
    if (cfg.task == "dyck") return dyck_closing_accuracy(params, exs, *lang, step, split, 10);
    if (cfg.task == "qf") return qf_first_word_accuracy(params, exs, ds.vocab, step, split);
    return ti_inflection_accuracy(params, exs, ds.vocab, step, split);
}

inline nlohmann::json summary_json(const RunLog& log) {
    nlohmann::json j;
    j["depth"] = log.depth;
    j["seed"] = log.seed;
    j["failed"] = log.failed;
    if (log.failed) j["error"] = log.error;
    j["rb_parseval_baseline"] = log.rb_baseline;
    if (log.summary.grok_step.has_value())
        j["grok_step"] = *log.summary.grok_step;
    else
        j["grok_step"] = nullptr;
    j["earlystop_step"] = log.summary.earlystop_step;
    j["acc_at_earlystop"] = log.summary.acc_at_earlystop;
    j["acc_at_end"] = log.summary.acc_at_end;
    j["early_stop_gap"] = log.summary.acc_at_end - log.summary.acc_at_earlystop;
    if (!log.rows.empty()) {
        j["final_val_acc"] = log.rows.back().val_acc;
        j["final_gen_acc"] = log.rows.back().gen_acc;
        j["final_train_loss"] = log.rows.back().train_loss;
    }
    return j;
}

}  // namespace detail

inline std::string run_dir_name(const ExperimentConfig& cfg, int depth, int seed) {
    return cfg.out_dir + "/" + cfg.task + "_d" + std::to_string(depth) + "_s" +
           std::to_string(seed);
}

using RowCallback = std::function<void(const RunLogRow&)>;

// Trains one (depth, seed) run to total_steps, evaluating, probing and
// checkpointing at cadence. Resumes bit-identically from run_dir/checkpoint.bin
// when present. Throws RunError on non-finite loss (step recorded).
template <typename T = float>
RunLog run_single(const ExperimentConfig& cfg, int depth, int seed, const DatasetSplits& ds,
                  const std::string& run_dir, const RowCallback& on_row = {}) {
    cfg.validate();
    namespace fs = std::filesystem;
    fs::create_directories(run_dir);

    ModelConfig mc = cfg.model_config(depth, ds.vocab.size());
    mc.validate();
    for (const auto* split : {&ds.train, &ds.val_id, &ds.gen}) {
        for (const auto& ex : *split) {
            if (static_cast<int>(lm_sequence(ex, ds.vocab).size()) > mc.max_seq_len)
                throw ConfigError("max_seq_len " + std::to_string(mc.max_seq_len) +
                                  " is shorter than a dataset sequence");
        }
    }

    KvMap run_kv = cfg.to_kv();
    run_kv.set_i64("depth", depth);
    run_kv.set_i64("seed", seed);
    run_kv.save(run_dir + "/config.txt");

    ModelParams<T> params = build_model<T>(mc, derive_seed(static_cast<uint64_t>(seed),
                                                           "run_init", static_cast<uint64_t>(depth)));
    AdamW<T> opt(cfg.optim_config(), params);
    int64_t step = 0;
    uint64_t epoch = 0, cursor = 0;
    std::vector<RunLogRow> rows;

    const std::string ck_path = run_dir + "/checkpoint.bin";
    if (fs::exists(ck_path)) {
        auto ck = load_checkpoint<T>(ck_path);
        if (ck.config.get("task") != cfg.task || ck.config.get_i64("depth") != depth ||
            ck.config.get_i64("seed") != seed)
            throw RunError("checkpoint at " + ck_path + " belongs to a different run");
        restore_model(ck, params, opt);
        step = ck.step;
        epoch = ck.epoch;
        cursor = ck.cursor;
        rows = ck.rows;
    }

    const DyckLang lang = cfg.task == "dyck" ? attach_dyck_lang(ds.vocab, cfg.max_depth)
                                             : DyckLang{};
    const DyckLang* lang_ptr = cfg.task == "dyck" ? &lang : nullptr;

    // fixed evaluation and probe fixtures, derived from the data seed
    std::vector<Example> gen_sub;
    {
        std::vector<size_t> idx(ds.gen.size());
        for (size_t i = 0; i < idx.size(); ++i) idx[i] = i;
        Rng rng(derive_seed(cfg.data_seed, "gen_subsample"));
        rng.shuffle(idx);
        size_t k = std::min(idx.size(), static_cast<size_t>(cfg.eval_gen_subsample));
        for (size_t i = 0; i < k; ++i) gen_sub.push_back(ds.gen[idx[i]]);
    }
    std::vector<const Example*> ent_sample, tree_pool;
    {
        std::vector<size_t> idx(ds.train.size());
        for (size_t i = 0; i < idx.size(); ++i) idx[i] = i;
        Rng rng(derive_seed(cfg.data_seed, "probe_sample"));
        rng.shuffle(idx);
        size_t k = std::min(idx.size(), static_cast<size_t>(cfg.probe_sample));
        for (size_t i = 0; i < k; ++i) ent_sample.push_back(&ds.train[idx[i]]);
        // tree metrics pool: scan the whole shuffled order for eligible sentences
        for (size_t i = 0; i < idx.size(); ++i) tree_pool.push_back(&ds.train[idx[i]]);
    }
    const ProbeConfig pc = cfg.probe_config();
    RunLog log;
    log.depth = depth;
    log.seed = seed;
    log.rows = rows;
    log.rb_baseline = right_branching_baseline(tree_pool, pc);

    detail::DataOrder order(ds.train.size(), seed, epoch, cursor);
    double window_loss = 0.0;
    int64_t window_n = 0;

    for (int64_t s = step + 1; s <= cfg.total_steps; ++s) {
        std::vector<const Example*> batch_exs;
        batch_exs.reserve(static_cast<size_t>(cfg.batch_size));
        for (int b = 0; b < cfg.batch_size; ++b) batch_exs.push_back(&ds.train[order.next()]);
        PackedBatch batch = make_batch(batch_exs, ds.vocab, cfg.loss_on_target_only);

        Rng dropout_rng(derive_seed(static_cast<uint64_t>(seed), "dropout",
                                    static_cast<uint64_t>(s)));
        Tape<T> tape;
        auto g = build_forward(tape, params, batch, true,
                               static_cast<AttentionRecord<T>*>(nullptr),
                               cfg.dropout > 0.0 ? &dropout_rng : nullptr);
        auto loss = lm_loss(tape, g.logits, batch.targets, batch.loss_mask);
        double loss_val = tape.value(loss)[0];
        if (!std::isfinite(loss_val))
            throw RunError("non-finite training loss at step " + std::to_string(s));
        tape.backward(loss);
        std::vector<Tensor<T>> grads;
        grads.reserve(g.param_refs.size());
        for (auto r : g.param_refs) grads.push_back(tape.grad(r));
        try {
            opt.step(params, grads);
        } catch (const std::runtime_error& e) {
            throw RunError(std::string(e.what()) + " (training step " + std::to_string(s) + ")");
        }
        window_loss += loss_val;
        ++window_n;

        if (s % cfg.cadence == 0) {
            RunLogRow row;
            row.step = s;
            row.train_loss = window_loss / static_cast<double>(window_n);
            window_loss = 0.0;
            window_n = 0;
            EvalResult val = detail::evaluate_task(cfg, params, ds.val_id, ds, lang_ptr, s,
                                                   Split::val_id);
            const std::vector<Example>& gen_set = (s == cfg.total_steps) ? ds.gen : gen_sub;
            EvalResult gen = detail::evaluate_task(cfg, params, gen_set, ds, lang_ptr, s,
                                                   Split::gen);
            ProbeReport probe = probe_model(params, ds.vocab, ent_sample, tree_pool, pc,
                                            static_cast<uint64_t>(seed), s);
            row.val_acc = val.accuracy();
            row.gen_acc = gen.accuracy();
            row.weight_norm = probe.weight_norm;
            row.negentropy = probe.attention_negentropy;
            row.t_score = probe.t_score;
            row.t_parseval = probe.t_parseval;
            log.rows.push_back(row);
            write_metrics_csv(run_dir + "/metrics.csv", log.rows);
            save_checkpoint(ck_path, run_kv, params, opt, s, order.epoch(), order.cursor(),
                            log.rows);
            if (on_row) on_row(row);
        }
    }

    log.summary = make_grok_summary(depth, seed, val_points(log.rows), gen_points(log.rows),
                                    cfg.grok_threshold, cfg.patience, cfg.min_delta);
    {
        std::ofstream f(run_dir + "/summary.json", std::ios::binary);
        f << detail::summary_json(log).dump(2) << "\n";
    }
    return log;
}

// Runs every (depth, seed) pair; individual failures are recorded and the
// sweep continues. Reports are emitted under cfg.out_dir afterwards.
void emit_reports(const std::vector<RunLog>& logs, const ExperimentConfig& cfg,
                  const std::string& out_dir);

template <typename T = float>
std::vector<RunLog> sweep(const ExperimentConfig& cfg, const DatasetSplits& ds) {
    cfg.validate();
    std::vector<std::pair<int, int>> jobs;
    for (int d : cfg.depths)
        for (int s : cfg.seeds) jobs.emplace_back(d, s);
    std::vector<RunLog> logs(jobs.size());

    auto run_job = [&](size_t i) {
        auto [depth, seed] = jobs[i];
        try {
            logs[i] = run_single<T>(cfg, depth, seed, ds, run_dir_name(cfg, depth, seed));
        } catch (const std::exception& e) {
            logs[i].depth = depth;
            logs[i].seed = seed;
            logs[i].failed = true;
            logs[i].error = e.what();
        }
    };

    if (cfg.workers <= 1) {
        for (size_t i = 0; i < jobs.size(); ++i) run_job(i);
    } else {
        std::atomic<size_t> next{0};
        std::vector<std::thread> pool;
        for (int w = 0; w < cfg.workers; ++w) {
            pool.emplace_back([&] {
                for (size_t i = next.fetch_add(1); i < jobs.size(); i = next.fetch_add(1))
                    run_job(i);
            });
        }
        for (auto& t : pool) t.join();
    }
    emit_reports(logs, cfg, cfg.out_dir);
    return logs;
}

namespace detail {

inline const char* palette(size_t i) {
    static const char* colors[] = {"#1f77b4", "#ff7f0e", "#2ca02c", "#d62728",
                                   "#9467bd", "#8c564b", "#17becf", "#7f7f7f"};
    return colors[i % (sizeof(colors) / sizeof(colors[0]))];
}

// Mean metric trajectory across a depth's completed runs, aligned by row index.
inline std::pair<std::vector<double>, std::vector<double>> depth_mean(
    const std::vector<const RunLog*>& runs, double RunLogRow::*field) {
    size_t n_rows = SIZE_MAX;
    for (const auto* r : runs) n_rows = std::min(n_rows, r->rows.size());
    if (runs.empty() || n_rows == 0 || n_rows == SIZE_MAX) return {{}, {}};
    std::vector<double> xs(n_rows), ys(n_rows, 0.0);
    for (size_t i = 0; i < n_rows; ++i) {
        xs[i] = static_cast<double>(runs[0]->rows[i].step);
        for (const auto* r : runs) ys[i] += r->rows[i].*field;
        ys[i] /= static_cast<double>(runs.size());
    }
    return {xs, ys};
}

}  // namespace detail

inline void emit_reports(const std::vector<RunLog>& logs, const ExperimentConfig& cfg,
                         const std::string& out_dir) {
    if (logs.empty()) throw RunError("emit_reports: no runs");
    namespace fs = std::filesystem;
    std::error_code ec;
    fs::create_directories(out_dir, ec);
    if (ec) throw RunError("emit_reports: cannot create " + out_dir + ": " + ec.message());

    // consolidated CSV
    {
        std::string text = "# groklab-sweep-metrics-v1\n";
        text += "depth,seed,";
        text += kMetricsColumns;
        text += '\n';
        for (const auto& log : logs) {
            for (const auto& r : log.rows) {
                text += std::to_string(log.depth) + "," + std::to_string(log.seed) + "," +
                        std::to_string(r.step);
                for (double v : {r.train_loss, r.val_acc, r.gen_acc, r.weight_norm, r.negentropy,
                                 r.t_score, r.t_parseval}) {
                    text += ',';
                    text += format_g17(v);
                }
                text += '\n';
            }
        }
        std::ofstream f(out_dir + "/metrics.csv", std::ios::binary);
        if (!f) throw RunError("emit_reports: cannot write " + out_dir + "/metrics.csv");
        f << text;
    }

    // depth -> completed runs
    std::map<int, std::vector<const RunLog*>> by_depth;
    for (const auto& log : logs)
        if (!log.failed) by_depth[log.depth].push_back(&log);

    // summary.json with grok fractions per depth
    {
        nlohmann::json j;
        j["task"] = cfg.task;
        j["grok_threshold"] = cfg.grok_threshold;
        j["runs"] = nlohmann::json::array();
        for (const auto& log : logs) j["runs"].push_back(detail::summary_json(log));
        std::map<int, std::pair<int, int>> frac;  // depth -> (grokked, attempted)
        for (const auto& log : logs) {
            auto& [g, n] = frac[log.depth];
            ++n;
            if (!log.failed && log.summary.grok_step.has_value()) ++g;
        }
        j["grok_fraction_by_depth"] = nlohmann::json::array();
        for (const auto& [depth, gn] : frac) {
            nlohmann::json row;
            row["depth"] = depth;
            row["n_grokked"] = gn.first;
            row["n_runs"] = gn.second;
            row["fraction"] = gn.second ? static_cast<double>(gn.first) / gn.second : 0.0;
            j["grok_fraction_by_depth"].push_back(row);
        }
        std::ofstream f(out_dir + "/summary.json", std::ios::binary);
        if (!f) throw RunError("emit_reports: cannot write " + out_dir + "/summary.json");
        f << j.dump(2) << "\n";
    }

    // accuracy vs step: per-depth mean val (solid) and gen (dashed)
    {
        LineChart chart("accuracy vs training step", "step", "accuracy");
        size_t ci = 0;
        for (const auto& [depth, runs] : by_depth) {
            auto [xs, val] = detail::depth_mean(runs, &RunLogRow::val_acc);
            auto [xs2, gen] = detail::depth_mean(runs, &RunLogRow::gen_acc);
            if (xs.empty()) continue;
            std::string color = detail::palette(ci++);
            chart.add({"val d=" + std::to_string(depth), xs, val, color, false, false});
            chart.add({"gen d=" + std::to_string(depth), xs2, gen, color, true, false});
        }
        chart.write(out_dir + "/accuracy_vs_step.svg");
    }

    // grok fraction by depth
    {
        LineChart chart("grokking fraction by depth", "depth", "fraction of seeds");
        std::vector<double> xs, ys;
        std::map<int, std::pair<int, int>> frac;
        for (const auto& log : logs) {
            auto& [g, n] = frac[log.depth];
            ++n;
            if (!log.failed && log.summary.grok_step.has_value()) ++g;
        }
        for (const auto& [depth, gn] : frac) {
            xs.push_back(depth);
            ys.push_back(gn.second ? static_cast<double>(gn.first) / gn.second : 0.0);
        }
        chart.add({"fraction >= " + std::to_string(cfg.grok_threshold), xs, ys, "#1f77b4", false,
                   true});
        chart.write(out_dir + "/grok_fraction.svg");
    }

    // probe trajectories
    struct ProbeChart {
        const char* file;
        const char* title;
        double RunLogRow::*field;
    };
    for (const ProbeChart& pcdef : {ProbeChart{"probe_weight_norm.svg", "weight norm / layers",
                                               &RunLogRow::weight_norm},
                                    ProbeChart{"probe_negentropy.svg", "attention negentropy",
                                               &RunLogRow::negentropy},
                                    ProbeChart{"probe_t_score.svg", "tree score",
                                               &RunLogRow::t_score}}) {
        LineChart chart(pcdef.title, "step", pcdef.title);
        size_t ci = 0;
        for (const auto& [depth, runs] : by_depth) {
            auto [xs, ys] = detail::depth_mean(runs, pcdef.field);
            if (xs.empty()) continue;
            chart.add({"d=" + std::to_string(depth), xs, ys, detail::palette(ci++), false, false});
        }
        chart.write(out_dir + "/" + pcdef.file);
    }

    // t_parseval with the right-branching reference
    {
        LineChart chart("bracketing F1 of tree projections", "step", "F1");
        size_t ci = 0;
        double rb_sum = 0.0;
        int rb_n = 0;
        for (const auto& [depth, runs] : by_depth) {
            auto [xs, ys] = detail::depth_mean(runs, &RunLogRow::t_parseval);
            if (xs.empty()) continue;
            chart.add({"d=" + std::to_string(depth), xs, ys, detail::palette(ci++), false, false});
            for (const auto* r : runs) {
                rb_sum += r->rb_baseline;
                ++rb_n;
            }
        }
        if (rb_n > 0) chart.add_hline(rb_sum / rb_n, "right-branching");
        chart.write(out_dir + "/t_parseval.svg");
    }
}

}  // namespace groklab
