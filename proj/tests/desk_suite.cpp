// Desk-scale behavioral suite: the long-running checks (hours on one core,
// not CI-gated).
//
//  9  smoke grokking (Dyck desk profile, 3 seeds): in-domain closing accuracy
//     > 0.95 by run end; in >= 2 of 3 seeds the generalization accuracy at
//     the end exceeds the accuracy at the early-stop step by >= 10 points.
// 10  training-loss ordering: train loss saturates (relative improvement
//     < 1% per 3k steps) no later than val accuracy saturation in every run.
// 11  t_parseval trend on QF desk runs: final t_parseval >= the
//     right-branching baseline F1 on the same sample.
//
// Runs resume from their checkpoints, so the suite can be interrupted and
// restarted. --quick shrinks the runs to smoke-test the machinery only; it
// does not constitute the acceptance check and is labeled as such.

#include <cmath>
#include <cstdio>
#include <cstring>
#include <string>
#include <vector>

#include "groklab/runner.hpp"

using namespace groklab;

namespace {

int g_failures = 0;

void criterion(int id, const std::string& name, bool ok, const std::string& detail = "") {
    printf("[%s] criterion %2d: %s%s%s\n", ok ? "PASS" : "FAIL", id, name.c_str(),
           detail.empty() ? "" : " -- ", detail.c_str());
    fflush(stdout);
    if (!ok) ++g_failures;
}

void print_row(const RunLogRow& r) {
    printf("  step %8ld  loss %.4f  val %.4f  gen %.4f  wnorm %.3f  negent %.4f  tscore %.5f  tparseval %.4f\n",
           static_cast<long>(r.step), r.train_loss, r.val_acc, r.gen_acc, r.weight_norm,
           r.negentropy, r.t_score, r.t_parseval);
    fflush(stdout);
}

// First step where the loss improves by less than 1% (relative) over the
// following 3k steps; the last step if it never stops improving.
int64_t train_loss_saturation_step(const std::vector<RunLogRow>& rows) {
    for (size_t i = 0; i < rows.size(); ++i) {
        for (size_t j = i + 1; j < rows.size(); ++j) {
            if (rows[j].step - rows[i].step < 3000) continue;
            double rel = (rows[i].train_loss - rows[j].train_loss) /
                         std::max(rows[i].train_loss, 1e-9);
            if (rel < 0.01) return rows[i].step;
            break;
        }
    }
    return rows.back().step;
}

// First step at which val accuracy is within 1 point of its best.
int64_t val_saturation_step(const std::vector<RunLogRow>& rows) {
    double best = 0.0;
    for (const auto& r : rows) best = std::max(best, r.val_acc);
    for (const auto& r : rows)
        if (r.val_acc >= best - 0.01) return r.step;
    return rows.back().step;
}

}  // namespace

int main(int argc, char** argv) {
    std::string out_dir = "desk_runs";
    bool quick = false;
    bool dyck_only = false, qf_only = false;
    int64_t steps_override = 0;
    for (int i = 1; i < argc; ++i) {
        std::string a = argv[i];
        if (a == "--out" && i + 1 < argc) out_dir = argv[++i];
        else if (a == "--quick") quick = true;
        else if (a == "--dyck-only") dyck_only = true;
        else if (a == "--qf-only") qf_only = true;
        else if (a == "--steps" && i + 1 < argc) steps_override = std::stoll(argv[++i]);
        else if (a == "--help" || a == "-h") {
            printf("usage: desk_suite [--out DIR] [--steps N] [--quick] [--dyck-only|--qf-only]\n");
            return 0;
        } else {
            fprintf(stderr, "unknown argument %s\n", a.c_str());
            return 1;
        }
    }
    out_dir = resolve_out_path(out_dir);

    auto desk = [&](const std::string& task) {
        ExperimentConfig cfg = ExperimentConfig::profile("desk", task);
        cfg.out_dir = out_dir;
        if (quick) {
            cfg.d_model = 48;
            cfg.d_ff = 192;
            cfg.total_steps = 2000;
            cfg.cadence = 200;
            cfg.warmup_steps = 200;
            cfg.n_train = 2000;
            cfg.n_val = 400;
            cfg.n_gen = 400;
            cfg.probe_sample = 64;
            cfg.tscore_sample = 16;
        }
        if (steps_override > 0) {
            cfg.total_steps = steps_override;
            if (cfg.total_steps % cfg.cadence != 0)
                cfg.cadence = std::max<int64_t>(1, cfg.total_steps / 30);
            while (cfg.total_steps % cfg.cadence != 0) --cfg.cadence;
        }
        return cfg;
    };

    if (quick)
        printf("NOTE: --quick smoke mode; results do not constitute the desk acceptance.\n");

    std::vector<RunLog> dyck_logs, qf_logs;

    if (!qf_only) {
        ExperimentConfig cfg = desk("dyck");
        auto ds = load_or_generate(cfg);
        for (int seed : {0, 1, 2}) {
            printf("dyck desk run: depth=%d seed=%d steps=%ld\n", cfg.depths[0], seed,
                   static_cast<long>(cfg.total_steps));
            dyck_logs.push_back(run_single(cfg, cfg.depths[0], seed, ds,
                                           run_dir_name(cfg, cfg.depths[0], seed), print_row));
        }
        emit_reports(dyck_logs, cfg, cfg.out_dir + "/dyck_reports");
    }
    if (!dyck_only) {
        ExperimentConfig cfg = desk("qf");
        auto ds = load_or_generate(cfg);
        printf("qf desk run: depth=%d seed=0 steps=%ld\n", cfg.depths[0],
               static_cast<long>(cfg.total_steps));
        qf_logs.push_back(run_single(cfg, cfg.depths[0], 0, ds,
                                     run_dir_name(cfg, cfg.depths[0], 0), print_row));
        emit_reports(qf_logs, cfg, cfg.out_dir + "/qf_reports");
    }

    // criterion 9: smoke grokking on Dyck
    if (!qf_only) {
        bool val_ok = true;
        int gap_seeds = 0;
        std::string detail;
        for (const auto& log : dyck_logs) {
            double final_val = log.rows.back().val_acc;
            double gap = log.summary.acc_at_end - log.summary.acc_at_earlystop;
            if (final_val <= 0.95) val_ok = false;
            if (gap >= 0.10) ++gap_seeds;
            char buf[96];
            snprintf(buf, sizeof(buf), "s%d: val %.3f gap %+.3f  ", log.seed, final_val, gap);
            detail += buf;
        }
        criterion(9, "dyck desk: val closing accuracy > 0.95 at run end", val_ok, detail);
        char buf[64];
        snprintf(buf, sizeof(buf), "%d of %zu seeds with gap >= 10 points", gap_seeds,
                 dyck_logs.size());
        criterion(9, "dyck desk: early-stop underestimates generalization", gap_seeds >= 2, buf);
    }

    // criterion 10: loss saturates no later than val accuracy
    {
        bool ok = true;
        std::string detail;
        std::vector<const RunLog*> all;
        for (const auto& l : dyck_logs) all.push_back(&l);
        for (const auto& l : qf_logs) all.push_back(&l);
        for (const auto* log : all) {
            int64_t loss_sat = train_loss_saturation_step(log->rows);
            int64_t val_sat = val_saturation_step(log->rows);
            if (loss_sat > val_sat) ok = false;
            char buf[96];
            snprintf(buf, sizeof(buf), "d%d s%d: loss@%ld val@%ld  ", log->depth, log->seed,
                     static_cast<long>(loss_sat), static_cast<long>(val_sat));
            detail += buf;
        }
        criterion(10, "train loss saturates no later than val accuracy", ok, detail);
    }

    // criterion 11: QF tree projections beat the right-branching baseline
    if (!dyck_only) {
        bool ok = true;
        std::string detail;
        for (const auto& log : qf_logs) {
            double final_tp = log.rows.back().t_parseval;
            if (final_tp < log.rb_baseline) ok = false;
            char buf[96];
            snprintf(buf, sizeof(buf), "s%d: t_parseval %.4f vs rb %.4f  ", log.seed, final_tp,
                     log.rb_baseline);
            detail += buf;
        }
        criterion(11, "qf desk: final t_parseval >= right-branching baseline", ok, detail);
    }

    printf("%s (%d failure%s)%s\n",
           g_failures == 0 ? "DESK SUITE PASSED" : "DESK SUITE FAILURES", g_failures,
           g_failures == 1 ? "" : "s", quick ? " [quick mode, not the acceptance check]" : "");
    return g_failures == 0 ? 0 : 1;
}
