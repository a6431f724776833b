#pragma once

// Versioned per-run metric log. One row per evaluation cadence; parsers
// reject unknown schema versions. Values round-trip exactly (%.17g).

#include <cstdint>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "groklab/metrics.hpp"

namespace groklab {

constexpr const char* kMetricsHeader = "# groklab-metrics-v1";
constexpr const char* kMetricsColumns =
    "step,train_loss,val_acc,gen_acc,weight_norm,negentropy,t_score,t_parseval";

struct RunLogRow {
    int64_t step = 0;
    double train_loss = 0.0;
    double val_acc = 0.0;
    double gen_acc = 0.0;
    double weight_norm = 0.0;
    double negentropy = 0.0;
    double t_score = 0.0;
    double t_parseval = 0.0;
};

struct RunLog {
    int depth = 0;
    int seed = 0;
    double rb_baseline = 0.0;  // right-branching PARSEVAL reference
    std::vector<RunLogRow> rows;
    GrokSummary summary;
    bool failed = false;
    std::string error;
};

inline std::string format_g17(double v) {
    char buf[64];
    snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

inline std::string metrics_csv(const std::vector<RunLogRow>& rows) {
    std::string out;
    out += kMetricsHeader;
    out += '\n';
    out += kMetricsColumns;
    out += '\n';
    for (const auto& r : rows) {
        out += std::to_string(r.step);
        for (double v : {r.train_loss, r.val_acc, r.gen_acc, r.weight_norm, r.negentropy,
                         r.t_score, r.t_parseval}) {
            out += ',';
            out += format_g17(v);
        }
        out += '\n';
    }
    return out;
}

inline std::vector<RunLogRow> parse_metrics_csv(const std::string& text) {
    std::istringstream is(text);
    std::string line;
    if (!std::getline(is, line) || line != kMetricsHeader)
        throw std::runtime_error("parse_metrics_csv: unknown or missing version header");
    if (!std::getline(is, line) || line != kMetricsColumns)
        throw std::runtime_error("parse_metrics_csv: unexpected column header");
    std::vector<RunLogRow> rows;
    while (std::getline(is, line)) {
        if (line.empty()) continue;
        RunLogRow r;
        double* fields[7] = {&r.train_loss, &r.val_acc,    &r.gen_acc, &r.weight_norm,
                             &r.negentropy, &r.t_score,    &r.t_parseval};
        std::istringstream ls(line);
        std::string item;
        if (!std::getline(ls, item, ',')) throw std::runtime_error("parse_metrics_csv: bad row");
        r.step = std::stoll(item);
        for (auto* f : fields) {
            if (!std::getline(ls, item, ','))
                throw std::runtime_error("parse_metrics_csv: short row");
            *f = std::stod(item);
        }
        rows.push_back(r);
    }
    return rows;
}

inline void write_metrics_csv(const std::string& path, const std::vector<RunLogRow>& rows) {
    std::string tmp = path + ".tmp";
    {
        std::ofstream f(tmp, std::ios::binary);
        if (!f) throw std::runtime_error("write_metrics_csv: cannot open " + tmp);
        f << metrics_csv(rows);
    }
    if (std::rename(tmp.c_str(), path.c_str()) != 0)
        throw std::runtime_error("write_metrics_csv: rename failed for " + path);
}

inline std::vector<RunLogRow> read_metrics_csv(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("read_metrics_csv: cannot open " + path);
    std::ostringstream os;
    os << f.rdbuf();
    return parse_metrics_csv(os.str());
}

inline std::vector<AccPoint> val_points(const std::vector<RunLogRow>& rows) {
    std::vector<AccPoint> out;
    for (const auto& r : rows) out.push_back({r.step, r.val_acc});
    return out;
}

inline std::vector<AccPoint> gen_points(const std::vector<RunLogRow>& rows) {
    std::vector<AccPoint> out;
    for (const auto& r : rows) out.push_back({r.step, r.gen_acc});
    return out;
}

}  // namespace groklab
