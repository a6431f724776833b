#pragma once

// Versioned binary checkpoints. Layout (little-endian host, x86 assumed):
//
//   magic "GRKL" | u32 version
//   u64 kv_len | kv text (experiment config + depth/seed/task)
//   i64 step | u64 epoch | u64 cursor | i64 opt_step
//   u64 n_rows | rows (i64 step + 7 f64)
//   3 tensor blocks (params, first moments, second moments):
//     u64 count | per tensor: u16 name_len, name, u8 scalar_size, u8 rank,
//     i64 dims..., raw scalar data
//
// Raw scalar bytes are written verbatim, so save -> load round-trips
// bit-exactly.

#include <cstdint>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "groklab/kv.hpp"
#include "groklab/nn.hpp"
#include "groklab/optim.hpp"
#include "groklab/runlog.hpp"

namespace groklab {

constexpr uint32_t kCheckpointVersion = 1;

namespace detail {

template <typename V>
void write_pod(std::ostream& os, const V& v) {
    os.write(reinterpret_cast<const char*>(&v), sizeof(V));
}

template <typename V>
V read_pod(std::istream& is) {
    V v;
    is.read(reinterpret_cast<char*>(&v), sizeof(V));
    if (!is) throw std::runtime_error("checkpoint: truncated file");
    return v;
}

template <typename T>
void write_tensor_block(std::ostream& os,
                        const std::vector<std::pair<std::string, const Tensor<T>*>>& tensors) {
    write_pod<uint64_t>(os, tensors.size());
    for (const auto& [name, t] : tensors) {
        write_pod<uint16_t>(os, static_cast<uint16_t>(name.size()));
        os.write(name.data(), static_cast<std::streamsize>(name.size()));
        write_pod<uint8_t>(os, static_cast<uint8_t>(sizeof(T)));
        write_pod<uint8_t>(os, static_cast<uint8_t>(t->rank()));
        for (int i = 0; i < t->rank(); ++i) write_pod<int64_t>(os, t->dim(i));
        os.write(reinterpret_cast<const char*>(t->data()),
                 static_cast<std::streamsize>(sizeof(T) * static_cast<size_t>(t->size())));
    }
}

template <typename T>
std::vector<std::pair<std::string, Tensor<T>>> read_tensor_block(std::istream& is) {
    uint64_t count = read_pod<uint64_t>(is);
    std::vector<std::pair<std::string, Tensor<T>>> out;
    out.reserve(count);
    for (uint64_t i = 0; i < count; ++i) {
        uint16_t name_len = read_pod<uint16_t>(is);
        std::string name(name_len, '\0');
        is.read(name.data(), name_len);
        uint8_t scalar = read_pod<uint8_t>(is);
        if (scalar != sizeof(T))
            throw std::runtime_error("checkpoint: scalar width mismatch for '" + name + "'");
        uint8_t rank = read_pod<uint8_t>(is);
        std::vector<int64_t> dims;
        for (uint8_t r = 0; r < rank; ++r) dims.push_back(read_pod<int64_t>(is));
        Tensor<T> t(dims);
        is.read(reinterpret_cast<char*>(t.data()),
                static_cast<std::streamsize>(sizeof(T) * static_cast<size_t>(t.size())));
        if (!is) throw std::runtime_error("checkpoint: truncated tensor '" + name + "'");
        out.emplace_back(std::move(name), std::move(t));
    }
    return out;
}

}  // namespace detail

template <typename T>
void save_checkpoint(const std::string& path, const KvMap& config, const ModelParams<T>& params,
                     AdamW<T>& opt, int64_t step, uint64_t epoch, uint64_t cursor,
                     const std::vector<RunLogRow>& rows) {
    std::string tmp = path + ".tmp";
    {
        std::ofstream os(tmp, std::ios::binary);
        if (!os) throw std::runtime_error("save_checkpoint: cannot open " + tmp);
        os.write("GRKL", 4);
        detail::write_pod<uint32_t>(os, kCheckpointVersion);
        std::string kv = config.serialize();
        detail::write_pod<uint64_t>(os, kv.size());
        os.write(kv.data(), static_cast<std::streamsize>(kv.size()));
        detail::write_pod<int64_t>(os, step);
        detail::write_pod<uint64_t>(os, epoch);
        detail::write_pod<uint64_t>(os, cursor);
        detail::write_pod<int64_t>(os, opt.step_count());
        detail::write_pod<uint64_t>(os, rows.size());
        for (const auto& r : rows) {
            detail::write_pod<int64_t>(os, r.step);
            for (double v : {r.train_loss, r.val_acc, r.gen_acc, r.weight_norm, r.negentropy,
                             r.t_score, r.t_parseval})
                detail::write_pod<double>(os, v);
        }
        std::vector<std::pair<std::string, const Tensor<T>*>> ptensors;
        const_cast<ModelParams<T>&>(params).for_each(
            [&](const std::string& name, Tensor<T>& t) { ptensors.emplace_back(name, &t); });
        detail::write_tensor_block(os, ptensors);
        auto moments = [&](std::vector<Tensor<T>>& ms) {
            std::vector<std::pair<std::string, const Tensor<T>*>> out;
            for (size_t i = 0; i < ms.size(); ++i)
                out.emplace_back(ptensors[i].first, &ms[i]);
            return out;
        };
        detail::write_tensor_block(os, moments(opt.first_moments()));
        detail::write_tensor_block(os, moments(opt.second_moments()));
        if (!os) throw std::runtime_error("save_checkpoint: write failed for " + tmp);
    }
    if (std::rename(tmp.c_str(), path.c_str()) != 0)
        throw std::runtime_error("save_checkpoint: rename failed for " + path);
}

template <typename T>
struct LoadedCheckpoint {
    KvMap config;
    int64_t step = 0;
    uint64_t epoch = 0;
    uint64_t cursor = 0;
    int64_t opt_step = 0;
    std::vector<RunLogRow> rows;
    std::vector<std::pair<std::string, Tensor<T>>> params;
    std::vector<std::pair<std::string, Tensor<T>>> first_moments;
    std::vector<std::pair<std::string, Tensor<T>>> second_moments;
};

template <typename T>
LoadedCheckpoint<T> load_checkpoint(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw std::runtime_error("load_checkpoint: cannot open " + path);
    char magic[4];
    is.read(magic, 4);
    if (!is || std::memcmp(magic, "GRKL", 4) != 0)
        throw std::runtime_error("load_checkpoint: bad magic in " + path);
    uint32_t version = detail::read_pod<uint32_t>(is);
    if (version != kCheckpointVersion)
        throw std::runtime_error("load_checkpoint: unsupported version " +
                                 std::to_string(version));
    LoadedCheckpoint<T> ck;
    uint64_t kv_len = detail::read_pod<uint64_t>(is);
    std::string kv(kv_len, '\0');
    is.read(kv.data(), static_cast<std::streamsize>(kv_len));
    ck.config = KvMap::parse(kv);
    ck.step = detail::read_pod<int64_t>(is);
    ck.epoch = detail::read_pod<uint64_t>(is);
    ck.cursor = detail::read_pod<uint64_t>(is);
    ck.opt_step = detail::read_pod<int64_t>(is);
    uint64_t n_rows = detail::read_pod<uint64_t>(is);
    for (uint64_t i = 0; i < n_rows; ++i) {
        RunLogRow r;
        r.step = detail::read_pod<int64_t>(is);
        for (double* f : {&r.train_loss, &r.val_acc, &r.gen_acc, &r.weight_norm, &r.negentropy,
                          &r.t_score, &r.t_parseval})
            *f = detail::read_pod<double>(is);
        ck.rows.push_back(r);
    }
    ck.params = detail::read_tensor_block<T>(is);
    ck.first_moments = detail::read_tensor_block<T>(is);
    ck.second_moments = detail::read_tensor_block<T>(is);
    return ck;
}

// Overwrites params/opt tensors from a loaded checkpoint; names and shapes
// must match the model exactly.
template <typename T>
void restore_model(const LoadedCheckpoint<T>& ck, ModelParams<T>& params, AdamW<T>& opt) {
    size_t idx = 0;
    params.for_each([&](const std::string& name, Tensor<T>& t) {
        if (idx >= ck.params.size() || ck.params[idx].first != name ||
            ck.params[idx].second.shape() != t.shape())
            throw std::runtime_error("restore_model: checkpoint mismatch at '" + name + "'");
        t = ck.params[idx].second;
        opt.first_moments()[idx] = ck.first_moments[idx].second;
        opt.second_moments()[idx] = ck.second_moments[idx].second;
        ++idx;
    });
    if (idx != ck.params.size())
        throw std::runtime_error("restore_model: checkpoint has extra tensors");
    opt.set_step_count(ck.opt_step);
}

}  // namespace groklab
