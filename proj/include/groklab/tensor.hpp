#pragma once

// Dense row-major tensor over float or double, plus the few BLAS-backed
// matrix products the model needs. Shapes are small (rank <= 3) and all
// hot paths go through OpenBLAS gemm.

#include <cblas.h>

#include <cmath>
#include <cstdint>
#include <initializer_list>
#include <numeric>
#include <stdexcept>
#include <string>
#include <vector>

#include "groklab/rng.hpp"

namespace groklab {

template <typename T>
class Tensor {
    static_assert(std::is_floating_point_v<T>);

public:
    Tensor() = default;

    explicit Tensor(std::vector<int64_t> shape) : shape_(std::move(shape)) {
        data_.assign(static_cast<size_t>(count(shape_)), T{0});
    }

    Tensor(std::initializer_list<int64_t> shape) : Tensor(std::vector<int64_t>(shape)) {}

    static Tensor randn(std::vector<int64_t> shape, Rng& rng, T stddev) {
        Tensor t(std::move(shape));
        for (auto& x : t.data_) x = static_cast<T>(rng.normal()) * stddev;
        return t;
    }

    static Tensor full(std::vector<int64_t> shape, T value) {
        Tensor t(std::move(shape));
        std::fill(t.data_.begin(), t.data_.end(), value);
        return t;
    }

    bool empty() const { return data_.empty(); }
    int64_t size() const { return static_cast<int64_t>(data_.size()); }
    int rank() const { return static_cast<int>(shape_.size()); }
    int64_t dim(int i) const { return shape_.at(static_cast<size_t>(i)); }
    const std::vector<int64_t>& shape() const { return shape_; }

    T* data() { return data_.data(); }
    const T* data() const { return data_.data(); }

    T& operator[](int64_t i) { return data_[static_cast<size_t>(i)]; }
    T operator[](int64_t i) const { return data_[static_cast<size_t>(i)]; }

    T& at(int64_t i, int64_t j) { return data_[static_cast<size_t>(i * shape_[1] + j)]; }
    T at(int64_t i, int64_t j) const { return data_[static_cast<size_t>(i * shape_[1] + j)]; }

    T* row(int64_t i) { return data_.data() + i * shape_[1]; }
    const T* row(int64_t i) const { return data_.data() + i * shape_[1]; }

    void fill(T v) { std::fill(data_.begin(), data_.end(), v); }

    void add_inplace(const Tensor& other, T scale = T{1}) {
        check_same_size(other);
        const T* src = other.data();
        for (size_t i = 0; i < data_.size(); ++i) data_[i] += scale * src[i];
    }

    void scale_inplace(T s) {
        for (auto& x : data_) x *= s;
    }

    double sum_squares() const {
        double acc = 0.0;
        for (T x : data_) acc += static_cast<double>(x) * static_cast<double>(x);
        return acc;
    }

    bool all_finite() const {
        for (T x : data_) {
            if (!std::isfinite(static_cast<double>(x))) return false;
        }
        return true;
    }

    template <typename U>
    Tensor<U> cast() const {
        Tensor<U> out(shape_);
        for (int64_t i = 0; i < size(); ++i) out[i] = static_cast<U>(data_[static_cast<size_t>(i)]);
        return out;
    }

    static int64_t count(const std::vector<int64_t>& shape) {
        int64_t n = 1;
        for (int64_t d : shape) {
            if (d < 0) throw std::invalid_argument("Tensor: negative dimension");
            n *= d;
        }
        return n;
    }

private:
    void check_same_size(const Tensor& other) const {
        if (other.size() != size()) throw std::invalid_argument("Tensor: size mismatch");
    }

    std::vector<int64_t> shape_;
    std::vector<T> data_;
};

// ---- BLAS-backed matrix products (row-major, 2-D) ----

inline void gemm_raw(bool trans_a, bool trans_b, int64_t m, int64_t n, int64_t k, float alpha,
                     const float* a, int64_t lda, const float* b, int64_t ldb, float beta, float* c,
                     int64_t ldc) {
    cblas_sgemm(CblasRowMajor, trans_a ? CblasTrans : CblasNoTrans,
                trans_b ? CblasTrans : CblasNoTrans, static_cast<int>(m), static_cast<int>(n),
                static_cast<int>(k), alpha, a, static_cast<int>(lda), b, static_cast<int>(ldb),
                beta, c, static_cast<int>(ldc));
}

inline void gemm_raw(bool trans_a, bool trans_b, int64_t m, int64_t n, int64_t k, double alpha,
                     const double* a, int64_t lda, const double* b, int64_t ldb, double beta,
                     double* c, int64_t ldc) {
    cblas_dgemm(CblasRowMajor, trans_a ? CblasTrans : CblasNoTrans,
                trans_b ? CblasTrans : CblasNoTrans, static_cast<int>(m), static_cast<int>(n),
                static_cast<int>(k), alpha, a, static_cast<int>(lda), b, static_cast<int>(ldb),
                beta, c, static_cast<int>(ldc));
}

template <typename T>
void require_matrix(const Tensor<T>& t, const char* what) {
    if (t.rank() != 2) throw std::invalid_argument(std::string(what) + ": expected rank-2 tensor");
}

// C = A[m,k] * B[k,n]
template <typename T>
Tensor<T> matmul_nn(const Tensor<T>& a, const Tensor<T>& b) {
    require_matrix(a, "matmul_nn");
    require_matrix(b, "matmul_nn");
    if (a.dim(1) != b.dim(0)) throw std::invalid_argument("matmul_nn: inner dim mismatch");
    Tensor<T> c({a.dim(0), b.dim(1)});
    gemm_raw(false, false, a.dim(0), b.dim(1), a.dim(1), T{1}, a.data(), a.dim(1), b.data(),
             b.dim(1), T{0}, c.data(), c.dim(1));
    return c;
}

// C = A[m,k] * B[n,k]^T
template <typename T>
Tensor<T> matmul_nt(const Tensor<T>& a, const Tensor<T>& b) {
    require_matrix(a, "matmul_nt");
    require_matrix(b, "matmul_nt");
    if (a.dim(1) != b.dim(1)) throw std::invalid_argument("matmul_nt: inner dim mismatch");
    Tensor<T> c({a.dim(0), b.dim(0)});
    gemm_raw(false, true, a.dim(0), b.dim(0), a.dim(1), T{1}, a.data(), a.dim(1), b.data(),
             b.dim(1), T{0}, c.data(), c.dim(1));
    return c;
}

// C += A[k,m]^T * B[k,n]  (accumulating form used in backward passes)
template <typename T>
void matmul_tn_acc(const Tensor<T>& a, const Tensor<T>& b, Tensor<T>& c) {
    require_matrix(a, "matmul_tn_acc");
    require_matrix(b, "matmul_tn_acc");
    if (a.dim(0) != b.dim(0)) throw std::invalid_argument("matmul_tn_acc: inner dim mismatch");
    gemm_raw(true, false, a.dim(1), b.dim(1), a.dim(0), T{1}, a.data(), a.dim(1), b.data(),
             b.dim(1), T{1}, c.data(), c.dim(1));
}

// C += A[m,k] * B[k,n]
template <typename T>
void matmul_nn_acc(const Tensor<T>& a, const Tensor<T>& b, Tensor<T>& c) {
    gemm_raw(false, false, a.dim(0), b.dim(1), a.dim(1), T{1}, a.data(), a.dim(1), b.data(),
             b.dim(1), T{1}, c.data(), c.dim(1));
}

// C += A[m,k] * B[n,k]^T
template <typename T>
void matmul_nt_acc(const Tensor<T>& a, const Tensor<T>& b, Tensor<T>& c) {
    gemm_raw(false, true, a.dim(0), b.dim(0), a.dim(1), T{1}, a.data(), a.dim(1), b.data(),
             b.dim(1), T{1}, c.data(), c.dim(1));
}

}  // namespace groklab
