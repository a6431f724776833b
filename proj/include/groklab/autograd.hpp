#pragma once

// Reverse-mode tape over coarse tensor ops. Nodes are created in topological
// order by construction; backward() walks them in reverse. Ops are sized for
// a small decoder-only LM: gemms, layer norm, fused causal attention and a
// fused softmax cross-entropy.

#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <stdexcept>
#include <utility>
#include <vector>

#include "groklab/tensor.hpp"

namespace groklab {

template <typename T>
class Tape {
public:
    using Ref = int32_t;

    Ref leaf(Tensor<T> value, bool needs_grad) {
        return push(std::move(value), needs_grad, nullptr);
    }

    const Tensor<T>& value(Ref r) const { return nodes_[check(r)].value; }

    // Valid after backward(); zero tensor if the node was never reached.
    const Tensor<T>& grad(Ref r) {
        Node& n = nodes_[check(r)];
        ensure_grad(n);
        return n.grad;
    }

    size_t size() const { return nodes_.size(); }

    void clear() { nodes_.clear(); }

    void backward(Ref loss) {
        Node& top = nodes_[check(loss)];
        if (!top.needs_grad) throw std::logic_error("backward: loss does not require grad");
        ensure_grad(top);
        top.grad.fill(T{1});
        for (size_t i = nodes_.size(); i-- > 0;) {
            Node& n = nodes_[i];
            if (n.needs_grad && n.backward && !n.grad.empty()) n.backward();
        }
    }

    // ---- ops ----

    // C = A[m,k] * B[k,n]
    Ref matmul(Ref a, Ref b) {
        Tensor<T> c = matmul_nn(value(a), value(b));
        Ref r = push(std::move(c), needs(a) || needs(b), [this, a, b](Ref self) {
            const Tensor<T>& g = nodes_[self].grad;
            if (needs(a)) matmul_nt_acc(g, value(b), grad_buf(a));
            if (needs(b)) matmul_tn_acc(value(a), g, grad_buf(b));
        });
        return r;
    }

    // C = A[m,k] * B[n,k]^T  (used for tied-embedding output projection)
    Ref matmul_transposed(Ref a, Ref b) {
        Tensor<T> c = matmul_nt(value(a), value(b));
        Ref r = push(std::move(c), needs(a) || needs(b), [this, a, b](Ref self) {
            const Tensor<T>& g = nodes_[self].grad;
            if (needs(a)) matmul_nn_acc(g, value(b), grad_buf(a));
            if (needs(b)) matmul_tn_acc(g, value(a), grad_buf(b));
        });
        return r;
    }

    Ref add(Ref a, Ref b) {
        if (value(a).size() != value(b).size())
            throw std::invalid_argument("Tape::add: shape mismatch");
        Tensor<T> c = value(a);
        c.add_inplace(value(b));
        return push(std::move(c), needs(a) || needs(b), [this, a, b](Ref self) {
            const Tensor<T>& g = nodes_[self].grad;
            if (needs(a)) grad_buf(a).add_inplace(g);
            if (needs(b)) grad_buf(b).add_inplace(g);
        });
    }

    // x[N,d] + bias[d] broadcast over rows
    Ref add_bias(Ref x, Ref bias) {
        const Tensor<T>& xv = value(x);
        const Tensor<T>& bv = value(bias);
        if (xv.rank() != 2 || bv.size() != xv.dim(1))
            throw std::invalid_argument("Tape::add_bias: shape mismatch");
        Tensor<T> out = xv;
        for (int64_t i = 0; i < out.dim(0); ++i) {
            T* r = out.row(i);
            for (int64_t j = 0; j < out.dim(1); ++j) r[j] += bv[j];
        }
        return push(std::move(out), needs(x) || needs(bias), [this, x, bias](Ref self) {
            const Tensor<T>& g = nodes_[self].grad;
            if (needs(x)) grad_buf(x).add_inplace(g);
            if (needs(bias)) {
                Tensor<T>& gb = grad_buf(bias);
                for (int64_t i = 0; i < g.dim(0); ++i) {
                    const T* r = g.row(i);
                    for (int64_t j = 0; j < g.dim(1); ++j) gb[j] += r[j];
                }
            }
        });
    }

    Ref scale(Ref x, T c) {
        Tensor<T> out = value(x);
        out.scale_inplace(c);
        return push(std::move(out), needs(x), [this, x, c](Ref self) {
            if (needs(x)) grad_buf(x).add_inplace(nodes_[self].grad, c);
        });
    }

    Ref gelu(Ref x) {
        const Tensor<T>& xv = value(x);
        Tensor<T> out(xv.shape());
        constexpr double kC = 0.7978845608028654;  // sqrt(2/pi)
        constexpr double kA = 0.044715;
        for (int64_t i = 0; i < xv.size(); ++i) {
            double v = static_cast<double>(xv[i]);
            out[i] = static_cast<T>(0.5 * v * (1.0 + std::tanh(kC * (v + kA * v * v * v))));
        }
        return push(std::move(out), needs(x), [this, x](Ref self) {
            if (!needs(x)) return;
            const Tensor<T>& g = nodes_[self].grad;
            const Tensor<T>& xv = value(x);
            Tensor<T>& gx = grad_buf(x);
            constexpr double kC = 0.7978845608028654;
            constexpr double kA = 0.044715;
            for (int64_t i = 0; i < xv.size(); ++i) {
                double v = static_cast<double>(xv[i]);
                double u = kC * (v + kA * v * v * v);
                double t = std::tanh(u);
                double du = kC * (1.0 + 3.0 * kA * v * v);
                double d = 0.5 * (1.0 + t) + 0.5 * v * (1.0 - t * t) * du;
                gx[i] += static_cast<T>(static_cast<double>(g[i]) * d);
            }
        });
    }

    // Row-wise layer norm with learnable gain/bias.
    Ref layer_norm(Ref x, Ref gain, Ref bias, T eps) {
        const Tensor<T>& xv = value(x);
        const Tensor<T>& gv = value(gain);
        const Tensor<T>& bv = value(bias);
        if (xv.rank() != 2 || gv.size() != xv.dim(1) || bv.size() != xv.dim(1))
            throw std::invalid_argument("Tape::layer_norm: shape mismatch");
        const int64_t n = xv.dim(0), d = xv.dim(1);
        Tensor<T> out({n, d});
        auto xhat = std::make_shared<Tensor<T>>(std::vector<int64_t>{n, d});
        auto inv_std = std::make_shared<Tensor<T>>(std::vector<int64_t>{n});
        for (int64_t i = 0; i < n; ++i) {
            const T* r = xv.row(i);
            double mu = 0.0;
            for (int64_t j = 0; j < d; ++j) mu += r[j];
            mu /= static_cast<double>(d);
            double var = 0.0;
            for (int64_t j = 0; j < d; ++j) {
                double c = r[j] - mu;
                var += c * c;
            }
            var /= static_cast<double>(d);
            double is = 1.0 / std::sqrt(var + static_cast<double>(eps));
            (*inv_std)[i] = static_cast<T>(is);
            T* xh = xhat->row(i);
            T* o = out.row(i);
            for (int64_t j = 0; j < d; ++j) {
                xh[j] = static_cast<T>((r[j] - mu) * is);
                o[j] = xh[j] * gv[j] + bv[j];
            }
        }
        return push(std::move(out), needs(x) || needs(gain) || needs(bias),
                    [this, x, gain, bias, xhat, inv_std](Ref self) {
                        const Tensor<T>& g = nodes_[self].grad;
                        const Tensor<T>& gv = value(gain);
                        const int64_t n = g.dim(0), d = g.dim(1);
                        if (needs(gain) || needs(bias)) {
                            Tensor<T>* gg = needs(gain) ? &grad_buf(gain) : nullptr;
                            Tensor<T>* gb = needs(bias) ? &grad_buf(bias) : nullptr;
                            for (int64_t i = 0; i < n; ++i) {
                                const T* gr = g.row(i);
                                const T* xh = xhat->row(i);
                                for (int64_t j = 0; j < d; ++j) {
                                    if (gg) (*gg)[j] += gr[j] * xh[j];
                                    if (gb) (*gb)[j] += gr[j];
                                }
                            }
                        }
                        if (needs(x)) {
                            Tensor<T>& gx = grad_buf(x);
                            for (int64_t i = 0; i < n; ++i) {
                                const T* gr = g.row(i);
                                const T* xh = xhat->row(i);
                                double m1 = 0.0, m2 = 0.0;
                                for (int64_t j = 0; j < d; ++j) {
                                    double dxh = static_cast<double>(gr[j]) * gv[j];
                                    m1 += dxh;
                                    m2 += dxh * xh[j];
                                }
                                m1 /= static_cast<double>(d);
                                m2 /= static_cast<double>(d);
                                T* gxr = gx.row(i);
                                double is = (*inv_std)[i];
                                for (int64_t j = 0; j < d; ++j) {
                                    double dxh = static_cast<double>(gr[j]) * gv[j];
                                    gxr[j] += static_cast<T>(is * (dxh - m1 - xh[j] * m2));
                                }
                            }
                        }
                    });
    }

    // out[i,:] = table[tokens[i],:] + pos_table[positions[i],:]
    Ref embedding(Ref table, Ref pos_table, std::vector<int32_t> tokens,
                  std::vector<int32_t> positions) {
        const Tensor<T>& tv = value(table);
        const Tensor<T>& pv = value(pos_table);
        if (tokens.size() != positions.size())
            throw std::invalid_argument("Tape::embedding: token/position length mismatch");
        const int64_t n = static_cast<int64_t>(tokens.size());
        const int64_t d = tv.dim(1);
        Tensor<T> out({n, d});
        for (int64_t i = 0; i < n; ++i) {
            const T* tr = tv.row(tokens[static_cast<size_t>(i)]);
            const T* pr = pv.row(positions[static_cast<size_t>(i)]);
            T* o = out.row(i);
            for (int64_t j = 0; j < d; ++j) o[j] = tr[j] + pr[j];
        }
        auto toks = std::make_shared<std::vector<int32_t>>(std::move(tokens));
        auto poss = std::make_shared<std::vector<int32_t>>(std::move(positions));
        return push(std::move(out), needs(table) || needs(pos_table),
                    [this, table, pos_table, toks, poss](Ref self) {
                        const Tensor<T>& g = nodes_[self].grad;
                        const int64_t n = g.dim(0), d = g.dim(1);
                        if (needs(table)) {
                            Tensor<T>& gt = grad_buf(table);
                            for (int64_t i = 0; i < n; ++i) {
                                T* dst = gt.row((*toks)[static_cast<size_t>(i)]);
                                const T* src = g.row(i);
                                for (int64_t j = 0; j < d; ++j) dst[j] += src[j];
                            }
                        }
                        if (needs(pos_table)) {
                            Tensor<T>& gp = grad_buf(pos_table);
                            for (int64_t i = 0; i < n; ++i) {
                                T* dst = gp.row((*poss)[static_cast<size_t>(i)]);
                                const T* src = g.row(i);
                                for (int64_t j = 0; j < d; ++j) dst[j] += src[j];
                            }
                        }
                    });
    }

    // Multi-head causal self-attention over packed sequences.
    // q,k,v: [N, d] with sequences at [offsets[s], offsets[s+1]).
    // If capture != nullptr, softmax rows are appended per (seq, head, position),
    // each row holding the k+1 probabilities over positions <= k.
    Ref causal_attention(Ref q, Ref k, Ref v, std::vector<int32_t> offsets, int n_heads,
                         std::vector<std::vector<T>>* capture = nullptr) {
        const Tensor<T>& qv = value(q);
        const Tensor<T>& kv = value(k);
        const Tensor<T>& vv = value(v);
        const int64_t n = qv.dim(0), d = qv.dim(1);
        if (d % n_heads != 0)
            throw std::invalid_argument("causal_attention: d_model not divisible by heads");
        const int64_t dh = d / n_heads;
        const double scale = 1.0 / std::sqrt(static_cast<double>(dh));
        Tensor<T> out({n, d});
        // probs stored per (seq, head) as a dense TxT lower-triangular block
        auto probs = std::make_shared<std::vector<Tensor<T>>>();
        auto offs = std::make_shared<std::vector<int32_t>>(std::move(offsets));
        const size_t n_seq = offs->size() - 1;
        for (size_t s = 0; s < n_seq; ++s) {
            const int64_t o = (*offs)[s];
            const int64_t t_len = (*offs)[s + 1] - o;
            for (int h = 0; h < n_heads; ++h) {
                Tensor<T> p({t_len, t_len});
                for (int64_t i = 0; i < t_len; ++i) {
                    const T* qi = qv.row(o + i) + h * dh;
                    double mx = -std::numeric_limits<double>::infinity();
                    std::vector<double> sc(static_cast<size_t>(i) + 1);
                    for (int64_t j = 0; j <= i; ++j) {
                        const T* kj = kv.row(o + j) + h * dh;
                        double dot = 0.0;
                        for (int64_t e = 0; e < dh; ++e) dot += static_cast<double>(qi[e]) * kj[e];
                        sc[static_cast<size_t>(j)] = dot * scale;
                        mx = std::max(mx, sc[static_cast<size_t>(j)]);
                    }
                    double z = 0.0;
                    for (int64_t j = 0; j <= i; ++j) z += std::exp(sc[static_cast<size_t>(j)] - mx);
                    T* pr = p.row(i);
                    T* oi = out.row(o + i) + h * dh;
                    for (int64_t j = 0; j <= i; ++j) {
                        T pij = static_cast<T>(std::exp(sc[static_cast<size_t>(j)] - mx) / z);
                        pr[j] = pij;
                        const T* vj = vv.row(o + j) + h * dh;
                        for (int64_t e = 0; e < dh; ++e) oi[e] += pij * vj[e];
                    }
                    if (capture) {
                        capture->emplace_back(pr, pr + i + 1);
                    }
                }
                probs->push_back(std::move(p));
            }
        }
        return push(std::move(out), needs(q) || needs(k) || needs(v),
                    [this, q, k, v, offs, probs, n_heads, dh, scale](Ref self) {
                        const Tensor<T>& g = nodes_[self].grad;
                        const Tensor<T>& qv = value(q);
                        const Tensor<T>& kv = value(k);
                        const Tensor<T>& vv = value(v);
                        Tensor<T>& gq = grad_buf(q);
                        Tensor<T>& gk = grad_buf(k);
                        Tensor<T>& gv_ = grad_buf(v);
                        const size_t n_seq = offs->size() - 1;
                        for (size_t s = 0; s < n_seq; ++s) {
                            const int64_t o = (*offs)[s];
                            const int64_t t_len = (*offs)[s + 1] - o;
                            for (int h = 0; h < n_heads; ++h) {
                                const Tensor<T>& p = (*probs)[s * n_heads + h];
                                for (int64_t i = 0; i < t_len; ++i) {
                                    const T* gi = g.row(o + i) + h * dh;
                                    const T* pr = p.row(i);
                                    // dP and the softmax jacobian row correction
                                    std::vector<double> dp(static_cast<size_t>(i) + 1);
                                    double corr = 0.0;
                                    for (int64_t j = 0; j <= i; ++j) {
                                        const T* vj = vv.row(o + j) + h * dh;
                                        double acc = 0.0;
                                        for (int64_t e = 0; e < dh; ++e)
                                            acc += static_cast<double>(gi[e]) * vj[e];
                                        dp[static_cast<size_t>(j)] = acc;
                                        corr += acc * pr[j];
                                        // dV
                                        T* gvj = gv_.row(o + j) + h * dh;
                                        for (int64_t e = 0; e < dh; ++e) gvj[e] += pr[j] * gi[e];
                                    }
                                    T* gqi = gq.row(o + i) + h * dh;
                                    const T* qi = qv.row(o + i) + h * dh;
                                    for (int64_t j = 0; j <= i; ++j) {
                                        double ds =
                                            pr[j] * (dp[static_cast<size_t>(j)] - corr) * scale;
                                        const T* kj = kv.row(o + j) + h * dh;
                                        T* gkj = gk.row(o + j) + h * dh;
                                        for (int64_t e = 0; e < dh; ++e) {
                                            gqi[e] += static_cast<T>(ds * kj[e]);
                                            gkj[e] += static_cast<T>(ds * qi[e]);
                                        }
                                    }
                                }
                            }
                        }
                    });
    }

    // Mean negative log-likelihood over unmasked positions (fused softmax+NLL).
    Ref cross_entropy(Ref logits, std::vector<int32_t> targets, std::vector<uint8_t> mask) {
        const Tensor<T>& z = value(logits);
        const int64_t n = z.dim(0), vsz = z.dim(1);
        if (static_cast<int64_t>(targets.size()) != n || static_cast<int64_t>(mask.size()) != n)
            throw std::invalid_argument("cross_entropy: target/mask length mismatch");
        int64_t m = 0;
        for (uint8_t b : mask) m += b ? 1 : 0;
        if (m == 0) throw std::invalid_argument("cross_entropy: all positions masked");
        auto probs = std::make_shared<Tensor<T>>(std::vector<int64_t>{n, vsz});
        double loss = 0.0;
        for (int64_t i = 0; i < n; ++i) {
            const T* r = z.row(i);
            double mx = r[0];
            for (int64_t j = 1; j < vsz; ++j) mx = std::max(mx, static_cast<double>(r[j]));
            double zsum = 0.0;
            for (int64_t j = 0; j < vsz; ++j) zsum += std::exp(static_cast<double>(r[j]) - mx);
            T* pr = probs->row(i);
            for (int64_t j = 0; j < vsz; ++j)
                pr[j] = static_cast<T>(std::exp(static_cast<double>(r[j]) - mx) / zsum);
            if (mask[static_cast<size_t>(i)]) {
                int32_t t = targets[static_cast<size_t>(i)];
                if (t < 0 || t >= vsz) throw std::invalid_argument("cross_entropy: target id out of range");
                loss += (std::log(zsum) + mx) - static_cast<double>(r[t]);
            }
        }
        Tensor<T> out({int64_t{1}});
        out[0] = static_cast<T>(loss / static_cast<double>(m));
        auto tg = std::make_shared<std::vector<int32_t>>(std::move(targets));
        auto mk = std::make_shared<std::vector<uint8_t>>(std::move(mask));
        return push(std::move(out), needs(logits), [this, logits, probs, tg, mk, m](Ref self) {
            if (!needs(logits)) return;
            const T go = nodes_[self].grad[0];
            Tensor<T>& gl = grad_buf(logits);
            const int64_t n = gl.dim(0), vsz = gl.dim(1);
            const T inv_m = static_cast<T>(1.0 / static_cast<double>(m));
            for (int64_t i = 0; i < n; ++i) {
                if (!(*mk)[static_cast<size_t>(i)]) continue;
                const T* pr = probs->row(i);
                T* gr = gl.row(i);
                const int32_t t = (*tg)[static_cast<size_t>(i)];
                for (int64_t j = 0; j < vsz; ++j) {
                    T delta = (j == t) ? T{1} : T{0};
                    gr[j] += go * inv_m * (pr[j] - delta);
                }
            }
        });
    }

    // Inverted dropout; identity when rate == 0.
    Ref dropout(Ref x, T rate, Rng& rng) {
        if (rate <= T{0}) return x;
        if (rate >= T{1}) throw std::invalid_argument("dropout: rate must be < 1");
        const Tensor<T>& xv = value(x);
        auto keep = std::make_shared<std::vector<uint8_t>>(static_cast<size_t>(xv.size()));
        const T inv_keep = T{1} / (T{1} - rate);
        Tensor<T> out(xv.shape());
        for (int64_t i = 0; i < xv.size(); ++i) {
            bool kept = !rng.bernoulli(static_cast<double>(rate));
            (*keep)[static_cast<size_t>(i)] = kept ? 1 : 0;
            out[i] = kept ? xv[i] * inv_keep : T{0};
        }
        return push(std::move(out), needs(x), [this, x, keep, inv_keep](Ref self) {
            if (!needs(x)) return;
            const Tensor<T>& g = nodes_[self].grad;
            Tensor<T>& gx = grad_buf(x);
            for (int64_t i = 0; i < g.size(); ++i)
                if ((*keep)[static_cast<size_t>(i)]) gx[i] += g[i] * inv_keep;
        });
    }

private:
    struct Node {
        Tensor<T> value;
        Tensor<T> grad;
        std::function<void()> backward;
        bool needs_grad = false;
    };

    bool needs(Ref r) const { return nodes_[check(r)].needs_grad; }

    Tensor<T>& grad_buf(Ref r) {
        Node& n = nodes_[check(r)];
        ensure_grad(n);
        return n.grad;
    }

    void ensure_grad(Node& n) {
        if (n.grad.empty() && n.value.size() > 0) n.grad = Tensor<T>(n.value.shape());
    }

    size_t check(Ref r) const {
        if (r < 0 || static_cast<size_t>(r) >= nodes_.size())
            throw std::out_of_range("Tape: bad node ref");
        return static_cast<size_t>(r);
    }

    template <typename F>
    Ref push(Tensor<T> v, bool needs_grad, F&& back) {
        Node n;
        n.value = std::move(v);
        n.needs_grad = needs_grad;
        Ref r = static_cast<Ref>(nodes_.size());
        if constexpr (!std::is_same_v<std::decay_t<F>, std::nullptr_t>) {
            if (needs_grad) {
                n.backward = [this, r, fn = std::forward<F>(back)]() { fn(r); };
            }
        }
        nodes_.push_back(std::move(n));
        return r;
    }

    Ref push(Tensor<T> v, bool needs_grad, std::nullptr_t) {
        Node n;
        n.value = std::move(v);
        n.needs_grad = needs_grad;
        nodes_.push_back(std::move(n));
        return static_cast<Ref>(nodes_.size() - 1);
    }

    std::vector<Node> nodes_;
};

}  // namespace groklab
