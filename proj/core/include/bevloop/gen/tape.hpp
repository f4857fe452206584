#pragma once

#include <cmath>
#include <cstdint>
#include <functional>
#include <vector>

#include "bevloop/gen/tensor.hpp"

namespace bevloop::gen {

// Reverse-mode tape. Every op appends a node holding the forward value and a
// closure that routes the node's gradient into its inputs. backward() walks
// the nodes once in reverse creation order, which is a valid topological
// order by construction. Gradients are dense and accumulate; leaves are
// plain inputs whose grads the caller reads back.
template <typename S>
class Tape {
  public:
    struct Var {
        int id = -1;
        bool valid() const { return id >= 0; }
    };

    Tape() = default;
    Tape(const Tape&) = delete;
    Tape& operator=(const Tape&) = delete;

    Var input(Tensor<S> value) {
        nodes_.push_back(Node{std::move(value), Tensor<S>{}, nullptr});
        return Var{static_cast<int>(nodes_.size()) - 1};
    }

    const Tensor<S>& val(Var v) const { return nodes_[static_cast<size_t>(v.id)].val; }

    // Gradient of a var after backward(); zeros if it never received one.
    const Tensor<S>& grad(Var v) {
        Node& n = nodes_[static_cast<size_t>(v.id)];
        ensure_grad(n);
        return n.grad;
    }

    size_t size() const { return nodes_.size(); }

    void backward(Var loss) {
        Node& ln = nodes_[static_cast<size_t>(loss.id)];
        if (ln.val.numel() != 1) throw InvalidArgument("backward needs a scalar loss");
        for (auto& n : nodes_) {
            if (!n.grad.data.empty())
                std::fill(n.grad.data.begin(), n.grad.data.end(), S(0));
        }
        ensure_grad(ln);
        ln.grad.data[0] = S(1);
        for (int i = loss.id; i >= 0; --i) {
            Node& n = nodes_[static_cast<size_t>(i)];
            if (n.back && !n.grad.data.empty()) n.back(*this);
        }
    }

    // ---- elementwise ----

    Var add(Var a, Var b) {
        check_same(a, b, "add");
        Tensor<S> out = val(a);
        const Tensor<S>& vb = val(b);
        for (size_t i = 0; i < out.numel(); ++i) out.data[i] += vb.data[i];
        return push(std::move(out), [a, b, id = next_id()](Tape& t) {
            const Tensor<S>& g = t.node(id).grad;
            t.accum(a, [&](size_t i) { return g.data[i]; });
            t.accum(b, [&](size_t i) { return g.data[i]; });
        });
    }

    Var sub(Var a, Var b) {
        check_same(a, b, "sub");
        Tensor<S> out = val(a);
        const Tensor<S>& vb = val(b);
        for (size_t i = 0; i < out.numel(); ++i) out.data[i] -= vb.data[i];
        return push(std::move(out), [a, b, id = next_id()](Tape& t) {
            const Tensor<S>& g = t.node(id).grad;
            t.accum(a, [&](size_t i) { return g.data[i]; });
            t.accum(b, [&](size_t i) { return -g.data[i]; });
        });
    }

    Var mul(Var a, Var b) {
        check_same(a, b, "mul");
        Tensor<S> out = val(a);
        const Tensor<S>& vb = val(b);
        for (size_t i = 0; i < out.numel(); ++i) out.data[i] *= vb.data[i];
        return push(std::move(out), [a, b, id = next_id()](Tape& t) {
            const Tensor<S>& g = t.node(id).grad;
            const Tensor<S>& va = t.val(a);
            const Tensor<S>& vb2 = t.val(b);
            t.accum(a, [&](size_t i) { return g.data[i] * vb2.data[i]; });
            t.accum(b, [&](size_t i) { return g.data[i] * va.data[i]; });
        });
    }

    Var scale(Var a, S k) {
        Tensor<S> out = val(a);
        for (S& x : out.data) x *= k;
        return push(std::move(out), [a, k, id = next_id()](Tape& t) {
            const Tensor<S>& g = t.node(id).grad;
            t.accum(a, [&](size_t i) { return k * g.data[i]; });
        });
    }

    Var gelu(Var a) {
        const S inv_sqrt2 = S(0.70710678118654752440);
        const S inv_sqrt2pi = S(0.39894228040143267794);
        Tensor<S> out = val(a);
        for (S& x : out.data) x = S(0.5) * x * (S(1) + std::erf(x * inv_sqrt2));
        return push(std::move(out), [a, inv_sqrt2, inv_sqrt2pi, id = next_id()](Tape& t) {
            const Tensor<S>& g = t.node(id).grad;
            const Tensor<S>& v = t.val(a);
            t.accum(a, [&](size_t i) {
                const S x = v.data[i];
                const S cdf = S(0.5) * (S(1) + std::erf(x * inv_sqrt2));
                const S pdf = inv_sqrt2pi * std::exp(S(-0.5) * x * x);
                return g.data[i] * (cdf + x * pdf);
            });
        });
    }

    // ---- matrix products ----

    Var matmul(Var a, Var b) {
        const Tensor<S>& va = val(a);
        const Tensor<S>& vb = val(b);
        if (va.ndim() != 2 || vb.ndim() != 2 || va.dim(1) != vb.dim(0))
            throw InvalidArgument("matmul shape mismatch " + va.shape_str() + " x " + vb.shape_str());
        const int m = va.dim(0), kk = va.dim(1), n = vb.dim(1);
        Tensor<S> out = Tensor<S>::zeros({m, n});
        gemm(va.data.data(), vb.data.data(), out.data.data(), m, kk, n, false, false);
        return push(std::move(out), [a, b, m, kk, n, id = next_id()](Tape& t) {
            const Tensor<S>& g = t.node(id).grad;
            const Tensor<S>& va2 = t.val(a);
            const Tensor<S>& vb2 = t.val(b);
            Node& na = t.node_of(a);
            Node& nb = t.node_of(b);
            t.ensure_grad(na);
            t.ensure_grad(nb);
            // ga += g (m,n) * b^T (n,kk)
            gemm(g.data.data(), vb2.data.data(), na.grad.data.data(), m, n, kk, false, true);
            // gb += a^T (kk,m) * g (m,n)
            gemm(va2.data.data(), g.data.data(), nb.grad.data.data(), kk, m, n, true, false);
        });
    }

    // [G,m,k] x [G,k,n] -> [G,m,n]
    Var bmm(Var a, Var b) {
        const Tensor<S>& va = val(a);
        const Tensor<S>& vb = val(b);
        if (va.ndim() != 3 || vb.ndim() != 3 || va.dim(0) != vb.dim(0) || va.dim(2) != vb.dim(1))
            throw InvalidArgument("bmm shape mismatch " + va.shape_str() + " x " + vb.shape_str());
        const int G = va.dim(0), m = va.dim(1), kk = va.dim(2), n = vb.dim(2);
        Tensor<S> out = Tensor<S>::zeros({G, m, n});
        for (int gi = 0; gi < G; ++gi)
            gemm(va.data.data() + static_cast<size_t>(gi) * m * kk,
                 vb.data.data() + static_cast<size_t>(gi) * kk * n,
                 out.data.data() + static_cast<size_t>(gi) * m * n, m, kk, n, false, false);
        return push(std::move(out), [a, b, G, m, kk, n, id = next_id()](Tape& t) {
            const Tensor<S>& g = t.node(id).grad;
            const Tensor<S>& va2 = t.val(a);
            const Tensor<S>& vb2 = t.val(b);
            Node& na = t.node_of(a);
            Node& nb = t.node_of(b);
            t.ensure_grad(na);
            t.ensure_grad(nb);
            for (int gi = 0; gi < G; ++gi) {
                const S* gp = g.data.data() + static_cast<size_t>(gi) * m * n;
                const S* ap = va2.data.data() + static_cast<size_t>(gi) * m * kk;
                const S* bp = vb2.data.data() + static_cast<size_t>(gi) * kk * n;
                gemm(gp, bp, na.grad.data.data() + static_cast<size_t>(gi) * m * kk, m, n, kk,
                     false, true);
                gemm(ap, gp, nb.grad.data.data() + static_cast<size_t>(gi) * kk * n, kk, m, n,
                     true, false);
            }
        });
    }

    // [G,m,k] x [G,n,k] -> [G,m,n] (second operand transposed)
    Var bmm_nt(Var a, Var b) {
        const Tensor<S>& va = val(a);
        const Tensor<S>& vb = val(b);
        if (va.ndim() != 3 || vb.ndim() != 3 || va.dim(0) != vb.dim(0) || va.dim(2) != vb.dim(2))
            throw InvalidArgument("bmm_nt shape mismatch " + va.shape_str() + " x " + vb.shape_str());
        const int G = va.dim(0), m = va.dim(1), kk = va.dim(2), n = vb.dim(1);
        Tensor<S> out = Tensor<S>::zeros({G, m, n});
        for (int gi = 0; gi < G; ++gi)
            gemm(va.data.data() + static_cast<size_t>(gi) * m * kk,
                 vb.data.data() + static_cast<size_t>(gi) * n * kk,
                 out.data.data() + static_cast<size_t>(gi) * m * n, m, kk, n, false, true);
        return push(std::move(out), [a, b, G, m, kk, n, id = next_id()](Tape& t) {
            const Tensor<S>& g = t.node(id).grad;
            const Tensor<S>& va2 = t.val(a);
            const Tensor<S>& vb2 = t.val(b);
            Node& na = t.node_of(a);
            Node& nb = t.node_of(b);
            t.ensure_grad(na);
            t.ensure_grad(nb);
            for (int gi = 0; gi < G; ++gi) {
                const S* gp = g.data.data() + static_cast<size_t>(gi) * m * n;
                const S* ap = va2.data.data() + static_cast<size_t>(gi) * m * kk;
                const S* bp = vb2.data.data() + static_cast<size_t>(gi) * n * kk;
                // ga += g (m,n) * b (n,kk)
                gemm(gp, bp, na.grad.data.data() + static_cast<size_t>(gi) * m * kk, m, n, kk,
                     false, false);
                // gb += g^T (n,m) * a (m,kk)
                gemm(gp, ap, nb.grad.data.data() + static_cast<size_t>(gi) * n * kk, n, m, kk,
                     true, false);
            }
        });
    }

    // ---- normalization and attention pieces ----

    Var softmax_lastdim(Var a) {
        const Tensor<S>& va = val(a);
        const int n = va.dim(va.ndim() - 1);
        const size_t rows = va.numel() / static_cast<size_t>(n);
        Tensor<S> out = va;
        for (size_t r = 0; r < rows; ++r) {
            S* p = out.data.data() + r * static_cast<size_t>(n);
            S mx = p[0];
            for (int i = 1; i < n; ++i) mx = std::max(mx, p[i]);
            S sum = S(0);
            for (int i = 0; i < n; ++i) {
                p[i] = std::exp(p[i] - mx);
                sum += p[i];
            }
            for (int i = 0; i < n; ++i) p[i] /= sum;
        }
        return push(std::move(out), [a, n, rows, id = next_id()](Tape& t) {
            const Tensor<S>& g = t.node(id).grad;
            const Tensor<S>& y = t.node(id).val;
            Node& na = t.node_of(a);
            t.ensure_grad(na);
            for (size_t r = 0; r < rows; ++r) {
                const S* yp = y.data.data() + r * static_cast<size_t>(n);
                const S* gp = g.data.data() + r * static_cast<size_t>(n);
                S dot = S(0);
                for (int i = 0; i < n; ++i) dot += yp[i] * gp[i];
                S* out_g = na.grad.data.data() + r * static_cast<size_t>(n);
                for (int i = 0; i < n; ++i) out_g[i] += yp[i] * (gp[i] - dot);
            }
        });
    }

    // Last-dim layernorm with learned gain and bias (both shaped [C]).
    Var layernorm(Var x, Var gamma, Var beta, S eps = S(1e-5)) {
        const Tensor<S>& vx = val(x);
        const int C = vx.dim(vx.ndim() - 1);
        if (val(gamma).numel() != static_cast<size_t>(C) ||
            val(beta).numel() != static_cast<size_t>(C))
            throw InvalidArgument("layernorm gain/bias must match last dim");
        const size_t rows = vx.numel() / static_cast<size_t>(C);
        Tensor<S> out = vx;
        const Tensor<S>& vg = val(gamma);
        const Tensor<S>& vb = val(beta);
        for (size_t r = 0; r < rows; ++r) {
            S* p = out.data.data() + r * static_cast<size_t>(C);
            const S* xp = vx.data.data() + r * static_cast<size_t>(C);
            S mean = S(0);
            for (int i = 0; i < C; ++i) mean += xp[i];
            mean /= S(C);
            S var = S(0);
            for (int i = 0; i < C; ++i) var += (xp[i] - mean) * (xp[i] - mean);
            var /= S(C);
            const S inv = S(1) / std::sqrt(var + eps);
            for (int i = 0; i < C; ++i) p[i] = vg.data[i] * ((xp[i] - mean) * inv) + vb.data[i];
        }
        return push(std::move(out), [x, gamma, beta, C, rows, eps, id = next_id()](Tape& t) {
            const Tensor<S>& g = t.node(id).grad;
            const Tensor<S>& vx2 = t.val(x);
            const Tensor<S>& vg2 = t.val(gamma);
            Node& nx = t.node_of(x);
            Node& ng = t.node_of(gamma);
            Node& nb = t.node_of(beta);
            t.ensure_grad(nx);
            t.ensure_grad(ng);
            t.ensure_grad(nb);
            for (size_t r = 0; r < rows; ++r) {
                const S* xp = vx2.data.data() + r * static_cast<size_t>(C);
                const S* gp = g.data.data() + r * static_cast<size_t>(C);
                S mean = S(0);
                for (int i = 0; i < C; ++i) mean += xp[i];
                mean /= S(C);
                S var = S(0);
                for (int i = 0; i < C; ++i) var += (xp[i] - mean) * (xp[i] - mean);
                var /= S(C);
                const S inv = S(1) / std::sqrt(var + eps);
                // dxhat, then the two reduction terms.
                S sum_dxhat = S(0), sum_dxhat_xhat = S(0);
                for (int i = 0; i < C; ++i) {
                    const S xhat = (xp[i] - mean) * inv;
                    const S dxhat = gp[i] * vg2.data[i];
                    sum_dxhat += dxhat;
                    sum_dxhat_xhat += dxhat * xhat;
                    ng.grad.data[i] += gp[i] * xhat;
                    nb.grad.data[i] += gp[i];
                }
                S* out_g = nx.grad.data.data() + r * static_cast<size_t>(C);
                for (int i = 0; i < C; ++i) {
                    const S xhat = (xp[i] - mean) * inv;
                    const S dxhat = gp[i] * vg2.data[i];
                    out_g[i] += inv * (dxhat - (sum_dxhat + xhat * sum_dxhat_xhat) / S(C));
                }
            }
        });
    }

    // ---- shape ops ----

    Var reshape(Var a, std::vector<int> shp) {
        if (Tensor<S>::count(shp) != val(a).numel())
            throw InvalidArgument("reshape element count mismatch");
        Tensor<S> out;
        out.shape = std::move(shp);
        out.data = val(a).data;
        return push(std::move(out), [a, id = next_id()](Tape& t) {
            const Tensor<S>& g = t.node(id).grad;
            t.accum(a, [&](size_t i) { return g.data[i]; });
        });
    }

    Var permute(Var a, std::vector<int> perm) {
        const Tensor<S>& va = val(a);
        const int nd = va.ndim();
        if (static_cast<int>(perm.size()) != nd) throw InvalidArgument("permute rank mismatch");
        std::vector<int> out_shape(static_cast<size_t>(nd));
        for (int i = 0; i < nd; ++i) out_shape[static_cast<size_t>(i)] = va.dim(perm[static_cast<size_t>(i)]);
        const std::vector<size_t> fwd = permute_map(va.shape, perm);
        Tensor<S> out = Tensor<S>::zeros(out_shape);
        for (size_t i = 0; i < out.numel(); ++i) out.data[i] = va.data[fwd[i]];
        return push(std::move(out), [a, fwd, id = next_id()](Tape& t) {
            const Tensor<S>& g = t.node(id).grad;
            Node& na = t.node_of(a);
            t.ensure_grad(na);
            for (size_t i = 0; i < g.numel(); ++i) na.grad.data[fwd[i]] += g.data[i];
        });
    }

    // Gather rows: table [V,C], ids -> [N,C]. Out-of-range ids throw.
    Var embed(Var table, std::vector<int> ids) {
        const Tensor<S>& vt = val(table);
        if (vt.ndim() != 2) throw InvalidArgument("embed table must be 2-d");
        const int V = vt.dim(0), C = vt.dim(1);
        Tensor<S> out = Tensor<S>::zeros({static_cast<int>(ids.size()), C});
        for (size_t r = 0; r < ids.size(); ++r) {
            if (ids[r] < 0 || ids[r] >= V) throw InvalidArgument("embed id out of range");
            for (int c = 0; c < C; ++c)
                out.data[r * static_cast<size_t>(C) + c] =
                    vt.data[static_cast<size_t>(ids[r]) * C + c];
        }
        return push(std::move(out), [table, ids = std::move(ids), C, id = next_id()](Tape& t) {
            const Tensor<S>& g = t.node(id).grad;
            Node& nt = t.node_of(table);
            t.ensure_grad(nt);
            for (size_t r = 0; r < ids.size(); ++r)
                for (int c = 0; c < C; ++c)
                    nt.grad.data[static_cast<size_t>(ids[r]) * C + c] +=
                        g.data[r * static_cast<size_t>(C) + c];
        });
    }

    // Concatenate along dim; all other dims must agree.
    Var concat(Var a, Var b, int dim) {
        const Tensor<S>& va = val(a);
        const Tensor<S>& vb = val(b);
        if (va.ndim() != vb.ndim()) throw InvalidArgument("concat rank mismatch");
        const int nd = va.ndim();
        if (dim < 0 || dim >= nd) throw InvalidArgument("concat dim out of range");
        for (int i = 0; i < nd; ++i)
            if (i != dim && va.dim(i) != vb.dim(i)) throw InvalidArgument("concat shape mismatch");
        std::vector<int> out_shape = va.shape;
        out_shape[static_cast<size_t>(dim)] += vb.dim(dim);
        size_t outer = 1, inner = 1;
        for (int i = 0; i < dim; ++i) outer *= static_cast<size_t>(va.dim(i));
        for (int i = dim + 1; i < nd; ++i) inner *= static_cast<size_t>(va.dim(i));
        const size_t stride_a = static_cast<size_t>(va.dim(dim)) * inner;
        const size_t stride_b = static_cast<size_t>(vb.dim(dim)) * inner;
        Tensor<S> out = Tensor<S>::zeros(out_shape);
        for (size_t o = 0; o < outer; ++o) {
            std::copy_n(va.data.data() + o * stride_a, stride_a,
                        out.data.data() + o * (stride_a + stride_b));
            std::copy_n(vb.data.data() + o * stride_b, stride_b,
                        out.data.data() + o * (stride_a + stride_b) + stride_a);
        }
        return push(std::move(out),
                    [a, b, outer, stride_a, stride_b, id = next_id()](Tape& t) {
                        const Tensor<S>& g = t.node(id).grad;
                        Node& na = t.node_of(a);
                        Node& nb = t.node_of(b);
                        t.ensure_grad(na);
                        t.ensure_grad(nb);
                        for (size_t o = 0; o < outer; ++o) {
                            const S* gp = g.data.data() + o * (stride_a + stride_b);
                            for (size_t i = 0; i < stride_a; ++i)
                                na.grad.data[o * stride_a + i] += gp[i];
                            for (size_t i = 0; i < stride_b; ++i)
                                nb.grad.data[o * stride_b + i] += gp[stride_a + i];
                        }
                    });
    }

    // x [N,C] plus a row [C] (or [1,C]) added to every row.
    Var row_broadcast_add(Var x, Var row) {
        const Tensor<S>& vx = val(x);
        const Tensor<S>& vr = val(row);
        const int C = vx.dim(vx.ndim() - 1);
        if (vr.numel() != static_cast<size_t>(C))
            throw InvalidArgument("row_broadcast_add row must match last dim");
        const size_t rows = vx.numel() / static_cast<size_t>(C);
        Tensor<S> out = vx;
        for (size_t r = 0; r < rows; ++r)
            for (int c = 0; c < C; ++c) out.data[r * static_cast<size_t>(C) + c] += vr.data[c];
        return push(std::move(out), [x, row, C, rows, id = next_id()](Tape& t) {
            const Tensor<S>& g = t.node(id).grad;
            Node& nx = t.node_of(x);
            Node& nr = t.node_of(row);
            t.ensure_grad(nx);
            t.ensure_grad(nr);
            for (size_t i = 0; i < g.numel(); ++i) nx.grad.data[i] += g.data[i];
            for (size_t r = 0; r < rows; ++r)
                for (int c = 0; c < C; ++c)
                    nr.grad.data[c] += g.data[r * static_cast<size_t>(C) + c];
        });
    }

    // Repeat each entry of the leading dim k times (b-major):
    // [B, rest...] -> [B*k, rest...], out[b*k + j] = x[b].
    Var repeat_interleave0(Var a, int k) {
        const Tensor<S>& va = val(a);
        if (k <= 0) throw InvalidArgument("repeat count must be positive");
        const size_t inner = va.numel() / static_cast<size_t>(va.dim(0));
        std::vector<int> out_shape = va.shape;
        out_shape[0] *= k;
        Tensor<S> out = Tensor<S>::zeros(out_shape);
        for (int b = 0; b < va.dim(0); ++b)
            for (int j = 0; j < k; ++j)
                std::copy_n(va.data.data() + static_cast<size_t>(b) * inner, inner,
                            out.data.data() + (static_cast<size_t>(b) * k + j) * inner);
        return push(std::move(out), [a, k, inner, id = next_id()](Tape& t) {
            const Tensor<S>& g = t.node(id).grad;
            Node& na = t.node_of(a);
            t.ensure_grad(na);
            const int B = t.val(a).dim(0);
            for (int b = 0; b < B; ++b)
                for (int j = 0; j < k; ++j)
                    for (size_t i = 0; i < inner; ++i)
                        na.grad.data[static_cast<size_t>(b) * inner + i] +=
                            g.data[(static_cast<size_t>(b) * k + j) * inner + i];
        });
    }

    // Zero every row whose keep flag is false. x is treated as [N, C] with
    // N = numel / lastdim.
    Var mask_rows(Var x, std::vector<uint8_t> keep) {
        const Tensor<S>& vx = val(x);
        const int C = vx.dim(vx.ndim() - 1);
        const size_t rows = vx.numel() / static_cast<size_t>(C);
        if (keep.size() != rows) throw InvalidArgument("mask_rows flag count mismatch");
        Tensor<S> out = vx;
        for (size_t r = 0; r < rows; ++r) {
            if (!keep[r])
                std::fill_n(out.data.data() + r * static_cast<size_t>(C), C, S(0));
        }
        return push(std::move(out), [x, keep = std::move(keep), C, id = next_id()](Tape& t) {
            const Tensor<S>& g = t.node(id).grad;
            Node& nx = t.node_of(x);
            t.ensure_grad(nx);
            for (size_t r = 0; r < keep.size(); ++r) {
                if (!keep[r]) continue;
                for (int c = 0; c < C; ++c)
                    nx.grad.data[r * static_cast<size_t>(C) + c] +=
                        g.data[r * static_cast<size_t>(C) + c];
            }
        });
    }

    // Mean squared error against a constant target.
    Var mse(Var pred, const Tensor<S>& target) {
        const Tensor<S>& vp = val(pred);
        if (!vp.same_shape(target)) throw InvalidArgument("mse shape mismatch");
        S sum = S(0);
        for (size_t i = 0; i < vp.numel(); ++i) {
            const S d = vp.data[i] - target.data[i];
            sum += d * d;
        }
        const S n = S(vp.numel());
        Tensor<S> out({1}, {sum / n});
        return push(std::move(out), [pred, target, n, id = next_id()](Tape& t) {
            const S g = t.node(id).grad.data[0];
            const Tensor<S>& vp2 = t.val(pred);
            t.accum(pred, [&](size_t i) {
                return g * S(2) * (vp2.data[i] - target.data[i]) / n;
            });
        });
    }

  private:
    struct Node {
        Tensor<S> val;
        Tensor<S> grad;
        std::function<void(Tape&)> back;
    };

    std::vector<Node> nodes_;

    int next_id() const { return static_cast<int>(nodes_.size()); }

    Var push(Tensor<S> out, std::function<void(Tape&)> back) {
        nodes_.push_back(Node{std::move(out), Tensor<S>{}, std::move(back)});
        return Var{static_cast<int>(nodes_.size()) - 1};
    }

    Node& node(int id) { return nodes_[static_cast<size_t>(id)]; }
    Node& node_of(Var v) { return nodes_[static_cast<size_t>(v.id)]; }

    void ensure_grad(Node& n) {
        if (n.grad.data.empty()) n.grad = Tensor<S>::zeros(n.val.shape);
    }

    template <typename F>
    void accum(Var v, F f) {
        Node& n = node_of(v);
        ensure_grad(n);
        for (size_t i = 0; i < n.grad.numel(); ++i) n.grad.data[i] += f(i);
    }

    void check_same(Var a, Var b, const char* op) {
        if (!val(a).same_shape(val(b)))
            throw InvalidArgument(std::string(op) + " shape mismatch " + val(a).shape_str() +
                                  " vs " + val(b).shape_str());
    }

    // C += or = A*B with optional transposes; accumulate into C.
    static void gemm(const S* A, const S* B, S* C, int m, int k, int n, bool ta, bool tb) {
        for (int i = 0; i < m; ++i) {
            for (int p = 0; p < k; ++p) {
                const S av = ta ? A[static_cast<size_t>(p) * m + i] : A[static_cast<size_t>(i) * k + p];
                if (av == S(0)) continue;
                const S* brow = tb ? nullptr : B + static_cast<size_t>(p) * n;
                S* crow = C + static_cast<size_t>(i) * n;
                if (tb) {
                    for (int j = 0; j < n; ++j) crow[j] += av * B[static_cast<size_t>(j) * k + p];
                } else {
                    for (int j = 0; j < n; ++j) crow[j] += av * brow[j];
                }
            }
        }
    }

    static std::vector<size_t> permute_map(const std::vector<int>& in_shape,
                                           const std::vector<int>& perm) {
        const int nd = static_cast<int>(in_shape.size());
        std::vector<size_t> in_strides(static_cast<size_t>(nd), 1);
        for (int i = nd - 2; i >= 0; --i)
            in_strides[static_cast<size_t>(i)] =
                in_strides[static_cast<size_t>(i + 1)] * static_cast<size_t>(in_shape[static_cast<size_t>(i + 1)]);
        std::vector<int> out_shape(static_cast<size_t>(nd));
        for (int i = 0; i < nd; ++i) out_shape[static_cast<size_t>(i)] = in_shape[static_cast<size_t>(perm[static_cast<size_t>(i)])];
        size_t total = 1;
        for (int d : out_shape) total *= static_cast<size_t>(d);
        std::vector<size_t> map(total);
        std::vector<int> idx(static_cast<size_t>(nd), 0);
        for (size_t o = 0; o < total; ++o) {
            size_t src = 0;
            for (int i = 0; i < nd; ++i)
                src += in_strides[static_cast<size_t>(perm[static_cast<size_t>(i)])] *
                       static_cast<size_t>(idx[static_cast<size_t>(i)]);
            map[o] = src;
            for (int i = nd - 1; i >= 0; --i) {
                if (++idx[static_cast<size_t>(i)] < out_shape[static_cast<size_t>(i)]) break;
                idx[static_cast<size_t>(i)] = 0;
            }
        }
        return map;
    }
};

}  // namespace bevloop::gen
