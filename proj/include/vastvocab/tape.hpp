#pragma once

#include <cstddef>
#include <functional>
#include <utility>
#include <vector>

#include "vastvocab/losses.hpp"
#include "vastvocab/matrix.hpp"

namespace vastvocab {

// Handle to a matrix recorded on a Tape.
struct Var {
    int id = -1;
    bool valid() const { return id >= 0; }
};

// Reverse-mode autodiff over dense matrices. Every operation records a node
// whose parents precede it, so walking the node list backwards visits each
// node exactly once in reverse topological order. Gradients accumulate by
// summation, which makes shared subexpressions come out right.
//
// A Tape is single-writer; concurrent use is only safe across disjoint tapes.
class Tape {
public:
    Tape() = default;
    Tape(const Tape&) = delete;
    Tape& operator=(const Tape&) = delete;

    Var input(DenseMatrix m) {
        return push(std::move(m), {}, nullptr);
    }

    const DenseMatrix& value(Var v) const { return vals_[check(v)]; }

    // Zero-shaped matrix if the var never received gradient.
    const DenseMatrix& grad(Var v) const {
        static const DenseMatrix empty;
        const auto id = check(v);
        return grads_[id].empty() ? empty : grads_[id];
    }

    std::size_t node_count() const { return vals_.size(); }

    // ---- primitives ------------------------------------------------------

    Var matmul(Var a, Var b) {
        DenseMatrix c = matmul_plain(value(a), value(b));
        return push(std::move(c), {a.id, b.id}, [a, b](Tape& t, int self) {
            const DenseMatrix& gc = t.grads_[self];
            accumulate(t.grad_ref(a, t.vals_[a.id]),
                       matmul_plain(gc, transpose_plain(t.vals_[b.id])));
            accumulate(t.grad_ref(b, t.vals_[b.id]),
                       matmul_plain(transpose_plain(t.vals_[a.id]), gc));
        });
    }

    Var add(Var a, Var b) {
        DenseMatrix c = add_plain(value(a), value(b));
        return push(std::move(c), {a.id, b.id}, [a, b](Tape& t, int self) {
            const DenseMatrix& gc = t.grads_[self];
            accumulate(t.grad_ref(a, t.vals_[a.id]), gc);
            accumulate(t.grad_ref(b, t.vals_[b.id]), gc);
        });
    }

    // a + row broadcast over every row of a (bias add).
    Var add_rowvec(Var a, Var rowv) {
        const DenseMatrix& x = value(a);
        const DenseMatrix& r = value(rowv);
        require(r.rows == 1 && r.cols == x.cols,
                "add_rowvec: bias must be 1x" + std::to_string(x.cols));
        DenseMatrix c = x;
        for (std::size_t i = 0; i < c.rows; ++i)
            for (std::size_t j = 0; j < c.cols; ++j) c.at(i, j) += r.data[j];
        return push(std::move(c), {a.id, rowv.id}, [a, rowv](Tape& t, int self) {
            const DenseMatrix& gc = t.grads_[self];
            accumulate(t.grad_ref(a, t.vals_[a.id]), gc);
            DenseMatrix& gr = t.grad_ref(rowv, t.vals_[rowv.id]);
            for (std::size_t i = 0; i < gc.rows; ++i)
                for (std::size_t j = 0; j < gc.cols; ++j) gr.data[j] += gc.at(i, j);
        });
    }

    Var scale(Var a, double s) {
        DenseMatrix c = value(a);
        for (auto& v : c.data) v *= s;
        return push(std::move(c), {a.id}, [a, s](Tape& t, int self) {
            const DenseMatrix& gc = t.grads_[self];
            DenseMatrix& ga = t.grad_ref(a, t.vals_[a.id]);
            for (std::size_t i = 0; i < gc.size(); ++i) ga.data[i] += s * gc.data[i];
        });
    }

    Var transpose(Var a) {
        DenseMatrix c = transpose_plain(value(a));
        return push(std::move(c), {a.id}, [a](Tape& t, int self) {
            accumulate(t.grad_ref(a, t.vals_[a.id]),
                       transpose_plain(t.grads_[self]));
        });
    }

    Var softmax_rows(Var a) {
        DenseMatrix y = softmax_rows_plain(value(a));
        return push(std::move(y), {a.id}, [a](Tape& t, int self) {
            const DenseMatrix& yv = t.vals_[self];
            const DenseMatrix& gy = t.grads_[self];
            DenseMatrix& ga = t.grad_ref(a, t.vals_[a.id]);
            for (std::size_t i = 0; i < yv.rows; ++i) {
                const double* yr = yv.row(i);
                const double* gr = gy.row(i);
                double dot = 0.0;
                for (std::size_t j = 0; j < yv.cols; ++j) dot += yr[j] * gr[j];
                double* out = ga.row(i);
                for (std::size_t j = 0; j < yv.cols; ++j)
                    out[j] += yr[j] * (gr[j] - dot);
            }
        });
    }

    Var gelu(Var a) {
        DenseMatrix c = gelu_plain(value(a));
        return push(std::move(c), {a.id}, [a](Tape& t, int self) {
            const DenseMatrix& x = t.vals_[a.id];
            const DenseMatrix& gc = t.grads_[self];
            DenseMatrix& ga = t.grad_ref(a, x);
            for (std::size_t i = 0; i < x.size(); ++i)
                ga.data[i] += gc.data[i] * gelu_grad_scalar(x.data[i]);
        });
    }

    Var layer_norm(Var x, Var gamma, Var beta) {
        LayerNormForward f = layer_norm_plain(value(x), value(gamma), value(beta));
        DenseMatrix out = f.out;
        DenseMatrix xhat = std::move(f.normalized);
        std::vector<double> inv_std = std::move(f.inv_std);
        return push(std::move(out), {x.id, gamma.id, beta.id},
                    [x, gamma, beta, xhat = std::move(xhat),
                     inv_std = std::move(inv_std)](Tape& t, int self) {
            const DenseMatrix& go = t.grads_[self];
            const DenseMatrix& g = t.vals_[gamma.id];
            DenseMatrix& gx = t.grad_ref(x, t.vals_[x.id]);
            DenseMatrix& gg = t.grad_ref(gamma, g);
            DenseMatrix& gb = t.grad_ref(beta, t.vals_[beta.id]);
            const double n = static_cast<double>(go.cols);
            for (std::size_t i = 0; i < go.rows; ++i) {
                const double* gor = go.row(i);
                const double* xh = xhat.row(i);
                double mean_dxh = 0.0, mean_dxh_xh = 0.0;
                for (std::size_t j = 0; j < go.cols; ++j) {
                    const double dxh = gor[j] * g.data[j];
                    mean_dxh += dxh;
                    mean_dxh_xh += dxh * xh[j];
                    gg.data[j] += gor[j] * xh[j];
                    gb.data[j] += gor[j];
                }
                mean_dxh /= n;
                mean_dxh_xh /= n;
                double* gxr = gx.row(i);
                for (std::size_t j = 0; j < go.cols; ++j) {
                    const double dxh = gor[j] * g.data[j];
                    gxr[j] += inv_std[i] * (dxh - mean_dxh - xh[j] * mean_dxh_xh);
                }
            }
        });
    }

    Var slice_cols(Var a, std::size_t c0, std::size_t width) {
        const DenseMatrix& x = value(a);
        require(c0 + width <= x.cols, "slice_cols: range out of bounds");
        DenseMatrix c(x.rows, width);
        for (std::size_t i = 0; i < x.rows; ++i)
            for (std::size_t j = 0; j < width; ++j) c.at(i, j) = x.at(i, c0 + j);
        return push(std::move(c), {a.id}, [a, c0, width](Tape& t, int self) {
            const DenseMatrix& gc = t.grads_[self];
            DenseMatrix& ga = t.grad_ref(a, t.vals_[a.id]);
            for (std::size_t i = 0; i < gc.rows; ++i)
                for (std::size_t j = 0; j < width; ++j)
                    ga.at(i, c0 + j) += gc.at(i, j);
        });
    }

    Var concat_cols(const std::vector<Var>& parts) {
        require(!parts.empty(), "concat_cols: no parts");
        std::size_t total = 0;
        const std::size_t rows = value(parts[0]).rows;
        for (Var p : parts) {
            require(value(p).rows == rows, "concat_cols: row mismatch");
            total += value(p).cols;
        }
        DenseMatrix c(rows, total);
        std::size_t off = 0;
        std::vector<int> pids;
        std::vector<std::size_t> offsets;
        for (Var p : parts) {
            const DenseMatrix& x = value(p);
            for (std::size_t i = 0; i < rows; ++i)
                for (std::size_t j = 0; j < x.cols; ++j) c.at(i, off + j) = x.at(i, j);
            pids.push_back(p.id);
            offsets.push_back(off);
            off += x.cols;
        }
        return push(std::move(c), pids,
                    [parts, offsets](Tape& t, int self) {
            const DenseMatrix& gc = t.grads_[self];
            for (std::size_t k = 0; k < parts.size(); ++k) {
                const DenseMatrix& x = t.vals_[parts[k].id];
                DenseMatrix& gp = t.grad_ref(parts[k], x);
                for (std::size_t i = 0; i < gc.rows; ++i)
                    for (std::size_t j = 0; j < x.cols; ++j)
                        gp.at(i, j) += gc.at(i, offsets[k] + j);
            }
        });
    }

    // Row gather; backward scatter-adds into the source rows, so gradients
    // flow through gathered rows only.
    Var gather_rows(Var a, std::vector<std::size_t> idx) {
        const DenseMatrix& x = value(a);
        for (std::size_t i : idx)
            require(i < x.rows, "gather_rows: index out of range");
        DenseMatrix c(idx.size(), x.cols);
        for (std::size_t i = 0; i < idx.size(); ++i)
            for (std::size_t j = 0; j < x.cols; ++j) c.at(i, j) = x.at(idx[i], j);
        return push(std::move(c), {a.id},
                    [a, idx = std::move(idx)](Tape& t, int self) {
            const DenseMatrix& gc = t.grads_[self];
            DenseMatrix& ga = t.grad_ref(a, t.vals_[a.id]);
            for (std::size_t i = 0; i < idx.size(); ++i)
                for (std::size_t j = 0; j < gc.cols; ++j)
                    ga.at(idx[i], j) += gc.at(i, j);
        });
    }

    Var sum_all(Var a) {
        const DenseMatrix& x = value(a);
        DenseMatrix c(1, 1);
        for (double v : x.data) c.data[0] += v;
        return push(std::move(c), {a.id}, [a](Tape& t, int self) {
            const double g = t.grads_[self].data[0];
            DenseMatrix& ga = t.grad_ref(a, t.vals_[a.id]);
            for (auto& v : ga.data) v += g;
        });
    }

    // sum of w[i,j] * a[i,j]; reduces any op output to a scalar probe.
    Var weighted_sum(Var a, DenseMatrix w) {
        const DenseMatrix& x = value(a);
        require(w.same_shape(x), "weighted_sum: weight shape mismatch");
        DenseMatrix c(1, 1);
        for (std::size_t i = 0; i < x.size(); ++i) c.data[0] += w.data[i] * x.data[i];
        return push(std::move(c), {a.id}, [a, w = std::move(w)](Tape& t, int self) {
            const double g = t.grads_[self].data[0];
            DenseMatrix& ga = t.grad_ref(a, t.vals_[a.id]);
            for (std::size_t i = 0; i < ga.size(); ++i) ga.data[i] += g * w.data[i];
        });
    }

    // Multi-label classification loss over a logits matrix with one row per
    // item and one column per category. Reduction: mean over categories,
    // sum over items, so gradient-ratio metrics do not depend on batch size.
    // weights (same shape, typically 0/1) drop masked categories from the
    // loss; pass an empty matrix for all-ones.
    Var multilabel_loss(Var logits, const std::vector<std::vector<int>>& labels,
                        const LossConfig& cfg, const DenseMatrix& weights = {}) {
        cfg.validate();
        const DenseMatrix& z = value(logits);
        require(labels.size() == z.rows, "multilabel_loss: label rows mismatch");
        for (const auto& row : labels)
            require(row.size() == z.cols, "multilabel_loss: label cols mismatch");
        const bool weighted = !weights.empty();
        if (weighted)
            require(weights.same_shape(z), "multilabel_loss: weight shape mismatch");
        const double inv_c = 1.0 / static_cast<double>(z.cols);
        DenseMatrix out(1, 1);
        double total = 0.0;
        for (std::size_t i = 0; i < z.rows; ++i)
            for (std::size_t j = 0; j < z.cols; ++j) {
                const double w = weighted ? weights.at(i, j) : 1.0;
                if (w == 0.0) continue;
                total += w * loss_value_scalar(z.at(i, j), labels[i][j], cfg);
            }
        out.data[0] = total * inv_c;
        return push(std::move(out), {logits.id},
                    [logits, labels, cfg, weights, weighted, inv_c](Tape& t, int self) {
            const double g = t.grads_[self].data[0];
            const DenseMatrix& z = t.vals_[logits.id];
            DenseMatrix& gz = t.grad_ref(logits, z);
            for (std::size_t i = 0; i < z.rows; ++i)
                for (std::size_t j = 0; j < z.cols; ++j) {
                    const double w = weighted ? weights.at(i, j) : 1.0;
                    if (w == 0.0) continue;
                    gz.at(i, j) += g * inv_c * w *
                                   loss_grad_scalar(z.at(i, j), labels[i][j], cfg);
                }
        });
    }

    // ---- backward ----------------------------------------------------------

    void backward(Var loss) {
        const auto id = check(loss);
        require(vals_[id].rows == 1 && vals_[id].cols == 1,
                "backward: loss must be 1x1, got " + vals_[id].shape_str());
        grad_ref(loss, vals_[id]).data[0] = 1.0;
        for (int i = static_cast<int>(id); i >= 0; --i) {
            if (grads_[i].empty() || !pulls_[i]) continue;
            pulls_[i](*this, i);
        }
    }

private:
    using PullFn = std::function<void(Tape&, int)>;

    std::size_t check(Var v) const {
        require(v.id >= 0 && static_cast<std::size_t>(v.id) < vals_.size(),
                "Tape: invalid var");
        return static_cast<std::size_t>(v.id);
    }

    DenseMatrix& grad_ref(Var v, const DenseMatrix& like) {
        auto& g = grads_[check(v)];
        if (g.empty()) g = DenseMatrix(like.rows, like.cols);
        return g;
    }

    static void accumulate(DenseMatrix& into, const DenseMatrix& what) {
        for (std::size_t i = 0; i < into.size(); ++i) into.data[i] += what.data[i];
    }

    Var push(DenseMatrix val, std::vector<int> parents, PullFn pull) {
        for (int p : parents)
            require(p >= 0 && static_cast<std::size_t>(p) < vals_.size(),
                    "Tape: parent created on a different tape");
        vals_.push_back(std::move(val));
        grads_.emplace_back();
        pulls_.push_back(std::move(pull));
        return Var{static_cast<int>(vals_.size()) - 1};
    }

    std::vector<DenseMatrix> vals_;
    std::vector<DenseMatrix> grads_;
    std::vector<PullFn> pulls_;
};

}  // namespace vastvocab
