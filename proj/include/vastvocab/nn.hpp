#pragma once

#include <cmath>
#include <cstddef>
#include <functional>
#include <string>
#include <vector>

#include "vastvocab/matrix.hpp"
#include "vastvocab/rng.hpp"
#include "vastvocab/tape.hpp"

namespace vastvocab {

inline constexpr double kParamInitStd = 0.02;

// Weight init scale for the attention/FFN modules. A fixed small std leaves
// the attention logits so close to uniform that the query-content pathway
// barely carries gradient; scaling with the model width keeps the initial
// activations O(1) at any dimension.
inline double weight_init_std(std::size_t model_dim) {
    return 1.0 / std::sqrt(static_cast<double>(model_dim));
}

struct AttentionConfig {
    std::size_t heads = 8;
    std::size_t model_dim = 0;

    void validate() const {
        require(heads >= 1, "AttentionConfig: heads must be >= 1");
        require(model_dim >= 1, "AttentionConfig: model_dim must be >= 1");
        require(model_dim % heads == 0,
                "AttentionConfig: model_dim " + std::to_string(model_dim) +
                    " not divisible by heads " + std::to_string(heads));
    }

    std::size_t head_dim() const { return model_dim / heads; }
    double head_scale() const {
        return 1.0 / std::sqrt(static_cast<double>(head_dim()));
    }
};

// Named parameter matrix, the unit of serialization and SGD updates.
struct ParamRef {
    std::string name;
    DenseMatrix* mat;
};

struct LayerNormParams {
    DenseMatrix gamma;  // 1 x dim, init 1 (identity affine)
    DenseMatrix beta;   // 1 x dim, init 0

    static LayerNormParams init(std::size_t dim) {
        LayerNormParams p;
        p.gamma = DenseMatrix(1, dim, 1.0);
        p.beta = DenseMatrix(1, dim, 0.0);
        return p;
    }

    struct Vars {
        Var gamma, beta;
    };
    Vars push(Tape& t) const {
        return Vars{t.input(gamma), t.input(beta)};
    }

    void collect(const std::string& prefix, std::vector<ParamRef>& out) {
        out.push_back({prefix + ".gamma", &gamma});
        out.push_back({prefix + ".beta", &beta});
    }
};

inline Var layer_norm(Tape& t, Var x, const LayerNormParams::Vars& p) {
    return t.layer_norm(x, p.gamma, p.beta);
}

// Scaled dot-product multi-head attention with learned projections.
// q: nq x D, k/v: nk x D, output nq x D.
struct MultiHeadAttention {
    AttentionConfig cfg;
    DenseMatrix wq, wk, wv, wo;  // D x D
    DenseMatrix bq, bk, bv, bo;  // 1 x D

    static MultiHeadAttention init(const AttentionConfig& cfg, Rng& rng) {
        cfg.validate();
        MultiHeadAttention m;
        m.cfg = cfg;
        const std::size_t d = cfg.model_dim;
        const double std = weight_init_std(d);
        m.wq = rng.gaussian_matrix(d, d, 0.0, std);
        m.wk = rng.gaussian_matrix(d, d, 0.0, std);
        m.wv = rng.gaussian_matrix(d, d, 0.0, std);
        m.wo = rng.gaussian_matrix(d, d, 0.0, std);
        m.bq = DenseMatrix(1, d);
        m.bk = DenseMatrix(1, d);
        m.bv = DenseMatrix(1, d);
        m.bo = DenseMatrix(1, d);
        return m;
    }

    struct Vars {
        Var wq, wk, wv, wo, bq, bk, bv, bo;
    };
    Vars push(Tape& t) const {
        return Vars{t.input(wq), t.input(wk), t.input(wv), t.input(wo),
                    t.input(bq), t.input(bk), t.input(bv), t.input(bo)};
    }

    void collect(const std::string& prefix, std::vector<ParamRef>& out) {
        out.push_back({prefix + ".wq", &wq});
        out.push_back({prefix + ".wk", &wk});
        out.push_back({prefix + ".wv", &wv});
        out.push_back({prefix + ".wo", &wo});
        out.push_back({prefix + ".bq", &bq});
        out.push_back({prefix + ".bk", &bk});
        out.push_back({prefix + ".bv", &bv});
        out.push_back({prefix + ".bo", &bo});
    }
};

inline Var multi_head_attention(Tape& t, Var q, Var k, Var v,
                                const MultiHeadAttention::Vars& p,
                                const AttentionConfig& cfg) {
    cfg.validate();
    const DenseMatrix& qm = t.value(q);
    const DenseMatrix& km = t.value(k);
    const DenseMatrix& vm = t.value(v);
    require(qm.cols == cfg.model_dim && km.cols == cfg.model_dim &&
                vm.cols == cfg.model_dim,
            "multi_head_attention: inputs must have model_dim columns");
    require(km.rows == vm.rows,
            "multi_head_attention: key/value row counts differ");

    Var Q = t.add_rowvec(t.matmul(q, p.wq), p.bq);
    Var K = t.add_rowvec(t.matmul(k, p.wk), p.bk);
    Var V = t.add_rowvec(t.matmul(v, p.wv), p.bv);

    const std::size_t dh = cfg.head_dim();
    std::vector<Var> heads;
    heads.reserve(cfg.heads);
    for (std::size_t h = 0; h < cfg.heads; ++h) {
        Var qh = t.slice_cols(Q, h * dh, dh);
        Var kh = t.slice_cols(K, h * dh, dh);
        Var vh = t.slice_cols(V, h * dh, dh);
        Var scores = t.scale(t.matmul(qh, t.transpose(kh)), cfg.head_scale());
        Var attn = t.softmax_rows(scores);
        heads.push_back(t.matmul(attn, vh));
    }
    Var cat = cfg.heads == 1 ? heads[0] : t.concat_cols(heads);
    return t.add_rowvec(t.matmul(cat, p.wo), p.bo);
}

// Two linear layers with a GELU in between; output shape equals input shape.
struct FeedForward {
    std::size_t hidden = 0;
    DenseMatrix w1, b1;  // D x H, 1 x H
    DenseMatrix w2, b2;  // H x D, 1 x D

    static FeedForward init(std::size_t dim, std::size_t hidden, Rng& rng) {
        require(hidden >= 1, "FeedForward: hidden must be >= 1");
        FeedForward f;
        f.hidden = hidden;
        const double std = weight_init_std(dim);
        f.w1 = rng.gaussian_matrix(dim, hidden, 0.0, std);
        f.b1 = DenseMatrix(1, hidden);
        f.w2 = rng.gaussian_matrix(hidden, dim, 0.0, std);
        f.b2 = DenseMatrix(1, dim);
        return f;
    }

    struct Vars {
        Var w1, b1, w2, b2;
    };
    Vars push(Tape& t) const {
        return Vars{t.input(w1), t.input(b1), t.input(w2), t.input(b2)};
    }

    void collect(const std::string& prefix, std::vector<ParamRef>& out) {
        out.push_back({prefix + ".w1", &w1});
        out.push_back({prefix + ".b1", &b1});
        out.push_back({prefix + ".w2", &w2});
        out.push_back({prefix + ".b2", &b2});
    }
};

inline Var ffn_block(Tape& t, Var x, const FeedForward::Vars& p) {
    Var h = t.gelu(t.add_rowvec(t.matmul(x, p.w1), p.b1));
    return t.add_rowvec(t.matmul(h, p.w2), p.b2);
}

}  // namespace vastvocab
