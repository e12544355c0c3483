#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <set>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "vastvocab/io.hpp"
#include "vastvocab/nn.hpp"
#include "vastvocab/synthworld.hpp"
#include "vastvocab/tape.hpp"
#include "vastvocab/taxonomy.hpp"

namespace vastvocab {

// Image-guided query selection: two cross-attention enhancement layers over
// the category queries against flattened image features, a linear projection
// to one logit per category, and a per-image top-k gather.

struct EnhanceLayer {
    MultiHeadAttention attn;
    LayerNormParams ln1, ln2;
    FeedForward ffn;

    struct Vars {
        MultiHeadAttention::Vars attn;
        LayerNormParams::Vars ln1, ln2;
        FeedForward::Vars ffn;
    };
    Vars push(Tape& t) const {
        return Vars{attn.push(t), ln1.push(t), ln2.push(t), ffn.push(t)};
    }
    void collect(const std::string& prefix, std::vector<ParamRef>& out) {
        attn.collect(prefix + ".attn", out);
        ln1.collect(prefix + ".ln1", out);
        ln2.collect(prefix + ".ln2", out);
        ffn.collect(prefix + ".ffn", out);
    }
};

struct SelectionModule {
    AttentionConfig cfg;
    std::size_t hidden = 0;
    std::array<EnhanceLayer, 2> layers;  // enhancement depth fixed at 2
    DenseMatrix proj_w;                  // D x 1
    DenseMatrix proj_b;                  // 1 x 1

    static SelectionModule init(std::size_t model_dim, std::size_t heads,
                                std::size_t hidden, Rng& rng) {
        SelectionModule m;
        m.cfg = AttentionConfig{heads, model_dim};
        m.cfg.validate();
        m.hidden = hidden;
        for (auto& layer : m.layers) {
            layer.attn = MultiHeadAttention::init(m.cfg, rng);
            layer.ln1 = LayerNormParams::init(model_dim);
            layer.ln2 = LayerNormParams::init(model_dim);
            layer.ffn = FeedForward::init(model_dim, hidden, rng);
        }
        m.proj_w = rng.gaussian_matrix(model_dim, 1, 0.0, weight_init_std(model_dim));
        m.proj_b = DenseMatrix(1, 1);
        return m;
    }

    struct Vars {
        std::array<EnhanceLayer::Vars, 2> layers;
        Var proj_w, proj_b;
    };
    Vars push(Tape& t) const {
        return Vars{{layers[0].push(t), layers[1].push(t)},
                    t.input(proj_w),
                    t.input(proj_b)};
    }

    void collect(std::vector<ParamRef>& out) {
        layers[0].collect("layer0", out);
        layers[1].collect("layer1", out);
        out.push_back({"proj.w", &proj_w});
        out.push_back({"proj.b", &proj_b});
    }

    struct Forward {
        Var logits;    // 1 x C
        Var enhanced;  // C x D
    };

    // q_cat: C x D category queries, f_img: (H'W') x D image tokens.
    Forward forward(Tape& t, Var q_cat, Var f_img, const Vars& v) const {
        Var q = q_cat;
        for (std::size_t l = 0; l < layers.size(); ++l) {
            Var a = multi_head_attention(t, q, f_img, f_img, v.layers[l].attn, cfg);
            q = t.layer_norm(t.add(a, q), v.layers[l].ln1.gamma,
                             v.layers[l].ln1.beta);
            Var f = ffn_block(t, q, v.layers[l].ffn);
            q = t.layer_norm(t.add(f, q), v.layers[l].ln2.gamma,
                             v.layers[l].ln2.beta);
        }
        Var scores = t.add_rowvec(t.matmul(q, v.proj_w), v.proj_b);  // C x 1
        return Forward{t.transpose(scores), q};
    }
};

// Plain-value scoring of one image (no gradients kept).
struct ScoredImage {
    std::vector<double> logits;  // per category row
    DenseMatrix enhanced;        // C x D
};

inline ScoredImage enhance_and_score(const SelectionModule& module,
                                     const CategoryQuerySet& queries,
                                     const DenseMatrix& image_features) {
    require(image_features.cols == queries.dim(),
            "enhance_and_score: feature dim != query dim");
    Tape t;
    auto v = module.push(t);
    auto fwd = module.forward(t, t.input(queries.embeddings),
                              t.input(image_features), v);
    ScoredImage out;
    out.logits = t.value(fwd.logits).data;
    out.enhanced = t.value(fwd.enhanced);
    return out;
}

// Per-image selection: k best logits, ties broken by lower row index,
// logits kept in non-increasing order, query rows gathered by selection.
struct SelectionResult {
    std::vector<int> indices;       // category ids, logit-descending
    std::vector<double> logits;     // matching the ids
    DenseMatrix selected_queries;   // k x D copies of the enhanced rows
};

inline SelectionResult topk_select(const std::vector<double>& logits,
                                   const DenseMatrix& enhanced, std::size_t k,
                                   const std::vector<int>& ids) {
    require(enhanced.rows == logits.size(),
            "topk_select: logits/enhanced row mismatch");
    require(ids.size() == logits.size(), "topk_select: ids length mismatch");
    require(k >= 1, "topk_select: k must be >= 1");
    require(k <= logits.size(),
            "topk_select: k=" + std::to_string(k) + " exceeds C=" +
                std::to_string(logits.size()));
    std::vector<std::size_t> order(logits.size());
    std::iota(order.begin(), order.end(), 0);
    std::partial_sort(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(k),
                      order.end(), [&](std::size_t a, std::size_t b) {
                          if (logits[a] != logits[b]) return logits[a] > logits[b];
                          return a < b;
                      });
    SelectionResult r;
    r.selected_queries = DenseMatrix(k, enhanced.cols);
    for (std::size_t i = 0; i < k; ++i) {
        const std::size_t row = order[i];
        r.indices.push_back(ids[row]);
        r.logits.push_back(logits[row]);
        for (std::size_t j = 0; j < enhanced.cols; ++j)
            r.selected_queries.at(i, j) = enhanced.at(row, j);
    }
    return r;
}

inline SelectionResult topk_select(const std::vector<double>& logits,
                                   const DenseMatrix& enhanced, std::size_t k) {
    std::vector<int> ids(logits.size());
    std::iota(ids.begin(), ids.end(), 0);
    return topk_select(logits, enhanced, k, ids);
}

// Per-image category recall: |selected ∩ GT| / |GT|.
inline double category_recall(const SelectionResult& selected,
                              const std::set<int>& ground_truth) {
    require(!ground_truth.empty(), "category_recall: empty ground truth");
    std::size_t hit = 0;
    for (int id : selected.indices) hit += ground_truth.count(id);
    return static_cast<double>(hit) / static_cast<double>(ground_truth.size());
}

// Dataset-level AR^C: per-image recall averaged over images with non-empty
// ground truth; empty-GT images are excluded and counted.
struct ArcResult {
    double arc = 0.0;
    std::size_t scored_images = 0;
    std::size_t skipped_empty = 0;
};

// Inference is pure per image, so evaluation may fan out across threads;
// per-image recalls land in an index-ordered buffer and are reduced
// sequentially, giving identical results at any thread count.
inline ArcResult arc_recall(const SelectionModule& module,
                            const CategoryQuerySet& queries,
                            const std::vector<SyntheticSample>& data,
                            std::size_t k, std::size_t threads = 1) {
    std::vector<double> recalls(data.size(), -1.0);  // -1 marks empty GT
    auto score_range = [&](std::size_t lo, std::size_t hi) {
        for (std::size_t i = lo; i < hi; ++i) {
            if (data[i].ground_truth.empty()) continue;
            ScoredImage scored =
                enhance_and_score(module, queries, data[i].image_features);
            SelectionResult sel =
                topk_select(scored.logits, scored.enhanced, k, queries.ids);
            recalls[i] = category_recall(sel, data[i].ground_truth);
        }
    };
    if (threads <= 1 || data.size() < 2) {
        score_range(0, data.size());
    } else {
        const std::size_t workers = std::min(threads, data.size());
        std::vector<std::thread> pool;
        const std::size_t chunk = (data.size() + workers - 1) / workers;
        for (std::size_t w = 1; w < workers; ++w)
            pool.emplace_back(score_range, w * chunk,
                              std::min(data.size(), (w + 1) * chunk));
        score_range(0, std::min(chunk, data.size()));
        for (auto& th : pool) th.join();
    }
    ArcResult res;
    double sum = 0.0;
    for (double r : recalls) {
        if (r < 0.0) {
            ++res.skipped_empty;
            continue;
        }
        sum += r;
        ++res.scored_images;
    }
    require(res.scored_images > 0, "arc_recall: no images with ground truth");
    res.arc = sum / static_cast<double>(res.scored_images);
    return res;
}

// ---- stage-1 training -------------------------------------------------------

enum class Optimizer { sgd, adam };
enum class LrSchedule { constant, cosine };

struct TrainConfig {
    LossConfig loss = LossConfig::asymmetric();
    Optimizer optimizer = Optimizer::adam;
    LrSchedule schedule = LrSchedule::cosine;  // cosine decays over `epochs`
    double lr = 0.004;
    double adam_beta1 = 0.9;
    double adam_beta2 = 0.999;
    double adam_eps = 1e-8;
    std::size_t epochs = 20;
    std::size_t k = 20;
    std::uint64_t seed = 0;
    const CategoryTree* tree = nullptr;  // enables ancestor masking
    bool stop_when_perfect = false;      // stop early once AR^C reaches 1

    void validate() const {
        require(loss.family == LossFamily::asymmetric,
                "TrainConfig: stage-1 supervision uses the asymmetric family");
        require(lr >= 0.0, "TrainConfig: lr must be >= 0");
        require(k >= 1, "TrainConfig: k must be >= 1");
        loss.validate();
    }

    double lr_at(std::size_t epoch) const {
        if (schedule == LrSchedule::constant || epochs <= 1) return lr;
        const double progress = static_cast<double>(epoch - 1) /
                                static_cast<double>(epochs);
        return lr * 0.5 * (1.0 + std::cos(3.141592653589793 * progress));
    }
};

struct EpochRecord {
    std::size_t epoch = 0;   // 0 is the pre-training evaluation
    double loss = 0.0;       // mean per-image loss
    double arc = 0.0;        // AR^C at the configured k
};

struct TrainReport {
    std::vector<EpochRecord> epochs;
    bool diverged = false;
    std::size_t last_good_epoch = 0;
    double final_arc = 0.0;
};

namespace selection_detail {

struct ParamSnapshot {
    std::vector<DenseMatrix> values;
};

inline ParamSnapshot snapshot(const std::vector<ParamRef>& params) {
    ParamSnapshot s;
    for (const auto& p : params) s.values.push_back(*p.mat);
    return s;
}

inline void restore(const std::vector<ParamRef>& params, const ParamSnapshot& s) {
    for (std::size_t i = 0; i < params.size(); ++i) *params[i].mat = s.values[i];
}

}  // namespace selection_detail

// ASL supervision over the full C-dimensional logit vector (pre-top-k), with
// ancestors of the ground truth dropped from the loss when a tree is given.
// Plain per-image SGD on every module parameter plus the category queries.
inline TrainReport train_selection_stage(SelectionModule& module,
                                         CategoryQuerySet& queries,
                                         const std::vector<SyntheticSample>& data,
                                         const TrainConfig& cfg) {
    cfg.validate();
    require(!data.empty(), "train_selection_stage: empty dataset");
    require(cfg.k <= queries.count(), "train_selection_stage: k exceeds C");

    std::vector<ParamRef> params;
    module.collect(params);
    params.push_back({"queries", &queries.embeddings});

    const std::size_t c = queries.count();
    auto labels_for = [&](const SyntheticSample& s) {
        std::vector<std::vector<int>> labels(1, std::vector<int>(c, 0));
        for (int id : s.ground_truth) labels[0][queries.row(id)] = 1;
        return labels;
    };
    auto weights_for = [&](const SyntheticSample& s) {
        DenseMatrix w;
        if (!cfg.tree) return w;
        w = DenseMatrix(1, c, 1.0);
        for (int id : mask_parent_labels(*cfg.tree, s.ground_truth))
            w.at(0, queries.row(id)) = 0.0;
        return w;
    };

    auto mean_loss = [&]() {
        double total = 0.0;
        for (const auto& s : data) {
            Tape t;
            auto v = module.push(t);
            auto fwd = module.forward(t, t.input(queries.embeddings),
                                      t.input(s.image_features), v);
            Var loss = t.multilabel_loss(fwd.logits, labels_for(s), cfg.loss,
                                         weights_for(s));
            total += t.value(loss).data[0];
        }
        return total / static_cast<double>(data.size());
    };

    TrainReport report;
    report.epochs.push_back(
        {0, mean_loss(), arc_recall(module, queries, data, cfg.k).arc});
    report.final_arc = report.epochs.back().arc;

    Rng order_rng(split_seed(cfg.seed, 9000));
    std::vector<std::size_t> order(data.size());
    std::iota(order.begin(), order.end(), 0);

    // Adam moments, one pair per parameter tensor
    std::vector<DenseMatrix> moment1, moment2;
    if (cfg.optimizer == Optimizer::adam) {
        for (const auto& p : params) {
            moment1.emplace_back(p.mat->rows, p.mat->cols);
            moment2.emplace_back(p.mat->rows, p.mat->cols);
        }
    }
    std::size_t step = 0;

    auto good = selection_detail::snapshot(params);
    for (std::size_t epoch = 1; epoch <= cfg.epochs; ++epoch) {
        order_rng.shuffle(order);
        const double lr_now = cfg.lr_at(epoch);
        double epoch_loss = 0.0;
        for (std::size_t idx : order) {
            const auto& s = data[idx];
            Tape t;
            auto v = module.push(t);
            Var qv = t.input(queries.embeddings);
            Var fv = t.input(s.image_features);
            auto fwd = module.forward(t, qv, fv, v);
            Var loss = t.multilabel_loss(fwd.logits, labels_for(s), cfg.loss,
                                         weights_for(s));
            const double loss_value = t.value(loss).data[0];
            if (!std::isfinite(loss_value)) {
                selection_detail::restore(params, good);
                report.diverged = true;
                report.last_good_epoch = epoch - 1;
                report.final_arc = report.epochs.back().arc;
                return report;
            }
            epoch_loss += loss_value;
            t.backward(loss);

            // leaf vars in collect() order: layers, projection, queries
            std::vector<Var> leaf_vars;
            auto push_mha = [&](const MultiHeadAttention::Vars& m) {
                leaf_vars.insert(leaf_vars.end(),
                                 {m.wq, m.wk, m.wv, m.wo, m.bq, m.bk, m.bv, m.bo});
            };
            for (std::size_t l = 0; l < 2; ++l) {
                push_mha(v.layers[l].attn);
                leaf_vars.push_back(v.layers[l].ln1.gamma);
                leaf_vars.push_back(v.layers[l].ln1.beta);
                leaf_vars.push_back(v.layers[l].ln2.gamma);
                leaf_vars.push_back(v.layers[l].ln2.beta);
                leaf_vars.push_back(v.layers[l].ffn.w1);
                leaf_vars.push_back(v.layers[l].ffn.b1);
                leaf_vars.push_back(v.layers[l].ffn.w2);
                leaf_vars.push_back(v.layers[l].ffn.b2);
            }
            leaf_vars.push_back(v.proj_w);
            leaf_vars.push_back(v.proj_b);
            leaf_vars.push_back(qv);

            ++step;
            const double bc1 =
                1.0 - std::pow(cfg.adam_beta1, static_cast<double>(step));
            const double bc2 =
                1.0 - std::pow(cfg.adam_beta2, static_cast<double>(step));
            for (std::size_t p = 0; p < params.size(); ++p) {
                const DenseMatrix& g = t.grad(leaf_vars[p]);
                if (g.empty()) continue;
                DenseMatrix& dst = *params[p].mat;
                if (cfg.optimizer == Optimizer::sgd) {
                    for (std::size_t i = 0; i < dst.size(); ++i)
                        dst.data[i] -= lr_now * g.data[i];
                    continue;
                }
                DenseMatrix& m1 = moment1[p];
                DenseMatrix& m2 = moment2[p];
                for (std::size_t i = 0; i < dst.size(); ++i) {
                    m1.data[i] = cfg.adam_beta1 * m1.data[i] +
                                 (1.0 - cfg.adam_beta1) * g.data[i];
                    m2.data[i] = cfg.adam_beta2 * m2.data[i] +
                                 (1.0 - cfg.adam_beta2) * g.data[i] * g.data[i];
                    dst.data[i] -= lr_now * (m1.data[i] / bc1) /
                                   (std::sqrt(m2.data[i] / bc2) + cfg.adam_eps);
                }
            }
        }
        epoch_loss /= static_cast<double>(data.size());
        const double arc = arc_recall(module, queries, data, cfg.k).arc;
        report.epochs.push_back({epoch, epoch_loss, arc});
        report.final_arc = arc;
        report.last_good_epoch = epoch;
        good = selection_detail::snapshot(params);
        if (cfg.stop_when_perfect && arc >= 1.0) break;
    }
    return report;
}

inline std::string report_to_csv(const TrainReport& report) {
    std::string out = "epoch,loss,arc_recall\n";
    for (const auto& e : report.epochs) {
        out += std::to_string(e.epoch);
        out += ',';
        out += fmt_double(e.loss);
        out += ',';
        out += fmt_double(e.arc);
        out += '\n';
    }
    return out;
}

// ---- parameter serialization -------------------------------------------------
// Versioned text document; values are %.17g and round-trip exactly.

inline constexpr const char* kParamsHeader = "vastvocab-params v1";

inline std::string params_to_text(SelectionModule& module,
                                  CategoryQuerySet& queries) {
    std::vector<ParamRef> params;
    module.collect(params);
    params.push_back({"queries", &queries.embeddings});
    std::string out = std::string(kParamsHeader) + "\n";
    out += "model_dim " + std::to_string(module.cfg.model_dim) + " heads " +
           std::to_string(module.cfg.heads) + " hidden " +
           std::to_string(module.hidden) + "\n";
    for (const auto& p : params) {
        out += "tensor " + p.name + " " + std::to_string(p.mat->rows) + " " +
               std::to_string(p.mat->cols) + "\n";
        for (std::size_t i = 0; i < p.mat->rows; ++i) {
            for (std::size_t j = 0; j < p.mat->cols; ++j) {
                if (j) out += ' ';
                out += fmt_double(p.mat->at(i, j));
            }
            out += '\n';
        }
    }
    return out;
}

inline void params_from_text(const std::string& text, SelectionModule& module,
                             CategoryQuerySet& queries) {
    std::istringstream in(text);
    std::string line;
    require(std::getline(in, line) && line == kParamsHeader,
            "params: missing or unknown header");
    std::string word;
    std::size_t model_dim = 0, heads = 0, hidden = 0;
    require(static_cast<bool>(in >> word >> model_dim >> word >> heads >> word >> hidden),
            "params: malformed shape line");
    require(model_dim == module.cfg.model_dim && heads == module.cfg.heads &&
                hidden == module.hidden,
            "params: module shape mismatch");
    std::vector<ParamRef> params;
    module.collect(params);
    params.push_back({"queries", &queries.embeddings});
    for (auto& p : params) {
        std::string tag, name;
        std::size_t rows = 0, cols = 0;
        require(static_cast<bool>(in >> tag >> name >> rows >> cols) &&
                    tag == "tensor" && name == p.name,
                "params: expected tensor " + p.name);
        require(rows == p.mat->rows && cols == p.mat->cols,
                "params: tensor " + p.name + " shape mismatch");
        for (std::size_t i = 0; i < rows * cols; ++i)
            require(static_cast<bool>(in >> p.mat->data[i]),
                    "params: truncated tensor " + p.name);
    }
}

}  // namespace vastvocab
