#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

#include "vastvocab/matrix.hpp"

namespace vastvocab {

enum class LossFamily { sigmoid_ce, focal, asymmetric };

inline const char* loss_family_name(LossFamily f) {
    switch (f) {
        case LossFamily::sigmoid_ce: return "ce";
        case LossFamily::focal: return "focal";
        case LossFamily::asymmetric: return "asl";
    }
    return "?";
}

// One loss family active at a time. Focal defaults follow the usual
// (0.25, 2) setting; the asymmetric defaults are the standard
// gamma+=0, gamma-=4, clip=0.05 configuration.
struct LossConfig {
    LossFamily family = LossFamily::sigmoid_ce;
    double focal_alpha = 0.25;
    double focal_gamma = 2.0;
    double asl_gamma_pos = 0.0;
    double asl_gamma_neg = 4.0;
    double asl_clip = 0.05;

    void validate() const {
        require(focal_alpha > 0.0 && focal_alpha < 1.0,
                "LossConfig: focal_alpha must be in (0,1)");
        require(focal_gamma >= 0.0, "LossConfig: focal_gamma must be >= 0");
        require(asl_gamma_pos >= 0.0 && asl_gamma_neg >= 0.0,
                "LossConfig: asymmetric gammas must be >= 0");
        require(asl_clip >= 0.0 && asl_clip < 1.0,
                "LossConfig: asl_clip must be in [0,1)");
    }

    static LossConfig ce() { return LossConfig{}; }
    static LossConfig focal(double alpha = 0.25, double gamma = 2.0) {
        LossConfig c;
        c.family = LossFamily::focal;
        c.focal_alpha = alpha;
        c.focal_gamma = gamma;
        return c;
    }
    static LossConfig asymmetric(double gamma_pos = 0.0, double gamma_neg = 4.0,
                                 double clip = 0.05) {
        LossConfig c;
        c.family = LossFamily::asymmetric;
        c.asl_gamma_pos = gamma_pos;
        c.asl_gamma_neg = gamma_neg;
        c.asl_clip = clip;
        return c;
    }
};

// Per-category logits and binary labels for one item.
struct LabeledLogits {
    std::vector<double> logits;
    std::vector<int> labels;  // 0 or 1

    void validate() const {
        require(logits.size() == labels.size(),
                "LabeledLogits: logits/labels length mismatch");
        for (int y : labels)
            require(y == 0 || y == 1, "LabeledLogits: labels must be 0/1");
    }

    std::size_t count_positives() const {
        std::size_t n = 0;
        for (int y : labels) n += static_cast<std::size_t>(y);
        return n;
    }
};

inline double sigmoid(double z) {
    if (z >= 0.0) return 1.0 / (1.0 + std::exp(-z));
    const double e = std::exp(z);
    return e / (1.0 + e);
}

inline double softplus(double x) {
    if (x > 30.0) return x;
    if (x < -30.0) return std::exp(x);
    return std::log1p(std::exp(x));
}

inline double clamp_prob(double p) {
    return std::clamp(p, 1e-12, 1.0 - 1e-12);
}

// ---- scalar loss values -------------------------------------------------

inline double sigmoid_ce_value(double z, int y) {
    // -[y log p + (1-y) log(1-p)] in the stable softplus form
    return softplus(z) - static_cast<double>(y) * z;
}

inline double focal_value(double z, int y, const LossConfig& cfg) {
    const double p = sigmoid(z);
    const double pt = y == 1 ? p : 1.0 - p;
    const double at = y == 1 ? cfg.focal_alpha : 1.0 - cfg.focal_alpha;
    return -at * std::pow(1.0 - pt, cfg.focal_gamma) * std::log(clamp_prob(pt));
}

inline double asymmetric_value(double z, int y, const LossConfig& cfg) {
    const double p = sigmoid(z);
    const double q = sigmoid(-z);
    if (y == 1)
        return -std::pow(q, cfg.asl_gamma_pos) * std::log(clamp_prob(p));
    const double pm = std::max(p - cfg.asl_clip, 0.0);
    if (pm <= 0.0) return 0.0;
    // 1 - pm == q + clip, with no cancellation
    return -std::pow(pm, cfg.asl_gamma_neg) * std::log(clamp_prob(q + cfg.asl_clip));
}

// ---- scalar loss gradients (d loss / d logit) ---------------------------
// q = sigma(-z) = 1 - p is computed directly so saturated gradients keep
// full relative precision instead of cancelling against 1.

inline double sigmoid_ce_grad_scalar(double z, int y) {
    return y == 1 ? -sigmoid(-z) : sigmoid(z);
}

inline double focal_grad_scalar(double z, int y, const LossConfig& cfg) {
    const double g = cfg.focal_gamma;
    const double a = cfg.focal_alpha;
    const double p = sigmoid(z);
    const double q = sigmoid(-z);
    if (y == 1) {
        // d/dz of -a q^g log p  ==  a q^g (g p log p - q)
        return a * std::pow(q, g) * (g * p * std::log(clamp_prob(p)) - q);
    }
    // d/dz of -(1-a) p^g log q  ==  (1-a) p^g (p - g q log q)
    return (1.0 - a) * std::pow(p, g) *
           (p - g * q * std::log(clamp_prob(q)));
}

inline double asymmetric_grad_scalar(double z, int y, const LossConfig& cfg) {
    const double p = sigmoid(z);
    const double q = sigmoid(-z);
    if (y == 1) {
        const double g = cfg.asl_gamma_pos;
        return std::pow(q, g) * (g * p * std::log(clamp_prob(p)) - q);
    }
    const double g = cfg.asl_gamma_neg;
    const double pm = p - cfg.asl_clip;
    if (pm <= 0.0) return 0.0;  // clipped easy negative
    const double one_minus_pm = q + cfg.asl_clip;
    const double dpm_dz = p * q;
    double d = std::pow(pm, g) / one_minus_pm;
    if (g != 0.0) d -= g * std::pow(pm, g - 1.0) * std::log(clamp_prob(one_minus_pm));
    return dpm_dz * d;
}

inline double loss_value_scalar(double z, int y, const LossConfig& cfg) {
    switch (cfg.family) {
        case LossFamily::sigmoid_ce: return sigmoid_ce_value(z, y);
        case LossFamily::focal: return focal_value(z, y, cfg);
        case LossFamily::asymmetric: return asymmetric_value(z, y, cfg);
    }
    return 0.0;
}

inline double loss_grad_scalar(double z, int y, const LossConfig& cfg) {
    switch (cfg.family) {
        case LossFamily::sigmoid_ce: return sigmoid_ce_grad_scalar(z, y);
        case LossFamily::focal: return focal_grad_scalar(z, y, cfg);
        case LossFamily::asymmetric: return asymmetric_grad_scalar(z, y, cfg);
    }
    return 0.0;
}

// ---- vector forms over a labeled item ------------------------------------

inline std::vector<double> sigmoid_ce_grad(const LabeledLogits& item) {
    item.validate();
    std::vector<double> g(item.logits.size());
    for (std::size_t i = 0; i < g.size(); ++i)
        g[i] = sigmoid_ce_grad_scalar(item.logits[i], item.labels[i]);
    return g;
}

inline std::vector<double> focal_grad(const LabeledLogits& item,
                                      const LossConfig& cfg) {
    item.validate();
    require(cfg.family == LossFamily::focal, "focal_grad: family must be focal");
    cfg.validate();
    std::vector<double> g(item.logits.size());
    for (std::size_t i = 0; i < g.size(); ++i)
        g[i] = focal_grad_scalar(item.logits[i], item.labels[i], cfg);
    return g;
}

inline std::vector<double> asymmetric_grad(const LabeledLogits& item,
                                           const LossConfig& cfg) {
    item.validate();
    require(cfg.family == LossFamily::asymmetric,
            "asymmetric_grad: family must be asymmetric");
    cfg.validate();
    std::vector<double> g(item.logits.size());
    for (std::size_t i = 0; i < g.size(); ++i)
        g[i] = asymmetric_grad_scalar(item.logits[i], item.labels[i], cfg);
    return g;
}

inline std::vector<double> loss_grad(const LabeledLogits& item,
                                     const LossConfig& cfg) {
    item.validate();
    cfg.validate();
    std::vector<double> g(item.logits.size());
    for (std::size_t i = 0; i < g.size(); ++i)
        g[i] = loss_grad_scalar(item.logits[i], item.labels[i], cfg);
    return g;
}

// Dot-product alignment scores between object queries and category queries,
// one row per object, one column per category.
inline DenseMatrix contrastive_alignment(const DenseMatrix& object_queries,
                                         const DenseMatrix& category_queries) {
    require(object_queries.cols == category_queries.cols,
            "contrastive_alignment: embedding dims differ, " +
                object_queries.shape_str() + " vs " +
                category_queries.shape_str());
    return matmul_plain(object_queries, transpose_plain(category_queries));
}

}  // namespace vastvocab
