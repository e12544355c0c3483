#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numeric>
#include <set>
#include <string>
#include <vector>

#include "vastvocab/losses.hpp"
#include "vastvocab/rng.hpp"

namespace vastvocab {

// Gradient-dilution metrics at the classification logits. All ratios are
// built from per-category |d loss / d logit| magnitudes under the configured
// loss, so they are invariant to any uniform loss reduction factor.

// rho: positive-to-negative gradient ratio, averaged over positives when
// there are several. Returns +inf when the negative mass is exactly zero.
inline double rho(const LabeledLogits& item, const LossConfig& cfg) {
    item.validate();
    cfg.validate();
    const std::size_t n_pos = item.count_positives();
    require(n_pos >= 1, "rho: needs at least one positive label");
    double neg_mass = 0.0;
    double pos_sum = 0.0;
    for (std::size_t i = 0; i < item.logits.size(); ++i) {
        const double g =
            std::fabs(loss_grad_scalar(item.logits[i], item.labels[i], cfg));
        if (item.labels[i] == 1)
            pos_sum += g;
        else
            neg_mass += g;
    }
    if (neg_mass == 0.0) return std::numeric_limits<double>::infinity();
    return pos_sum / static_cast<double>(n_pos) / neg_mass;
}

// eta: share of negative gradient mass carried by the hard negatives, the
// top ceil(hard_fraction * #negatives) by activation. Ties at the cutoff go
// to the lower category index.
inline double eta(const LabeledLogits& item, const LossConfig& cfg,
                  double hard_fraction) {
    item.validate();
    cfg.validate();
    require(hard_fraction > 0.0 && hard_fraction <= 1.0,
            "eta: hard_fraction must be in (0,1]");
    std::vector<std::size_t> negs;
    for (std::size_t i = 0; i < item.labels.size(); ++i)
        if (item.labels[i] == 0) negs.push_back(i);
    require(!negs.empty(), "eta: needs at least one negative label");
    const auto n_hard = static_cast<std::size_t>(std::min<double>(
        static_cast<double>(negs.size()),
        std::ceil(hard_fraction * static_cast<double>(negs.size()))));
    require(n_hard >= 1, "eta: hard set is empty");

    std::sort(negs.begin(), negs.end(), [&](std::size_t a, std::size_t b) {
        if (item.logits[a] != item.logits[b]) return item.logits[a] > item.logits[b];
        return a < b;
    });
    double hard_mass = 0.0, total = 0.0;
    for (std::size_t k = 0; k < negs.size(); ++k) {
        const double g = std::fabs(loss_grad_scalar(item.logits[negs[k]], 0, cfg));
        total += g;
        if (k < n_hard) hard_mass += g;
    }
    if (total == 0.0) return 0.0;
    return hard_mass / total;
}

// Sample-count-weighted gradient signal ratio:
//   n_pos * eps+ / ((N - n_pos) * eps-)
// with eps+/- the empirical mean gradient magnitudes over the positive and
// negative index sets of the item.
inline double rho_generalized(std::size_t n_pos_samples,
                              std::size_t n_total_samples,
                              const LabeledLogits& item, const LossConfig& cfg) {
    item.validate();
    cfg.validate();
    require(n_pos_samples >= 1, "rho_generalized: n_pos must be >= 1");
    require(n_total_samples > n_pos_samples,
            "rho_generalized: N_total must exceed n_pos");
    double pos_sum = 0.0, neg_sum = 0.0;
    std::size_t pos_n = 0, neg_n = 0;
    for (std::size_t i = 0; i < item.logits.size(); ++i) {
        const double g =
            std::fabs(loss_grad_scalar(item.logits[i], item.labels[i], cfg));
        if (item.labels[i] == 1) {
            pos_sum += g;
            ++pos_n;
        } else {
            neg_sum += g;
            ++neg_n;
        }
    }
    require(pos_n >= 1 && neg_n >= 1,
            "rho_generalized: needs positives and negatives");
    const double eps_pos = pos_sum / static_cast<double>(pos_n);
    const double eps_neg = neg_sum / static_cast<double>(neg_n);
    if (eps_neg == 0.0) return std::numeric_limits<double>::infinity();
    return static_cast<double>(n_pos_samples) * eps_pos /
           (static_cast<double>(n_total_samples - n_pos_samples) * eps_neg);
}

// rho'/rho: total negative gradient mass before selection over the mass of
// the selected negatives. The selection must retain every positive.
inline double rebalance_factor(const LabeledLogits& full,
                               const std::vector<std::size_t>& selected_indices,
                               const LossConfig& cfg) {
    full.validate();
    cfg.validate();
    std::vector<char> selected(full.logits.size(), 0);
    for (std::size_t idx : selected_indices) {
        require(idx < full.logits.size(),
                "rebalance_factor: selected index " + std::to_string(idx) +
                    " out of range");
        selected[idx] = 1;
    }
    for (std::size_t i = 0; i < full.labels.size(); ++i)
        require(full.labels[i] == 0 || selected[i],
                "rebalance_factor: selection missed positive category " +
                    std::to_string(i) + " (selection failed recall)");
    double all_neg = 0.0, sel_neg = 0.0;
    for (std::size_t i = 0; i < full.logits.size(); ++i) {
        if (full.labels[i] == 1) continue;
        const double g = std::fabs(loss_grad_scalar(full.logits[i], 0, cfg));
        all_neg += g;
        if (selected[i]) sel_neg += g;
    }
    if (sel_neg == 0.0) return std::numeric_limits<double>::infinity();
    return all_neg / sel_neg;
}

// ---- simulated training --------------------------------------------------

// Protocol (documented, configurable):
//  * logits start from a seeded Gaussian, mean -2, std 1, so negatives begin
//    mildly suppressed but with non-negligible activation;
//  * one planted positive category, drawn by seed;
//  * gradient descent on the logits; positive and negative coordinates are
//    calibrated separately to unit median |gradient| velocity, measured once
//    at iteration 0. Every loss family then starts with the same typical
//    logit speed in each group, and heavy-tailed gradient distributions
//    expose instability through their outliers: a loss whose hardest
//    negative carries 10^4x the median gradient takes a 10^4-unit step;
//  * any |z| beyond divergence_threshold truncates the trace and flags it.
struct DilutionConfig {
    std::size_t categories = 0;            // C
    std::size_t selected = 0;              // C' (used by rebalance probes)
    std::size_t total_samples = 0;         // N for rho_generalized
    std::size_t positive_samples = 0;      // n_c+ for rho_generalized
    double hard_fraction = 0.10;
    LossConfig loss;
    double lr = 1.0;
    std::size_t iters = 2000;
    std::uint64_t seed = 0;

    bool calibrate_step = true;
    double divergence_threshold = 1e4;
    double init_mean = -2.0;
    double init_std = 1.0;

    void validate() const {
        require(categories >= 2, "DilutionConfig: categories must be >= 2");
        require(selected <= categories, "DilutionConfig: C' must be <= C");
        require(lr >= 0.0, "DilutionConfig: lr must be >= 0");
        require(hard_fraction > 0.0 && hard_fraction <= 1.0,
                "DilutionConfig: hard_fraction must be in (0,1]");
        require(hard_fraction * static_cast<double>(categories - 1) >= 1.0,
                "DilutionConfig: hard_fraction*(C-1) must be >= 1");
        loss.validate();
    }
};

inline double rho_generalized(const DilutionConfig& cfg,
                              const LabeledLogits& item) {
    return rho_generalized(cfg.positive_samples, cfg.total_samples, item,
                           cfg.loss);
}

struct DilutionRecord {
    std::size_t iter = 0;
    double rho = 0.0;
    double eta = 0.0;
    double pos_grad_norm = 0.0;
    double neg_grad_norm = 0.0;
};

struct DilutionTrace {
    std::vector<DilutionRecord> records;
    bool diverged = false;
    std::size_t diverged_at = 0;  // iteration at which |z| crossed the threshold

    double mean_rho(std::size_t first_n) const {
        const std::size_t n = std::min(first_n, records.size());
        require(n > 0, "mean_rho: empty trace");
        double s = 0.0;
        for (std::size_t i = 0; i < n; ++i) s += records[i].rho;
        return s / static_cast<double>(n);
    }
};

inline DilutionTrace simulate_trace(const DilutionConfig& cfg) {
    cfg.validate();
    Rng rng(cfg.seed);
    const std::size_t c = cfg.categories;

    LabeledLogits item;
    item.logits.resize(c);
    item.labels.assign(c, 0);
    for (auto& z : item.logits) z = rng.gaussian(cfg.init_mean, cfg.init_std);
    const auto pos =
        static_cast<std::size_t>(rng.uniform_int(0, static_cast<std::int64_t>(c) - 1));
    item.labels[pos] = 1;

    DilutionTrace trace;
    trace.records.reserve(cfg.iters);
    double scale_pos = cfg.lr;
    double scale_neg = cfg.lr;

    auto group_scale = [&](const std::vector<double>& grads, int label) {
        std::vector<double> mags;
        for (std::size_t i = 0; i < c; ++i)
            if (item.labels[i] == label) mags.push_back(std::fabs(grads[i]));
        if (mags.empty()) return 0.0;
        std::nth_element(mags.begin(), mags.begin() + mags.size() / 2, mags.end());
        double calib = mags[mags.size() / 2];
        if (calib <= 0.0) {
            // degenerate median (e.g. a wide ASL clip); fall back to mean
            calib = std::accumulate(mags.begin(), mags.end(), 0.0) /
                    static_cast<double>(mags.size());
        }
        return calib > 0.0 ? cfg.lr / calib : 0.0;
    };

    for (std::size_t it = 0; it < cfg.iters; ++it) {
        std::vector<double> grads(c);
        for (std::size_t i = 0; i < c; ++i)
            grads[i] = loss_grad_scalar(item.logits[i], item.labels[i], cfg.loss);

        if (it == 0 && cfg.calibrate_step) {
            scale_pos = group_scale(grads, 1);
            scale_neg = group_scale(grads, 0);
        }

        DilutionRecord rec;
        rec.iter = it;
        rec.rho = rho(item, cfg.loss);
        rec.eta = eta(item, cfg.loss, cfg.hard_fraction);
        double pos_sq = 0.0, neg_sq = 0.0;
        for (std::size_t i = 0; i < c; ++i) {
            const double g2 = grads[i] * grads[i];
            if (item.labels[i] == 1)
                pos_sq += g2;
            else
                neg_sq += g2;
        }
        rec.pos_grad_norm = std::sqrt(pos_sq);
        rec.neg_grad_norm = std::sqrt(neg_sq);
        trace.records.push_back(rec);

        bool blew_up = false;
        for (std::size_t i = 0; i < c; ++i) {
            item.logits[i] -= (item.labels[i] == 1 ? scale_pos : scale_neg) * grads[i];
            if (std::fabs(item.logits[i]) > cfg.divergence_threshold) blew_up = true;
        }
        if (blew_up) {
            trace.diverged = true;
            trace.diverged_at = it + 1;
            break;
        }
    }
    return trace;
}

inline std::string trace_to_csv(const DilutionTrace& trace);

}  // namespace vastvocab

#include "vastvocab/io.hpp"

namespace vastvocab {

inline std::string trace_to_csv(const DilutionTrace& trace) {
    std::string out = "iter,rho,eta,pos_grad_norm,neg_grad_norm\n";
    for (const auto& r : trace.records) {
        out += std::to_string(r.iter);
        out += ',';
        out += fmt_double(r.rho);
        out += ',';
        out += fmt_double(r.eta);
        out += ',';
        out += fmt_double(r.pos_grad_norm);
        out += ',';
        out += fmt_double(r.neg_grad_norm);
        out += '\n';
    }
    return out;
}

}  // namespace vastvocab
