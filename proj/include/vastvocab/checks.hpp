#pragma once

// Self-contained oracle suite: finite-difference gradient checks and
// brute-force recomputations of the analytic quantities. Everything here is
// deliberately written the slow, obvious way and must stay independent of
// the implementation paths it cross-checks. Consumed by the test binaries
// and by the `selfcheck` CLI command.

#include <cmath>
#include <cstdio>
#include <functional>
#include <string>
#include <vector>

#include "vastvocab/dilution.hpp"
#include "vastvocab/losses.hpp"
#include "vastvocab/matrix.hpp"
#include "vastvocab/nn.hpp"
#include "vastvocab/rng.hpp"
#include "vastvocab/selection.hpp"
#include "vastvocab/synthworld.hpp"
#include "vastvocab/tape.hpp"
#include "vastvocab/taxonomy.hpp"

namespace vastvocab::checks {

struct CheckResult {
    std::string name;
    bool pass = false;
    std::string detail;
};

inline CheckResult ok(std::string name) { return {std::move(name), true, ""}; }
inline CheckResult fail(std::string name, std::string detail) {
    return {std::move(name), false, std::move(detail)};
}

// Central finite differences of a scalar function with respect to every
// entry of x, perturbing x in place.
inline DenseMatrix fd_gradient(const std::function<double()>& f, DenseMatrix& x,
                               double h = 1e-5) {
    DenseMatrix g(x.rows, x.cols);
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double orig = x.data[i];
        x.data[i] = orig + h;
        const double fp = f();
        x.data[i] = orig - h;
        const double fm = f();
        x.data[i] = orig;
        g.data[i] = (fp - fm) / (2.0 * h);
    }
    return g;
}

inline double fd_scalar(const std::function<double(double)>& f, double x,
                        double h = 1e-5) {
    return (f(x + h) - f(x - h)) / (2.0 * h);
}

// |a-f| <= rel_tol * max(|a|,|f|) + abs_floor per entry; returns the worst
// violation margin (<= 0 means pass).
inline double gradient_mismatch(const DenseMatrix& analytic,
                                const DenseMatrix& fd, double rel_tol,
                                double abs_floor) {
    double worst = -1.0;
    for (std::size_t i = 0; i < analytic.size(); ++i) {
        const double a = analytic.data[i];
        const double f = fd.data[i];
        const double err = std::fabs(a - f);
        const double allowed = rel_tol * std::max(std::fabs(a), std::fabs(f)) + abs_floor;
        worst = std::max(worst, err - allowed);
    }
    return worst;
}

inline CheckResult compare_gradients(const std::string& name,
                                     const DenseMatrix& analytic,
                                     const DenseMatrix& fd, double rel_tol,
                                     double abs_floor = 1e-8) {
    if (!analytic.same_shape(fd))
        return fail(name, "gradient shape mismatch " + analytic.shape_str() +
                              " vs " + fd.shape_str());
    const double worst = gradient_mismatch(analytic, fd, rel_tol, abs_floor);
    if (worst > 0.0) {
        char buf[128];
        std::snprintf(buf, sizeof(buf), "worst violation %.3e (rel_tol %.1e)",
                      worst, rel_tol);
        return fail(name, buf);
    }
    return ok(name);
}

// Checks d(probe)/d(param) for every listed parameter of a taped graph.
// build() must construct the full graph from current parameter contents and
// return the scalar probe value; grad_of(i) returns the analytic gradient
// for params[i] from one backward pass.
inline CheckResult check_graph_gradients(
    const std::string& name, const std::vector<DenseMatrix*>& params,
    const std::function<double()>& forward_value,
    const std::function<DenseMatrix(std::size_t)>& analytic_grad,
    double rel_tol = 1e-4) {
    for (std::size_t i = 0; i < params.size(); ++i) {
        DenseMatrix analytic = analytic_grad(i);
        DenseMatrix fd = fd_gradient(forward_value, *params[i]);
        CheckResult r = compare_gradients(name + "[param " + std::to_string(i) + "]",
                                          analytic, fd, rel_tol);
        if (!r.pass) return r;
    }
    return ok(name);
}

// ---- tensor op gradient checks -------------------------------------------

namespace detail {

// One forward graph + probe for a given op; parameters are the graph inputs.
struct ProbeGraph {
    std::vector<DenseMatrix> inputs;
    DenseMatrix probe_weights;
    std::function<Var(Tape&, std::vector<Var>&)> build;

    double value() const {
        Tape t;
        std::vector<Var> vars;
        for (const auto& m : inputs) vars.push_back(t.input(m));
        Var out = build(t, vars);
        Var s = t.weighted_sum(out, probe_weights);
        return t.value(s).data[0];
    }

    DenseMatrix gradient(std::size_t input_index) {
        Tape t;
        std::vector<Var> vars;
        for (const auto& m : inputs) vars.push_back(t.input(m));
        Var out = build(t, vars);
        Var s = t.weighted_sum(out, probe_weights);
        t.backward(s);
        DenseMatrix g = t.grad(vars[input_index]);
        if (g.empty()) g = DenseMatrix(inputs[input_index].rows, inputs[input_index].cols);
        return g;
    }
};

inline CheckResult run_probe(const std::string& name, ProbeGraph& pg,
                             double rel_tol) {
    std::vector<DenseMatrix*> params;
    for (auto& m : pg.inputs) params.push_back(&m);
    return check_graph_gradients(
        name, params, [&] { return pg.value(); },
        [&](std::size_t i) { return pg.gradient(i); }, rel_tol);
}

}  // namespace detail

inline CheckResult check_matmul_gradient(std::uint64_t seed) {
    Rng rng(seed);
    detail::ProbeGraph pg;
    pg.inputs.push_back(rng.gaussian_matrix(5, 7, 0.0, 1.0));
    pg.inputs.push_back(rng.gaussian_matrix(7, 3, 0.0, 1.0));
    pg.probe_weights = rng.gaussian_matrix(5, 3, 0.0, 1.0);
    pg.build = [](Tape& t, std::vector<Var>& v) { return t.matmul(v[0], v[1]); };
    return detail::run_probe("grad.matmul", pg, 1e-6);
}

inline CheckResult check_softmax_gradient(std::uint64_t seed) {
    Rng rng(seed);
    detail::ProbeGraph pg;
    pg.inputs.push_back(rng.gaussian_matrix(4, 6, 0.0, 2.0));
    pg.probe_weights = rng.gaussian_matrix(4, 6, 0.0, 1.0);
    pg.build = [](Tape& t, std::vector<Var>& v) { return t.softmax_rows(v[0]); };
    return detail::run_probe("grad.softmax_rows", pg, 1e-4);
}

inline CheckResult check_layer_norm_gradient(std::uint64_t seed) {
    Rng rng(seed);
    detail::ProbeGraph pg;
    pg.inputs.push_back(rng.gaussian_matrix(3, 8, 0.0, 1.5));
    pg.inputs.push_back(rng.gaussian_matrix(1, 8, 1.0, 0.2));  // gamma
    pg.inputs.push_back(rng.gaussian_matrix(1, 8, 0.0, 0.2));  // beta
    pg.probe_weights = rng.gaussian_matrix(3, 8, 0.0, 1.0);
    pg.build = [](Tape& t, std::vector<Var>& v) {
        return t.layer_norm(v[0], v[1], v[2]);
    };
    return detail::run_probe("grad.layer_norm", pg, 1e-4);
}

inline CheckResult check_gelu_gradient(std::uint64_t seed) {
    Rng rng(seed);
    detail::ProbeGraph pg;
    pg.inputs.push_back(rng.gaussian_matrix(3, 5, 0.0, 2.0));
    pg.probe_weights = rng.gaussian_matrix(3, 5, 0.0, 1.0);
    pg.build = [](Tape& t, std::vector<Var>& v) { return t.gelu(v[0]); };
    return detail::run_probe("grad.gelu", pg, 1e-4);
}

// Full-parameter gradient check of multi-head attention: 4 queries, 9 keys,
// dim 16, 4 heads.
inline CheckResult check_mha_gradient(std::uint64_t seed) {
    Rng rng(seed);
    AttentionConfig cfg{4, 16};
    MultiHeadAttention mha = MultiHeadAttention::init(cfg, rng);
    DenseMatrix q = rng.gaussian_matrix(4, 16, 0.0, 1.0);
    DenseMatrix kv = rng.gaussian_matrix(9, 16, 0.0, 1.0);
    DenseMatrix probe = rng.gaussian_matrix(4, 16, 0.0, 1.0);

    std::vector<ParamRef> refs;
    mha.collect("mha", refs);
    std::vector<DenseMatrix*> params;
    for (auto& r : refs) params.push_back(r.mat);
    params.push_back(&q);
    params.push_back(&kv);

    auto run = [&](bool backward_pass, std::size_t which) {
        Tape t;
        auto pv = mha.push(t);
        Var qv = t.input(q);
        Var kvv = t.input(kv);
        Var out = multi_head_attention(t, qv, kvv, kvv, pv, cfg);
        Var s = t.weighted_sum(out, probe);
        if (!backward_pass) return std::pair<double, DenseMatrix>{t.value(s).data[0], {}};
        t.backward(s);
        std::vector<Var> vars = {pv.wq, pv.wk, pv.wv, pv.wo,
                                 pv.bq, pv.bk, pv.bv, pv.bo, qv, kvv};
        DenseMatrix g = t.grad(vars[which]);
        if (g.empty()) g = DenseMatrix(params[which]->rows, params[which]->cols);
        return std::pair<double, DenseMatrix>{t.value(s).data[0], g};
    };

    return check_graph_gradients(
        "grad.multi_head_attention", params,
        [&] { return run(false, 0).first; },
        [&](std::size_t i) { return run(true, i).second; }, 1e-4);
}

inline CheckResult check_ffn_gradient(std::uint64_t seed) {
    Rng rng(seed);
    FeedForward ffn = FeedForward::init(8, 16, rng);
    DenseMatrix x = rng.gaussian_matrix(2, 8, 0.0, 1.0);
    DenseMatrix probe = rng.gaussian_matrix(2, 8, 0.0, 1.0);

    std::vector<ParamRef> refs;
    ffn.collect("ffn", refs);
    std::vector<DenseMatrix*> params;
    for (auto& r : refs) params.push_back(r.mat);
    params.push_back(&x);

    auto run = [&](bool backward_pass, std::size_t which) {
        Tape t;
        auto pv = ffn.push(t);
        Var xv = t.input(x);
        Var out = ffn_block(t, xv, pv);
        Var s = t.weighted_sum(out, probe);
        if (!backward_pass) return std::pair<double, DenseMatrix>{t.value(s).data[0], {}};
        t.backward(s);
        std::vector<Var> vars = {pv.w1, pv.b1, pv.w2, pv.b2, xv};
        DenseMatrix g = t.grad(vars[which]);
        if (g.empty()) g = DenseMatrix(params[which]->rows, params[which]->cols);
        return std::pair<double, DenseMatrix>{t.value(s).data[0], g};
    };

    return check_graph_gradients(
        "grad.ffn_block", params, [&] { return run(false, 0).first; },
        [&](std::size_t i) { return run(true, i).second; }, 1e-4);
}

// Gradients on a DAG with a shared subexpression must equal the gradients of
// the equivalent graph where the subexpression is duplicated.
inline CheckResult check_shared_subgraph_accumulation(std::uint64_t seed) {
    Rng rng(seed);
    DenseMatrix x = rng.gaussian_matrix(3, 3, 0.0, 1.0);
    DenseMatrix w = rng.gaussian_matrix(3, 3, 0.0, 1.0);
    DenseMatrix probe = rng.gaussian_matrix(3, 3, 0.0, 1.0);

    Tape shared;
    Var xs = shared.input(x);
    Var ws = shared.input(w);
    Var b = shared.matmul(xs, ws);
    Var c = shared.add(b, b);  // b used twice
    shared.backward(shared.weighted_sum(c, probe));

    Tape dup;
    Var xd = dup.input(x);
    Var wd = dup.input(w);
    Var b1 = dup.matmul(xd, wd);
    Var b2 = dup.matmul(xd, wd);  // duplicated subgraph
    Var cd = dup.add(b1, b2);
    dup.backward(dup.weighted_sum(cd, probe));

    return compare_gradients("tape.shared_subgraph", shared.grad(ws),
                             dup.grad(wd), 0.0, 1e-12);
}

// ---- loss gradient checks -------------------------------------------------

// 100 random probes per family against central finite differences of the
// loss value, 1e-8 absolute. ASL probes within 1e-3 of the clip kink in
// p-space are redrawn.
inline CheckResult check_loss_gradients_fd(LossFamily family, std::uint64_t seed,
                                           int probes = 100) {
    Rng rng(seed);
    const std::string name = std::string("grad.loss.") + loss_family_name(family);
    for (int i = 0; i < probes; ++i) {
        LossConfig cfg;
        cfg.family = family;
        cfg.focal_alpha = rng.uniform(0.05, 0.95);
        cfg.focal_gamma = rng.uniform(0.0, 5.0);
        cfg.asl_gamma_pos = rng.uniform(0.0, 3.0);
        cfg.asl_gamma_neg = rng.uniform(0.0, 6.0);
        cfg.asl_clip = rng.uniform(0.0, 0.3);
        const int y = rng.uniform01() < 0.5 ? 0 : 1;
        double z = rng.uniform(-8.0, 8.0);
        if (family == LossFamily::asymmetric && y == 0) {
            while (std::fabs(sigmoid(z) - cfg.asl_clip) < 1e-3)
                z = rng.uniform(-8.0, 8.0);
        }
        const double analytic = loss_grad_scalar(z, y, cfg);
        const double fd =
            fd_scalar([&](double zz) { return loss_value_scalar(zz, y, cfg); }, z);
        if (std::fabs(analytic - fd) > 1e-8) {
            char buf[160];
            std::snprintf(buf, sizeof(buf),
                          "probe %d: z=%.6f y=%d analytic=%.12e fd=%.12e", i, z,
                          y, analytic, fd);
            return fail(name, buf);
        }
    }
    return ok(name);
}

// ---- dilution brute-force oracles ------------------------------------------
// Deliberately naive recomputations: one explicit pass per quantity, one
// category at a time, no shared partitioning logic with dilution.hpp.

namespace oracle {

inline double rho_bruteforce(const LabeledLogits& item, const LossConfig& cfg) {
    double per_positive_sum = 0.0;
    std::size_t positives = 0;
    for (std::size_t p = 0; p < item.labels.size(); ++p) {
        if (item.labels[p] != 1) continue;
        const double gp = std::fabs(loss_grad_scalar(item.logits[p], 1, cfg));
        double denom = 0.0;
        for (std::size_t n = 0; n < item.labels.size(); ++n)
            if (item.labels[n] == 0)
                denom += std::fabs(loss_grad_scalar(item.logits[n], 0, cfg));
        per_positive_sum += gp / denom;
        ++positives;
    }
    return per_positive_sum / static_cast<double>(positives);
}

inline double eta_bruteforce(const LabeledLogits& item, const LossConfig& cfg,
                             double hard_fraction) {
    // rank every negative by (activation desc, index asc) with a full sort
    std::vector<std::pair<double, std::size_t>> by_activation;
    for (std::size_t i = 0; i < item.labels.size(); ++i)
        if (item.labels[i] == 0)
            by_activation.emplace_back(sigmoid(item.logits[i]), i);
    std::sort(by_activation.begin(), by_activation.end(),
              [](const auto& a, const auto& b) {
                  if (a.first != b.first) return a.first > b.first;
                  return a.second < b.second;
              });
    std::size_t n_hard = static_cast<std::size_t>(
        std::ceil(hard_fraction * static_cast<double>(by_activation.size())));
    if (n_hard > by_activation.size()) n_hard = by_activation.size();
    double hard = 0.0, all = 0.0;
    for (std::size_t k = 0; k < by_activation.size(); ++k) {
        const std::size_t i = by_activation[k].second;
        const double g = std::fabs(loss_grad_scalar(item.logits[i], 0, cfg));
        all += g;
        if (k < n_hard) hard += g;
    }
    return hard / all;
}

inline double rho_generalized_direct(std::size_t n_pos, std::size_t n_total,
                                     const LabeledLogits& item,
                                     const LossConfig& cfg) {
    double eps_pos = 0.0, eps_neg = 0.0;
    double np = 0.0, nn = 0.0;
    for (std::size_t i = 0; i < item.labels.size(); ++i) {
        if (item.labels[i] == 1) {
            eps_pos += std::fabs(loss_grad_scalar(item.logits[i], 1, cfg));
            np += 1.0;
        } else {
            eps_neg += std::fabs(loss_grad_scalar(item.logits[i], 0, cfg));
            nn += 1.0;
        }
    }
    eps_pos /= np;
    eps_neg /= nn;
    return static_cast<double>(n_pos) * eps_pos /
           (static_cast<double>(n_total - n_pos) * eps_neg);
}

inline double rebalance_bruteforce(const LabeledLogits& full,
                                   const std::vector<std::size_t>& selected,
                                   const LossConfig& cfg) {
    double all_neg = 0.0;
    for (std::size_t i = 0; i < full.labels.size(); ++i)
        if (full.labels[i] == 0)
            all_neg += std::fabs(loss_grad_scalar(full.logits[i], 0, cfg));
    double sel_neg = 0.0;
    for (std::size_t idx : selected)
        if (full.labels[idx] == 0)
            sel_neg += std::fabs(loss_grad_scalar(full.logits[idx], 0, cfg));
    return all_neg / sel_neg;
}

}  // namespace oracle

// One random instance per call: random logits, random positive set, random
// loss family/hyperparameters, category count up to c_max.
inline CheckResult check_dilution_bruteforce(std::uint64_t seed,
                                             std::size_t c_max = 20000,
                                             int instances = 50) {
    Rng rng(seed);
    for (int k = 0; k < instances; ++k) {
        const auto c = static_cast<std::size_t>(rng.uniform_int(10, static_cast<std::int64_t>(c_max)));
        LabeledLogits item;
        item.logits.resize(c);
        item.labels.assign(c, 0);
        for (auto& z : item.logits) z = rng.uniform(-6.0, 6.0);
        const auto n_pos = static_cast<std::size_t>(rng.uniform_int(1, 3));
        for (std::size_t p = 0; p < n_pos; ++p)
            item.labels[static_cast<std::size_t>(
                rng.uniform_int(0, static_cast<std::int64_t>(c) - 1))] = 1;

        LossConfig cfg;
        const int fam = static_cast<int>(rng.uniform_int(0, 2));
        cfg.family = fam == 0   ? LossFamily::sigmoid_ce
                     : fam == 1 ? LossFamily::focal
                                : LossFamily::asymmetric;
        cfg.focal_alpha = rng.uniform(0.1, 0.9);
        cfg.focal_gamma = rng.uniform(0.0, 4.0);
        cfg.asl_gamma_neg = rng.uniform(0.0, 5.0);
        cfg.asl_clip = rng.uniform(0.0, 0.2);

        const double hf = rng.uniform(0.02, 0.5);

        const double rho_impl = rho(item, cfg);
        const double rho_ref = oracle::rho_bruteforce(item, cfg);
        if (std::fabs(rho_impl - rho_ref) > 1e-12)
            return fail("dilution.rho_bruteforce",
                        "instance " + std::to_string(k) + ": " +
                            std::to_string(rho_impl) + " vs " +
                            std::to_string(rho_ref));

        const double eta_impl = eta(item, cfg, hf);
        const double eta_ref = oracle::eta_bruteforce(item, cfg, hf);
        if (std::fabs(eta_impl - eta_ref) > 1e-12)
            return fail("dilution.eta_bruteforce",
                        "instance " + std::to_string(k));

        const std::size_t total = c * 10;
        const std::size_t npos_samples =
            static_cast<std::size_t>(rng.uniform_int(1, 50));
        const double rg_impl = rho_generalized(npos_samples, total, item, cfg);
        const double rg_ref =
            oracle::rho_generalized_direct(npos_samples, total, item, cfg);
        if (std::fabs(rg_impl - rg_ref) > 1e-12)
            return fail("dilution.rho_generalized_direct",
                        "instance " + std::to_string(k));

        // random selection containing every positive
        std::vector<std::size_t> sel;
        for (std::size_t i = 0; i < c; ++i)
            if (item.labels[i] == 1) sel.push_back(i);
        const std::size_t sel_pos_only = sel.size();
        for (std::size_t i = 0; i < c; ++i)
            if (item.labels[i] == 0 && rng.uniform01() < 0.05) sel.push_back(i);
        if (sel.size() == sel_pos_only) {
            for (std::size_t i = 0; i < c; ++i)
                if (item.labels[i] == 0) {
                    sel.push_back(i);
                    break;
                }
        }
        const double rb_impl = rebalance_factor(item, sel, cfg);
        const double rb_ref = oracle::rebalance_bruteforce(item, sel, cfg);
        if (std::fabs(rb_impl - rb_ref) > 1e-12 * std::max(1.0, rb_ref))
            return fail("dilution.rebalance_bruteforce",
                        "instance " + std::to_string(k));
    }
    return ok("dilution.bruteforce_suite");
}

// ---- taxonomy oracles -------------------------------------------------------

namespace oracle {

// Random forest for oracle runs: each node takes an earlier node as parent
// with the given probability. Ids are shuffled so they are not row indices.
inline CategoryTree random_tree(Rng& rng, std::size_t n,
                                double parent_prob = 0.7) {
    std::vector<int> ids(n);
    for (std::size_t i = 0; i < n; ++i) ids[i] = static_cast<int>(i) * 3 + 1;
    rng.shuffle(ids);
    std::vector<CategoryNode> nodes;
    for (std::size_t i = 0; i < n; ++i) {
        CategoryNode node;
        node.id = ids[i];
        node.name = "cat" + std::to_string(ids[i]);
        if (i > 0 && rng.uniform01() < parent_prob) {
            node.has_parent = true;
            node.parent = ids[static_cast<std::size_t>(
                rng.uniform_int(0, static_cast<std::int64_t>(i) - 1))];
        }
        nodes.push_back(std::move(node));
    }
    return CategoryTree::from_nodes(std::move(nodes));
}

// Plain recursion from scratch, memoized per id.
inline std::vector<double> enhanced_query_recursive(
    const CategoryTree& tree, const CategoryQuerySet& queries,
    const WeightPolicy& policy, int id,
    std::unordered_map<int, std::vector<double>>& memo) {
    auto hit = memo.find(id);
    if (hit != memo.end()) return hit->second;
    const std::size_t d = queries.dim();
    const double* own = queries.embeddings.row(queries.row(id));
    std::vector<double> result(own, own + d);
    const auto& kids = tree.children(id);
    if (!kids.empty()) {
        const std::size_t n_v = kids.size();
        const double ratio = std::log(static_cast<double>(n_v) + 1.0) /
                             std::log(static_cast<double>(tree.max_child_count()) + 1.0);
        double alpha = policy.form == WeightForm::main_text
                           ? policy.w * (1.0 + ratio)
                           : std::min(policy.w + ratio, 1.0);
        std::vector<double> mean(d, 0.0);
        for (int kid : kids) {
            auto sub = enhanced_query_recursive(tree, queries, policy, kid, memo);
            for (std::size_t j = 0; j < d; ++j) mean[j] += sub[j];
        }
        for (std::size_t j = 0; j < d; ++j)
            result[j] = (1.0 - alpha) * own[j] +
                        alpha * mean[j] / static_cast<double>(n_v);
    }
    memo.emplace(id, result);
    return result;
}

// Ancestor walk, one ground-truth id at a time.
inline std::set<int> masked_ancestors_walk(const CategoryTree& tree,
                                           const std::set<int>& gt) {
    std::set<int> out;
    for (int id : gt) {
        int cur = id;
        while (tree.node(cur).has_parent) {
            cur = tree.node(cur).parent;
            out.insert(cur);
        }
    }
    for (int id : gt) out.erase(id);
    return out;
}

}  // namespace oracle

inline CheckResult check_tree_aggregation_oracle(std::uint64_t seed,
                                                 std::size_t nodes = 50) {
    Rng rng(seed);
    CategoryTree tree = oracle::random_tree(rng, nodes);
    CategoryQuerySet queries =
        CategoryQuerySet::seeded(
            [&] {
                std::vector<int> ids;
                for (const auto& n : tree.nodes()) ids.push_back(n.id);
                return ids;
            }(),
            6, rng, 1.0);
    for (auto form : {WeightForm::main_text, WeightForm::appendix}) {
        WeightPolicy policy{form, 0.3};
        CategoryQuerySet got = build_hierarchical_queries(tree, queries, policy);
        std::unordered_map<int, std::vector<double>> memo;
        for (const auto& n : tree.nodes()) {
            auto expect =
                oracle::enhanced_query_recursive(tree, queries, policy, n.id, memo);
            const double* row = got.embeddings.row(got.row(n.id));
            for (std::size_t j = 0; j < expect.size(); ++j)
                if (std::fabs(row[j] - expect[j]) > 1e-12)
                    return fail("taxonomy.tree_aggregation",
                                "node " + std::to_string(n.id) + " col " +
                                    std::to_string(j));
        }
    }
    return ok("taxonomy.tree_aggregation");
}

inline CheckResult check_mask_ancestor_walk(std::uint64_t seed, int rounds = 100) {
    Rng rng(seed);
    for (int r = 0; r < rounds; ++r) {
        const auto n = static_cast<std::size_t>(rng.uniform_int(2, 60));
        CategoryTree tree = oracle::random_tree(rng, n);
        std::set<int> gt;
        const auto picks = static_cast<std::size_t>(
            rng.uniform_int(1, std::min<std::int64_t>(4, static_cast<std::int64_t>(n))));
        while (gt.size() < picks) {
            gt.insert(tree.nodes()[static_cast<std::size_t>(rng.uniform_int(
                                       0, static_cast<std::int64_t>(n) - 1))]
                          .id);
        }
        const std::set<int> got = mask_parent_labels(tree, gt);
        const std::set<int> expect = oracle::masked_ancestors_walk(tree, gt);
        if (got != expect)
            return fail("taxonomy.mask_ancestor_walk",
                        "round " + std::to_string(r) + " mismatch");
        for (int id : gt)
            if (got.count(id))
                return fail("taxonomy.mask_ancestor_walk",
                            "ground-truth id masked: " + std::to_string(id));
    }
    return ok("taxonomy.mask_ancestor_walk");
}

// ---- selection oracles ------------------------------------------------------

inline CheckResult check_topk_sort_oracle(std::uint64_t seed) {
    Rng rng(seed);
    for (int round = 0; round < 5; ++round) {
        const auto c = static_cast<std::size_t>(rng.uniform_int(50, 10000));
        const auto k = static_cast<std::size_t>(
            rng.uniform_int(1, static_cast<std::int64_t>(std::min<std::size_t>(c, 100))));
        std::vector<double> logits(c);
        for (auto& v : logits) v = rng.uniform(-5.0, 5.0);
        DenseMatrix enhanced(c, 1);
        SelectionResult got = topk_select(logits, enhanced, k);
        std::vector<std::size_t> order(c);
        for (std::size_t i = 0; i < c; ++i) order[i] = i;
        std::stable_sort(order.begin(), order.end(),
                         [&](std::size_t a, std::size_t b) {
                             return logits[a] > logits[b];
                         });
        for (std::size_t i = 0; i < k; ++i)
            if (got.indices[i] != static_cast<int>(order[i]))
                return fail("selection.topk_sort_oracle",
                            "round " + std::to_string(round) + " rank " +
                                std::to_string(i));
    }
    return ok("selection.topk_sort_oracle");
}

inline CheckResult check_selection_module_gradient(std::uint64_t seed) {
    Rng rng(seed);
    SelectionModule module = SelectionModule::init(8, 2, 10, rng);
    std::vector<int> ids = {0, 1, 2, 3, 4, 5};
    CategoryQuerySet queries = CategoryQuerySet::seeded(ids, 8, rng, 1.0);
    DenseMatrix features = rng.gaussian_matrix(5, 8, 0.0, 1.0);
    std::vector<std::vector<int>> labels(1, std::vector<int>(6, 0));
    labels[0][2] = 1;
    LossConfig loss = LossConfig::asymmetric();

    std::vector<ParamRef> refs;
    module.collect(refs);
    refs.push_back({"queries", &queries.embeddings});
    std::vector<DenseMatrix*> params;
    for (auto& r : refs) params.push_back(r.mat);

    auto run = [&](bool backward_pass, std::size_t which) {
        Tape t;
        auto v = module.push(t);
        Var qv = t.input(queries.embeddings);
        auto fwd = module.forward(t, qv, t.input(features), v);
        Var l = t.multilabel_loss(fwd.logits, labels, loss, {});
        if (!backward_pass)
            return std::pair<double, DenseMatrix>{t.value(l).data[0], {}};
        t.backward(l);
        std::vector<Var> leaf;
        auto push_mha = [&](const MultiHeadAttention::Vars& m) {
            leaf.insert(leaf.end(),
                        {m.wq, m.wk, m.wv, m.wo, m.bq, m.bk, m.bv, m.bo});
        };
        for (std::size_t layer = 0; layer < 2; ++layer) {
            push_mha(v.layers[layer].attn);
            leaf.push_back(v.layers[layer].ln1.gamma);
            leaf.push_back(v.layers[layer].ln1.beta);
            leaf.push_back(v.layers[layer].ln2.gamma);
            leaf.push_back(v.layers[layer].ln2.beta);
            leaf.push_back(v.layers[layer].ffn.w1);
            leaf.push_back(v.layers[layer].ffn.b1);
            leaf.push_back(v.layers[layer].ffn.w2);
            leaf.push_back(v.layers[layer].ffn.b2);
        }
        leaf.push_back(v.proj_w);
        leaf.push_back(v.proj_b);
        leaf.push_back(qv);
        DenseMatrix g = t.grad(leaf[which]);
        if (g.empty()) g = DenseMatrix(params[which]->rows, params[which]->cols);
        return std::pair<double, DenseMatrix>{t.value(l).data[0], g};
    };

    return check_graph_gradients(
        "grad.selection_module", params, [&] { return run(false, 0).first; },
        [&](std::size_t i) { return run(true, i).second; }, 1e-4);
}

inline CheckResult check_trace_determinism(std::uint64_t seed) {
    DilutionConfig cfg;
    cfg.categories = 300;
    cfg.loss = LossConfig::focal(0.25, 2.0);
    cfg.iters = 40;
    cfg.seed = seed;
    DilutionTrace a = simulate_trace(cfg);
    DilutionTrace b = simulate_trace(cfg);
    if (a.records.size() != b.records.size())
        return fail("rng.trace_determinism", "length differs");
    for (std::size_t i = 0; i < a.records.size(); ++i) {
        if (a.records[i].rho != b.records[i].rho ||
            a.records[i].eta != b.records[i].eta ||
            a.records[i].pos_grad_norm != b.records[i].pos_grad_norm ||
            a.records[i].neg_grad_norm != b.records[i].neg_grad_norm)
            return fail("rng.trace_determinism",
                        "iteration " + std::to_string(i) + " differs");
    }
    return ok("rng.trace_determinism");
}

inline CheckResult check_dataset_roundtrip(std::uint64_t seed) {
    WorldConfig w;
    w.categories = 15;
    w.dim = 6;
    w.tokens_per_image = 4;
    w.labels_lo = 1;
    w.labels_hi = 3;
    w.noise_std = 0.5;
    w.seed = seed;
    DenseMatrix protos = generate_prototypes(w);
    auto data = generate_dataset(w, protos, 12);
    auto back = dataset_from_jsonl(dataset_to_jsonl(data, 4, 6));
    if (back.size() != data.size())
        return fail("io.dataset_roundtrip", "count differs");
    for (std::size_t i = 0; i < data.size(); ++i) {
        if (back[i].ground_truth != data[i].ground_truth ||
            back[i].image_features.data != data[i].image_features.data)
            return fail("io.dataset_roundtrip",
                        "sample " + std::to_string(i) + " differs");
    }
    return ok("io.dataset_roundtrip");
}

inline CheckResult check_relation_encoder_gradient(std::uint64_t seed) {
    Rng rng(seed);
    AttentionConfig cfg{8, 16};
    RelationEncoder enc = RelationEncoder::init(cfg, rng);
    DenseMatrix queries = rng.gaussian_matrix(30, 16, 0.0, 1.0);
    DenseMatrix probe = rng.gaussian_matrix(30, 16, 0.0, 1.0);

    std::vector<ParamRef> refs;
    enc.collect("rel", refs);
    std::vector<DenseMatrix*> params;
    for (auto& r : refs) params.push_back(r.mat);
    params.push_back(&queries);

    auto run = [&](bool backward_pass, std::size_t which) {
        Tape t;
        auto v = enc.push(t);
        Var qv = t.input(queries);
        Var out = enc.forward(t, qv, v);
        Var s = t.weighted_sum(out, probe);
        if (!backward_pass)
            return std::pair<double, DenseMatrix>{t.value(s).data[0], {}};
        t.backward(s);
        std::vector<Var> vars = {v.attn.wq, v.attn.wk, v.attn.wv, v.attn.wo,
                                 v.attn.bq, v.attn.bk, v.attn.bv, v.attn.bo,
                                 v.ln.gamma, v.ln.beta, qv};
        DenseMatrix g = t.grad(vars[which]);
        if (g.empty())
            g = DenseMatrix(params[which]->rows, params[which]->cols);
        return std::pair<double, DenseMatrix>{t.value(s).data[0], g};
    };

    return check_graph_gradients(
        "grad.self_attention_relations", params,
        [&] { return run(false, 0).first; },
        [&](std::size_t i) { return run(true, i).second; }, 1e-4);
}

// ---- suite ------------------------------------------------------------------

// quick: a subset sized to finish well under 30 seconds.
inline std::vector<CheckResult> run_all(bool quick) {
    std::vector<CheckResult> results;
    const int grad_seeds = quick ? 3 : 20;
    auto add_seeded = [&](const std::string& name,
                          const std::function<CheckResult(std::uint64_t)>& fn) {
        for (std::uint64_t s = 1; s <= static_cast<std::uint64_t>(grad_seeds); ++s) {
            CheckResult r = fn(s);
            if (!r.pass) {
                results.push_back(std::move(r));
                return;
            }
        }
        results.push_back(ok(name));
    };
    add_seeded("grad.matmul", check_matmul_gradient);
    add_seeded("grad.softmax_rows", check_softmax_gradient);
    add_seeded("grad.layer_norm", check_layer_norm_gradient);
    add_seeded("grad.gelu", check_gelu_gradient);
    add_seeded("grad.multi_head_attention", check_mha_gradient);
    add_seeded("grad.ffn_block", check_ffn_gradient);
    results.push_back(check_loss_gradients_fd(LossFamily::sigmoid_ce, 2024,
                                              quick ? 25 : 100));
    results.push_back(check_loss_gradients_fd(LossFamily::focal, 2025,
                                              quick ? 25 : 100));
    results.push_back(check_loss_gradients_fd(LossFamily::asymmetric, 2026,
                                              quick ? 25 : 100));
    results.push_back(check_shared_subgraph_accumulation(7));
    results.push_back(check_dilution_bruteforce(101, quick ? 2000 : 20000,
                                                quick ? 10 : 50));
    results.push_back(check_tree_aggregation_oracle(11, 50));
    results.push_back(check_mask_ancestor_walk(404, quick ? 25 : 100));
    results.push_back(check_relation_encoder_gradient(31));
    results.push_back(check_selection_module_gradient(44));
    results.push_back(check_topk_sort_oracle(45));
    results.push_back(check_trace_determinism(77));
    results.push_back(check_dataset_roundtrip(17));
    return results;
}

inline bool all_pass(const std::vector<CheckResult>& results) {
    for (const auto& r : results)
        if (!r.pass) return false;
    return true;
}

}  // namespace vastvocab::checks
