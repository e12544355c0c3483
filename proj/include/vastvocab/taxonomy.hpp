#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <set>
#include <string>
#include <unordered_map>
#include <vector>

#include "json.hpp"
#include "vastvocab/matrix.hpp"
#include "vastvocab/nn.hpp"
#include "vastvocab/rng.hpp"

namespace vastvocab {

struct CategoryNode {
    int id = 0;
    std::string name;
    bool has_parent = false;
    int parent = 0;
};

// Forest of category nodes. Derived fields are rebuilt by finalize():
// children lists, per-node child counts, the maximum child count, and a
// bottom-up topological order (every child precedes its parent).
class CategoryTree {
public:
    static CategoryTree from_nodes(std::vector<CategoryNode> nodes) {
        CategoryTree t;
        t.nodes_ = std::move(nodes);
        t.finalize();
        return t;
    }

    std::size_t size() const { return nodes_.size(); }
    const std::vector<CategoryNode>& nodes() const { return nodes_; }

    bool contains(int id) const { return index_.count(id) > 0; }

    const CategoryNode& node(int id) const { return nodes_[index_of(id)]; }

    const std::vector<int>& children(int id) const {
        return children_[index_of(id)];
    }

    std::size_t child_count(int id) const { return children(id).size(); }
    bool is_leaf(int id) const { return children(id).empty(); }

    std::size_t max_child_count() const { return n_max_; }

    // child-before-parent order
    const std::vector<int>& bottom_up_order() const { return bottom_up_; }

    std::vector<int> roots() const {
        std::vector<int> r;
        for (const auto& n : nodes_)
            if (!n.has_parent) r.push_back(n.id);
        return r;
    }

    // Strict ancestors of id, nearest first.
    std::vector<int> ancestors(int id) const {
        std::vector<int> out;
        const CategoryNode* cur = &node(id);
        while (cur->has_parent) {
            out.push_back(cur->parent);
            cur = &node(cur->parent);
        }
        return out;
    }

private:
    std::size_t index_of(int id) const {
        auto it = index_.find(id);
        require(it != index_.end(),
                "CategoryTree: unknown category id " + std::to_string(id));
        return it->second;
    }

    void finalize() {
        index_.clear();
        for (std::size_t i = 0; i < nodes_.size(); ++i) {
            const auto [it, inserted] = index_.emplace(nodes_[i].id, i);
            (void)it;
            require(inserted, "CategoryTree: duplicate id " +
                                  std::to_string(nodes_[i].id));
        }
        children_.assign(nodes_.size(), {});
        for (const auto& n : nodes_) {
            if (!n.has_parent) continue;
            auto it = index_.find(n.parent);
            require(it != index_.end(),
                    "CategoryTree: node " + std::to_string(n.id) +
                        " has dangling parent " + std::to_string(n.parent));
            children_[it->second].push_back(n.id);
        }
        n_max_ = 0;
        for (const auto& ch : children_) n_max_ = std::max(n_max_, ch.size());

        // cycle detection via parent walks, reporting the offending chain
        std::vector<int> state(nodes_.size(), 0);  // 0 new, 1 visiting, 2 done
        for (const auto& start : nodes_) {
            if (state[index_of(start.id)] == 2) continue;
            std::vector<int> chain;
            const CategoryNode* cur = &start;
            while (true) {
                const std::size_t idx = index_of(cur->id);
                if (state[idx] == 2) break;
                if (state[idx] == 1) {
                    std::string msg = "CategoryTree: cycle detected: ";
                    bool in_cycle = false;
                    for (int cid : chain) {
                        if (cid == cur->id) in_cycle = true;
                        if (in_cycle) msg += std::to_string(cid) + " -> ";
                    }
                    msg += std::to_string(cur->id);
                    throw std::invalid_argument(msg);
                }
                state[idx] = 1;
                chain.push_back(cur->id);
                if (!cur->has_parent) break;
                cur = &node(cur->parent);
            }
            for (int cid : chain) state[index_of(cid)] = 2;
        }

        // bottom-up order: repeatedly emit nodes whose children are all done
        bottom_up_.clear();
        bottom_up_.reserve(nodes_.size());
        std::vector<std::size_t> pending(nodes_.size());
        std::vector<int> ready;
        for (std::size_t i = 0; i < nodes_.size(); ++i) {
            pending[i] = children_[i].size();
            if (pending[i] == 0) ready.push_back(nodes_[i].id);
        }
        for (std::size_t k = 0; k < ready.size(); ++k) {
            const int id = ready[k];
            bottom_up_.push_back(id);
            const CategoryNode& n = node(id);
            if (n.has_parent && --pending[index_of(n.parent)] == 0)
                ready.push_back(n.parent);
        }
        require(bottom_up_.size() == nodes_.size(),
                "CategoryTree: unreachable nodes (cycle)");
    }

    std::vector<CategoryNode> nodes_;
    std::unordered_map<int, std::size_t> index_;
    std::vector<std::vector<int>> children_;
    std::size_t n_max_ = 0;
    std::vector<int> bottom_up_;
};

// Taxonomy file: a JSON array of {"id": int, "name": string,
// "parent": int|null}. Order-independent; diagnostics name the record.
inline CategoryTree load_tree(const std::string& json_text) {
    nlohmann::json doc;
    try {
        doc = nlohmann::json::parse(json_text);
    } catch (const nlohmann::json::exception& e) {
        throw std::invalid_argument(std::string("taxonomy: not valid JSON: ") +
                                    e.what());
    }
    require(doc.is_array(), "taxonomy: top-level value must be an array");
    std::vector<CategoryNode> nodes;
    nodes.reserve(doc.size());
    for (std::size_t i = 0; i < doc.size(); ++i) {
        const auto& rec = doc[i];
        const std::string where = "taxonomy: record " + std::to_string(i);
        require(rec.is_object(), where + " is not an object");
        require(rec.contains("id") && rec["id"].is_number_integer(),
                where + ": missing integer 'id'");
        require(rec.contains("name") && rec["name"].is_string(),
                where + ": missing string 'name'");
        require(rec.contains("parent"), where + ": missing 'parent'");
        CategoryNode n;
        n.id = rec["id"].get<int>();
        n.name = rec["name"].get<std::string>();
        if (!rec["parent"].is_null()) {
            require(rec["parent"].is_number_integer(),
                    where + ": 'parent' must be an integer or null");
            n.has_parent = true;
            n.parent = rec["parent"].get<int>();
        }
        nodes.push_back(std::move(n));
    }
    return CategoryTree::from_nodes(std::move(nodes));
}

inline std::string tree_to_json(const CategoryTree& tree) {
    nlohmann::ordered_json arr = nlohmann::ordered_json::array();
    for (const auto& n : tree.nodes()) {
        nlohmann::ordered_json rec;
        rec["id"] = n.id;
        rec["name"] = n.name;
        if (n.has_parent)
            rec["parent"] = n.parent;
        else
            rec["parent"] = nullptr;
        arr.push_back(rec);
    }
    return arr.dump(2) + "\n";
}

// Learnable category embeddings, one row per category id.
struct CategoryQuerySet {
    DenseMatrix embeddings;  // C x D
    std::vector<int> ids;    // row -> id
    std::unordered_map<int, std::size_t> row_of;

    // init_std <= 0 picks the width-scaled default 1/sqrt(dim)
    static CategoryQuerySet seeded(const std::vector<int>& ids, std::size_t dim,
                                   Rng& rng, double init_std = 0.0) {
        if (init_std <= 0.0) init_std = weight_init_std(dim);
        CategoryQuerySet qs;
        qs.ids = ids;
        qs.embeddings = rng.gaussian_matrix(ids.size(), dim, 0.0, init_std);
        for (std::size_t r = 0; r < ids.size(); ++r) {
            const auto [it, inserted] = qs.row_of.emplace(ids[r], r);
            (void)it;
            require(inserted, "CategoryQuerySet: duplicate id " +
                                  std::to_string(ids[r]));
        }
        return qs;
    }

    static CategoryQuerySet from_matrix(const std::vector<int>& ids,
                                        DenseMatrix m) {
        require(ids.size() == m.rows, "CategoryQuerySet: row count mismatch");
        CategoryQuerySet qs;
        qs.ids = ids;
        qs.embeddings = std::move(m);
        for (std::size_t r = 0; r < ids.size(); ++r) {
            const auto [it, inserted] = qs.row_of.emplace(ids[r], r);
            (void)it;
            require(inserted, "CategoryQuerySet: duplicate id " +
                                  std::to_string(ids[r]));
        }
        return qs;
    }

    std::size_t count() const { return embeddings.rows; }
    std::size_t dim() const { return embeddings.cols; }

    std::size_t row(int id) const {
        auto it = row_of.find(id);
        require(it != row_of.end(),
                "CategoryQuerySet: unknown id " + std::to_string(id));
        return it->second;
    }
};

// Two published forms of the adaptive mixing weight:
//   main:     alpha = w * (1 + log(n+1)/log(Nmax+1)), range [w, 2w]
//   appendix: alpha = min(w + log(n+1)/log(Nmax+1), 1)
enum class WeightForm { main_text, appendix };

struct WeightPolicy {
    WeightForm form = WeightForm::main_text;
    double w = 0.3;

    void validate() const {
        require(w >= 0.0 && w <= 0.5,
                "WeightPolicy: w must be in [0, 0.5], got " + fmt_w());
    }
    std::string fmt_w() const { return std::to_string(w); }
};

// alpha for a node; leaves get 0 (no aggregation is applied to them).
inline double adaptive_weight(const CategoryTree& tree, int id,
                              const WeightPolicy& policy) {
    policy.validate();
    const std::size_t n_v = tree.child_count(id);
    if (n_v == 0) return 0.0;
    const double n_max = static_cast<double>(tree.max_child_count());
    const double ratio = std::log(static_cast<double>(n_v) + 1.0) /
                         std::log(n_max + 1.0);
    if (policy.form == WeightForm::main_text) return policy.w * (1.0 + ratio);
    return std::min(policy.w + ratio, 1.0);
}

// Bottom-up enhancement: parents blend their own query with the mean of
// their children's already-enhanced queries; leaves pass through unchanged.
// The input query set is not mutated.
inline CategoryQuerySet build_hierarchical_queries(const CategoryTree& tree,
                                                   const CategoryQuerySet& queries,
                                                   const WeightPolicy& policy) {
    policy.validate();
    for (const auto& n : tree.nodes())
        queries.row(n.id);  // every tree node needs a query row

    CategoryQuerySet out = queries;
    const std::size_t d = queries.dim();
    for (int id : tree.bottom_up_order()) {
        const auto& kids = tree.children(id);
        if (kids.empty()) continue;
        const double alpha = adaptive_weight(tree, id, policy);
        std::vector<double> mean(d, 0.0);
        for (int kid : kids) {
            const double* krow = out.embeddings.row(out.row(kid));
            for (std::size_t j = 0; j < d; ++j) mean[j] += krow[j];
        }
        const double inv = 1.0 / static_cast<double>(kids.size());
        const std::size_t r = out.row(id);
        const double* own = queries.embeddings.row(r);
        double* dst = out.embeddings.row(r);
        for (std::size_t j = 0; j < d; ++j)
            dst[j] = (1.0 - alpha) * own[j] + alpha * mean[j] * inv;
    }
    return out;
}

// Strict ancestors of any ground-truth id; these are dropped from the
// classification loss (neither positive nor negative). Ground-truth ids are
// never masked.
inline std::set<int> mask_parent_labels(const CategoryTree& tree,
                                        const std::set<int>& ground_truth) {
    std::set<int> masked;
    for (int id : ground_truth) {
        for (int anc : tree.ancestors(id)) masked.insert(anc);
    }
    for (int id : ground_truth) masked.erase(id);
    return masked;
}

// One self-attention block with residual and layer norm over the category
// queries; learns implicit category relations when no tree is available.
struct RelationEncoder {
    AttentionConfig cfg;
    MultiHeadAttention attn;
    LayerNormParams ln;

    static RelationEncoder init(const AttentionConfig& cfg, Rng& rng) {
        RelationEncoder enc;
        enc.cfg = cfg;
        enc.attn = MultiHeadAttention::init(cfg, rng);
        enc.ln = LayerNormParams::init(cfg.model_dim);
        return enc;
    }

    struct Vars {
        MultiHeadAttention::Vars attn;
        LayerNormParams::Vars ln;
    };
    Vars push(Tape& t) const { return Vars{attn.push(t), ln.push(t)}; }

    Var forward(Tape& t, Var q_cat, const Vars& v) const {
        Var a = multi_head_attention(t, q_cat, q_cat, q_cat, v.attn, cfg);
        return t.layer_norm(t.add(a, q_cat), v.ln.gamma, v.ln.beta);
    }

    void collect(const std::string& prefix, std::vector<ParamRef>& out) {
        attn.collect(prefix + ".attn", out);
        ln.collect(prefix + ".ln", out);
    }
};

inline CategoryQuerySet self_attention_relations(const CategoryQuerySet& queries,
                                                 const RelationEncoder& enc) {
    require(queries.count() >= 2,
            "self_attention_relations: needs at least 2 categories");
    Tape t;
    auto v = enc.push(t);
    Var out = enc.forward(t, t.input(queries.embeddings), v);
    return CategoryQuerySet::from_matrix(queries.ids, t.value(out));
}

}  // namespace vastvocab
