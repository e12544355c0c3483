#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <set>
#include <string>
#include <vector>

#include "json.hpp"
#include "vastvocab/io.hpp"
#include "vastvocab/matrix.hpp"
#include "vastvocab/rng.hpp"
#include "vastvocab/taxonomy.hpp"

namespace vastvocab {

// Synthetic stand-in for a vast-vocabulary detection dataset: a generated
// taxonomy, category prototype embeddings, and planted-signal image features.
// Every generator derives its own stream from the base seed via split_seed,
// so generation is reproducible and parallel-safe per stream.
struct WorldConfig {
    std::size_t categories = 100;     // C
    std::size_t dim = 32;             // D
    std::size_t tree_depth = 1;
    std::size_t branching_lo = 2;
    std::size_t branching_hi = 4;
    std::size_t tokens_per_image = 8;  // H'W' stand-in
    std::size_t labels_lo = 1;
    std::size_t labels_hi = 3;
    double signal_strength = 2.0;
    double noise_std = 0.0;
    double zipf_exponent = 0.0;  // 0 = uniform label frequencies
    bool orthonormal_prototypes = false;
    std::uint64_t seed = 0;

    void validate() const {
        require(categories >= 1, "WorldConfig: categories must be >= 1");
        require(dim >= 1, "WorldConfig: dim must be >= 1");
        require(tree_depth >= 1, "WorldConfig: tree_depth must be >= 1");
        require(branching_lo >= 1 && branching_lo <= branching_hi,
                "WorldConfig: invalid branching range");
        require(labels_lo >= 1 && labels_lo <= labels_hi &&
                    labels_hi <= categories,
                "WorldConfig: invalid labels_per_image range");
        require(tokens_per_image >= labels_hi,
                "WorldConfig: tokens_per_image must cover labels_hi so every "
                "ground-truth category receives at least one token");
        require(signal_strength >= 0.0, "WorldConfig: signal_strength < 0");
        require(noise_std >= 0.0, "WorldConfig: noise_std < 0");
        require(zipf_exponent >= 0.0, "WorldConfig: zipf_exponent < 0");
        if (orthonormal_prototypes)
            require(categories <= dim,
                    "WorldConfig: orthonormal prototypes need dim >= categories");
    }
};

struct SyntheticSample {
    DenseMatrix image_features;  // tokens x D
    std::set<int> ground_truth;
};

// ---- taxonomy generation --------------------------------------------------

namespace synth_detail {

// Per-subtree node-count bounds for a uniform-depth tree with the given
// branching range.
inline void depth_bounds(std::size_t depth, std::size_t lo, std::size_t hi,
                         double& min_total, double& max_total) {
    min_total = 1.0;
    max_total = 1.0;
    double lo_pow = 1.0, hi_pow = 1.0;
    for (std::size_t level = 1; level < depth; ++level) {
        lo_pow *= static_cast<double>(lo);
        hi_pow *= static_cast<double>(hi);
        min_total += lo_pow;
        max_total += hi_pow;
        if (max_total > 1e15) max_total = 1e15;
    }
}

}  // namespace synth_detail

// Seeded random forest with all leaves at the requested depth and every
// internal node's child count inside the branching range; node count is
// exactly cfg.categories or the combination is rejected.
inline CategoryTree generate_taxonomy(const WorldConfig& cfg) {
    cfg.validate();
    Rng rng(split_seed(cfg.seed, 0));
    const std::size_t c = cfg.categories;

    if (cfg.tree_depth == 1) {
        std::vector<CategoryNode> nodes(c);
        for (std::size_t i = 0; i < c; ++i) {
            nodes[i].id = static_cast<int>(i);
            nodes[i].name = "cat_" + std::to_string(i);
        }
        return CategoryTree::from_nodes(std::move(nodes));
    }

    const std::size_t lo = cfg.branching_lo, hi = cfg.branching_hi;
    double sub_min = 0.0, sub_max = 0.0;
    synth_detail::depth_bounds(cfg.tree_depth, lo, hi, sub_min, sub_max);

    // feasible root counts
    std::vector<std::size_t> feasible_roots;
    for (std::size_t r = 1; r <= c; ++r) {
        const double need = static_cast<double>(c);
        if (static_cast<double>(r) * sub_min <= need &&
            static_cast<double>(r) * sub_max >= need)
            feasible_roots.push_back(r);
    }
    require(!feasible_roots.empty(),
            "generate_taxonomy: no uniform-depth forest with depth " +
                std::to_string(cfg.tree_depth) + ", branching [" +
                std::to_string(lo) + "," + std::to_string(hi) + "] and " +
                std::to_string(c) + " categories");

    // choose level sizes, keeping the remaining levels feasible
    std::vector<std::size_t> level_sizes;
    std::size_t remaining = 0;
    bool built = false;
    for (int attempt = 0; attempt < 64 && !built; ++attempt) {
        level_sizes.clear();
        const std::size_t r = feasible_roots[static_cast<std::size_t>(rng.uniform_int(
            0, static_cast<std::int64_t>(feasible_roots.size()) - 1))];
        level_sizes.push_back(r);
        remaining = c - r;
        built = true;
        for (std::size_t level = 1; level < cfg.tree_depth; ++level) {
            const std::size_t cur = level_sizes.back();
            double below_min = 0.0, below_max = 0.0;
            synth_detail::depth_bounds(cfg.tree_depth - level, lo, hi, below_min,
                                       below_max);
            // next size s must satisfy: cur*lo <= s <= cur*hi and the nodes
            // below s (inclusive of s) must absorb exactly `remaining`
            std::size_t s_lo = cur * lo, s_hi = cur * hi;
            std::size_t pick_lo = 0, pick_hi = 0;
            bool any = false;
            for (std::size_t s = s_lo; s <= s_hi; ++s) {
                const double rest = static_cast<double>(remaining);
                if (static_cast<double>(s) * below_min <= rest &&
                    static_cast<double>(s) * below_max >= rest) {
                    if (!any) pick_lo = s;
                    pick_hi = s;
                    any = true;
                }
            }
            if (!any) {
                built = false;
                break;
            }
            const auto s = static_cast<std::size_t>(
                rng.uniform_int(static_cast<std::int64_t>(pick_lo),
                                static_cast<std::int64_t>(pick_hi)));
            level_sizes.push_back(s);
            remaining -= s;
        }
        if (built && remaining != 0) built = false;
    }
    require(built, "generate_taxonomy: level layout search failed");

    // materialize nodes level by level; distribute children as lo + extras
    std::vector<CategoryNode> nodes;
    nodes.reserve(c);
    int next_id = 0;
    std::vector<int> prev_level;
    for (std::size_t level = 0; level < level_sizes.size(); ++level) {
        std::vector<int> this_level;
        const std::size_t count = level_sizes[level];
        std::vector<std::size_t> kids_of;
        if (level > 0) {
            const std::size_t parents = prev_level.size();
            kids_of.assign(parents, lo);
            std::size_t extras = count - parents * lo;
            while (extras > 0) {
                const auto p = static_cast<std::size_t>(rng.uniform_int(
                    0, static_cast<std::int64_t>(parents) - 1));
                if (kids_of[p] < hi) {
                    ++kids_of[p];
                    --extras;
                }
            }
        }
        std::size_t parent_cursor = 0, assigned = 0;
        for (std::size_t i = 0; i < count; ++i) {
            CategoryNode n;
            n.id = next_id++;
            n.name = "cat_" + std::to_string(n.id);
            if (level > 0) {
                while (assigned == kids_of[parent_cursor]) {
                    ++parent_cursor;
                    assigned = 0;
                }
                n.has_parent = true;
                n.parent = prev_level[parent_cursor];
                ++assigned;
            }
            this_level.push_back(n.id);
            nodes.push_back(std::move(n));
        }
        prev_level = std::move(this_level);
    }
    return CategoryTree::from_nodes(std::move(nodes));
}

// Category prototypes, one unit-scale row per category. The orthonormal mode
// (modified Gram-Schmidt over a seeded Gaussian) gives the provable
// separability baseline.
inline DenseMatrix generate_prototypes(const WorldConfig& cfg) {
    cfg.validate();
    Rng rng(split_seed(cfg.seed, 1));
    if (!cfg.orthonormal_prototypes) {
        return rng.gaussian_matrix(cfg.categories, cfg.dim, 0.0,
                                   1.0 / std::sqrt(static_cast<double>(cfg.dim)));
    }
    DenseMatrix m = rng.gaussian_matrix(cfg.categories, cfg.dim, 0.0, 1.0);
    for (std::size_t i = 0; i < m.rows; ++i) {
        double* ri = m.row(i);
        for (std::size_t k = 0; k < i; ++k) {
            const double* rk = m.row(k);
            double dot = 0.0;
            for (std::size_t j = 0; j < m.cols; ++j) dot += ri[j] * rk[j];
            for (std::size_t j = 0; j < m.cols; ++j) ri[j] -= dot * rk[j];
        }
        double norm = 0.0;
        for (std::size_t j = 0; j < m.cols; ++j) norm += ri[j] * ri[j];
        norm = std::sqrt(norm);
        require(norm > 1e-10, "generate_prototypes: degenerate Gram-Schmidt row");
        for (std::size_t j = 0; j < m.cols; ++j) ri[j] /= norm;
    }
    return m;
}

// Ground-truth draw: without replacement, uniform or Zipf-weighted by
// category index (weight 1/(index+1)^s).
inline std::set<int> draw_ground_truth(const WorldConfig& cfg, Rng& rng) {
    const auto count = static_cast<std::size_t>(
        rng.uniform_int(static_cast<std::int64_t>(cfg.labels_lo),
                        static_cast<std::int64_t>(cfg.labels_hi)));
    std::set<int> gt;
    if (cfg.zipf_exponent == 0.0) {
        while (gt.size() < count)
            gt.insert(static_cast<int>(rng.uniform_int(
                0, static_cast<std::int64_t>(cfg.categories) - 1)));
        return gt;
    }
    std::vector<double> weights(cfg.categories);
    double total = 0.0;
    for (std::size_t i = 0; i < cfg.categories; ++i) {
        weights[i] = 1.0 / std::pow(static_cast<double>(i + 1), cfg.zipf_exponent);
        total += weights[i];
    }
    while (gt.size() < count) {
        double u = rng.uniform01() * total;
        std::size_t pick = cfg.categories - 1;
        for (std::size_t i = 0; i < cfg.categories; ++i) {
            if (u < weights[i]) {
                pick = i;
                break;
            }
            u -= weights[i];
        }
        gt.insert(static_cast<int>(pick));
    }
    return gt;
}

// Tokens: each ground-truth category claims at least one token (round-robin
// before shuffling), token = signal_strength * prototype + Gaussian noise.
inline SyntheticSample generate_sample(const WorldConfig& cfg,
                                       const DenseMatrix& prototypes, Rng& rng) {
    require(prototypes.rows == cfg.categories,
            "generate_sample: prototype row count != categories");
    require(prototypes.cols == cfg.dim, "generate_sample: prototype dim mismatch");
    SyntheticSample s;
    s.ground_truth = draw_ground_truth(cfg, rng);

    std::vector<int> assignment;
    assignment.reserve(cfg.tokens_per_image);
    std::vector<int> gt_list(s.ground_truth.begin(), s.ground_truth.end());
    for (std::size_t t = 0; t < cfg.tokens_per_image; ++t)
        assignment.push_back(gt_list[t % gt_list.size()]);
    rng.shuffle(assignment);

    s.image_features = DenseMatrix(cfg.tokens_per_image, cfg.dim);
    for (std::size_t t = 0; t < cfg.tokens_per_image; ++t) {
        const double* proto = prototypes.row(static_cast<std::size_t>(assignment[t]));
        double* dst = s.image_features.row(t);
        for (std::size_t j = 0; j < cfg.dim; ++j) {
            dst[j] = cfg.signal_strength * proto[j];
            if (cfg.noise_std > 0.0) dst[j] += rng.gaussian(0.0, cfg.noise_std);
        }
    }
    return s;
}

// Sample stream i draws from split_seed(seed, 2 + i).
inline std::vector<SyntheticSample> generate_dataset(const WorldConfig& cfg,
                                                     const DenseMatrix& prototypes,
                                                     std::size_t count) {
    std::vector<SyntheticSample> out;
    out.reserve(count);
    for (std::size_t i = 0; i < count; ++i) {
        Rng rng(split_seed(cfg.seed, 2 + i));
        out.push_back(generate_sample(cfg, prototypes, rng));
    }
    return out;
}

// ---- dataset serialization --------------------------------------------------
// JSON-lines document: a versioned header record, then one record per sample
// with the ground-truth ids and the base64-encoded little-endian feature rows.

inline constexpr const char* kDatasetFormat = "vastvocab-dataset";
inline constexpr int kDatasetVersion = 1;

inline std::string dataset_to_jsonl(const std::vector<SyntheticSample>& samples,
                                    std::size_t tokens, std::size_t dim) {
    nlohmann::ordered_json header;
    header["format"] = kDatasetFormat;
    header["version"] = kDatasetVersion;
    header["tokens"] = tokens;
    header["dim"] = dim;
    header["count"] = samples.size();
    std::string out = header.dump() + "\n";
    for (const auto& s : samples) {
        require(s.image_features.rows == tokens && s.image_features.cols == dim,
                "dataset_to_jsonl: inconsistent sample shape");
        nlohmann::ordered_json rec;
        rec["gt"] = std::vector<int>(s.ground_truth.begin(), s.ground_truth.end());
        rec["features"] = base64_encode_doubles(s.image_features.data);
        out += rec.dump() + "\n";
    }
    return out;
}

inline std::vector<SyntheticSample> dataset_from_jsonl(const std::string& text) {
    std::vector<std::string> lines;
    std::size_t start = 0;
    while (start < text.size()) {
        const std::size_t end = text.find('\n', start);
        const std::size_t stop = end == std::string::npos ? text.size() : end;
        if (stop > start) lines.push_back(text.substr(start, stop - start));
        if (end == std::string::npos) break;
        start = end + 1;
    }
    require(!lines.empty(), "dataset: empty document");
    nlohmann::json header;
    try {
        header = nlohmann::json::parse(lines[0]);
    } catch (const nlohmann::json::exception& e) {
        throw std::invalid_argument(std::string("dataset: bad header: ") + e.what());
    }
    require(header.value("format", "") == kDatasetFormat,
            "dataset: unknown format marker");
    require(header.value("version", 0) == kDatasetVersion,
            "dataset: unsupported version");
    const auto tokens = header.at("tokens").get<std::size_t>();
    const auto dim = header.at("dim").get<std::size_t>();

    std::vector<SyntheticSample> out;
    for (std::size_t i = 1; i < lines.size(); ++i) {
        nlohmann::json rec;
        try {
            rec = nlohmann::json::parse(lines[i]);
        } catch (const nlohmann::json::exception& e) {
            throw std::invalid_argument("dataset: bad record " + std::to_string(i) +
                                        ": " + e.what());
        }
        SyntheticSample s;
        for (int id : rec.at("gt").get<std::vector<int>>()) s.ground_truth.insert(id);
        auto values = base64_decode_doubles(rec.at("features").get<std::string>());
        require(values.size() == tokens * dim,
                "dataset: record " + std::to_string(i) + " has wrong feature size");
        s.image_features = DenseMatrix(tokens, dim);
        s.image_features.data = std::move(values);
        out.push_back(std::move(s));
    }
    require(out.size() == header.at("count").get<std::size_t>(),
            "dataset: sample count differs from header");
    return out;
}

}  // namespace vastvocab
