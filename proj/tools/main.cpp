// vastvocab command-line tool: reproducible gradient-dilution traces,
// hierarchical category-query construction, stage-1 selection training, and
// the self-check oracle suite. Every command writes a manifest next to its
// outputs; `vastvocab rerun <manifest>` reproduces them byte for byte.

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <numeric>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "vastvocab/checks.hpp"
#include "vastvocab/dilution.hpp"
#include "vastvocab/io.hpp"
#include "vastvocab/manifest.hpp"
#include "vastvocab/runtime.hpp"
#include "vastvocab/selection.hpp"
#include "vastvocab/synthworld.hpp"
#include "vastvocab/taxonomy.hpp"
#include "vastvocab/version.hpp"

namespace fs = std::filesystem;
using namespace vastvocab;

namespace {

constexpr std::uint64_t kDefaultSeed = 1729;  // fixed so unseeded runs reproduce

constexpr int kExitOk = 0;
constexpr int kExitUsage = 1;
constexpr int kExitValidation = 2;
constexpr int kExitNumerical = 3;

std::string default_out_dir() {
    const char* env = std::getenv("VASTVOCAB_OUT");
    return env && *env ? env : ".";
}

std::string join_path(const std::string& dir, const std::string& file) {
    return (fs::path(dir) / file).string();
}

void ensure_dir(const std::string& dir) {
    std::error_code ec;
    fs::create_directories(dir, ec);
    require(!ec, "cannot create output directory: " + dir);
}

// compact number for file names: 0.25 -> "0.25", 2 -> "2"
std::string fmt_g(double v) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%g", v);
    return buf;
}

// ---- dilution ---------------------------------------------------------------

struct DilutionArgs {
    std::vector<std::size_t> categories = {80, 13204};
    std::vector<std::string> losses = {"ce"};
    std::vector<double> alphas = {0.25};
    std::vector<double> gammas = {2.0};
    double gamma_pos = 0.0;
    double gamma_neg = 4.0;
    double clip = 0.05;
    std::size_t iters = 2000;
    double lr = 1.0;
    double hard_fraction = 0.10;
    bool no_calibration = false;
    std::uint64_t seed = kDefaultSeed;
    std::string out = default_out_dir();

    nlohmann::ordered_json to_json() const {
        nlohmann::ordered_json j;
        j["categories"] = categories;
        j["losses"] = losses;
        j["alphas"] = alphas;
        j["gammas"] = gammas;
        j["gamma_pos"] = gamma_pos;
        j["gamma_neg"] = gamma_neg;
        j["clip"] = clip;
        j["iters"] = iters;
        j["lr"] = lr;
        j["hard_fraction"] = hard_fraction;
        j["no_calibration"] = no_calibration;
        return j;
    }
    static DilutionArgs from_json(const nlohmann::json& j) {
        DilutionArgs a;
        a.categories = j.at("categories").get<std::vector<std::size_t>>();
        a.losses = j.at("losses").get<std::vector<std::string>>();
        a.alphas = j.at("alphas").get<std::vector<double>>();
        a.gammas = j.at("gammas").get<std::vector<double>>();
        a.gamma_pos = j.at("gamma_pos").get<double>();
        a.gamma_neg = j.at("gamma_neg").get<double>();
        a.clip = j.at("clip").get<double>();
        a.iters = j.at("iters").get<std::size_t>();
        a.lr = j.at("lr").get<double>();
        a.hard_fraction = j.at("hard_fraction").get<double>();
        a.no_calibration = j.at("no_calibration").get<bool>();
        return a;
    }
};

struct DilutionCell {
    std::string file;
    std::size_t categories;
    std::string loss;
    LossConfig cfg;
};

std::vector<DilutionCell> expand_cells(const DilutionArgs& args) {
    std::vector<DilutionCell> cells;
    for (std::size_t c : args.categories) {
        for (const std::string& loss : args.losses) {
            if (loss == "ce") {
                cells.push_back({"trace_C" + std::to_string(c) + "_ce.csv", c,
                                 loss, LossConfig::ce()});
            } else if (loss == "focal") {
                for (double a : args.alphas)
                    for (double g : args.gammas)
                        cells.push_back({"trace_C" + std::to_string(c) +
                                             "_focal_a" + fmt_g(a) + "_g" +
                                             fmt_g(g) + ".csv",
                                         c, loss, LossConfig::focal(a, g)});
            } else if (loss == "asl") {
                cells.push_back(
                    {"trace_C" + std::to_string(c) + "_asl_gp" +
                         fmt_g(args.gamma_pos) + "_gn" + fmt_g(args.gamma_neg) +
                         "_c" + fmt_g(args.clip) + ".csv",
                     c, loss,
                     LossConfig::asymmetric(args.gamma_pos, args.gamma_neg,
                                            args.clip)});
            } else {
                throw std::invalid_argument("unknown loss '" + loss +
                                            "' (expected ce, focal or asl)");
            }
        }
    }
    return cells;
}

int run_dilution(const DilutionArgs& args) {
    ensure_dir(args.out);
    auto cells = expand_cells(args);
    RunManifest manifest;
    manifest.command = "dilution";
    manifest.seed = args.seed;
    manifest.config = args.to_json();
    nlohmann::ordered_json results = nlohmann::ordered_json::array();

    for (const auto& cell : cells) {
        DilutionConfig cfg;
        cfg.categories = cell.categories;
        cfg.loss = cell.cfg;
        cfg.iters = args.iters;
        cfg.lr = args.lr;
        cfg.hard_fraction = args.hard_fraction;
        cfg.calibrate_step = !args.no_calibration;
        cfg.seed = args.seed;
        DilutionTrace trace = simulate_trace(cfg);

        const std::string path = join_path(args.out, cell.file);
        write_text_file(path, trace_to_csv(trace));
        manifest.outputs.push_back(cell.file);

        nlohmann::ordered_json r;
        r["file"] = cell.file;
        r["categories"] = cell.categories;
        r["loss"] = cell.loss;
        if (cell.loss == "focal") {
            r["alpha"] = cell.cfg.focal_alpha;
            r["gamma"] = cell.cfg.focal_gamma;
        }
        r["iterations_recorded"] = trace.records.size();
        r["diverged"] = trace.diverged;
        if (trace.diverged) r["diverged_at"] = trace.diverged_at;
        results.push_back(r);

        std::string extras;
        if (cell.loss == "focal")
            extras = " alpha=" + fmt_g(cell.cfg.focal_alpha) +
                     " gamma=" + fmt_g(cell.cfg.focal_gamma);
        std::string status = trace.diverged
                                 ? "DIVERGED at iteration " +
                                       std::to_string(trace.diverged_at)
                                 : std::string("stable");
        std::printf("C=%zu loss=%s%s iters=%zu -> %s %s\n", cell.categories,
                    cell.loss.c_str(), extras.c_str(), trace.records.size(),
                    cell.file.c_str(), status.c_str());
    }
    manifest.config["results"] = results;
    write_text_file(join_path(args.out, "manifest.json"), manifest.dump());
    return kExitOk;
}

// ---- tree ---------------------------------------------------------------

struct TreeArgs {
    std::string taxonomy;
    std::size_t dim = 16;
    double w = 0.3;
    std::string policy = "main";
    double query_std = 0.0;  // <= 0: width-scaled default
    std::uint64_t seed = kDefaultSeed;
    std::string out = default_out_dir();

    nlohmann::ordered_json to_json() const {
        nlohmann::ordered_json j;
        j["taxonomy"] = taxonomy;
        j["dim"] = dim;
        j["w"] = w;
        j["policy"] = policy;
        j["query_std"] = query_std;
        return j;
    }
    static TreeArgs from_json(const nlohmann::json& j) {
        TreeArgs a;
        a.taxonomy = j.at("taxonomy").get<std::string>();
        a.dim = j.at("dim").get<std::size_t>();
        a.w = j.at("w").get<double>();
        a.policy = j.at("policy").get<std::string>();
        a.query_std = j.at("query_std").get<double>();
        return a;
    }
};

int run_tree(const TreeArgs& args) {
    WeightPolicy policy;
    if (args.policy == "main")
        policy.form = WeightForm::main_text;
    else if (args.policy == "appendix")
        policy.form = WeightForm::appendix;
    else
        throw std::invalid_argument("unknown policy '" + args.policy +
                                    "' (expected main or appendix)");
    policy.w = args.w;
    policy.validate();

    CategoryTree tree = load_tree(read_text_file(args.taxonomy));
    require(tree.size() > 0, "taxonomy has no nodes");

    Rng rng(args.seed);
    std::vector<int> ids;
    for (const auto& n : tree.nodes()) ids.push_back(n.id);
    CategoryQuerySet queries =
        CategoryQuerySet::seeded(ids, args.dim, rng, args.query_std);
    CategoryQuerySet enhanced = build_hierarchical_queries(tree, queries, policy);

    ensure_dir(args.out);
    std::string qcsv = "id,name";
    for (std::size_t j = 0; j < args.dim; ++j) qcsv += ",q" + std::to_string(j);
    qcsv += "\n";
    std::string acsv = "id,name,n_children,alpha\n";
    for (const auto& n : tree.nodes()) {
        const std::size_t row = enhanced.row(n.id);
        qcsv += std::to_string(n.id) + "," + n.name;
        for (std::size_t j = 0; j < args.dim; ++j)
            qcsv += "," + fmt_double(enhanced.embeddings.at(row, j));
        qcsv += "\n";
        acsv += std::to_string(n.id) + "," + n.name + "," +
                std::to_string(tree.child_count(n.id)) + "," +
                fmt_double(adaptive_weight(tree, n.id, policy)) + "\n";
    }
    write_text_file(join_path(args.out, "enhanced_queries.csv"), qcsv);
    write_text_file(join_path(args.out, "alpha_report.csv"), acsv);

    RunManifest manifest;
    manifest.command = "tree";
    manifest.seed = args.seed;
    manifest.config = args.to_json();
    manifest.outputs = {"enhanced_queries.csv", "alpha_report.csv"};
    write_text_file(join_path(args.out, "manifest.json"), manifest.dump());
    std::printf("enhanced %zu category queries (dim %zu, policy %s) -> %s\n",
                tree.size(), args.dim, args.policy.c_str(), args.out.c_str());
    return kExitOk;
}

// ---- train-select ---------------------------------------------------------

struct TrainArgs {
    std::size_t categories = 200;
    std::size_t dim = 64;
    std::vector<std::size_t> ks = {20};
    std::size_t epochs = 20;
    double lr = 0.004;
    std::string optimizer = "adam";
    std::string schedule = "cosine";
    std::size_t images = 64;
    std::size_t tokens = 8;
    std::size_t labels_min = 1;
    std::size_t labels_max = 3;
    double signal = 2.0;
    double noise = 0.0;
    double zipf = 0.0;
    bool orthonormal = false;
    std::size_t hidden = 64;
    std::size_t heads = 4;
    double gamma_pos = 0.0;
    double gamma_neg = 4.0;
    double clip = 0.05;
    bool stop_when_perfect = false;
    std::string taxonomy;  // optional; enables ancestor masking
    std::uint64_t seed = kDefaultSeed;
    std::string out = default_out_dir();

    nlohmann::ordered_json to_json() const {
        nlohmann::ordered_json j;
        j["categories"] = categories;
        j["dim"] = dim;
        j["k"] = ks;
        j["epochs"] = epochs;
        j["lr"] = lr;
        j["optimizer"] = optimizer;
        j["schedule"] = schedule;
        j["images"] = images;
        j["tokens"] = tokens;
        j["labels_min"] = labels_min;
        j["labels_max"] = labels_max;
        j["signal"] = signal;
        j["noise"] = noise;
        j["zipf"] = zipf;
        j["orthonormal"] = orthonormal;
        j["hidden"] = hidden;
        j["heads"] = heads;
        j["gamma_pos"] = gamma_pos;
        j["gamma_neg"] = gamma_neg;
        j["clip"] = clip;
        j["stop_when_perfect"] = stop_when_perfect;
        j["taxonomy"] = taxonomy;
        return j;
    }
    static TrainArgs from_json(const nlohmann::json& j) {
        TrainArgs a;
        a.categories = j.at("categories").get<std::size_t>();
        a.dim = j.at("dim").get<std::size_t>();
        a.ks = j.at("k").get<std::vector<std::size_t>>();
        a.epochs = j.at("epochs").get<std::size_t>();
        a.lr = j.at("lr").get<double>();
        a.optimizer = j.at("optimizer").get<std::string>();
        a.schedule = j.at("schedule").get<std::string>();
        a.images = j.at("images").get<std::size_t>();
        a.tokens = j.at("tokens").get<std::size_t>();
        a.labels_min = j.at("labels_min").get<std::size_t>();
        a.labels_max = j.at("labels_max").get<std::size_t>();
        a.signal = j.at("signal").get<double>();
        a.noise = j.at("noise").get<double>();
        a.zipf = j.at("zipf").get<double>();
        a.orthonormal = j.at("orthonormal").get<bool>();
        a.hidden = j.at("hidden").get<std::size_t>();
        a.heads = j.at("heads").get<std::size_t>();
        a.gamma_pos = j.at("gamma_pos").get<double>();
        a.gamma_neg = j.at("gamma_neg").get<double>();
        a.clip = j.at("clip").get<double>();
        a.stop_when_perfect = j.at("stop_when_perfect").get<bool>();
        a.taxonomy = j.at("taxonomy").get<std::string>();
        return a;
    }
};

int run_train_select(const TrainArgs& args) {
    require(!args.ks.empty(), "at least one --k value required");

    WorldConfig world;
    world.categories = args.categories;
    world.dim = args.dim;
    world.tokens_per_image = args.tokens;
    world.labels_lo = args.labels_min;
    world.labels_hi = args.labels_max;
    world.signal_strength = args.signal;
    world.noise_std = args.noise;
    world.zipf_exponent = args.zipf;
    world.orthonormal_prototypes = args.orthonormal;
    world.seed = args.seed;
    world.validate();

    CategoryTree tree;
    bool have_tree = false;
    if (!args.taxonomy.empty()) {
        tree = load_tree(read_text_file(args.taxonomy));
        require(tree.size() == args.categories,
                "taxonomy size " + std::to_string(tree.size()) +
                    " != --categories " + std::to_string(args.categories));
        for (const auto& n : tree.nodes())
            require(n.id >= 0 && static_cast<std::size_t>(n.id) < args.categories,
                    "taxonomy ids must be 0..C-1 for training");
        have_tree = true;
    }

    DenseMatrix prototypes = generate_prototypes(world);
    auto data = generate_dataset(world, prototypes, args.images);

    Rng rng(split_seed(args.seed, 100));
    SelectionModule module =
        SelectionModule::init(args.dim, args.heads, args.hidden, rng);
    std::vector<int> ids(args.categories);
    std::iota(ids.begin(), ids.end(), 0);
    CategoryQuerySet queries = CategoryQuerySet::seeded(ids, args.dim, rng);

    TrainConfig cfg;
    cfg.loss = LossConfig::asymmetric(args.gamma_pos, args.gamma_neg, args.clip);
    cfg.lr = args.lr;
    cfg.epochs = args.epochs;
    cfg.k = args.ks.front();
    cfg.seed = args.seed;
    cfg.stop_when_perfect = args.stop_when_perfect;
    if (have_tree) cfg.tree = &tree;
    if (args.optimizer == "sgd")
        cfg.optimizer = Optimizer::sgd;
    else
        require(args.optimizer == "adam",
                "unknown optimizer '" + args.optimizer + "'");
    if (args.schedule == "constant")
        cfg.schedule = LrSchedule::constant;
    else
        require(args.schedule == "cosine",
                "unknown schedule '" + args.schedule + "'");

    TrainReport report = train_selection_stage(module, queries, data, cfg);

    ensure_dir(args.out);
    write_text_file(join_path(args.out, "report.csv"), report_to_csv(report));
    write_text_file(join_path(args.out, "params.txt"),
                    params_to_text(module, queries));

    std::string kcsv = "k,arc_recall\n";
    for (std::size_t k : args.ks) {
        const double arc = arc_recall(module, queries, data, k).arc;
        kcsv += std::to_string(k) + "," + fmt_double(arc) + "\n";
    }
    write_text_file(join_path(args.out, "arc_by_k.csv"), kcsv);

    RunManifest manifest;
    manifest.command = "train-select";
    manifest.seed = args.seed;
    manifest.config = args.to_json();
    manifest.outputs = {"report.csv", "params.txt", "arc_by_k.csv"};
    write_text_file(join_path(args.out, "manifest.json"), manifest.dump());

    std::printf("epochs run: %zu  final AR^C(k=%zu): %s\n",
                report.epochs.size() - 1, cfg.k,
                fmt_double(report.final_arc).c_str());
    if (report.diverged) {
        std::fprintf(stderr,
                     "training diverged; parameters restored to epoch %zu\n",
                     report.last_good_epoch);
        return kExitNumerical;
    }
    return kExitOk;
}

// ---- selfcheck --------------------------------------------------------------

struct SelfcheckArgs {
    bool quick = false;
    std::string out;  // optional report directory

    nlohmann::ordered_json to_json() const {
        nlohmann::ordered_json j;
        j["quick"] = quick;
        return j;
    }
    static SelfcheckArgs from_json(const nlohmann::json& j) {
        SelfcheckArgs a;
        a.quick = j.at("quick").get<bool>();
        return a;
    }
};

int run_selfcheck(const SelfcheckArgs& args) {
    auto results = checks::run_all(args.quick);
    std::string report;
    for (const auto& r : results) {
        report += std::string(r.pass ? "[PASS] " : "[FAIL] ") + r.name;
        if (!r.pass) report += ": " + r.detail;
        report += "\n";
    }
    const bool pass = checks::all_pass(results);
    report += pass ? "selfcheck: all checks passed\n"
                   : "selfcheck: FAILURES detected\n";
    std::fputs(report.c_str(), stdout);
    if (!args.out.empty()) {
        ensure_dir(args.out);
        write_text_file(join_path(args.out, "selfcheck_report.txt"), report);
        RunManifest manifest;
        manifest.command = "selfcheck";
        manifest.seed = 0;
        manifest.config = args.to_json();
        manifest.outputs = {"selfcheck_report.txt"};
        write_text_file(join_path(args.out, "manifest.json"), manifest.dump());
    }
    return pass ? kExitOk : kExitNumerical;
}

// ---- rerun --------------------------------------------------------------

int run_from_manifest(const std::string& path, const std::string& out_override) {
    RunManifest m = RunManifest::parse(read_text_file(path));
    std::string out = out_override;
    if (out.empty()) out = fs::path(path).parent_path().string();
    if (out.empty()) out = ".";
    if (m.command == "dilution") {
        DilutionArgs a = DilutionArgs::from_json(m.config);
        a.seed = m.seed;
        a.out = out;
        return run_dilution(a);
    }
    if (m.command == "tree") {
        TreeArgs a = TreeArgs::from_json(m.config);
        a.seed = m.seed;
        a.out = out;
        return run_tree(a);
    }
    if (m.command == "train-select") {
        TrainArgs a = TrainArgs::from_json(m.config);
        a.seed = m.seed;
        a.out = out;
        return run_train_select(a);
    }
    if (m.command == "selfcheck") {
        SelfcheckArgs a = SelfcheckArgs::from_json(m.config);
        a.out = out;
        return run_selfcheck(a);
    }
    throw std::invalid_argument("manifest: unknown command '" + m.command + "'");
}

}  // namespace

int main(int argc, char** argv) {
    tune_allocator();
    CLI::App app{"vast-vocabulary classification analysis toolkit"};
    app.set_version_flag("--version", std::string(kVersion));
    app.require_subcommand(1);

    DilutionArgs dil;
    auto* cmd_dil = app.add_subcommand(
        "dilution", "simulate gradient-dilution traces, one CSV per config");
    cmd_dil->add_option("--categories", dil.categories, "vocabulary sizes C")
        ->delimiter(',');
    cmd_dil->add_option("--loss", dil.losses, "loss families: ce, focal, asl")
        ->delimiter(',');
    cmd_dil->add_option("--alpha", dil.alphas, "focal alpha sweep")->delimiter(',');
    cmd_dil->add_option("--gamma", dil.gammas, "focal gamma sweep")->delimiter(',');
    cmd_dil->add_option("--gamma-pos", dil.gamma_pos, "asl positive exponent");
    cmd_dil->add_option("--gamma-neg", dil.gamma_neg, "asl negative exponent");
    cmd_dil->add_option("--clip", dil.clip, "asl probability clip");
    cmd_dil->add_option("--iters", dil.iters, "iterations per trace");
    cmd_dil->add_option("--lr", dil.lr, "base step size");
    cmd_dil->add_option("--hard-fraction", dil.hard_fraction,
                        "hard-negative fraction for eta");
    cmd_dil->add_flag("--no-calibration", dil.no_calibration,
                      "disable per-group step calibration");
    cmd_dil->add_option("--seed", dil.seed, "rng seed");
    cmd_dil->add_option("--out", dil.out, "output directory");

    TreeArgs tre;
    auto* cmd_tree = app.add_subcommand(
        "tree", "build hierarchy-enhanced category queries from a taxonomy");
    cmd_tree->add_option("--taxonomy", tre.taxonomy, "taxonomy JSON file")
        ->required();
    cmd_tree->add_option("--dim", tre.dim, "embedding dimension");
    cmd_tree->add_option("--w", tre.w, "base mixing weight");
    cmd_tree->add_option("--policy", tre.policy, "weight form: main or appendix");
    cmd_tree->add_option("--query-std", tre.query_std,
                         "query init std (<=0: width-scaled default)");
    cmd_tree->add_option("--seed", tre.seed, "rng seed");
    cmd_tree->add_option("--out", tre.out, "output directory");

    TrainArgs tra;
    auto* cmd_train = app.add_subcommand(
        "train-select",
        "train the image-guided selection stage on a synthetic world");
    cmd_train->add_option("--categories", tra.categories, "vocabulary size C");
    cmd_train->add_option("--dim", tra.dim, "embedding dimension");
    cmd_train->add_option("--k", tra.ks, "selection sizes; first is primary")
        ->delimiter(',');
    cmd_train->add_option("--epochs", tra.epochs, "training epochs");
    cmd_train->add_option("--lr", tra.lr, "learning rate");
    cmd_train->add_option("--optimizer", tra.optimizer, "adam or sgd");
    cmd_train->add_option("--schedule", tra.schedule, "cosine or constant");
    cmd_train->add_option("--images", tra.images, "dataset size");
    cmd_train->add_option("--tokens", tra.tokens, "image tokens per sample");
    cmd_train->add_option("--labels-min", tra.labels_min, "min labels per image");
    cmd_train->add_option("--labels-max", tra.labels_max, "max labels per image");
    cmd_train->add_option("--signal", tra.signal, "planted signal strength");
    cmd_train->add_option("--noise", tra.noise, "feature noise std");
    cmd_train->add_option("--zipf", tra.zipf, "label frequency skew exponent");
    cmd_train->add_flag("--orthonormal", tra.orthonormal,
                        "orthonormal prototypes (needs dim >= categories)");
    cmd_train->add_option("--hidden", tra.hidden, "FFN hidden width");
    cmd_train->add_option("--heads", tra.heads, "attention heads");
    cmd_train->add_option("--gamma-pos", tra.gamma_pos, "asl positive exponent");
    cmd_train->add_option("--gamma-neg", tra.gamma_neg, "asl negative exponent");
    cmd_train->add_option("--clip", tra.clip, "asl probability clip");
    cmd_train->add_flag("--stop-when-perfect", tra.stop_when_perfect,
                        "stop once AR^C reaches 1.0");
    cmd_train->add_option("--taxonomy", tra.taxonomy,
                          "taxonomy JSON (ids 0..C-1) enabling ancestor masking");
    cmd_train->add_option("--seed", tra.seed, "rng seed");
    cmd_train->add_option("--out", tra.out, "output directory");

    SelfcheckArgs sc;
    auto* cmd_check = app.add_subcommand(
        "selfcheck", "run the oracle suite (finite differences, brute force)");
    cmd_check->add_flag("--quick", sc.quick, "reduced subset, under 30 s");
    cmd_check->add_option("--out", sc.out, "optional report directory");

    std::string rerun_manifest, rerun_out;
    auto* cmd_rerun = app.add_subcommand(
        "rerun", "reproduce a previous run from its manifest");
    cmd_rerun->add_option("manifest", rerun_manifest, "manifest.json path")
        ->required();
    cmd_rerun->add_option("--out", rerun_out, "override output directory");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? kExitOk : kExitUsage;
    }

    try {
        if (cmd_dil->parsed()) return run_dilution(dil);
        if (cmd_tree->parsed()) return run_tree(tre);
        if (cmd_train->parsed()) return run_train_select(tra);
        if (cmd_check->parsed()) return run_selfcheck(sc);
        if (cmd_rerun->parsed()) return run_from_manifest(rerun_manifest, rerun_out);
    } catch (const std::invalid_argument& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return kExitValidation;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return kExitNumerical;
    }
    return kExitUsage;
}
