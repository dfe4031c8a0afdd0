// nscam: bi-directional saliency explanations for small CNN classifiers.
//
// Subcommands:
//   explain  one image -> necessity/sufficiency maps + responsibility report
//   eval     a directory of images -> faithfulness / localization metrics
//   sanity   cascading weight randomization check (exit 1 when it fails)
//   oracle   exact vs sampled attribution on a tabulated value function

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <set>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"

#include "nscam/causal.hpp"
#include "nscam/engine.hpp"
#include "nscam/explain.hpp"
#include "nscam/image_io.hpp"
#include "nscam/metrics.hpp"
#include "nscam/model_io.hpp"
#include "nscam/render.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace nscam;

namespace {

struct CommonOpts {
    std::string model_path;
    std::string layer;
    std::string class_arg = "predicted";
    std::string cause = "feature";
    int k_n = 32;
    int k_s = 32;
    int perms = 64;
    int exact_threshold = 10;
    std::uint64_t seed = 0;
};

void add_common(CLI::App* cmd, CommonOpts& o, bool with_attribution = true) {
    cmd->add_option("--model", o.model_path, "model manifest (model.json)")->required();
    cmd->add_option("--layer", o.layer, "conv layer whose channels are the causes")->required();
    cmd->add_option("--class", o.class_arg, "class index or \"predicted\" (default)");
    cmd->add_option("--cause", o.cause, "cause kind")
        ->check(CLI::IsMember({"feature", "filter"}));
    cmd->add_option("--seed", o.seed, "RNG seed (required; no wall-clock default)")->required();
    if (with_attribution) {
        cmd->add_option("--k-n", o.k_n, "hypothesized causes, necessity direction")
            ->check(CLI::PositiveNumber);
        cmd->add_option("--k-s", o.k_s, "hypothesized causes, sufficiency direction")
            ->check(CLI::PositiveNumber);
        cmd->add_option("--perms", o.perms, "sampling permutations")->check(CLI::PositiveNumber);
        cmd->add_option("--exact-threshold", o.exact_threshold,
                        "enumerate exactly up to this many causes")
            ->check(CLI::Range(1, 20));
    }
}

int resolve_class(const std::string& arg, const Model& model, const Tensor& image) {
    if (arg == "predicted") {
        const auto probs = predict_all(model, image);
        return static_cast<int>(std::max_element(probs.begin(), probs.end()) - probs.begin());
    }
    int cls = 0;
    try {
        std::size_t pos = 0;
        cls = std::stoi(arg, &pos);
        if (pos != arg.size()) throw std::invalid_argument(arg);
    } catch (const std::exception&) {
        throw std::invalid_argument("--class must be an integer or \"predicted\", got \"" + arg +
                                    "\"");
    }
    if (cls < 0 || cls >= model.class_count) {
        throw std::invalid_argument("class " + std::to_string(cls) + " out of range [0," +
                                    std::to_string(model.class_count) + ")");
    }
    return cls;
}

ExplainRequest build_request(const CommonOpts& o, const Model& model, Tensor image, int cls) {
    ExplainRequest req;
    req.model = &model;
    req.image = std::move(image);
    req.layer_id = o.layer;
    req.class_index = cls;
    req.cause_kind = cause_kind_from_name(o.cause);
    req.config.k_necessity = o.k_n;
    req.config.k_sufficiency = o.k_s;
    req.config.permutations = o.perms;
    req.config.exact_threshold = o.exact_threshold;
    req.config.seed = o.seed;
    return req;
}

void print_top_causes(const char* label, const ShapleyReport& report) {
    std::vector<std::pair<int, double>> ranked(report.values.begin(), report.values.end());
    std::sort(ranked.begin(), ranked.end(), [](const auto& a, const auto& b) {
        if (a.second != b.second) return a.second > b.second;
        return a.first < b.first;
    });
    std::printf("top %s causes:\n", label);
    const std::size_t n = std::min<std::size_t>(5, ranked.size());
    for (std::size_t i = 0; i < n; ++i) {
        const double se = report.stderrs.count(ranked[i].first)
                              ? report.stderrs.at(ranked[i].first)
                              : 0.0;
        std::printf("  channel %-3d  value % .6f  stderr %.6f\n", ranked[i].first,
                    ranked[i].second, se);
    }
}

std::string stem_of(const std::string& name) { return fs::path(name).stem().string(); }

int cmd_explain(const CommonOpts& o, const std::string& image_path, const std::string& out_dir) {
    const Model model = load_model(o.model_path);
    Tensor image = preprocess_image(image_path, model);
    const int cls = resolve_class(o.class_arg, model, image);

    const ExplainRequest req = build_request(o, model, std::move(image), cls);
    const ExplanationResult result = explain(req);

    std::printf("class %d  p_orig %.6g  cause kind %s  layer %s\n", cls, result.p_orig,
                cause_kind_name(req.cause_kind), req.layer_id.c_str());
    print_top_causes("necessity", result.n_report);
    print_top_causes("sufficiency", result.s_report);
    for (const auto& w : result.warnings) {
        std::printf("warning: %s\n", w.c_str());
    }
    for (const auto& path : render(req, result, out_dir)) {
        std::printf("wrote %s\n", path.c_str());
    }
    return 0;
}

std::map<std::string, BBox> load_bboxes(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open bbox file " + path);
    std::map<std::string, BBox> out;
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        json j;
        try {
            j = json::parse(line);
            BBox b{j.at("x0").get<int>(), j.at("y0").get<int>(), j.at("x1").get<int>(),
                   j.at("y1").get<int>()};
            out[stem_of(j.at("image").get<std::string>())] = b;
        } catch (const json::exception& e) {
            throw std::runtime_error(path + ":" + std::to_string(lineno) + ": " + e.what());
        }
    }
    return out;
}

int cmd_eval(const CommonOpts& o, const std::string& dataset_dir, const std::string& out_dir,
             int steps, double sigma, const std::string& bbox_path,
             const std::string& maps_dir) {
    const Model model = load_model(o.model_path);

    std::vector<std::string> images;
    for (const auto& entry : fs::directory_iterator(dataset_dir)) {
        if (!entry.is_regular_file()) continue;
        std::string ext = entry.path().extension().string();
        std::transform(ext.begin(), ext.end(), ext.begin(),
                       [](unsigned char c) { return std::tolower(c); });
        if (ext == ".png" || ext == ".ppm" || ext == ".pgm" || ext == ".pnm") {
            images.push_back(entry.path().string());
        }
    }
    std::sort(images.begin(), images.end());
    if (images.empty()) {
        throw std::runtime_error("no .png/.ppm/.pgm images in " + dataset_dir);
    }

    std::map<std::string, BBox> bboxes;
    if (!bbox_path.empty()) bboxes = load_bboxes(bbox_path);

    std::vector<EvalRecord> records;
    for (std::size_t idx = 0; idx < images.size(); ++idx) {
        const std::string& path = images[idx];
        EvalRecord rec;
        rec.image = fs::path(path).filename().string();
        try {
            Tensor image = preprocess_image(path, model);
            const int cls = resolve_class(o.class_arg, model, image);

            Tensor map;
            if (!maps_dir.empty()) {
                const std::string stem = stem_of(rec.image);
                const fs::path base(maps_dir);
                fs::path candidate = base / (stem + ".json");
                if (!fs::exists(candidate)) candidate = base / (stem + ".png");
                if (!fs::exists(candidate)) candidate = base / rec.image;
                if (!fs::exists(candidate)) {
                    throw std::runtime_error("no external map for " + rec.image + " in " +
                                             maps_dir);
                }
                map = load_saliency_map(candidate.string(), model.input_dims[1],
                                        model.input_dims[2]);
            } else {
                ExplainRequest req = build_request(o, model, image, cls);
                ExplanationResult result = explain(req);
                map = std::move(result.s_map);
                rec.warnings = std::move(result.warnings);
            }

            const DeletionInsertion di = deletion_insertion(model, image, cls, map, steps);
            rec.deletion_auc = auc(di.deletion);
            rec.insertion_auc = auc(di.insertion);
            rec.overall = *rec.insertion_auc - *rec.deletion_auc;

            NsScores ns = ns_quantification(model, image, cls, map);
            rec.n_score = ns.n_score;
            rec.s_score = ns.s_score;
            rec.map_size = ns.map_size;
            rec.warnings.insert(rec.warnings.end(), ns.warnings.begin(), ns.warnings.end());

            rec.attack_flip = attack_flips(model, image, map, sigma,
                                           o.seed + static_cast<std::uint64_t>(idx));

            const auto bb = bboxes.find(stem_of(rec.image));
            if (bb != bboxes.end()) {
                rec.proportion = energy_pointing(map, bb->second);
            }
        } catch (const std::exception& e) {
            rec.error = e.what();
        }
        records.push_back(std::move(rec));
    }

    fs::create_directories(out_dir);
    const std::vector<std::pair<std::string, std::string>> config = {
        {"model", o.model_path},
        {"dataset", dataset_dir},
        {"layer", o.layer},
        {"class", o.class_arg},
        {"cause", o.cause},
        {"seed", std::to_string(o.seed)},
        {"steps", std::to_string(steps)},
        {"sigma", std::to_string(sigma)},
        {"blur_kernel", std::to_string(kDefaultBlurKernel)},
        {"blur_sigma", std::to_string(kDefaultBlurSigma)},
        {"maps", maps_dir},
        {"bboxes", bbox_path},
    };
    {
        std::ofstream out(fs::path(out_dir) / "eval_report.json", std::ios::trunc);
        out << eval_report_json(records, config) << '\n';
    }
    {
        std::ofstream out(fs::path(out_dir) / "eval_report.csv", std::ios::trunc);
        out << eval_report_csv(records);
    }

    const EvalAggregates agg = aggregate(records);
    std::printf("images %d  failed %d\n", agg.images, agg.failed);
    auto show = [](const char* name, const std::optional<double>& v) {
        if (v) std::printf("%-14s %.6f\n", name, *v);
    };
    show("deletion", agg.deletion_auc);
    show("insertion", agg.insertion_auc);
    show("overall", agg.overall);
    show("n_score", agg.n_score);
    show("s_score", agg.s_score);
    show("flip_rate", agg.flip_rate);
    show("attack", agg.attack);
    show("proportion", agg.proportion);
    std::printf("wrote %s\n", (fs::path(out_dir) / "eval_report.json").string().c_str());
    std::printf("wrote %s\n", (fs::path(out_dir) / "eval_report.csv").string().c_str());

    if (agg.failed == agg.images) {
        std::fprintf(stderr, "error: every image failed\n");
        return 2;
    }
    return 0;
}

int cmd_sanity(const CommonOpts& o, const std::string& image_path, const std::string& out_dir) {
    const Model model = load_model(o.model_path);
    Tensor image = preprocess_image(image_path, model);
    const int cls = resolve_class(o.class_arg, model, image);
    const ExplainRequest req = build_request(o, model, std::move(image), cls);

    const auto stages = sanity_check(req, o.seed);
    std::printf("%-12s %12s %12s\n", "randomized", "n_spearman", "s_spearman");
    json jstages = json::array();
    for (const auto& s : stages) {
        json js;
        js["layer"] = s.layer_id;
        if (s.n_similarity) js["n_similarity"] = *s.n_similarity;
        if (s.s_similarity) js["s_similarity"] = *s.s_similarity;
        jstages.push_back(js);
        auto cell = [](const std::optional<double>& v) {
            char buf[32];
            if (v) {
                std::snprintf(buf, sizeof buf, "%12.4f", *v);
            } else {
                std::snprintf(buf, sizeof buf, "%12s", "n/a");
            }
            return std::string(buf);
        };
        std::printf("%-12s %s %s\n", s.layer_id.c_str(), cell(s.n_similarity).c_str(),
                    cell(s.s_similarity).c_str());
    }
    const double final_mean = sanity_final_mean(stages);
    const bool pass = final_mean < 0.5;
    std::printf("final-stage mean similarity %.4f -> %s\n", final_mean,
                pass ? "pass (maps track the weights)" : "FAIL (maps ignore the weights)");

    fs::create_directories(out_dir);
    json j;
    j["stages"] = jstages;
    j["final_mean"] = final_mean;
    j["pass"] = pass;
    std::ofstream out(fs::path(out_dir) / "sanity.json", std::ios::trunc);
    out << j.dump(2) << '\n';

    return pass ? 0 : 1;
}

std::string coalition_key(const std::vector<int>& ids) {
    std::string key;
    for (std::size_t i = 0; i < ids.size(); ++i) {
        if (i) key += ",";
        key += std::to_string(ids[i]);
    }
    return key;
}

int cmd_oracle(const std::string& table_path, int perms, std::uint64_t seed) {
    std::ifstream in(table_path);
    if (!in) throw std::runtime_error("cannot open value table " + table_path);
    json j;
    try {
        in >> j;
    } catch (const json::exception& e) {
        throw std::runtime_error(table_path + ": " + std::string(e.what()));
    }

    const auto causes = j.at("causes").get<std::vector<int>>();
    if (causes.empty() || causes.size() > 10) {
        throw std::runtime_error("value table must list between 1 and 10 causes");
    }
    CauseUniverse universe{causes, CauseKind::feature};

    std::map<std::string, double> table;
    for (const auto& [key, value] : j.at("values").items()) {
        table[key] = value.get<double>();
    }
    // Every subset must be tabulated before anything runs.
    const std::uint32_t total = 1u << causes.size();
    for (std::uint32_t m = 0; m < total; ++m) {
        std::vector<int> members;
        for (std::size_t i = 0; i < causes.size(); ++i) {
            if (m & (1u << i)) members.push_back(causes[i]);
        }
        std::sort(members.begin(), members.end());
        const std::string key = coalition_key(members);
        if (!table.count(key)) {
            throw std::runtime_error("value table: missing value for coalition {" + key + "}");
        }
    }

    std::vector<int> budgets;
    if (j.contains("budgets")) {
        budgets = j["budgets"].get<std::vector<int>>();
        for (int b : budgets) {
            if (b < 1) throw std::runtime_error("value table: budgets must be >= 1");
        }
    } else {
        budgets = {perms};
    }

    CoalitionValueFn fn(Direction::necessity, [&table](const Coalition& c) {
        return table.at(coalition_key(c.members()));
    });

    const ShapleyReport exact = shapley_exact(fn, universe);
    std::vector<ShapleyReport> sampled;
    sampled.reserve(budgets.size());
    for (int b : budgets) {
        sampled.push_back(shapley_sampled(fn, universe, b, seed));
    }

    std::printf("value table: %u coalitions over %zu causes\n", total, causes.size());
    std::printf("%-8s %14s", "cause", "exact");
    for (int b : budgets) std::printf("  %10s@%-6d", "sampled", b);
    std::printf("\n");
    for (int id : causes) {
        std::printf("%-8d %14.8f", id, exact.value_or_zero(id));
        for (const auto& rep : sampled) {
            std::printf("  %10.6f±%-6.4f", rep.value_or_zero(id), rep.stderrs.at(id));
        }
        std::printf("\n");
    }
    for (std::size_t bi = 0; bi < budgets.size(); ++bi) {
        double dev = 0.0;
        for (int id : causes) {
            dev = std::max(dev,
                           std::abs(sampled[bi].value_or_zero(id) - exact.value_or_zero(id)));
        }
        std::printf("budget %-6d max |sampled - exact| = %.8f\n", budgets[bi], dev);
    }
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"necessity/sufficiency saliency for small CNN classifiers"};
    app.require_subcommand(1);

    CommonOpts ex_opts;
    std::string ex_image, ex_out;
    CLI::App* ex = app.add_subcommand("explain", "explain one image");
    add_common(ex, ex_opts);
    ex->add_option("--image", ex_image, "input image (PNG or PPM)")->required();
    ex->add_option("--out", ex_out, "output directory")->required();

    CommonOpts ev_opts;
    std::string ev_dataset, ev_out, ev_bboxes, ev_maps;
    int ev_steps = kDefaultCurveSteps;
    double ev_sigma = kDefaultAttackSigma;
    CLI::App* ev = app.add_subcommand("eval", "evaluate maps over an image directory");
    add_common(ev, ev_opts);
    ev->add_option("--dataset", ev_dataset, "directory of images")->required();
    ev->add_option("--out", ev_out, "output directory")->required();
    ev->add_option("--steps", ev_steps, "deletion/insertion steps")->check(CLI::PositiveNumber);
    ev->add_option("--sigma", ev_sigma, "attack noise sigma")->check(CLI::PositiveNumber);
    ev->add_option("--bboxes", ev_bboxes, "JSON-lines bounding boxes (optional)");
    ev->add_option("--maps", ev_maps, "directory of externally produced maps (optional)");

    CommonOpts sa_opts;
    std::string sa_image, sa_out;
    CLI::App* sa = app.add_subcommand("sanity", "weight randomization sanity check");
    add_common(sa, sa_opts);
    sa->add_option("--image", sa_image, "input image (PNG or PPM)")->required();
    sa->add_option("--out", sa_out, "output directory")->required();

    std::string or_table;
    int or_perms = 64;
    std::uint64_t or_seed = 0;
    CLI::App* orc = app.add_subcommand("oracle", "exact vs sampled attribution on a value table");
    orc->add_option("--table", or_table, "JSON value table")->required();
    orc->add_option("--perms", or_perms, "sampling budget when the table names none")
        ->check(CLI::PositiveNumber);
    orc->add_option("--seed", or_seed, "RNG seed")->required();

    CLI11_PARSE(app, argc, argv);

    try {
        if (ex->parsed()) return cmd_explain(ex_opts, ex_image, ex_out);
        if (ev->parsed()) {
            return cmd_eval(ev_opts, ev_dataset, ev_out, ev_steps, ev_sigma, ev_bboxes, ev_maps);
        }
        if (sa->parsed()) return cmd_sanity(sa_opts, sa_image, sa_out);
        if (orc->parsed()) return cmd_oracle(or_table, or_perms, or_seed);
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 2;
    }
    return 2;
}
