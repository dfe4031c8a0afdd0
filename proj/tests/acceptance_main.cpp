// Acceptance gate: eight end-to-end checks with pinned tolerances, one
// pass/fail line each. Exits nonzero if any check fails.

#include <chrono>
#include <cmath>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <random>
#include <sstream>
#include <unistd.h>
#include <vector>

#include "nscam/causal.hpp"
#include "nscam/engine.hpp"
#include "nscam/explain.hpp"
#include "nscam/fixtures.hpp"
#include "nscam/metrics.hpp"
#include "nscam/rng.hpp"
#include "reference_engine.hpp"
#include "subprocess.hpp"

#ifndef NSCAM_CLI_PATH
#error "NSCAM_CLI_PATH must point at the nscam binary"
#endif
#ifndef NSCAM_GENFIXTURE_PATH
#error "NSCAM_GENFIXTURE_PATH must point at the gen_fixture binary"
#endif

namespace fs = std::filesystem;
using namespace nscam;
using namespace nscam::testsupport;

namespace {

// Pinned tolerances and budgets.
constexpr double kSampledVsExactTol = 0.05; // 500 permutations, 6 causes
constexpr int kOracleGames = 20;
constexpr int kOracleCauses = 6;
constexpr int kOraclePermutations = 500;
constexpr double kEfficiencyTol = 1e-9;
constexpr double kBoundaryTol = 1e-6;   // E_N(empty), E_S(full)
constexpr double kEngineTol = 1e-5;     // vs the naive reference
constexpr double kClosedFormTol = 1e-9; // AUC closed forms
constexpr double kScoreFormulaTol = 1e-12;
constexpr double kLocalizationMin = 0.5;  // energy inside the planted bbox
constexpr double kSanityCeiling = 0.5;    // final-stage mean similarity
constexpr double kOracleBudgetSecs = 5.0;
constexpr double kLocalizationBudgetSecs = 60.0;

int g_failures = 0;

void criterion(int index, const std::string& title, const std::function<void()>& body) {
    try {
        body();
        std::cout << "[PASS] criterion " << index << ": " << title << "\n";
    } catch (const std::exception& e) {
        ++g_failures;
        std::cout << "[FAIL] criterion " << index << ": " << title << "\n        " << e.what()
                  << "\n";
    }
}

[[noreturn]] void reject(const std::string& msg) { throw std::runtime_error(msg); }

void require(bool ok, const std::string& msg) {
    if (!ok) reject(msg);
}

std::string fmt(double v) {
    std::ostringstream os;
    os.precision(10);
    os << v;
    return os.str();
}

double max_abs_diff(const Tensor& a, const Tensor& b) {
    require(a.dims() == b.dims(), "shape mismatch " + a.shape_str() + " vs " + b.shape_str());
    double m = 0.0;
    for (std::size_t i = 0; i < a.numel(); ++i) {
        m = std::max(m, std::abs(static_cast<double>(a[i]) - static_cast<double>(b[i])));
    }
    return m;
}

std::vector<CauseMask> masks_of(const Model& model, const Tensor& image,
                                const std::string& layer_id) {
    const Tensor acts = activations_at(model, image, layer_id);
    std::vector<CauseMask> masks;
    for (int ch = 0; ch < acts.dim(0); ++ch) {
        Tensor plane({acts.dim(1), acts.dim(2)});
        const std::size_t n = plane.numel();
        std::copy_n(acts.data().begin() + static_cast<std::size_t>(ch) * n, n,
                    plane.data().begin());
        masks.push_back(build_cause_mask(plane, model.input_dims[1], model.input_dims[2]));
    }
    return masks;
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

// ---- criterion 1 -------------------------------------------------------

void check_attribution_oracle() {
    const auto t0 = std::chrono::steady_clock::now();

    std::vector<int> ids(kOracleCauses);
    for (int i = 0; i < kOracleCauses; ++i) ids[static_cast<std::size_t>(i)] = i;
    const CauseUniverse universe{ids, CauseKind::feature};

    double worst = 0.0;
    double worst_eff = 0.0;
    for (int game = 0; game < kOracleGames; ++game) {
        // A random value table: nothing but coalition lookups downstream.
        std::mt19937_64 gen(1000 + static_cast<std::uint64_t>(game));
        std::map<std::vector<int>, double> table;
        for (std::uint32_t m = 0; m < (1u << kOracleCauses); ++m) {
            std::vector<int> members;
            for (int i = 0; i < kOracleCauses; ++i) {
                if (m & (1u << i)) members.push_back(i);
            }
            table[members] = uniform01(gen);
        }
        CoalitionValueFn fn(Direction::necessity, [table](const Coalition& c) {
            return table.at(c.members());
        });

        const ShapleyReport exact = shapley_exact(fn, universe);
        const ShapleyReport sampled =
            shapley_sampled(fn, universe, kOraclePermutations, 91000 + game);
        for (int id : ids) {
            worst = std::max(worst,
                             std::abs(sampled.values.at(id) - exact.values.at(id)));
        }

        double sum = 0.0;
        for (const auto& [id, v] : exact.values) sum += v;
        const double span =
            table.at(universe.cause_ids) - table.at(std::vector<int>{});
        worst_eff = std::max(worst_eff, std::abs(sum - span));
    }
    require(worst <= kSampledVsExactTol,
            "max |sampled - exact| = " + fmt(worst) + " > " + fmt(kSampledVsExactTol));
    require(worst_eff <= kEfficiencyTol,
            "efficiency residual " + fmt(worst_eff) + " > " + fmt(kEfficiencyTol));

    // Dummy axiom: a cause that never changes the value gets exactly 0.
    {
        CoalitionValueFn fn(Direction::necessity, [](const Coalition& c) {
            double v = 0.0;
            for (int id : c.members()) {
                if (id != 5) v += 0.11 + 0.01 * id;
            }
            return v;
        });
        const ShapleyReport r = shapley_exact(fn, universe);
        require(r.values.at(5) == 0.0, "dummy cause got " + fmt(r.values.at(5)));
    }
    // Symmetry axiom: a size-only game attributes bitwise-equal shares.
    {
        CoalitionValueFn fn(Direction::necessity, [](const Coalition& c) {
            const double s = static_cast<double>(c.size());
            return s * s / 36.0 + 0.017 * s;
        });
        const ShapleyReport r = shapley_exact(fn, universe);
        for (int id : ids) {
            require(r.values.at(id) == r.values.at(0),
                    "asymmetric shares in a symmetric game");
        }
    }

    const double secs = seconds_since(t0);
    require(secs < kOracleBudgetSecs,
            "took " + fmt(secs) + "s, budget " + fmt(kOracleBudgetSecs) + "s");
}

// ---- criterion 2 -------------------------------------------------------

void check_value_identities() {
    for (const auto& fx : fixtures::all_fixtures()) {
        const auto* layer = fx.model.find_layer(fx.explain_layer);
        const int channels = std::get<ConvParams>(layer->params).out_channels;
        std::vector<int> all_ids(static_cast<std::size_t>(channels));
        for (int i = 0; i < channels; ++i) all_ids[static_cast<std::size_t>(i)] = i;
        const Coalition empty;
        const Coalition full(all_ids);

        const auto masks = masks_of(fx.model, fx.image, fx.explain_layer);
        const Executors feat =
            make_feature_executors(fx.model, fx.image, fx.class_index, masks);
        const Executors filt = make_filter_executors(fx.model, fx.image, fx.class_index,
                                                     fx.explain_layer, channels);
        for (const Executors* ex : {&feat, &filt}) {
            const double en = ex->necessity->value(empty);
            const double es = ex->sufficiency->value(full);
            require(std::abs(en) <= kBoundaryTol,
                    fx.name + ": E_N(empty) = " + fmt(en));
            require(std::abs(es - 1.0) <= kBoundaryTol,
                    fx.name + ": E_S(full) = " + fmt(es));
        }
    }
}

// ---- criterion 3 -------------------------------------------------------

void check_engine_oracle() {
    for (const auto& fx : fixtures::all_fixtures()) {
        const double d_forward =
            max_abs_diff(forward(fx.model, fx.image), reference_forward(fx.model, fx.image));
        require(d_forward <= kEngineTol, fx.name + ": forward off by " + fmt(d_forward));

        const double d_acts =
            max_abs_diff(activations_at(fx.model, fx.image, fx.explain_layer),
                         reference_activations(fx.model, fx.image, fx.explain_layer));
        require(d_acts <= kEngineTol, fx.name + ": activations off by " + fmt(d_acts));

        const auto* layer = fx.model.find_layer(fx.explain_layer);
        const int channels = std::get<ConvParams>(layer->params).out_channels;
        std::vector<std::set<int>> channel_sets = {{0}};
        std::set<int> all;
        for (int c = 0; c < channels; ++c) all.insert(c);
        channel_sets.push_back(all);
        for (const auto& chans : channel_sets) {
            const Tensor a =
                forward(fx.model, fx.image, FilterOverlay{fx.explain_layer, chans});
            const Tensor b =
                forward(zero_filters_copy(fx.model, fx.explain_layer, chans), fx.image);
            require(a.dims() == b.dims() &&
                        std::memcmp(a.data().data(), b.data().data(),
                                    a.numel() * sizeof(float)) == 0,
                    fx.name + ": overlay and literal zeroing disagree");
        }
    }
}

// ---- criterion 4 -------------------------------------------------------

void check_planted_localization() {
    const auto t0 = std::chrono::steady_clock::now();
    const Model model = fixtures::planted_model();
    const Tensor image = fixtures::planted_image();
    const BBox bbox = fixtures::planted_bbox();

    for (CauseKind kind : {CauseKind::feature, CauseKind::filter}) {
        ExplainRequest req;
        req.model = &model;
        req.image = image;
        req.layer_id = "conv1";
        req.class_index = 1;
        req.cause_kind = kind;
        req.config.seed = 42;

        const ExplanationResult r = explain(req);
        const auto prop = energy_pointing(r.s_map, bbox);
        require(prop.has_value(), std::string(cause_kind_name(kind)) + ": s_map is all zero");
        require(*prop >= kLocalizationMin,
                std::string(cause_kind_name(kind)) + ": proportion " + fmt(*prop) + " < " +
                    fmt(kLocalizationMin));

        const DeletionInsertion di = deletion_insertion(model, image, 1, r.s_map);
        const double del = auc(di.deletion);
        const double ins = auc(di.insertion);
        require(ins > del, std::string(cause_kind_name(kind)) + ": insertion AUC " + fmt(ins) +
                               " <= deletion AUC " + fmt(del));
    }

    const double secs = seconds_since(t0);
    require(secs < kLocalizationBudgetSecs,
            "took " + fmt(secs) + "s, budget " + fmt(kLocalizationBudgetSecs) + "s");
}

// ---- criterion 5 -------------------------------------------------------

void check_metric_closed_forms() {
    Curve flat;
    flat.fractions = {0.0, 0.5, 1.0};
    flat.probs = {0.5, 0.5, 0.5};
    require(std::abs(auc(flat) - 0.5) <= kClosedFormTol,
            "constant curve AUC = " + fmt(auc(flat)));

    Curve ramp;
    for (int i = 0; i <= 100; ++i) {
        ramp.fractions.push_back(i / 100.0);
        ramp.probs.push_back(i / 100.0);
    }
    require(std::abs(auc(ramp) - 0.5) <= kClosedFormTol, "ramp AUC = " + fmt(auc(ramp)));

    const double n = n_score_from(0.8, 0.2, 0.5);
    require(std::abs(n - 1.5) <= kScoreFormulaTol, "n_score(0.8,0.2,0.5) = " + fmt(n));

    const double atk = attack_score(1.0, 0.5);
    require(atk == 2.0, "attack_score(1.0,0.5) = " + fmt(atk));
}

// ---- criterion 6 -------------------------------------------------------

void check_sanity_cascade() {
    const Model model = fixtures::planted_model();
    ExplainRequest req;
    req.model = &model;
    req.image = fixtures::planted_image();
    req.layer_id = "conv1";
    req.class_index = 1;
    req.cause_kind = CauseKind::feature;
    req.config.seed = 7;

    const auto stages = sanity_check(req, 99);
    require(stages.size() >= 2, "cascade produced no randomized stages");
    const double final_mean = sanity_final_mean(stages);
    require(final_mean < kSanityCeiling,
            "final-stage mean similarity " + fmt(final_mean) + " >= " + fmt(kSanityCeiling));
}

// ---- criterion 7 -------------------------------------------------------

void check_cli_determinism() {
    const fs::path root =
        fs::temp_directory_path() / ("nscam_accept_" + std::to_string(::getpid()));
    fs::remove_all(root);
    const fs::path fixture = root / "fixture";
    RunResult gen = run_cmd(std::string(NSCAM_GENFIXTURE_PATH) + " " + fixture.string());
    require(gen.exit_code == 0, "gen_fixture failed: " + gen.output);

    auto slurp = [](const fs::path& p) {
        std::ifstream in(p, std::ios::binary);
        if (!in) reject("cannot read " + p.string());
        return std::string(std::istreambuf_iterator<char>(in),
                           std::istreambuf_iterator<char>());
    };
    auto fnv1a = [](const std::string& bytes) {
        std::uint64_t h = 1469598103934665603ull;
        for (unsigned char c : bytes) {
            h ^= c;
            h *= 1099511628211ull;
        }
        return h;
    };

    const std::string model = (fixture / "model.json").string();
    const std::string image = (fixture / "image.png").string();

    // explain, twice
    for (int run = 0; run < 2; ++run) {
        const fs::path out = root / ("explain_" + std::to_string(run));
        const RunResult r = run_cmd(std::string(NSCAM_CLI_PATH) + " explain --model " + model +
                                    " --image " + image + " --layer conv1 --seed 5 --out " +
                                    out.string());
        require(r.exit_code == 0, "explain run failed: " + r.output);
    }
    for (const char* name : {"n_map.png", "s_map.png", "overlay_n.png", "overlay_s.png",
                             "bivariate.png", "result.json"}) {
        const auto a = fnv1a(slurp(root / "explain_0" / name));
        const auto b = fnv1a(slurp(root / "explain_1" / name));
        require(a == b, std::string("explain output differs across reruns: ") + name);
    }

    // eval, twice
    for (int run = 0; run < 2; ++run) {
        const fs::path out = root / ("eval_" + std::to_string(run));
        const RunResult r = run_cmd(std::string(NSCAM_CLI_PATH) + " eval --model " + model +
                                    " --dataset " + (fixture / "dataset").string() +
                                    " --layer conv1 --seed 5 --steps 20 --bboxes " +
                                    (fixture / "dataset" / "bboxes.jsonl").string() + " --out " +
                                    out.string());
        require(r.exit_code == 0, "eval run failed: " + r.output);
    }
    for (const char* name : {"eval_report.json", "eval_report.csv"}) {
        const auto a = fnv1a(slurp(root / "eval_0" / name));
        const auto b = fnv1a(slurp(root / "eval_1" / name));
        require(a == b, std::string("eval output differs across reruns: ") + name);
    }
    fs::remove_all(root);
}

// ---- criterion 8 -------------------------------------------------------

void check_degenerate_totality() {
    // Constant activation channels: warned about, maps stay finite.
    {
        const Model model = fixtures::planted_model();
        ExplainRequest req;
        req.model = &model;
        req.image = fixtures::planted_image();
        req.layer_id = "conv1";
        req.class_index = 1;
        req.cause_kind = CauseKind::feature;
        req.config.seed = 1;
        const ExplanationResult r = explain(req);
        bool warned = false;
        for (const auto& w : r.warnings) {
            if (w.find("constant") != std::string::npos) warned = true;
        }
        require(warned, "constant-channel warning missing");
        require(r.n_map.all_finite() && r.s_map.all_finite(), "non-finite map values");
    }
    // Vanishing class probability: completes, warns, no NaN.
    {
        const Model model = fixtures::skewed_model();
        ExplainRequest req;
        req.model = &model;
        req.image = fixtures::skewed_image();
        req.layer_id = "conv1";
        req.class_index = 0;
        req.cause_kind = CauseKind::feature;
        req.config.seed = 2;
        const ExplanationResult r = explain(req);
        require(r.p_orig <= kProbEpsilon, "fixture no longer degenerate");
        bool warned = false;
        for (const auto& w : r.warnings) {
            if (w.find("epsilon") != std::string::npos) warned = true;
        }
        require(warned, "epsilon-floor warning missing");
        require(r.n_map.all_finite() && r.s_map.all_finite(), "non-finite map values");
    }
    // All-zero saliency map: absent scores plus a warning, not a crash.
    {
        const Model model = fixtures::tiny_model();
        const NsScores s =
            ns_quantification(model, fixtures::tiny_image(), 0, Tensor({4, 4}));
        require(!s.n_score && !s.s_score, "scores appeared for an all-zero map");
        require(!s.warnings.empty(), "no warning for an all-zero map");
        require(!energy_pointing(Tensor({4, 4}), BBox{0, 0, 2, 2}).has_value(),
                "energy pointing on an all-zero map should be absent");
    }
    // Tie-ranked pixels: a constant map still yields a valid curve.
    {
        const Model model = fixtures::tiny_model();
        Tensor flat({4, 4});
        for (auto& v : flat.data()) v = 0.5f;
        const DeletionInsertion di =
            deletion_insertion(model, fixtures::tiny_image(), 0, flat, 16);
        const double a = auc(di.deletion);
        require(std::isfinite(a), "deletion AUC is not finite");
        for (double p : di.deletion.probs) {
            require(std::isfinite(p), "curve contains a non-finite probability");
        }
    }
}

} // namespace

int main() {
    criterion(1, "sampled attribution tracks exact enumeration (axioms hold)",
              check_attribution_oracle);
    criterion(2, "boundary interventions: E_N(empty)=0, E_S(full)=1", check_value_identities);
    criterion(3, "engine matches the naive reference; overlay == literal zeroing",
              check_engine_oracle);
    criterion(4, "planted detector is localized by both cause kinds",
              check_planted_localization);
    criterion(5, "metric closed forms", check_metric_closed_forms);
    criterion(6, "weight randomization destroys the maps", check_sanity_cascade);
    criterion(7, "reruns are byte-identical", check_cli_determinism);
    criterion(8, "degenerate inputs finish with warnings, never NaN",
              check_degenerate_totality);

    if (g_failures != 0) {
        std::cout << g_failures << " criterion(s) failed\n";
        return 1;
    }
    std::cout << "all criteria passed\n";
    return 0;
}
