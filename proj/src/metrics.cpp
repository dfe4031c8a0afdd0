#include "nscam/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>
#include <stdexcept>

#include "json.hpp"

#include "nscam/engine.hpp"
#include "nscam/rng.hpp"

namespace nscam {

namespace {

[[noreturn]] void fail(const std::string& msg) { throw std::invalid_argument(msg); }

void check_map_against_image(const Tensor& image, const Tensor& map) {
    if (image.rank() != 3) fail("metrics: image must be [C,H,W], got " + image.shape_str());
    if (map.rank() != 2 || map.dim(0) != image.dim(1) || map.dim(1) != image.dim(2)) {
        fail("metrics: map shape " + map.shape_str() + " does not match image " +
             image.shape_str());
    }
    for (float v : map.data()) {
        if (!(v >= 0.0f && v <= 1.0f)) fail("metrics: map values must lie in [0,1]");
    }
}

int argmax_class(const std::vector<double>& probs) {
    return static_cast<int>(std::max_element(probs.begin(), probs.end()) - probs.begin());
}

double nonzero_fraction(const Tensor& map) {
    std::size_t nz = 0;
    for (float v : map.data()) {
        if (v != 0.0f) ++nz;
    }
    return static_cast<double>(nz) / static_cast<double>(map.numel());
}

std::optional<double> mean_of(const std::vector<double>& xs) {
    if (xs.empty()) return std::nullopt;
    return std::accumulate(xs.begin(), xs.end(), 0.0) / static_cast<double>(xs.size());
}

std::string csv_cell(const std::optional<double>& v) {
    if (!v) return "";
    std::ostringstream os;
    os.precision(17);
    os << *v;
    return os.str();
}

} // namespace

void validate_bbox(const BBox& b, int w, int h) {
    if (!(0 <= b.x0 && b.x0 < b.x1 && b.x1 <= w && 0 <= b.y0 && b.y0 < b.y1 && b.y1 <= h)) {
        fail("bbox [" + std::to_string(b.x0) + "," + std::to_string(b.y0) + "," +
             std::to_string(b.x1) + "," + std::to_string(b.y1) + ") is not a valid box inside " +
             std::to_string(w) + "x" + std::to_string(h));
    }
}

Tensor gaussian_blur(const Tensor& image, int kernel, double sigma) {
    if (image.rank() != 3) fail("gaussian_blur: image must be [C,H,W]");
    if (kernel < 1 || kernel % 2 == 0 || sigma <= 0.0) {
        fail("gaussian_blur: kernel must be odd and positive, sigma > 0");
    }
    const int r = kernel / 2;
    std::vector<double> k(static_cast<std::size_t>(kernel));
    double sum = 0.0;
    for (int i = 0; i < kernel; ++i) {
        k[static_cast<std::size_t>(i)] = std::exp(-0.5 * (i - r) * (i - r) / (sigma * sigma));
        sum += k[static_cast<std::size_t>(i)];
    }
    for (auto& v : k) v /= sum;

    const int c = image.dim(0), h = image.dim(1), w = image.dim(2);
    Tensor mid({c, h, w});
    for (int ch = 0; ch < c; ++ch) {
        for (int y = 0; y < h; ++y) {
            for (int x = 0; x < w; ++x) {
                double acc = 0.0;
                for (int i = -r; i <= r; ++i) {
                    const int xi = std::clamp(x + i, 0, w - 1);
                    acc += k[static_cast<std::size_t>(i + r)] * image.at3(ch, y, xi);
                }
                mid.at3(ch, y, x) = static_cast<float>(acc);
            }
        }
    }
    Tensor out({c, h, w});
    for (int ch = 0; ch < c; ++ch) {
        for (int y = 0; y < h; ++y) {
            for (int x = 0; x < w; ++x) {
                double acc = 0.0;
                for (int i = -r; i <= r; ++i) {
                    const int yi = std::clamp(y + i, 0, h - 1);
                    acc += k[static_cast<std::size_t>(i + r)] * mid.at3(ch, yi, x);
                }
                out.at3(ch, y, x) = static_cast<float>(acc);
            }
        }
    }
    return out;
}

std::vector<std::size_t> pixel_ranking(const Tensor& map) {
    if (map.rank() != 2) fail("pixel_ranking: map must be [H,W]");
    std::vector<std::size_t> idx(map.numel());
    std::iota(idx.begin(), idx.end(), 0);
    std::sort(idx.begin(), idx.end(), [&map](std::size_t a, std::size_t b) {
        if (map[a] != map[b]) return map[a] > map[b];
        return a < b;
    });
    return idx;
}

DeletionInsertion deletion_insertion(const Model& model, const Tensor& image, int class_index,
                                     const Tensor& map, int steps, int blur_kernel,
                                     double blur_sigma) {
    check_map_against_image(image, map);
    if (steps < 1) fail("deletion_insertion: steps must be >= 1");

    const int c = image.dim(0);
    const std::size_t pixels = map.numel();
    const int effective_steps = static_cast<int>(
        std::min<std::size_t>(static_cast<std::size_t>(steps), pixels));
    const auto order = pixel_ranking(map);
    const std::size_t plane = pixels;

    auto run = [&](Tensor work, const Tensor* restore_from) {
        Curve curve;
        curve.fractions.push_back(0.0);
        curve.probs.push_back(predict_prob(model, work, class_index));
        std::size_t done = 0;
        for (int s = 1; s <= effective_steps; ++s) {
            const std::size_t until = pixels * static_cast<std::size_t>(s) /
                                      static_cast<std::size_t>(effective_steps);
            for (; done < until; ++done) {
                const std::size_t p = order[done];
                for (int ch = 0; ch < c; ++ch) {
                    work.data()[static_cast<std::size_t>(ch) * plane + p] =
                        restore_from ? restore_from->data()[static_cast<std::size_t>(ch) * plane + p]
                                     : 0.0f;
                }
            }
            curve.fractions.push_back(static_cast<double>(until) / static_cast<double>(pixels));
            curve.probs.push_back(predict_prob(model, work, class_index));
        }
        return curve;
    };

    DeletionInsertion out;
    out.deletion = run(image, nullptr);
    out.insertion = run(gaussian_blur(image, blur_kernel, blur_sigma), &image);
    return out;
}

double auc(const Curve& curve) {
    const auto& f = curve.fractions;
    const auto& p = curve.probs;
    if (f.size() != p.size() || f.size() < 2) {
        fail("auc: curve needs matching fraction/prob lists with at least 2 points");
    }
    for (std::size_t i = 1; i < f.size(); ++i) {
        if (!(f[i] > f[i - 1])) fail("auc: fractions must be strictly increasing");
    }
    if (f.front() != 0.0 || f.back() != 1.0) {
        fail("auc: fractions must start at 0 and end at 1");
    }
    double area = 0.0;
    for (std::size_t i = 1; i < f.size(); ++i) {
        area += (f[i] - f[i - 1]) * 0.5 * (p[i] + p[i - 1]);
    }
    return area;
}

double n_score_from(double p_orig, double p_removed, double map_size) {
    return (p_orig - p_removed) /
           (std::max(p_orig, kProbEpsilon) * std::max(map_size, kProbEpsilon));
}

double s_score_from(double p_orig, double p_kept, double map_size) {
    return p_kept / (std::max(p_orig, kProbEpsilon) * std::max(map_size, kProbEpsilon));
}

NsScores ns_quantification(const Model& model, const Tensor& image, int class_index,
                           const Tensor& map) {
    check_map_against_image(image, map);
    NsScores out;
    out.map_size = nonzero_fraction(map);
    if (out.map_size == 0.0) {
        out.warnings.push_back("saliency map is all zeros; drop/retention scores are undefined");
        return out;
    }
    const double p_orig = predict_prob(model, image, class_index);
    const double p_removed = predict_prob(model, hadamard(image, one_minus(map)), class_index);
    const double p_kept = predict_prob(model, hadamard(image, map), class_index);
    if (p_orig <= kProbEpsilon) {
        out.warnings.push_back("class probability is at or below the epsilon floor; "
                               "scores are normalized by epsilon");
    }
    out.n_score = n_score_from(p_orig, p_removed, out.map_size);
    out.s_score = s_score_from(p_orig, p_kept, out.map_size);
    return out;
}

bool attack_flips(const Model& model, const Tensor& image, const Tensor& map, double sigma,
                  std::uint64_t seed) {
    check_map_against_image(image, map);
    if (sigma <= 0.0) fail("attack: sigma must be > 0");
    const int before = argmax_class(predict_all(model, image));

    NormalSampler noise(seed);
    Tensor attacked = image;
    const std::size_t plane = map.numel();
    for (int ch = 0; ch < image.dim(0); ++ch) {
        for (std::size_t i = 0; i < plane; ++i) {
            auto& v = attacked.data()[static_cast<std::size_t>(ch) * plane + i];
            v = std::clamp(
                v + static_cast<float>(noise.next(sigma)) * map.data()[i], 0.0f, 1.0f);
        }
    }
    return argmax_class(predict_all(model, attacked)) != before;
}

double attack_score(double flip_rate, double avg_map_size) {
    return flip_rate / std::max(avg_map_size, kProbEpsilon);
}

std::optional<double> energy_pointing(const Tensor& map, const BBox& bbox) {
    if (map.rank() != 2) fail("energy_pointing: map must be [H,W]");
    const int h = map.dim(0);
    const int w = map.dim(1);
    validate_bbox(bbox, w, h);
    double total = 0.0;
    double inside = 0.0;
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            const double v = map.data()[static_cast<std::size_t>(y) * w + x];
            total += v;
            if (y >= bbox.y0 && y < bbox.y1 && x >= bbox.x0 && x < bbox.x1) inside += v;
        }
    }
    if (total == 0.0) return std::nullopt;
    return inside / total;
}

std::optional<double> spearman(const std::vector<float>& a, const std::vector<float>& b) {
    if (a.size() != b.size() || a.size() < 2) {
        fail("spearman: inputs must be two equally sized vectors of length >= 2");
    }
    auto ranks = [](const std::vector<float>& v) {
        const std::size_t n = v.size();
        std::vector<std::size_t> idx(n);
        std::iota(idx.begin(), idx.end(), 0);
        std::sort(idx.begin(), idx.end(), [&v](std::size_t i, std::size_t j) {
            if (v[i] != v[j]) return v[i] < v[j];
            return i < j;
        });
        std::vector<double> r(n);
        std::size_t i = 0;
        while (i < n) {
            std::size_t j = i;
            while (j + 1 < n && v[idx[j + 1]] == v[idx[i]]) ++j;
            const double avg = 0.5 * (static_cast<double>(i) + static_cast<double>(j)) + 1.0;
            for (std::size_t t = i; t <= j; ++t) r[idx[t]] = avg;
            i = j + 1;
        }
        return r;
    };
    const auto ra = ranks(a);
    const auto rb = ranks(b);
    const double n = static_cast<double>(a.size());
    const double ma = std::accumulate(ra.begin(), ra.end(), 0.0) / n;
    const double mb = std::accumulate(rb.begin(), rb.end(), 0.0) / n;
    double sab = 0.0, saa = 0.0, sbb = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        const double da = ra[i] - ma;
        const double db = rb[i] - mb;
        sab += da * db;
        saa += da * da;
        sbb += db * db;
    }
    if (saa == 0.0 || sbb == 0.0) return std::nullopt; // constant input, ranks carry nothing
    return sab / std::sqrt(saa * sbb);
}

std::vector<SanityStage> sanity_check(const ExplainRequest& request, std::uint64_t randomize_seed,
                                      const ExplainFn& explain_fn) {
    const ExplainFn run = explain_fn ? explain_fn : [](const ExplainRequest& r) {
        return explain(r);
    };
    if (!request.model) fail("sanity_check: no model");

    const ExplanationResult baseline = run(request);

    std::vector<SanityStage> stages;
    stages.push_back({"none", spearman(baseline.n_map.data(), baseline.n_map.data()),
                      spearman(baseline.s_map.data(), baseline.s_map.data())});

    // Output-end first: the classifier head goes before the early features.
    std::vector<std::string> order;
    for (auto it = request.model->layers.rbegin(); it != request.model->layers.rend(); ++it) {
        if (it->has_weights()) order.push_back(it->id);
    }

    Model randomized = *request.model;
    NormalSampler noise(randomize_seed);
    for (const auto& layer_id : order) {
        auto& w = randomized.weights.at(layer_id);
        for (auto& v : w.weight.data()) {
            v = static_cast<float>(noise.next(kSanityRandomSigma));
        }
        for (auto& v : w.bias.data()) {
            v = static_cast<float>(noise.next(kSanityRandomSigma));
        }
        ExplainRequest req = request;
        req.model = &randomized;
        const ExplanationResult r = run(req);
        stages.push_back({layer_id, spearman(r.n_map.data(), baseline.n_map.data()),
                          spearman(r.s_map.data(), baseline.s_map.data())});
    }
    return stages;
}

double sanity_final_mean(const std::vector<SanityStage>& stages) {
    if (stages.empty()) fail("sanity_final_mean: no stages");
    const auto& last = stages.back();
    std::vector<double> vals;
    if (last.n_similarity) vals.push_back(*last.n_similarity);
    if (last.s_similarity) vals.push_back(*last.s_similarity);
    if (vals.empty()) return 0.0; // both maps degenerated: nothing survived
    return std::accumulate(vals.begin(), vals.end(), 0.0) / static_cast<double>(vals.size());
}

EvalAggregates aggregate(const std::vector<EvalRecord>& records) {
    EvalAggregates agg;
    std::vector<double> del, ins, ovr, ns, ss, sizes, flips, props;
    for (const auto& r : records) {
        ++agg.images;
        if (r.error) {
            ++agg.failed;
            continue;
        }
        if (r.deletion_auc) del.push_back(*r.deletion_auc);
        if (r.insertion_auc) ins.push_back(*r.insertion_auc);
        if (r.overall) ovr.push_back(*r.overall);
        if (r.n_score) ns.push_back(*r.n_score);
        if (r.s_score) ss.push_back(*r.s_score);
        if (r.map_size) sizes.push_back(*r.map_size);
        if (r.attack_flip) flips.push_back(*r.attack_flip ? 1.0 : 0.0);
        if (r.proportion) props.push_back(*r.proportion);
    }
    agg.deletion_auc = mean_of(del);
    agg.insertion_auc = mean_of(ins);
    agg.overall = mean_of(ovr);
    agg.n_score = mean_of(ns);
    agg.s_score = mean_of(ss);
    agg.avg_map_size = mean_of(sizes);
    agg.flip_rate = mean_of(flips);
    agg.proportion = mean_of(props);
    if (agg.flip_rate && agg.avg_map_size) {
        agg.attack = attack_score(*agg.flip_rate, *agg.avg_map_size);
    }
    return agg;
}

std::string eval_report_json(const std::vector<EvalRecord>& records,
                             const std::vector<std::pair<std::string, std::string>>& config) {
    nlohmann::json j;
    nlohmann::json cfg = nlohmann::json::object();
    for (const auto& [k, v] : config) cfg[k] = v;
    j["config"] = cfg;

    nlohmann::json rows = nlohmann::json::array();
    for (const auto& r : records) {
        nlohmann::json row;
        row["image"] = r.image;
        auto put = [&row](const char* key, const std::optional<double>& v) {
            if (v) row[key] = *v;
        };
        put("deletion_auc", r.deletion_auc);
        put("insertion_auc", r.insertion_auc);
        put("overall", r.overall);
        put("n_score", r.n_score);
        put("s_score", r.s_score);
        put("map_size", r.map_size);
        if (r.attack_flip) row["attack_flip"] = *r.attack_flip;
        put("proportion", r.proportion);
        if (!r.warnings.empty()) row["warnings"] = r.warnings;
        if (r.error) row["error"] = *r.error;
        rows.push_back(row);
    }
    j["records"] = rows;

    const EvalAggregates agg = aggregate(records);
    nlohmann::json ja;
    ja["images"] = agg.images;
    ja["failed"] = agg.failed;
    auto put = [&ja](const char* key, const std::optional<double>& v) {
        if (v) ja[key] = *v;
    };
    put("deletion_auc", agg.deletion_auc);
    put("insertion_auc", agg.insertion_auc);
    put("overall", agg.overall);
    put("n_score", agg.n_score);
    put("s_score", agg.s_score);
    put("flip_rate", agg.flip_rate);
    put("avg_map_size", agg.avg_map_size);
    put("attack", agg.attack);
    put("proportion", agg.proportion);
    j["aggregates"] = ja;
    return j.dump(2);
}

std::string eval_report_csv(const std::vector<EvalRecord>& records) {
    std::ostringstream os;
    os << "image,deletion_auc,insertion_auc,overall,n_score,s_score,map_size,attack_flip,"
          "proportion,error\n";
    for (const auto& r : records) {
        os << r.image << ',' << csv_cell(r.deletion_auc) << ',' << csv_cell(r.insertion_auc)
           << ',' << csv_cell(r.overall) << ',' << csv_cell(r.n_score) << ','
           << csv_cell(r.s_score) << ',' << csv_cell(r.map_size) << ','
           << (r.attack_flip ? (*r.attack_flip ? "1" : "0") : "") << ','
           << csv_cell(r.proportion) << ',' << (r.error ? *r.error : "") << '\n';
    }
    return os.str();
}

} // namespace nscam
