#include "nscam/causal.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <set>
#include <stdexcept>

#include "json.hpp"

#include "nscam/rng.hpp"

namespace nscam {

namespace {

[[noreturn]] void fail(const std::string& msg) { throw std::invalid_argument(msg); }

// Position weight of a marginal contribution against a coalition of size k
// drawn from n causes: k! (n-k-1)! / n! == 1 / (n * C(n-1, k)).
std::vector<double> position_weights(int n) {
    std::vector<double> w(static_cast<std::size_t>(n));
    double binom = 1.0; // C(n-1, 0)
    for (int k = 0; k < n; ++k) {
        w[static_cast<std::size_t>(k)] = 1.0 / (static_cast<double>(n) * binom);
        binom = binom * static_cast<double>(n - 1 - k) / static_cast<double>(k + 1);
    }
    return w;
}

void check_universe(const CauseUniverse& u) {
    std::set<int> seen;
    for (int id : u.cause_ids) {
        if (id < 0) fail("cause universe: negative cause id " + std::to_string(id));
        if (!seen.insert(id).second) {
            fail("cause universe: duplicate cause id " + std::to_string(id));
        }
    }
}

} // namespace

const char* direction_name(Direction d) {
    return d == Direction::necessity ? "necessity" : "sufficiency";
}

const char* cause_kind_name(CauseKind k) { return k == CauseKind::feature ? "feature" : "filter"; }

CauseKind cause_kind_from_name(const std::string& name) {
    if (name == "feature") return CauseKind::feature;
    if (name == "filter") return CauseKind::filter;
    fail("unknown cause kind \"" + name + "\" (expected feature or filter)");
}

Coalition::Coalition(std::vector<int> ids) : members_(std::move(ids)) {
    std::sort(members_.begin(), members_.end());
    members_.erase(std::unique(members_.begin(), members_.end()), members_.end());
}

bool Coalition::contains(int id) const {
    return std::binary_search(members_.begin(), members_.end(), id);
}

Coalition Coalition::with(int id) const {
    Coalition c = *this;
    auto it = std::lower_bound(c.members_.begin(), c.members_.end(), id);
    if (it == c.members_.end() || *it != id) {
        c.members_.insert(it, id);
    }
    return c;
}

double necessity_value(double p_orig, double p_removed) {
    return (p_orig - p_removed) / std::max(p_orig, kProbEpsilon);
}

double sufficiency_value(double p_orig, double p_kept) {
    return p_kept / std::max(p_orig, kProbEpsilon);
}

CoalitionValueFn::CoalitionValueFn(Direction direction, Evaluator evaluator)
    : direction_(direction), evaluator_(std::move(evaluator)) {
    if (!evaluator_) fail("coalition value function: null evaluator");
}

double CoalitionValueFn::value(const Coalition& coalition) const {
    {
        std::lock_guard<std::mutex> lock(mu_);
        auto it = cache_.find(coalition.members());
        if (it != cache_.end()) return it->second;
    }
    const double v = evaluator_(coalition);

    std::lock_guard<std::mutex> lock(mu_);
    auto [it, inserted] = cache_.emplace(coalition.members(), v);
    if (inserted) {
        ++evaluations_;
    } else if (it->second != v) {
        // Two evaluations of the same coalition disagreed: evaluator is not
        // a pure function of the coalition, which breaks every guarantee
        // downstream of the cache.
        throw std::logic_error("coalition evaluator is not deterministic");
    }
    return it->second;
}

void CoalitionValueFn::prefetch(const std::vector<Coalition>& coalitions) const {
    std::set<std::vector<int>> pending;
    {
        std::lock_guard<std::mutex> lock(mu_);
        for (const auto& c : coalitions) {
            if (!cache_.count(c.members())) pending.insert(c.members());
        }
    }
    for (const auto& key : pending) {
        value(Coalition(key));
    }
}

std::size_t CoalitionValueFn::evaluation_count() const {
    std::lock_guard<std::mutex> lock(mu_);
    return evaluations_;
}

std::map<int, double> singleton_scan(const CoalitionValueFn& fn, const CauseUniverse& universe) {
    check_universe(universe);
    std::map<int, double> scores;
    for (int id : universe.cause_ids) {
        scores[id] = fn.value(Coalition({id}));
    }
    return scores;
}

CauseUniverse select_hypothesized(const std::map<int, double>& scores,
                                  const CauseUniverse& universe, int k) {
    check_universe(universe);
    if (k < 1) fail("select_hypothesized: k must be >= 1");
    std::vector<std::pair<double, int>> ranked;
    ranked.reserve(universe.size());
    for (int id : universe.cause_ids) {
        auto it = scores.find(id);
        if (it == scores.end()) {
            fail("select_hypothesized: no score for cause " + std::to_string(id));
        }
        ranked.emplace_back(it->second, id);
    }
    std::sort(ranked.begin(), ranked.end(), [](const auto& a, const auto& b) {
        if (a.first != b.first) return a.first > b.first;
        return a.second < b.second;
    });
    const std::size_t take = std::min(static_cast<std::size_t>(k), ranked.size());

    CauseUniverse out;
    out.kind = universe.kind;
    out.cause_ids.reserve(take);
    for (std::size_t i = 0; i < take; ++i) {
        out.cause_ids.push_back(ranked[i].second);
    }
    std::sort(out.cause_ids.begin(), out.cause_ids.end());
    return out;
}

double ShapleyReport::value_or_zero(int id) const {
    auto it = values.find(id);
    return it == values.end() ? 0.0 : it->second;
}

std::string ShapleyReport::to_json() const {
    nlohmann::json j;
    j["direction"] = direction_name(direction);
    j["method"] = method == ShapleyMethod::exact ? "exact" : "sampled";
    j["seed"] = seed;
    j["permutations"] = permutation_count;
    nlohmann::json jv = nlohmann::json::object();
    nlohmann::json js = nlohmann::json::object();
    for (const auto& [id, v] : values) {
        jv[std::to_string(id)] = v;
    }
    for (const auto& [id, s] : stderrs) {
        js[std::to_string(id)] = s;
    }
    j["values"] = jv;
    j["stderr"] = js;
    return j.dump(2);
}

ShapleyReport shapley_exact(const CoalitionValueFn& fn, const CauseUniverse& hypothesized) {
    check_universe(hypothesized);
    const int n = static_cast<int>(hypothesized.size());
    if (n > 20) {
        fail("shapley_exact: " + std::to_string(n) +
             " causes exceed the exact-enumeration limit of 20");
    }

    ShapleyReport report;
    report.direction = fn.direction();
    report.method = ShapleyMethod::exact;
    report.permutation_count = 0;
    if (n == 0) return report;

    const auto& ids = hypothesized.cause_ids;
    const std::uint32_t total = 1u << n;

    // One value per subset bitmask over the hypothesized ids.
    std::vector<Coalition> subsets;
    subsets.reserve(total);
    for (std::uint32_t m = 0; m < total; ++m) {
        std::vector<int> members;
        for (int i = 0; i < n; ++i) {
            if (m & (1u << i)) members.push_back(ids[static_cast<std::size_t>(i)]);
        }
        subsets.emplace_back(std::move(members));
    }
    fn.prefetch(subsets);
    std::vector<double> v(total);
    for (std::uint32_t m = 0; m < total; ++m) {
        v[m] = fn.value(subsets[m]);
    }

    const auto w = position_weights(n);
    for (int i = 0; i < n; ++i) {
        const std::uint32_t bit = 1u << i;
        double r = 0.0;
        for (std::uint32_t m = 0; m < total; ++m) {
            if (m & bit) continue;
            r += w[static_cast<std::size_t>(std::popcount(m))] * (v[m | bit] - v[m]);
        }
        report.values[ids[static_cast<std::size_t>(i)]] = r;
        report.stderrs[ids[static_cast<std::size_t>(i)]] = 0.0;
    }
    return report;
}

ShapleyReport shapley_sampled(const CoalitionValueFn& fn, const CauseUniverse& hypothesized,
                              int permutations, std::uint64_t seed) {
    check_universe(hypothesized);
    if (permutations < 1) {
        fail("shapley_sampled: permutation count must be >= 1");
    }

    ShapleyReport report;
    report.direction = fn.direction();
    report.method = ShapleyMethod::sampled;
    report.seed = seed;
    report.permutation_count = permutations;
    if (hypothesized.size() == 0) return report;

    // Pre-generate every ordering up front so the draw sequence depends only
    // on the seed, never on evaluation timing.
    std::mt19937_64 gen(seed);
    std::vector<std::vector<int>> orders(static_cast<std::size_t>(permutations),
                                         hypothesized.cause_ids);
    for (auto& order : orders) {
        shuffle_inplace(order, gen);
    }

    std::vector<Coalition> prefixes;
    prefixes.emplace_back(); // empty
    for (const auto& order : orders) {
        Coalition c;
        for (int id : order) {
            c = c.with(id);
            prefixes.push_back(c);
        }
    }
    fn.prefetch(prefixes);

    std::map<int, double> sum, sumsq;
    for (int id : hypothesized.cause_ids) {
        sum[id] = 0.0;
        sumsq[id] = 0.0;
    }
    const double v_empty = fn.value(Coalition());
    for (const auto& order : orders) {
        Coalition c;
        double v_prev = v_empty;
        for (int id : order) {
            c = c.with(id);
            const double v_cur = fn.value(c);
            const double marginal = v_cur - v_prev;
            sum[id] += marginal;
            sumsq[id] += marginal * marginal;
            v_prev = v_cur;
        }
    }

    const double m = static_cast<double>(permutations);
    for (int id : hypothesized.cause_ids) {
        const double mean = sum[id] / m;
        report.values[id] = mean;
        if (permutations > 1) {
            const double var = std::max(0.0, (sumsq[id] - m * mean * mean) / (m - 1.0));
            report.stderrs[id] = std::sqrt(var / m);
        } else {
            report.stderrs[id] = 0.0;
        }
    }
    return report;
}

} // namespace nscam
