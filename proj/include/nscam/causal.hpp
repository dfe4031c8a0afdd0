#ifndef NSCAM_CAUSAL_HPP
#define NSCAM_CAUSAL_HPP

#include <cstdint>
#include <functional>
#include <map>
#include <mutex>
#include <string>
#include <vector>

namespace nscam {

/// Guard against division by a vanishing reference probability.
constexpr double kProbEpsilon = 1e-8;

enum class Direction { necessity, sufficiency };
enum class CauseKind { feature, filter };

const char* direction_name(Direction d);
const char* cause_kind_name(CauseKind k);
CauseKind cause_kind_from_name(const std::string& name);

/// The full set of hypothesized causes: ordered, unique, non-negative ids.
struct CauseUniverse {
    std::vector<int> cause_ids;
    CauseKind kind = CauseKind::feature;

    std::size_t size() const { return cause_ids.size(); }
};

/// A subset of a universe. Members are kept sorted and unique; the sorted
/// id list doubles as the cache key for value lookups.
class Coalition {
public:
    Coalition() = default;
    explicit Coalition(std::vector<int> ids);

    const std::vector<int>& members() const { return members_; }
    std::size_t size() const { return members_.size(); }
    bool empty() const { return members_.empty(); }
    bool contains(int id) const;

    Coalition with(int id) const;

    bool operator==(const Coalition& other) const { return members_ == other.members_; }

private:
    std::vector<int> members_; // sorted, unique
};

/// How much the outcome drops when the coalition is removed:
/// (p_orig - p_removed) / max(p_orig, epsilon). Removing nothing gives 0.
double necessity_value(double p_orig, double p_removed);

/// How much of the outcome the coalition alone retains:
/// p_kept / max(p_orig, epsilon). Keeping everything gives 1.
double sufficiency_value(double p_orig, double p_kept);

/// A cached coalition -> value map over one direction. The evaluator must be
/// a pure function of the coalition; each distinct coalition is evaluated at
/// most once and the cached value is reused across the singleton scan and
/// the Shapley stage. value() is thread-safe, so batches of coalitions may
/// be evaluated concurrently.
class CoalitionValueFn {
public:
    using Evaluator = std::function<double(const Coalition&)>;

    CoalitionValueFn(Direction direction, Evaluator evaluator);

    Direction direction() const { return direction_; }

    double value(const Coalition& coalition) const;

    /// Evaluate a batch, deduplicated against the cache. Results land in the
    /// cache; the batch outcome is independent of evaluation order.
    void prefetch(const std::vector<Coalition>& coalitions) const;

    /// Number of evaluator invocations so far (cache misses).
    std::size_t evaluation_count() const;

private:
    Direction direction_;
    Evaluator evaluator_;
    mutable std::mutex mu_;
    mutable std::map<std::vector<int>, double> cache_;
    mutable std::size_t evaluations_ = 0;
};

/// Value of every singleton coalition, keyed by cause id.
std::map<int, double> singleton_scan(const CoalitionValueFn& fn, const CauseUniverse& universe);

/// The min(k, |universe|) cause ids with the highest scores; ties broken by
/// ascending id. The returned universe lists ids in ascending order.
CauseUniverse select_hypothesized(const std::map<int, double>& scores,
                                  const CauseUniverse& universe, int k);

enum class ShapleyMethod { exact, sampled };

/// Per-cause responsibilities for one direction. `values` covers the
/// hypothesized set only; value_or_zero returns exactly 0 for any other id.
struct ShapleyReport {
    Direction direction = Direction::necessity;
    ShapleyMethod method = ShapleyMethod::exact;
    std::uint64_t seed = 0;
    int permutation_count = 0;
    std::map<int, double> values;
    std::map<int, double> stderrs;

    double value_or_zero(int id) const;
    std::string to_json() const;
};

/// Exact Shapley responsibilities by full subset enumeration. The universe
/// may hold at most 20 causes (2^n evaluations). Satisfies efficiency:
/// sum of values == v(universe) - v(empty) up to accumulation error.
ShapleyReport shapley_exact(const CoalitionValueFn& fn, const CauseUniverse& hypothesized);

/// Monte-Carlo Shapley estimate over `permutations` seeded uniform random
/// orderings. Reports the per-cause mean marginal contribution and its
/// standard error. Identical seeds give bit-identical reports.
ShapleyReport shapley_sampled(const CoalitionValueFn& fn, const CauseUniverse& hypothesized,
                              int permutations, std::uint64_t seed);

} // namespace nscam

#endif
