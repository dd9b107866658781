#include "coopcause/surrogate.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

#include "coopcause/error.hpp"

namespace coopcause {

namespace {

Cause other_than(RandomStream& rng, std::initializer_list<Cause> excluded) {
  std::vector<Cause> pool;
  for (Cause c : kAllCauses) {
    if (std::find(excluded.begin(), excluded.end(), c) == excluded.end()) pool.push_back(c);
  }
  return pool[rng.index(pool.size())];
}

void check_row(const std::array<double, kCauseCount>& row) {
  double sum = 0.0;
  for (double p : row) {
    if (!(p >= 0.0)) throw ConfigError("confusion row has a negative entry");
    sum += p;
  }
  if (std::abs(sum - 1.0) > 1e-9) throw ConfigError("confusion row is not stochastic");
}

}  // namespace

CauseVector classify_surrogate(std::optional<Cause> truth, const ClassifierSpec& spec, RandomStream& rng) {
  const auto& row = spec.confusion[truth ? index_of(*truth) : kNoneRow];
  check_row(row);
  const Cause top = cause_at(rng.categorical(row));

  Cause second = top;
  bool near_miss = false;
  if (truth && top == *truth) {
    if (top == Cause::Incident || top == Cause::Workzone) {
      second = rng.bernoulli(spec.se_bias) ? Cause::SpecialEvent : other_than(rng, {top, Cause::SpecialEvent});
    } else {
      second = other_than(rng, {top});
    }
  } else if (truth) {
    near_miss = rng.bernoulli(spec.truth_second);
    second = near_miss ? *truth : other_than(rng, {top, *truth});
  } else {
    second = other_than(rng, {top});
  }

  double p_top = 0.0;
  double p_second = 0.0;
  if (near_miss) {
    p_top = rng.uniform(spec.miss_lo, spec.miss_hi);
    p_second = p_top * rng.uniform(spec.miss_ratio_lo, spec.miss_ratio_hi);
  } else {
    p_top = rng.uniform(spec.high_lo, spec.high_hi);
    p_second = std::min((1.0 - p_top) * rng.uniform(0.4, 0.7), 0.9 * p_top);
  }
  const double rest = 1.0 - p_top;
  p_second = std::clamp(p_second, rest / 3.0 + 0.01, std::min(p_top, rest) - 0.005);

  std::array<double, kCauseCount> p{};
  p[index_of(top)] = p_top;
  p[index_of(second)] = p_second;
  std::array<double, kCauseCount> w{};
  double wsum = 0.0;
  for (Cause c : kAllCauses) {
    if (c == top || c == second) continue;
    w[index_of(c)] = rng.uniform(0.5, 1.0);
    wsum += w[index_of(c)];
  }
  double assigned = p_top + p_second;
  Cause last = top;
  for (Cause c : kAllCauses) {
    if (c == top || c == second) continue;
    p[index_of(c)] = (rest - p_second) * w[index_of(c)] / wsum;
    assigned += p[index_of(c)];
    last = c;
  }
  p[index_of(last)] += 1.0 - assigned;
  return CauseVector(p);
}

Dataset surrogate_training_set(const ClassifierSpec& spec, std::size_t per_cause, std::uint64_t seed) {
  return surrogate_training_set(spec, per_cause, seed, kAllCauses);
}

Dataset surrogate_training_set(const ClassifierSpec& spec, std::size_t per_cause, std::uint64_t seed,
                               std::span<const Cause> truths) {
  Dataset d;
  d.transactions.reserve(per_cause * truths.size());
  for (Cause c : truths) {
    RandomStream rng(seed, StreamPurpose::Training, index_of(c));
    for (std::size_t i = 0; i < per_cause; ++i) {
      d.transactions.push_back(transaction_from_vector(classify_surrogate(c, spec, rng), c));
    }
  }
  return d;
}

RuleBook scenario_rulebook(const ClassifierSpec& spec) {
  if (!spec.rulebook.empty()) return load_rulebook(spec.rulebook.string());
  RuleBook book = mine_supervised(surrogate_training_set(spec, kDefaultTrainingPerCause, kDefaultTrainingSeed),
                                  kDefaultRuleMining);
  book.provenance = "surrogate training set";
  return book;
}

}  // namespace coopcause
