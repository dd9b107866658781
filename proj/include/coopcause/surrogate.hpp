#pragma once

#include <optional>
#include <span>

#include "coopcause/cause.hpp"
#include "coopcause/rng.hpp"
#include "coopcause/rules.hpp"
#include "coopcause/scenario.hpp"

namespace coopcause {

/// Noisy stand-in for an onboard cause classifier.
///
/// The top cause R is drawn from the confusion row of the truth (or the
/// "none" row). The runner-up S is SE with probability `se_bias` when an
/// incident or workzone is seen correctly, and the truth with probability
/// `truth_second` when R is wrong. A wrong R with the truth as runner-up is a
/// near miss: p_R comes from the miss band and p_S sits just below it.
/// Otherwise p_R comes from the high band. The rest is spread over the other
/// three causes without disturbing the R > S > others ordering.
CauseVector classify_surrogate(std::optional<Cause> truth, const ClassifierSpec& spec, RandomStream& rng);

/// `per_cause` labeled transactions for each cause, drawn with a fixed stream.
Dataset surrogate_training_set(const ClassifierSpec& spec, std::size_t per_cause, std::uint64_t seed);
/// Same, restricted to the given truths. Each truth keeps its own stream, so
/// its transactions match those of the full set.
Dataset surrogate_training_set(const ClassifierSpec& spec, std::size_t per_cause, std::uint64_t seed,
                               std::span<const Cause> truths);

inline constexpr std::size_t kDefaultTrainingPerCause = 1000;
inline constexpr std::uint64_t kDefaultTrainingSeed = 20240917;
inline constexpr MiningConfig kDefaultRuleMining{0.05, 0.8};

/// The scenario's rulebook file when set, otherwise rules mined from the
/// default surrogate training set.
RuleBook scenario_rulebook(const ClassifierSpec& spec);

}  // namespace coopcause
