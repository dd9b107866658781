#pragma once

#include <array>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "coopcause/cause.hpp"

namespace coopcause {

/// Belief mass over the 32 subsets of the cause frame. Stored densely;
/// a subset is a focal element exactly when its mass is non-zero.
class MassFunction {
 public:
  static constexpr double kTolerance = 1e-9;

  MassFunction() = default;
  MassFunction(std::initializer_list<std::pair<CauseSet, double>> focal);

  static MassFunction vacuous();
  /// Mass function equal to a probability vector on singletons.
  static MassFunction bayesian(const CauseVector& c);

  double operator[](CauseSet a) const { return m_[a.bits()]; }
  void set(CauseSet a, double mass) { m_[a.bits()] = mass; }
  void add(CauseSet a, double mass) { m_[a.bits()] += mass; }

  /// Focal elements in mask order.
  std::vector<std::pair<CauseSet, double>> focal() const;
  double total() const;
  /// Mass on non-empty subsets, summed directly (no 1 - m(EMPTY) cancellation).
  double non_empty_total() const;

  const std::array<double, kSubsetCount>& dense() const { return m_; }

  bool operator==(const MassFunction&) const = default;

 private:
  std::array<double, kSubsetCount> m_{};
};

/// Verdict on the normalization invariant: nullopt when every mass is in
/// [0,1] and the total is 1 within kTolerance, otherwise a description.
std::optional<std::string> validate_mass(const MassFunction& m);

enum class CombinationRule { Conjunctive, Dempster };

std::string_view to_string(CombinationRule rule);
std::optional<CombinationRule> parse_combination_rule(std::string_view text);

/// Unnormalized conjunctive combination; conflict stays on the empty set.
MassFunction conjunctive_combine(const MassFunction& m1, const MassFunction& m2);

/// Mass product landing on the empty set; equals conjunctive_combine(m1, m2)[EMPTY].
double conflict(const MassFunction& m1, const MassFunction& m2);

/// Dempster's rule. Throws DomainError when the sources are in total conflict.
MassFunction dempster_combine(const MassFunction& m1, const MassFunction& m2);

/// Left fold of the pairwise rule. Under Dempster's rule a total conflict is
/// reported together with the prefix length at which it appeared.
MassFunction combine_all(std::span<const MassFunction> masses, CombinationRule rule);

/// Pignistic transform. Mass on the empty set is renormalized away; throws
/// DomainError when nothing survives.
CauseVector pignistic(const MassFunction& m);

/// Source mass built from a classifier output: the top cause, the pair of the
/// two most probable causes, and the whole frame for the stated ignorance.
/// The top-two probabilities are renormalized and scaled by (1 - ignorance).
MassFunction mass_from_cause_vector(const CauseVector& c, double ignorance);

}  // namespace coopcause
