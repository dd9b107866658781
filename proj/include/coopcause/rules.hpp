#pragma once

#include <cstddef>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "coopcause/cause.hpp"

namespace coopcause {

/// Ordered top-two guess of one vehicle, optionally labeled with the
/// scenario ground truth.
struct Transaction {
  Cause first;
  Cause second;
  std::optional<Cause> label;

  CauseSet items() const { return CauseSet::of(first, second); }
  bool operator==(const Transaction&) const = default;
};

struct Dataset {
  std::vector<Transaction> transactions;

  std::size_t size() const { return transactions.size(); }
  bool empty() const { return transactions.empty(); }
};

Transaction transaction_from_vector(const CauseVector& c, std::optional<Cause> label = std::nullopt);

/// Number of transactions whose items contain x. Throws on an empty x.
std::size_t itemset_support(const Dataset& d, CauseSet x);

/// sigma(X u Y) / N. X and Y must be non-empty and disjoint.
double rule_support(const Dataset& d, CauseSet x, CauseSet y);

/// sigma(X u Y) / sigma(X). Throws DomainError when sigma(X) = 0.
double rule_confidence(const Dataset& d, CauseSet x, CauseSet y);

/// Support-threshold test shared by every miner: count >= N * minsup, with a
/// small absolute slack so 0.3 * 10 still admits a count of 3.
bool meets_minsup(std::size_t count, std::size_t n, double minsup);

struct ItemsetCount {
  CauseSet items;
  std::size_t count;
  bool operator==(const ItemsetCount&) const = default;
};

/// Output of level-wise mining. Transactions hold two items, so level 2 is the last.
struct FrequentItemsets {
  std::vector<ItemsetCount> level1;
  std::vector<ItemsetCount> level2;
  std::size_t n = 0;
  double minsup = 0.0;
};

FrequentItemsets apriori_frequent(const Dataset& d, double minsup);

/// The singleton with the most first-guess votes (lowest index on ties).
CauseSet max_one_itemset(const Dataset& d);

enum class RuleKind {
  /// X -> Y over guess items, X and Y disjoint.
  Itemset,
  /// {guess, label} -> {label}: vehicles guessing `guess` in the presence of
  /// `label` were in a `label` scenario. The consequent repeats an
  /// antecedent item because guesses and labels are separate attributes.
  Correction,
};

struct AssociationRule {
  RuleKind kind = RuleKind::Itemset;
  CauseSet antecedent;
  CauseSet consequent;
  double support = 0.0;
  double confidence = 0.0;

  /// For Correction rules: the label (consequent) and the mistaken guess.
  Cause label() const { return consequent.first(); }
  Cause guess() const { return antecedent.without(consequent).first(); }

  std::string to_string() const;
  bool operator==(const AssociationRule&) const = default;
};

struct MiningConfig {
  double minsup = 0.25;
  double mincon = 0.8;

  /// Throws ConfigError unless both thresholds are in (0,1].
  void validate() const;
};

struct RuleBook {
  std::vector<AssociationRule> rules;
  std::string provenance;

  bool empty() const { return rules.empty(); }
  std::size_t size() const { return rules.size(); }
  bool contains(CauseSet antecedent, CauseSet consequent) const;
  const AssociationRule* find(CauseSet antecedent, CauseSet consequent) const;
};

/// Sorts by confidence desc, support desc, antecedent mask, consequent mask.
void sort_rules(std::vector<AssociationRule>& rules);

/// Both directions of every frequent 2-itemset, kept when confidence >= mincon.
RuleBook generate_rules(const FrequentItemsets& frequent, const Dataset& d, double mincon);

/// Correction rules from mispredicted (first guess != label) transactions,
/// merged with the plain item rules of the same dataset. Throws ConfigError
/// when a transaction is unlabeled.
RuleBook mine_supervised(const Dataset& d, const MiningConfig& cfg);

// Dataset text format: one transaction per line, "SE,We" or "SE,We|SE".
// Blank lines and '#' comments are skipped. Parse errors carry the line number.
Dataset parse_dataset(std::istream& in);
Dataset load_dataset(const std::string& path);
void write_dataset(std::ostream& out, const Dataset& d);

// RuleBook CSV: antecedent,consequent,support,confidence with items joined by
// '+'. A consequent contained in its antecedent marks a correction rule.
void write_rulebook_csv(std::ostream& out, const RuleBook& book);
RuleBook read_rulebook_csv(std::istream& in);
RuleBook load_rulebook(const std::string& path);

}  // namespace coopcause
