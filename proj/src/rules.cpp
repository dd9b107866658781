#include "coopcause/rules.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>

#include "coopcause/error.hpp"
#include "coopcause/text.hpp"

namespace coopcause {

namespace {

void require_minsup(double minsup) {
  if (!(minsup > 0.0 && minsup <= 1.0)) {
    throw ConfigError("minsup must be in (0,1], got " + text::format_double(minsup));
  }
}

void require_disjoint_rule(CauseSet x, CauseSet y) {
  if (x.is_empty() || y.is_empty()) throw DomainError("rule sides must be non-empty");
  if (!(x & y).is_empty()) {
    throw DomainError("antecedent " + x.to_string() + " and consequent " + y.to_string() + " overlap");
  }
}

bool meets_mincon(double confidence, double mincon) { return confidence + 1e-12 >= mincon; }

std::vector<std::pair<CauseSet, std::size_t>> pair_counts(const Dataset& d) {
  std::array<std::size_t, kSubsetCount> counts{};
  for (const auto& t : d.transactions) ++counts[t.items().bits()];
  std::vector<std::pair<CauseSet, std::size_t>> out;
  for (std::size_t i = 0; i < kSubsetCount; ++i) {
    if (counts[i] > 0) out.emplace_back(CauseSet(static_cast<std::uint8_t>(i)), counts[i]);
  }
  return out;
}

}  // namespace

Transaction transaction_from_vector(const CauseVector& c, std::optional<Cause> label) {
  const auto [first, second] = c.top_two();
  return Transaction{first, second, label};
}

std::size_t itemset_support(const Dataset& d, CauseSet x) {
  if (x.is_empty()) throw DomainError("support of the empty itemset is undefined");
  return static_cast<std::size_t>(std::count_if(d.transactions.begin(), d.transactions.end(),
                                                 [x](const Transaction& t) { return x.is_subset_of(t.items()); }));
}

double rule_support(const Dataset& d, CauseSet x, CauseSet y) {
  require_disjoint_rule(x, y);
  if (d.empty()) throw DomainError("rule support over an empty dataset");
  return static_cast<double>(itemset_support(d, x | y)) / static_cast<double>(d.size());
}

double rule_confidence(const Dataset& d, CauseSet x, CauseSet y) {
  require_disjoint_rule(x, y);
  const std::size_t sx = itemset_support(d, x);
  if (sx == 0) throw DomainError("undefined confidence: antecedent " + x.to_string() + " never occurs");
  return static_cast<double>(itemset_support(d, x | y)) / static_cast<double>(sx);
}

bool meets_minsup(std::size_t count, std::size_t n, double minsup) {
  return static_cast<double>(count) + 1e-9 >= static_cast<double>(n) * minsup;
}

FrequentItemsets apriori_frequent(const Dataset& d, double minsup) {
  require_minsup(minsup);
  if (d.empty()) throw DomainError("cannot mine an empty dataset");
  FrequentItemsets out;
  out.n = d.size();
  out.minsup = minsup;

  std::array<std::size_t, kCauseCount> single{};
  for (const auto& t : d.transactions) {
    ++single[index_of(t.first)];
    ++single[index_of(t.second)];
  }
  for (Cause c : kAllCauses) {
    if (meets_minsup(single[index_of(c)], out.n, minsup)) out.level1.push_back({CauseSet::of(c), single[index_of(c)]});
  }

  // Candidates only from frequent singletons; any superset of an infrequent
  // item is infrequent.
  const auto pairs = pair_counts(d);
  for (std::size_t i = 0; i < out.level1.size(); ++i) {
    for (std::size_t j = i + 1; j < out.level1.size(); ++j) {
      const CauseSet candidate = out.level1[i].items | out.level1[j].items;
      std::size_t count = 0;
      for (const auto& [items, c] : pairs) {
        if (items == candidate) count = c;
      }
      if (meets_minsup(count, out.n, minsup)) out.level2.push_back({candidate, count});
    }
  }
  return out;
}

CauseSet max_one_itemset(const Dataset& d) {
  if (d.empty()) throw DomainError("no votes: empty dataset");
  std::array<std::size_t, kCauseCount> votes{};
  for (const auto& t : d.transactions) ++votes[index_of(t.first)];
  std::size_t best = 0;
  for (std::size_t i = 1; i < kCauseCount; ++i) {
    if (votes[i] > votes[best]) best = i;
  }
  return CauseSet::of(cause_at(best));
}

std::string AssociationRule::to_string() const {
  std::ostringstream os;
  os << '{' << antecedent.to_string() << "}->{" << consequent.to_string() << "} support="
     << text::format_fixed(support, 4) << " confidence=" << text::format_fixed(confidence, 4);
  return os.str();
}

void MiningConfig::validate() const {
  require_minsup(minsup);
  if (!(mincon > 0.0 && mincon <= 1.0)) {
    throw ConfigError("mincon must be in (0,1], got " + text::format_double(mincon));
  }
}

const AssociationRule* RuleBook::find(CauseSet antecedent, CauseSet consequent) const {
  for (const auto& r : rules) {
    if (r.antecedent == antecedent && r.consequent == consequent) return &r;
  }
  return nullptr;
}

bool RuleBook::contains(CauseSet antecedent, CauseSet consequent) const {
  return find(antecedent, consequent) != nullptr;
}

void sort_rules(std::vector<AssociationRule>& rules) {
  std::stable_sort(rules.begin(), rules.end(), [](const AssociationRule& a, const AssociationRule& b) {
    if (a.confidence != b.confidence) return a.confidence > b.confidence;
    if (a.support != b.support) return a.support > b.support;
    if (a.antecedent != b.antecedent) return a.antecedent.bits() < b.antecedent.bits();
    return a.consequent.bits() < b.consequent.bits();
  });
}

RuleBook generate_rules(const FrequentItemsets& frequent, const Dataset& d, double mincon) {
  RuleBook book;
  book.provenance = "apriori n=" + std::to_string(frequent.n) + " minsup=" + text::format_double(frequent.minsup) +
                    " mincon=" + text::format_double(mincon);
  for (const auto& pair : frequent.level2) {
    const Cause a = pair.items.first();
    const Cause b = pair.items.without(CauseSet::of(a)).first();
    for (const auto& [x, y] : {std::pair{a, b}, std::pair{b, a}}) {
      const double confidence = rule_confidence(d, CauseSet::of(x), CauseSet::of(y));
      if (!meets_mincon(confidence, mincon)) continue;
      book.rules.push_back({RuleKind::Itemset, CauseSet::of(x), CauseSet::of(y),
                            static_cast<double>(pair.count) / static_cast<double>(frequent.n), confidence});
    }
  }
  sort_rules(book.rules);
  return book;
}

RuleBook mine_supervised(const Dataset& d, const MiningConfig& cfg) {
  cfg.validate();
  if (d.empty()) throw DomainError("cannot mine an empty dataset");
  for (std::size_t i = 0; i < d.size(); ++i) {
    if (!d.transactions[i].label) {
      throw ConfigError("supervised mining needs labels; transaction " + std::to_string(i + 1) + " has none");
    }
  }

  RuleBook book = generate_rules(apriori_frequent(d, cfg.minsup), d, cfg.mincon);

  // Mispredictions as (guess, label) pairs.
  Dataset wrong;
  for (const auto& t : d.transactions) {
    if (t.first != *t.label) wrong.transactions.push_back({t.first, *t.label, t.label});
  }
  std::size_t corrections = 0;
  if (!wrong.empty()) {
    const auto frequent = apriori_frequent(wrong, cfg.minsup);
    for (const auto& pair : frequent.level2) {
      const Cause a = pair.items.first();
      const Cause b = pair.items.without(CauseSet::of(a)).first();
      for (Cause label : {a, b}) {
        const Cause guess = label == a ? b : a;
        const auto hits = static_cast<std::size_t>(
            std::count_if(wrong.transactions.begin(), wrong.transactions.end(),
                          [&](const Transaction& t) { return t.first == guess && t.second == label; }));
        const double confidence = static_cast<double>(hits) / static_cast<double>(pair.count);
        if (!meets_mincon(confidence, cfg.mincon)) continue;
        book.rules.push_back({RuleKind::Correction, pair.items, CauseSet::of(label),
                              static_cast<double>(pair.count) / static_cast<double>(wrong.size()), confidence});
        ++corrections;
      }
    }
  }

  // Keep only single-cause consequents; every rule here already has one.
  std::erase_if(book.rules, [](const AssociationRule& r) { return r.consequent.size() != 1; });
  sort_rules(book.rules);
  book.provenance = "supervised n=" + std::to_string(d.size()) + " mispredicted=" + std::to_string(wrong.size()) +
                    " minsup=" + text::format_double(cfg.minsup) + " mincon=" + text::format_double(cfg.mincon) +
                    " corrections=" + std::to_string(corrections);
  return book;
}

Dataset parse_dataset(std::istream& in) {
  Dataset d;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    auto body = text::trim(line);
    if (const auto hash = body.find('#'); hash != std::string_view::npos) body = text::trim(body.substr(0, hash));
    if (body.empty()) continue;
    const auto where = "dataset line " + std::to_string(lineno) + ": ";
    std::optional<Cause> label;
    if (const auto bar = body.find('|'); bar != std::string_view::npos) {
      label = parse_cause(body.substr(bar + 1));
      if (!label) throw ConfigError(where + "unknown label '" + std::string(text::trim(body.substr(bar + 1))) + "'");
      body = body.substr(0, bar);
    }
    const auto items = text::split(body, ',');
    if (items.size() != 2) throw ConfigError(where + "expected two comma-separated causes");
    const auto first = parse_cause(items[0]);
    const auto second = parse_cause(items[1]);
    if (!first || !second) throw ConfigError(where + "unknown cause code in '" + std::string(body) + "'");
    if (*first == *second) throw ConfigError(where + "first and second guess must differ");
    d.transactions.push_back({*first, *second, label});
  }
  return d;
}

Dataset load_dataset(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open dataset '" + path + "'");
  return parse_dataset(in);
}

void write_dataset(std::ostream& out, const Dataset& d) {
  for (const auto& t : d.transactions) {
    out << code(t.first) << ',' << code(t.second);
    if (t.label) out << '|' << code(*t.label);
    out << '\n';
  }
}

void write_rulebook_csv(std::ostream& out, const RuleBook& book) {
  out << "antecedent,consequent,support,confidence\n";
  for (const auto& r : book.rules) {
    out << r.antecedent.to_string('+') << ',' << r.consequent.to_string('+') << ',' << text::format_double(r.support)
        << ',' << text::format_double(r.confidence) << '\n';
  }
}

RuleBook read_rulebook_csv(std::istream& in) {
  RuleBook book;
  book.provenance = "csv";
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (text::trim(line).empty()) continue;
    if (lineno == 1 && line.rfind("antecedent", 0) == 0) continue;
    const auto where = "rulebook line " + std::to_string(lineno) + ": ";
    const auto fields = text::split_csv_line(line);
    if (fields.size() != 4) throw ConfigError(where + "expected 4 fields");
    const auto x = CauseSet::parse(fields[0]);
    const auto y = CauseSet::parse(fields[1]);
    const auto support = text::parse_double(fields[2]);
    const auto confidence = text::parse_double(fields[3]);
    if (!x || !y || x->is_empty() || y->is_empty() || !support || !confidence) throw ConfigError(where + "malformed rule");
    AssociationRule r{RuleKind::Itemset, *x, *y, *support, *confidence};
    if (y->is_subset_of(*x)) {
      if (x->size() != 2 || y->size() != 1) throw ConfigError(where + "correction rules read {guess,label}->{label}");
      r.kind = RuleKind::Correction;
    } else if (!(*x & *y).is_empty()) {
      throw ConfigError(where + "antecedent and consequent overlap");
    }
    book.rules.push_back(r);
  }
  sort_rules(book.rules);
  return book;
}

RuleBook load_rulebook(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open rulebook '" + path + "'");
  auto book = read_rulebook_csv(in);
  book.provenance = path;
  return book;
}

}  // namespace coopcause
