#include "coopcause/evidence.hpp"

#include <cmath>
#include <sstream>

#include "coopcause/error.hpp"

namespace coopcause {

namespace {

struct Focal {
  std::uint8_t bits;
  double mass;
};

// Non-zero entries of a dense mass, at most 32.
struct FocalList {
  std::array<Focal, kSubsetCount> items;
  std::size_t count = 0;

  explicit FocalList(const MassFunction& m) {
    const auto& d = m.dense();
    for (std::size_t i = 0; i < kSubsetCount; ++i) {
      if (d[i] != 0.0) items[count++] = {static_cast<std::uint8_t>(i), d[i]};
    }
  }
  const Focal* begin() const { return items.data(); }
  const Focal* end() const { return items.data() + count; }
};

void require_valid(const MassFunction& m, std::string_view name) {
  if (auto problem = validate_mass(m)) {
    throw DomainError(std::string(name) + " is not a valid mass function: " + *problem);
  }
}

MassFunction conjunctive_unchecked(const MassFunction& m1, const MassFunction& m2) {
  std::array<double, kSubsetCount> out{};
  const FocalList a(m1);
  const FocalList b(m2);
  for (const Focal& x : a) {
    for (const Focal& y : b) out[x.bits & y.bits] += x.mass * y.mass;
  }
  MassFunction result;
  for (std::size_t i = 0; i < kSubsetCount; ++i) result.set(CauseSet(static_cast<std::uint8_t>(i)), out[i]);
  return result;
}

// Dempster normalization of an already-combined mass; nullopt on total conflict.
std::optional<MassFunction> normalize(const MassFunction& raw) {
  const double surviving = raw.non_empty_total();
  if (!(surviving > 0.0)) return std::nullopt;
  MassFunction out;
  for (std::size_t i = 1; i < kSubsetCount; ++i) {
    const CauseSet a(static_cast<std::uint8_t>(i));
    out.set(a, raw[a] / surviving);
  }
  return out;
}

}  // namespace

MassFunction::MassFunction(std::initializer_list<std::pair<CauseSet, double>> focal) {
  for (const auto& [set, mass] : focal) m_[set.bits()] += mass;
}

MassFunction MassFunction::vacuous() { return MassFunction{{CauseSet::omega(), 1.0}}; }

MassFunction MassFunction::bayesian(const CauseVector& c) {
  MassFunction m;
  for (Cause cause : kAllCauses) m.set(CauseSet::of(cause), c[cause]);
  return m;
}

std::vector<std::pair<CauseSet, double>> MassFunction::focal() const {
  std::vector<std::pair<CauseSet, double>> out;
  for (std::size_t i = 0; i < kSubsetCount; ++i) {
    if (m_[i] != 0.0) out.emplace_back(CauseSet(static_cast<std::uint8_t>(i)), m_[i]);
  }
  return out;
}

double MassFunction::total() const {
  double sum = 0.0;
  for (double v : m_) sum += v;
  return sum;
}

double MassFunction::non_empty_total() const {
  double sum = 0.0;
  for (std::size_t i = 1; i < kSubsetCount; ++i) sum += m_[i];
  return sum;
}

std::optional<std::string> validate_mass(const MassFunction& m) {
  for (std::size_t i = 0; i < kSubsetCount; ++i) {
    const double v = m.dense()[i];
    if (!std::isfinite(v) || v < 0.0 || v > 1.0 + MassFunction::kTolerance) {
      std::ostringstream os;
      os << "mass " << v << " on " << CauseSet(static_cast<std::uint8_t>(i)).to_string()
         << " is outside [0,1]";
      return os.str();
    }
  }
  const double sum = m.total();
  if (std::abs(sum - 1.0) > MassFunction::kTolerance) {
    std::ostringstream os;
    os.precision(12);
    os << "total mass " << sum << " != 1";
    return os.str();
  }
  return std::nullopt;
}

std::string_view to_string(CombinationRule rule) {
  return rule == CombinationRule::Conjunctive ? "conjunctive" : "dempster";
}

std::optional<CombinationRule> parse_combination_rule(std::string_view text) {
  if (text == "conjunctive") return CombinationRule::Conjunctive;
  if (text == "dempster") return CombinationRule::Dempster;
  return std::nullopt;
}

MassFunction conjunctive_combine(const MassFunction& m1, const MassFunction& m2) {
  require_valid(m1, "m1");
  require_valid(m2, "m2");
  return conjunctive_unchecked(m1, m2);
}

double conflict(const MassFunction& m1, const MassFunction& m2) {
  return conjunctive_combine(m1, m2)[CauseSet::empty()];
}

MassFunction dempster_combine(const MassFunction& m1, const MassFunction& m2) {
  require_valid(m1, "m1");
  require_valid(m2, "m2");
  auto combined = normalize(conjunctive_unchecked(m1, m2));
  if (!combined) throw DomainError("undefined combination, K=1 (total conflict)");
  return *combined;
}

MassFunction combine_all(std::span<const MassFunction> masses, CombinationRule rule) {
  if (masses.empty()) throw DomainError("cannot combine an empty list of mass functions");
  for (std::size_t i = 0; i < masses.size(); ++i) {
    require_valid(masses[i], "mass #" + std::to_string(i + 1));
  }
  MassFunction acc = masses[0];
  for (std::size_t i = 1; i < masses.size(); ++i) {
    acc = conjunctive_unchecked(acc, masses[i]);
    if (rule == CombinationRule::Dempster) {
      auto normalized = normalize(acc);
      if (!normalized) {
        throw DomainError("undefined combination, K=1 (total conflict) after combining the first " +
                          std::to_string(i + 1) + " masses");
      }
      acc = *normalized;
    }
  }
  return acc;
}

CauseVector pignistic(const MassFunction& m) {
  for (double v : m.dense()) {
    if (!std::isfinite(v) || v < 0.0) throw DomainError("pignistic transform of a negative or non-finite mass");
  }
  // Equal to 1 - m(EMPTY) for a normalized mass; summing the survivors keeps
  // precision when almost everything sits on the empty set.
  const double surviving = m.non_empty_total();
  if (!(surviving > 0.0)) throw DomainError("no surviving belief: all mass is on the empty set");
  std::array<double, kCauseCount> betp{};
  for (std::size_t i = 1; i < kSubsetCount; ++i) {
    const double v = m.dense()[i];
    if (v == 0.0) continue;
    const CauseSet a(static_cast<std::uint8_t>(i));
    const double share = v / (static_cast<double>(a.size()) * surviving);
    for (Cause c : kAllCauses) {
      if (a.contains(c)) betp[index_of(c)] += share;
    }
  }
  double sum = 0.0;
  for (double v : betp) sum += v;
  for (double& v : betp) v = std::min(1.0, v / sum);
  return CauseVector(betp);
}

MassFunction mass_from_cause_vector(const CauseVector& c, double ignorance) {
  if (!(ignorance >= 0.0 && ignorance < 1.0)) {
    throw ConfigError("ignorance must be in [0,1), got " + std::to_string(ignorance));
  }
  const auto [top1, top2] = c.top_two();
  const double p1 = c[top1];
  const double p2 = c[top2];
  const double w1 = p1 / (p1 + p2);
  const double w2 = p2 / (p1 + p2);
  MassFunction m;
  m.add(CauseSet::of(top1), (1.0 - ignorance) * w1);
  m.add(CauseSet::of(top1, top2), (1.0 - ignorance) * w2);
  m.add(CauseSet::omega(), ignorance);
  return m;
}

}  // namespace coopcause
