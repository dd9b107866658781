#include "coopcause/cause.hpp"

#include <cmath>
#include <sstream>

#include "coopcause/error.hpp"

namespace coopcause {

namespace {
constexpr std::array<std::string_view, kCauseCount> kCodes = {"I", "Wo", "We", "SE", "Re"};

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}
}  // namespace

std::string_view code(Cause c) { return kCodes[index_of(c)]; }

std::optional<Cause> parse_cause(std::string_view text) {
  text = trim(text);
  for (std::size_t i = 0; i < kCauseCount; ++i) {
    if (text == kCodes[i]) return cause_at(i);
  }
  return std::nullopt;
}

std::string CauseSet::to_string(char sep) const {
  if (is_empty()) return "EMPTY";
  if (is_omega()) return "OMEGA";
  std::string out;
  for (Cause c : kAllCauses) {
    if (!contains(c)) continue;
    if (!out.empty()) out += sep;
    out += code(c);
  }
  return out;
}

std::optional<CauseSet> CauseSet::parse(std::string_view text) {
  text = trim(text);
  if (text == "OMEGA") return omega();
  if (text == "EMPTY") return empty();
  if (text.empty()) return std::nullopt;
  CauseSet out;
  while (!text.empty()) {
    const auto pos = text.find_first_of(",+;");
    const auto token = text.substr(0, pos);
    const auto cause = parse_cause(token);
    if (!cause) return std::nullopt;
    out = out | of(*cause);
    if (pos == std::string_view::npos) break;
    text.remove_prefix(pos + 1);
  }
  return out;
}

std::optional<std::string> CauseVector::check(const std::array<double, kCauseCount>& p) {
  double sum = 0.0;
  for (std::size_t i = 0; i < kCauseCount; ++i) {
    if (!std::isfinite(p[i]) || p[i] < 0.0 || p[i] > 1.0) {
      std::ostringstream os;
      os << "probability for " << kCodes[i] << " is " << p[i] << ", outside [0,1]";
      return os.str();
    }
    sum += p[i];
  }
  if (std::abs(sum - 1.0) > kTolerance) {
    std::ostringstream os;
    os << "probabilities sum to " << sum << ", not 1";
    return os.str();
  }
  return std::nullopt;
}

CauseVector::CauseVector(const std::array<double, kCauseCount>& p) : p_(p) {
  if (auto problem = check(p)) throw ConfigError("invalid cause vector: " + *problem);
}

CauseVector CauseVector::uniform() { return CauseVector({0.2, 0.2, 0.2, 0.2, 0.2}); }

CauseVector CauseVector::certain(Cause c) {
  std::array<double, kCauseCount> p{};
  p[index_of(c)] = 1.0;
  return CauseVector(p);
}

std::pair<Cause, Cause> CauseVector::top_two() const {
  std::size_t best = 0;
  for (std::size_t i = 1; i < kCauseCount; ++i) {
    if (p_[i] > p_[best]) best = i;
  }
  std::size_t second = best == 0 ? 1 : 0;
  for (std::size_t i = 0; i < kCauseCount; ++i) {
    if (i == best) continue;
    if (p_[i] > p_[second]) second = i;
  }
  return {cause_at(best), cause_at(second)};
}

}  // namespace coopcause
