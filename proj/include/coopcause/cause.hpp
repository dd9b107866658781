#pragma once

#include <array>
#include <bit>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <utility>

namespace coopcause {

/// Congestion causes in canonical order. The numeric value is the index used
/// everywhere (bit position in CauseSet, slot in CauseVector, tie-break order).
enum class Cause : std::uint8_t {
  Incident = 0,
  Workzone = 1,
  Weather = 2,
  SpecialEvent = 3,
  Recurrent = 4,
};

inline constexpr std::size_t kCauseCount = 5;
inline constexpr std::array<Cause, kCauseCount> kAllCauses = {
    Cause::Incident, Cause::Workzone, Cause::Weather, Cause::SpecialEvent,
    Cause::Recurrent};

constexpr std::size_t index_of(Cause c) { return static_cast<std::size_t>(c); }
constexpr Cause cause_at(std::size_t i) { return static_cast<Cause>(i); }

/// Short codes used in every file format: I, Wo, We, SE, Re.
std::string_view code(Cause c);
std::optional<Cause> parse_cause(std::string_view text);

/// Subset of the five causes as a 5-bit mask; bit i is cause i.
class CauseSet {
 public:
  constexpr CauseSet() = default;
  constexpr explicit CauseSet(std::uint8_t bits) : bits_(bits & 0x1f) {}

  static constexpr CauseSet empty() { return CauseSet{}; }
  static constexpr CauseSet omega() { return CauseSet{0x1f}; }
  static constexpr CauseSet of(Cause c) {
    return CauseSet{static_cast<std::uint8_t>(1u << index_of(c))};
  }
  static constexpr CauseSet of(Cause a, Cause b) { return of(a) | of(b); }

  constexpr std::uint8_t bits() const { return bits_; }
  constexpr bool is_empty() const { return bits_ == 0; }
  constexpr bool is_omega() const { return bits_ == 0x1f; }
  constexpr int size() const { return std::popcount(bits_); }
  constexpr bool contains(Cause c) const { return (bits_ >> index_of(c)) & 1u; }
  constexpr bool is_subset_of(CauseSet other) const {
    return (bits_ & other.bits_) == bits_;
  }
  /// Lowest-index member; the set must not be empty.
  constexpr Cause first() const {
    return cause_at(static_cast<std::size_t>(std::countr_zero(bits_)));
  }

  constexpr CauseSet operator&(CauseSet o) const {
    return CauseSet{static_cast<std::uint8_t>(bits_ & o.bits_)};
  }
  constexpr CauseSet operator|(CauseSet o) const {
    return CauseSet{static_cast<std::uint8_t>(bits_ | o.bits_)};
  }
  constexpr CauseSet without(CauseSet o) const {
    return CauseSet{static_cast<std::uint8_t>(bits_ & ~o.bits_)};
  }
  constexpr bool operator==(const CauseSet&) const = default;
  constexpr auto operator<=>(const CauseSet&) const = default;

  /// Comma-joined codes ("We,Re"); "OMEGA" and "EMPTY" for the extremes.
  std::string to_string(char sep = ',') const;
  /// Inverse of to_string; accepts ',' '+' ';' as separators.
  static std::optional<CauseSet> parse(std::string_view text);

 private:
  std::uint8_t bits_ = 0;
};

inline constexpr std::size_t kSubsetCount = 32;

/// Five-way probability vector over the causes, in canonical order.
class CauseVector {
 public:
  static constexpr double kTolerance = 1e-9;

  /// Throws ConfigError unless every entry is in [0,1] and the sum is 1.
  explicit CauseVector(const std::array<double, kCauseCount>& p);
  static CauseVector uniform();
  static CauseVector certain(Cause c);

  double operator[](Cause c) const { return p_[index_of(c)]; }
  const std::array<double, kCauseCount>& values() const { return p_; }

  /// Highest and second-highest entries; ties go to the lower index.
  std::pair<Cause, Cause> top_two() const;
  Cause argmax() const { return top_two().first; }

  bool operator==(const CauseVector&) const = default;

  /// Returns a message describing the first violated invariant, if any.
  static std::optional<std::string> check(const std::array<double, kCauseCount>& p);

 private:
  std::array<double, kCauseCount> p_;
};

}  // namespace coopcause
