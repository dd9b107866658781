#pragma once

#include <array>
#include <cstdint>
#include <iosfwd>
#include <limits>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "coopcause/cause.hpp"
#include "coopcause/ids.hpp"

namespace coopcause {

enum class RecordKind : std::uint8_t {
  Setup,
  Arrival,
  Departure,
  BeaconStats,
  CongestionDetected,
  Initiate,
  ReportSent,
  ReportReceived,
  Decision,
  Rq,
  Rp,
};

inline constexpr std::size_t kRecordKindCount = 11;

std::string_view to_string(RecordKind k);
std::optional<RecordKind> parse_record_kind(std::string_view text);

inline constexpr float kNoValue = std::numeric_limits<float>::quiet_NaN();

// Field use by kind (a, b, c are floats):
//   setup            segment >= 0: a=length b=free-flow speed; otherwise aux indexes a note
//   arrival          aux=equipped b=special-event trip
//   departure        a=time spent on the network
//   beacon-stats     a=travel time on segment b=speed c=gap (NaN if no leader heard) aux=demand
//   congestion-det.  a=travel time aux=spurious
//   initiate         cause
//   report-sent      cause=top cause a=created aux=vector index
//   report-received  cause a=created aux=sender
//   decision         cause a=confidence aux=decider's segment c=reports used
//   rq / rp          cause a=created aux=origin b=transmitter's segment
struct LogRecord {
  double time = 0.0;
  VehicleId vehicle = kNoVehicle;
  std::int32_t aux = -1;
  std::int16_t segment = -1;
  RecordKind kind = RecordKind::Setup;
  std::int8_t cause = -1;
  float a = kNoValue;
  float b = kNoValue;
  float c = kNoValue;

  std::optional<Cause> cause_value() const {
    return cause < 0 ? std::nullopt : std::optional<Cause>(cause_at(static_cast<std::size_t>(cause)));
  }
};

static_assert(sizeof(LogRecord) == 32);

inline std::int8_t cause_code(Cause c) { return static_cast<std::int8_t>(index_of(c)); }

/// Append-only, time-ordered record list plus side tables for notes and
/// cause vectors.
class EventLog {
 public:
  /// Throws DomainError when `r.time` precedes the previous record.
  void add(const LogRecord& r);
  std::int32_t add_note(std::string note);
  std::int32_t add_vector(const std::array<float, kCauseCount>& v);

  const std::vector<LogRecord>& records() const { return records_; }
  const std::string& note(std::int32_t i) const { return notes_.at(static_cast<std::size_t>(i)); }
  const std::array<float, kCauseCount>& vector(std::int32_t i) const {
    return vectors_.at(static_cast<std::size_t>(i));
  }
  std::size_t size() const { return records_.size(); }
  std::size_t count(RecordKind k) const;
  void reserve(std::size_t n) { records_.reserve(n); }

 private:
  std::vector<LogRecord> records_;
  std::vector<std::string> notes_;
  std::vector<std::array<float, kCauseCount>> vectors_;
};

/// CSV with header `time,vehicle,kind,segment,payload`; the payload is a
/// comma-free `key=value;...` list.
void write_event_log_csv(std::ostream& out, const EventLog& log);
std::string format_payload(const EventLog& log, const LogRecord& r);
/// Inverse of write_event_log_csv. Parse errors name the line.
EventLog read_event_log_csv(std::istream& in);

}  // namespace coopcause
