#include "coopcause/event_log.hpp"

#include <charconv>
#include <cmath>
#include <istream>
#include <ostream>

#include "coopcause/error.hpp"
#include "coopcause/text.hpp"

namespace coopcause {

namespace {

constexpr std::array<std::string_view, kRecordKindCount> kKindNames = {
    "setup",    "arrival",         "departure", "beacon-stats", "congestion-detected", "initiate",
    "report-sent", "report-received", "decision", "rq",           "rp"};

std::string fmt(float v) {
  if (std::isnan(v)) return "nan";
  char buf[32];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

float parse_float(std::string_view s) {
  s = text::trim(s);
  if (s == "nan") return kNoValue;
  float v = 0.0f;
  const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  if (res.ec != std::errc{} || res.ptr != s.data() + s.size()) throw ConfigError("bad number '" + std::string(s) + "'");
  return v;
}

std::string cause_text(const LogRecord& r) {
  const auto c = r.cause_value();
  return c ? std::string(code(*c)) : std::string("none");
}

}  // namespace

std::string_view to_string(RecordKind k) { return kKindNames[static_cast<std::size_t>(k)]; }

std::optional<RecordKind> parse_record_kind(std::string_view text) {
  for (std::size_t i = 0; i < kKindNames.size(); ++i) {
    if (kKindNames[i] == text) return static_cast<RecordKind>(i);
  }
  return std::nullopt;
}

void EventLog::add(const LogRecord& r) {
  if (!records_.empty() && r.time < records_.back().time) {
    throw DomainError("event log time went backwards: " + text::format_double(r.time) + " after " +
                      text::format_double(records_.back().time));
  }
  records_.push_back(r);
}

std::int32_t EventLog::add_note(std::string note) {
  notes_.push_back(std::move(note));
  return static_cast<std::int32_t>(notes_.size() - 1);
}

std::int32_t EventLog::add_vector(const std::array<float, kCauseCount>& v) {
  vectors_.push_back(v);
  return static_cast<std::int32_t>(vectors_.size() - 1);
}

std::size_t EventLog::count(RecordKind k) const {
  std::size_t n = 0;
  for (const auto& r : records_) n += r.kind == k ? 1 : 0;
  return n;
}

std::string format_payload(const EventLog& log, const LogRecord& r) {
  switch (r.kind) {
    case RecordKind::Setup:
      if (r.segment >= 0) return "length=" + fmt(r.a) + ";speed=" + fmt(r.b);
      return log.note(r.aux);
    case RecordKind::Arrival:
      return "equipped=" + std::to_string(r.aux) + ";special=" + fmt(r.b);
    case RecordKind::Departure:
      return "travel=" + fmt(r.a);
    case RecordKind::BeaconStats:
      return "tt=" + fmt(r.a) + ";speed=" + fmt(r.b) + ";gap=" + fmt(r.c) + ";demand=" + std::to_string(r.aux);
    case RecordKind::CongestionDetected:
      return "tt=" + fmt(r.a) + ";spurious=" + std::to_string(r.aux);
    case RecordKind::Initiate:
      return "cause=" + cause_text(r);
    case RecordKind::ReportSent: {
      std::string v;
      for (float p : log.vector(r.aux)) v += (v.empty() ? "" : "/") + fmt(p);
      return "cause=" + cause_text(r) + ";created=" + fmt(r.a) + ";vector=" + v;
    }
    case RecordKind::ReportReceived:
      return "from=" + std::to_string(r.aux) + ";cause=" + cause_text(r) + ";created=" + fmt(r.a);
    case RecordKind::Decision:
      return "cause=" + cause_text(r) + ";confidence=" + fmt(r.a) + ";at=" + std::to_string(r.aux) +
             ";reports=" + fmt(r.c);
    case RecordKind::Rq:
    case RecordKind::Rp:
      return "origin=" + std::to_string(r.aux) + ";cause=" + cause_text(r) + ";created=" + fmt(r.a) +
             ";at=" + fmt(r.b);
  }
  return {};
}

void write_event_log_csv(std::ostream& out, const EventLog& log) {
  out << "time,vehicle,kind,segment,payload\n";
  std::string line;
  for (const auto& r : log.records()) {
    line.clear();
    line += text::format_double(r.time);
    line += ',';
    line += std::to_string(r.vehicle);
    line += ',';
    line += to_string(r.kind);
    line += ',';
    line += std::to_string(r.segment);
    line += ',';
    line += format_payload(log, r);
    line += '\n';
    out << line;
  }
}

EventLog read_event_log_csv(std::istream& in) {
  EventLog log;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line_no == 1) {
      if (text::trim(line) != "time,vehicle,kind,segment,payload") throw ConfigError("line 1: unexpected header");
      continue;
    }
    if (text::trim(line).empty()) continue;
    try {
      const auto cols = text::split(line, ',');
      if (cols.size() != 5) throw ConfigError("expected 5 columns");
      LogRecord r;
      const auto t = text::parse_double(cols[0]);
      const auto v = text::parse_int(cols[1]);
      const auto kind = parse_record_kind(text::trim(cols[2]));
      const auto seg = text::parse_int(cols[3]);
      if (!t || !v || !kind || !seg) throw ConfigError("malformed fixed columns");
      r.time = *t;
      r.vehicle = static_cast<VehicleId>(*v);
      r.kind = *kind;
      r.segment = static_cast<std::int16_t>(*seg);

      const std::string_view payload = text::trim(cols[4]);
      if (r.kind == RecordKind::Setup && r.segment < 0) {
        r.aux = log.add_note(std::string(payload));
        log.add(r);
        continue;
      }
      for (auto field : text::split(payload, ';')) {
        if (text::trim(field).empty()) continue;
        const auto eq = field.find('=');
        if (eq == std::string_view::npos) throw ConfigError("payload field without '='");
        const auto key = field.substr(0, eq);
        const auto value = field.substr(eq + 1);
        const auto integer = [&] {
          const auto i = text::parse_int(value);
          if (!i) throw ConfigError("bad integer '" + std::string(value) + "'");
          return static_cast<std::int32_t>(*i);
        };
        if (key == "cause") {
          if (value != "none") {
            const auto c = parse_cause(value);
            if (!c) throw ConfigError("unknown cause '" + std::string(value) + "'");
            r.cause = cause_code(*c);
          }
        } else if (key == "length" || key == "travel" || key == "tt" || key == "confidence" || key == "created") {
          r.a = parse_float(value);
        } else if (key == "speed" || key == "special") {
          r.b = parse_float(value);
        } else if (key == "gap" || key == "reports") {
          r.c = parse_float(value);
        } else if (key == "at") {
          if (r.kind == RecordKind::Decision) {
            r.aux = integer();
          } else {
            r.b = parse_float(value);
          }
        } else if (key == "equipped" || key == "demand" || key == "spurious" || key == "from" || key == "origin") {
          r.aux = integer();
        } else if (key == "vector") {
          const auto parts = text::split(value, '/');
          if (parts.size() != kCauseCount) throw ConfigError("vector needs 5 entries");
          std::array<float, kCauseCount> vec{};
          for (std::size_t i = 0; i < kCauseCount; ++i) vec[i] = parse_float(parts[i]);
          r.aux = log.add_vector(vec);
        } else {
          throw ConfigError("unknown payload field '" + std::string(key) + "'");
        }
      }
      log.add(r);
    } catch (const Error& e) {
      throw ConfigError("event log line " + std::to_string(line_no) + ": " + e.what());
    }
  }
  return log;
}

}  // namespace coopcause
