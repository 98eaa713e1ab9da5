#include "climprice/calendar.hpp"

#include <charconv>
#include <cstdio>

#include "climprice/error.hpp"

namespace climprice {

std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::InvalidConfig: return "InvalidConfig";
    case ErrorCode::InvalidArgument: return "InvalidArgument";
    case ErrorCode::ParseError: return "ParseError";
    case ErrorCode::IrregularCalendar: return "IrregularCalendar";
    case ErrorCode::AllMasked: return "AllMasked";
    case ErrorCode::NoSectorsRemain: return "NoSectorsRemain";
    case ErrorCode::EmptyIntersection: return "EmptyIntersection";
    case ErrorCode::InsufficientHistory: return "InsufficientHistory";
    case ErrorCode::DegenerateThreshold: return "DegenerateThreshold";
    case ErrorCode::EmptyRegion: return "EmptyRegion";
    case ErrorCode::NonConformable: return "NonConformable";
    case ErrorCode::NonConformableMask: return "NonConformableMask";
    case ErrorCode::EmptyDomain: return "EmptyDomain";
    case ErrorCode::CenterOutsideDomain: return "CenterOutsideDomain";
    case ErrorCode::EmptyFootprint: return "EmptyFootprint";
    case ErrorCode::InsufficientSample: return "InsufficientSample";
    case ErrorCode::Io: return "Io";
    case ErrorCode::RankDeficientDesign: return "RankDeficientDesign";
    case ErrorCode::ZeroCrossCovariance: return "ZeroCrossCovariance";
    case ErrorCode::SingularFactorCovariance: return "SingularFactorCovariance";
  }
  return "Unknown";
}

namespace {

// Howard Hinnant's civil-calendar algorithms.
std::int64_t days_from_civil(std::int64_t y, unsigned m, unsigned d) {
  y -= m <= 2;
  const std::int64_t era = (y >= 0 ? y : y - 399) / 400;
  const unsigned yoe = static_cast<unsigned>(y - era * 400);
  const unsigned doy = (153 * (m > 2 ? m - 3 : m + 9) + 2) / 5 + d - 1;
  const unsigned doe = yoe * 365 + yoe / 4 - yoe / 100 + doy;
  return era * 146097 + static_cast<std::int64_t>(doe) - 719468;
}

void civil_from_days(std::int64_t z, std::int64_t& y, unsigned& m) {
  z += 719468;
  const std::int64_t era = (z >= 0 ? z : z - 146096) / 146097;
  const unsigned doe = static_cast<unsigned>(z - era * 146097);
  const unsigned yoe = (doe - doe / 1460 + doe / 36524 - doe / 146096) / 365;
  const unsigned doy = doe - (365 * yoe + yoe / 4 - yoe / 100);
  const unsigned mp = (5 * doy + 2) / 153;
  m = mp < 10 ? mp + 3 : mp - 9;
  y = static_cast<std::int64_t>(yoe) + era * 400 + (m <= 2);
}

bool parse_int(std::string_view s, int& out) {
  if (s.empty()) return false;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
  return ec == std::errc() && ptr == s.data() + s.size();
}

}  // namespace

YearMonth YearMonth::parse(std::string_view text) {
  while (!text.empty() && (text.back() == ' ' || text.back() == '\r')) text.remove_suffix(1);
  while (!text.empty() && text.front() == ' ') text.remove_prefix(1);
  int year = 0, month = 0, day = 1;
  bool ok = text.size() >= 7 && text[4] == '-' && parse_int(text.substr(0, 4), year) &&
            parse_int(text.substr(5, 2), month);
  if (ok && text.size() > 7) {
    ok = text.size() == 10 && text[7] == '-' && parse_int(text.substr(8, 2), day);
  }
  if (!ok || month < 1 || month > 12 || day < 1 || day > 31) {
    fail(ErrorCode::ParseError, "invalid month '" + std::string(text) + "' (expected YYYY-MM)");
  }
  return YearMonth(year, month);
}

YearMonth YearMonth::from_epoch_days(std::int32_t days) {
  std::int64_t y = 0;
  unsigned m = 0;
  civil_from_days(days, y, m);
  return YearMonth(static_cast<int>(y), static_cast<int>(m));
}

std::int32_t YearMonth::epoch_days() const {
  return static_cast<std::int32_t>(days_from_civil(year(), static_cast<unsigned>(month()), 1));
}

std::string YearMonth::str() const {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%04d-%02d", year(), month());
  return buf;
}

Season season_of(int month) {
  switch (month) {
    case 3: case 4: case 5: return Season::Spring;
    case 6: case 7: case 8: return Season::Summer;
    case 9: case 10: case 11: return Season::Autumn;
    default: return Season::Winter;
  }
}

std::string_view to_string(Season s) {
  switch (s) {
    case Season::All: return "all";
    case Season::Spring: return "spring";
    case Season::Summer: return "summer";
    case Season::Autumn: return "autumn";
    case Season::Winter: return "winter";
  }
  return "all";
}

Season parse_season(std::string_view text) {
  for (Season s : {Season::All, Season::Spring, Season::Summer, Season::Autumn, Season::Winter}) {
    if (to_string(s) == text) return s;
  }
  fail(ErrorCode::InvalidArgument, "unknown season '" + std::string(text) + "'");
}

void require_monthly(std::span<const YearMonth> times, std::string_view what) {
  for (std::size_t i = 1; i < times.size(); ++i) {
    if (times[i] - times[i - 1] != 1) {
      fail(ErrorCode::IrregularCalendar, std::string(what) + ": expected " + (times[i - 1] + 1).str() +
                                             " after " + times[i - 1].str() + ", found " + times[i].str());
    }
  }
}

std::vector<YearMonth> month_range(YearMonth first, std::int64_t count) {
  std::vector<YearMonth> out;
  out.reserve(static_cast<std::size_t>(count));
  for (std::int64_t i = 0; i < count; ++i) out.push_back(first + i);
  return out;
}

}  // namespace climprice
