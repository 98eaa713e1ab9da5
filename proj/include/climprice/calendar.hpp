#pragma once

#include <compare>
#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace climprice {

// Calendar month. Ordering and differences follow the absolute month index.
class YearMonth {
 public:
  constexpr YearMonth() = default;
  constexpr YearMonth(int year, int month) : index_(year * 12 + (month - 1)) {}

  static constexpr YearMonth from_index(std::int64_t index) {
    YearMonth ym;
    ym.index_ = index;
    return ym;
  }

  // Accepts "YYYY-MM" or "YYYY-MM-DD". Throws ParseError otherwise.
  static YearMonth parse(std::string_view text);

  // Month containing the given day count (days since 1970-01-01).
  static YearMonth from_epoch_days(std::int32_t days);

  constexpr int year() const { return static_cast<int>(floor_div(index_, 12)); }
  constexpr int month() const { return static_cast<int>(index_ - floor_div(index_, 12) * 12) + 1; }
  constexpr std::int64_t index() const { return index_; }

  // Days since 1970-01-01 of the first day of this month.
  std::int32_t epoch_days() const;

  std::string str() const;

  constexpr YearMonth operator+(std::int64_t months) const { return from_index(index_ + months); }
  constexpr YearMonth operator-(std::int64_t months) const { return from_index(index_ - months); }
  constexpr std::int64_t operator-(YearMonth other) const { return index_ - other.index_; }

  constexpr auto operator<=>(const YearMonth&) const = default;

 private:
  static constexpr std::int64_t floor_div(std::int64_t a, std::int64_t b) {
    return a / b - ((a % b != 0) && ((a < 0) != (b < 0)) ? 1 : 0);
  }

  std::int64_t index_ = 0;
};

enum class Season { All, Spring, Summer, Autumn, Winter };

// Meteorological seasons by calendar month; December belongs to winter.
Season season_of(int month);
std::string_view to_string(Season s);
Season parse_season(std::string_view text);

// Inclusive range of months.
struct MonthWindow {
  YearMonth first;
  YearMonth last;

  std::int64_t size() const { return last - first + 1; }
  bool contains(YearMonth m) const { return first <= m && m <= last; }
  bool operator==(const MonthWindow&) const = default;
};

// Inclusive range of calendar years, e.g. the 1950-1980 reference period.
struct YearWindow {
  int first = 0;
  int last = 0;

  bool contains(int year) const { return first <= year && year <= last; }
  MonthWindow months() const { return {YearMonth(first, 1), YearMonth(last, 12)}; }
};

// Throws IrregularCalendar unless the axis is strictly increasing in steps of one month.
void require_monthly(std::span<const YearMonth> times, std::string_view what);

std::vector<YearMonth> month_range(YearMonth first, std::int64_t count);

}  // namespace climprice
