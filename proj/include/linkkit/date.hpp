#pragma once

#include <chrono>
#include <compare>
#include <string>
#include <string_view>

namespace linkkit {

/// Calendar day in UTC. Carries no time-of-day by construction.
class Date {
 public:
  constexpr Date() = default;
  constexpr explicit Date(std::chrono::sys_days days) : days_(days) {}
  constexpr Date(int year, unsigned month, unsigned day)
      : days_(std::chrono::year_month_day{std::chrono::year{year}, std::chrono::month{month},
                                          std::chrono::day{day}}) {}

  /// Strict `YYYY-MM-DD`.
  static Date parse(std::string_view iso);

  static constexpr Date from_day_number(long n) {
    return Date(std::chrono::sys_days{std::chrono::days{n}});
  }

  constexpr long day_number() const { return days_.time_since_epoch().count(); }
  constexpr std::chrono::sys_days sys_days() const { return days_; }

  std::string to_string() const;

  constexpr Date plus_days(long n) const { return Date(days_ + std::chrono::days{n}); }

  friend constexpr auto operator<=>(const Date&, const Date&) = default;

 private:
  std::chrono::sys_days days_{};
};

/// Signed difference `b - a` in days.
constexpr long days_between(const Date& a, const Date& b) { return b.day_number() - a.day_number(); }

}  // namespace linkkit
