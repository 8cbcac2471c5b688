#pragma once

// Unit conventions used throughout the library:
//   frequencies  - ordinary (non-angular) MHz; the 2*pi lives in generator assembly
//   time         - microseconds
//   temperature  - kelvin
// A frequency f [MHz] and a time t [us] give a phase 2*pi*f*t directly.

#include <cctype>
#include <cmath>
#include <stdexcept>
#include <string>

namespace hoc {

inline constexpr double two_pi = 6.283185307179586476925286766559;
inline constexpr double planck_h = 6.62607015e-34;   // J s
inline constexpr double boltzmann_k = 1.380649e-23;  // J/K

/// Thrown when a configuration value cannot be parsed.
struct config_error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

namespace detail {

inline std::pair<double, std::string> split_value_unit(const std::string& text) {
  std::size_t pos = 0;
  double value = 0;
  try {
    value = std::stod(text, &pos);
  } catch (const std::exception&) {
    throw config_error("cannot parse number in '" + text + "'");
  }
  while (pos < text.size() && std::isspace(static_cast<unsigned char>(text[pos]))) ++pos;
  std::string unit = text.substr(pos);
  while (!unit.empty() && std::isspace(static_cast<unsigned char>(unit.back()))) unit.pop_back();
  return {value, unit};
}

}  // namespace detail

/// Parse a frequency with an explicit unit suffix ("15.9 MHz") to MHz.
/// The unit is mandatory; bare numbers are rejected to avoid 2*pi/unit bugs.
inline double parse_frequency_mhz(const std::string& text) {
  auto [value, unit] = detail::split_value_unit(text);
  if (unit == "GHz") return value * 1e3;
  if (unit == "MHz") return value;
  if (unit == "kHz") return value * 1e-3;
  if (unit == "Hz") return value * 1e-6;
  throw config_error("frequency '" + text + "' needs a unit of GHz, MHz, kHz or Hz");
}

/// Parse a temperature ("25 mK") to kelvin.
inline double parse_temperature_k(const std::string& text) {
  auto [value, unit] = detail::split_value_unit(text);
  if (unit == "K") return value;
  if (unit == "mK") return value * 1e-3;
  if (unit == "uK") return value * 1e-6;
  throw config_error("temperature '" + text + "' needs a unit of K, mK or uK");
}

/// Parse a duration ("1 us", "5 ns") to microseconds.
inline double parse_time_us(const std::string& text) {
  auto [value, unit] = detail::split_value_unit(text);
  if (unit == "s") return value * 1e6;
  if (unit == "ms") return value * 1e3;
  if (unit == "us") return value;
  if (unit == "ns") return value * 1e-3;
  throw config_error("duration '" + text + "' needs a unit of s, ms, us or ns");
}

}  // namespace hoc
