// Copyright 2026 The latconf Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <limits>
#include <stdexcept>
#include <string>
#include <vector>

namespace latconf {

/// Floor applied to any probability before taking a log.
inline constexpr double kProbFloor = 1e-10;

inline double clamp_prob(double p) {
  return std::min(1.0, std::max(kProbFloor, p));
}

/// Parse errors carry a kind and the 1-based line of the offending input.
class ParseError : public std::runtime_error {
 public:
  enum class Kind {
    MalformedHeader,
    MalformedLine,
    DanglingReference,
    DuplicateId,
    CycleDetected,
    CountMismatch,
    InvalidValue,
    MassViolation,
  };

  ParseError(Kind kind, int line, const std::string& msg)
      : std::runtime_error("line " + std::to_string(line) + ": " + msg),
        kind_(kind),
        line_(line) {}

  Kind kind() const { return kind_; }
  int line() const { return line_; }

 private:
  Kind kind_;
  int line_;
};

/// Semantic problems with otherwise well-formed data.
class DataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Shape or dimension mismatches in numeric code.
class ShapeError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Non-finite values, divergence, degenerate metrics.
class NumericError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

inline std::vector<std::string> split_ws(const std::string& s) {
  std::vector<std::string> out;
  size_t i = 0;
  while (i < s.size()) {
    while (i < s.size() && std::isspace(static_cast<unsigned char>(s[i]))) ++i;
    size_t j = i;
    while (j < s.size() && !std::isspace(static_cast<unsigned char>(s[j]))) ++j;
    if (j > i) out.push_back(s.substr(i, j - i));
    i = j;
  }
  return out;
}

inline std::vector<std::string> split_char(const std::string& s, char c) {
  std::vector<std::string> out;
  size_t start = 0;
  for (size_t i = 0; i <= s.size(); ++i) {
    if (i == s.size() || s[i] == c) {
      out.push_back(s.substr(start, i - start));
      start = i + 1;
    }
  }
  return out;
}

/// Deterministic textual rendering of a real value.
inline std::string fmt_real(double v, int sig = 12) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.*g", sig, v);
  return buf;
}

/// Exact round-trip rendering for checkpoints.
inline std::string fmt_exact(double v) { return fmt_real(v, 17); }

inline double parse_real(const std::string& s, int line = 0) {
  try {
    size_t pos = 0;
    double v = std::stod(s, &pos);
    if (pos != s.size()) throw std::invalid_argument(s);
    return v;
  } catch (const std::exception&) {
    throw ParseError(ParseError::Kind::InvalidValue, line,
                     "bad real value '" + s + "'");
  }
}

inline long parse_int(const std::string& s, int line = 0) {
  try {
    size_t pos = 0;
    long v = std::stol(s, &pos);
    if (pos != s.size()) throw std::invalid_argument(s);
    return v;
  } catch (const std::exception&) {
    throw ParseError(ParseError::Kind::InvalidValue, line,
                     "bad integer value '" + s + "'");
  }
}

inline double log_sum_exp(double a, double b) {
  if (a == -std::numeric_limits<double>::infinity()) return b;
  if (b == -std::numeric_limits<double>::infinity()) return a;
  double m = std::max(a, b);
  return m + std::log(std::exp(a - m) + std::exp(b - m));
}

/// Numerically stabilized softmax (max subtraction).
inline std::vector<double> softmax(const std::vector<double>& scores) {
  std::vector<double> out(scores.size());
  double m = -std::numeric_limits<double>::infinity();
  for (double s : scores) m = std::max(m, s);
  double z = 0.0;
  for (size_t i = 0; i < scores.size(); ++i) {
    out[i] = std::exp(scores[i] - m);
    z += out[i];
  }
  for (double& v : out) v /= z;
  return out;
}

/// FNV-1a, used to fingerprint configs in checkpoints.
inline std::uint64_t fnv1a(const std::string& s) {
  std::uint64_t h = 1469598103934665603ull;
  for (unsigned char c : s) {
    h ^= c;
    h *= 1099511628211ull;
  }
  return h;
}

}  // namespace latconf
