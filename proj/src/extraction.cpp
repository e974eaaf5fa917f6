#include "coordseg/extraction.hpp"

#include <algorithm>
#include <array>
#include <cctype>
#include <charconv>
#include <cmath>
#include <cstdlib>
#include <string>
#include <vector>

#include <fmt/format.h>

namespace coordseg {

namespace {

struct NumberToken {
  double value;
  std::size_t begin;
  std::size_t end;
};

bool is_digit(char c) { return c >= '0' && c <= '9'; }
bool is_alpha(char c) { return (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || c == '_'; }
bool is_separator(char c) {
  return c == ',' || c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\f' || c == '\v';
}

double to_double(std::string_view digits) {
  double v = 0.0;
  auto [ptr, ec] = std::from_chars(digits.data(), digits.data() + digits.size(), v);
  if (ec == std::errc::result_out_of_range) {
    // from_chars leaves v untouched on overflow/underflow; strtod saturates.
    const std::string copy(digits);
    v = std::strtod(copy.c_str(), nullptr);
  }
  return v;
}

/// Lexes a decimal number starting at `i`: [+-]? (digits [. digits?] | . digits) ([eE][+-]?digits)?
/// Returns the end offset, or npos when no number starts here.
std::size_t lex_number(std::string_view s, std::size_t i) {
  std::size_t p = i;
  if (p < s.size() && (s[p] == '+' || s[p] == '-')) ++p;
  const std::size_t mantissa = p;
  while (p < s.size() && is_digit(s[p])) ++p;
  bool any_digits = p > mantissa;
  if (p < s.size() && s[p] == '.') {
    std::size_t q = p + 1;
    while (q < s.size() && is_digit(s[q])) ++q;
    if (q > p + 1 || any_digits) {
      any_digits = any_digits || q > p + 1;
      // A bare trailing '.' ("0.4.") is punctuation unless digits follow it.
      if (q > p + 1) p = q;
    }
  }
  if (!any_digits) return std::string_view::npos;
  if (p < s.size() && (s[p] == 'e' || s[p] == 'E')) {
    std::size_t q = p + 1;
    if (q < s.size() && (s[q] == '+' || s[q] == '-')) ++q;
    const std::size_t exp_digits = q;
    while (q < s.size() && is_digit(s[q])) ++q;
    if (q > exp_digits) p = q;
  }
  return p;
}

struct Candidate {
  std::array<double, 4> values;
  Span span;
};

std::optional<Candidate> find_quadruple(std::string_view s) {
  std::vector<NumberToken> run;
  bool separated = true;

  auto close_run = [&](std::size_t closer) -> std::optional<Candidate> {
    std::optional<Candidate> found;
    if (run.size() == 4) {
      Candidate c{{run[0].value, run[1].value, run[2].value, run[3].value},
                  {run[0].begin, run[3].end}};
      // Widen the span over a matching bracket pair.
      std::size_t open = run[0].begin;
      while (open > 0 && is_separator(s[open - 1])) --open;
      std::size_t close = run[3].end;
      while (close < s.size() && is_separator(s[close])) ++close;
      if (open > 0 && close < s.size() && close == closer) {
        const char o = s[open - 1];
        const char k = s[close];
        if ((o == '[' && k == ']') || (o == '(' && k == ')')) c.span = {open - 1, close + 1};
      }
      found = c;
    }
    run.clear();
    separated = true;
    return found;
  };

  std::size_t i = 0;
  while (i < s.size()) {
    const char c = s[i];
    if (is_separator(c)) {
      separated = true;
      ++i;
      continue;
    }
    const bool glued_before =
        i > 0 && (is_alpha(s[i - 1]) || is_digit(s[i - 1]) || s[i - 1] == '.');
    const std::size_t end = glued_before ? std::string_view::npos : lex_number(s, i);
    if (end != std::string_view::npos) {
      const bool glued_after =
          end < s.size() && (is_alpha(s[end]) || is_digit(s[end]) ||
                             (s[end] == '.' && end + 1 < s.size() && is_digit(s[end + 1])));
      if (!glued_after) {
        if (!run.empty() && !separated) {
          if (auto found = close_run(i)) return found;
        }
        std::string_view digits = s.substr(i, end - i);
        if (digits.front() == '+') digits.remove_prefix(1);
        run.push_back({to_double(digits), i, end});
        separated = false;
        i = end;
        continue;
      }
    }
    if (auto found = close_run(i)) return found;
    // Skip the rest of an alphanumeric word so its digits are never lexed.
    if (is_alpha(c) || is_digit(c)) {
      while (i < s.size() && (is_alpha(s[i]) || is_digit(s[i]) || s[i] == '.')) ++i;
    } else {
      ++i;
    }
  }
  return close_run(s.size());
}

}  // namespace

ExtractionOutcome parse_coordinate_text(std::string_view text, std::optional<ImageDims> dims,
                                        ClampMode mode) {
  const auto candidate = find_quadruple(text);
  if (!candidate) {
    throw Error(ErrorCode::NoQuadrupleFound, "no coordinate quadruple found in detector output");
  }
  const auto& v = candidate->values;
  try {
    const bool normalized = std::all_of(v.begin(), v.end(), [](double x) { return x <= 1.0; });
    if (normalized) {
      return {validate_coordinates(v, mode), candidate->span};
    }
    if (!dims) {
      Error e(ErrorCode::PixelValuesWithoutDims,
              fmt::format("values [{}, {}, {}, {}] look like pixels but no image dims were given",
                          v[0], v[1], v[2], v[3]));
      e.span = candidate->span;
      throw e;
    }
    auto px = v;
    if (mode == ClampMode::Clamp) {
      if (!std::all_of(px.begin(), px.end(), [](double x) { return std::isfinite(x); })) {
        throw Error(ErrorCode::NonFinite, "pixel coordinate is not finite");
      }
      px[0] = std::clamp(px[0], 0.0, static_cast<double>(dims->width));
      px[1] = std::clamp(px[1], 0.0, static_cast<double>(dims->height));
      px[2] = std::clamp(px[2], 0.0, static_cast<double>(dims->width));
      px[3] = std::clamp(px[3], 0.0, static_cast<double>(dims->height));
    }
    const PixelBox box{px[0], px[1], px[2], px[3]};
    return {normalize_box(box, *dims), candidate->span};
  } catch (Error& e) {
    if (!e.span) e.span = candidate->span;
    throw;
  }
}

std::string format_norm_box(const NormBox& b, int decimals) {
  return fmt::format("[{:.{}f},{:.{}f},{:.{}f},{:.{}f}]", b.x1(), decimals, b.y1(), decimals,
                     b.x2(), decimals, b.y2(), decimals);
}

}  // namespace coordseg
