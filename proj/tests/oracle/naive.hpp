#pragma once

// Straight-from-definition recomputations used as test oracles. Deliberately share no code with the
// library beyond its plain data types.

#include <array>
#include <cmath>
#include <optional>
#include <vector>

#include "genderpair/parser.hpp"
#include "genderpair/scorer.hpp"

namespace oracle {

struct NaiveGroup {
  std::optional<double> bpr;
  std::optional<double> toxicity;
  std::optional<double> positive;
  std::optional<double> negative;
  std::optional<double> neutral;
  std::optional<double> other;
};

inline int gnum(genderpair::GroupId g) { return static_cast<int>(g); }

// BPR = biased / (biased + anti-biased) over selections of one group.
inline std::optional<double> naive_bpr(const std::vector<genderpair::ParsedSelection>& sel, int group) {
  long biased = 0;
  long anti = 0;
  for (const auto& s : sel) {
    if (gnum(s.group) != group || s.response_failed) continue;
    if (s.verdict == genderpair::Verdict::Biased) biased += 1;
    if (s.verdict == genderpair::Verdict::AntiBiased) anti += 1;
  }
  if (biased + anti == 0) return std::nullopt;
  return double(biased) / double(biased + anti);
}

inline NaiveGroup naive_group(const std::vector<genderpair::ParsedSelection>& sel,
                              const std::vector<genderpair::ScoreRecord>& scores, int group) {
  NaiveGroup out;
  out.bpr = naive_bpr(sel, group);
  double t = 0, p = 0, n = 0, u = 0, o = 0;
  long k = 0;
  for (const auto& r : scores) {
    if (gnum(r.group) != group || !r.score) continue;
    t += r.score->toxicity;
    p += r.score->regard.positive;
    n += r.score->regard.negative;
    u += r.score->regard.neutral;
    o += r.score->regard.other;
    k += 1;
  }
  if (k > 0) {
    out.toxicity = t / k;
    out.positive = p / k;
    out.negative = n / k;
    out.neutral = u / k;
    out.other = o / k;
  }
  return out;
}

// Population standard deviation via E[x^2] - E[x]^2.
inline double naive_sigma(double a, double b, double c) {
  double m = (a + b + c) / 3.0;
  double m2 = (a * a + b * b + c * c) / 3.0;
  double v = m2 - m * m;
  return v <= 0.0 ? 0.0 : std::sqrt(v);
}

// Proportional pair normalization: Δ = (p_more - p_less) / (p_more + p_less).
inline double naive_stereo_delta(double ppl_more, double ppl_less) { return (ppl_more - ppl_less) / (ppl_more + ppl_less); }

// Half away from zero.
inline double naive_round2(double x) {
  double s = x < 0 ? -1.0 : 1.0;
  double a = std::fabs(x) * 100.0;
  double fl = std::floor(a);
  double r = (a - fl >= 0.5) ? fl + 1.0 : fl;
  return s * r / 100.0;
}

}  // namespace oracle
