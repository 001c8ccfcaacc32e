#pragma once
// Scoring and behavioral analytics over TrialRecords.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <map>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include <boost/math/distributions/students_t.hpp>

#include "adp/map_model.hpp"
#include "adp/trial_record.hpp"

namespace adp {

struct ScoreResult {
  double sigma = 0.0;
  int lambda_min = 0;
  int lambda_pp = 0;
  bool success = false;
};

// sigma = 0 on failure, lambda_min / lambda_pp on success.
inline ScoreResult score_from(int lambda_min, int lambda_pp, bool success) {
  if (success && lambda_pp <= 0) throw RecordError("inconsistent record: success with no successful moves");
  if (success && lambda_pp < lambda_min) throw RecordError("inconsistent record: path shorter than the optimum");
  ScoreResult s{0.0, lambda_min, lambda_pp, success};
  if (success) s.sigma = static_cast<double>(lambda_min) / lambda_pp;
  return s;
}

inline ScoreResult trial_score(const TrialRecord& record, const PathSolution& optimum) {
  if (!optimum.reachable()) throw std::invalid_argument("trial_score: map has no reachable goal");
  return score_from(*optimum.hop_count, record.path_length, record.success());
}

inline ScoreResult trial_score(const TrialRecord& record, const MapSpec& map) {
  return trial_score(record, min_path(map));
}

struct AttentionDistance {
  std::vector<double> distances;
  std::optional<double> mean;  // empty for an empty stream
};

inline AttentionDistance attention_distance(std::span<const AttentionSample> stream) {
  AttentionDistance out;
  out.distances.reserve(stream.size());
  double sum = 0.0;
  for (const AttentionSample& s : stream) {
    out.distances.push_back(norm(s.position));
    sum += out.distances.back();
  }
  if (!stream.empty()) out.mean = sum / static_cast<double>(stream.size());
  return out;
}

struct ReachSegments {
  std::vector<AttentionSample> within;  // distance <= reach radius
  std::vector<AttentionSample> beyond;
};

inline ReachSegments segment_reachable(std::span<const AttentionSample> stream, double reach_radius) {
  ReachSegments seg;
  for (const AttentionSample& s : stream) (norm(s.position) <= reach_radius ? seg.within : seg.beyond).push_back(s);
  return seg;
}

/// Per-bin maximum attention distance, with samples binned by t / duration.
/// Bins without samples are empty optionals. A sample at t == duration falls
/// in the last bin.
inline std::vector<std::optional<double>> binned_max_attention(std::span<const AttentionSample> stream, int n_bins,
                                                               double duration) {
  if (n_bins < 1) throw std::invalid_argument("binned_max_attention: n_bins must be >= 1");
  std::vector<std::optional<double>> bins(static_cast<std::size_t>(n_bins));
  if (stream.empty()) return bins;
  if (!(duration > 0.0)) duration = stream.back().t;
  for (const AttentionSample& s : stream) {
    int b = duration > 0.0 ? static_cast<int>(std::floor(s.t / duration * n_bins)) : 0;
    b = std::clamp(b, 0, n_bins - 1);
    const double d = norm(s.position);
    auto& slot = bins[static_cast<std::size_t>(b)];
    if (!slot || d > *slot) slot = d;
  }
  return bins;
}

inline std::vector<std::optional<double>> binned_max_attention(const TrialRecord& r, int n_bins) {
  return binned_max_attention(r.attention, n_bins, r.duration);
}

// Time of the first successful move; the full duration when there is none.
inline double delay_to_first_move(const TrialRecord& r) {
  for (const NavigationAttempt& a : r.navigation)
    if (a.success) return a.t;
  return r.duration;
}

enum class Difficulty { kLow, kMedium, kHigh };

inline const char* to_string(Difficulty d) {
  switch (d) {
    case Difficulty::kLow: return "low";
    case Difficulty::kMedium: return "medium";
    case Difficulty::kHigh: return "high";
  }
  return "?";
}

/// Splits maps into thirds by descending success rate (ties by map id);
/// remainders go to the easier groups, so 11 maps split 4/4/3.
inline std::map<std::string, Difficulty> difficulty_terciles(const std::map<std::string, double>& success_rates) {
  if (success_rates.size() < 3) throw std::invalid_argument("difficulty_terciles: need at least 3 maps");
  std::vector<std::pair<std::string, double>> order(success_rates.begin(), success_rates.end());
  std::stable_sort(order.begin(), order.end(), [](const auto& a, const auto& b) {
    if (a.second != b.second) return a.second > b.second;
    return a.first < b.first;
  });
  const std::size_t n = order.size();
  const std::size_t base = n / 3;
  const std::size_t rem = n % 3;
  const std::size_t low = base + (rem > 0 ? 1 : 0);
  const std::size_t medium = base + (rem > 1 ? 1 : 0);
  std::map<std::string, Difficulty> out;
  for (std::size_t i = 0; i < n; ++i)
    out[order[i].first] = i < low ? Difficulty::kLow : (i < low + medium ? Difficulty::kMedium : Difficulty::kHigh);
  return out;
}

struct Correlation {
  double r = 0.0;
  double p = 1.0;  // two-sided
  std::size_t n = 0;
};

/// Pearson correlation with a two-sided p-value from the t distribution.
/// Returns nullopt when either series has zero variance.
inline std::optional<Correlation> correlate(std::span<const double> xs, std::span<const double> ys) {
  if (xs.size() != ys.size()) throw std::invalid_argument("correlate: series lengths differ");
  if (xs.size() < 3) throw std::invalid_argument("correlate: need at least 3 points");
  const double n = static_cast<double>(xs.size());
  double mx = 0.0, my = 0.0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    mx += xs[i];
    my += ys[i];
  }
  mx /= n;
  my /= n;
  double sxy = 0.0, sxx = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    const double dx = xs[i] - mx;
    const double dy = ys[i] - my;
    sxy += dx * dy;
    sxx += dx * dx;
    syy += dy * dy;
  }
  if (sxx == 0.0 || syy == 0.0) return std::nullopt;
  Correlation c;
  c.n = xs.size();
  c.r = std::clamp(sxy / std::sqrt(sxx * syy), -1.0, 1.0);
  const double df = n - 2.0;
  if (std::abs(c.r) >= 1.0) {
    c.p = 0.0;
  } else {
    const double t = c.r * std::sqrt(df / (1.0 - c.r * c.r));
    boost::math::students_t dist(df);
    c.p = 2.0 * boost::math::cdf(boost::math::complement(dist, std::abs(t)));
  }
  return c;
}

}  // namespace adp
