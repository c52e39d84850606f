// SPDX-License-Identifier: Apache-2.0
//
// Scale-selection histograms and evaluation reports.
#pragma once

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>
#include <vector>

#include "gdres/error.hpp"
#include "gdres/network.hpp"
#include "gdres/serialize.hpp"

namespace gdres {

/// Relative contribution of each scale channel to one prediction.
///
/// Max and log-sum-exp pooling: softmax over channels of the winning
/// class's per-channel scores. Average pooling: the winning class's
/// per-channel scores divided by their sum (uniform if the sum is not
/// positive).
inline std::vector<double> channel_contributions(const Prediction& p, ScalePooling pooling) {
  const std::size_t N = p.per_channel.size();
  if (N == 0) throw InvalidArgument("channel_contributions: no channels");
  const auto k = static_cast<std::size_t>(p.label);
  std::vector<double> w(N);
  if (pooling == ScalePooling::Average) {
    double s = 0.0;
    for (std::size_t n = 0; n < N; ++n) s += std::max(0.0, p.per_channel[n][k]);
    for (std::size_t n = 0; n < N; ++n)
      w[n] = s > 0.0 ? std::max(0.0, p.per_channel[n][k]) / s : 1.0 / static_cast<double>(N);
    return w;
  }
  double m = p.per_channel[0][k];
  for (std::size_t n = 1; n < N; ++n) m = std::max(m, p.per_channel[n][k]);
  double z = 0.0;
  for (std::size_t n = 0; n < N; ++n) z += (w[n] = std::exp(p.per_channel[n][k] - m));
  for (double& v : w) v /= z;
  return w;
}

/// Rows: size factors. Columns: scale channels in ascending scale order.
class ScaleSelectionHistogram {
 public:
  ScaleSelectionHistogram(std::vector<double> factors, int channels)
      : factors_(std::move(factors)), channels_(channels),
        bins_(factors_.size(), std::vector<double>(static_cast<std::size_t>(channels), 0.0)),
        counts_(factors_.size(), 0) {
    if (channels < 1) throw InvalidArgument("histogram: need at least one channel");
  }

  void add(std::size_t factor_index, const std::vector<double>& contribution) {
    detail::require_shape(contribution.size() == static_cast<std::size_t>(channels_), "histogram: channel count");
    auto& row = bins_.at(factor_index);
    for (std::size_t n = 0; n < row.size(); ++n) row[n] += contribution[n];
    ++counts_[factor_index];
  }

  /// Row-normalised histogram; empty rows stay zero.
  std::vector<std::vector<double>> normalized() const {
    auto out = bins_;
    for (auto& row : out) {
      const double s = std::accumulate(row.begin(), row.end(), 0.0);
      if (s > 0.0)
        for (double& v : row) v /= s;
    }
    return out;
  }

  /// Contribution-weighted mean channel index per factor.
  std::vector<double> mean_channel_index() const {
    std::vector<double> out;
    for (const auto& row : normalized()) {
      double m = 0.0;
      for (std::size_t n = 0; n < row.size(); ++n) m += static_cast<double>(n) * row[n];
      out.push_back(m);
    }
    return out;
  }

  const std::vector<double>& factors() const noexcept { return factors_; }
  int channels() const noexcept { return channels_; }

 private:
  std::vector<double> factors_;
  int channels_;
  std::vector<std::vector<double>> bins_;
  std::vector<std::size_t> counts_;
};

namespace detail {

inline std::vector<double> ranks(const std::vector<double>& v) {
  std::vector<std::size_t> idx(v.size());
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  std::sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return v[a] < v[b]; });
  std::vector<double> r(v.size());
  for (std::size_t i = 0; i < idx.size();) {
    std::size_t j = i;
    while (j + 1 < idx.size() && v[idx[j + 1]] == v[idx[i]]) ++j;
    const double avg = 0.5 * static_cast<double>(i + j) + 1.0;
    for (std::size_t k = i; k <= j; ++k) r[idx[k]] = avg;
    i = j + 1;
  }
  return r;
}

inline double pearson(const std::vector<double>& a, const std::vector<double>& b) {
  const double n = static_cast<double>(a.size());
  const double ma = std::accumulate(a.begin(), a.end(), 0.0) / n;
  const double mb = std::accumulate(b.begin(), b.end(), 0.0) / n;
  double sab = 0.0, saa = 0.0, sbb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    sab += (a[i] - ma) * (b[i] - mb);
    saa += (a[i] - ma) * (a[i] - ma);
    sbb += (b[i] - mb) * (b[i] - mb);
  }
  return saa > 0.0 && sbb > 0.0 ? sab / std::sqrt(saa * sbb) : 0.0;
}

}  // namespace detail

/// Spearman rank correlation with average ranks for ties.
inline double spearman(const std::vector<double>& a, const std::vector<double>& b) {
  detail::require_shape(a.size() == b.size() && a.size() >= 2, "spearman: need two equal-length series");
  return detail::pearson(detail::ranks(a), detail::ranks(b));
}

struct FactorResult {
  double factor = 1.0;
  double accuracy = 0.0;
  std::vector<double> histogram_row;
  double mean_channel = 0.0;
};

struct ExperimentReport {
  std::vector<FactorResult> factors;
  Json config;
  std::uint64_t seed = 0;
  double runtime_seconds = 0.0;

  Json to_json() const {
    Json j{{"schema", "gdres.eval.v1"}, {"config", config}, {"seed", seed}, {"runtime_seconds", runtime_seconds}};
    j["factors"] = Json::array();
    for (const auto& f : factors)
      j["factors"].push_back({{"factor", f.factor},
                              {"accuracy", f.accuracy},
                              {"histogram", f.histogram_row},
                              {"mean_channel_index", f.mean_channel}});
    return j;
  }

  std::string accuracy_csv() const {
    std::string s = "factor,accuracy,mean_channel_index\n";
    char buf[128];
    for (const auto& f : factors) {
      std::snprintf(buf, sizeof buf, "%.17g,%.17g,%.17g\n", f.factor, f.accuracy, f.mean_channel);
      s += buf;
    }
    return s;
  }

  std::string histogram_csv() const {
    std::string s = "factor";
    const std::size_t N = factors.empty() ? 0 : factors.front().histogram_row.size();
    for (std::size_t n = 0; n < N; ++n) s += ",channel_" + std::to_string(n);
    s += "\n";
    char buf[64];
    for (const auto& f : factors) {
      std::snprintf(buf, sizeof buf, "%.17g", f.factor);
      s += buf;
      for (double v : f.histogram_row) {
        std::snprintf(buf, sizeof buf, ",%.17g", v);
        s += buf;
      }
      s += "\n";
    }
    return s;
  }
};

/// Accuracy and scale-selection histogram over rescaled test sets.
template <typename SetList, typename PredictFn>
ExperimentReport evaluate_factors(const SetList& sets, ScalePooling pooling, int channels, PredictFn&& predict) {
  ExperimentReport rep;
  std::vector<double> fs;
  for (const auto& s : sets) fs.push_back(s.factor);
  ScaleSelectionHistogram hist(fs, channels);
  for (std::size_t i = 0; i < sets.size(); ++i) {
    const auto preds = predict(sets[i].set.images);
    std::size_t ok = 0;
    for (std::size_t j = 0; j < preds.size(); ++j) {
      ok += preds[j].label == sets[i].set.labels[j] ? 1 : 0;
      hist.add(i, channel_contributions(preds[j], pooling));
    }
    FactorResult fr;
    fr.factor = sets[i].factor;
    fr.accuracy = preds.empty() ? 0.0 : static_cast<double>(ok) / static_cast<double>(preds.size());
    rep.factors.push_back(fr);
  }
  const auto rows = hist.normalized();
  const auto means = hist.mean_channel_index();
  for (std::size_t i = 0; i < rep.factors.size(); ++i) {
    rep.factors[i].histogram_row = rows[i];
    rep.factors[i].mean_channel = means[i];
  }
  return rep;
}

}  // namespace gdres
