#pragma once

#include <array>
#include <cstddef>
#include <optional>
#include <span>
#include <string>

#include "vpsim/sentiment.hpp"

namespace vpsim::sentiment {

// Rows are gold labels, columns predictions, both in label order.
struct ConfusionMatrix {
  std::array<std::array<std::size_t, kLabelCount>, kLabelCount> counts{};

  std::size_t support(SentimentLabel gold) const;
  std::size_t predicted(SentimentLabel pred) const;
  std::size_t total() const;

  static ConfusionMatrix build(std::span<const SentimentLabel> golds,
                               std::span<const SentimentLabel> preds);
};

// Support-weighted averages over classes. A class that is never predicted
// contributes zero precision.
struct MetricsReport {
  double accuracy = 0;
  double precision = 0;
  double recall = 0;
  double f1 = 0;
  std::size_t n = 0;
  std::string averaging = "weighted";
  ConfusionMatrix confusion;
};

MetricsReport evaluate(std::span<const SentimentLabel> golds, std::span<const SentimentLabel> preds);

struct ClassDistribution {
  double p_negative = 0;
  double p_neutral = 0;
  double p_positive = 0;

  double operator[](SentimentLabel l) const;

  // Each component in [0,1] and the sum within tolerance of 1.
  bool valid(double tolerance = 1e-9) const;

  // Builds a distribution from rounded published proportions; the sum may
  // be off by up to 3 * half a unit in the last place.
  static ClassDistribution from_rounded(double neg, double neu, double pos, int decimals);
  double tolerance() const noexcept { return tolerance_; }

 private:
  double tolerance_ = 1e-9;
  friend ClassDistribution make_distribution(double, double, double, double);
};

ClassDistribution make_distribution(double neg, double neu, double pos, double tolerance = 1e-9);

ClassDistribution class_distribution(std::span<const SentimentLabel> preds);

// Shannon entropy in bits, 0*log(0) taken as 0. Throws Error(invalid_argument)
// when the distribution is outside its own tolerance.
double entropy(const ClassDistribution& dist);

// Cohen's kappa. Undefined (nullopt) when chance agreement is 1, i.e. both
// raters used one and the same label throughout.
struct Kappa {
  std::optional<double> value;
  double observed = 0;
  double expected = 0;

  bool defined() const { return value.has_value(); }
};

Kappa cohen_kappa(std::span<const SentimentLabel> a, std::span<const SentimentLabel> b);

}  // namespace vpsim::sentiment
