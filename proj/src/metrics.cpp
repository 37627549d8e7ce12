#include "vpsim/metrics.hpp"

#include <cmath>

#include "vpsim/error.hpp"

namespace vpsim::sentiment {

namespace {

std::size_t idx(SentimentLabel l) { return static_cast<std::size_t>(l); }

void check_pair(std::size_t a, std::size_t b) {
  if (a != b) {
    throw Error(ErrorCode::invalid_argument,
                "label sequences differ in length (" + std::to_string(a) + " vs " + std::to_string(b) + ")");
  }
  if (a == 0) throw Error(ErrorCode::invalid_argument, "label sequences are empty");
}

}  // namespace

std::size_t ConfusionMatrix::support(SentimentLabel gold) const {
  std::size_t n = 0;
  for (auto c : counts[idx(gold)]) n += c;
  return n;
}

std::size_t ConfusionMatrix::predicted(SentimentLabel pred) const {
  std::size_t n = 0;
  for (const auto& row : counts) n += row[idx(pred)];
  return n;
}

std::size_t ConfusionMatrix::total() const {
  std::size_t n = 0;
  for (const auto& row : counts)
    for (auto c : row) n += c;
  return n;
}

ConfusionMatrix ConfusionMatrix::build(std::span<const SentimentLabel> golds, std::span<const SentimentLabel> preds) {
  check_pair(golds.size(), preds.size());
  ConfusionMatrix m;
  for (std::size_t i = 0; i < golds.size(); ++i) ++m.counts[idx(golds[i])][idx(preds[i])];
  return m;
}

MetricsReport evaluate(std::span<const SentimentLabel> golds, std::span<const SentimentLabel> preds) {
  MetricsReport r;
  r.confusion = ConfusionMatrix::build(golds, preds);
  const auto& cm = r.confusion;
  const double n = static_cast<double>(cm.total());
  r.n = cm.total();

  std::size_t correct = 0;
  for (std::size_t c = 0; c < kLabelCount; ++c) correct += cm.counts[c][c];
  r.accuracy = static_cast<double>(correct) / n;

  for (std::size_t c = 0; c < kLabelCount; ++c) {
    const auto label = static_cast<SentimentLabel>(c);
    const double support = static_cast<double>(cm.support(label));
    if (support == 0) continue;
    const double tp = static_cast<double>(cm.counts[c][c]);
    const double predicted = static_cast<double>(cm.predicted(label));
    const double precision = predicted > 0 ? tp / predicted : 0.0;
    const double recall = tp / support;
    const double f1 = precision + recall > 0 ? 2 * precision * recall / (precision + recall) : 0.0;
    const double w = support / n;
    r.precision += w * precision;
    r.recall += w * recall;
    r.f1 += w * f1;
  }
  return r;
}

double ClassDistribution::operator[](SentimentLabel l) const {
  switch (l) {
    case SentimentLabel::negative: return p_negative;
    case SentimentLabel::neutral: return p_neutral;
    case SentimentLabel::positive: return p_positive;
  }
  return 0;
}

bool ClassDistribution::valid(double tolerance) const {
  for (double p : {p_negative, p_neutral, p_positive}) {
    if (!(p >= 0.0 && p <= 1.0)) return false;
  }
  return std::fabs(p_negative + p_neutral + p_positive - 1.0) <= tolerance;
}

ClassDistribution make_distribution(double neg, double neu, double pos, double tolerance) {
  ClassDistribution d;
  d.p_negative = neg;
  d.p_neutral = neu;
  d.p_positive = pos;
  d.tolerance_ = tolerance;
  if (!d.valid(tolerance)) {
    throw Error(ErrorCode::invalid_argument, "class distribution components must lie in [0,1] and sum to 1");
  }
  return d;
}

ClassDistribution ClassDistribution::from_rounded(double neg, double neu, double pos, int decimals) {
  // Each component may be off by half a unit in the last place.
  const double half_ulp = 0.5 * std::pow(10.0, -decimals);
  return make_distribution(neg, neu, pos, 3 * half_ulp + 1e-12);
}

ClassDistribution class_distribution(std::span<const SentimentLabel> preds) {
  if (preds.empty()) throw Error(ErrorCode::invalid_argument, "no predictions");
  std::array<std::size_t, kLabelCount> counts{};
  for (auto l : preds) ++counts[idx(l)];
  const double n = static_cast<double>(preds.size());
  return make_distribution(counts[0] / n, counts[1] / n, counts[2] / n);
}

double entropy(const ClassDistribution& dist) {
  if (!dist.valid(dist.tolerance())) {
    throw Error(ErrorCode::invalid_argument, "invalid class distribution");
  }
  double h = 0;
  for (double p : {dist.p_negative, dist.p_neutral, dist.p_positive}) {
    if (p > 0) h -= p * std::log2(p);
  }
  return h;
}

Kappa cohen_kappa(std::span<const SentimentLabel> a, std::span<const SentimentLabel> b) {
  check_pair(a.size(), b.size());
  const double n = static_cast<double>(a.size());
  std::array<double, kLabelCount> ma{}, mb{};
  double agree = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    ma[idx(a[i])] += 1;
    mb[idx(b[i])] += 1;
    if (a[i] == b[i]) agree += 1;
  }
  Kappa k;
  k.observed = agree / n;
  for (std::size_t c = 0; c < kLabelCount; ++c) k.expected += (ma[c] / n) * (mb[c] / n);
  // p_e reaches 1 only when both raters used one identical label.
  if (k.expected >= 1.0 - 1e-12) return k;
  k.value = (k.observed - k.expected) / (1.0 - k.expected);
  return k;
}

}  // namespace vpsim::sentiment
