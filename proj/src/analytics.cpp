#include "vpsim/analytics.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "vpsim/error.hpp"
#include "vpsim/text.hpp"

namespace vpsim::analytics {

void LikertVector::validate() const {
  if (values.empty()) throw Error(ErrorCode::invalid_argument, "Likert item '" + item_label + "' has no values");
  for (int v : values) {
    if (v < 1 || v > 5) {
      throw Error(ErrorCode::invalid_argument,
                  "Likert item '" + item_label + "' has out-of-range value " + std::to_string(v));
    }
  }
}

DescriptiveStats descriptive_stats(const LikertVector& v) {
  v.validate();
  DescriptiveStats s;
  s.count = v.values.size();
  const double n = static_cast<double>(s.count);
  s.mean = std::accumulate(v.values.begin(), v.values.end(), 0.0) / n;

  std::vector<int> sorted = v.values;
  std::sort(sorted.begin(), sorted.end());
  const auto mid = sorted.size() / 2;
  s.median = sorted.size() % 2 ? sorted[mid] : 0.5 * (sorted[mid - 1] + sorted[mid]);

  if (s.count > 1) {
    double ss = 0;
    for (int x : v.values) ss += (x - s.mean) * (x - s.mean);
    s.std_dev = std::sqrt(ss / (n - 1));
  }
  return s;
}

std::string_view to_string(Alternative a) {
  switch (a) {
    case Alternative::greater: return "greater";
    case Alternative::less: return "less";
    case Alternative::two_sided: return "two-sided";
  }
  return "greater";
}

Alternative parse_alternative(std::string_view s) {
  const auto v = text::normalize(s);
  if (v == "greater") return Alternative::greater;
  if (v == "less") return Alternative::less;
  if (v == "two-sided" || v == "two_sided" || v == "two sided") return Alternative::two_sided;
  throw Error(ErrorCode::invalid_argument, "unknown alternative '" + std::string(s) + "'");
}

namespace {

double normal_upper(double z) { return 0.5 * std::erfc(z / std::sqrt(2.0)); }

}  // namespace

WilcoxonResult wilcoxon_signed_rank(std::span<const double> values, const WilcoxonOptions& opts) {
  struct Diff {
    double abs;
    bool positive;
    double rank = 0;
  };
  std::vector<Diff> diffs;
  for (double v : values) {
    const double d = v - opts.mu0;
    if (std::fabs(d) < 1e-12) continue;
    diffs.push_back({std::fabs(d), d > 0});
  }
  if (diffs.empty()) {
    throw Error(ErrorCode::invalid_argument, "every value equals mu0; the test is undefined");
  }
  std::sort(diffs.begin(), diffs.end(), [](const Diff& a, const Diff& b) { return a.abs < b.abs; });

  // Average ranks over ties; remember tie group sizes for the variance.
  std::vector<std::size_t> tie_sizes;
  for (std::size_t i = 0; i < diffs.size();) {
    std::size_t j = i;
    while (j + 1 < diffs.size() && std::fabs(diffs[j + 1].abs - diffs[i].abs) < 1e-12) ++j;
    const double avg = 0.5 * static_cast<double>(i + 1 + j + 1);
    for (std::size_t k = i; k <= j; ++k) diffs[k].rank = avg;
    tie_sizes.push_back(j - i + 1);
    i = j + 1;
  }

  WilcoxonResult r;
  r.alternative = opts.alternative;
  r.n_used = diffs.size();
  for (const auto& d : diffs) {
    if (d.positive) r.w += d.rank;
  }

  const double n = static_cast<double>(r.n_used);
  const double mean = n * (n + 1) / 4.0;
  double var = n * (n + 1) * (2 * n + 1) / 24.0;
  for (auto t : tie_sizes) {
    const double td = static_cast<double>(t);
    var -= (td * td * td - td) / 48.0;
  }
  const double sd = std::sqrt(var);
  const double cc = opts.continuity_correction ? 0.5 : 0.0;
  const double dev = r.w - mean;
  if (sd > 0) {
    const double mag = std::max(0.0, std::fabs(dev) - cc);
    r.z = (dev < 0 ? -mag : mag) / sd;
  }
  r.r = r.z / std::sqrt(n);

  if (r.n_used <= kExactWilcoxonLimit) {
    // Ranks are multiples of 1/2, so doubled ranks are integers and the
    // null distribution over all 2^n sign patterns is a subset-sum count.
    std::vector<std::uint64_t> counts{1};
    for (const auto& d : diffs) {
      const auto step = static_cast<std::size_t>(std::llround(2 * d.rank));
      std::vector<std::uint64_t> next(counts.size() + step, 0);
      for (std::size_t s = 0; s < counts.size(); ++s) {
        next[s] += counts[s];
        next[s + step] += counts[s];
      }
      counts = std::move(next);
    }
    const auto w2 = static_cast<std::size_t>(std::llround(2 * r.w));
    const double total = std::ldexp(1.0, static_cast<int>(r.n_used));
    std::uint64_t ge = 0, le = 0;
    for (std::size_t s = 0; s < counts.size(); ++s) {
      if (s >= w2) ge += counts[s];
      if (s <= w2) le += counts[s];
    }
    const double p_ge = static_cast<double>(ge) / total;
    const double p_le = static_cast<double>(le) / total;
    switch (opts.alternative) {
      case Alternative::greater: r.p = p_ge; break;
      case Alternative::less: r.p = p_le; break;
      case Alternative::two_sided: r.p = std::min(1.0, 2 * std::min(p_ge, p_le)); break;
    }
    r.exact = true;
  } else {
    switch (opts.alternative) {
      case Alternative::greater: r.p = sd > 0 ? normal_upper((dev - cc) / sd) : 1.0; break;
      case Alternative::less: r.p = sd > 0 ? 1.0 - normal_upper((dev + cc) / sd) : 1.0; break;
      case Alternative::two_sided:
        r.p = sd > 0 ? std::min(1.0, 2 * normal_upper(std::max(0.0, std::fabs(dev) - cc) / sd)) : 1.0;
        break;
    }
    r.exact = false;
  }
  r.p = std::clamp(r.p, 0.0, 1.0);
  return r;
}

WilcoxonResult wilcoxon_signed_rank(const LikertVector& v, const WilcoxonOptions& opts) {
  v.validate();
  std::vector<double> xs(v.values.begin(), v.values.end());
  return wilcoxon_signed_rank(xs, opts);
}

namespace {

void check_models(const PredictionsByModel& preds, bool same_length) {
  if (preds.empty()) throw Error(ErrorCode::invalid_argument, "no models given");
  const auto n = preds.begin()->second.size();
  for (const auto& [id, labels] : preds) {
    if (labels.empty()) throw Error(ErrorCode::invalid_argument, "model '" + id + "' has no predictions");
    if (same_length && labels.size() != n) {
      throw Error(ErrorCode::invalid_argument, "model '" + id + "' has " + std::to_string(labels.size()) +
                                                   " predictions, expected " + std::to_string(n));
    }
  }
}

}  // namespace

AgreementMatrix agreement_matrix(const PredictionsByModel& preds) {
  check_models(preds, true);
  AgreementMatrix m;
  for (const auto& [id, _] : preds) m.model_ids.push_back(id);
  const auto k = m.model_ids.size();
  m.kappa.assign(k, std::vector<Kappa>(k));
  std::size_t i = 0;
  for (auto a = preds.begin(); a != preds.end(); ++a, ++i) {
    std::size_t j = i;
    for (auto b = a; b != preds.end(); ++b, ++j) {
      m.kappa[i][j] = sentiment::cohen_kappa(a->second, b->second);
      m.kappa[j][i] = m.kappa[i][j];
    }
  }
  return m;
}

std::vector<EntropyRow> entropy_table(const PredictionsByModel& preds) {
  check_models(preds, false);
  std::vector<EntropyRow> rows;
  for (const auto& [id, labels] : preds) {
    auto dist = sentiment::class_distribution(labels);
    rows.push_back({id, dist, sentiment::entropy(dist)});
  }
  return rows;
}

SessionReport session_report(const service::SessionRecord& log, double budget_s) {
  if (log.status != service::SessionStatus::closed) {
    throw Error(ErrorCode::session_active, "report requires a closed session");
  }
  SessionReport r;
  r.session_id = log.session_id;
  std::vector<SentimentLabel> labels;
  for (const auto& t : log.turns) {
    if (!t.ok()) {
      ++r.failed_turns;
      continue;
    }
    r.timeline.push_back({t.turn_id, t.doctor_sentiment});
    if (t.doctor_sentiment) labels.push_back(*t.doctor_sentiment);
  }
  if (r.timeline.empty()) throw Error(ErrorCode::invalid_argument, "session has no completed turns");
  r.turn_count = r.timeline.size();
  if (!labels.empty()) {
    r.distribution = sentiment::class_distribution(labels);
    r.entropy_bits = sentiment::entropy(*r.distribution);
  }
  r.latency = pipeline::latency_report(log.turns, budget_s);
  r.debrief = Debrief{log.scenario.syndrome_name, log.scenario.symptoms, log.persona};
  return r;
}

}  // namespace vpsim::analytics
