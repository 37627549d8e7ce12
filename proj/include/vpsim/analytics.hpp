#pragma once

#include <cstddef>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "vpsim/metrics.hpp"
#include "vpsim/pipeline.hpp"
#include "vpsim/session_log.hpp"

namespace vpsim::analytics {

using sentiment::ClassDistribution;
using sentiment::Kappa;
using sentiment::SentimentLabel;

struct LikertVector {
  std::string item_label;
  std::vector<int> values;

  // Non-empty and every value in 1..5.
  void validate() const;
};

struct DescriptiveStats {
  std::size_t count = 0;
  double mean = 0;
  double median = 0;
  double std_dev = 0;  // n-1 denominator; 0 for a single value
};

DescriptiveStats descriptive_stats(const LikertVector& v);

enum class Alternative { greater, less, two_sided };
std::string_view to_string(Alternative a);
Alternative parse_alternative(std::string_view s);

inline constexpr std::size_t kExactWilcoxonLimit = 20;

struct WilcoxonOptions {
  double mu0 = 3.0;
  Alternative alternative = Alternative::greater;
  // Used for the normal approximation and for Z behind the effect size.
  bool continuity_correction = true;
};

struct WilcoxonResult {
  double w = 0;   // sum of ranks of positive differences
  double p = 1;
  double z = 0;
  double r = 0;   // z / sqrt(n_used)
  std::size_t n_used = 0;
  bool exact = false;
  Alternative alternative = Alternative::greater;
};

// One-sample signed-rank test against mu0. Zero differences are dropped and
// tied |d| get average ranks. Exact distribution over the realized ranks for
// n_used <= 20, normal approximation (tie-corrected variance) above.
// Throws Error(invalid_argument) when every difference is zero.
WilcoxonResult wilcoxon_signed_rank(std::span<const double> values, const WilcoxonOptions& opts = {});
WilcoxonResult wilcoxon_signed_rank(const LikertVector& v, const WilcoxonOptions& opts = {});

using PredictionsByModel = std::map<std::string, std::vector<SentimentLabel>>;

struct AgreementMatrix {
  std::vector<std::string> model_ids;  // sorted
  std::vector<std::vector<Kappa>> kappa;
};

AgreementMatrix agreement_matrix(const PredictionsByModel& preds);

struct EntropyRow {
  std::string model_id;
  ClassDistribution distribution;
  double entropy_bits = 0;
};

std::vector<EntropyRow> entropy_table(const PredictionsByModel& preds);

struct TimelineEntry {
  std::uint64_t turn_id = 0;
  std::optional<SentimentLabel> label;
};

struct Debrief {
  std::string syndrome_name;
  std::vector<std::string> symptoms;
  scenario::PersonaProfile persona;
};

struct SessionReport {
  std::string session_id;
  std::vector<TimelineEntry> timeline;  // one per ok turn
  std::optional<ClassDistribution> distribution;  // over labeled ok turns
  std::optional<double> entropy_bits;
  std::optional<pipeline::LatencyReport> latency;
  Debrief debrief;
  std::size_t turn_count = 0;  // ok turns
  std::size_t failed_turns = 0;
};

// Throws Error(session_active) for an open session and
// Error(invalid_argument) when no turn succeeded.
SessionReport session_report(const service::SessionRecord& log,
                             double budget_s = pipeline::kDefaultLatencyBudgetS);

}  // namespace vpsim::analytics
