#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "vpsim/error.hpp"

namespace vpsim::kb {

enum class Source { mendeley, columbia, other };

std::string_view to_string(Source s);
Source parse_source(std::string_view s);

struct SyndromeRecord {
  std::string syndrome_name;
  // Insertion-ordered, no duplicates.
  std::vector<std::string> symptoms;
  Source source = Source::other;

  // Adds a normalized symptom if not already present. Returns true if added.
  bool add_symptom(std::string_view normalized);

  bool operator==(const SyndromeRecord&) const = default;
};

// Maps the columns of one upstream file onto syndrome/symptom fields.
//
// Descriptor syntax, comma separated key=value pairs:
//   sep=<c|comma|tab|pipe|semicolon>   field delimiter (default comma)
//   header=<0|1>                       first line is a header (default 1)
//   syndrome=<i>                       0-based syndrome column (default 0)
//   symptoms=<i|i-j|i:j:...>           symptom columns (default 1)
//   split=<c|comma|tab|pipe|semicolon> delimiter inside a symptom cell
//   columns=<n>                        expected arity when there is no header
//   source=<mendeley|columbia|other>
struct ColumnFormat {
  char delimiter = ',';
  bool has_header = true;
  std::size_t syndrome_column = 0;
  std::vector<std::size_t> symptom_columns{1};
  std::optional<char> symptom_delimiter;
  std::optional<std::size_t> column_count;
  Source source = Source::other;

  static ColumnFormat parse(std::string_view descriptor);
};

struct RowDiagnostic {
  std::size_t row = 0;  // 1-based physical line number
  std::string message;
};

class IngestError : public Error {
 public:
  IngestError(std::string origin, std::vector<RowDiagnostic> rows);
  const std::vector<RowDiagnostic>& rows() const noexcept { return rows_; }

 private:
  std::vector<RowDiagnostic> rows_;
};

struct IngestResult {
  std::vector<SyndromeRecord> records;  // first-appearance order
  std::size_t rows = 0;                 // data rows consumed
  std::size_t symptom_cells = 0;        // non-empty symptom values before dedup
  // Distinct (syndrome, symptom) pairs within this source.
  std::size_t association_count() const;
};

// Reads every row; all row-level problems are collected and thrown together
// as one IngestError so callers can report them in a single pass.
IngestResult ingest_dataset(std::istream& in, const ColumnFormat& format,
                            std::string_view origin = "<stream>");
IngestResult ingest_file(const std::string& path, const ColumnFormat& format);

// Immutable after construction; share freely across sessions.
class KnowledgeBase {
 public:
  KnowledgeBase() = default;

  // Unions records by syndrome name. raw_pair_count is the sum of the
  // per-record symptom counts given; pair_count is what remains distinct.
  static KnowledgeBase from_records(std::span<const SyndromeRecord> records);

  const std::vector<SyndromeRecord>& records() const noexcept { return records_; }
  std::size_t raw_pair_count() const noexcept { return raw_pair_count_; }
  std::size_t pair_count() const noexcept { return pair_count_; }
  std::size_t size() const noexcept { return records_.size(); }
  bool empty() const noexcept { return records_.empty(); }

  const SyndromeRecord* find(std::string_view syndrome) const;

  // Snapshot: a header line with schema and counts, then one record per line.
  void write_snapshot(std::ostream& out) const;
  static KnowledgeBase read_snapshot(std::istream& in);
  static KnowledgeBase load(const std::string& path);
  void save(const std::string& path) const;

 private:
  std::vector<SyndromeRecord> records_;  // sorted by syndrome_name
  std::size_t raw_pair_count_ = 0;
  std::size_t pair_count_ = 0;
};

KnowledgeBase merge(std::span<const SyndromeRecord> a, std::span<const SyndromeRecord> b);

struct ScenarioSpec {
  std::string syndrome_name;
  std::vector<std::string> symptoms;
  std::uint64_t seed = 0;

  bool operator==(const ScenarioSpec&) const = default;
};

// Uniform over syndromes (not pairs), deterministic in (kb, seed).
ScenarioSpec sample_scenario(const KnowledgeBase& kb, std::uint64_t seed);

}  // namespace vpsim::kb
