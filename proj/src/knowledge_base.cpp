#include "vpsim/knowledge_base.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <istream>
#include <map>
#include <ostream>
#include <sstream>

#include "vpsim/random.hpp"
#include "vpsim/serialization.hpp"
#include "vpsim/text.hpp"

namespace vpsim::kb {

namespace {

constexpr std::string_view kSnapshotSchema = "vpsim.kb.v1";

std::size_t parse_index(std::string_view v, std::string_view key) {
  std::size_t out = 0;
  auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc{} || ptr != v.data() + v.size()) {
    throw Error(ErrorCode::parse_error,
                "format: " + std::string(key) + " expects a column number, got '" + std::string(v) + "'");
  }
  return out;
}

char parse_delimiter(std::string_view v, std::string_view key) {
  if (v == "comma") return ',';
  if (v == "tab" || v == "\\t") return '\t';
  if (v == "pipe") return '|';
  if (v == "semicolon") return ';';
  if (v == "space") return ' ';
  if (v.size() == 1) return v.front();
  throw Error(ErrorCode::parse_error, "format: bad delimiter for " + std::string(key) + ": '" +
                                          std::string(v) + "'");
}

}  // namespace

std::string_view to_string(Source s) {
  switch (s) {
    case Source::mendeley: return "mendeley";
    case Source::columbia: return "columbia";
    case Source::other: return "other";
  }
  return "other";
}

Source parse_source(std::string_view s) {
  const auto v = text::normalize(s);
  if (v == "mendeley") return Source::mendeley;
  if (v == "columbia") return Source::columbia;
  if (v == "other") return Source::other;
  throw Error(ErrorCode::parse_error, "unknown source '" + std::string(s) + "'");
}

bool SyndromeRecord::add_symptom(std::string_view normalized) {
  if (std::find(symptoms.begin(), symptoms.end(), normalized) != symptoms.end()) return false;
  symptoms.emplace_back(normalized);
  return true;
}

ColumnFormat ColumnFormat::parse(std::string_view descriptor) {
  ColumnFormat f;
  for (const auto& raw : text::split(descriptor, ',')) {
    auto item = text::trim(raw);
    if (item.empty()) continue;
    auto eq = item.find('=');
    if (eq == std::string_view::npos) {
      throw Error(ErrorCode::parse_error, "format: expected key=value, got '" + std::string(item) + "'");
    }
    auto key = text::trim(item.substr(0, eq));
    auto value = text::trim(item.substr(eq + 1));
    if (key == "sep") {
      f.delimiter = parse_delimiter(value, key);
    } else if (key == "header") {
      if (value != "0" && value != "1") throw Error(ErrorCode::parse_error, "format: header must be 0 or 1");
      f.has_header = value == "1";
    } else if (key == "syndrome") {
      f.syndrome_column = parse_index(value, key);
    } else if (key == "symptoms") {
      f.symptom_columns.clear();
      for (const auto& part : text::split(value, ':')) {
        auto dash = part.find('-');
        if (dash == std::string::npos) {
          f.symptom_columns.push_back(parse_index(part, key));
        } else {
          auto lo = parse_index(std::string_view(part).substr(0, dash), key);
          auto hi = parse_index(std::string_view(part).substr(dash + 1), key);
          if (hi < lo) throw Error(ErrorCode::parse_error, "format: empty symptom column range");
          for (auto i = lo; i <= hi; ++i) f.symptom_columns.push_back(i);
        }
      }
    } else if (key == "split") {
      f.symptom_delimiter = parse_delimiter(value, key);
    } else if (key == "columns") {
      f.column_count = parse_index(value, key);
    } else if (key == "source") {
      f.source = parse_source(value);
    } else {
      throw Error(ErrorCode::parse_error, "format: unknown key '" + std::string(key) + "'");
    }
  }
  if (f.symptom_columns.empty()) {
    throw Error(ErrorCode::parse_error, "format: no symptom columns");
  }
  if (std::find(f.symptom_columns.begin(), f.symptom_columns.end(), f.syndrome_column) !=
      f.symptom_columns.end()) {
    throw Error(ErrorCode::parse_error, "format: syndrome column is also a symptom column");
  }
  return f;
}

namespace {

std::string describe_rows(const std::string& origin, const std::vector<RowDiagnostic>& rows) {
  std::ostringstream ss;
  ss << origin << ": " << rows.size() << " malformed row" << (rows.size() == 1 ? "" : "s");
  for (const auto& r : rows) ss << "\n  row " << r.row << ": " << r.message;
  return ss.str();
}

}  // namespace

IngestError::IngestError(std::string origin, std::vector<RowDiagnostic> rows)
    : Error(ErrorCode::parse_error, describe_rows(origin, rows)), rows_(std::move(rows)) {}

std::size_t IngestResult::association_count() const {
  std::size_t n = 0;
  for (const auto& r : records) n += r.symptoms.size();
  return n;
}

IngestResult ingest_dataset(std::istream& in, const ColumnFormat& format, std::string_view origin) {
  IngestResult result;
  std::vector<RowDiagnostic> errors;
  std::map<std::string, std::size_t, std::less<>> index;

  const std::size_t min_arity =
      std::max(format.syndrome_column,
               *std::max_element(format.symptom_columns.begin(), format.symptom_columns.end())) +
      1;
  std::optional<std::size_t> arity = format.column_count;

  std::string line;
  std::size_t row = 0;
  bool header_pending = format.has_header;
  while (std::getline(in, line)) {
    ++row;
    if (text::trim(line).empty()) continue;
    auto fields = text::split_delimited(line, format.delimiter);
    if (header_pending) {
      header_pending = false;
      arity = fields.size();
      if (fields.size() < min_arity) {
        errors.push_back({row, "header has " + std::to_string(fields.size()) +
                                   " columns, format needs at least " + std::to_string(min_arity)});
      }
      continue;
    }
    const std::size_t expected = arity.value_or(min_arity);
    if (fields.size() != expected) {
      errors.push_back({row, "expected " + std::to_string(expected) + " fields, found " +
                                 std::to_string(fields.size())});
      continue;
    }
    ++result.rows;
    auto syndrome = text::normalize(fields[format.syndrome_column]);
    if (syndrome.empty()) {
      errors.push_back({row, "empty syndrome name"});
      continue;
    }
    std::vector<std::string> symptoms;
    for (auto col : format.symptom_columns) {
      const auto& cell = fields[col];
      std::vector<std::string> parts =
          format.symptom_delimiter ? text::split(cell, *format.symptom_delimiter) : std::vector<std::string>{cell};
      for (const auto& p : parts) {
        auto s = text::normalize(p);
        if (!s.empty()) symptoms.push_back(std::move(s));
      }
    }
    if (symptoms.empty()) {
      errors.push_back({row, "no symptoms for '" + syndrome + "'"});
      continue;
    }
    auto [it, inserted] = index.try_emplace(syndrome, result.records.size());
    if (inserted) {
      result.records.push_back(SyndromeRecord{syndrome, {}, format.source});
    }
    auto& rec = result.records[it->second];
    for (const auto& s : symptoms) {
      ++result.symptom_cells;
      rec.add_symptom(s);
    }
  }
  if (!errors.empty()) {
    throw IngestError(std::string(origin), std::move(errors));
  }
  return result;
}

IngestResult ingest_file(const std::string& path, const ColumnFormat& format) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::io_error, "cannot open " + path);
  return ingest_dataset(in, format, path);
}

KnowledgeBase KnowledgeBase::from_records(std::span<const SyndromeRecord> records) {
  KnowledgeBase kb;
  std::map<std::string, SyndromeRecord, std::less<>> by_name;
  for (const auto& r : records) {
    if (r.syndrome_name.empty() || r.symptoms.empty()) {
      throw Error(ErrorCode::invalid_argument, "syndrome record needs a name and at least one symptom");
    }
    kb.raw_pair_count_ += r.symptoms.size();
    auto [it, inserted] = by_name.try_emplace(r.syndrome_name, SyndromeRecord{r.syndrome_name, {}, r.source});
    for (const auto& s : r.symptoms) it->second.add_symptom(s);
  }
  kb.records_.reserve(by_name.size());
  for (auto& [name, rec] : by_name) {
    kb.pair_count_ += rec.symptoms.size();
    kb.records_.push_back(std::move(rec));
  }
  return kb;
}

const SyndromeRecord* KnowledgeBase::find(std::string_view syndrome) const {
  auto it = std::lower_bound(records_.begin(), records_.end(), syndrome,
                             [](const SyndromeRecord& r, std::string_view s) { return r.syndrome_name < s; });
  if (it == records_.end() || it->syndrome_name != syndrome) return nullptr;
  return &*it;
}

void KnowledgeBase::write_snapshot(std::ostream& out) const {
  Json header;
  header["schema"] = kSnapshotSchema;
  header["syndromes"] = records_.size();
  header["raw_pair_count"] = raw_pair_count_;
  header["pair_count"] = pair_count_;
  out << header.dump() << '\n';
  for (const auto& r : records_) {
    out << Json(r).dump() << '\n';
  }
}

KnowledgeBase KnowledgeBase::read_snapshot(std::istream& in) {
  std::string line;
  if (!std::getline(in, line)) throw Error(ErrorCode::parse_error, "knowledge base snapshot is empty");
  Json header;
  try {
    header = Json::parse(line);
  } catch (const std::exception& e) {
    throw Error(ErrorCode::parse_error, std::string("snapshot header: ") + e.what());
  }
  if (header.value("schema", "") != kSnapshotSchema) {
    throw Error(ErrorCode::parse_error, "snapshot header: unsupported schema");
  }
  std::vector<SyndromeRecord> recs;
  std::size_t row = 1;
  while (std::getline(in, line)) {
    ++row;
    if (text::trim(line).empty()) continue;
    try {
      recs.push_back(Json::parse(line).get<SyndromeRecord>());
    } catch (const std::exception& e) {
      throw Error(ErrorCode::parse_error, "snapshot row " + std::to_string(row) + ": " + e.what());
    }
  }
  KnowledgeBase kb = from_records(recs);
  // The merged snapshot no longer shows cross-input duplicates, so the raw
  // count comes from the header.
  kb.raw_pair_count_ = header.value("raw_pair_count", kb.pair_count_);
  if (kb.raw_pair_count_ < kb.pair_count_) {
    throw Error(ErrorCode::parse_error, "snapshot header: raw_pair_count below pair_count");
  }
  return kb;
}

KnowledgeBase KnowledgeBase::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::io_error, "cannot open " + path);
  return read_snapshot(in);
}

void KnowledgeBase::save(const std::string& path) const {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw Error(ErrorCode::io_error, "cannot write " + path);
  write_snapshot(out);
  if (!out) throw Error(ErrorCode::io_error, "failed writing " + path);
}

KnowledgeBase merge(std::span<const SyndromeRecord> a, std::span<const SyndromeRecord> b) {
  std::vector<SyndromeRecord> all(a.begin(), a.end());
  all.insert(all.end(), b.begin(), b.end());
  return KnowledgeBase::from_records(all);
}

ScenarioSpec sample_scenario(const KnowledgeBase& kb, std::uint64_t seed) {
  if (kb.empty()) throw Error(ErrorCode::invalid_argument, "cannot sample from an empty knowledge base");
  Rng rng(seed);
  const auto& rec = kb.records()[rng.index(kb.size())];
  return ScenarioSpec{rec.syndrome_name, rec.symptoms, seed};
}

}  // namespace vpsim::kb
