#include "vpsim/corpus_io.hpp"

#include <cstdlib>
#include <istream>
#include <set>

#include "vpsim/error.hpp"
#include "vpsim/text.hpp"

namespace vpsim::io {

namespace {

struct Table {
  std::vector<std::string> header;
  // (physical line number, cells)
  std::vector<std::pair<std::size_t, std::vector<std::string>>> rows;
};

Table read_table(std::istream& in, char delimiter, std::string_view what) {
  Table t;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (text::trim(line).empty()) continue;
    auto cells = text::split_delimited(line, delimiter);
    for (auto& c : cells) c = std::string(text::trim(c));
    if (t.header.empty()) {
      t.header = std::move(cells);
      continue;
    }
    if (cells.size() != t.header.size()) {
      throw Error(ErrorCode::parse_error, std::string(what) + " row " + std::to_string(lineno) + ": expected " +
                                              std::to_string(t.header.size()) + " fields, got " +
                                              std::to_string(cells.size()));
    }
    t.rows.emplace_back(lineno, std::move(cells));
  }
  if (t.header.empty()) throw Error(ErrorCode::parse_error, std::string(what) + " is empty");
  return t;
}

std::size_t column(const Table& t, std::string_view name, std::string_view what) {
  for (std::size_t i = 0; i < t.header.size(); ++i) {
    if (text::to_lower(t.header[i]) == name) return i;
  }
  throw Error(ErrorCode::parse_error, std::string(what) + " has no '" + std::string(name) + "' column");
}

sentiment::SentimentLabel label_at(const std::string& cell, std::size_t lineno, std::string_view what) {
  auto l = sentiment::try_parse_label(cell);
  if (!l) {
    throw Error(ErrorCode::parse_error,
                std::string(what) + " row " + std::to_string(lineno) + ": unknown label '" + cell + "'");
  }
  return *l;
}

}  // namespace

std::vector<LabeledUtterance> read_labeled_corpus(std::istream& in, char delimiter) {
  const auto t = read_table(in, delimiter, "corpus");
  const auto text_col = column(t, "text", "corpus");
  const auto gold_col = column(t, "gold_label", "corpus");
  std::vector<LabeledUtterance> out;
  for (const auto& [lineno, cells] : t.rows) {
    out.push_back({cells[text_col], label_at(cells[gold_col], lineno, "corpus")});
  }
  if (out.empty()) throw Error(ErrorCode::parse_error, "corpus has no rows");
  return out;
}

std::vector<Prediction> read_prediction_dump(std::istream& in, char delimiter) {
  const auto t = read_table(in, delimiter, "prediction dump");
  const auto id_col = column(t, "utterance_id", "prediction dump");
  const auto model_col = column(t, "model_id", "prediction dump");
  const auto label_col = column(t, "label", "prediction dump");
  std::vector<Prediction> out;
  for (const auto& [lineno, cells] : t.rows) {
    if (cells[model_col].empty()) {
      throw Error(ErrorCode::parse_error, "prediction dump row " + std::to_string(lineno) + ": empty model_id");
    }
    out.push_back({cells[id_col], cells[model_col], label_at(cells[label_col], lineno, "prediction dump")});
  }
  return out;
}

analytics::PredictionsByModel align_predictions(const std::vector<Prediction>& preds) {
  std::map<std::string, std::map<std::string, sentiment::SentimentLabel>> by_model;
  for (const auto& p : preds) {
    if (!by_model[p.model_id].emplace(p.utterance_id, p.label).second) {
      throw Error(ErrorCode::invalid_argument,
                  "model '" + p.model_id + "' labels utterance '" + p.utterance_id + "' twice");
    }
  }
  if (by_model.empty()) throw Error(ErrorCode::invalid_argument, "no predictions");
  const auto& [first_model, first] = *by_model.begin();
  analytics::PredictionsByModel out;
  for (const auto& [model, labels] : by_model) {
    bool same = labels.size() == first.size();
    for (auto a = labels.begin(), b = first.begin(); same && a != labels.end(); ++a, ++b) same = a->first == b->first;
    if (!same) {
      throw Error(ErrorCode::invalid_argument,
                  "models '" + first_model + "' and '" + model + "' do not cover the same utterance ids");
    }
    auto& v = out[model];
    for (const auto& [id, label] : labels) v.push_back(label);
  }
  return out;
}

std::vector<analytics::LikertVector> read_survey(std::istream& in, char delimiter) {
  const auto t = read_table(in, delimiter, "survey");
  std::vector<analytics::LikertVector> items(t.header.size());
  for (std::size_t i = 0; i < t.header.size(); ++i) items[i].item_label = t.header[i];
  for (const auto& [lineno, cells] : t.rows) {
    for (std::size_t i = 0; i < cells.size(); ++i) {
      if (cells[i].empty()) continue;
      char* end = nullptr;
      const long v = std::strtol(cells[i].c_str(), &end, 10);
      if (end != cells[i].c_str() + cells[i].size() || v < 1 || v > 5) {
        throw Error(ErrorCode::parse_error, "survey row " + std::to_string(lineno) + ", item '" + t.header[i] +
                                                "': value '" + cells[i] + "' is not in 1..5");
      }
      items[i].values.push_back(static_cast<int>(v));
    }
  }
  return items;
}

}  // namespace vpsim::io
