#include "vpsim/sentiment.hpp"

#include <algorithm>
#include <set>

#include "vpsim/adapters.hpp"
#include "vpsim/assets.hpp"
#include "vpsim/error.hpp"
#include "vpsim/text.hpp"

namespace vpsim::sentiment {

std::string_view to_string(SentimentLabel l) {
  switch (l) {
    case SentimentLabel::negative: return "negative";
    case SentimentLabel::neutral: return "neutral";
    case SentimentLabel::positive: return "positive";
  }
  return "neutral";
}

std::optional<SentimentLabel> try_parse_label(std::string_view s) {
  const auto v = text::normalize(s);
  if (v == "negative" || v == "neg" || v == "-1") return SentimentLabel::negative;
  if (v == "neutral" || v == "neu" || v == "0") return SentimentLabel::neutral;
  if (v == "positive" || v == "pos" || v == "1" || v == "+1") return SentimentLabel::positive;
  return std::nullopt;
}

SentimentLabel parse_label(std::string_view s) {
  if (auto l = try_parse_label(s)) return *l;
  throw Error(ErrorCode::parse_error, "unknown sentiment label '" + std::string(s) + "'");
}

Lexicon Lexicon::parse(std::string_view content) {
  Lexicon lex;
  for (const auto& line : text::catalog_lines(content)) {
    if (line.size() < 3 || (line[0] != '+' && line[0] != '-') || line[1] != ' ') {
      throw Error(ErrorCode::parse_error, "lexicon line must start with '+ ' or '- ': " + line);
    }
    auto ws = text::words(line.substr(2));
    if (ws.empty()) throw Error(ErrorCode::parse_error, "lexicon cue has no words: " + line);
    lex.cues_.push_back(Cue{std::move(ws), line[0] == '+'});
  }
  std::stable_sort(lex.cues_.begin(), lex.cues_.end(),
                   [](const Cue& a, const Cue& b) { return a.words.size() > b.words.size(); });
  return lex;
}

const Lexicon& Lexicon::builtin() {
  static const Lexicon lex = parse(assets::builtin("sentiment/lexicon_v1.txt"));
  return lex;
}

Lexicon Lexicon::load(const std::string& path) { return parse(text::read_file(path)); }

Lexicon::Hits Lexicon::count(std::string_view input) const {
  Hits hits;
  const auto ws = text::words(input);
  std::size_t i = 0;
  while (i < ws.size()) {
    std::size_t consumed = 1;
    for (const auto& cue : cues_) {
      const auto n = cue.words.size();
      if (i + n > ws.size()) continue;
      if (std::equal(cue.words.begin(), cue.words.end(), ws.begin() + static_cast<std::ptrdiff_t>(i))) {
        (cue.positive ? hits.positive : hits.negative) += 1;
        consumed = n;
        break;
      }
    }
    i += consumed;
  }
  return hits;
}

SentimentLabel classify_rule_based(std::string_view text, const Lexicon& lexicon) {
  const auto h = lexicon.count(text);
  if (h.positive > h.negative) return SentimentLabel::positive;
  if (h.negative > h.positive) return SentimentLabel::negative;
  return SentimentLabel::neutral;
}

RuleBasedClassifier::RuleBasedClassifier(Lexicon lexicon) : lexicon_(std::move(lexicon)) {}

ClassificationResult RuleBasedClassifier::classify(std::string_view text) {
  return ClassificationResult{classify_rule_based(text, lexicon_), false, {}, id()};
}

std::optional<SentimentLabel> parse_model_reply(std::string_view reply) {
  std::set<SentimentLabel> seen;
  for (const auto& w : text::words(reply)) {
    if (w == "negative") seen.insert(SentimentLabel::negative);
    if (w == "neutral") seen.insert(SentimentLabel::neutral);
    if (w == "positive") seen.insert(SentimentLabel::positive);
  }
  if (seen.size() == 1) return *seen.begin();
  return std::nullopt;
}

std::string builtin_classification_template() {
  return std::string(assets::builtin("prompts/sentiment_classify.txt"));
}

ModelClassifier::ModelClassifier(std::shared_ptr<pipeline::ChatModel> model, std::string model_id,
                                 std::string prompt_template, double timeout_s, std::ptrdiff_t max_in_flight)
    : model_(std::move(model)),
      model_id_(std::move(model_id)),
      template_(std::move(prompt_template)),
      timeout_s_(timeout_s),
      in_flight_(std::max<std::ptrdiff_t>(1, max_in_flight)) {
  if (!model_) throw Error(ErrorCode::invalid_argument, "model classifier needs an adapter");
  if (template_.find("{{utterance}}") == std::string::npos) {
    throw Error(ErrorCode::invalid_argument, "classification template lacks {{utterance}}");
  }
}

ClassificationResult ModelClassifier::classify(std::string_view utterance) {
  const std::string prompt = text::render_template(template_, {{"utterance", std::string(utterance)}});
  const std::vector<pipeline::ChatMessage> messages{{scenario::Role::user, prompt}};
  pipeline::GenerationParams params;
  params.temperature = 0.0;

  ClassificationResult result;
  result.model_id = model_id_;
  in_flight_.acquire();
  struct Release {
    std::counting_semaphore<>& sem;
    ~Release() { sem.release(); }
  } release{in_flight_};
  try {
    for (int attempt = 0; attempt < 2; ++attempt) {
      if (auto label = parse_model_reply(model_->complete(messages, params, timeout_s_))) {
        result.label = label;
        return result;
      }
    }
    result.label = SentimentLabel::neutral;
    result.unparsed = true;
  } catch (const std::exception& e) {
    result.label.reset();
    result.error = e.what();
  }
  return result;
}

}  // namespace vpsim::sentiment
