#pragma once

#include <cstddef>
#include <memory>
#include <optional>
#include <semaphore>
#include <string>
#include <string_view>
#include <vector>

namespace vpsim::pipeline {
class ChatModel;
}

namespace vpsim::sentiment {

// Serialization order is Negative < Neutral < Positive.
enum class SentimentLabel { negative = 0, neutral = 1, positive = 2 };
inline constexpr std::size_t kLabelCount = 3;

std::string_view to_string(SentimentLabel l);
// Accepts the full name in any case, or N/U/P style short forms
// ("neg", "neu", "pos"). Throws Error(parse_error).
SentimentLabel parse_label(std::string_view s);
std::optional<SentimentLabel> try_parse_label(std::string_view s);

struct ClassificationResult {
  std::optional<SentimentLabel> label;
  // The model reply never parsed; label fell back to Neutral.
  bool unparsed = false;
  // Non-empty when classification failed outright (e.g. adapter timeout).
  std::string error;
  std::string model_id;

  bool ok() const { return label.has_value(); }
  bool operator==(const ClassificationResult&) const = default;
};

class Classifier {
 public:
  virtual ~Classifier() = default;
  virtual ClassificationResult classify(std::string_view text) = 0;
  virtual std::string id() const = 0;
};

class Lexicon {
 public:
  // "+ cue" / "- cue" per line; '#' comments.
  static Lexicon parse(std::string_view content);
  static const Lexicon& builtin();
  static Lexicon load(const std::string& path);

  // Longest-match scan over words; a matched multi-word cue consumes its words.
  struct Hits {
    std::size_t positive = 0;
    std::size_t negative = 0;
  };
  Hits count(std::string_view text) const;

  std::size_t size() const { return cues_.size(); }

 private:
  struct Cue {
    std::vector<std::string> words;
    bool positive = true;
  };
  std::vector<Cue> cues_;  // longest first
};

// More positive cues -> Positive, more negative -> Negative, else Neutral.
SentimentLabel classify_rule_based(std::string_view text, const Lexicon& lexicon = Lexicon::builtin());

class RuleBasedClassifier final : public Classifier {
 public:
  explicit RuleBasedClassifier(Lexicon lexicon = Lexicon::builtin());
  ClassificationResult classify(std::string_view text) override;
  std::string id() const override { return "rule"; }

 private:
  Lexicon lexicon_;
};

// Maps a free-text model reply to a label: trimmed, lowercased, and either
// exactly a label word or containing exactly one distinct label word.
std::optional<SentimentLabel> parse_model_reply(std::string_view reply);

std::string builtin_classification_template();

// Instruction-prompts a chat model. Unparseable replies get one retry, then
// fall back to Neutral with the unparsed flag; adapter failures are
// reported in ClassificationResult::error rather than thrown.
class ModelClassifier final : public Classifier {
 public:
  ModelClassifier(std::shared_ptr<pipeline::ChatModel> model, std::string model_id,
                  std::string prompt_template = builtin_classification_template(),
                  double timeout_s = 10.0, std::ptrdiff_t max_in_flight = 4);

  ClassificationResult classify(std::string_view text) override;
  std::string id() const override { return model_id_; }

 private:
  std::shared_ptr<pipeline::ChatModel> model_;
  std::string model_id_;
  std::string template_;
  double timeout_s_;
  std::counting_semaphore<> in_flight_;
};

}  // namespace vpsim::sentiment
