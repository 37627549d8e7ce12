#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include "vpsim/analytics.hpp"
#include "vpsim/sentiment.hpp"

// Delimited-text inputs for the operator tools. Errors name the file row.
namespace vpsim::io {

struct LabeledUtterance {
  std::string text;
  sentiment::SentimentLabel gold;
};

// Header row required, columns "text" and "gold_label" (any order).
std::vector<LabeledUtterance> read_labeled_corpus(std::istream& in, char delimiter = ',');

struct Prediction {
  std::string utterance_id;
  std::string model_id;
  sentiment::SentimentLabel label;
};

// Header row required, columns "utterance_id", "model_id", "label".
std::vector<Prediction> read_prediction_dump(std::istream& in, char delimiter = ',');

// Groups predictions by model with labels ordered by utterance id. Throws
// Error(invalid_argument) when models do not cover the same utterance ids or
// a model repeats an id.
analytics::PredictionsByModel align_predictions(const std::vector<Prediction>& preds);

// Header row of item labels, one column per Likert item, one row per
// respondent. Empty cells are skipped.
std::vector<analytics::LikertVector> read_survey(std::istream& in, char delimiter = ',');

}  // namespace vpsim::io
