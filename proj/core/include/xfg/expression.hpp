#pragma once

#include <array>
#include <optional>
#include <string>
#include <string_view>

namespace xfg {

/// The six basic expressions. Index order is part of the wire protocol.
enum class Expression : int { anger = 0, disgust = 1, fear = 2, happiness = 3, sadness = 4, surprise = 5 };

inline constexpr int kExpressionCount = 6;
inline constexpr std::array<Expression, kExpressionCount> kAllExpressions = {
    Expression::anger, Expression::disgust, Expression::fear,
    Expression::happiness, Expression::sadness, Expression::surprise};

constexpr int index_of(Expression e) { return static_cast<int>(e); }

/// Lower-case protocol name, e.g. "happiness".
std::string_view to_string(Expression e);
/// Capitalized, for tables and plots.
std::string_view display_name(Expression e);
/// Accepts protocol names (case-insensitive) or a decimal index.
std::optional<Expression> parse_expression(std::string_view text);
Expression expression_from_index(int index);

using ProbabilityVector = std::array<double, kExpressionCount>;

struct PredictionRecord {
  ProbabilityVector probs{};
  Expression predicted = Expression::anger;
};

/// Argmax with lowest-index tie-break.
Expression argmax(const ProbabilityVector& probs);

/// Validates probabilities (finite, non-negative, sum within 1e-3 of 1) and
/// builds the record. Throws OracleError otherwise.
PredictionRecord make_prediction(const ProbabilityVector& probs);

inline constexpr double kProbabilitySumTolerance = 1e-3;

}  // namespace xfg
