#pragma once

#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "senserate/core.hpp"

namespace senserate::prompting {

enum class Strategy { kP1, kP2 };
enum class ParseMode { kStrict, kLenient };

std::string_view strategy_name(Strategy s) noexcept;  // "p1" / "p2"
Strategy parse_strategy(std::string_view text);
std::string_view parse_mode_name(ParseMode m) noexcept;  // "strict" / "lenient"
ParseMode parse_parse_mode(std::string_view text);

/// Templates as sent to the model. Placeholders use {name} syntax.
std::string_view p1_system_template() noexcept;
std::string_view p1_example_template() noexcept;
std::string_view p1_user_template() noexcept;
std::string_view p2_template() noexcept;

struct ExampleTurn {
  std::string user_text;
  std::string assistant_text;

  bool operator==(const ExampleTurn&) const = default;
};

struct PromptBundle {
  Strategy strategy = Strategy::kP2;
  std::string system_text;
  std::vector<ExampleTurn> example_turns;  // empty for P2
  std::string user_text;                   // empty for P2

  bool operator==(const PromptBundle&) const = default;
};

/// Single-pass replacement of {homonym}, {judged_meaning}, {precontext},
/// {sentence}, {ending}. Substituted values are never re-scanned.
std::string render_template(std::string_view tmpl, const Sample& s);

/// The text that stands in for a missing ending.
inline constexpr std::string_view kNoEnding = "none";

struct FewShotSelection {
  std::vector<Sample> shots;          // levels 1..5, ascending
  std::vector<std::string> warnings;  // one per level that used the fallback
};

/// One sample per integer rating level, preferring zero annotator spread.
FewShotSelection select_fewshot(std::span<const Sample> train);

/// Rendered few-shot block for a shot, including its "Rating: N" line.
std::string render_example_block(const Sample& shot);

PromptBundle build_p1(const Sample& target, std::span<const Sample> shots);
PromptBundle build_p2(const Sample& target);

/// Human-readable dump of every message, used for golden files and
/// `prompt-render`.
std::string transcript(const PromptBundle& b);

struct ParsedRating {
  int value = 0;
  ParseMode mode = ParseMode::kStrict;
};

/// STRICT: whole text (whitespace-trimmed) is one integer in 1..5.
/// LENIENT: first standalone integer in 1..5 anywhere in the text.
ParsedRating parse_rating(std::string_view text, ParseMode mode);

}  // namespace senserate::prompting
