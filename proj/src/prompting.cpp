#include "senserate/prompting.hpp"

#include <algorithm>
#include <array>
#include <cctype>
#include <map>

#include "senserate/error.hpp"

namespace senserate::prompting {

namespace {

constexpr std::string_view kP1System =
    "You are evaluating whether a proposed meaning of a homonym is supported by its narrative "
    "context.\n"
    "\n"
    "Input format:\n"
    "- Homonym: The ambiguous word\n"
    "- Meaning: The proposed interpretation\n"
    "- Precontext: Background narrative\n"
    "- Sentence: The sentence containing the homonym\n"
    "- Ending: The conclusion (may be none)\n"
    "\n"
    "Rating scale:\n"
    "1 = Completely implausible. The meaning clearly conflicts with the narrative.\n"
    "2 = Mostly implausible. Weak or contradictory support.\n"
    "3 = Moderately plausible. Possible but ambiguous.\n"
    "4 = Very plausible. Strong and consistent support.\n"
    "5 = Highly plausible. Clearly intended and strongly confirmed.\n"
    "\n"
    "The ending is the most important factor for disambiguation.\n"
    "Return only a single integer (1-5). No explanation.";

constexpr std::string_view kP1Example =
    "Homonym: {homonym} | Meaning: {judged_meaning}\n"
    "Precontext: {precontext}\n"
    "Sentence: {sentence}\n"
    "Ending: {ending}\n"
    "Rating:";

constexpr std::string_view kP1User =
    "Homonym: {homonym}\n"
    "Meaning: {judged_meaning}\n"
    "Precontext: {precontext}\n"
    "Sentence: {sentence}\n"
    "Ending: {ending}\n"
    "Rating:";

constexpr std::string_view kP2 =
    "You are an impartial evaluator assessing whether a proposed meaning of a word is supported "
    "by the provided narrative context. Base your judgment only on the text given.\n"
    "\n"
    "Word: {homonym}  Proposed meaning: {judged_meaning}\n"
    "\n"
    "Narrative context\n"
    "- Beginning (precontext): {precontext}\n"
    "- Sentence containing the word: {sentence}\n"
    "- Ending (conclusion): {ending}\n"
    "\n"
    "Task: Rate the plausibility that the word {homonym} is used with the proposed meaning "
    "{judged_meaning} in this narrative.\n"
    "\n"
    "Evaluation criteria\n"
    "1. Precontext: Does the setup make this meaning likely or expected?\n"
    "2. Target sentence: Does the local usage support this meaning?\n"
    "3. Ending: Does the conclusion reinforce or confirm this meaning? This is the strongest "
    "source of evidence.\n"
    "\n"
    "Decision rules\n"
    "- If the ending clearly contradicts the proposed meaning, the rating must be 1 or 2.\n"
    "- If evidence is mixed or unclear, choose the lower plausible rating.\n"
    "- A rating of 5 requires explicit confirmation in the ending and no contradictions "
    "elsewhere.\n"
    "\n"
    "Rating scale\n"
    "1 Completely implausible: Clear contradiction.\n"
    "2 Mostly implausible: Weak or conflicting evidence.\n"
    "3 Moderately plausible: Possible but ambiguous.\n"
    "4 Very plausible: Strong and consistent support.\n"
    "5 Highly plausible: Clearly intended and explicitly confirmed.\n"
    "\n"
    "Output format: Return only a single integer from 1 to 5. Do not include explanations, "
    "comments, or any extra text.";

std::string_view trim(std::string_view s) {
  const auto is_space = [](char c) { return std::isspace(static_cast<unsigned char>(c)) != 0; };
  while (!s.empty() && is_space(s.front())) s.remove_prefix(1);
  while (!s.empty() && is_space(s.back())) s.remove_suffix(1);
  return s;
}

bool is_digit(char c) { return c >= '0' && c <= '9'; }
bool is_alnum(char c) { return std::isalnum(static_cast<unsigned char>(c)) != 0; }

}  // namespace

std::string_view strategy_name(Strategy s) noexcept { return s == Strategy::kP1 ? "p1" : "p2"; }

Strategy parse_strategy(std::string_view text) {
  if (text == "p1" || text == "P1") return Strategy::kP1;
  if (text == "p2" || text == "P2") return Strategy::kP2;
  throw ValidationError("unknown strategy '" + std::string(text) + "' (expected p1 or p2)");
}

std::string_view parse_mode_name(ParseMode m) noexcept {
  return m == ParseMode::kStrict ? "strict" : "lenient";
}

ParseMode parse_parse_mode(std::string_view text) {
  if (text == "strict") return ParseMode::kStrict;
  if (text == "lenient") return ParseMode::kLenient;
  throw ValidationError("unknown parse mode '" + std::string(text) +
                        "' (expected strict or lenient)");
}

std::string_view p1_system_template() noexcept { return kP1System; }
std::string_view p1_example_template() noexcept { return kP1Example; }
std::string_view p1_user_template() noexcept { return kP1User; }
std::string_view p2_template() noexcept { return kP2; }

std::string render_template(std::string_view tmpl, const Sample& s) {
  const std::string ending = s.ending ? *s.ending : std::string(kNoEnding);
  const std::array<std::pair<std::string_view, const std::string*>, 5> slots = {{
      {"{homonym}", &s.homonym},
      {"{judged_meaning}", &s.judged_meaning},
      {"{precontext}", &s.precontext},
      {"{sentence}", &s.sentence},
      {"{ending}", &ending},
  }};
  std::string out;
  out.reserve(tmpl.size() + 256);
  std::size_t i = 0;
  while (i < tmpl.size()) {
    if (tmpl[i] == '{') {
      bool matched = false;
      for (const auto& [name, value] : slots) {
        if (tmpl.substr(i, name.size()) == name) {
          out += *value;
          i += name.size();
          matched = true;
          break;
        }
      }
      if (matched) continue;
    }
    out.push_back(tmpl[i++]);
  }
  return out;
}

FewShotSelection select_fewshot(std::span<const Sample> train) {
  FewShotSelection sel;
  for (int level = 1; level <= 5; ++level) {
    const Sample* best = nullptr;
    for (const auto& s : train) {
      if (s.gold_mean != static_cast<double>(level)) continue;
      if (!best || s.gold_std < best->gold_std ||
          (s.gold_std == best->gold_std && s.id < best->id)) {
        best = &s;
      }
    }
    if (!best) {
      throw ValidationError("no training sample with gold rating " + std::to_string(level) +
                            " to use as a few-shot example");
    }
    if (best->gold_std != 0.0) {
      sel.warnings.push_back("no zero-spread sample at rating " + std::to_string(level) +
                             "; using '" + best->id + "' (std " + std::to_string(best->gold_std) +
                             ")");
    }
    sel.shots.push_back(*best);
  }
  return sel;
}

namespace {

int shot_level(const Sample& shot) {
  const double r = shot.gold_mean;
  const int level = static_cast<int>(r);
  if (static_cast<double>(level) != r || level < 1 || level > 5) {
    throw ValidationError("few-shot sample '" + shot.id + "' has non-integer rating");
  }
  return level;
}

}  // namespace

std::string render_example_block(const Sample& shot) {
  return render_template(kP1Example, shot) + " " + std::to_string(shot_level(shot));
}

PromptBundle build_p1(const Sample& target, std::span<const Sample> shots) {
  if (shots.size() != 5) throw ValidationError("P1 needs exactly five few-shot examples");
  PromptBundle b;
  b.strategy = Strategy::kP1;
  b.system_text = std::string(kP1System);
  int previous = 0;
  for (const auto& shot : shots) {
    const int level = shot_level(shot);
    if (level <= previous) throw ValidationError("few-shot examples must ascend by rating");
    previous = level;
    b.example_turns.push_back({render_template(kP1Example, shot), std::to_string(level)});
  }
  b.user_text = render_template(kP1User, target);
  return b;
}

PromptBundle build_p2(const Sample& target) {
  PromptBundle b;
  b.strategy = Strategy::kP2;
  b.system_text = render_template(kP2, target);
  return b;
}

std::string transcript(const PromptBundle& b) {
  std::string out = "[system]\n" + b.system_text + "\n";
  for (const auto& turn : b.example_turns) {
    out += "\n[user]\n" + turn.user_text + "\n";
    out += "\n[assistant]\n" + turn.assistant_text + "\n";
  }
  if (!b.user_text.empty()) out += "\n[user]\n" + b.user_text + "\n";
  return out;
}

ParsedRating parse_rating(std::string_view text, ParseMode mode) {
  const std::string raw(text);
  if (mode == ParseMode::kStrict) {
    const auto body = trim(text);
    std::string_view digits = body;
    if (!digits.empty() && (digits.front() == '+' || digits.front() == '-')) digits.remove_prefix(1);
    if (digits.empty() || !std::all_of(digits.begin(), digits.end(), is_digit)) {
      throw RatingParseError("response is not a bare integer", raw);
    }
    const bool negative = body.front() == '-';
    const auto nz = digits.find_first_not_of('0');
    const auto significant = nz == std::string_view::npos ? std::string_view("0") : digits.substr(nz);
    if (negative || significant.size() > 1 || significant[0] < '1' || significant[0] > '5') {
      throw RatingRangeError("rating " + std::string(body) + " outside 1..5", raw);
    }
    return {significant[0] - '0', mode};
  }

  const std::size_t n = text.size();
  std::size_t i = 0;
  while (i < n) {
    if (!is_digit(text[i])) {
      ++i;
      continue;
    }
    std::size_t j = i;
    while (j < n && is_digit(text[j])) ++j;
    const bool left_ok =
        i == 0 || (!is_alnum(text[i - 1]) && !(text[i - 1] == '.' && i >= 2 && is_digit(text[i - 2])));
    const bool right_ok =
        j == n || (!is_alnum(text[j]) && !(text[j] == '.' && j + 1 < n && is_digit(text[j + 1])));
    if (left_ok && right_ok && j - i == 1 && text[i] >= '1' && text[i] <= '5') {
      return {text[i] - '0', mode};
    }
    i = j;
  }
  throw RatingParseError("no rating between 1 and 5 found in response", raw);
}

}  // namespace senserate::prompting
