#include "mqud/backend/request.hpp"

#include <set>

#include "mqud/util/error.hpp"
#include "mqud/util/hash.hpp"

namespace mqud::backend {

namespace {

constexpr std::string_view kGenerate = R"(Generate natural, research-oriented questions that arise from viewing this figure and the paper abstract, where answers are found in the paper text.

Scenario: An inquisitive researcher who read the abstract of this paper views this figure and its caption. What would they naturally wonder about what is shown in the figure?

Critical requirements:
1. Questions arise from viewing the figure: Reference what is visible (trends, differences, patterns, values, annotations). Express genuine curiosity (why, how, what). Cannot be answered from the caption alone.
2. Answers from paper text: 2-4 substantive sentences providing interpretation, cause, or context. Should provide insight, not just restate the question.
3. Natural research language: Write from a researcher's perspective. Match the paper's sophistication level. Vary question structures naturally.
4. Specific to this figure: Reference concrete visual elements (lines, bars, regions, numerical values). Use terms from the provided paragraphs, not generic placeholders.

Question type examples (good and bad):
- Cause: good "Why does the accuracy drop sharply after 100 tokens in the left panel?"
- Comparison: good "How does the baseline's behavior differ from the proposed method in the high-resource setting?"
- Extent: good "To what extent does the model's perplexity improve with additional training data?"
- Consequence: good "What happens to the loss curve when the learning rate exceeds 0.01?"
- Procedural: good "How does the model achieve the performance plateau visible around epoch 50?"
- Concept: good "What does the shaded region in the time series represent in terms of model uncertainty?"
- bad "What does the figure show?" (too generic); bad "What is the value of the blue line at x=5?" (trivial)

Context: Paper: {paper_name}. Abstract: {abstract}. Figure {figure_number}, caption: {caption}, referenced {reference_count} times. Other figures in paper: {other_figures}. Text discussing this figure: {paragraphs}.

Output: JSON array of {n_questions} objects with fields: question, answer, answer_source, question_type in {cause, comparison, extent, consequence, procedural, concept}, difficulty in {medium, hard}.)";

constexpr std::string_view kRephrase = R"(Your goal is to produce DIVERSE rephrases that a real researcher might ask, not just synonym swaps.

Given a question-answer pair about a scientific paper figure, generate {n_variants} rephrased variants. Each variant MUST be structurally different from the others.

Diversity requirements (critical):
- Variant 1: Restructure the question substantially (e.g., change from direct to embedded question, split into sub-questions, or approach from a different angle while asking about the same thing). Answer should be CONCISE (1-2 sentences, ~20-30 words).
- Variant 2: Use a notably different framing or perspective (e.g., if original asks "why does X increase", rephrase as "what explains the upward trend in X"). Answer should be DETAILED (4-5 sentences, ~60-80 words) with context and implications.
- Do NOT just swap synonyms. "Why does X" -> "What causes X" is NOT enough variation.
- The two variants MUST have noticeably different answer lengths and structures.

Preservation: Same factual content, same figure references, same question type intent ({question_type}).

Figure caption: {caption}. Source excerpt: {source_excerpt}.
Original question: {question}. Original answer: {answer}.

Output: JSON array of objects with question and answer fields.)";

constexpr std::string_view kGrounding = R"(Check whether an answer to a scientific question is grounded in the provided text.

Criteria:
1. Every claim in the answer must be traceable to the caption and/or source text.
2. The answer must be concrete and informative; non-answers like "can be identified by looking at the figure" are NOT grounded.

Figure caption: {caption}. Source text: {source_text}.
Question: {question}. Answer: {answer}.

Output: JSON with grounded (boolean) and reason (brief explanation).)";

constexpr std::string_view kJudge = R"(You are an expert scientist evaluating a question-answer pair grounded in a research paper figure.

Your task is to evaluate each question-answer pair grounded in a research paper figure. Focus on the questions' usefulness, clarity, correctness, and whether the answer truly follows from the cited source text. We're looking for questions that are not directly answered in the figures or their captions themselves, but are triggered by the figures, and answered later in the paper.

Paper Context: Title: {title}. Paper ID: {paper_id}.
Figure Caption: {figure_info}
Cited Source Paragraph(s): {source_content}
Question: {question}
LLM Answer: {answer}

Look at the figure image provided. Read the title and think about the key research question(s) in this paper. Look at the figure + caption, and read the question. Read the answer and the cited source paragraph(s). Score each criterion below.

Dimensions:
1. Question quality (grammar and clarity): "perfect" | "minor" | "major"
2. Question salience: "very" | "somewhat" | "not"
3. Answer quality: "4" (excellent) | "3" (good) | "2" (fair) | "1" (poor)
4. Answer correct?: "yes" | "partial" | "no"
5. Figure usefulness: "essential" | "helpful" | "not"
6. Answered by figure + caption?: "yes" | "no"
7. Figure type: "result" | "method" | "data" | "comparison" | "other"

Output: JSON with q-grammar, salience, answer_quality, answer-correct, figure-useful, answered-by-figure, figure-type, notes.)";

bool is_slot_char(char c) { return (c >= 'a' && c <= 'z') || c == '_'; }

// Scans `{name}` placeholders; braces around anything else are literal text.
template <typename F>
void scan_slots(std::string_view text, F&& on_slot) {
  for (std::size_t i = 0; i < text.size(); ++i) {
    if (text[i] != '{') continue;
    std::size_t j = i + 1;
    while (j < text.size() && is_slot_char(text[j])) ++j;
    if (j > i + 1 && j < text.size() && text[j] == '}') {
      on_slot(i, j + 1, std::string(text.substr(i + 1, j - i - 1)));
      i = j;
    }
  }
}

}  // namespace

std::string_view to_string(TemplateId id) {
  switch (id) {
    case TemplateId::qud_generate: return "qud_generate";
    case TemplateId::rephrase: return "rephrase";
    case TemplateId::grounding_check: return "grounding_check";
    case TemplateId::judge: return "judge";
  }
  return "?";
}

std::optional<TemplateId> template_from_string(std::string_view s) {
  for (auto id : {TemplateId::qud_generate, TemplateId::rephrase, TemplateId::grounding_check, TemplateId::judge})
    if (to_string(id) == s) return id;
  return std::nullopt;
}

std::string_view template_text(TemplateId id) {
  switch (id) {
    case TemplateId::qud_generate: return kGenerate;
    case TemplateId::rephrase: return kRephrase;
    case TemplateId::grounding_check: return kGrounding;
    case TemplateId::judge: return kJudge;
  }
  return {};
}

std::vector<std::string> template_slots(TemplateId id) {
  std::set<std::string> names;
  // The answer-schema braces ({cause, ...}) contain spaces and commas, so
  // only bare identifiers count as slots.
  scan_slots(template_text(id), [&](std::size_t, std::size_t, std::string name) { names.insert(std::move(name)); });
  return {names.begin(), names.end()};
}

std::string render(const BackendRequest& request) {
  const auto text = template_text(request.template_id);
  const auto slots = template_slots(request.template_id);
  for (const auto& s : slots)
    if (!request.text_slots.count(s))
      throw Error(ErrorKind::InvariantViolation,
                  std::string(to_string(request.template_id)) + ": slot '" + s + "' not filled");
  for (const auto& [k, v] : request.text_slots)
    if (!std::binary_search(slots.begin(), slots.end(), k))
      throw Error(ErrorKind::InvariantViolation,
                  std::string(to_string(request.template_id)) + ": unexpected slot '" + k + "'");
  std::string out;
  std::size_t last = 0;
  scan_slots(text, [&](std::size_t begin, std::size_t end, const std::string& name) {
    out.append(text.substr(last, begin - last));
    out += request.text_slots.at(name);
    last = end;
  });
  out.append(text.substr(last));
  if (!request.retry_note.empty()) out += "\n\n" + request.retry_note;
  return out;
}

json canonical(const BackendRequest& request) {
  json j = {{"template_id", to_string(request.template_id)},
            {"text_slots", request.text_slots},
            {"image_refs", request.image_refs},
            {"decoding", request.decoding}};
  if (!request.retry_note.empty()) j["retry_note"] = request.retry_note;
  return j;
}

std::string request_key(const BackendRequest& request) { return util::content_hash(canonical(request).dump()); }

json default_decoding(TemplateId id) {
  const double t = (id == TemplateId::qud_generate || id == TemplateId::rephrase) ? 0.7 : 0.0;
  return {{"temperature", t}, {"max_tokens", id == TemplateId::qud_generate ? 2048 : 1024}};
}

std::optional<json> parse_json_reply(std::string_view text) {
  for (std::size_t i = 0; i < text.size(); ++i) {
    if (text[i] != '[' && text[i] != '{') continue;
    const char close = text[i] == '[' ? ']' : '}';
    // Try the longest candidate first: up to the last matching closer.
    for (std::size_t end = text.rfind(close); end != std::string_view::npos && end > i;
         end = end == 0 ? std::string_view::npos : text.rfind(close, end - 1)) {
      auto parsed = json::parse(text.substr(i, end - i + 1), nullptr, false);
      if (!parsed.is_discarded()) return parsed;
    }
  }
  return std::nullopt;
}

}  // namespace mqud::backend
