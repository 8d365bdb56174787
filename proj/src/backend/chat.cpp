#include "mqud/backend/chat.hpp"

#include <algorithm>
#include <cstdlib>

#include <httplib.h>

#include "mqud/util/error.hpp"
#include "mqud/util/hash.hpp"
#include "mqud/util/text.hpp"

namespace mqud::backend {

ScriptedBackend::ScriptedBackend(std::vector<std::string> replies) : replies_(replies.begin(), replies.end()) {}

void ScriptedBackend::push(std::string reply) {
  std::lock_guard lock(mu_);
  replies_.push_back(std::move(reply));
}

std::string ScriptedBackend::complete(const BackendRequest& request) {
  render(request);
  std::lock_guard lock(mu_);
  requests_.push_back(request);
  if (replies_.empty()) throw Error(ErrorKind::BackendUnavailable, "scripted backend has no reply left");
  auto r = std::move(replies_.front());
  replies_.pop_front();
  return r;
}

std::vector<BackendRequest> ScriptedBackend::requests() const {
  std::lock_guard lock(mu_);
  return requests_;
}

// ---------------------------------------------------------------------------
// Mock

namespace {

const std::string& slot(const BackendRequest& r, const std::string& name) {
  static const std::string empty;
  auto it = r.text_slots.find(name);
  return it == r.text_slots.end() ? empty : it->second;
}

std::vector<std::string> ordered_content_terms(std::string_view s) {
  std::vector<std::string> out;
  for (auto& t : text::alnum_tokens(s)) {
    if (t.size() < 3 || text::is_stopword(t)) continue;
    if (std::all_of(t.begin(), t.end(), [](unsigned char c) { return std::isdigit(c); })) continue;
    if (std::find(out.begin(), out.end(), t) == out.end()) out.push_back(std::move(t));
  }
  return out;
}

std::string first_words(std::string_view s, std::size_t n) {
  auto words = text::split_words(s);
  if (words.size() > n) words.resize(n);
  auto out = text::join(words, " ");
  while (!out.empty() && (out.back() == ',' || out.back() == ';' || out.back() == ':')) out.pop_back();
  if (!out.empty() && out.back() != '.') out += '.';
  return out;
}

constexpr std::string_view kTypes[] = {"cause", "comparison", "extent", "consequence", "procedural", "concept"};
constexpr std::string_view kVisuals[] = {"curve", "bars", "shaded region", "panel", "trend line", "legend"};

std::string mock_question(std::string_view type, const std::string& term, std::string_view visual,
                          const std::string& fig) {
  const std::string v(visual);
  if (type == "cause") return "Why does the " + term + " " + v + " in Figure " + fig + " change the way it does?";
  if (type == "comparison")
    return "How does the " + term + " " + v + " in Figure " + fig + " differ across the compared settings?";
  if (type == "extent")
    return "To what extent does the " + term + " shown by the " + v + " in Figure " + fig + " improve?";
  if (type == "consequence")
    return "What happens to the " + term + " " + v + " in Figure " + fig + " when the setting is changed?";
  if (type == "procedural")
    return "How does the method produce the " + term + " pattern visible in the " + v + " of Figure " + fig + "?";
  return "What does the " + v + " for " + term + " in Figure " + fig + " represent?";
}

std::string mock_generate(const BackendRequest& r) {
  const auto& caption = slot(r, "caption");
  const auto& fig = slot(r, "figure_number");
  int n = std::atoi(slot(r, "n_questions").c_str());
  if (n <= 0) n = 6;
  auto terms = ordered_content_terms(caption);
  if (terms.empty()) terms.push_back("result");
  std::vector<std::string> sentences;
  for (auto& s : text::split_sentences(slot(r, "paragraphs")))
    if (text::word_count(s) >= 4) sentences.push_back(std::move(s));
  if (sentences.empty()) sentences.push_back(caption);

  const std::uint64_t h = util::stable_u64(caption + "\x1f" + fig);
  json items = json::array();
  std::string first_question;
  for (int i = 0; i < n; ++i) {
    const auto k = static_cast<std::size_t>(i);
    const auto type = kTypes[(h + k) % 6];
    std::string question = mock_question(type, terms[k % terms.size()], kVisuals[(h / 7 + k) % 6], fig);
    // The sixth candidate restates the first, for the dedup stage to catch.
    if (i == 5) question = "In short, " + first_question;
    if (i == 0) {
      first_question = question;
      first_question[0] = static_cast<char>(std::tolower(static_cast<unsigned char>(first_question[0])));
    }

    std::vector<std::string> used;
    std::size_t words = 0;
    for (std::size_t j = 0; j < sentences.size() && words < 30; ++j) {
      const auto& s = sentences[(2 * k + j) % sentences.size()];
      const auto w = text::word_count(s);
      if (!used.empty() && words + w > 110) break;
      used.push_back(s);
      words += w;
    }
    std::string answer = text::join(used, " ");
    if (i == 3 && h % 3 == 0) answer = first_words(used.front(), 12);
    items.push_back({{"question", question},
                     {"answer", answer},
                     {"answer_source", used.front()},
                     {"question_type", type},
                     {"difficulty", i % 2 ? "hard" : "medium"}});
  }
  return items.dump(2);
}

constexpr std::string_view kNonAnswers[] = {"see the figure", "looking at the figure", "refer to the figure",
                                            "can be identified by", "cannot be determined", "not specified"};

std::string mock_grounding(const BackendRequest& r) {
  const auto& answer = slot(r, "answer");
  for (auto p : kNonAnswers)
    if (text::contains_icase(answer, p))
      return json{{"grounded", false}, {"reason", "non-answer phrase"}}.dump();
  const auto answer_tokens = text::content_tokens(answer);
  auto support = text::content_tokens(slot(r, "source_text"));
  const auto cap = text::content_tokens(slot(r, "caption"));
  support.insert(cap.begin(), cap.end());
  std::size_t hit = 0;
  for (const auto& t : answer_tokens) hit += support.count(t);
  const double coverage = answer_tokens.empty() ? 0.0 : static_cast<double>(hit) / answer_tokens.size();
  const bool grounded = coverage >= 0.8;
  return json{{"grounded", grounded},
              {"reason", grounded ? "claims traceable to the source text" : "claims not found in the source text"}}
      .dump();
}

std::string mock_rephrase(const BackendRequest& r) {
  int n = std::atoi(slot(r, "n_variants").c_str());
  const auto& question = slot(r, "question");
  const auto& answer = slot(r, "answer");
  std::string core = question;
  if (!core.empty() && core.back() == '?') core.pop_back();
  if (!core.empty()) core[0] = static_cast<char>(std::tolower(static_cast<unsigned char>(core[0])));

  const auto sentences = text::split_sentences(answer);
  std::string concise;
  for (const auto& s : sentences) {
    if (text::word_count(concise) >= 20) break;
    concise += (concise.empty() ? "" : " ") + s;
  }
  concise = first_words(concise, 30);

  std::string detailed = answer;
  for (const auto& s : text::split_sentences(slot(r, "source_excerpt"))) {
    if (text::word_count(detailed) >= 60) break;
    if (answer.find(s) == std::string::npos) detailed += " " + s;
  }
  detailed = first_words(detailed, 80);
  if (util::stable_u64(question) % 10 == 0) detailed = "This can be identified by looking at the figure.";

  json out = json::array();
  for (int i = 0; i < n; ++i) {
    if (i % 2 == 0)
      out.push_back({{"question", "Could you explain, based on the figure, " + core + "?"}, {"answer", concise}});
    else
      out.push_back({{"question", "What explains what is raised here: " + core + "?"}, {"answer", detailed}});
  }
  return out.dump(2);
}

std::string mock_judge(const BackendRequest& r) {
  const std::uint64_t h = util::stable_u64(slot(r, "question") + "\x1f" + slot(r, "answer"));
  static const char* grammar[] = {"perfect", "perfect", "minor", "major"};
  static const char* salience[] = {"very", "somewhat", "very", "not"};
  static const char* quality[] = {"4", "3", "3", "2", "1"};
  static const char* correct[] = {"yes", "yes", "partial", "no"};
  static const char* useful[] = {"essential", "helpful", "not"};
  static const char* byfig[] = {"yes", "no"};
  static const char* ftype[] = {"result", "data", "method", "comparison", "other"};
  return json{{"q-grammar", grammar[h % 4]},
              {"salience", salience[(h >> 2) % 4]},
              {"answer_quality", quality[(h >> 4) % 5]},
              {"answer-correct", correct[(h >> 7) % 4]},
              {"figure-useful", useful[(h >> 9) % 3]},
              {"answered-by-figure", byfig[(h >> 11) % 2]},
              {"figure-type", ftype[(h >> 12) % 5]},
              {"notes", "mock judge"}}
      .dump();
}

}  // namespace

std::string MockBackend::complete(const BackendRequest& request) {
  render(request);
  switch (request.template_id) {
    case TemplateId::qud_generate: return mock_generate(request);
    case TemplateId::rephrase: return mock_rephrase(request);
    case TemplateId::grounding_check: return mock_grounding(request);
    case TemplateId::judge: return mock_judge(request);
  }
  throw Error(ErrorKind::BackendUnavailable, "mock: unknown template");
}

// ---------------------------------------------------------------------------

std::string ReplayBackend::complete(const BackendRequest& request) {
  const auto key = request_key(request);
  auto hit = cache_.get("chat", key);
  if (!hit) throw Error(ErrorKind::BackendUnavailable, "replay cache miss for " + key);
  return hit->get<std::string>();
}

std::string RecordingBackend::complete(const BackendRequest& request) {
  auto reply = inner_.complete(request);
  cache_.put("chat", request_key(request), canonical(request), reply);
  return reply;
}

std::string ThrottledBackend::complete(const BackendRequest& request) {
  auto slot = throttle_.acquire();
  return inner_.complete(request);
}

LiveBackend::LiveBackend(LiveConfig config, ImageResolver images)
    : config_(std::move(config)), images_(std::move(images)) {}

json post_json(const LiveConfig& config, const std::string& path, const json& body) {
  httplib::Client client(config.base_url);
  client.set_connection_timeout(config.timeout_seconds);
  client.set_read_timeout(config.timeout_seconds);
  httplib::Headers headers;
  if (const char* key = std::getenv(config.api_key_env.c_str()); key && *key)
    headers.emplace("Authorization", std::string("Bearer ") + key);
  auto res = client.Post(path, headers, body.dump(), "application/json");
  if (!res) throw Error(ErrorKind::BackendUnavailable, config.base_url + path + ": " + httplib::to_string(res.error()));
  if (res->status < 200 || res->status >= 300)
    throw Error(ErrorKind::BackendUnavailable, config.base_url + path + ": HTTP " + std::to_string(res->status));
  auto parsed = json::parse(res->body, nullptr, false);
  if (parsed.is_discarded()) throw Error(ErrorKind::UnparseableResponse, config.base_url + path + ": body is not JSON");
  return parsed;
}

std::string LiveBackend::complete(const BackendRequest& request) {
  json images = json::array();
  for (const auto& ref : request.image_refs) {
    auto bytes = images_ ? images_(ref) : std::nullopt;
    if (!bytes) throw Error(ErrorKind::BackendUnavailable, "image asset " + ref + " not found");
    images.push_back(util::base64_encode(*bytes));
  }
  json body = {{"template_id", to_string(request.template_id)},
               {"rendered_prompt", render(request)},
               {"images", images},
               {"decoding", request.decoding}};
  auto reply = post_json(config_, "/chat", body);
  if (!reply.contains("text") || !reply["text"].is_string())
    throw Error(ErrorKind::UnparseableResponse, "/chat reply has no text field");
  return reply["text"].get<std::string>();
}

}  // namespace mqud::backend
