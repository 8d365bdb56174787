#pragma once

#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

namespace mqud::backend {

using nlohmann::json;

enum class TemplateId { qud_generate, rephrase, grounding_check, judge };

std::string_view to_string(TemplateId id);
std::optional<TemplateId> template_from_string(std::string_view s);

/// Raw template text with `{slot}` placeholders.
std::string_view template_text(TemplateId id);

/// Slot names the template uses, sorted.
std::vector<std::string> template_slots(TemplateId id);

struct BackendRequest {
  TemplateId template_id = TemplateId::qud_generate;
  std::map<std::string, std::string> text_slots;
  std::vector<std::string> image_refs;  // asset hashes
  json decoding = json::object();       // temperature, max_tokens
  // Appended after the rendered template on a re-ask; empty on first ask.
  std::string retry_note;
};

/// Fills the template. Throws InvariantViolation on a missing or extra slot.
std::string render(const BackendRequest& request);

/// Canonical JSON of the request (template, slots, images, decoding, note).
json canonical(const BackendRequest& request);

/// Cache key: content hash of the canonical request.
std::string request_key(const BackendRequest& request);

/// Default decoding settings: temperature 0.7 for generation and
/// rephrasing, 0 for grounding and judging.
json default_decoding(TemplateId id);

/// Extracts the first JSON value from a model reply, tolerating code fences
/// and leading prose. nullopt when nothing parses.
std::optional<json> parse_json_reply(std::string_view text);

}  // namespace mqud::backend
