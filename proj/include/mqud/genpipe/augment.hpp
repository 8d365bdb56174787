#pragma once

#include <string>
#include <vector>

#include "mqud/backend/chat.hpp"
#include "mqud/corpus/types.hpp"

namespace mqud::genpipe {

struct AugmentOptions {
  backend::json decoding = backend::default_decoding(backend::TemplateId::rephrase);
  backend::json grounding_decoding = backend::default_decoding(backend::TemplateId::grounding_check);
};

struct AugmentResult {
  std::vector<corpus::QudRecord> accepted;  // grounded = true
  std::vector<corpus::QudRecord> rejected;  // grounded = false (VariantRejected)
  std::vector<std::string> log;
};

/// True when the answer is a stock non-answer that points at the figure
/// instead of saying something.
bool is_non_answer(const std::string& answer);

/// Requests n rephrased variants of an accepted QUD and grounds each one.
/// n = 0 returns nothing without calling the backend. Rejections are
/// logged as VariantRejected, never thrown.
AugmentResult rephrase_augment(backend::ChatBackend& backend, const corpus::QudRecord& record, int n_variants = 2,
                               const AugmentOptions& options = {});

}  // namespace mqud::genpipe
