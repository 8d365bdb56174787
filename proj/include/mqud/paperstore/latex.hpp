#pragma once

#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <string_view>

#include "mqud/paperstore/paper.hpp"

namespace mqud::paperstore {

/// Removes TeX comments: an unescaped '%' discards the rest of the line
/// including the newline. comment environments are dropped too.
std::string strip_comments(std::string_view tex);

/// Plain-text rendering of a LaTeX fragment: formatting commands unwrap to
/// their argument, citations/labels/footnotes vanish, braces are removed and
/// whitespace collapses. Math is kept verbatim.
std::string latex_to_text(std::string_view tex);

/// Reads a file relative to the paper directory; nullopt when unreadable.
using FileLoader = std::function<std::optional<std::string>(const std::string& relative_path)>;

/// Parses an already-loaded main file. \input/\include are expanded through
/// `load`. Section/figure structure only; eligibility is not marked.
PaperRecord parse_paper_text(const std::string& paper_id, std::string_view main_tex,
                             const FileLoader& load,
                             const std::function<bool(const std::string&)>& file_exists = {});

/// Picks the main file of a source directory, expands it and parses it.
/// Reads an optional meta.json ({"paper_id", "domain"}) from the directory.
PaperRecord parse_paper(const std::filesystem::path& source_dir);

/// Stable slug for a directory name: lowercase alphanumerics joined by '-'.
std::string slugify(std::string_view name);

}  // namespace mqud::paperstore
