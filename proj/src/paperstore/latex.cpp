#include "mqud/paperstore/latex.hpp"

#include <algorithm>
#include <cctype>
#include <map>
#include <set>

#include <spdlog/spdlog.h>

#include "mqud/util/error.hpp"
#include "mqud/util/jsonl.hpp"
#include "mqud/util/text.hpp"

namespace mqud::paperstore {

namespace fs = std::filesystem;

namespace {

constexpr int kMaxIncludeDepth = 16;

bool is_letter(char c) { return std::isalpha(static_cast<unsigned char>(c)) != 0; }
bool is_space(char c) { return std::isspace(static_cast<unsigned char>(c)) != 0; }

bool is_escaped(std::string_view s, std::size_t i) {
  std::size_t n = 0;
  while (i > 0 && s[i - 1] == '\\') {
    ++n;
    --i;
  }
  return n % 2 == 1;
}

std::size_t skip_spaces(std::string_view s, std::size_t pos) {
  while (pos < s.size() && is_space(s[pos])) ++pos;
  return pos;
}

// Position just past a balanced [...] if one starts at pos (after spaces).
std::size_t skip_optional_arg(std::string_view s, std::size_t pos) {
  std::size_t p = skip_spaces(s, pos);
  if (p >= s.size() || s[p] != '[') return pos;
  int depth = 0;
  for (std::size_t i = p; i < s.size(); ++i) {
    if (is_escaped(s, i)) continue;
    if (s[i] == '{') ++depth;
    if (s[i] == '}') --depth;
    if (s[i] == ']' && depth == 0) return i + 1;
  }
  return pos;
}

struct Group {
  std::size_t content_begin;
  std::size_t close;  // index of the closing brace
};

std::optional<Group> read_group(std::string_view s, std::size_t pos) {
  std::size_t p = skip_spaces(s, pos);
  if (p >= s.size() || s[p] != '{') return std::nullopt;
  int depth = 0;
  for (std::size_t i = p; i < s.size(); ++i) {
    if (is_escaped(s, i)) continue;
    if (s[i] == '{') ++depth;
    if (s[i] == '}' && --depth == 0) return Group{p + 1, i};
  }
  return std::nullopt;
}

std::string_view group_text(std::string_view s, const Group& g) {
  return s.substr(g.content_begin, g.close - g.content_begin);
}

// Finds "\name" where the name is not a prefix of a longer control word.
std::size_t find_command(std::string_view s, std::string_view name, std::size_t from = 0) {
  const std::string needle = "\\" + std::string(name);
  for (std::size_t p = s.find(needle, from); p != std::string_view::npos; p = s.find(needle, p + 1)) {
    if (is_escaped(s, p)) continue;
    const std::size_t after = p + needle.size();
    if (after < s.size() && is_letter(s[after])) continue;
    return p;
  }
  return std::string_view::npos;
}

struct EnvSpan {
  std::size_t begin;       // start of \begin{name}
  std::size_t body_begin;  // just past \begin{name}
  std::size_t body_end;    // start of \end{name}
  std::size_t end;         // just past \end{name}
};

std::optional<EnvSpan> find_env(std::string_view s, std::string_view name, std::size_t from = 0) {
  const std::string open = "\\begin{" + std::string(name) + "}";
  const std::string close = "\\end{" + std::string(name) + "}";
  const std::size_t b = s.find(open, from);
  if (b == std::string_view::npos) return std::nullopt;
  int depth = 1;
  std::size_t p = b + open.size();
  while (true) {
    const std::size_t next_open = s.find(open, p);
    const std::size_t next_close = s.find(close, p);
    if (next_close == std::string_view::npos) return EnvSpan{b, b + open.size(), std::string_view::npos, std::string_view::npos};
    if (next_open != std::string_view::npos && next_open < next_close) {
      ++depth;
      p = next_open + open.size();
      continue;
    }
    if (--depth == 0) return EnvSpan{b, b + open.size(), next_close, next_close + close.size()};
    p = next_close + close.size();
  }
}

const std::set<std::string, std::less<>> kDropWithArgs = {
    "label",       "cite",         "citep",      "citet",       "citealp",   "citealt",
    "citeauthor",  "citeyear",     "citeyearpar", "parencite",  "textcite",  "footnote",
    "footnotemark", "footnotetext", "vspace",    "hspace",      "includegraphics",
    "bibliography", "bibliographystyle", "thanks", "input",     "include",   "newcommand",
    "renewcommand", "providecommand", "setlength", "addtolength", "begin",   "end",
    "resizebox",   "scalebox",     "graphicspath", "usepackage", "documentclass",
    "captionsetup", "todo",        "color",     "definecolor",  "pagestyle",  "thispagestyle",
};

const std::set<std::string, std::less<>> kFigureEnvs = {"figure", "figure*", "wrapfigure",
                                                        "wrapfigure*", "SCfigure"};
const std::set<std::string, std::less<>> kDroppedEnvs = {
    "table",   "table*",    "algorithm", "algorithm*",    "lstlisting", "verbatim",
    "tabular", "tabular*",  "comment",   "thebibliography", "minted",  "tikzpicture"};

const std::set<std::string, std::less<>> kRefCommands = {"ref",    "cref",    "Cref",   "autoref", "Autoref",
                                                         "figref", "Figref",  "subref", "vref",    "cpageref"};

// Skip a command's star, optional args and (when drop_groups) its braced args.
std::size_t consume_command_tail(std::string_view s, std::size_t pos, bool drop_groups) {
  if (pos < s.size() && s[pos] == '*') ++pos;
  std::size_t p = skip_optional_arg(s, pos);
  if (!drop_groups) return p;
  while (true) {
    const std::size_t q = skip_optional_arg(s, p);
    auto g = read_group(s, q);
    if (!g) return q;
    p = g->close + 1;
  }
}

}  // namespace

std::string strip_comments(std::string_view tex) {
  std::string out;
  out.reserve(tex.size());
  std::size_t i = 0;
  while (i < tex.size()) {
    const char c = tex[i];
    if (c == '%' && !is_escaped(tex, i)) {
      const std::size_t nl = tex.find('\n', i);
      if (nl == std::string_view::npos) break;
      i = nl + 1;
      while (i < tex.size() && (tex[i] == ' ' || tex[i] == '\t')) ++i;
      continue;
    }
    out.push_back(c);
    ++i;
  }
  // comment environments
  while (auto env = find_env(out, "comment")) {
    if (env->end == std::string::npos) {
      out.erase(env->begin);
      break;
    }
    out.erase(env->begin, env->end - env->begin);
  }
  return out;
}

std::string latex_to_text(std::string_view s) {
  std::string out;
  out.reserve(s.size());
  std::size_t i = 0;
  while (i < s.size()) {
    const char c = s[i];
    if (c == '\\' && i + 1 < s.size()) {
      const char n = s[i + 1];
      if (!is_letter(n)) {
        switch (n) {
          case '\\': case ',': case ';': case '!': case ' ': out.push_back(' '); break;
          case '%': case '&': case '_': case '#': case '$': case '{': case '}': out.push_back(n); break;
          default: break;
        }
        i += 2;
        continue;
      }
      std::size_t j = i + 1;
      while (j < s.size() && is_letter(s[j])) ++j;
      const std::string_view name = s.substr(i + 1, j - i - 1);
      if (name == "ldots" || name == "dots") {
        out += "...";
        i = j;
      } else if (name == "item") {
        out.push_back(' ');
        i = skip_optional_arg(s, j);
      } else if (name == "href") {
        std::size_t p = j;
        if (auto url = read_group(s, p)) p = url->close + 1;
        i = p;  // second group is kept as text
      } else if (kDropWithArgs.count(name)) {
        i = consume_command_tail(s, j, true);
      } else {
        i = consume_command_tail(s, j, false);
        out.push_back(' ');
      }
      continue;
    }
    if (c == '{' || c == '}') {
      ++i;
      continue;
    }
    if (c == '~') {
      out.push_back(' ');
      ++i;
      continue;
    }
    if ((c == '`' || c == '\'') && i + 1 < s.size() && s[i + 1] == c) {
      out.push_back('"');
      i += 2;
      continue;
    }
    out.push_back(c);
    ++i;
  }
  // Fix spacing left by dropped commands before punctuation.
  std::string collapsed = text::collapse_whitespace(out);
  std::string fixed;
  fixed.reserve(collapsed.size());
  for (std::size_t k = 0; k < collapsed.size(); ++k) {
    const char ch = collapsed[k];
    if (ch == ' ' && k + 1 < collapsed.size() &&
        (collapsed[k + 1] == '.' || collapsed[k + 1] == ',' || collapsed[k + 1] == ';' ||
         collapsed[k + 1] == ':' || collapsed[k + 1] == ')'))
      continue;
    fixed.push_back(ch);
  }
  return fixed;
}

std::string slugify(std::string_view name) {
  std::string out;
  bool dash = false;
  for (char c : name) {
    if (std::isalnum(static_cast<unsigned char>(c))) {
      if (dash && !out.empty()) out.push_back('-');
      dash = false;
      out.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(c))));
    } else {
      dash = true;
    }
  }
  return out;
}

namespace {

class Parser {
 public:
  Parser(std::string paper_id, const FileLoader& load, const std::function<bool(const std::string&)>& exists)
      : load_(load), exists_(exists) {
    paper_.paper_id = std::move(paper_id);
  }

  PaperRecord run(std::string_view main_tex) {
    std::set<std::string> visiting;
    const std::string full = expand(strip_comments(main_tex), 0, visiting);
    read_graphicspath(full);

    const std::size_t doc_begin = full.find("\\begin{document}");
    const std::size_t doc_end = full.find("\\end{document}");
    const std::size_t body_start = doc_begin == std::string::npos ? 0 : doc_begin + 16;
    const std::size_t body_stop = doc_end == std::string::npos ? full.size() : doc_end;
    std::string body = full.substr(body_start, body_stop > body_start ? body_stop - body_start : 0);

    extract_title(full);
    extract_abstract(body);
    split_sections(body);
    extract_figures();
    build_paragraphs();
    finalize_captions();
    compute_reference_counts(paper_);
    return std::move(paper_);
  }

 private:
  struct RawSection {
    std::string title;
    bool appendix = false;
    std::string body;
  };
  struct RawFigure {
    std::string label;
    std::string raw_caption;
    std::string image_path;
    int section = 0;
  };

  void warn(const std::string& msg) {
    spdlog::warn("[{}] {}", paper_.paper_id, msg);
    paper_.warnings.push_back(msg);
  }

  std::string expand(const std::string& tex, int depth, std::set<std::string>& visiting) {
    std::string out;
    std::size_t pos = 0;
    while (true) {
      std::size_t best = std::string::npos;
      std::size_t name_len = 0;
      for (std::string_view cmd : {"input", "include", "subfile"}) {
        const std::size_t p = find_command(tex, cmd, pos);
        if (p < best) {
          best = p;
          name_len = cmd.size() + 1;
        }
      }
      if (best == std::string::npos) break;
      out.append(tex, pos, best - pos);
      auto g = read_group(tex, best + name_len);
      if (!g) {
        warn("malformed \\input near offset " + std::to_string(best));
        pos = best + name_len;
        continue;
      }
      const std::string target{text::trim(group_text(tex, *g))};
      pos = g->close + 1;
      if (depth >= kMaxIncludeDepth || visiting.count(target)) {
        warn("include cycle or depth limit at '" + target + "'");
        continue;
      }
      std::optional<std::string> content;
      for (const std::string& candidate : {target + ".tex", target}) {
        if ((content = load_(candidate))) break;
      }
      if (!content) {
        warn("unresolved include '" + target + "'");
        continue;
      }
      visiting.insert(target);
      out.push_back('\n');
      out += expand(strip_comments(*content), depth + 1, visiting);
      out.push_back('\n');
      visiting.erase(target);
    }
    out.append(tex, pos, std::string::npos);
    return out;
  }

  void read_graphicspath(const std::string& tex) {
    const std::size_t p = find_command(tex, "graphicspath");
    if (p == std::string::npos) return;
    auto outer = read_group(tex, p + 13);
    if (!outer) return;
    std::string_view inner = group_text(tex, *outer);
    std::size_t q = 0;
    while (auto g = read_group(inner, q)) {
      graphics_dirs_.emplace_back(group_text(inner, *g));
      q = g->close + 1;
    }
  }

  void extract_title(const std::string& tex) {
    const std::size_t p = find_command(tex, "title");
    if (p != std::string::npos) {
      const std::size_t after = skip_optional_arg(tex, p + 6);
      if (auto g = read_group(tex, after)) paper_.title = latex_to_text(group_text(tex, *g));
    }
    if (paper_.title.empty()) {
      warn("no \\title found; using paper_id as title");
      paper_.title = paper_.paper_id;
    }
  }

  void extract_abstract(std::string& body) {
    if (auto env = find_env(body, "abstract"); env && env->end != std::string::npos) {
      paper_.abstract = latex_to_text(std::string_view(body).substr(env->body_begin, env->body_end - env->body_begin));
      body.erase(env->begin, env->end - env->begin);
    } else if (const std::size_t p = find_command(body, "abstract"); p != std::string::npos) {
      if (auto g = read_group(body, p + 9)) {
        paper_.abstract = latex_to_text(group_text(body, *g));
        body.erase(p, g->close + 1 - p);
      }
    }
    if (paper_.abstract.empty()) throw Error(ErrorKind::MissingAbstract, paper_.paper_id + ": no abstract");
  }

  void split_sections(const std::string& body) {
    struct Marker {
      std::size_t pos;
      std::size_t end;  // position after the marker (and title)
      bool is_section;
      std::string title;
    };
    std::vector<Marker> markers;
    for (std::string_view cmd : {"section", "chapter"}) {
      for (std::size_t p = find_command(body, cmd); p != std::string::npos; p = find_command(body, cmd, p + 1)) {
        std::size_t q = p + cmd.size() + 1;
        if (q < body.size() && body[q] == '*') ++q;
        q = skip_optional_arg(body, q);
        auto g = read_group(body, q);
        if (!g) {
          warn("\\" + std::string(cmd) + " without title skipped");
          continue;
        }
        markers.push_back({p, g->close + 1, true, latex_to_text(group_text(body, *g))});
      }
    }
    for (std::size_t p = find_command(body, "appendix"); p != std::string::npos;
         p = find_command(body, "appendix", p + 1))
      markers.push_back({p, p + 9, false, {}});
    for (std::size_t p = body.find("\\begin{appendices}"); p != std::string::npos;
         p = body.find("\\begin{appendices}", p + 1))
      markers.push_back({p, p + 18, false, {}});
    std::sort(markers.begin(), markers.end(), [](const Marker& a, const Marker& b) { return a.pos < b.pos; });

    const std::size_t first = markers.empty() ? body.size() : markers.front().pos;
    RawSection front{"", false, body.substr(0, first)};
    bool appendix = false;
    std::vector<RawSection> sections;
    for (std::size_t k = 0; k < markers.size(); ++k) {
      const auto& m = markers[k];
      const std::size_t stop = k + 1 < markers.size() ? markers[k + 1].pos : body.size();
      if (!m.is_section) {
        appendix = true;
        // Text between an appendix switch and the next section belongs to the previous one.
        if (!sections.empty()) sections.back().body += body.substr(m.end, stop - m.end);
        continue;
      }
      if (text::starts_with_icase(m.title, "appendi")) appendix = true;
      sections.push_back({m.title, appendix, body.substr(m.end, stop - m.end)});
    }
    if (!text::trim(latex_to_text(front.body)).empty() || front.body.find("\\begin{figure") != std::string::npos)
      raw_sections_.push_back(std::move(front));
    for (auto& s : sections) raw_sections_.push_back(std::move(s));
  }

  std::string resolve_image(const std::string& raw) {
    if (!exists_) return raw;
    std::vector<std::string> dirs = {""};
    dirs.insert(dirs.end(), graphics_dirs_.begin(), graphics_dirs_.end());
    for (const auto& dir : dirs) {
      for (std::string_view ext : {"", ".png", ".pdf", ".jpg", ".jpeg", ".eps"}) {
        const std::string candidate = fs::path(dir + raw + std::string(ext)).lexically_normal().generic_string();
        if (exists_(candidate)) return candidate;
      }
    }
    warn("image '" + raw + "' not found in source tree");
    return raw;
  }

  // Parses one figure environment body; returns false when it has no caption.
  bool parse_figure(std::string_view env_body, int section, RawFigure& fig) {
    std::string top(env_body);
    std::vector<std::string> labels_top;
    std::vector<std::string> labels_all;
    // subfigures: keep their labels as aliases, hide their captions
    std::string stripped;
    {
      std::size_t pos = 0;
      while (auto sub = find_env(top, "subfigure", pos)) {
        if (sub->end == std::string::npos) break;
        stripped.append(top, pos, sub->begin - pos);
        const std::string_view inner = std::string_view(top).substr(sub->body_begin, sub->body_end - sub->body_begin);
        for (std::size_t p = find_command(inner, "label"); p != std::string::npos; p = find_command(inner, "label", p + 1))
          if (auto g = read_group(inner, p + 6)) labels_all.emplace_back(text::trim(group_text(inner, *g)));
        if (fig.image_path.empty()) {
          if (const std::size_t ig = find_command(inner, "includegraphics"); ig != std::string::npos) {
            std::size_t q = ig + 16;
            if (q < inner.size() && inner[q] == '*') ++q;
            if (auto g = read_group(inner, skip_optional_arg(inner, q))) fig.image_path = std::string(group_text(inner, *g));
          }
        }
        pos = sub->end;
      }
      stripped.append(top, pos, std::string::npos);
    }

    std::size_t caption_pos = std::string::npos;
    for (std::size_t p = find_command(stripped, "caption"); p != std::string::npos; p = find_command(stripped, "caption", p + 1)) {
      std::size_t q = p + 8;
      if (q < stripped.size() && stripped[q] == '*') ++q;
      q = skip_optional_arg(stripped, q);
      if (auto g = read_group(stripped, q)) {
        fig.raw_caption = std::string(group_text(stripped, *g));
        caption_pos = p;
      }
    }
    for (std::size_t p = find_command(stripped, "label"); p != std::string::npos; p = find_command(stripped, "label", p + 1)) {
      if (auto g = read_group(stripped, p + 6)) {
        std::string l{text::trim(group_text(stripped, *g))};
        if (caption_pos != std::string::npos && p > caption_pos && fig.label.empty()) fig.label = l;
        labels_top.push_back(std::move(l));
      }
    }
    if (fig.image_path.empty()) {
      if (const std::size_t ig = find_command(stripped, "includegraphics"); ig != std::string::npos) {
        std::size_t q = ig + 16;
        if (q < stripped.size() && stripped[q] == '*') ++q;
        if (auto g = read_group(stripped, skip_optional_arg(stripped, q))) fig.image_path = std::string(group_text(stripped, *g));
      }
    }
    if (fig.label.empty() && !labels_top.empty()) fig.label = labels_top.front();
    if (fig.label.empty() && !labels_all.empty()) fig.label = labels_all.front();
    fig.section = section;
    if (text::trim(latex_to_text(fig.raw_caption)).empty()) return false;
    if (fig.label.empty()) fig.label = "fig:unlabeled-" + std::to_string(raw_figures_.size() + 1);
    for (const auto& l : labels_top) aliases_.emplace(l, fig.label);
    for (const auto& l : labels_all) aliases_.emplace(l, fig.label);
    aliases_.emplace(fig.label, fig.label);
    if (!fig.image_path.empty()) fig.image_path = resolve_image(fig.image_path);
    return true;
  }

  void extract_figures() {
    for (std::size_t si = 0; si < raw_sections_.size(); ++si) {
      std::string& body = raw_sections_[si].body;
      std::string residual;
      std::size_t pos = 0;
      while (true) {
        const std::size_t b = body.find("\\begin{", pos);
        if (b == std::string::npos) break;
        auto g = read_group(body, b + 6);
        if (!g) {
          residual.append(body, pos, b + 7 - pos);
          pos = b + 7;
          continue;
        }
        const std::string name{group_text(body, *g)};
        const bool fig = kFigureEnvs.count(name) > 0;
        const bool drop = kDroppedEnvs.count(name) > 0;
        if (!fig && !drop) {
          residual.append(body, pos, g->close + 1 - pos);
          pos = g->close + 1;
          continue;
        }
        residual.append(body, pos, b - pos);
        auto env = find_env(body, name, b);
        if (!env || env->end == std::string::npos) {
          warn("unterminated " + name + " environment in section '" + raw_sections_[si].title + "' skipped");
          pos = g->close + 1;
          continue;
        }
        if (fig) {
          RawFigure f;
          const std::string_view inner = std::string_view(body).substr(env->body_begin, env->body_end - env->body_begin);
          if (parse_figure(inner, static_cast<int>(si), f))
            raw_figures_.push_back(std::move(f));
          else
            warn(name + " environment without caption in section '" + raw_sections_[si].title + "' skipped");
        }
        residual += "\n\n";
        pos = env->end;
      }
      residual.append(body, pos, std::string::npos);
      body = std::move(residual);
    }
    int number = 0;
    for (const auto& f : raw_figures_) numbers_[f.label] = ++number;
  }

  // Replaces reference commands with rendered figure numbers and collects
  // the cited figure labels.
  std::string render_refs(std::string_view s, std::vector<std::string>* cited) {
    std::string out;
    std::size_t i = 0;
    while (i < s.size()) {
      if (s[i] != '\\' || is_escaped(s, i)) {
        out.push_back(s[i++]);
        continue;
      }
      std::size_t j = i + 1;
      while (j < s.size() && is_letter(s[j])) ++j;
      const std::string name{s.substr(i + 1, j - i - 1)};
      if (!kRefCommands.count(name)) {
        out.append(s.substr(i, j - i));
        i = j;
        continue;
      }
      std::size_t q = j;
      if (q < s.size() && s[q] == '*') ++q;
      auto g = read_group(s, q);
      if (!g) {
        out.append(s.substr(i, j - i));
        i = j;
        continue;
      }
      std::vector<std::string> rendered;
      std::string list{group_text(s, *g)};
      std::size_t start = 0;
      while (start <= list.size()) {
        std::size_t comma = list.find(',', start);
        if (comma == std::string::npos) comma = list.size();
        const std::string label{text::trim(std::string_view(list).substr(start, comma - start))};
        start = comma + 1;
        if (label.empty()) continue;
        if (auto it = aliases_.find(label); it != aliases_.end()) {
          if (cited) cited->push_back(it->second);
          rendered.push_back(std::to_string(numbers_[it->second]));
        } else {
          if (cited && text::starts_with_icase(label, "fig")) {
            if (std::find(paper_.dangling_refs.begin(), paper_.dangling_refs.end(), label) == paper_.dangling_refs.end()) {
              paper_.dangling_refs.push_back(label);
              warn("dangling figure reference '" + label + "'");
            }
          }
          rendered.push_back("??");
        }
      }
      const bool named = name != "ref" && name != "subref" && name != "vref";
      if (named) out += rendered.size() > 1 ? "Figures " : "Figure ";
      for (std::size_t k = 0; k < rendered.size(); ++k) {
        if (k) out += (k + 1 == rendered.size()) ? " and " : ", ";
        out += rendered[k];
      }
      i = g->close + 1;
    }
    return out;
  }

  void build_paragraphs() {
    for (std::size_t si = 0; si < raw_sections_.size(); ++si) {
      const auto& raw = raw_sections_[si];
      SectionNode node;
      node.title = raw.title;
      node.ordinal = static_cast<int>(si);
      node.is_appendix = raw.appendix;

      std::string body = raw.body;
      // Subheadings break paragraphs; \paragraph{X} keeps X as a lead-in.
      for (std::string_view cmd : {"subsection", "subsubsection", "paragraph"}) {
        std::size_t p = 0;
        while ((p = find_command(body, cmd, p)) != std::string::npos) {
          std::size_t q = p + cmd.size() + 1;
          if (q < body.size() && body[q] == '*') ++q;
          q = skip_optional_arg(body, q);
          auto g = read_group(body, q);
          if (!g) {
            p += cmd.size() + 1;
            continue;
          }
          std::string replacement = "\n\n";
          if (cmd == "paragraph") replacement += std::string(group_text(body, *g)) + ". ";
          body.replace(p, g->close + 1 - p, replacement);
          p += replacement.size();
        }
      }
      for (std::size_t p = find_command(body, "par"); p != std::string::npos; p = find_command(body, "par", p))
        body.replace(p, 4, "\n\n");

      std::size_t start = 0;
      auto flush = [&](std::size_t stop) {
        std::vector<std::string> cited;
        const std::string rendered = render_refs(std::string_view(body).substr(start, stop - start), &cited);
        std::string t = latex_to_text(rendered);
        if (!t.empty()) node.paragraphs.push_back({std::move(t), std::move(cited)});
      };
      for (std::size_t i = 0; i < body.size(); ++i) {
        if (body[i] != '\n') continue;
        std::size_t k = i + 1;
        while (k < body.size() && (body[k] == ' ' || body[k] == '\t' || body[k] == '\r')) ++k;
        if (k < body.size() && body[k] == '\n') {
          flush(i);
          while (k < body.size() && is_space(body[k])) ++k;
          start = k;
          i = k - 1;
        }
      }
      flush(body.size());
      paper_.sections.push_back(std::move(node));
    }
  }

  void finalize_captions() {
    for (const auto& raw : raw_figures_) {
      FigureUnit f;
      f.label = raw.label;
      f.caption = latex_to_text(render_refs(raw.raw_caption, nullptr));
      f.image_path = raw.image_path;
      f.number = numbers_[raw.label];
      f.declared_in_section = raw.section;
      if (paper_.find_figure(f.label)) {
        warn("duplicate figure label '" + f.label + "'; later figure skipped");
        continue;
      }
      paper_.figures.push_back(std::move(f));
    }
  }

  const FileLoader& load_;
  const std::function<bool(const std::string&)>& exists_;
  PaperRecord paper_;
  std::vector<std::string> graphics_dirs_;
  std::vector<RawSection> raw_sections_;
  std::vector<RawFigure> raw_figures_;
  std::map<std::string, std::string> aliases_;
  std::map<std::string, int> numbers_;
};

}  // namespace

PaperRecord parse_paper_text(const std::string& paper_id, std::string_view main_tex, const FileLoader& load,
                             const std::function<bool(const std::string&)>& file_exists) {
  Parser parser(paper_id, load, file_exists);
  return parser.run(main_tex);
}

PaperRecord parse_paper(const fs::path& source_dir) {
  std::error_code ec;
  if (!fs::is_directory(source_dir, ec))
    throw Error(ErrorKind::UnreadableSource, source_dir.string() + " is not a readable directory");

  std::vector<fs::path> tex_files;
  for (const auto& entry : fs::directory_iterator(source_dir, ec)) {
    if (entry.is_regular_file() && entry.path().extension() == ".tex") tex_files.push_back(entry.path());
  }
  if (ec) throw Error(ErrorKind::UnreadableSource, source_dir.string() + ": " + ec.message());
  std::sort(tex_files.begin(), tex_files.end());

  fs::path main_file;
  int best_score = -1;
  for (const auto& p : tex_files) {
    const std::string content = strip_comments(util::read_text_file(p));
    if (content.find("\\documentclass") == std::string::npos) continue;
    int score = 1;
    if (content.find("\\begin{document}") != std::string::npos) score += 2;
    const std::string stem = p.stem().string();
    if (stem == "main" || stem == "ms" || stem == "paper") score += 1;
    if (score > best_score) {
      best_score = score;
      main_file = p;
    }
  }
  if (main_file.empty()) throw Error(ErrorKind::NoMainFile, source_dir.string() + ": no file with \\documentclass");

  std::string paper_id = slugify(source_dir.filename().string());
  paperstore::DomainTag domain = DomainTag::other;
  if (const fs::path meta = source_dir / "meta.json"; fs::exists(meta)) {
    const auto j = nlohmann::json::parse(util::read_text_file(meta));
    if (j.contains("paper_id")) paper_id = j["paper_id"].get<std::string>();
    if (j.contains("domain")) domain = domain_from_string(j["domain"].get<std::string>());
  }
  if (paper_id.empty()) throw Error(ErrorKind::InvariantViolation, source_dir.string() + ": empty paper_id");

  const fs::path root = source_dir;
  FileLoader loader = [root](const std::string& rel) -> std::optional<std::string> {
    const fs::path p = root / rel;
    std::error_code e;
    if (!fs::is_regular_file(p, e)) return std::nullopt;
    try {
      return util::read_text_file(p);
    } catch (const Error&) {
      return std::nullopt;
    }
  };
  std::function<bool(const std::string&)> exists = [root](const std::string& rel) {
    std::error_code e;
    return fs::is_regular_file(root / rel, e);
  };
  PaperRecord paper = parse_paper_text(paper_id, util::read_text_file(main_file), loader, exists);
  paper.domain_tag = domain;
  return paper;
}

}  // namespace mqud::paperstore
