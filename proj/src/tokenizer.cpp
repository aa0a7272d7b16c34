#include "cspo/tokenizer.hpp"

#include <algorithm>
#include <array>

namespace cspo {
namespace {

bool is_space(char c) {
  return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\f' || c == '\v';
}

bool is_special(char c) {
  switch (c) {
    case '\\': case '{': case '}': case '[': case ']':
    case '&': case '|': case '$': case '%':
      return true;
    default:
      return false;
  }
}

bool is_letter(char c) {
  return (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z');
}

std::size_t utf8_length(unsigned char lead) {
  if (lead < 0x80) return 1;
  if ((lead >> 5) == 0x6) return 2;
  if ((lead >> 4) == 0xE) return 3;
  if ((lead >> 3) == 0x1E) return 4;
  return 1;
}

bool is_tabular_env(std::string_view name) {
  static constexpr std::array<std::string_view, 9> kNames = {
      "tabular", "tabular*", "tabularx", "tabulary", "array",
      "longtable", "longtable*", "supertabular", "xtabular",
  };
  return std::find(kNames.begin(), kNames.end(), name) != kNames.end();
}

bool env_takes_width(std::string_view name) {
  return name == "tabular*" || name == "tabularx" || name == "tabulary";
}

// Column-spec tokens after which a brace group holds free text (a width or
// an inserted declaration) rather than further column letters.
bool opens_plain_group(std::string_view prev) {
  return prev == "p" || prev == "m" || prev == "b" || prev == "w" || prev == "W" ||
         prev == "@" || prev == "!" || prev == ">" || prev == "<";
}

class Tokenizer {
 public:
  explicit Tokenizer(std::string_view source) : src_(source) {}

  std::vector<Token> run() {
    std::size_t i = 0;
    const std::size_t n = src_.size();
    while (i < n) {
      if (is_space(src_[i])) {
        ++i;
        continue;
      }
      const std::size_t end = scan(i);
      emit(i, end);
      i = end;
    }
    return std::move(out_);
  }

 private:
  bool in_plain_colspec() const { return colspec_depth_ > 0 && plain_depth_ > 0; }
  bool in_colspec_letters() const { return colspec_depth_ > 0 && plain_depth_ == 0; }

  std::size_t scan(std::size_t i) const {
    const std::size_t n = src_.size();
    const char c = src_[i];
    if (c == '\\') {
      if (i + 1 >= n) return i + 1;
      if (is_letter(src_[i + 1])) {
        std::size_t j = i + 1;
        while (j < n && is_letter(src_[j])) ++j;
        if (j < n && src_[j] == '*') ++j;
        return j;
      }
      return std::min(n, i + 1 + utf8_length(static_cast<unsigned char>(src_[i + 1])));
    }
    if (c == '%') {
      std::size_t j = i;
      while (j < n && src_[j] != '\n') ++j;
      return j;
    }
    if (is_special(c)) return i + 1;
    if (in_colspec_letters()) {
      return std::min(n, i + utf8_length(static_cast<unsigned char>(c)));
    }
    std::size_t j = i;
    while (j < n && !is_space(src_[j]) && !is_special(src_[j])) ++j;
    return j;
  }

  void emit(std::size_t begin, std::size_t end) {
    Token tok;
    tok.text = std::string(src_.substr(begin, end - begin));
    tok.begin = begin;
    tok.end = end;
    tok.index = out_.size();
    const std::string text = tok.text;
    out_.push_back(std::move(tok));
    update_state(text);
  }

  void update_state(const std::string& text) {
    if (colspec_depth_ > 0) {
      update_colspec(text);
      return;
    }
    if (pending_) {
      update_pending(text);
      return;
    }
    if (text == "\\multicolumn") {
      arm_pending(1);
      return;
    }
    // `\begin { name }` with a tabular-family name arms the column spec.
    if (text == "}" && out_.size() >= 4) {
      const auto k = out_.size();
      if (out_[k - 4].text == "\\begin" && out_[k - 3].text == "{" &&
          is_tabular_env(out_[k - 2].text)) {
        arm_pending(env_takes_width(out_[k - 2].text) ? 1 : 0);
      }
    }
  }

  void arm_pending(int skip_groups) {
    pending_ = true;
    skip_groups_ = skip_groups;
    skip_depth_ = 0;
    in_bracket_ = false;
  }

  void update_pending(const std::string& text) {
    if (skip_depth_ > 0) {
      if (text == "{") ++skip_depth_;
      if (text == "}" && --skip_depth_ == 0) --skip_groups_;
      return;
    }
    if (in_bracket_) {
      if (text == "]") in_bracket_ = false;
      return;
    }
    if (text == "[") {
      in_bracket_ = true;
      return;
    }
    if (text == "{") {
      if (skip_groups_ > 0) {
        skip_depth_ = 1;
        return;
      }
      pending_ = false;
      colspec_depth_ = 1;
      plain_depth_ = 0;
      return;
    }
    if (text.starts_with("%")) return;
    pending_ = false;
  }

  void update_colspec(const std::string& text) {
    if (text == "{") {
      ++colspec_depth_;
      if (plain_depth_ == 0 && opens_plain_group(prev_colspec_)) plain_depth_ = colspec_depth_;
    } else if (text == "}") {
      if (plain_depth_ == colspec_depth_) plain_depth_ = 0;
      --colspec_depth_;
    }
    prev_colspec_ = text;
    if (colspec_depth_ == 0) prev_colspec_.clear();
  }

  std::string_view src_;
  std::vector<Token> out_;

  bool pending_ = false;
  int skip_groups_ = 0;
  int skip_depth_ = 0;
  bool in_bracket_ = false;

  int colspec_depth_ = 0;
  int plain_depth_ = 0;
  std::string prev_colspec_;
};

}  // namespace

std::string_view TokenSequence::gap_before(std::size_t i) const {
  const std::size_t from = i == 0 ? 0 : tokens[i - 1].end;
  const std::size_t to = i < tokens.size() ? tokens[i].begin : source.size();
  return std::string_view(source).substr(from, to - from);
}

std::string TokenSequence::reconstruct() const {
  std::string out;
  out.reserve(source.size());
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    out.append(gap_before(i));
    out.append(tokens[i].text);
  }
  out.append(gap_before(tokens.size()));
  return out;
}

TokenSequence tokenize(std::string_view source) {
  TokenSequence seq;
  seq.source = std::string(source);
  seq.tokens = Tokenizer(seq.source).run();
  return seq;
}

}  // namespace cspo
