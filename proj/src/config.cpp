#include "aggdiff/config.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <sstream>

#include "aggdiff/error.hpp"
#include "aggdiff/numerics.hpp"

namespace aggdiff::config {

namespace {

std::string trim(const std::string& s) {
  auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

std::optional<double> parse_number(const std::string& raw) {
  std::string s = trim(raw);
  double factor = 1.0;
  for (const char* suffix : {"*pi", "pi"}) {
    std::string suf = suffix;
    if (s.size() > suf.size() && s.compare(s.size() - suf.size(), suf.size(), suf) == 0) {
      s = trim(s.substr(0, s.size() - suf.size()));
      factor = numerics::pi;
      break;
    }
  }
  if (s.empty()) return std::nullopt;
  if (auto slash = s.find('/'); slash != std::string::npos) {
    auto num = parse_number(s.substr(0, slash));
    auto den = parse_number(s.substr(slash + 1));
    if (!num || !den || *den == 0.0) return std::nullopt;
    return factor * *num / *den;
  }
  char* end = nullptr;
  double v = std::strtod(s.c_str(), &end);
  if (end != s.c_str() + s.size() || !std::isfinite(v)) return std::nullopt;
  return v * factor;
}

class Parser {
 public:
  Parser(const std::string& text, int line, const std::string& origin) : s_(text), line_(line), origin_(origin) {}

  Value value() {
    skip();
    require_more("value");
    char c = s_[pos_];
    if (c == '"') return {string_literal(), line_};
    if (c == '[') return {list(), line_};
    if (c == '{') return {table(), line_};
    std::string tok = bare();
    if (tok.empty()) error("empty value");
    if (auto v = parse_number(tok)) return {*v, line_};
    return {tok, line_};
  }

  void finish() {
    skip();
    if (pos_ != s_.size()) error("unexpected trailing text '" + s_.substr(pos_) + "'");
  }

 private:
  [[noreturn]] void error(const std::string& what) const {
    fail(ErrorCode::config, origin_ + ":" + std::to_string(line_) + ": " + what);
  }
  void skip() {
    while (pos_ < s_.size() && std::isspace(static_cast<unsigned char>(s_[pos_]))) ++pos_;
  }
  void require_more(const char* what) const {
    if (pos_ >= s_.size()) error(std::string("missing ") + what);
  }
  std::string string_literal() {
    ++pos_;
    auto close = s_.find('"', pos_);
    if (close == std::string::npos) error("unterminated string");
    std::string out = s_.substr(pos_, close - pos_);
    pos_ = close + 1;
    return out;
  }
  std::string bare() {
    auto start = pos_;
    while (pos_ < s_.size() && s_[pos_] != ',' && s_[pos_] != ']' && s_[pos_] != '}') ++pos_;
    return trim(s_.substr(start, pos_ - start));
  }
  std::vector<double> list() {
    ++pos_;
    std::vector<double> out;
    skip();
    if (pos_ < s_.size() && s_[pos_] == ']') {
      ++pos_;
      return out;
    }
    while (true) {
      skip();
      std::string tok = bare();
      auto v = parse_number(tok);
      if (!v) error("list entries must be numbers, got '" + tok + "'");
      out.push_back(*v);
      require_more("']'");
      if (s_[pos_] == ']') {
        ++pos_;
        return out;
      }
      if (s_[pos_] != ',') error("expected ',' or ']' in list");
      ++pos_;
    }
  }
  Table table() {
    ++pos_;
    Table out;
    while (true) {
      skip();
      require_more("'}'");
      if (s_[pos_] == '}') {
        ++pos_;
        return out;
      }
      auto eq = s_.find('=', pos_);
      if (eq == std::string::npos) error("expected 'key = value' in inline table");
      std::string key = trim(s_.substr(pos_, eq - pos_));
      if (key.empty()) error("empty key in inline table");
      pos_ = eq + 1;
      Value v = value();
      if (v.is_table()) error("nested inline tables are not supported");
      if (!out.emplace(key, v).second) error("duplicate key '" + key + "' in inline table");
      skip();
      require_more("'}'");
      if (s_[pos_] == ',') ++pos_;
    }
  }

  const std::string& s_;
  std::size_t pos_ = 0;
  int line_;
  const std::string& origin_;
};

std::string strip_comment(const std::string& line) {
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    if (line[i] == '"') quoted = !quoted;
    if (line[i] == '#' && !quoted) return line.substr(0, i);
  }
  return line;
}

bool valid_key(const std::string& key) {
  return !key.empty() && std::all_of(key.begin(), key.end(), [](char c) {
    return std::isalnum(static_cast<unsigned char>(c)) || c == '_' || c == '-' || c == '.';
  });
}

}  // namespace

Document Document::parse(const std::string& text, const std::string& origin) {
  Document doc;
  doc.origin_ = origin;
  doc.sections_[""];
  std::istringstream is(text);
  std::string raw, section;
  int line = 0;
  while (std::getline(is, raw)) {
    ++line;
    std::string body = trim(strip_comment(raw));
    if (body.empty()) continue;
    if (body.front() == '[') {
      if (body.back() != ']') fail(ErrorCode::config, origin + ":" + std::to_string(line) + ": malformed section header");
      section = trim(body.substr(1, body.size() - 2));
      if (!valid_key(section)) fail(ErrorCode::config, origin + ":" + std::to_string(line) + ": invalid section name");
      doc.sections_[section];
      continue;
    }
    auto eq = body.find('=');
    if (eq == std::string::npos)
      fail(ErrorCode::config, origin + ":" + std::to_string(line) + ": expected 'key = value'");
    std::string key = trim(body.substr(0, eq));
    if (!valid_key(key)) fail(ErrorCode::config, origin + ":" + std::to_string(line) + ": invalid key '" + key + "'");
    std::string rest = body.substr(eq + 1);
    Parser p(rest, line, origin);
    Value v = p.value();
    p.finish();
    auto& sec = doc.sections_[section];
    if (sec.count(key))
      fail(ErrorCode::config, origin + ":" + std::to_string(line) + ": duplicate key '" + key + "'");
    sec.emplace(key, std::move(v));
  }
  return doc;
}

Document Document::load(const std::filesystem::path& path) {
  std::ifstream is(path);
  require(static_cast<bool>(is), ErrorCode::io, "cannot open config " + path.string());
  std::stringstream ss;
  ss << is.rdbuf();
  return parse(ss.str(), path.string());
}

bool Document::has(const std::string& section, const std::string& key) const { return find(section, key) != nullptr; }

const Value* Document::find(const std::string& section, const std::string& key) const {
  auto s = sections_.find(section);
  if (s == sections_.end()) return nullptr;
  auto k = s->second.find(key);
  return k == s->second.end() ? nullptr : &k->second;
}

void Document::fail_at(const std::string& section, const std::string& key, const std::string& what) const {
  const Value* v = find(section, key);
  std::string where = origin_;
  if (v) where += ":" + std::to_string(v->line);
  std::string name = section.empty() ? key : section + "." + key;
  fail(ErrorCode::config, where + ": " + name + ": " + what);
}

double Document::number(const std::string& section, const std::string& key) const {
  const Value* v = find(section, key);
  if (!v) fail_at(section, key, "missing required number");
  if (!v->is_number()) fail_at(section, key, "expected a number");
  return std::get<double>(v->data);
}

double Document::number_or(const std::string& section, const std::string& key, double fallback) const {
  return has(section, key) ? number(section, key) : fallback;
}

std::string Document::string(const std::string& section, const std::string& key) const {
  const Value* v = find(section, key);
  if (!v) fail_at(section, key, "missing required string");
  if (!v->is_string()) fail_at(section, key, "expected a string");
  return std::get<std::string>(v->data);
}

std::string Document::string_or(const std::string& section, const std::string& key, const std::string& fallback) const {
  return has(section, key) ? string(section, key) : fallback;
}

std::vector<double> Document::list(const std::string& section, const std::string& key) const {
  const Value* v = find(section, key);
  if (!v) fail_at(section, key, "missing required list");
  if (v->is_number()) return {std::get<double>(v->data)};
  if (!v->is_list()) fail_at(section, key, "expected a list of numbers");
  return std::get<std::vector<double>>(v->data);
}

const Table& Document::table(const std::string& section, const std::string& key) const {
  const Value* v = find(section, key);
  if (!v) fail_at(section, key, "missing required inline table");
  if (!v->is_table()) fail_at(section, key, "expected an inline table { ... }");
  return std::get<Table>(v->data);
}

void Document::expect_keys(const std::string& section, const std::vector<std::string>& allowed) const {
  auto s = sections_.find(section);
  if (s == sections_.end()) return;
  for (const auto& [key, value] : s->second)
    if (std::find(allowed.begin(), allowed.end(), key) == allowed.end()) fail_at(section, key, "unknown key");
}

std::vector<std::string> Document::sections() const {
  std::vector<std::string> out;
  for (const auto& [name, table] : sections_) out.push_back(name);
  return out;
}

double table_number(const Table& t, const std::string& key, const std::string& context) {
  auto v = table_number_opt(t, key, context);
  if (!v) fail(ErrorCode::config, context + ": missing '" + key + "'");
  return *v;
}

std::optional<double> table_number_opt(const Table& t, const std::string& key, const std::string& context) {
  auto it = t.find(key);
  if (it == t.end()) return std::nullopt;
  if (!it->second.is_number()) fail(ErrorCode::config, context + ": '" + key + "' must be a number");
  return std::get<double>(it->second.data);
}

std::string table_string(const Table& t, const std::string& key, const std::string& context) {
  auto it = t.find(key);
  if (it == t.end()) fail(ErrorCode::config, context + ": missing '" + key + "'");
  if (!it->second.is_string()) fail(ErrorCode::config, context + ": '" + key + "' must be a string");
  return std::get<std::string>(it->second.data);
}

}  // namespace aggdiff::config
