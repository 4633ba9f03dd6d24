#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <variant>
#include <vector>

namespace aggdiff::config {

struct Value;
using Table = std::map<std::string, Value>;

// A scalar, a quoted or bare string, a list of numbers, or an inline table.
struct Value {
  std::variant<double, std::string, std::vector<double>, Table> data;
  int line = 0;

  bool is_number() const { return std::holds_alternative<double>(data); }
  bool is_string() const { return std::holds_alternative<std::string>(data); }
  bool is_list() const { return std::holds_alternative<std::vector<double>>(data); }
  bool is_table() const { return std::holds_alternative<Table>(data); }
};

// Line-oriented "key = value" document with [section] headers. Keys before
// the first header belong to the section "".
//   numbers may be fractions (4/3) and carry a "*pi" suffix (12*pi); lists are [a, b, ...];
//   inline tables are { key = value, ... } on one line; '#' starts a comment.
class Document {
 public:
  static Document parse(const std::string& text, const std::string& origin = "<config>");
  static Document load(const std::filesystem::path& path);

  const std::string& origin() const { return origin_; }
  bool has(const std::string& section, const std::string& key) const;
  const Value* find(const std::string& section, const std::string& key) const;

  double number(const std::string& section, const std::string& key) const;
  double number_or(const std::string& section, const std::string& key, double fallback) const;
  std::string string(const std::string& section, const std::string& key) const;
  std::string string_or(const std::string& section, const std::string& key, const std::string& fallback) const;
  std::vector<double> list(const std::string& section, const std::string& key) const;
  const Table& table(const std::string& section, const std::string& key) const;

  // Error naming the origin, line and key.
  [[noreturn]] void fail_at(const std::string& section, const std::string& key, const std::string& what) const;
  // Rejects keys outside `allowed` for the section.
  void expect_keys(const std::string& section, const std::vector<std::string>& allowed) const;
  std::vector<std::string> sections() const;

 private:
  std::string origin_;
  std::map<std::string, Table> sections_;
};

// Helpers for inline tables.
double table_number(const Table& t, const std::string& key, const std::string& context);
std::optional<double> table_number_opt(const Table& t, const std::string& key, const std::string& context);
std::string table_string(const Table& t, const std::string& key, const std::string& context);

}  // namespace aggdiff::config
