#include "vidmem/sql.hpp"

#include <algorithm>
#include <array>
#include <cctype>
#include <map>
#include <set>

#include "vidmem/error.hpp"
#include "vidmem/util.hpp"

namespace vidmem::sql {

namespace {

enum class Tok { word, integer, string, symbol, end };

struct Token {
  Tok kind = Tok::end;
  std::string text;  // words upper-cased; symbols verbatim; strings unescaped
  std::int64_t number = 0;
  std::size_t pos = 0;
};

std::vector<Token> tokenize(std::string_view s) {
  std::vector<Token> out;
  std::size_t i = 0;
  while (i < s.size()) {
    const char c = s[i];
    if (std::isspace(static_cast<unsigned char>(c))) {
      ++i;
      continue;
    }
    Token t;
    t.pos = i;
    if (std::isalpha(static_cast<unsigned char>(c)) || c == '_') {
      std::size_t j = i;
      while (j < s.size() && (std::isalnum(static_cast<unsigned char>(s[j])) || s[j] == '_')) ++j;
      t.kind = Tok::word;
      t.text = util::to_lower(s.substr(i, j - i));
      std::transform(t.text.begin(), t.text.end(), t.text.begin(),
                     [](unsigned char ch) { return static_cast<char>(std::toupper(ch)); });
      i = j;
    } else if (std::isdigit(static_cast<unsigned char>(c)) ||
               (c == '-' && i + 1 < s.size() && std::isdigit(static_cast<unsigned char>(s[i + 1])))) {
      std::size_t j = i + 1;
      while (j < s.size() && std::isdigit(static_cast<unsigned char>(s[j]))) ++j;
      t.kind = Tok::integer;
      t.text = std::string(s.substr(i, j - i));
      try {
        t.number = std::stoll(t.text);
      } catch (const std::exception&) {
        throw SqlError("integer literal out of range", i);
      }
      i = j;
    } else if (c == '\'') {
      std::string v;
      std::size_t j = i + 1;
      for (;;) {
        if (j >= s.size()) throw SqlError("unterminated string literal", i);
        if (s[j] == '\'') {
          if (j + 1 < s.size() && s[j + 1] == '\'') {
            v += '\'';
            j += 2;
            continue;
          }
          break;
        }
        v += s[j++];
      }
      t.kind = Tok::string;
      t.text = std::move(v);
      i = j + 1;
    } else if (c == '"' || c == '`') {
      throw SqlError("quoted identifiers are not supported", i);
    } else {
      static constexpr std::array two = {"!=", "<>", "<=", ">="};
      t.kind = Tok::symbol;
      const auto rest = s.substr(i);
      bool matched = false;
      for (const char* op : two) {
        if (rest.starts_with(op)) {
          t.text = op;
          i += 2;
          matched = true;
          break;
        }
      }
      if (!matched) {
        if (std::string_view("*,()=<>;").find(c) == std::string_view::npos) {
          throw SqlError(std::string("unexpected character '") + c + "'", i);
        }
        t.text = std::string(1, c);
        ++i;
      }
    }
    out.push_back(std::move(t));
  }
  Token end;
  end.pos = s.size();
  out.push_back(end);
  return out;
}

bool is_unsupported_keyword(const std::string& w) {
  static const std::set<std::string> words = {
      "INSERT", "UPDATE", "DELETE", "DROP",    "CREATE",  "ALTER",    "TRUNCATE", "REPLACE", "PRAGMA",
      "ATTACH", "WITH",   "JOIN",   "INNER",   "LEFT",    "RIGHT",    "FULL",     "CROSS",   "NATURAL",
      "UNION",  "EXCEPT", "INTERSECT", "HAVING", "OFFSET", "LIKE",    "BETWEEN",  "IS",      "AS",
      "CASE",   "EXISTS", "SUM",    "AVG",     "GLOB",    "VALUES"};
  return words.contains(w);
}

class Parser {
 public:
  explicit Parser(std::string_view text) : toks_(tokenize(text)) {}

  Query parse_query() {
    if (peek().kind == Tok::word && peek().text != "SELECT" && is_unsupported_keyword(peek().text)) {
      unsupported(peek());
    }
    expect_word("SELECT");
    Query q;
    if (peek().kind == Tok::word && peek().text == "DISTINCT") {
      throw SqlError("unsupported construct: SELECT DISTINCT (use COUNT(DISTINCT col) or GROUP BY)", peek().pos);
    }
    if (accept_symbol("*")) {
      q.star = true;
    } else {
      q.items.push_back(parse_item());
      while (accept_symbol(",")) q.items.push_back(parse_item());
    }
    expect_word("FROM");
    const Token& table = next();
    if (table.kind == Tok::symbol && table.text == "(") {
      throw SqlError("unsupported construct: subquery", table.pos);
    }
    if (table.kind != Tok::word || table.text != "OBJECTS") {
      throw SqlError("unknown table '" + util::to_lower(table.text) + "' (only 'objects' exists)", table.pos);
    }
    if (accept_word("WHERE")) q.where = parse_or();
    if (accept_word("GROUP")) {
      expect_word("BY");
      q.group_by = parse_column();
    }
    if (accept_word("ORDER")) {
      expect_word("BY");
      OrderBy ob;
      ob.column = parse_column();
      if (accept_word("DESC")) {
        ob.descending = true;
      } else {
        accept_word("ASC");
      }
      q.order_by = ob;
    }
    if (accept_word("LIMIT")) {
      const Token& n = next();
      if (n.kind != Tok::integer || n.number < 0) throw SqlError("LIMIT expects a non-negative integer", n.pos);
      q.limit = n.number;
    }
    accept_symbol(";");
    if (peek().kind != Tok::end) {
      if (peek().kind == Tok::word && is_unsupported_keyword(peek().text)) unsupported(peek());
      if (peek().kind == Tok::symbol && peek().text == ",") {
        throw SqlError("unsupported construct: multiple tables", peek().pos);
      }
      throw SqlError("unexpected '" + peek().text + "' after end of query", peek().pos);
    }
    validate(q);
    return q;
  }

 private:
  [[noreturn]] static void unsupported(const Token& t) {
    throw SqlError("unsupported construct: " + t.text, t.pos);
  }

  const Token& peek() const { return toks_[pos_]; }
  const Token& next() {
    const Token& t = toks_[pos_];
    if (t.kind != Tok::end) ++pos_;
    return t;
  }
  bool accept_word(std::string_view w) {
    if (peek().kind == Tok::word && peek().text == w) {
      ++pos_;
      return true;
    }
    return false;
  }
  bool accept_symbol(std::string_view s) {
    if (peek().kind == Tok::symbol && peek().text == s) {
      ++pos_;
      return true;
    }
    return false;
  }
  void expect_word(std::string_view w) {
    if (!accept_word(w)) {
      if (peek().kind == Tok::word && is_unsupported_keyword(peek().text)) unsupported(peek());
      throw SqlError("expected " + std::string(w) + describe_found(), peek().pos);
    }
  }
  void expect_symbol(std::string_view s) {
    if (!accept_symbol(s)) throw SqlError("expected '" + std::string(s) + "'" + describe_found(), peek().pos);
  }
  std::string describe_found() const {
    return peek().kind == Tok::end ? " but reached end of query" : " but found '" + peek().text + "'";
  }

  Column parse_column() {
    const Token& t = next();
    if (t.kind != Tok::word) throw SqlError("expected a column name", t.pos);
    if (t.text == "OBJECT_ID") return Column::object_id;
    if (t.text == "CATEGORY") return Column::category;
    if (t.text == "SEGMENT_INDEX") return Column::segment_index;
    if (t.text == "SELECT") throw SqlError("unsupported construct: subquery", t.pos);
    if (is_unsupported_keyword(t.text)) unsupported(t);
    throw SqlError("unknown column '" + util::to_lower(t.text) + "'", t.pos);
  }

  SelectItem parse_item() {
    const Token& t = peek();
    if (t.kind == Tok::word && (t.text == "COUNT" || t.text == "MIN" || t.text == "MAX")) {
      const std::string fn = t.text;
      next();
      expect_symbol("(");
      SelectItem item;
      if (fn == "COUNT") {
        if (accept_symbol("*")) {
          item.agg = Aggregate::count_star;
        } else if (accept_word("DISTINCT")) {
          item.agg = Aggregate::count_distinct;
          item.column = parse_column();
        } else {
          throw SqlError("unsupported construct: COUNT(col) (use COUNT(*) or COUNT(DISTINCT col))", peek().pos);
        }
      } else {
        item.agg = fn == "MIN" ? Aggregate::min : Aggregate::max;
        item.column = parse_column();
      }
      expect_symbol(")");
      return item;
    }
    if (t.kind == Tok::word && is_unsupported_keyword(t.text)) unsupported(t);
    return {Aggregate::none, parse_column()};
  }

  Value parse_literal(Column col) {
    const Token& t = next();
    const bool int_col = col != Column::category;
    if (t.kind == Tok::integer) {
      if (!int_col) throw SqlError("type mismatch: column category compared with an integer", t.pos);
      return t.number;
    }
    if (t.kind == Tok::string) {
      if (int_col) {
        throw SqlError("type mismatch: column " + std::string(column_name(col)) + " compared with a string", t.pos);
      }
      return t.text;
    }
    if (t.kind == Tok::symbol && t.text == "(") throw SqlError("unsupported construct: subquery", t.pos);
    throw SqlError("expected a literal", t.pos);
  }

  std::shared_ptr<const Condition> parse_or() {
    auto lhs = parse_and();
    while (accept_word("OR")) {
      auto c = std::make_shared<Condition>();
      c->kind = Condition::Kind::or_;
      c->lhs = lhs;
      c->rhs = parse_and();
      lhs = c;
    }
    return lhs;
  }

  std::shared_ptr<const Condition> parse_and() {
    auto lhs = parse_not();
    while (accept_word("AND")) {
      auto c = std::make_shared<Condition>();
      c->kind = Condition::Kind::and_;
      c->lhs = lhs;
      c->rhs = parse_not();
      lhs = c;
    }
    return lhs;
  }

  std::shared_ptr<const Condition> parse_not() {
    if (accept_word("NOT")) {
      auto c = std::make_shared<Condition>();
      c->kind = Condition::Kind::not_;
      c->lhs = parse_not();
      return c;
    }
    return parse_primary();
  }

  std::shared_ptr<const Condition> parse_primary() {
    if (accept_symbol("(")) {
      if (peek().kind == Tok::word && peek().text == "SELECT") {
        throw SqlError("unsupported construct: subquery", peek().pos);
      }
      auto inner = parse_or();
      expect_symbol(")");
      return inner;
    }
    auto c = std::make_shared<Condition>();
    c->column = parse_column();
    if (accept_word("IN")) {
      c->kind = Condition::Kind::in;
      expect_symbol("(");
      if (peek().kind == Tok::word && peek().text == "SELECT") {
        throw SqlError("unsupported construct: subquery", peek().pos);
      }
      c->values.push_back(parse_literal(c->column));
      while (accept_symbol(",")) c->values.push_back(parse_literal(c->column));
      expect_symbol(")");
      return c;
    }
    const Token& op = next();
    if (op.kind == Tok::word && is_unsupported_keyword(op.text)) unsupported(op);
    if (op.kind == Tok::word && op.text == "NOT") throw SqlError("unsupported construct: NOT IN (use NOT col IN)", op.pos);
    if (op.kind != Tok::symbol) throw SqlError("expected a comparison operator or IN", op.pos);
    if (op.text == "=") {
      c->op = CompareOp::eq;
    } else if (op.text == "!=" || op.text == "<>") {
      c->op = CompareOp::ne;
    } else if (op.text == "<") {
      c->op = CompareOp::lt;
    } else if (op.text == "<=") {
      c->op = CompareOp::le;
    } else if (op.text == ">") {
      c->op = CompareOp::gt;
    } else if (op.text == ">=") {
      c->op = CompareOp::ge;
    } else {
      throw SqlError("expected a comparison operator or IN", op.pos);
    }
    c->values.push_back(parse_literal(c->column));
    return c;
  }

  void validate(const Query& q) const {
    const std::size_t at = 0;
    const bool has_agg = std::any_of(q.items.begin(), q.items.end(),
                                     [](const SelectItem& i) { return i.agg != Aggregate::none; });
    if (q.group_by) {
      if (q.star) throw SqlError("SELECT * cannot be combined with GROUP BY", at);
      for (const auto& i : q.items) {
        if (i.agg == Aggregate::none && i.column != *q.group_by) {
          throw SqlError("column " + std::string(column_name(i.column)) + " must appear in GROUP BY", at);
        }
      }
      if (q.order_by && q.order_by->column != *q.group_by) {
        throw SqlError("ORDER BY on grouped results must use the GROUP BY column", at);
      }
    } else if (has_agg) {
      for (const auto& i : q.items) {
        if (i.agg == Aggregate::none) {
          throw SqlError("column " + std::string(column_name(i.column)) +
                             " mixed with aggregates needs GROUP BY " + std::string(column_name(i.column)),
                         at);
        }
      }
    }
  }

  std::vector<Token> toks_;
  std::size_t pos_ = 0;
};

Value column_value(const OccurrenceRow& r, Column c) {
  switch (c) {
    case Column::object_id:
      return r.object_id;
    case Column::category:
      return r.category;
    case Column::segment_index:
      return r.segment_index;
  }
  return {};
}

bool evaluate(const Condition& c, const OccurrenceRow& r) {
  switch (c.kind) {
    case Condition::Kind::and_:
      return evaluate(*c.lhs, r) && evaluate(*c.rhs, r);
    case Condition::Kind::or_:
      return evaluate(*c.lhs, r) || evaluate(*c.rhs, r);
    case Condition::Kind::not_:
      return !evaluate(*c.lhs, r);
    case Condition::Kind::in: {
      const Value v = column_value(r, c.column);
      return std::find(c.values.begin(), c.values.end(), v) != c.values.end();
    }
    case Condition::Kind::compare:
      break;
  }
  const Value v = column_value(r, c.column);
  const Value& lit = c.values.front();
  switch (c.op) {
    case CompareOp::eq:
      return v == lit;
    case CompareOp::ne:
      return v != lit;
    case CompareOp::lt:
      return v < lit;
    case CompareOp::le:
      return v <= lit;
    case CompareOp::gt:
      return v > lit;
    case CompareOp::ge:
      return v >= lit;
  }
  return false;
}

Value aggregate(const SelectItem& item, const std::vector<const OccurrenceRow*>& rows) {
  switch (item.agg) {
    case Aggregate::count_star:
      return static_cast<std::int64_t>(rows.size());
    case Aggregate::count_distinct: {
      std::set<Value> distinct;
      for (const auto* r : rows) distinct.insert(column_value(*r, item.column));
      return static_cast<std::int64_t>(distinct.size());
    }
    case Aggregate::min:
    case Aggregate::max: {
      if (rows.empty()) return std::monostate{};
      Value best = column_value(*rows.front(), item.column);
      for (const auto* r : rows) {
        const Value v = column_value(*r, item.column);
        if (item.agg == Aggregate::min ? v < best : v > best) best = v;
      }
      return best;
    }
    case Aggregate::none:
      break;
  }
  return column_value(*rows.front(), item.column);
}

}  // namespace

std::string to_string(const Value& v) {
  if (std::holds_alternative<std::int64_t>(v)) return std::to_string(std::get<std::int64_t>(v));
  if (std::holds_alternative<std::string>(v)) return std::get<std::string>(v);
  return "NULL";
}

std::string_view column_name(Column c) {
  switch (c) {
    case Column::object_id:
      return "object_id";
    case Column::category:
      return "category";
    case Column::segment_index:
      return "segment_index";
  }
  return "?";
}

std::string SelectItem::label() const {
  const std::string col(column_name(column));
  switch (agg) {
    case Aggregate::count_star:
      return "COUNT(*)";
    case Aggregate::count_distinct:
      return "COUNT(DISTINCT " + col + ")";
    case Aggregate::min:
      return "MIN(" + col + ")";
    case Aggregate::max:
      return "MAX(" + col + ")";
    case Aggregate::none:
      break;
  }
  return col;
}

Query parse(std::string_view text) { return Parser(text).parse_query(); }

std::string ResultTable::render() const {
  std::string out = util::join(columns, " | ");
  for (const auto& row : rows) {
    std::vector<std::string> cells;
    for (const auto& v : row) cells.push_back(to_string(v));
    out += "\n" + util::join(cells, " | ");
  }
  if (rows.empty()) out += "\n(no rows)";
  return out;
}

nlohmann::json ResultTable::to_json() const {
  nlohmann::json rs = nlohmann::json::array();
  for (const auto& row : rows) {
    nlohmann::json r = nlohmann::json::array();
    for (const auto& v : row) {
      if (std::holds_alternative<std::int64_t>(v)) {
        r.push_back(std::get<std::int64_t>(v));
      } else if (std::holds_alternative<std::string>(v)) {
        r.push_back(std::get<std::string>(v));
      } else {
        r.push_back(nullptr);
      }
    }
    rs.push_back(std::move(r));
  }
  return {{"columns", columns}, {"rows", rs}};
}

ResultTable execute(const Query& q, std::span<const OccurrenceRow> rows) {
  std::vector<const OccurrenceRow*> selected;
  for (const auto& r : rows) {
    if (!q.where || evaluate(*q.where, r)) selected.push_back(&r);
  }

  const auto sort_rows = [&](std::vector<const OccurrenceRow*>& rs) {
    if (!q.order_by) return;
    const auto col = q.order_by->column;
    const bool desc = q.order_by->descending;
    std::stable_sort(rs.begin(), rs.end(), [&](const OccurrenceRow* a, const OccurrenceRow* b) {
      const Value va = column_value(*a, col);
      const Value vb = column_value(*b, col);
      return desc ? vb < va : va < vb;
    });
  };

  ResultTable out;
  const bool has_agg = std::any_of(q.items.begin(), q.items.end(),
                                   [](const SelectItem& i) { return i.agg != Aggregate::none; });
  if (q.star) {
    out.columns = {"object_id", "category", "segment_index"};
  } else {
    for (const auto& i : q.items) out.columns.push_back(i.label());
  }

  if (q.group_by) {
    std::map<Value, std::vector<const OccurrenceRow*>> groups;
    for (const auto* r : selected) groups[column_value(*r, *q.group_by)].push_back(r);
    for (const auto& [key, members] : groups) {
      std::vector<Value> row;
      for (const auto& i : q.items) row.push_back(aggregate(i, members));
      out.rows.push_back(std::move(row));
    }
    if (q.order_by && q.order_by->descending) std::reverse(out.rows.begin(), out.rows.end());
  } else if (has_agg) {
    std::vector<Value> row;
    for (const auto& i : q.items) row.push_back(aggregate(i, selected));
    out.rows.push_back(std::move(row));
  } else {
    sort_rows(selected);
    for (const auto* r : selected) {
      std::vector<Value> row;
      if (q.star) {
        row = {r->object_id, r->category, r->segment_index};
      } else {
        for (const auto& i : q.items) row.push_back(column_value(*r, i.column));
      }
      out.rows.push_back(std::move(row));
    }
  }
  if (q.limit && out.rows.size() > static_cast<std::size_t>(*q.limit)) {
    out.rows.resize(static_cast<std::size_t>(*q.limit));
  }
  return out;
}

ResultTable execute_query(const ObjectMemory& mem, std::string_view text) { return execute(parse(text), mem.rows()); }

}  // namespace vidmem::sql
