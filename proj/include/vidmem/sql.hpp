#pragma once
// Restricted SQL over the single table objects(object_id INT, category TEXT, segment_index INT).
//
//   query       := SELECT select_list FROM objects [WHERE cond] [GROUP BY col]
//                  [ORDER BY col [ASC|DESC]] [LIMIT n] [';']
//   select_list := '*' | item (',' item)*
//   item        := col | COUNT(*) | COUNT(DISTINCT col) | MIN(col) | MAX(col)
//   cond        := cond AND cond | cond OR cond | NOT cond | '(' cond ')'
//                | col op literal | col IN '(' literal (',' literal)* ')'
//   op          := '=' | '!=' | '<' | '<=' | '>' | '>='
//
// Keywords and identifiers are case-insensitive. Joins, subqueries, DDL and
// DML are rejected with the construct named in the error.

#include <cstdint>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "json.hpp"
#include "vidmem/object_memory.hpp"

namespace vidmem::sql {

using Value = std::variant<std::monostate, std::int64_t, std::string>;

std::string to_string(const Value& v);

enum class Column { object_id, category, segment_index };
std::string_view column_name(Column c);

enum class Aggregate { none, count_star, count_distinct, min, max };

struct SelectItem {
  Aggregate agg = Aggregate::none;
  Column column = Column::object_id;  // unused for COUNT(*)
  std::string label() const;
};

enum class CompareOp { eq, ne, lt, le, gt, ge };

struct Condition {
  enum class Kind { and_, or_, not_, compare, in } kind = Kind::compare;
  CompareOp op = CompareOp::eq;
  Column column = Column::object_id;
  std::vector<Value> values;  // one for compare, several for IN
  std::shared_ptr<const Condition> lhs;
  std::shared_ptr<const Condition> rhs;
};

struct OrderBy {
  Column column = Column::object_id;
  bool descending = false;
};

struct Query {
  bool star = false;
  std::vector<SelectItem> items;
  std::shared_ptr<const Condition> where;
  std::optional<Column> group_by;
  std::optional<OrderBy> order_by;
  std::optional<std::int64_t> limit;
};

/// Throws SqlError (carrying the byte position) on syntax errors, unknown
/// tables/columns, type mismatches and unsupported constructs.
Query parse(std::string_view text);

struct ResultTable {
  std::vector<std::string> columns;
  std::vector<std::vector<Value>> rows;

  /// Header line then one line per row, cells joined by " | ".
  std::string render() const;
  nlohmann::json to_json() const;

  friend bool operator==(const ResultTable&, const ResultTable&) = default;
};

/// Evaluates against rows given in (object_id, segment_index) order. Without
/// ORDER BY, plain selects keep that order and groups come out by ascending key.
ResultTable execute(const Query& query, std::span<const OccurrenceRow> rows);

ResultTable execute_query(const ObjectMemory& mem, std::string_view text);

}  // namespace vidmem::sql
