#include "doctest.h"
#include "sql_golden.hpp"
#include "support.hpp"
#include "vidmem/error.hpp"

using namespace vidmem;

namespace {

ObjectMemory golden_memory() {
  const auto world = std::make_shared<const SyntheticWorld>(gen_world(11, vt::golden_world_params()));
  return vt::bundle_for(*world, world_to_suite(world)).objects;
}

std::size_t error_position(std::string_view q) {
  try {
    sql::parse(q);
  } catch (const SqlError& e) {
    return e.position;
  }
  FAIL("no SqlError for: " << q);
  return 0;
}

std::string error_text(std::string_view q) {
  try {
    sql::parse(q);
  } catch (const SqlError& e) {
    return e.what();
  }
  return "(accepted)";
}

}  // namespace

TEST_CASE("golden queries match SQLite row for row") {
  const auto mem = golden_memory();
  REQUIRE(mem.rows().size() > 50);
  const vt::SqliteOracle oracle(mem.rows());
  std::size_t non_empty = 0;
  for (const auto& g : vt::golden_queries()) {
    CAPTURE(g.query);
    const auto got = sql::execute_query(mem, g.query);
    const auto want = oracle.query(g.oracle);
    CHECK(got.rows == want);
    non_empty += !want.empty() && !(want.size() == 1 && want[0][0] == sql::Value{std::int64_t{0}});
  }
  CHECK(vt::golden_queries().size() == 30);
  CHECK(non_empty >= 20);
}

TEST_CASE("random conjunctive filters match SQLite") {
  const auto mem = golden_memory();
  const vt::SqliteOracle oracle(mem.rows());
  std::mt19937_64 rng(5);
  const char* cols[] = {"object_id", "segment_index"};
  const char* ops[] = {"=", "!=", "<", "<=", ">", ">="};
  for (int trial = 0; trial < 200; ++trial) {
    std::string where;
    const int terms = 1 + static_cast<int>(rng() % 3);
    for (int t = 0; t < terms; ++t) {
      if (t) where += rng() % 2 ? " AND " : " OR ";
      if (rng() % 4 == 0) where += "NOT ";
      where += std::string(cols[rng() % 2]) + " " + ops[rng() % 6] + " " + std::to_string(rng() % 40);
    }
    const std::string q = "SELECT * FROM objects WHERE " + where;
    CAPTURE(q);
    CHECK(sql::execute_query(mem, q).rows == oracle.query(q + " ORDER BY object_id, segment_index"));
    const std::string c = "SELECT COUNT(*), COUNT(DISTINCT object_id) FROM objects WHERE " + where;
    CHECK(sql::execute_query(mem, c).rows == oracle.query(c));
  }
}

TEST_CASE("elephant world: two distinct elephants") {
  const auto world = vt::elephant_world();
  const auto bundle = vt::bundle_for(*world, world_to_suite(world));
  const auto r = sql::execute_query(bundle.objects,
                                    "SELECT COUNT(DISTINCT object_id) FROM objects WHERE category = 'elephant'");
  REQUIRE(r.rows.size() == 1);
  CHECK(r.rows[0][0] == sql::Value{std::int64_t{2}});
  CHECK(r.render() == "COUNT(DISTINCT object_id)\n2");
  CHECK(r.to_json().dump() == R"j({"columns":["COUNT(DISTINCT object_id)"],"rows":[[2]]})j");
}

TEST_CASE("rendering") {
  const ObjectMemory mem({{0, "cup", {1, 2}, Embedding({1.0, 0.0})}, {1, "dog", {2}, Embedding({0.0, 1.0})}});
  CHECK(sql::execute_query(mem, "SELECT * FROM objects").render() ==
        "object_id | category | segment_index\n0 | cup | 1\n0 | cup | 2\n1 | dog | 2");
  CHECK(sql::execute_query(mem, "SELECT category FROM objects WHERE object_id = 9").render() == "category\n(no rows)");
  CHECK(sql::execute_query(mem, "SELECT MIN(segment_index) FROM objects WHERE object_id = 9").render() ==
        "MIN(segment_index)\nNULL");
  CHECK(sql::execute_query(mem, "SELECT category, COUNT(*) FROM objects GROUP BY category").render() ==
        "category | COUNT(*)\ncup | 2\ndog | 1");
  CHECK(sql::execute_query(mem, "SELECT * FROM objects WHERE category = 'it''s'").rows.empty());
}

TEST_CASE("parse accepts the grammar") {
  const auto q = sql::parse(
      "select object_id, count(*) from objects where category in ('cup','dog') and not segment_index >= 3 "
      "group by object_id order by object_id desc limit 4;");
  CHECK(!q.star);
  REQUIRE(q.items.size() == 2);
  CHECK(q.items[1].agg == sql::Aggregate::count_star);
  CHECK(q.group_by == sql::Column::object_id);
  REQUIRE(q.order_by);
  CHECK(q.order_by->descending);
  CHECK(q.limit == 4);
  REQUIRE(q.where);
  CHECK(q.where->kind == sql::Condition::Kind::and_);
}

TEST_CASE("parse errors name the construct and the position") {
  CHECK(error_position("SELECT * FROM users") == 14);
  CHECK(error_text("SELECT * FROM users").find("unknown table 'users'") != std::string::npos);
  CHECK(error_position("SELECT nope FROM objects") == 7);
  CHECK(error_text("SELECT nope FROM objects").find("unknown column 'nope'") != std::string::npos);
  CHECK(error_text("DROP TABLE objects").find("unsupported construct: DROP") != std::string::npos);
  CHECK(error_position("DROP TABLE objects") == 0);
  CHECK(error_text("DELETE FROM objects").find("unsupported construct: DELETE") != std::string::npos);
  CHECK(error_text("INSERT INTO objects VALUES (1, 'a', 2)").find("unsupported construct") != std::string::npos);
  CHECK(error_text("UPDATE objects SET category = 'x'").find("unsupported construct") != std::string::npos);
  CHECK(error_text("SELECT * FROM objects JOIN objects").find("unsupported construct: JOIN") != std::string::npos);
  CHECK(error_text("SELECT * FROM objects, objects").find("multiple tables") != std::string::npos);
  CHECK(error_text("SELECT * FROM objects WHERE object_id IN (SELECT object_id FROM objects)")
            .find("subquery") != std::string::npos);
  CHECK(error_text("SELECT * FROM (SELECT * FROM objects)").find("subquery") != std::string::npos);
  CHECK(error_text("SELECT DISTINCT category FROM objects").find("SELECT DISTINCT") != std::string::npos);
  CHECK(error_text("SELECT COUNT(category) FROM objects").find("COUNT(col)") != std::string::npos);
  CHECK(error_text("SELECT * FROM objects WHERE object_id NOT IN (1)").find("NOT IN") != std::string::npos);
  CHECK(error_text("SELECT * FROM objects WHERE category = 3").find("type mismatch") != std::string::npos);
  CHECK(error_text("SELECT * FROM objects WHERE object_id = 'a'").find("type mismatch") != std::string::npos);
  CHECK(error_text("SELECT category, COUNT(*) FROM objects").find("GROUP BY") != std::string::npos);
  CHECK(error_text("SELECT category, COUNT(*) FROM objects GROUP BY category ORDER BY object_id")
            .find("GROUP BY column") != std::string::npos);
  CHECK(error_text("SELECT * FROM objects WHERE category = 'cup").find("unterminated") != std::string::npos);
  CHECK(error_text("SELECT * FROM objects LIMIT -1").find("LIMIT") != std::string::npos);
  CHECK(error_text("SELECT * FROM objects WHERE \"category\" = 'cup'").find("quoted identifiers") !=
        std::string::npos);
  CHECK(error_text("SELECT * FROM objects extra").find("after end of query") != std::string::npos);
  CHECK(error_position("SELECT * FROM objects WHERE object_id = 1 @") == 42);
  CHECK(error_text("").find("expected SELECT") != std::string::npos);
}

TEST_CASE("SQL never fails with anything but SqlError on junk input") {
  std::mt19937_64 rng(9);
  const std::vector<std::string> pieces = {"SELECT", "*",  "FROM",     "objects", "WHERE", "category", "=",
                                           "'cup'",  "(",  ")",        ",",       "COUNT", "DISTINCT", "GROUP",
                                           "BY",     "1",  "object_id", "AND",    "OR",    "NOT",      "LIMIT",
                                           "ORDER",  "IN", "<=",       ";",       "MIN",   "x"};
  const ObjectMemory mem({{0, "cup", {1}, Embedding({1.0})}});
  for (int trial = 0; trial < 3000; ++trial) {
    std::string q;
    const auto n = 1 + rng() % 12;
    for (std::size_t i = 0; i < n; ++i) q += pieces[rng() % pieces.size()] + " ";
    try {
      sql::execute_query(mem, q);
    } catch (const SqlError& e) {
      CHECK(e.position <= q.size());
    }
  }
}
