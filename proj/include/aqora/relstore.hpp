#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "aqora/error.hpp"

namespace aqora {

// All column values are 64-bit integers; strings/dates are assumed
// dictionary-encoded upstream. Nulls use one fixed sentinel that never
// matches an equijoin or a predicate.
inline constexpr int64_t kNullSentinel = INT64_MAX;

enum class ColumnKind { Key, ForeignKey, Attribute };

struct ColumnSpec {
    std::string name;
    ColumnKind kind = ColumnKind::Attribute;
    std::string references;     // "table.column", foreign keys only
    double zipf = 0.0;          // fk skew exponent; 0 = uniform
    double null_fraction = 0.0; // fk only
    int64_t domain = 1000;      // attribute value range [0, domain)
};

struct TableSpec {
    std::string name;
    uint64_t rows = 0;
    std::vector<ColumnSpec> columns;
};

struct SchemaSpec {
    std::vector<TableSpec> tables;

    static SchemaSpec from_json_file(const std::string& path);
    static SchemaSpec from_json_text(const std::string& text);
};

struct Column {
    std::string name;
    ColumnKind kind = ColumnKind::Attribute;
    int ref_table = -1;  // resolved catalog ids, fk only
    int ref_column = -1;
    std::vector<int64_t> values;
    uint64_t distinct = 0;
};

struct Relation {
    std::string name;
    uint64_t row_count = 0;
    std::vector<Column> columns;

    int column_index(const std::string& column_name) const;
    const Column& column(int idx) const { return columns.at(static_cast<size_t>(idx)); }
};

using Catalog = std::vector<Relation>;

int table_index(const Catalog& catalog, const std::string& name);

// --- query-side structures ------------------------------------------------

struct ColumnRef {
    int table = -1;
    int column = -1;
    bool operator==(const ColumnRef&) const = default;
    auto operator<=>(const ColumnRef&) const = default;
};

// Equijoin condition; canonical form keeps left.table < right.table.
struct JoinEdge {
    ColumnRef left, right;
    bool operator==(const JoinEdge&) const = default;
    auto operator<=>(const JoinEdge&) const = default;
    JoinEdge canonical() const { return left.table <= right.table ? *this : JoinEdge{right, left}; }
};

// Inclusive range filter; equality when lo == hi. The null sentinel never
// qualifies.
struct Predicate {
    int table = -1;
    int column = -1;
    int64_t lo = INT64_MIN;
    int64_t hi = INT64_MAX - 1;
    bool matches(int64_t v) const { return v != kNullSentinel && v >= lo && v <= hi; }
    bool operator==(const Predicate&) const = default;
};

struct JoinGraph {
    std::vector<int> tables;  // catalog table ids, in listed (syntactic) order
    std::vector<JoinEdge> edges;
    std::vector<Predicate> predicates;

    bool contains(int table) const;
    std::vector<Predicate> predicates_for(int table) const;
    // True when `subset` (bitmask over catalog table ids) induces a connected
    // subgraph of the equijoin edges.
    bool connected(uint64_t subset_mask) const;
    uint64_t all_tables_mask() const;
};

// --- generation -----------------------------------------------------------

// Deterministic for a fixed (schema, seed); validates fk targets and name
// uniqueness before touching any data.
Catalog generate_dataset(const SchemaSpec& schema, uint64_t seed);

void save_dataset(const Catalog& catalog, const std::string& dir);
Catalog load_dataset(const std::string& dir);

// --- evaluation -----------------------------------------------------------

Relation evaluate_filter(const Relation& relation, const Predicate& predicate);

// Row indices of `relation` matching all of `preds` (those on other tables
// are ignored).
std::vector<uint32_t> scan_filter(const Relation& relation, int table_id,
                                  const std::vector<Predicate>& preds);

// Intermediate join result: one row-index column per covered base table.
struct Materialized {
    std::vector<int> tables;                  // ascending catalog ids
    std::vector<std::vector<uint32_t>> rows;  // rows[i][t] = row in tables[i]

    size_t tuple_count() const { return tables.empty() ? 0 : rows.front().size(); }
    int slot_of(int table) const;
};

Materialized materialize_scan(const Catalog& catalog, int table_id,
                              const std::vector<Predicate>& preds);

// Inner equijoin on every edge in `conds`; all edges must span the two
// inputs. Exact, order-independent.
Materialized join_materialized(const Catalog& catalog, const Materialized& left,
                               const Materialized& right, const std::vector<JoinEdge>& conds);

// Exact row count of joining `subset_mask` under every applicable edge and
// predicate of `graph`. Throws DataError when the subset would require a
// Cartesian product.
uint64_t exact_join_cardinality(const Catalog& catalog, const JoinGraph& graph,
                                uint64_t subset_mask);

} // namespace aqora
